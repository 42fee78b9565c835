use super::nested::{Accumulation, NestedQuadrature};
use super::{clamp_probability, PowerSchedule, SystemConfig};
use crate::error::{Error, Result};
use crate::specfun::{gauss_legendre, log_gamma, upper_gamma_regularized};

/// Gauss-Legendre order per integrated dimension of the nested quadrature.
pub const NESTED_QUADRATURE_ORDER: usize = 256;

/// Largest round count the nested IR quadrature handles (two integrated
/// dimensions plus the closed-form inner one).
pub const IR_MAX_QUADRATURE_ROUNDS: usize = 3;

/// IR-HARQ outage after `rounds` rounds, `Pr{Σ_{k≤l} log2(1 + P_k g_k) < R}`,
/// by nested quadrature over the Gamma densities of the channel gains.
pub fn ir_outage_exact(config: &SystemConfig, schedule: &PowerSchedule, rounds: usize) -> Result<f64> {
    config.check_schedule(schedule)?;
    config.check_rounds(rounds)?;
    if rounds > IR_MAX_QUADRATURE_ROUNDS {
        return Err(Error::UnsupportedDimension { rounds, max: IR_MAX_QUADRATURE_ROUNDS });
    }
    let powers: Vec<f64> = schedule.powers()[..rounds].iter().copied().filter(|p| *p > 0.0).collect();
    if powers.is_empty() {
        return Ok(1.0);
    }
    let nested = NestedQuadrature::new(config.num_rx, Accumulation::MutualInformation, NESTED_QUADRATURE_ORDER)?;
    Ok(clamp_probability(nested.cdf(config.threshold(), &powers)?, "IR nested quadrature"))
}

/// Which form of the round-`k ≥ 2` convolution kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelForm {
    /// `(e^{-t} - 1)^{N-1} e^{t + (1 - e^{-t})/P} / (Pᴺ Γ(N)) · u(-t)`, the
    /// kernel as usually printed. It drops the `e^{-t}` Jacobian of
    /// `δ(t + ln(1 + r))` and overstates the low-gain tail.
    Printed,
    /// `(e^{-t} - 1)^{N-1} e^{(1 - e^{-t})/P} / (Pᴺ Γ(N)) · u(-t)`, the inverse
    /// Laplace transform of `E[(1 + P g)^{s-1}]` with the `δ` Jacobian kept.
    JacobianCorrected,
}

/// Convolution kernel `q_k(t)` of the IR-HARQ outage
/// `p_out,l = 2^R g_l(-R ln 2) - g_l(0)`, `g_l = q_1 * ... * q_l`.
///
/// `q_1(t) = -e^t (1 - γ(N, (e^{-t} - 1)/P_1)) u(-t) - e^t (1 - u(-t))`;
/// the round `k ≥ 2` kernels depend on `form`.
pub fn ir_q_kernel(
    round_index: usize,
    t: f64,
    config: &SystemConfig,
    schedule: &PowerSchedule,
    form: KernelForm,
) -> Result<f64> {
    config.check_schedule(schedule)?;
    if round_index == 0 || round_index > config.max_rounds {
        return Err(Error::invalid(format!("round index {round_index} outside 1..={}", config.max_rounds)));
    }
    if !t.is_finite() {
        return Err(Error::invalid(format!("kernel argument must be finite, got {t}")));
    }
    let p = schedule.powers()[round_index - 1];
    if p <= 0.0 {
        return Err(Error::invalid(format!("kernel q_{round_index} needs a positive power, got {p}")));
    }
    let n = config.shape();
    let kernel = Kernels { shape: n, ln_gamma_shape: log_gamma(n)? };
    if round_index == 1 {
        kernel.first(t, p)
    } else {
        Ok(kernel.later(t, p, form))
    }
}

struct Kernels {
    shape: f64,
    ln_gamma_shape: f64,
}

impl Kernels {
    fn first(&self, t: f64, p: f64) -> Result<f64> {
        if t >= 0.0 {
            return Ok(-t.exp());
        }
        let r = (-t).exp_m1();
        Ok(-t.exp() * upper_gamma_regularized(self.shape, r / p)?)
    }

    fn later(&self, t: f64, p: f64, form: KernelForm) -> f64 {
        if t >= 0.0 {
            return 0.0;
        }
        let r = (-t).exp_m1();
        let mut log_value = (self.shape - 1.0) * r.ln() - r / p - self.shape * p.ln() - self.ln_gamma_shape;
        if form == KernelForm::Printed {
            log_value += t;
        }
        log_value.exp()
    }
}

/// Two-round IR-HARQ outage through the kernel convolution
/// `2^R g_2(-R ln 2) - g_2(0)` with `g_2(t) = ∫₀^∞ q_1(t + s) q_2(-s) ds`.
///
/// Integrated by composite Gauss-Legendre panels, split where `q_1` changes
/// branch. Independent of the nested quadrature in [`ir_outage_exact`] and
/// used to cross-check it.
pub fn ir_convolution_outage(config: &SystemConfig, schedule: &PowerSchedule, form: KernelForm) -> Result<f64> {
    config.check_schedule(schedule)?;
    if config.max_rounds < 2 {
        return Err(Error::invalid("the convolution cross-check needs at least two rounds"));
    }
    let (p1, p2) = (schedule.powers()[0], schedule.powers()[1]);
    if p1 <= 0.0 || p2 <= 0.0 {
        return Err(Error::invalid("the convolution cross-check needs positive P1 and P2"));
    }
    let n = config.shape();
    let kernels = Kernels { shape: n, ln_gamma_shape: log_gamma(n)? };

    // q_2(-s) ~ exp((N-1)s - e^s / P_2): beyond this the integrand is below e^{-70}.
    let mut s_max: f64 = 1.0;
    for _ in 0..50 {
        s_max = (p2 * (75.0 + n * s_max)).ln_1p();
    }
    let panel_rule = gauss_legendre(24)?;

    let g2 = |t: f64| -> Result<f64> {
        let mut breaks = vec![0.0];
        if -t > 0.0 && -t < s_max {
            breaks.push(-t);
        }
        breaks.push(s_max);
        let mut total = 0.0;
        for seg in breaks.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let panels = ((b - a) / 0.05).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            for j in 0..panels {
                let lo = a + j as f64 * h;
                for (x, w) in panel_rule.nodes().iter().zip(panel_rule.weights()) {
                    let s = lo + 0.5 * h * (x + 1.0);
                    total += 0.5 * h * w * kernels.first(t + s, p1)? * kernels.later(-s, p2, form);
                }
            }
        }
        Ok(total)
    };

    let rate = config.rate;
    let value = rate.exp2() * g2(-rate * std::f64::consts::LN_2)? - g2(0.0)?;
    Ok(clamp_probability(value, "IR kernel convolution"))
}
