use std::f64::consts::PI;

use super::nested::{Accumulation, NestedQuadrature};
use super::{clamp_probability, ir::NESTED_QUADRATURE_ORDER, PowerSchedule, SystemConfig};
use crate::error::Result;
use crate::specfun::{cached_rule, integrate_01};

/// Gauss-Legendre order for the characteristic-function (sine kernel) integral.
pub const CC_QUADRATURE_ORDER: usize = 512;

/// Above this many active rounds the nested quadrature gets too expensive and
/// the sine-kernel integral is used instead.
const CC_NESTED_MAX_ROUNDS: usize = 3;

fn active_powers(schedule: &PowerSchedule, rounds: usize) -> Vec<f64> {
    schedule.powers()[..rounds].iter().copied().filter(|p| *p > 0.0).collect()
}

/// `Pr{Σ_{k≤l} P_k g_k < threshold}` for positive `powers`.
fn combined_snr_cdf(num_rx: u32, threshold: f64, powers: &[f64]) -> Result<f64> {
    if powers.is_empty() {
        return Ok(1.0);
    }
    if powers.len() <= CC_NESTED_MAX_ROUNDS {
        let nested = NestedQuadrature::new(num_rx, Accumulation::Snr, NESTED_QUADRATURE_ORDER)?;
        return Ok(clamp_probability(nested.cdf(threshold, powers)?, "CC nested quadrature"));
    }
    sine_kernel_cdf(num_rx, threshold, powers, CC_QUADRATURE_ORDER)
}

/// Gil-Pelaez inversion of the characteristic function of `Σ P_k g_k`:
///
/// `F(z) = ½ - (1/π) ∫₀^∞ sin(Σ N atan(x P_k) - z x) / ∏ (1 + (x P_k)²)^{N/2} dx/x`,
///
/// mapped to `(0, 1)` by `x = s t / (1 - t)` so that `dx/x = dt / (t - t²)`.
/// The scale `s` is the reciprocal geometric mean of the powers, which puts
/// the decay of the characteristic function in the middle of the interval.
fn sine_kernel_cdf(num_rx: u32, threshold: f64, powers: &[f64], order: usize) -> Result<f64> {
    if powers.is_empty() {
        return Ok(1.0);
    }
    let rule = cached_rule(order)?;
    let n = f64::from(num_rx);
    let mean_log_power = powers.iter().map(|p| p.ln()).sum::<f64>() / powers.len() as f64;
    let scale = (-mean_log_power).exp();

    let kernel = |t: f64| {
        let x = scale * t / (1.0 - t);
        let mut phase = -threshold * x;
        let mut log_magnitude = 0.0;
        for p in powers {
            let xp = x * p;
            phase += n * xp.atan();
            log_magnitude += (xp * xp).ln_1p();
        }
        phase.sin() * (-0.5 * n * log_magnitude).exp() / (t - t * t)
    };
    let integral = integrate_01(kernel, &rule)?;
    Ok(clamp_probability(0.5 - integral / PI, "CC sine-kernel quadrature"))
}

/// CC-HARQ outage after `rounds` rounds, `Pr{Σ_{k≤l} P_k g_k < 2^R - 1}`.
///
/// Up to three active rounds this is the nested Gamma-density quadrature,
/// which stays relatively accurate at very small outages. Longer horizons use
/// the sine-kernel integral of [`cc_outage_gil_pelaez`] at order 512.
pub fn cc_outage_exact(config: &SystemConfig, schedule: &PowerSchedule, rounds: usize) -> Result<f64> {
    config.check_schedule(schedule)?;
    config.check_rounds(rounds)?;
    combined_snr_cdf(config.num_rx, config.threshold(), &active_powers(schedule, rounds))
}

/// CC-HARQ outage evaluated only through the sine-kernel (characteristic
/// function) integral with a Gauss-Legendre rule of the given order.
///
/// The result is `½` minus an integral, so its absolute accuracy bottoms out
/// around 1e-13 regardless of order.
pub fn cc_outage_gil_pelaez(
    config: &SystemConfig,
    schedule: &PowerSchedule,
    rounds: usize,
    order: usize,
) -> Result<f64> {
    config.check_schedule(schedule)?;
    config.check_rounds(rounds)?;
    sine_kernel_cdf(config.num_rx, config.threshold(), &active_powers(schedule, rounds), order)
}

/// Jensen lower bound on the IR-HARQ outage: the CC-HARQ outage with the
/// threshold `Z` replaced by `Y(l) = l (2^{R/l} - 1)`.
pub fn ir_jensen_bound(config: &SystemConfig, schedule: &PowerSchedule, rounds: usize) -> Result<f64> {
    config.check_schedule(schedule)?;
    config.check_rounds(rounds)?;
    combined_snr_cdf(config.num_rx, config.jensen_threshold(rounds), &active_powers(schedule, rounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outage::{arq_outage_exact, Scheme};

    fn setup(n: u32, rate: f64, powers: &[f64]) -> (SystemConfig, PowerSchedule) {
        let c = SystemConfig::new(Scheme::Cc, n, powers.len(), rate, 10.0).unwrap();
        (c, PowerSchedule::new(powers.to_vec()).unwrap())
    }

    // Two-rate hypoexponential CDF, N = 1.
    fn hypoexponential(z: f64, p1: f64, p2: f64) -> f64 {
        let (l1, l2) = (1.0 / p1, 1.0 / p2);
        1.0 - (l2 * (-l1 * z).exp() - l1 * (-l2 * z).exp()) / (l2 - l1)
    }

    #[test]
    fn single_round_matches_arq() {
        let (c, s) = setup(2, 2.0, &[10.0]);
        let cc = cc_outage_exact(&c, &s, 1).unwrap();
        assert!((cc - 0.036_936_313_11).abs() < 1e-11);
        let gp = cc_outage_gil_pelaez(&c, &s, 1, CC_QUADRATURE_ORDER).unwrap();
        assert!((gp - arq_outage_exact(&c, &s, 1).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn erlang_two_example() {
        let (c, s) = setup(1, 2.0, &[10.0, 10.0]);
        let want = 1.0 - (-0.3f64).exp() * 1.3;
        let got = cc_outage_exact(&c, &s, 2).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        // With lN = 2 the sine kernel decays slowly and order 512 is only good to ~1e-6.
        let gp = cc_outage_gil_pelaez(&c, &s, 2, CC_QUADRATURE_ORDER).unwrap();
        assert!((gp - want).abs() < 5e-6, "{gp} vs {want}");
    }

    #[test]
    fn hypoexponential_example() {
        let (c, s) = setup(1, 2.0, &[5.0, 10.0]);
        let want = hypoexponential(3.0, 5.0, 10.0);
        assert!((want - (1.0 - 2.0 * (-0.3f64).exp() + (-0.6f64).exp())).abs() < 1e-15);
        // Recomputed: 1 - 2e^{-0.3} + e^{-0.6} = 0.06717519 (the rough figure 0.067216 is off in the 5th digit).
        assert!((want - 0.067_175_19).abs() < 1e-8);
        let got = cc_outage_exact(&c, &s, 2).unwrap();
        assert!((got - want).abs() < 1e-12);
        let gp = cc_outage_gil_pelaez(&c, &s, 2, CC_QUADRATURE_ORDER).unwrap();
        assert!((gp - want).abs() < 5e-6);
    }

    #[test]
    fn equal_powers_reduce_to_gamma_of_summed_shape() {
        // Σ of l iid Gamma(N, P) is Gamma(lN, P).
        use crate::specfun::lower_gamma_regularized;
        for n in [1, 2, 4] {
            for p in [0.5, 3.0, 40.0, 1e3] {
                let (c, s) = setup(n, 2.0, &[p, p, p]);
                for l in 1..=3 {
                    let want = lower_gamma_regularized((l as u32 * n) as f64, 3.0 / p).unwrap();
                    let got = cc_outage_exact(&c, &s, l).unwrap();
                    assert!((got - want).abs() <= 1e-12 * want + 1e-15, "N={n} P={p} l={l}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn four_rounds_use_sine_kernel_and_match_gamma() {
        use crate::specfun::lower_gamma_regularized;
        let (c, s) = setup(2, 2.0, &[4.0, 4.0, 4.0, 4.0]);
        let want = lower_gamma_regularized(8.0, 0.75).unwrap();
        let got = cc_outage_exact(&c, &s, 4).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn sine_kernel_agrees_with_nested_on_mixed_powers() {
        for n in [2, 4] {
            for powers in [[1.0, 30.0, 7.0], [300.0, 3000.0, 50.0], [2.0, 1e4, 9e3], [1.0, 1.0, 1.0]] {
                let (c, s) = setup(n, 2.0, &powers);
                for l in 1..=3 {
                    let a = cc_outage_exact(&c, &s, l).unwrap();
                    let b = cc_outage_gil_pelaez(&c, &s, l, CC_QUADRATURE_ORDER).unwrap();
                    let tol = if l as u32 * n > 2 { 1e-7 } else { 5e-3 };
                    assert!((a - b).abs() < tol, "N={n} {powers:?} l={l}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn jensen_bound_examples() {
        let (c, s) = setup(1, 2.0, &[10.0, 10.0]);
        assert_eq!(ir_jensen_bound(&c, &s, 1).unwrap(), cc_outage_exact(&c, &s, 1).unwrap());
        let want = 1.0 - (-0.2f64).exp() * 1.2;
        let got = ir_jensen_bound(&c, &s, 2).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 0.017_523).abs() < 1e-6);
    }

    #[test]
    fn all_zero_powers_mean_certain_outage() {
        let (c, s) = setup(2, 2.0, &[0.0, 0.0]);
        assert_eq!(cc_outage_exact(&c, &s, 2).unwrap(), 1.0);
        let (c, s) = setup(2, 2.0, &[0.0, 10.0]);
        let p = cc_outage_exact(&c, &s, 2).unwrap();
        assert!((p - 0.036_936_313_11).abs() < 1e-11);
    }
}
