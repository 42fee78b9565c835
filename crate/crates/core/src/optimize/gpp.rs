use super::{reported_objective, AllocationMethod, SolverReport};
use crate::error::{Error, Result};
use crate::outage::{gpp_coefficients, PowerSchedule, SystemConfig};

/// Asymptotic-model coefficients `W_0 = 1, W_1, ..., W_L`, in log form.
///
/// The closed form only needs `W_0..W_{L-1}`; `W_L` is kept for the objective
/// `W_L / ∏ P_lᴺ` used by [`kkt_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct GppCoefficients {
    ln_w: Vec<f64>,
}

impl GppCoefficients {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        Ok(GppCoefficients { ln_w: gpp_coefficients(config).iter().map(|w| w.ln()).collect() })
    }

    /// `W_l` for `l = 0..=L`.
    pub fn get(&self, l: usize) -> f64 {
        self.ln_w[l].exp()
    }

    pub fn ln(&self, l: usize) -> f64 {
        self.ln_w[l]
    }

    pub fn max_rounds(&self) -> usize {
        self.ln_w.len() - 1
    }
}

/// Log of the asymptotic energy terms `e_l = P_l W_{l-1} / ∏_{k<l} P_kᴺ`.
fn ln_energy_terms(n: f64, coefficients: &GppCoefficients, powers: &[f64]) -> Vec<f64> {
    let mut ln_prefix = 0.0;
    powers
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let term = p.ln() + coefficients.ln(i) - n * ln_prefix;
            ln_prefix += p.ln();
            term
        })
        .collect()
}

/// Closed-form solution of the geometric program
/// `min W_L / ∏ P_lᴺ` s.t. `P_1 + Σ_{l≥2} P_l W_{l-1} / ∏_{k<l} P_kᴺ ≤ Ē`:
///
/// `P_1 = Ē N (N+1)^{L-1} / ((N+1)^L - 1)`,
/// `P_i = W_{i-2} / (W_{i-1} (1+N)) · P_{i-1}^{N+1}`.
///
/// Each energy term is the previous one divided by `N + 1`, so the budget is
/// spent exactly.
pub fn solve_gpp(config: &SystemConfig) -> Result<SolverReport> {
    config.validate()?;
    let coefficients = GppCoefficients::new(config)?;
    let n = config.shape();
    let l = config.max_rounds as i32;
    let ln_ratio = (n + 1.0).ln();
    // N (N+1)^{L-1} / ((N+1)^L - 1), written to stay finite for large L N.
    let share = n / (n + 1.0) / (1.0 - (n + 1.0).powi(-l));
    let mut ln_powers = vec![(config.energy_budget * share).ln()];
    for i in 2..=config.max_rounds {
        let prev = ln_powers[i - 2];
        ln_powers.push(coefficients.ln(i - 2) - coefficients.ln(i - 1) - ln_ratio + (n + 1.0) * prev);
    }
    let powers: Vec<f64> = ln_powers.iter().map(|u| u.exp()).collect();
    if powers.iter().any(|p| !p.is_finite() || *p == 0.0) {
        return Err(Error::invalid(format!(
            "closed-form powers leave the floating-point range for N = {}, L = {}, budget {}",
            config.num_rx, config.max_rounds, config.energy_budget
        )));
    }
    let schedule = PowerSchedule::new(powers)?;
    let avg_energy = ln_energy_terms(n, &coefficients, schedule.powers()).iter().map(|e| e.exp()).sum();
    let kkt = kkt_residual(config, &schedule, &coefficients)?;
    let (objective, evaluator) = reported_objective(config, &schedule)?;
    Ok(SolverReport {
        method: AllocationMethod::Gpp,
        schedule,
        objective,
        avg_energy,
        kkt_residual: kkt,
        evaluations: 1,
        converged: true,
        starts_tried: 1,
        evaluator,
    })
}

/// KKT residual of `schedule` for the geometric program solved by [`solve_gpp`].
///
/// Uses `λ = N W_L / (W_{L-1} P_L^{N+1})` and zero multipliers for the
/// positivity bounds. Stationarity is measured as `|P_l ∂𝓛/∂P_l| / f` with
/// `f = W_L / ∏ P_lᴺ` the objective, and complementary slackness as
/// `|λ (Ē_avg - Ē)| / f`; the result is the larger of the two, so it is
/// dimensionless and invariant to the power scale.
pub fn kkt_residual(config: &SystemConfig, schedule: &PowerSchedule, coefficients: &GppCoefficients) -> Result<f64> {
    config.check_schedule(schedule)?;
    if coefficients.max_rounds() != config.max_rounds {
        return Err(Error::invalid(format!(
            "coefficients cover {} rounds, config has {}",
            coefficients.max_rounds(),
            config.max_rounds
        )));
    }
    let powers = schedule.powers();
    if let Some(i) = powers.iter().position(|p| *p <= 0.0) {
        return Err(Error::invalid(format!("KKT residual needs positive powers, P{} = 0", i + 1)));
    }
    let n = config.shape();
    let ln_terms = ln_energy_terms(n, coefficients, powers);
    let ln_last = *ln_terms.last().expect("nonempty schedule");
    // λ e_l / f = N e_l / e_L.
    let scaled: Vec<f64> = ln_terms.iter().map(|t| n * (t - ln_last).exp()).collect();

    let mut residual: f64 = 0.0;
    let mut tail = 0.0;
    for j in (0..powers.len()).rev() {
        let r = -n + scaled[j] - n * tail;
        residual = residual.max(r.abs());
        tail += scaled[j];
    }
    // |λ (Ē_avg - Ē)| / f = N |Σ e_l - Ē| / e_L.
    let energy: f64 = ln_terms.iter().map(|t| t.exp()).sum();
    let slack = n * (energy - config.energy_budget).abs() / ln_last.exp();
    Ok(residual.max(slack))
}
