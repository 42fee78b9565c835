use super::{clamp_probability, PowerSchedule, SystemConfig};
use crate::error::Result;
use crate::specfun::{cached_rule, integrate_01, log_gamma, lower_gamma_regularized};

/// Gauss-Legendre order for the per-round ARQ integral.
pub const ARQ_QUADRATURE_ORDER: usize = 1024;

/// `∏_{k≤l} γ(N, Z / P_k)`; a round with zero power contributes a factor 1.
pub fn arq_outage_exact(config: &SystemConfig, schedule: &PowerSchedule, rounds: usize) -> Result<f64> {
    config.check_schedule(schedule)?;
    config.check_rounds(rounds)?;
    let z = config.threshold();
    let n = config.shape();
    let mut product = 1.0;
    for &p in &schedule.powers()[..rounds] {
        if p > 0.0 {
            product *= lower_gamma_regularized(n, z / p)?;
        }
    }
    Ok(product)
}

/// Same product with every factor written as
/// `Z_kᴺ / Γ(N) · ∫₀¹ tᴺ⁻¹ e^{-t Z_k} dt` and integrated by Gauss-Legendre.
pub fn arq_outage_quadrature(
    config: &SystemConfig,
    schedule: &PowerSchedule,
    rounds: usize,
    order: usize,
) -> Result<f64> {
    config.check_schedule(schedule)?;
    config.check_rounds(rounds)?;
    let rule = cached_rule(order)?;
    let n = config.shape();
    let exponent = config.num_rx as i32 - 1;
    let ln_gamma_n = log_gamma(n)?;
    let z = config.threshold();

    let mut product = 1.0;
    for &p in &schedule.powers()[..rounds] {
        if p == 0.0 {
            continue;
        }
        let zk = z / p;
        let integral = integrate_01(|t| t.powi(exponent) * (-t * zk).exp(), &rule)?;
        product *= (n * zk.ln() - ln_gamma_n).exp() * integral;
    }
    Ok(clamp_probability(product, "ARQ quadrature"))
}
