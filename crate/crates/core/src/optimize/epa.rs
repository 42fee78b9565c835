use super::{exact::exact_kkt_residual, reported_objective, AllocationMethod, SolverReport};
use crate::error::{Error, Result};
use crate::outage::{average_energy, OutageMethod, PowerSchedule, SystemConfig};

const RELATIVE_TOLERANCE: f64 = 1e-10;

/// Equal power allocation: the `P` with `Ē_avg(P, ..., P) = Ē` under `method`.
///
/// Bisects on `[Ē/L, Ē]`. At the lower end `Ē_avg ≤ L P = Ē` and at the upper
/// end `Ē_avg ≥ P = Ē`, provided every outage lies in `[0, 1]`.
pub fn solve_epa(config: &SystemConfig, method: OutageMethod) -> Result<SolverReport> {
    config.validate()?;
    let budget = config.energy_budget;
    let rounds = config.max_rounds;
    let mut evaluations = 0u64;
    let mut excess = |p: f64| -> Result<f64> {
        evaluations += 1;
        Ok(average_energy(config, &PowerSchedule::uniform(p, rounds)?, method)? - budget)
    };

    let (mut lo, mut hi) = (budget / rounds as f64, budget);
    let (f_lo, f_hi) = (excess(lo)?, excess(hi)?);
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::Internal(format!(
            "equal-power bracket [{lo}, {hi}] has energy excess {f_lo:e} and {f_hi:e} under the {method} evaluator"
        )));
    }
    let power = if rounds == 1 {
        budget
    } else {
        while hi - lo > RELATIVE_TOLERANCE * hi {
            let mid = 0.5 * (lo + hi);
            if excess(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        // The lower end keeps the schedule feasible.
        lo
    };

    let schedule = PowerSchedule::uniform(power, rounds)?;
    let avg_energy = average_energy(config, &schedule, method)?;
    let (objective, evaluator) = reported_objective(config, &schedule)?;
    let kkt_residual = match evaluator {
        OutageMethod::Exact => exact_kkt_residual(config, &schedule)?,
        OutageMethod::Asymptotic => f64::NAN,
    };
    Ok(SolverReport {
        method: AllocationMethod::Epa,
        schedule,
        objective,
        avg_energy,
        kkt_residual,
        evaluations,
        converged: true,
        starts_tried: 1,
        evaluator,
    })
}
