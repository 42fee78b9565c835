//! Power allocation under an average-energy budget.
//!
//! Three methods share one report type: the closed-form geometric-programming
//! allocation (GPP) built on the asymptotic outage model, equal power (EPA),
//! and a local barrier solver on the exact outage (EXACT).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outage::{outage_profile, OutageMethod, PowerSchedule, Scheme, SystemConfig};

mod epa;
mod exact;
mod gpp;

pub use epa::solve_epa;
pub use exact::{exact_kkt_residual, solve_exact, solve_exact_with, ExactOptions};
pub use gpp::{kkt_residual, solve_gpp, GppCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMethod {
    Exact,
    Gpp,
    Epa,
}

impl AllocationMethod {
    pub const ALL: [AllocationMethod; 3] = [AllocationMethod::Exact, AllocationMethod::Gpp, AllocationMethod::Epa];

    pub fn tag(self) -> &'static str {
        match self {
            AllocationMethod::Exact => "exact",
            AllocationMethod::Gpp => "gpp",
            AllocationMethod::Epa => "epa",
        }
    }
}

impl fmt::Display for AllocationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AllocationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(AllocationMethod::Exact),
            "gpp" => Ok(AllocationMethod::Gpp),
            "epa" => Ok(AllocationMethod::Epa),
            other => Err(Error::invalid(format!("unknown allocation method '{other}' (expected exact, gpp or epa)"))),
        }
    }
}

/// Outcome of one power-allocation solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub method: AllocationMethod,
    pub schedule: PowerSchedule,
    /// `p_out,L` of `schedule` under `evaluator`.
    pub objective: f64,
    /// Average energy under the method's own model: asymptotic for GPP, the
    /// bisection evaluator for EPA and exact for EXACT.
    pub avg_energy: f64,
    pub kkt_residual: f64,
    pub evaluations: u64,
    pub converged: bool,
    pub starts_tried: u32,
    /// Evaluator behind `objective`. Exact unless the exact IR evaluator does
    /// not support the horizon, in which case the asymptotic model is used.
    pub evaluator: OutageMethod,
}

/// `p_out,L` under the exact evaluator, or the asymptotic one when the exact
/// IR quadrature does not cover `L`.
pub(crate) fn reported_objective(config: &SystemConfig, schedule: &PowerSchedule) -> Result<(f64, OutageMethod)> {
    match outage_profile(config, schedule, OutageMethod::Exact) {
        Ok(profile) => Ok((profile.final_outage(), OutageMethod::Exact)),
        Err(Error::UnsupportedDimension { .. }) => {
            log::warn!(
                "exact {} outage unavailable for L = {}; reporting the asymptotic model",
                config.scheme,
                config.max_rounds
            );
            let profile = outage_profile(config, schedule, OutageMethod::Asymptotic)?;
            Ok((profile.final_outage(), OutageMethod::Asymptotic))
        }
        Err(e) => Err(e),
    }
}

/// Rescales a solved allocation from `config.rate` to `rate_new`.
///
/// For ARQ and CC-HARQ the outage depends on each power only through
/// `(2^R - 1) / P_k`, so multiplying every power (and the energy) by
/// `(2^{R_new} - 1) / (2^R - 1)` keeps the per-round outage profile.
/// IR-HARQ has no such invariance.
pub fn scale_for_rate(report: &SolverReport, config: &SystemConfig, rate_new: f64) -> Result<SolverReport> {
    if config.scheme == Scheme::Ir {
        return Err(Error::UnsupportedScheme(Scheme::Ir));
    }
    if !(rate_new.is_finite() && rate_new > 0.0) {
        return Err(Error::invalid(format!("rate must be positive and finite, got {rate_new}")));
    }
    let factor = (rate_new * std::f64::consts::LN_2).exp_m1() / config.threshold();
    Ok(SolverReport {
        schedule: report.schedule.scaled(factor)?,
        avg_energy: report.avg_energy * factor,
        ..report.clone()
    })
}

/// Linear budget from dB, `Ē = 10^{dB/10}`.
pub fn budget_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn budget_to_db(budget: f64) -> f64 {
    10.0 * budget.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_scaling_factor_and_profile() {
        for scheme in [Scheme::Arq, Scheme::Cc] {
            let c = SystemConfig::new(scheme, 2, 2, 2.0, 10.0).unwrap();
            let r = solve_gpp(&c).unwrap();
            let same = scale_for_rate(&r, &c, 2.0).unwrap();
            for (a, b) in same.schedule.powers().iter().zip(r.schedule.powers()) {
                assert!((a / b - 1.0).abs() < 1e-15);
            }
            let scaled = scale_for_rate(&r, &c, 3.0).unwrap();
            let ratio = scaled.schedule.powers()[0] / r.schedule.powers()[0];
            assert!((ratio - 7.0 / 3.0).abs() < 1e-14);

            let c3 = c.clone().with_rate(3.0).unwrap();
            let before = outage_profile(&c, &r.schedule, OutageMethod::Exact).unwrap();
            let after = outage_profile(&c3, &scaled.schedule, OutageMethod::Exact).unwrap();
            for (a, b) in before.per_round_outage.iter().zip(&after.per_round_outage) {
                assert!((a - b).abs() < 1e-10, "{scheme}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rate_scaling_rejects_ir() {
        let c = SystemConfig::new(Scheme::Ir, 2, 2, 2.0, 10.0).unwrap();
        let r = solve_gpp(&c).unwrap();
        assert!(matches!(scale_for_rate(&r, &c, 3.0), Err(Error::UnsupportedScheme(Scheme::Ir))));
    }

    #[test]
    fn db_round_trip() {
        for db in [-10.0, 0.0, 3.3, 10.0, 27.5, 40.0] {
            assert!((budget_to_db(budget_from_db(db)) - db).abs() < 1e-12);
        }
    }

    #[test]
    fn method_names_parse() {
        for m in AllocationMethod::ALL {
            assert_eq!(m.tag().parse::<AllocationMethod>().unwrap(), m);
        }
        assert!("newton".parse::<AllocationMethod>().is_err());
    }
}
