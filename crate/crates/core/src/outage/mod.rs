//! Rate-outage probabilities and average energy for IMIMO links using ARQ,
//! Chase-combining HARQ and incremental-redundancy HARQ over Rayleigh block
//! fading.
//!
//! Each round `k` sees an independent channel gain `g_k ~ Gamma(N, 1)` (the
//! squared norm of `N` unit complex Gaussians) scaled by the round power
//! `P_k`. A packet is in outage after `l` rounds when
//!
//! * ARQ: every round individually failed, `log2(1 + P_k g_k) < R` for all `k ≤ l`;
//! * CC-HARQ: the combined SNR failed, `log2(1 + Σ P_k g_k) < R`;
//! * IR-HARQ: the accumulated mutual information failed, `Σ log2(1 + P_k g_k) < R`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod arq;
mod asymptotic;
mod cc;
mod ir;
mod nested;

pub use arq::{arq_outage_exact, arq_outage_quadrature, ARQ_QUADRATURE_ORDER};
pub use asymptotic::{gpp_coefficient, gpp_coefficients, outage_asymptotic};
pub use cc::{cc_outage_exact, cc_outage_gil_pelaez, ir_jensen_bound, CC_QUADRATURE_ORDER};
pub use ir::{
    ir_convolution_outage, ir_outage_exact, ir_q_kernel, KernelForm, IR_MAX_QUADRATURE_ROUNDS, NESTED_QUADRATURE_ORDER,
};

/// Retransmission scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[serde(alias = "ARQ")]
    Arq,
    #[serde(alias = "cc-harq", alias = "cc_harq", alias = "CC")]
    Cc,
    #[serde(alias = "ir-harq", alias = "ir_harq", alias = "IR")]
    Ir,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Arq, Scheme::Cc, Scheme::Ir];

    /// Short lowercase tag used in CSV output and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Arq => "arq",
            Scheme::Cc => "cc",
            Scheme::Ir => "ir",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Arq => "ARQ",
            Scheme::Cc => "CC-HARQ",
            Scheme::Ir => "IR-HARQ",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arq" => Ok(Scheme::Arq),
            "cc" | "cc-harq" | "cc_harq" => Ok(Scheme::Cc),
            "ir" | "ir-harq" | "ir_harq" => Ok(Scheme::Ir),
            other => Err(Error::invalid(format!("unknown scheme '{other}' (expected arq, cc or ir)"))),
        }
    }
}

/// Normalising constant of the ARQ asymptotic leading term.
///
/// `Series` uses `Γ(N+1)^l`, the leading coefficient of the regularized
/// incomplete gamma series. `AntennaPower` uses `N^l`. The two agree for `N ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArqCoefficient {
    #[default]
    Series,
    AntennaPower,
}

impl FromStr for ArqCoefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "series" => Ok(ArqCoefficient::Series),
            "antenna-power" => Ok(ArqCoefficient::AntennaPower),
            other => Err(Error::invalid(format!(
                "unknown ARQ coefficient convention '{other}' (expected series or antenna-power)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutageMethod {
    Exact,
    Asymptotic,
}

impl FromStr for OutageMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(OutageMethod::Exact),
            "asymptotic" | "asym" => Ok(OutageMethod::Asymptotic),
            other => Err(Error::invalid(format!("unknown outage method '{other}' (expected exact or asymptotic)"))),
        }
    }
}

impl fmt::Display for OutageMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutageMethod::Exact => "exact",
            OutageMethod::Asymptotic => "asymptotic",
        })
    }
}

/// Link and budget parameters.
///
/// `energy_budget` is the per-symbol, noise-normalised average energy allowed
/// per packet, in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub scheme: Scheme,
    /// Receive antennas `N`.
    pub num_rx: u32,
    /// Maximum transmission rounds `L`.
    pub max_rounds: usize,
    /// Transmit antennas `M`; one fresh antenna per round, so `L ≤ M`.
    pub num_tx: usize,
    /// Target rate `R` in bits/s/Hz.
    pub rate: f64,
    pub energy_budget: f64,
    /// Symbols per round `T`, only used to report `E_avg = T · Ē_avg`.
    pub symbols_per_round: u32,
    pub arq_coefficient: ArqCoefficient,
}

impl SystemConfig {
    /// Config with `num_tx = max_rounds`, one symbol per round and the series
    /// ARQ coefficient.
    pub fn new(scheme: Scheme, num_rx: u32, max_rounds: usize, rate: f64, energy_budget: f64) -> Result<Self> {
        let config = SystemConfig {
            scheme,
            num_rx,
            max_rounds,
            num_tx: max_rounds,
            rate,
            energy_budget,
            symbols_per_round: 1,
            arq_coefficient: ArqCoefficient::Series,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_rx == 0 {
            return Err(Error::invalid("num_rx must be at least 1"));
        }
        if self.max_rounds == 0 {
            return Err(Error::invalid("max_rounds must be at least 1"));
        }
        if self.max_rounds > self.num_tx {
            return Err(Error::invalid(format!(
                "max_rounds ({}) must not exceed num_tx ({})",
                self.max_rounds, self.num_tx
            )));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::invalid(format!("rate must be finite and positive, got {}", self.rate)));
        }
        if !(self.energy_budget.is_finite() && self.energy_budget > 0.0) {
            return Err(Error::invalid(format!(
                "energy_budget must be finite and positive, got {}",
                self.energy_budget
            )));
        }
        if self.symbols_per_round == 0 {
            return Err(Error::invalid("symbols_per_round must be at least 1"));
        }
        Ok(())
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_energy_budget(mut self, energy_budget: f64) -> Result<Self> {
        self.energy_budget = energy_budget;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rate(mut self, rate: f64) -> Result<Self> {
        self.rate = rate;
        self.validate()?;
        Ok(self)
    }

    pub fn with_num_tx(mut self, num_tx: usize) -> Result<Self> {
        self.num_tx = num_tx;
        self.validate()?;
        Ok(self)
    }

    pub fn with_arq_coefficient(mut self, coefficient: ArqCoefficient) -> Self {
        self.arq_coefficient = coefficient;
        self
    }

    pub fn shape(&self) -> f64 {
        f64::from(self.num_rx)
    }

    /// SNR threshold `Z = 2^R - 1`.
    pub fn threshold(&self) -> f64 {
        self.rate.exp2() - 1.0
    }

    /// Jensen-mapped IR threshold `Y(l) = l (2^{R/l} - 1)`; `Y(1) = Z`.
    pub fn jensen_threshold(&self, rounds: usize) -> f64 {
        if rounds <= 1 {
            return self.threshold();
        }
        let l = rounds as f64;
        l * (self.rate / l).exp2() - l
    }

    pub(crate) fn check_rounds(&self, rounds: usize) -> Result<()> {
        if rounds == 0 || rounds > self.max_rounds {
            return Err(Error::invalid(format!("round index {rounds} outside 1..={}", self.max_rounds)));
        }
        Ok(())
    }

    pub(crate) fn check_schedule(&self, schedule: &PowerSchedule) -> Result<()> {
        self.validate()?;
        if schedule.len() != self.max_rounds {
            return Err(Error::invalid(format!(
                "schedule has {} powers but max_rounds is {}",
                schedule.len(),
                self.max_rounds
            )));
        }
        Ok(())
    }
}

/// Per-round power scaling factors `P_1..P_L`, linear and noise-normalised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PowerSchedule(Vec<f64>);

impl PowerSchedule {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::invalid("power schedule must not be empty"));
        }
        if let Some((i, p)) = powers.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid(format!("power P{} = {p} must be finite and nonnegative", i + 1)));
        }
        Ok(PowerSchedule(powers))
    }

    pub fn uniform(power: f64, rounds: usize) -> Result<Self> {
        Self::new(vec![power; rounds])
    }

    pub fn powers(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|p| p * factor).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for PowerSchedule {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PowerSchedule> for Vec<f64> {
    fn from(s: PowerSchedule) -> Self {
        s.0
    }
}

/// Cumulative per-round outage and the resulting average energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageProfile {
    pub per_round_outage: Vec<f64>,
    pub avg_energy: f64,
    pub method: OutageMethod,
}

impl OutageProfile {
    /// Final-round outage `p_out,L`.
    pub fn final_outage(&self) -> f64 {
        *self.per_round_outage.last().expect("profile is never empty")
    }
}

pub(crate) fn clamp_probability(value: f64, what: &str) -> f64 {
    let clamped = value.clamp(0.0, 1.0);
    if (clamped - value).abs() >= 1e-9 {
        log::warn!("{what}: clamped quadrature result {value:e} to {clamped}");
    }
    clamped
}

/// Outage after `rounds` rounds with the chosen evaluator.
pub fn outage(config: &SystemConfig, schedule: &PowerSchedule, rounds: usize, method: OutageMethod) -> Result<f64> {
    match method {
        OutageMethod::Exact => match config.scheme {
            Scheme::Arq => arq_outage_exact(config, schedule, rounds),
            Scheme::Cc => cc_outage_exact(config, schedule, rounds),
            Scheme::Ir => ir_outage_exact(config, schedule, rounds),
        },
        OutageMethod::Asymptotic => outage_asymptotic(config, schedule, rounds),
    }
}

/// `Ē_avg = P_1 + Σ_{l≥2} P_l · p_out,l-1` from already computed per-round outages.
pub fn energy_from_outages(powers: &[f64], per_round_outage: &[f64]) -> f64 {
    powers.iter().enumerate().map(|(i, p)| if i == 0 { *p } else { p * per_round_outage[i - 1] }).sum()
}

pub fn outage_profile(config: &SystemConfig, schedule: &PowerSchedule, method: OutageMethod) -> Result<OutageProfile> {
    config.check_schedule(schedule)?;
    let per_round_outage =
        (1..=config.max_rounds).map(|l| outage(config, schedule, l, method)).collect::<Result<Vec<_>>>()?;
    let avg_energy = energy_from_outages(schedule.powers(), &per_round_outage);
    Ok(OutageProfile { per_round_outage, avg_energy, method })
}

/// Average energy per packet. Only the first `L - 1` outages are needed.
pub fn average_energy(config: &SystemConfig, schedule: &PowerSchedule, method: OutageMethod) -> Result<f64> {
    config.check_schedule(schedule)?;
    let powers = schedule.powers();
    let mut energy = powers[0];
    for l in 2..=config.max_rounds {
        energy += powers[l - 1] * outage(config, schedule, l - 1, method)?;
    }
    Ok(energy)
}
