//! Seeded Monte Carlo estimates of the per-round outage and average energy.
//!
//! Trials are grouped in blocks of [`BLOCK_TRIALS`]. Every block owns a ChaCha8
//! stream seeded from `(seed, block index)`, and blocks are reduced through
//! integer failure counts, so the result does not depend on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::outage::{PowerSchedule, Scheme, SystemConfig};

/// Trials per independently seeded block.
pub const BLOCK_TRIALS: u64 = 1 << 16;

/// Upper bound on the trial count.
pub const MAX_TRIALS: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub config: SystemConfig,
    pub schedule: PowerSchedule,
    pub trials: u64,
    pub seed: u64,
    /// Threads used; has no effect on the result.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub per_round_outage_estimate: Vec<f64>,
    pub per_round_std_error: Vec<f64>,
    pub avg_energy_estimate: f64,
    pub trials_used: u64,
}

/// Gamma(`shape`, 1) variate as a sum of `shape` unit exponentials.
pub fn gamma_sample<R: Rng + ?Sized>(shape: u32, rng: &mut R) -> f64 {
    let mut sum = 0.0;
    for _ in 0..shape {
        // 1 - U lies in (0, 1], so the logarithm is finite.
        sum -= (1.0 - rng.random::<f64>()).ln();
    }
    sum
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(block)))
}

/// Per-round failure decision for one realisation of the channel gains.
struct Decoder {
    scheme: Scheme,
    powers: Vec<f64>,
    threshold: f64,
    rate_nats: f64,
}

impl Decoder {
    /// Adds 1 to `counts[l-1]` for every round `l` the packet is still lost after.
    fn tally(&self, gains: &[f64], counts: &mut [u64]) {
        let mut snr_sum = 0.0;
        let mut info_sum = 0.0;
        for (l, (&p, &g)) in self.powers.iter().zip(gains).enumerate() {
            let snr = p * g;
            let failed = match self.scheme {
                // Cumulative failure is checked by stopping at the first success.
                Scheme::Arq => snr < self.threshold,
                Scheme::Cc => {
                    snr_sum += snr;
                    snr_sum < self.threshold
                }
                Scheme::Ir => {
                    info_sum += snr.ln_1p();
                    info_sum < self.rate_nats
                }
            };
            if !failed {
                return;
            }
            counts[l] += 1;
        }
    }
}

fn run_block(decoder: &Decoder, num_rx: u32, seed: u64, block: u64, trials: u64) -> Vec<u64> {
    let rounds = decoder.powers.len();
    let mut rng = block_rng(seed, block);
    let mut counts = vec![0u64; rounds];
    let mut gains = vec![0.0; rounds];
    for _ in 0..trials {
        for g in gains.iter_mut() {
            *g = gamma_sample(num_rx, &mut rng);
        }
        decoder.tally(&gains, &mut counts);
    }
    counts
}

/// Estimates `p_out,l` for `l = 1..=L` and the average energy under `spec`.
pub fn simulate(spec: &SimSpec) -> Result<SimResult> {
    spec.config.validate()?;
    spec.config.check_schedule(&spec.schedule)?;
    if spec.trials == 0 || spec.trials > MAX_TRIALS {
        return Err(Error::invalid(format!("trials must be in 1..=2^40, got {}", spec.trials)));
    }
    if spec.workers == 0 {
        return Err(Error::invalid("workers must be at least 1"));
    }

    let decoder = Decoder {
        scheme: spec.config.scheme,
        powers: spec.schedule.powers().to_vec(),
        threshold: spec.config.threshold(),
        rate_nats: spec.config.rate * std::f64::consts::LN_2,
    };
    let rounds = decoder.powers.len();
    let blocks = spec.trials.div_ceil(BLOCK_TRIALS);
    let block_len = |b: u64| BLOCK_TRIALS.min(spec.trials - b * BLOCK_TRIALS);
    let num_rx = spec.config.num_rx;

    let counts = if spec.workers == 1 {
        (0..blocks)
            .map(|b| run_block(&decoder, num_rx, spec.seed, b, block_len(b)))
            .fold(vec![0u64; rounds], add_counts)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Internal(format!("cannot start simulation workers: {e}")))?;
        pool.install(|| {
            (0..blocks)
                .into_par_iter()
                .map(|b| run_block(&decoder, num_rx, spec.seed, b, block_len(b)))
                .reduce(|| vec![0u64; rounds], add_counts)
        })
    };

    let n = spec.trials as f64;
    let estimates: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let std_errors = estimates.iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect();
    let avg_energy_estimate = crate::outage::energy_from_outages(&decoder.powers, &estimates);
    Ok(SimResult {
        per_round_outage_estimate: estimates,
        per_round_std_error: std_errors,
        avg_energy_estimate,
        trials_used: spec.trials,
    })
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}
