//! Nested Gauss-Legendre quadrature of `Pr{accumulated metric < threshold}`
//! over independent `Gamma(N, 1)` channel gains.
//!
//! The outermost `l - 1` gains are integrated numerically against their
//! density; the innermost one is resolved in closed form by the regularized
//! lower incomplete gamma function. Every term of the sum is nonnegative, so
//! the result keeps full relative accuracy even for outages near 1e-30.

use std::sync::Arc;

use crate::error::Result;
use crate::specfun::{cached_rule, gamma_density, log_gamma, lower_gamma_regularized, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Accumulation {
    /// Chase combining: SNRs add. Remaining threshold `r - P x`.
    Snr,
    /// Incremental redundancy: `log2(1 + SNR)` adds. Remaining threshold
    /// `(1 + r) / (1 + P x) - 1`.
    MutualInformation,
}

pub(crate) struct NestedQuadrature {
    shape: f64,
    ln_gamma_shape: f64,
    rule: Arc<QuadratureRule>,
    accumulation: Accumulation,
    /// Gains above this are dropped; `Q(N, cap) < 1e-19` for the shapes used here.
    cap: f64,
}

impl NestedQuadrature {
    pub(crate) fn new(num_rx: u32, accumulation: Accumulation, order: usize) -> Result<Self> {
        let shape = f64::from(num_rx);
        Ok(NestedQuadrature {
            shape,
            ln_gamma_shape: log_gamma(shape)?,
            rule: cached_rule(order)?,
            accumulation,
            cap: shape + 45.0 + 8.0 * shape.sqrt(),
        })
    }

    /// Probability that the accumulated metric over `powers` stays below the
    /// SNR-domain threshold `remaining`. All powers must be positive.
    pub(crate) fn cdf(&self, remaining: f64, powers: &[f64]) -> Result<f64> {
        if remaining <= 0.0 {
            return Ok(0.0);
        }
        let (&p, rest) = powers.split_first().expect("at least one power");
        if rest.is_empty() {
            return lower_gamma_regularized(self.shape, remaining / p);
        }
        let upper = (remaining / p).min(self.cap);
        let mut acc = 0.0;
        for (t, w) in self.rule.unit_interval() {
            let x = upper * t;
            let snr = p * x;
            let next = match self.accumulation {
                Accumulation::Snr => remaining - snr,
                Accumulation::MutualInformation => (remaining - snr) / (1.0 + snr),
            };
            let density = gamma_density(self.shape, self.ln_gamma_shape, x);
            if density == 0.0 {
                continue;
            }
            acc += w * density * self.cdf(next, rest)?;
        }
        Ok(acc * upper)
    }
}
