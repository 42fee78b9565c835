//! Special functions and Gauss-Legendre quadrature.
//!
//! Everything here is pure. Quadrature rules are memoised per order in a
//! process-wide cache so that the high orders used by the outage evaluators
//! (512, 1024, 2048) are only built once.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};

pub const MAX_RULE_ORDER: usize = 4096;

const GAMMA_MAX_ITER: usize = 10_000;
const GAMMA_EPS: f64 = 1e-16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped to `[0, 1]`: `((t + 1) / 2, w / 2)`.
    pub fn unit_interval(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| (0.5 * (t + 1.0), 0.5 * w))
    }
}

/// Legendre polynomial `P_n(x)` and its derivative via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let k = k as f64;
        let p_next = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
        p_prev = p;
        p = p_next;
    }
    let nf = n as f64;
    let dp = nf * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Builds the Gauss-Legendre rule of the given order by Newton iteration on
/// `P_n`, starting from the Tricomi asymptotic approximation of each root.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_RULE_ORDER {
        return Err(Error::invalid(format!("quadrature order must be in 1..={MAX_RULE_ORDER}, got {order}")));
    }
    if order == 1 {
        return Ok(QuadratureRule { order, nodes: vec![0.0], weights: vec![2.0] });
    }

    let n = order;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];

    for i in 0..n / 2 {
        let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        let mid = n / 2;
        let (_, dp) = legendre_with_derivative(n, 0.0);
        nodes[mid] = 0.0;
        weights[mid] = 2.0 / (dp * dp);
    }

    Ok(QuadratureRule { order, nodes, weights })
}

fn rule_cache() -> &'static RwLock<HashMap<usize, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Shared, memoised rule. Concurrent first calls may build the rule more than
/// once but every caller observes the same stored instance afterwards.
pub fn cached_rule(order: usize) -> Result<Arc<QuadratureRule>> {
    if let Some(rule) = rule_cache().read().expect("rule cache poisoned").get(&order) {
        return Ok(Arc::clone(rule));
    }
    let built = Arc::new(gauss_legendre(order)?);
    let mut cache = rule_cache().write().expect("rule cache poisoned");
    Ok(Arc::clone(cache.entry(order).or_insert(built)))
}

/// `∫₀¹ f(t) dt ≈ ½ Σ wᵢ f((tᵢ + 1)/2)`.
pub fn integrate_01<F>(mut f: F, rule: &QuadratureRule) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut acc = 0.0;
    for (node, (t, w)) in rule.unit_interval().enumerate() {
        let value = f(t);
        if !value.is_finite() {
            return Err(Error::NumericalDomain { node, value });
        }
        acc += w * value;
    }
    Ok(acc)
}

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Natural log of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::invalid(format!("log_gamma requires a finite x > 0, got {x}")));
    }
    // Exact for small integers, which is where most of our calls land.
    if x == x.trunc() && x <= 30.0 {
        let mut acc = 0.0;
        let mut k = 2.0;
        while k < x {
            acc += f64::ln(k);
            k += 1.0;
        }
        return Ok(acc);
    }
    Ok(ln_gamma_unchecked(x))
}

fn check_gamma_args(shape: f64, x: f64) -> Result<()> {
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::invalid(format!("gamma shape must be finite and positive, got {shape}")));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::invalid(format!("gamma argument must be nonnegative, got {x}")));
    }
    Ok(())
}

/// `(P, Q)` regularized incomplete gamma pair; series below `shape + 1`,
/// modified Lentz continued fraction above.
fn gamma_pq(shape: f64, x: f64) -> Result<(f64, f64)> {
    check_gamma_args(shape, x)?;
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x == f64::INFINITY {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = shape * x.ln() - x - log_gamma(shape)?;

    if x < shape + 1.0 {
        let mut ap = shape;
        let mut term = 1.0 / shape;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                let p = (log_prefactor + sum.ln()).exp();
                return Ok((p, 1.0 - p));
            }
        }
        return Err(Error::Internal(format!("incomplete gamma series did not converge (a={shape}, x={x})")));
    }

    let tiny = 1e-300;
    let mut b = x + 1.0 - shape;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - shape);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            let q = (log_prefactor + h.ln()).exp();
            return Ok((1.0 - q, q));
        }
    }
    Err(Error::Internal(format!("incomplete gamma continued fraction did not converge (a={shape}, x={x})")))
}

/// Regularized lower incomplete gamma `P(shape, x) = γ(shape, x) / Γ(shape)`.
pub fn lower_gamma_regularized(shape: f64, x: f64) -> Result<f64> {
    gamma_pq(shape, x).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma `Q(shape, x) = 1 - P(shape, x)`,
/// computed without cancellation for large `x`.
pub fn upper_gamma_regularized(shape: f64, x: f64) -> Result<f64> {
    gamma_pq(shape, x).map(|(_, q)| q)
}

/// Density of the unit-scale Gamma distribution with the given shape.
pub fn gamma_density(shape: f64, log_gamma_shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if x == 0.0 && shape == 1.0 { 1.0 } else { 0.0 };
    }
    ((shape - 1.0) * x.ln() - x - log_gamma_shape).exp()
}
