//! Local minimisation of the exact `p_out,L` under the average-energy budget.
//!
//! Works in log-power coordinates `u_l = ln P_l` on `ln p_out,L`, with the
//! budget enforced by the barrier `-μ ln(1 - Ē_avg/Ē)`. Each barrier stage runs
//! a damped Newton method with central finite-difference derivatives of
//! `ln p_out,L` and `Ē_avg`; the barrier derivatives are formed analytically
//! so stencil points may leave the feasible set.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{solve_epa, solve_gpp, AllocationMethod, SolverReport};
use crate::error::{Error, Result};
use crate::outage::{outage_profile, OutageMethod, PowerSchedule, Scheme, SystemConfig, IR_MAX_QUADRATURE_ROUNDS};

/// Tuning of [`solve_exact`]. The defaults follow the documented method.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOptions {
    /// Cap on the first barrier weight. The weight actually used is also
    /// limited to a tenth of the objective's pull at the start, so the
    /// barrier does not drag the iterate towards zero power.
    pub initial_barrier: f64,
    pub final_barrier: f64,
    /// Barrier reduction per stage.
    pub barrier_factor: f64,
    pub max_newton_iterations: usize,
    /// Converged when the KKT residual is at most this.
    pub kkt_tolerance: f64,
    /// Random perturbations of the GPP start, on top of the GPP and EPA starts.
    pub perturbed_starts: usize,
    /// Half-width in dB of the log-uniform perturbations.
    pub perturbation_db: f64,
    pub seed: u64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            initial_barrier: 1.0,
            final_barrier: 1e-8,
            barrier_factor: 0.1,
            max_newton_iterations: 60,
            kkt_tolerance: 1e-6,
            perturbed_starts: 8,
            perturbation_db: 3.0,
            seed: 0x0005_EED5_u64,
        }
    }
}

const LN_POWER_FLOOR: f64 = -27.631_021_115_928_55; // ln(1e-12)
const REPORTED_ZERO: f64 = 1e-9;
const ARMIJO: f64 = 1e-4;
const MAX_STEP: f64 = 2.0;

/// `ln p_out,L` and `Ē_avg / Ē` at one point.
#[derive(Debug, Clone, Copy)]
struct Sample {
    ln_outage: f64,
    energy: f64,
}

struct Problem<'a> {
    config: &'a SystemConfig,
    evaluations: Cell<u64>,
}

/// Derivatives in log coordinates.
struct Derivatives {
    center: Sample,
    grad_obj: Vec<f64>,
    grad_energy: Vec<f64>,
    hess_obj: Vec<Vec<f64>>,
    hess_energy: Vec<Vec<f64>>,
}

impl<'a> Problem<'a> {
    fn new(config: &'a SystemConfig) -> Self {
        Problem { config, evaluations: Cell::new(0) }
    }

    fn sample(&self, u: &[f64]) -> Result<Sample> {
        self.evaluations.set(self.evaluations.get() + 1);
        let schedule = PowerSchedule::new(u.iter().map(|x| x.exp()).collect())?;
        let profile = outage_profile(self.config, &schedule, OutageMethod::Exact)?;
        let p = profile.final_outage();
        if p <= 0.0 {
            return Err(Error::Internal(format!("exact outage underflowed to zero at powers {:?}", schedule.powers())));
        }
        Ok(Sample { ln_outage: p.ln(), energy: profile.avg_energy / self.config.energy_budget })
    }

    fn step(u: f64) -> f64 {
        1e-5 * u.abs().max(1.0)
    }

    fn gradient(&self, u: &[f64]) -> Result<(Sample, Vec<f64>, Vec<f64>)> {
        let center = self.sample(u)?;
        let mut go = vec![0.0; u.len()];
        let mut ge = vec![0.0; u.len()];
        for i in 0..u.len() {
            let h = Self::step(u[i]);
            let (plus, minus) = (self.shifted(u, &[(i, h)])?, self.shifted(u, &[(i, -h)])?);
            go[i] = (plus.ln_outage - minus.ln_outage) / (2.0 * h);
            ge[i] = (plus.energy - minus.energy) / (2.0 * h);
        }
        Ok((center, go, ge))
    }

    fn shifted(&self, u: &[f64], moves: &[(usize, f64)]) -> Result<Sample> {
        let mut v = u.to_vec();
        for &(i, d) in moves {
            v[i] += d;
        }
        self.sample(&v)
    }

    fn derivatives(&self, u: &[f64]) -> Result<Derivatives> {
        let dim = u.len();
        let center = self.sample(u)?;
        let mut grad_obj = vec![0.0; dim];
        let mut grad_energy = vec![0.0; dim];
        let mut hess_obj = vec![vec![0.0; dim]; dim];
        let mut hess_energy = vec![vec![0.0; dim]; dim];
        let h: Vec<f64> = u.iter().map(|x| Self::step(*x)).collect();
        for i in 0..dim {
            let plus = self.shifted(u, &[(i, h[i])])?;
            let minus = self.shifted(u, &[(i, -h[i])])?;
            grad_obj[i] = (plus.ln_outage - minus.ln_outage) / (2.0 * h[i]);
            grad_energy[i] = (plus.energy - minus.energy) / (2.0 * h[i]);
            hess_obj[i][i] = (plus.ln_outage - 2.0 * center.ln_outage + minus.ln_outage) / (h[i] * h[i]);
            hess_energy[i][i] = (plus.energy - 2.0 * center.energy + minus.energy) / (h[i] * h[i]);
            for j in 0..i {
                let pp = self.shifted(u, &[(i, h[i]), (j, h[j])])?;
                let pm = self.shifted(u, &[(i, h[i]), (j, -h[j])])?;
                let mp = self.shifted(u, &[(i, -h[i]), (j, h[j])])?;
                let mm = self.shifted(u, &[(i, -h[i]), (j, -h[j])])?;
                let d = 4.0 * h[i] * h[j];
                hess_obj[i][j] = (pp.ln_outage - pm.ln_outage - mp.ln_outage + mm.ln_outage) / d;
                hess_energy[i][j] = (pp.energy - pm.energy - mp.energy + mm.energy) / d;
                hess_obj[j][i] = hess_obj[i][j];
                hess_energy[j][i] = hess_energy[i][j];
            }
        }
        Ok(Derivatives { center, grad_obj, grad_energy, hess_obj, hess_energy })
    }
}

fn barrier_value(s: Sample, mu: f64) -> f64 {
    let slack = 1.0 - s.energy;
    if slack <= 0.0 {
        f64::INFINITY
    } else {
        s.ln_outage - mu * slack.ln()
    }
}

/// Cholesky solve of `(a + τ I) x = b`, raising `τ` until the factorisation succeeds.
fn regularised_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1e-12);
    let mut tau = 0.0;
    loop {
        if let Some(x) = cholesky_solve(a, b, tau) {
            return x;
        }
        tau = if tau == 0.0 { 1e-10 * scale } else { tau * 10.0 };
    }
}

fn cholesky_solve(a: &[Vec<f64>], b: &[f64], tau: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j] + if i == j { tau } else { 0.0 };
            sum -= l[i][..j].iter().zip(&l[j][..j]).map(|(x, y)| x * y).sum::<f64>();
            if i == j {
                if sum.is_nan() || sum <= 0.0 {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Minimises the barrier function for one `μ`, starting from a feasible `u`.
fn newton_stage(problem: &Problem, u: &mut Vec<f64>, mu: f64, options: &ExactOptions) -> Result<()> {
    for _ in 0..options.max_newton_iterations {
        let d = problem.derivatives(u)?;
        let slack = 1.0 - d.center.energy;
        let dim = u.len();
        let w = mu / slack;
        let grad: Vec<f64> = (0..dim).map(|i| d.grad_obj[i] + w * d.grad_energy[i]).collect();

        // Coordinates on the floor that want to go lower stay fixed.
        let free: Vec<usize> = (0..dim).filter(|&i| !(u[i] <= LN_POWER_FLOOR + 1e-12 && grad[i] > 0.0)).collect();
        if free.is_empty() {
            return Ok(());
        }
        let g: Vec<f64> = free.iter().map(|&i| grad[i]).collect();
        if g.iter().all(|x| x.abs() <= 1e-11) {
            return Ok(());
        }
        let hess: Vec<Vec<f64>> = free
            .iter()
            .map(|&i| {
                free.iter()
                    .map(|&j| {
                        d.hess_obj[i][j] + w * d.hess_energy[i][j] + w / slack * d.grad_energy[i] * d.grad_energy[j]
                    })
                    .collect()
            })
            .collect();
        let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut dir = regularised_solve(&hess, &neg_g);
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope.is_nan() || slope >= 0.0 {
            dir = neg_g;
            slope = -g.iter().map(|x| x * x).sum::<f64>();
        }
        let longest = dir.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if longest > MAX_STEP {
            let shrink = MAX_STEP / longest;
            dir.iter_mut().for_each(|x| *x *= shrink);
            slope *= shrink;
        }

        let phi0 = barrier_value(d.center, mu);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            let mut trial = u.clone();
            for (k, &i) in free.iter().enumerate() {
                trial[i] = (u[i] + alpha * dir[k]).max(LN_POWER_FLOOR);
            }
            let phi = barrier_value(problem.sample(&trial)?, mu);
            if phi <= phi0 + ARMIJO * alpha * slope {
                *u = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || alpha * longest.min(MAX_STEP) < 1e-13 {
            return Ok(());
        }
    }
    Ok(())
}

/// KKT residual of `u` for `min ln p_out,L` s.t. `Ē_avg/Ē ≤ 1`, `u ≥ floor`,
/// with the multiplier fitted by least squares over the free coordinates.
fn kkt_at(problem: &Problem, u: &[f64]) -> Result<f64> {
    let (center, g, c) = problem.gradient(u)?;
    let free: Vec<usize> = (0..u.len()).filter(|&i| u[i] > LN_POWER_FLOOR + 1e-9).collect();
    let gc: f64 = free.iter().map(|&i| g[i] * c[i]).sum();
    let cc: f64 = free.iter().map(|&i| c[i] * c[i]).sum();
    let nu = if cc > 0.0 { (-gc / cc).max(0.0) } else { 0.0 };
    let mut residual: f64 = 0.0;
    for i in 0..u.len() {
        let r = g[i] + nu * c[i];
        residual = residual.max(if free.contains(&i) { r.abs() } else { (-r).max(0.0) });
    }
    let slack = 1.0 - center.energy;
    residual = residual.max((nu * slack).abs());
    if slack < -1e-8 {
        residual = residual.max(-slack);
    }
    Ok(residual)
}

/// KKT residual of `schedule` for the exact problem: stationarity of
/// `ln p_out,L + ν (Ē_avg/Ē - 1)` in log-power coordinates plus `|ν (1 - Ē_avg/Ē)|`,
/// with `ν ≥ 0` fitted by least squares. Zero powers count as active bounds.
pub fn exact_kkt_residual(config: &SystemConfig, schedule: &PowerSchedule) -> Result<f64> {
    config.check_schedule(schedule)?;
    let problem = Problem::new(config);
    let u: Vec<f64> = schedule.powers().iter().map(|p| p.ln().max(LN_POWER_FLOOR)).collect();
    kkt_at(&problem, &u)
}

struct Candidate {
    powers: Vec<f64>,
    objective: f64,
    avg_energy: f64,
    kkt: f64,
}

fn is_better(a: &Candidate, b: &Candidate) -> bool {
    match a.objective.partial_cmp(&b.objective) {
        Some(std::cmp::Ordering::Less) => true,
        Some(std::cmp::Ordering::Greater) => false,
        _ => a.powers.partial_cmp(&b.powers) == Some(std::cmp::Ordering::Less),
    }
}

/// Pulls a start inside the budget with some slack by shrinking all powers.
fn feasible_start(problem: &Problem, powers: &[f64]) -> Result<Vec<f64>> {
    let mut u: Vec<f64> = powers.iter().map(|p| p.ln().max(LN_POWER_FLOOR)).collect();
    for _ in 0..400 {
        if problem.sample(&u)?.energy <= 1.0 - 1e-3 {
            return Ok(u);
        }
        u.iter_mut().for_each(|x| *x = (*x + 0.9f64.ln()).max(LN_POWER_FLOOR));
    }
    Err(Error::Internal(format!("no feasible scaling of the start {powers:?}")))
}

fn evaluate(config: &SystemConfig, powers: Vec<f64>, kkt: f64) -> Result<Candidate> {
    let schedule = PowerSchedule::new(powers)?;
    let profile = outage_profile(config, &schedule, OutageMethod::Exact)?;
    Ok(Candidate {
        objective: profile.final_outage(),
        avg_energy: profile.avg_energy,
        powers: schedule.into_inner(),
        kkt,
    })
}

fn run_start(problem: &Problem, start: &[f64], options: &ExactOptions) -> Result<Candidate> {
    let mut u = feasible_start(problem, start)?;
    let (center, g, c) = problem.gradient(&u)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let pull = 0.1 * norm(&g) * (1.0 - center.energy) / norm(&c).max(1e-300);
    let mut mu = options.initial_barrier.min(pull).max(options.final_barrier);
    loop {
        newton_stage(problem, &mut u, mu, options)?;
        if mu <= options.final_barrier * (1.0 + 1e-9) {
            break;
        }
        mu = (mu * options.barrier_factor).max(options.final_barrier);
    }
    let kkt = kkt_at(problem, &u)?;
    let powers = u.iter().map(|x| if x.exp() <= REPORTED_ZERO { 0.0 } else { x.exp() }).collect();
    evaluate(problem.config, powers, kkt)
}

/// Local minimiser of the exact `p_out,L` subject to `Ē_avg ≤ Ē`, `P_l ≥ 0`,
/// from the GPP, EPA and perturbed-GPP starts. Powers at or below 1e-9 are
/// reported as zero.
///
/// Returns the best converged result, or the best feasible one with
/// `converged = false` when no start reaches the KKT tolerance.
pub fn solve_exact(config: &SystemConfig) -> Result<SolverReport> {
    solve_exact_with(config, &ExactOptions::default())
}

pub fn solve_exact_with(config: &SystemConfig, options: &ExactOptions) -> Result<SolverReport> {
    config.validate()?;
    if config.scheme == Scheme::Ir && config.max_rounds > IR_MAX_QUADRATURE_ROUNDS {
        return Err(Error::UnsupportedDimension { rounds: config.max_rounds, max: IR_MAX_QUADRATURE_ROUNDS });
    }
    let problem = Problem::new(config);
    let gpp = solve_gpp(config)?;
    let epa = solve_epa(config, OutageMethod::Exact)?;

    let mut starts = vec![gpp.schedule.powers().to_vec(), epa.schedule.powers().to_vec()];
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let spread = options.perturbation_db / 10.0 * std::f64::consts::LN_10;
    for _ in 0..options.perturbed_starts {
        starts.push(gpp.schedule.powers().iter().map(|p| p * rng.random_range(-spread..=spread).exp()).collect());
    }

    let mut candidates = Vec::new();
    for start in &starts {
        match run_start(&problem, start, options) {
            Ok(c) if c.avg_energy <= config.energy_budget * (1.0 + 1e-12) => candidates.push(c),
            Ok(_) => {}
            Err(e @ (Error::InvalidArgument(_) | Error::UnsupportedDimension { .. })) => return Err(e),
            Err(e) => log::debug!("start {start:?} abandoned: {e}"),
        }
    }
    // The raw GPP and EPA schedules stay in play when they are feasible under
    // the exact energy, so the result never loses to its own starts.
    for report in [&gpp, &epa] {
        let c = evaluate(config, report.schedule.powers().to_vec(), f64::NAN)?;
        if c.avg_energy <= config.energy_budget {
            let kkt = exact_kkt_residual(config, &PowerSchedule::new(c.powers.clone())?)?;
            candidates.push(Candidate { kkt, ..c });
        }
    }

    // Best objective wins; a converged candidate within 1e-9 of it is preferred.
    let mut best: Option<&Candidate> = None;
    for c in &candidates {
        if best.is_none_or(|b| is_better(c, b)) {
            best = Some(c);
        }
    }
    let chosen = best.map(|b| {
        let mut pick = b;
        for c in &candidates {
            let close = c.objective <= b.objective * (1.0 + 1e-9);
            let converged = c.kkt <= options.kkt_tolerance;
            if close && converged && (pick.kkt > options.kkt_tolerance || is_better(c, pick)) {
                pick = c;
            }
        }
        pick
    });
    let chosen = chosen.ok_or_else(|| Error::Internal("no feasible start for the exact solver".into()))?;
    Ok(SolverReport {
        method: AllocationMethod::Exact,
        schedule: PowerSchedule::new(chosen.powers.clone())?,
        objective: chosen.objective,
        avg_energy: chosen.avg_energy,
        kkt_residual: chosen.kkt,
        evaluations: problem.evaluations.get() + gpp.evaluations + epa.evaluations,
        converged: chosen.kkt <= options.kkt_tolerance,
        starts_tried: starts.len() as u32,
        evaluator: OutageMethod::Exact,
    })
}
