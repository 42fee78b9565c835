//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::time::Instant;

use imimo::montecarlo::{simulate, SimSpec};
use imimo::optimize::{
    budget_from_db, kkt_residual, scale_for_rate, solve_epa, solve_exact, solve_gpp, GppCoefficients, SolverReport,
};
use imimo::outage::{
    arq_outage_quadrature, average_energy, cc_outage_gil_pelaez, ir_convolution_outage, ir_jensen_bound, outage,
    KernelForm, OutageMethod, PowerSchedule, Scheme, SystemConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn cfg(scheme: Scheme, n: u32, l: usize, rate: f64, budget: f64) -> SystemConfig {
    SystemConfig::new(scheme, n, l, rate, budget).unwrap()
}

fn sched(p: &[f64]) -> PowerSchedule {
    PowerSchedule::new(p.to_vec()).unwrap()
}

fn exact_final(c: &SystemConfig, s: &PowerSchedule) -> f64 {
    outage(c, s, c.max_rounds, OutageMethod::Exact).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[derive(Clone, Copy)]
enum Allocator {
    Exact,
    Epa,
}

fn allocate(c: &SystemConfig, a: Allocator) -> SolverReport {
    match a {
        Allocator::Exact => solve_exact(c).unwrap(),
        Allocator::Epa => solve_epa(c, OutageMethod::Exact).unwrap(),
    }
}

/// Budget in dB at which `a` reaches `target`: 1 dB scan, then a 0.1 dB grid
/// inside the bracketing step, then linear interpolation of ln p in dB.
fn crossing_db(scheme: Scheme, a: Allocator, target: f64) -> f64 {
    let p_at = |db: f64| {
        let c = cfg(scheme, 2, 2, 2.0, budget_from_db(db));
        exact_final(&c, &allocate(&c, a).schedule)
    };
    let mut hi = 0.0;
    while p_at(hi) >= target {
        hi += 1.0;
        assert!(hi <= 60.0, "no crossing below 60 dB");
    }
    let mut lo_db = hi - 1.0;
    let mut lo_p = p_at(lo_db);
    for k in 1..=10 {
        let db = ((hi - 1.0 + 0.1 * k as f64) * 10.0).round() / 10.0;
        let p = p_at(db);
        if p < target {
            let t = (lo_p.ln() - target.ln()) / (lo_p.ln() - p.ln());
            return lo_db + t * (db - lo_db);
        }
        lo_db = db;
        lo_p = p;
    }
    unreachable!("outage at {hi} dB was below target")
}

fn criterion_1() -> Outcome {
    let expected = [(Scheme::Arq, 4.0), (Scheme::Cc, 3.1), (Scheme::Ir, 2.3)];
    let mut notes = Vec::new();
    let mut ok = true;
    for (scheme, gap_ref) in expected {
        let exact = crossing_db(scheme, Allocator::Exact, 1e-5);
        let epa = crossing_db(scheme, Allocator::Epa, 1e-5);
        let gap = epa - exact;
        ok &= (gap - gap_ref).abs() <= 0.5;
        notes.push(format!("{scheme} gap {gap:.3} dB (exact {exact:.3}, epa {epa:.3})"));
    }
    let msg = notes.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut arq, mut cc) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let p: Vec<f64> = (0..2).map(|_| 10f64.powf(4.0 * rng.random::<f64>())).collect();
        let s = sched(&p);
        let c = cfg(Scheme::Arq, 2, 2, 2.0, 10.0);
        let d = arq_outage_quadrature(&c, &s, 2, 1024).unwrap() - arq_outage_quadrature(&c, &s, 2, 2048).unwrap();
        arq = arq.max(d.abs());
        let c = cfg(Scheme::Cc, 2, 2, 2.0, 10.0);
        let d = cc_outage_gil_pelaez(&c, &s, 2, 512).unwrap() - cc_outage_gil_pelaez(&c, &s, 2, 1024).unwrap();
        cc = cc.max(d.abs());
    }
    let msg = format!("max |ARQ 1024-2048| = {arq:.2e}, max |CC 512-1024| = {cc:.2e}");
    if arq < 1e-6 && cc < 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut passed = 0;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let scheme = Scheme::ALL[i % 3];
        let (c, s) = loop {
            let n = [1, 2, 4][rng.random_range(0..3)];
            let l = rng.random_range(1..=3);
            let rate = [1.0, 2.0][rng.random_range(0..2)];
            let p: Vec<f64> = (0..l).map(|_| 10f64.powf(2.5 * rng.random::<f64>())).collect();
            let c = cfg(scheme, n, l, rate, 10.0);
            let s = sched(&p);
            if exact_final(&c, &s) >= 1e-4 {
                break (c, s);
            }
        };
        let sim = simulate(&SimSpec {
            config: c.clone(),
            schedule: s.clone(),
            trials: 10_000_000,
            seed: 1000 + i as u64,
            workers: 1,
        })
        .unwrap();
        let mut ok = true;
        for l in 1..=c.max_rounds {
            let exact = outage(&c, &s, l, OutageMethod::Exact).unwrap();
            let z = (sim.per_round_outage_estimate[l - 1] - exact).abs() / sim.per_round_std_error[l - 1];
            worst = worst.max(z);
            ok &= z <= 3.0;
        }
        passed += usize::from(ok);
    }
    let msg = format!("{passed}/20 configurations within 3 sigma (largest deviation {worst:.2} sigma)");
    if passed >= 19 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let (mut energy_err, mut kkt) = (0.0f64, 0.0f64);
    for scheme in Scheme::ALL {
        for l in 1..=3 {
            for n in [1, 2, 4] {
                for rate in [1.0, 2.0] {
                    for budget in [10.0, 1e3] {
                        let c = cfg(scheme, n, l, rate, budget);
                        let r = solve_gpp(&c).unwrap();
                        let e = average_energy(&c, &r.schedule, OutageMethod::Asymptotic).unwrap();
                        energy_err = energy_err.max(rel(e, budget));
                        let coeffs = GppCoefficients::new(&c).unwrap();
                        kkt = kkt.max(kkt_residual(&c, &r.schedule, &coeffs).unwrap());
                    }
                }
            }
        }
    }
    let worked = solve_gpp(&cfg(Scheme::Arq, 2, 2, 2.0, 10.0)).unwrap();
    let p = worked.schedule.powers();
    let worked_err = (p[0] - 7.5).abs().max((p[1] - 31.25).abs());
    let msg = format!(
        "energy rel err {energy_err:.2e}, KKT {kkt:.2e}, worked instance ({}, {}) err {worked_err:.1e}",
        p[0], p[1]
    );
    if energy_err <= 1e-10 && kkt <= 1e-8 && worked_err <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Smallest two-round outage over a 400 x 400 log grid: P1 in [E/10, E), P2
/// log-spaced over three decades up to the value that exhausts the budget.
fn grid_search(c: &SystemConfig) -> f64 {
    let e = c.energy_budget;
    let mut best = f64::INFINITY;
    for i in 0..400 {
        let p1 = e * 10f64.powf(-1.0 + (i as f64 + 0.5) / 400.0);
        let first = outage(c, &sched(&[p1, 1.0]), 1, OutageMethod::Exact).unwrap();
        let p2_max = (e - p1) / first;
        for j in 0..400 {
            let p2 = p2_max * 10f64.powf(-3.0 * (1.0 - (j as f64 + 1.0) / 400.0));
            best = best.min(exact_final(c, &sched(&[p1, p2])));
        }
    }
    best
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    let mut dominance = true;
    let mut notes = Vec::new();
    for scheme in Scheme::ALL {
        for db in [20.0, 30.0, 40.0] {
            let c = cfg(scheme, 2, 2, 2.0, budget_from_db(db));
            let exact = exact_final(&c, &solve_exact(&c).unwrap().schedule);
            let gpp = exact_final(&c, &solve_gpp(&c).unwrap().schedule);
            let epa = exact_final(&c, &solve_epa(&c, OutageMethod::Exact).unwrap().schedule);
            let grid = grid_search(&c);
            worst = worst.max(rel(exact, grid));
            if !(exact <= gpp && gpp <= epa * (1.0 + 1e-9)) {
                dominance = false;
                notes.push(format!("{scheme} {db} dB: exact {exact:.3e} gpp {gpp:.3e} epa {epa:.3e}"));
            }
        }
    }
    let msg = format!("max rel gap to grid {worst:.2e}; dominance {}{}", dominance, notes.join("; "));
    if worst <= 1e-3 && dominance {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for scheme in Scheme::ALL {
        let ratios: Vec<f64> = [10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|&db| {
                let c = cfg(scheme, 2, 2, 2.0, budget_from_db(db));
                exact_final(&c, &solve_gpp(&c).unwrap().schedule) / exact_final(&c, &solve_exact(&c).unwrap().schedule)
            })
            .collect();
        ok &= ratios.windows(2).all(|w| w[1] <= w[0]) && ratios[3] <= 1.5;
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
        notes.push(format!("{scheme} [{}]", shown.join(", ")));
    }
    let msg = notes.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn power_mismatch(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
}

fn criterion_7() -> Outcome {
    let factor = 7.0 / 3.0;
    let mut scaled_worst = 0.0f64;
    for scheme in [Scheme::Arq, Scheme::Cc] {
        for db in [10.0, 20.0, 30.0] {
            let e = budget_from_db(db);
            let c2 = cfg(scheme, 2, 2, 2.0, e);
            let scaled = scale_for_rate(&solve_exact(&c2).unwrap(), &c2, 3.0).unwrap();
            let direct = solve_exact(&cfg(scheme, 2, 2, 3.0, e * factor)).unwrap();
            scaled_worst = scaled_worst.max(power_mismatch(scaled.schedule.powers(), direct.schedule.powers()));
        }
    }
    let mut ir_worst = 0.0f64;
    for db in [0.0, 1.0, 2.0, 5.0, 10.0] {
        let e = budget_from_db(db);
        let r2 = solve_exact(&cfg(Scheme::Ir, 2, 2, 2.0, e)).unwrap();
        let direct = solve_exact(&cfg(Scheme::Ir, 2, 2, 3.0, e * factor)).unwrap();
        let scaled = r2.schedule.scaled(factor).unwrap();
        ir_worst = ir_worst.max(power_mismatch(scaled.powers(), direct.schedule.powers()));
    }
    let msg = format!("ARQ/CC max rel power mismatch {scaled_worst:.2e}; IR largest mismatch {ir_worst:.2e}");
    if scaled_worst <= 1e-4 && ir_worst >= 1e-2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let mut order_ok = true;
    let mut jensen_ok = true;
    for _ in 0..100 {
        let n = [1, 2, 4][rng.random_range(0..3)];
        let l = rng.random_range(1..=3);
        let p: Vec<f64> = (0..l).map(|_| 10f64.powf(3.0 * rng.random::<f64>())).collect();
        let s = sched(&p);
        for round in 1..=l {
            let [arq, cc, ir] =
                Scheme::ALL.map(|sc| outage(&cfg(sc, n, l, 2.0, 10.0), &s, round, OutageMethod::Exact).unwrap());
            let slack = 1e-12 + 1e-9 * arq;
            order_ok &= ir <= cc + slack && cc <= arq + slack;
            let jensen = ir_jensen_bound(&cfg(Scheme::Ir, n, l, 2.0, 10.0), &s, round).unwrap();
            jensen_ok &= jensen <= ir + 1e-12 + 1e-9 * ir;
        }
    }
    if !order_ok {
        failures.push("scheme ordering");
    }
    if !jensen_ok {
        failures.push("Jensen bound");
    }

    let mut single = 0.0f64;
    for n in [1, 2, 4] {
        for p in [0.5, 3.0, 40.0, 900.0] {
            let s = sched(&[p]);
            let [arq, cc, ir] = Scheme::ALL.map(|sc| exact_final(&cfg(sc, n, 1, 2.0, 10.0), &s));
            single = single.max(rel(arq, cc)).max(rel(arq, ir));
        }
    }
    if single > 1e-9 {
        failures.push("single-round agreement");
    }

    let mut settles = true;
    for scheme in Scheme::ALL {
        let c = cfg(scheme, 2, 2, 2.0, 10.0);
        let ratios: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&k| {
                let s = sched(&[3.0 * k, 5.0 * k]);
                exact_final(&c, &s) / outage(&c, &s, 2, OutageMethod::Asymptotic).unwrap()
            })
            .collect();
        let steps: Vec<f64> = ratios.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        settles &= steps.windows(2).all(|w| w[1] < w[0]);
        let last = ratios[3];
        settles &= match scheme {
            Scheme::Ir => last > 1.0 && last < 2.0,
            _ => (last - 1.0).abs() < 0.01,
        };
    }
    if !settles {
        failures.push("asymptotic ratio");
    }

    let spec = |workers| SimSpec {
        config: cfg(Scheme::Cc, 2, 3, 2.0, 10.0),
        schedule: sched(&[1.0, 2.0, 4.0]),
        trials: 300_001,
        seed: 99,
        workers,
    };
    let base = simulate(&spec(1)).unwrap();
    if [2, 3, 8].iter().any(|&w| simulate(&spec(w)).unwrap() != base) {
        failures.push("Monte Carlo determinism");
    }

    let mut conv = 0.0f64;
    for n in [1, 2, 4] {
        for p in [[2.0, 8.0], [10.0, 10.0], [40.0, 3.0], [200.0, 500.0]] {
            let c = cfg(Scheme::Ir, n, 2, 2.0, 10.0);
            let s = sched(&p);
            let d = ir_convolution_outage(&c, &s, KernelForm::JacobianCorrected).unwrap() - exact_final(&c, &s);
            conv = conv.max(d.abs());
        }
    }
    if conv >= 1e-4 {
        failures.push("convolution cross-check");
    }

    let msg = format!("single-round spread {single:.1e}, convolution vs nested {conv:.1e}");
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}; failed: {}", failures.join(", ")))
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 EXACT vs EPA budget gaps at 1e-5", criterion_1),
        ("2 quadrature order convergence", criterion_2),
        ("3 Monte Carlo agreement", criterion_3),
        ("4 GPP closed form", criterion_4),
        ("5 EXACT vs grid search and dominance", criterion_5),
        ("6 GPP/EXACT ratio ladder", criterion_6),
        ("7 rate scaling", criterion_7),
        ("8 property suite", criterion_8),
    ];
    let only: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, run) in criteria {
        if only.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {name} [{:.1}s]: {detail}", start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
