//! Budget sweeps: TOML description in, one CSV row per (scheme, method, budget) out.
//!
//! ```toml
//! num_rx = 2
//! max_rounds = 2
//! rate = 2.0
//! schemes = ["arq", "cc", "ir"]
//! methods = ["exact", "gpp", "epa"]
//! budget_db = [10.0, 20.0, 30.0]            # or { start = 0.0, stop = 40.0, step = 0.1 }
//! output = "sweep.csv"
//! # optional: num_tx = 2, arq_coefficient = "series" | "antenna-power"
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use super::{fmt_f64, solve, CliError, EXIT_UNWRITABLE};
use crate::optimize::{budget_from_db, AllocationMethod};
use crate::outage::{ArqCoefficient, Scheme, SystemConfig, IR_MAX_QUADRATURE_ROUNDS};

/// Columns before the per-round powers.
pub const CSV_FIXED_COLUMNS: [&str; 7] =
    ["scheme", "method", "budget_db", "p_out_L", "avg_energy", "kkt_residual", "converged"];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BudgetGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl BudgetGrid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            BudgetGrid::List(v) => Ok(v.clone()),
            BudgetGrid::Range { start, stop, step } => {
                if !(start.is_finite() && stop.is_finite() && step.is_finite()) || *step <= 0.0 || stop < start {
                    return Err(CliError::usage(format!(
                        "budget range needs finite start <= stop and step > 0, got {start}..{stop} step {step}"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|k| ((start + k as f64 * step) * 1e10).round() / 1e10).collect())
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    num_rx: u32,
    max_rounds: usize,
    rate: f64,
    num_tx: Option<usize>,
    arq_coefficient: Option<String>,
    schemes: Vec<String>,
    methods: Vec<String>,
    budget_db: BudgetGrid,
    output: PathBuf,
}

/// A validated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Link parameters; the scheme and budget are replaced per row.
    pub template: SystemConfig,
    pub budgets_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub methods: Vec<AllocationMethod>,
    pub output: PathBuf,
}

impl SweepSpec {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read sweep config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: SweepFile = toml::from_str(text).map_err(|e| CliError::usage(format!("sweep config: {e}")))?;
        let mut template = SystemConfig::new(Scheme::Arq, file.num_rx, file.max_rounds, file.rate, 1.0)?;
        if let Some(m) = file.num_tx {
            template = template.with_num_tx(m)?;
        }
        if let Some(c) = &file.arq_coefficient {
            template = template.with_arq_coefficient(c.parse::<ArqCoefficient>()?);
        }
        let mut schemes = file.schemes.iter().map(|s| s.parse::<Scheme>()).collect::<crate::Result<Vec<_>>>()?;
        let mut methods =
            file.methods.iter().map(|s| s.parse::<AllocationMethod>()).collect::<crate::Result<Vec<_>>>()?;
        schemes.sort();
        methods.sort();
        if schemes.is_empty() || methods.is_empty() {
            return Err(CliError::usage("sweep config needs at least one scheme and one method"));
        }
        if schemes.windows(2).any(|w| w[0] == w[1]) || methods.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::usage("sweep config lists a scheme or method twice"));
        }
        let budgets_db = file.budget_db.values()?;
        if budgets_db.is_empty() || budgets_db.iter().any(|b| !b.is_finite()) {
            return Err(CliError::usage("budget grid must be a nonempty list of finite values"));
        }
        if budgets_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::usage("budget grid must be strictly increasing"));
        }
        if schemes.contains(&Scheme::Ir)
            && methods.contains(&AllocationMethod::Exact)
            && template.max_rounds > IR_MAX_QUADRATURE_ROUNDS
        {
            return Err(CliError::usage(format!(
                "exact IR-HARQ allocation is limited to L <= {IR_MAX_QUADRATURE_ROUNDS}, config has L = {}",
                template.max_rounds
            )));
        }
        Ok(SweepSpec { template, budgets_db, schemes, methods, output: file.output })
    }

    pub fn header(&self) -> String {
        let mut cols: Vec<String> = CSV_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        cols.extend((1..=self.template.max_rounds).map(|l| format!("P{l}")));
        cols.join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub method: AllocationMethod,
    pub budget_db: f64,
    pub p_out_l: f64,
    pub avg_energy: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    pub powers: Vec<f64>,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        let mut cols = vec![
            self.scheme.tag().to_string(),
            self.method.tag().to_string(),
            fmt_f64(self.budget_db),
            fmt_f64(self.p_out_l),
            fmt_f64(self.avg_energy),
            fmt_f64(self.kkt_residual),
            self.converged.to_string(),
        ];
        cols.extend(self.powers.iter().map(|p| fmt_f64(*p)));
        cols.join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: usize,
    pub unconverged: usize,
}

/// Solves every sweep point on `threads` workers and writes the CSV. Rows
/// come out in (scheme, method, budget) order whatever the completion order.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> Result<SweepSummary, CliError> {
    let unwritable =
        |e: std::io::Error| CliError { code: EXIT_UNWRITABLE, message: format!("{}: {e}", spec.output.display()) };
    let file = File::create(&spec.output).map_err(unwritable)?;
    let rows = compute_rows(spec, threads)?;

    let mut w = BufWriter::new(file);
    writeln!(w, "{}", spec.header()).map_err(unwritable)?;
    for row in &rows {
        writeln!(w, "{}", row.to_csv()).map_err(unwritable)?;
    }
    w.flush().map_err(unwritable)?;
    Ok(SweepSummary { rows: rows.len(), unconverged: rows.iter().filter(|r| !r.converged).count() })
}

/// The sweep rows without writing them.
pub fn compute_rows(spec: &SweepSpec, threads: usize) -> Result<Vec<ResultRow>, CliError> {
    let points: Vec<(Scheme, AllocationMethod, f64)> = spec
        .schemes
        .iter()
        .flat_map(|&s| spec.methods.iter().flat_map(move |&m| spec.budgets_db.iter().map(move |&b| (s, m, b))))
        .collect();
    let solve_point = |&(scheme, method, db): &(Scheme, AllocationMethod, f64)| -> Result<ResultRow, CliError> {
        let config = spec.template.clone().with_scheme(scheme).with_energy_budget(budget_from_db(db))?;
        let report = solve(&config, method)?;
        Ok(ResultRow {
            scheme,
            method,
            budget_db: db,
            p_out_l: report.objective,
            avg_energy: report.avg_energy,
            kkt_residual: report.kkt_residual,
            converged: report.converged,
            powers: report.schedule.into_inner(),
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError { code: super::EXIT_FAILURE, message: format!("cannot start sweep workers: {e}") })?;
    pool.install(|| points.par_iter().map(solve_point).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
num_rx = 2
max_rounds = 2
rate = 2.0
schemes = ["ir", "arq"]
methods = ["epa", "gpp"]
budget_db = [5.0, 10.0]
output = "out.csv"
"#;

    #[test]
    fn parses_and_orders() {
        let spec = SweepSpec::parse(BASIC).unwrap();
        assert_eq!(spec.schemes, vec![Scheme::Arq, Scheme::Ir]);
        assert_eq!(spec.methods, vec![AllocationMethod::Gpp, AllocationMethod::Epa]);
        assert_eq!(spec.header(), "scheme,method,budget_db,p_out_L,avg_energy,kkt_residual,converged,P1,P2");
    }

    #[test]
    fn range_grid() {
        let g = BudgetGrid::Range { start: 10.0, stop: 11.0, step: 0.1 };
        let v = g.values().unwrap();
        assert_eq!(v.len(), 11);
        assert_eq!(v[3], 10.3);
        assert_eq!(v[10], 11.0);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            BASIC.replace("output", "outptu"),
            BASIC.replace("[5.0, 10.0]", "[10.0, 5.0]"),
            BASIC.replace(r#"["epa", "gpp"]"#, "[]"),
            BASIC.replace(r#"["ir", "arq"]"#, r#"["ir", "ir"]"#),
            BASIC.replace(r#""epa""#, r#""newton""#),
            BASIC.replace("max_rounds = 2", "max_rounds = 4").replace(r#""epa""#, r#""exact""#),
        ];
        for text in bad {
            assert_eq!(SweepSpec::parse(&text).unwrap_err().code, super::super::EXIT_USAGE, "{text}");
        }
    }

    #[test]
    fn rows_do_not_depend_on_thread_count() {
        let spec = SweepSpec::parse(BASIC).unwrap();
        let one = compute_rows(&spec, 1).unwrap();
        let three = compute_rows(&spec, 3).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.len(), 8);
        assert_eq!((one[0].scheme, one[0].method, one[0].budget_db), (Scheme::Arq, AllocationMethod::Gpp, 5.0));
    }
}
