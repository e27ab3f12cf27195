//! Batch front end: forward tables, symbol dumps, reconstruction runs and
//! self-tests, writing CSV/JSON artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod selftest;

use std::path::{Path, PathBuf};

use lrisp::geometry::Direction;
use lrisp::phase::{phase_value, PhaseOptions, TangentPoint};
use lrisp::reconstruct::{reconstruct_all, ReconstructionReport};
use lrisp::symbol::SymbolSource;

pub use config::RunConfig;
use output::{fmt_f64, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_QUADRATURE: i32 = 3;
pub const EXIT_PARTIAL: i32 = 4;
pub const EXIT_BOUND: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl ToString) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: msg.to_string(),
        }
    }

    pub fn io(e: std::io::Error, path: &Path) -> Self {
        CliError {
            code: EXIT_FAILED,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<lrisp::Error> for CliError {
    fn from(e: lrisp::Error) -> Self {
        use lrisp::Error::*;
        let code = match e {
            Quadrature { .. } => EXIT_QUADRATURE,
            Domain(_) | Construction(_) | Format(_) => EXIT_CONFIG,
            _ => EXIT_PARTIAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub files: Vec<PathBuf>,
    pub message: String,
}

fn header(dim: usize, prefix: &str) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}_{i}")).collect()
}

/// `phase.csv`: `omega_*, y_*, phi, grad_*, est_error` over the forward grid.
pub fn cmd_forward(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let model = cfg.model.build()?;
    let d = model.dim();
    let points = cfg.forward.expand(d, cfg.seed())?;
    let opts = PhaseOptions::with_tol(cfg.tolerances.phase);
    let mut cols = header(d, "omega");
    cols.extend(header(d, "y"));
    cols.push("phi".into());
    cols.extend(header(d, "grad"));
    cols.push("est_error".into());
    let mut csv = cols.join(",") + "\n";
    for p in &points {
        let tp = TangentPoint::new(Direction::normalize(&p.omega)?, &p.y)?;
        let v = phase_value(&model, &tp, &opts)?;
        let mut row: Vec<String> = tp.omega.as_slice().iter().chain(&tp.y).map(|x| fmt_f64(*x)).collect();
        row.push(fmt_f64(v.value));
        row.extend(v.grad.iter().map(|x| fmt_f64(*x)));
        row.push(fmt_f64(v.est_error));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let path = out.join("phase.csv");
    write_atomic(&path, csv.as_bytes())?;
    Ok(Outcome {
        code: EXIT_OK,
        files: vec![path],
        message: format!("{} phase values", points.len()),
    })
}

/// `symbol.csv` (`omega_*, y_*, re, im`) plus the oracle configuration.
pub fn cmd_symbol_dump(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let model = cfg.model.build()?;
    let d = model.dim();
    let oc = cfg.oracle_config();
    let oracle = oc.build(&model)?;
    let points = cfg.forward.expand(d, cfg.seed())?;
    let mut cols = header(d, "omega");
    cols.extend(header(d, "y"));
    cols.extend(["re".to_string(), "im".to_string()]);
    let mut csv = cols.join(",") + "\n";
    for p in &points {
        let tp = TangentPoint::new(Direction::normalize(&p.omega)?, &p.y)?;
        let a = oracle.sample(&tp)?;
        let mut row: Vec<String> = tp.omega.as_slice().iter().chain(&tp.y).map(|x| fmt_f64(*x)).collect();
        row.push(fmt_f64(a.re));
        row.push(fmt_f64(a.im));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    let sym = out.join("symbol.csv");
    let js = out.join("oracle.json");
    write_atomic(&sym, csv.as_bytes())?;
    write_atomic(&js, oc.to_json().as_bytes())?;
    Ok(Outcome {
        code: EXIT_OK,
        files: vec![sym, js],
        message: format!("{} symbol samples", points.len()),
    })
}

fn run_pipeline(cfg: &RunConfig) -> Result<(ReconstructionReport, lrisp::reconstruct::StageTimings), CliError> {
    if cfg.targets.is_empty() {
        return Err(CliError::config("no targets configured"));
    }
    let model = cfg.model.build()?;
    let oracle = cfg.oracle_config().build(&model)?;
    Ok(reconstruct_all(&oracle, &cfg.targets, &cfg.pipeline, Some(&model))?)
}

fn write_report(report: &ReconstructionReport, timings: &lrisp::reconstruct::StageTimings, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let files = vec![out.join("report.json"), out.join("summary.csv"), out.join("timings.json")];
    write_atomic(&files[0], report.to_json().as_bytes())?;
    write_atomic(&files[1], report.summary_csv().as_bytes())?;
    let t = serde_json::to_string_pretty(timings).expect("timings serialize");
    write_atomic(&files[2], t.as_bytes())?;
    Ok(files)
}

/// `report.json`, `summary.csv` (and `timings.json`); exit 4 if any target failed.
pub fn cmd_reconstruct(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (report, timings) = run_pipeline(cfg)?;
    let files = write_report(&report, &timings, out)?;
    let failed = report.targets.iter().filter(|t| !t.ok()).count();
    let message = match (&report.note, failed) {
        (Some(n), 0) => n.clone(),
        (_, 0) => format!("N̂ = {}, exponents {:?}", report.n_hat, report.exponents),
        (_, f) => format!("{f} of {} targets failed", report.targets.len()),
    };
    Ok(Outcome {
        code: if failed == 0 { EXIT_OK } else { EXIT_PARTIAL },
        files,
        message,
    })
}

/// One `errors.csv` row: a true component and what was reconstructed for it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripError {
    pub target: Vec<f64>,
    pub rho: f64,
    pub v_true: Option<f64>,
    pub v_hat: Option<f64>,
    pub rel_err: f64,
}

/// Pair detected components with the model's exponent groups; missing or
/// spurious components count as infinite error.
pub fn roundtrip_errors(cfg: &RunConfig, report: &ReconstructionReport) -> Result<Vec<RoundtripError>, CliError> {
    let model = cfg.model.build()?;
    let gap = cfg.pipeline.detect.gap_min;
    let mut groups: Vec<f64> = vec![];
    let mut rhos: Vec<f64> = model.terms().iter().map(|t| t.rho).collect();
    rhos.sort_by(f64::total_cmp);
    for r in rhos {
        if groups.last().is_none_or(|g| r - g > gap) {
            groups.push(r);
        }
    }
    let mut rows = vec![];
    for t in &report.targets {
        let mut used = vec![false; t.components.len()];
        for &g in &groups {
            let v_true = lrisp::reconstruct::true_component(&model, g, &t.target, gap);
            let hit = t.components.iter().position(|c| (c.rho_hat - g).abs() <= gap);
            let (v_hat, rel_err) = match hit {
                Some(i) => {
                    used[i] = true;
                    let v = t.components[i].v_euler;
                    let e = v_true.map_or(f64::INFINITY, |tv| (v - tv).abs() / tv.abs().max(f64::MIN_POSITIVE));
                    (Some(v), e)
                }
                None => (None, f64::INFINITY),
            };
            rows.push(RoundtripError {
                target: t.target.clone(),
                rho: g,
                v_true,
                v_hat,
                rel_err,
            });
        }
        for (c, u) in t.components.iter().zip(&used) {
            if !u {
                rows.push(RoundtripError {
                    target: t.target.clone(),
                    rho: c.rho_hat,
                    v_true: None,
                    v_hat: Some(c.v_euler),
                    rel_err: f64::INFINITY,
                });
            }
        }
    }
    Ok(rows)
}

/// Reconstruct from the configured model's own oracle and compare with it.
pub fn cmd_roundtrip(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (report, timings) = run_pipeline(cfg)?;
    let mut files = write_report(&report, &timings, out)?;
    let rows = roundtrip_errors(cfg, &report)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), fmt_f64);
    let mut csv = String::from("target,rho,V_hat,V_true,rel_err\n");
    for r in &rows {
        let name = r.target.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";");
        csv.push_str(&format!(
            "{name},{},{},{},{}\n",
            fmt_f64(r.rho),
            opt(r.v_hat),
            opt(r.v_true),
            fmt_f64(r.rel_err)
        ));
    }
    let path = out.join("errors.csv");
    write_atomic(&path, csv.as_bytes())?;
    files.push(path);
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
    let code = if !report.all_ok() {
        EXIT_PARTIAL
    } else if worst <= cfg.tolerances.roundtrip {
        EXIT_OK
    } else {
        EXIT_BOUND
    };
    Ok(Outcome {
        code,
        files,
        message: format!("max rel_err {worst:.3e} (bound {:.3e})", cfg.tolerances.roundtrip),
    })
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
