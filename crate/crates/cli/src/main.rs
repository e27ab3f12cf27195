#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrisp_cli::{cmd_forward, cmd_reconstruct, cmd_roundtrip, cmd_symbol_dump, selftest, CliError, Outcome, RunConfig, EXIT_FAILED, EXIT_OK};

#[derive(Parser)]
#[command(name = "lrisp", version, about = "Fixed-energy inverse scattering for long-range potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the perturbation and random grids (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// forward: quadrature tolerance; roundtrip: relative error bound.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq)]
enum Command {
    /// Tabulate Φ and ∇Φ over the configured (y, ω) grid.
    Forward,
    /// Sample the synthetic symbol over the configured grid.
    SymbolDump,
    /// Recover the homogeneous components at the configured targets.
    Reconstruct,
    /// Reconstruct from the model's own oracle and compare with it.
    Roundtrip,
    /// Closed-form checks; needs no configuration.
    Selftest,
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::config("--config is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            return Err(CliError::config("--tol must be positive"));
        }
        match cli.command {
            Command::Forward => cfg.tolerances.phase = t,
            Command::Roundtrip => cfg.tolerances.roundtrip = t,
            _ => {}
        }
    }
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if cli.command == Command::Selftest {
        let checks = selftest::run();
        for c in &checks {
            if !cli.quiet {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
        }
        let failed = checks.iter().filter(|c| !c.pass).count();
        return Ok(Outcome {
            code: if failed == 0 { EXIT_OK } else { EXIT_FAILED },
            files: vec![],
            message: format!("{} of {} checks passed", checks.len() - failed, checks.len()),
        });
    }
    let (cfg, out) = load(cli)?;
    match cli.command {
        Command::Forward => cmd_forward(&cfg, &out),
        Command::SymbolDump => cmd_symbol_dump(&cfg, &out),
        Command::Reconstruct => cmd_reconstruct(&cfg, &out),
        Command::Roundtrip => cmd_roundtrip(&cfg, &out),
        Command::Selftest => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet { "error" } else { "warn" })).init();
    if let Some(n) = std::env::var("LRISP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("LRISP_THREADS ignored: {e}");
        }
    }
    match run(&cli) {
        Ok(o) => {
            if !cli.quiet {
                for f in &o.files {
                    println!("wrote {}", f.display());
                }
                println!("{}", o.message);
            }
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
