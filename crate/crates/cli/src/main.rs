//! `hyperfield`: run evolutions, identity suites, refinement studies and decay re-fits.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use hyperfield::config::{parse_config, RunConfig};
use hyperfield::diagnostics::{convergence_order, convergence_order_from_values};
use hyperfield::run::{refit, run, write_outputs};
use hyperfield::suite::identity_suite;

/// Worker threads for grid kernels; defaults to all cores.
const THREADS_ENV: &str = "HYPERFIELD_THREADS";

#[derive(Parser)]
#[command(name = "hyperfield", version, about = "U(1) Higgs and Dirac-Proca evolutions with hyperboloidal energy diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configuration and write energies, diagnostics, fits and checkpoints.
    Run {
        config: PathBuf,
        /// Override the output directory of the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the algebraic identities with a seeded generator.
    IdentitySuite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a configuration at dx, dx/2, ... and report observed orders.
    Convergence {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Re-fit the decay monitors of an existing output directory.
    DecayReport {
        dir: PathBuf,
        /// Fit window as `lo,hi`; defaults to the window stored with the run.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    if a < b {
        Ok((a, b))
    } else {
        Err("window must be increasing".into())
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Science(anyhow::Error),
}

fn load_config(path: &Path) -> std::result::Result<RunConfig, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(Failure::Usage)?;
    parse_config(&text).with_context(|| format!("in {}", path.display())).map_err(Failure::Usage)
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> std::result::Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let dir = cfg.output_dir.clone();
    let outcome = run(&cfg, Some(&dir)).context("run aborted").map_err(Failure::Science)?;
    let summary = write_outputs(&dir, &cfg, &outcome).context("writing outputs").map_err(Failure::Science)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
    Ok(())
}

fn cmd_identity_suite(seed: u64) -> std::result::Result<(), Failure> {
    let rep = identity_suite(seed);
    print!("{}", rep.render());
    if rep.all_passed() {
        Ok(())
    } else {
        let names: Vec<&str> = rep.failures().map(|c| c.name.as_str()).collect();
        Err(Failure::Science(anyhow::anyhow!("violated: {}", names.join("; "))))
    }
}

#[derive(Serialize)]
struct LevelResult {
    n: usize,
    dx: f64,
    peak_gauge_residual: Option<f64>,
    e_flat_final: f64,
    e_hyp_last: Option<f64>,
}

#[derive(Serialize)]
struct ConvergenceReport {
    levels: Vec<LevelResult>,
    gauge_residual_order: Option<f64>,
    e_flat_order: Option<f64>,
    e_hyp_order: Option<f64>,
}

fn cmd_convergence(config: &Path, levels: usize) -> std::result::Result<(), Failure> {
    if levels < 2 {
        return Err(Failure::Usage(anyhow::anyhow!("--levels must be at least 2")));
    }
    let base = load_config(config)?;
    let mut results = Vec::new();
    for l in 0..levels {
        let mut cfg = base.clone();
        cfg.n = base.n << l;
        cfg.dx = base.dx / (1u64 << l) as f64;
        cfg.output_dir = base.output_dir.join(format!("level{l}"));
        log::info!("level {l}: n={} dx={}", cfg.n, cfg.dx);
        let out = run(&cfg, None).with_context(|| format!("level {l} aborted")).map_err(Failure::Science)?;
        write_outputs(&cfg.output_dir, &cfg, &out).context("writing outputs").map_err(Failure::Science)?;
        results.push(LevelResult {
            n: cfg.n,
            dx: cfg.dx,
            peak_gauge_residual: out.peak_gauge().map(|p| p.max),
            e_flat_final: out.e_flat.last().map(|e| e.1).unwrap_or(0.0),
            e_hyp_last: out.energies.last().map(|e| e.e_hyp),
        });
    }
    let gauge: Option<Vec<f64>> = results.iter().map(|r| r.peak_gauge_residual).collect();
    let gauge_residual_order = gauge.and_then(|g| convergence_order(&g).ok()).map(|c| c.mean);
    let three = |f: &dyn Fn(&LevelResult) -> Option<f64>| -> Option<f64> {
        (results.len() >= 3).then(|| Some(convergence_order_from_values([f(&results[0])?, f(&results[1])?, f(&results[2])?])))?
    };
    let report = ConvergenceReport {
        e_flat_order: three(&|r| Some(r.e_flat_final)),
        e_hyp_order: three(&|r| r.e_hyp_last),
        gauge_residual_order,
        levels: results,
    };
    let text = serde_json::to_string_pretty(&report).unwrap_or_default();
    fs::create_dir_all(&base.output_dir).map_err(|e| Failure::Science(e.into()))?;
    fs::write(base.output_dir.join("convergence.json"), &text).map_err(|e| Failure::Science(e.into()))?;
    println!("{text}");
    Ok(())
}

fn cmd_decay_report(dir: &Path, window: Option<(f64, f64)>) -> std::result::Result<(), Failure> {
    if !dir.join("diagnostics.csv").exists() {
        return Err(Failure::Usage(anyhow::anyhow!("{} holds no diagnostics.csv", dir.display())));
    }
    let window = match window {
        Some(w) => w,
        None => match fs::read_to_string(dir.join("config.txt")) {
            Ok(text) => parse_config(&text).map(|c| c.diagnostics.fit_window).unwrap_or((6.0, 24.0)),
            Err(_) => (6.0, 24.0),
        },
    };
    let fits = refit(dir, window).context("re-fitting").map_err(Failure::Science)?;
    let text = serde_json::to_string_pretty(&fits).unwrap_or_default();
    fs::write(dir.join("fits_refit.json"), &text).map_err(|e| Failure::Science(e.into()))?;
    println!("{text}");
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::IdentitySuite { seed } => cmd_identity_suite(seed),
        Command::Convergence { config, levels } => cmd_convergence(&config, levels),
        Command::DecayReport { dir, window } => cmd_decay_report(&dir, window),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Science(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
