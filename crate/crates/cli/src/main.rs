mod config;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use config::{Mode, Overrides};

/// Convergence-rate experiments for the explicit Euler scheme of the
/// stochastic Allen-Cahn equation, measured in discrete Besov norms.
#[derive(Debug, Parser)]
#[command(name = "besov-rates", version)]
struct Cli {
    mode: Mode,
    /// TOML experiment file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of seeds, overriding the file.
    #[arg(long)]
    seeds: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, env = "BESOV_RATES_WORKERS", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Output directory, overriding the file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(kind: &str, detail: serde_json::Value, code: u8) -> ExitCode {
    println!("{}", json!({"schema": run::SCHEMA, "error": {"kind": kind, "detail": detail}}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match &cli.config {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => return fail("io", json!(format!("{}: {e}", p.display())), 2),
        },
        None => String::new(),
    };
    let overrides = Overrides {
        seeds: cli.seeds,
        out: cli.out.clone(),
    };
    let cfg = match config::load(&text, cli.mode, &overrides) {
        Ok(c) => c,
        Err(violations) => return fail("config", json!(violations), 2),
    };
    let workers = cli
        .workers
        .map(|w| w as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let artifacts = match run::run(&cfg, workers) {
        Ok(a) => a,
        Err(e) => return fail("runtime", json!(e.to_string()), 1),
    };
    let files = match run::write(&cfg.output_dir, &cfg, &artifacts) {
        Ok(f) => f,
        Err(e) => return fail("io", json!(e.to_string()), 1),
    };
    if !artifacts.passed {
        return fail("verify", json!({ "failed": artifacts.failures, "out": cfg.output_dir }), 1);
    }
    println!(
        "{}",
        json!({"schema": run::SCHEMA, "status": "ok", "mode": cfg.mode.name(), "out": cfg.output_dir, "files": files})
    );
    ExitCode::SUCCESS
}
