//! The five modes. Each returns its artifacts in memory; `write` puts them
//! on disk.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use besov_core::besov::FilterBank;
use besov_core::lab::{
    collect_monitors, kolmogorov_bound, lower_bound_scan, measure_errors, mode_variances, rate_fit, ErrorReport,
    ErrorSample,
};
use besov_core::scheme::{coupled_solve, write_bsrt, AprioriReport, PathRecord, Problem, SolveOptions};
use besov_core::{verify, Error, GridSpec};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode, OmegaPolicy};
use crate::svg::{loglog, Series};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: &'static str,
    pub config_sha256: String,
    pub base_seed: u64,
    pub seeds: u64,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        let canonical = serde_json::to_string(cfg).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            mode: cfg.mode.name(),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            base_seed: cfg.base_seed,
            seeds: cfg.seeds,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} mode={} config_sha256={} seeds={}..={}",
            self.tool,
            self.version,
            self.mode,
            self.config_sha256,
            self.base_seed,
            self.base_seed + self.seeds - 1
        )
    }
}

pub struct CsvRow {
    pub seed: Option<u64>,
    pub n: usize,
    pub t: f64,
    pub theta: String,
    pub value: f64,
}

pub struct Artifacts {
    pub body: Value,
    pub rows: Option<Vec<CsvRow>>,
    pub svg: Option<String>,
    /// Extra files relative to the output directory.
    pub extra: Vec<(PathBuf, Vec<u8>)>,
    /// `false` when the mode ran to completion but its verdict is negative.
    pub passed: bool,
    pub failures: Vec<String>,
}

impl Artifacts {
    fn new(body: Value) -> Self {
        Self {
            body,
            rows: None,
            svg: None,
            extra: Vec::new(),
            passed: true,
            failures: Vec::new(),
        }
    }
}

pub fn run(cfg: &ExperimentConfig, workers: usize) -> Result<Artifacts, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let prov = Provenance::of(cfg);
    pool.install(|| match cfg.mode {
        Mode::Simulate | Mode::Rates => coupled_runs(cfg, &prov),
        Mode::LinearOracle => linear_oracle(cfg, &prov),
        Mode::LowerBound => lower_bound(cfg, &prov),
        Mode::Verify => verify_mode(cfg),
    })
}

struct SeedRun {
    seed: u64,
    samples: Vec<ErrorSample>,
    monitors: Vec<(u64, usize, AprioriReport)>,
    taus: Vec<(usize, f64)>,
    records: Vec<PathRecord>,
}

fn coupled_runs(cfg: &ExperimentConfig, prov: &Provenance) -> Result<Artifacts, Error> {
    let mut grids = cfg
        .levels
        .iter()
        .map(|&n| GridSpec::new(n, cfg.c))
        .collect::<Result<Vec<_>, _>>()?;
    grids.push(GridSpec::new(cfg.reference(), cfg.c)?);
    let problem = Problem {
        f: cfg.f.clone(),
        psi: cfg.psi.clone(),
    };
    let opts = SolveOptions {
        checkpoints: cfg.checkpoints.clone(),
        mu: cfg.mu,
        monitor: true,
        monitor_max_n: *cfg.levels.last().unwrap(),
        truncation: cfg.truncation,
    };
    let keep_paths = cfg.mode == Mode::Simulate;
    let seeds: Vec<u64> = cfg.seed_range().collect();
    let runs: Vec<Result<SeedRun, (u64, Error)>> = seeds
        .par_iter()
        .map(|&seed| {
            let records = coupled_solve(&grids, &problem, seed, &opts).map_err(|e| (seed, e))?;
            let (reference, levels) = records.split_last().unwrap();
            let samples = measure_errors(reference, levels, &cfg.theta_list, cfg.eps0).map_err(|e| (seed, e))?;
            Ok(SeedRun {
                seed,
                samples,
                monitors: collect_monitors(&records),
                taus: records.iter().filter_map(|r| r.tau.map(|t| (r.grid.n(), t))).collect(),
                records: if keep_paths { records } else { Vec::new() },
            })
        })
        .collect();

    let mut samples = Vec::new();
    let mut monitors = Vec::new();
    let mut excluded = Vec::new();
    let mut blowups = Vec::new();
    let mut truncated = Vec::new();
    let mut extra = Vec::new();
    for run in runs {
        match run {
            Ok(r) => {
                samples.extend(r.samples);
                monitors.extend(r.monitors);
                truncated.extend(r.taus.iter().map(|&(n, t)| json!({"seed": r.seed, "n": n, "tau": t})));
                for rec in &r.records {
                    let mut buf = Vec::new();
                    write_bsrt(rec, &mut buf)?;
                    extra.push((PathBuf::from(format!("paths/seed{}_n{}.bsrt", r.seed, rec.grid.n())), buf));
                }
            }
            Err((seed, e @ Error::BlowUp { .. })) => {
                excluded.push(seed);
                blowups.push(json!({"seed": seed, "message": e.to_string()}));
            }
            Err((_, e)) => return Err(e),
        }
    }
    let mut omega_failed: Vec<u64> = monitors.iter().filter(|m| !m.2.omega_n_holds).map(|m| m.0).collect();
    omega_failed.dedup();
    if cfg.omega_policy == OmegaPolicy::Exclude {
        excluded.extend(&omega_failed);
    }
    if samples.is_empty() || excluded.len() as u64 == cfg.seeds {
        return Err(Error::Config(format!(
            "no usable seeds: {} blew up, {} failed the Ω_n check",
            blowups.len(),
            omega_failed.len()
        )));
    }
    let mut report = ErrorReport::build(&samples, &monitors, &cfg.checkpoints, &excluded)?;
    if cfg.mode == Mode::Simulate {
        report.fits.clear();
    }
    let rows = samples
        .iter()
        .map(|s| CsvRow {
            seed: Some(s.seed),
            n: s.n,
            t: s.t,
            theta: s.norm.label(),
            value: s.value,
        })
        .collect();
    let svg = (cfg.mode == Mode::Rates).then(|| {
        let series: Vec<Series> = report
            .norms
            .iter()
            .map(|(label, levels)| Series {
                label: if label == "linf" { "sup norm".into() } else { format!("θ = {label}") },
                points: levels.iter().map(|l| (l.n as f64, l.stats.median)).collect(),
                fit: report.fits.get(label).map(|f| (f.slope, f.intercept)),
            })
            .collect();
        loglog(
            "median error, sup over checkpoints",
            "n",
            "error",
            &series,
            &prov.line(),
        )
    });
    let mut a = Artifacts::new(json!({
        "reference": cfg.reference(),
        "report": report,
        "blowups": blowups,
        "truncated": truncated,
        "omega_n_failed_seeds": omega_failed,
    }));
    a.rows = Some(rows);
    a.svg = svg;
    a.extra = extra;
    Ok(a)
}

fn linear_oracle(cfg: &ExperimentConfig, prov: &Provenance) -> Result<Artifacts, Error> {
    // (n, t) pairs are independent; evaluate them in parallel, keep the order
    let jobs: Vec<(usize, f64)> = cfg
        .checkpoints
        .iter()
        .flat_map(|&t| cfg.levels.iter().map(move |&n| (n, t)))
        .collect();
    let results: Vec<Result<(Vec<f64>, f64), Error>> = jobs
        .par_iter()
        .map(|&(n, t)| {
            let vars = mode_variances(n, t, cfg.c)?;
            let bank = FilterBank::new(n, cfg.eps0)?;
            let bounds = cfg
                .theta_list
                .iter()
                .map(|&alpha| kolmogorov_bound(&vars, alpha, cfg.oracle_q, &bank))
                .collect::<Result<Vec<_>, _>>()?;
            let uniform = vars.iter().cloned().fold(0.0, f64::max) * (n * n) as f64;
            Ok((bounds, uniform))
        })
        .collect();
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut uniform = Vec::new();
    for (&(n, t), r) in jobs.iter().zip(results) {
        let (b, u) = r?;
        for (&theta, &value) in cfg.theta_list.iter().zip(&b) {
            rows.push(CsvRow {
                seed: None,
                n,
                t,
                theta: format!("{theta}"),
                value,
            });
            bounds.push(json!({"n": n, "t": t, "theta": theta, "bound": value}));
        }
        uniform.push(json!({"n": n, "t": t, "max_n2_a2": u}));
    }
    let mut fits = Vec::new();
    let mut series = Vec::new();
    let last_t = *cfg.checkpoints.last().unwrap();
    for &t in &cfg.checkpoints {
        for &theta in &cfg.theta_list {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.t == t && r.theta == format!("{theta}"))
                .map(|r| (r.n as f64, r.value))
                .collect();
            let fit = rate_fit(&pts).ok();
            if let Some(f) = &fit {
                fits.push(json!({"theta": theta, "t": t, "slope": f.slope, "intercept": f.intercept,
                                 "r2": f.r_squared, "ci": f.slope_ci}));
            }
            if t == last_t {
                series.push(Series {
                    label: format!("α = {theta}"),
                    points: pts,
                    fit: fit.map(|f| (f.slope, f.intercept)),
                });
            }
        }
    }
    let mut a = Artifacts::new(json!({
        "q": cfg.oracle_q,
        "bounds": bounds,
        "uniform_mode_bound": uniform,
        "fits": fits,
    }));
    a.svg = Some(loglog(
        &format!("Kolmogorov bound, q = {}, t = {last_t}", cfg.oracle_q),
        "n",
        "bound",
        &series,
        &prov.line(),
    ));
    a.rows = Some(rows);
    Ok(a)
}

fn lower_bound(cfg: &ExperimentConfig, prov: &Provenance) -> Result<Artifacts, Error> {
    let scans: Vec<Result<Vec<(usize, f64)>, Error>> = cfg
        .checkpoints
        .par_iter()
        .map(|&t| lower_bound_scan(&cfg.levels, t, cfg.c))
        .collect();
    let mut rows = Vec::new();
    let mut body = Vec::new();
    let mut last = Vec::new();
    for (&t, scan) in cfg.checkpoints.iter().zip(scans) {
        let scan = scan?;
        let vals: Vec<f64> = scan.iter().map(|p| p.1).collect();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let raw: Vec<(f64, f64)> = scan.iter().map(|&(n, v)| (n as f64, v / (n * n) as f64)).collect();
        let slope = rate_fit(&raw).ok().map(|f| f.slope);
        body.push(json!({
            "t": t,
            "n2_a1_sq": scan.iter().map(|&(n, v)| json!({"n": n, "value": v})).collect::<Vec<_>>(),
            "max_over_min": max / min,
            "a1_sq_slope": slope,
        }));
        rows.extend(scan.iter().map(|&(n, value)| CsvRow {
            seed: None,
            n,
            t,
            theta: String::new(),
            value,
        }));
        last = raw;
    }
    let fit = rate_fit(&last).ok().map(|f| (f.slope, f.intercept));
    let last_t = cfg.checkpoints.last().unwrap();
    let mut a = Artifacts::new(json!({ "scans": body }));
    a.svg = Some(loglog(
        &format!("variance of error mode 1 at t = {last_t}"),
        "n",
        "a₁²",
        &[Series {
            label: "a₁²".into(),
            points: last,
            fit,
        }],
        &prov.line(),
    ));
    a.rows = Some(rows);
    Ok(a)
}

fn verify_mode(cfg: &ExperimentConfig) -> Result<Artifacts, Error> {
    let checks = verify::full_suite(cfg.base_seed)?;
    let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let mut a = Artifacts::new(json!({ "checks": checks, "passed": failures.is_empty() }));
    a.passed = failures.is_empty();
    a.failures = failures;
    Ok(a)
}

fn csv_text(rows: &[CsvRow], prov: &Provenance) -> String {
    let mut s = format!("# {}\nseed,n,t,theta,norm_value\n", prov.line());
    for r in rows {
        let seed = r.seed.map(|x| x.to_string()).unwrap_or_default();
        s.push_str(&format!("{seed},{},{},{},{}\n", r.n, r.t, r.theta, r.value));
    }
    s
}

/// Writes every artifact under `dir` and returns the relative file names.
pub fn write(dir: &Path, cfg: &ExperimentConfig, a: &Artifacts) -> io::Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let prov = Provenance::of(cfg);
    let mut files = Vec::new();
    let mut put = |name: &Path, bytes: &[u8]| -> io::Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)?;
        files.push(name.to_string_lossy().into_owned());
        Ok(())
    };
    let mut report = json!({
        "schema": SCHEMA,
        "provenance": prov,
        "config": cfg,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, &a.body) {
        dst.extend(src.clone());
    }
    let text = serde_json::to_string_pretty(&report).map_err(io::Error::other)? + "\n";
    put(Path::new("report.json"), text.as_bytes())?;
    if let Some(rows) = &a.rows {
        put(Path::new("errors.csv"), csv_text(rows, &prov).as_bytes())?;
    }
    if let Some(svg) = &a.svg {
        put(Path::new("rates.svg"), svg.as_bytes())?;
    }
    for (name, bytes) in &a.extra {
        put(name, bytes)?;
    }
    let prov_text = format!(
        "tool: {}\nversion: {}\nmode: {}\nconfig_sha256: {}\nseeds: {} starting at {}\nconfig: {}\n",
        prov.tool,
        prov.version,
        prov.mode,
        prov.config_sha256,
        prov.seeds,
        prov.base_seed,
        serde_json::to_string(cfg).map_err(io::Error::other)?
    );
    put(Path::new("provenance.txt"), prov_text.as_bytes())?;
    Ok(files)
}
