//! Error measurement between coupled levels, rate fits and exact oracles
//! for the linear equation.

pub mod fit;
pub mod montecarlo;
pub mod oracle;
pub mod probe;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::besov::{besov_from_block_norms, Exponent, FilterBank};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::scheme::{apriori_report, AprioriReport, PathRecord};

pub use fit::{rate_fit, RateFit};
pub use montecarlo::{coupled_mode_variance, mode_reduced_variance, MonteCarloEstimate};
pub use oracle::{
    exact_mode_variance, kolmogorov_bound, lower_bound_scan, mode_variances, proxy_mode_variance, ModeVariance,
};
pub use probe::{heat_kernel_error_probe, HeatKernelProbe};

/// `(δu_t)(x) - uⁿ_t(x)` on the coarse grid, sampling the fine snapshot at
/// the coarse points.
pub fn error_field(fine: &PathRecord, coarse: &PathRecord, t: f64) -> Result<GridFunction> {
    let m = coarse.grid.refinement_to(&fine.grid)?;
    if fine.seed != coarse.seed {
        return Err(Error::Coupling(format!(
            "records come from different seeds ({} and {})",
            fine.seed, coarse.seed
        )));
    }
    let f = fine.snapshot(t)?;
    let u = coarse.snapshot(t)?;
    let stride = 1usize << m;
    let values = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| f.values()[i * stride] - v)
        .collect();
    GridFunction::new(coarse.grid, values)
}

/// Which norm of the error field a sample measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ErrorNorm {
    /// `L^∞(Π_n)`.
    Sup,
    /// `B^θ_{∞,∞}(Π_n)`.
    Besov(f64),
}

impl ErrorNorm {
    /// Stable text key: `linf` or the value of θ.
    pub fn label(&self) -> String {
        match self {
            ErrorNorm::Sup => "linf".to_string(),
            ErrorNorm::Besov(theta) => format!("{theta}"),
        }
    }
}

/// One measured norm of one error field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub seed: u64,
    pub n: usize,
    pub t: f64,
    pub norm: ErrorNorm,
    pub value: f64,
}

/// Norms of `δu_t - uⁿ_t` at every common checkpoint, for every coarse
/// record against `reference`.
pub fn measure_errors(
    reference: &PathRecord,
    levels: &[PathRecord],
    thetas: &[f64],
    eps0: f64,
) -> Result<Vec<ErrorSample>> {
    let mut out = Vec::new();
    for coarse in levels {
        let bank = FilterBank::new(coarse.grid.n(), eps0)?;
        for (t, _) in &coarse.checkpoints {
            let err = error_field(reference, coarse, *t)?;
            let push = |norm, value| ErrorSample {
                seed: coarse.seed,
                n: coarse.grid.n(),
                t: *t,
                norm,
                value,
            };
            out.push(push(ErrorNorm::Sup, err.max_abs()));
            let block_norms = bank.block_norms(&err, Exponent::Infinity)?;
            for &theta in thetas {
                let v = besov_from_block_norms(&block_norms, theta, Exponent::Infinity);
                out.push(push(ErrorNorm::Besov(theta), v));
            }
        }
    }
    Ok(out)
}

/// Summary statistics across seeds, reduced in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        let mean = values.iter().sum::<f64>() / k as f64;
        let stderr = if k > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64 / k as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            count: k,
            mean,
            median,
            stderr,
            min: sorted[0],
            max: sorted[k - 1],
        })
    }
}

/// Per-level summary of the sup-over-checkpoints error in one norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub stats: Aggregate,
}

/// Slope summary of one norm, fitted to the across-seed medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub ci: (f64, f64),
    pub r2: f64,
    /// Fit of the across-seed means, for comparison.
    pub mean_slope: f64,
}

/// A-priori monitor summary of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriSummary {
    pub n: usize,
    pub seeds: usize,
    pub omega_n_holds: usize,
    pub max_ratio: f64,
    pub max_r_n: f64,
}

/// Everything a Monte Carlo rate experiment reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub levels: Vec<usize>,
    pub checkpoints: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Seeds left out because `Ω_n` failed on some level.
    pub excluded_seeds: Vec<u64>,
    /// Norm label → per-level statistics of `max_t ‖δu_t - uⁿ_t‖`.
    pub norms: BTreeMap<String, Vec<LevelSummary>>,
    /// Norm label → rate fit; absent when fewer than three levels remain.
    pub fits: BTreeMap<String, FitSummary>,
    pub apriori: Vec<AprioriSummary>,
}

/// `max_t` of each `(seed, n, norm)` series.
pub fn sup_over_checkpoints(samples: &[ErrorSample]) -> BTreeMap<(String, usize, u64), f64> {
    let mut out: BTreeMap<(String, usize, u64), f64> = BTreeMap::new();
    for s in samples {
        let e = out.entry((s.norm.label(), s.n, s.seed)).or_insert(0.0);
        *e = e.max(s.value);
    }
    out
}

impl ErrorReport {
    /// Aggregates `samples` (all seeds, all levels) and the per-seed monitor
    /// reports. Seeds listed in `excluded` are dropped from the statistics.
    pub fn build(
        samples: &[ErrorSample],
        monitors: &[(u64, usize, AprioriReport)],
        checkpoints: &[f64],
        excluded: &[u64],
    ) -> Result<Self> {
        let sups = sup_over_checkpoints(samples);
        let mut levels: Vec<usize> = samples.iter().map(|s| s.n).collect();
        levels.sort_unstable();
        levels.dedup();
        let mut seeds: Vec<u64> = samples.iter().map(|s| s.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let mut labels: Vec<String> = Vec::new();
        for s in samples {
            let l = s.norm.label();
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
        let mut norms = BTreeMap::new();
        let mut fits = BTreeMap::new();
        for label in &labels {
            let mut summaries = Vec::new();
            for &n in &levels {
                let vals: Vec<f64> = seeds
                    .iter()
                    .filter(|s| !excluded.contains(s))
                    .filter_map(|&s| sups.get(&(label.clone(), n, s)).copied())
                    .collect();
                if let Some(stats) = Aggregate::of(&vals) {
                    summaries.push(LevelSummary { n, stats });
                }
            }
            if summaries.len() >= 3 && summaries.iter().all(|s| s.stats.median > 0.0) {
                let medians: Vec<(f64, f64)> = summaries.iter().map(|s| (s.n as f64, s.stats.median)).collect();
                let means: Vec<(f64, f64)> = summaries.iter().map(|s| (s.n as f64, s.stats.mean)).collect();
                let f = rate_fit(&medians)?;
                let g = rate_fit(&means)?;
                fits.insert(
                    label.clone(),
                    FitSummary {
                        slope: f.slope,
                        intercept: f.intercept,
                        ci: f.slope_ci,
                        r2: f.r_squared,
                        mean_slope: g.slope,
                    },
                );
            }
            norms.insert(label.clone(), summaries);
        }
        let mut apriori = Vec::new();
        for &n in &levels {
            let reports: Vec<&AprioriReport> = monitors.iter().filter(|(_, m, _)| *m == n).map(|(_, _, r)| r).collect();
            if reports.is_empty() {
                continue;
            }
            apriori.push(AprioriSummary {
                n,
                seeds: reports.len(),
                omega_n_holds: reports.iter().filter(|r| r.omega_n_holds).count(),
                max_ratio: reports.iter().map(|r| r.ratio).fold(0.0, f64::max),
                max_r_n: reports.iter().map(|r| r.r_n).fold(0.0, f64::max),
            });
        }
        Ok(Self {
            levels,
            checkpoints: checkpoints.to_vec(),
            seeds,
            excluded_seeds: excluded.to_vec(),
            norms,
            fits,
            apriori,
        })
    }
}

/// Monitor reports of every monitored record, tagged by seed and level.
pub fn collect_monitors(records: &[PathRecord]) -> Vec<(u64, usize, AprioriReport)> {
    records
        .iter()
        .filter_map(|r| apriori_report(r).ok().map(|a| (r.seed, r.grid.n(), a)))
        .collect()
}
