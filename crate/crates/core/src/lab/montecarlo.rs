//! Monte Carlo estimates of linear-case mode variances.
//!
//! Two independent routes are provided. [`coupled_mode_variance`] runs the
//! full coupled solver on every grid point and reads off the error mode.
//! [`mode_reduced_variance`] simulates the same Gaussian vector but keeps
//! only the fine modes that alias onto the target mode, which makes
//! thousands of paths at large reference levels affordable.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::lab::error_field;
use crate::lab::oracle::alias_set;
use crate::noise::SplitMix64;
use crate::scheme::{coupled_solve, Problem, SolveOptions};
use crate::spectral::{eigenvalue_unchecked, forward_transform};

/// Sample second moment of a mean-zero complex quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub paths: usize,
    /// `mean |X|²`.
    pub mean: f64,
    /// Standard error of `mean`.
    pub stderr: f64,
}

impl MonteCarloEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let p = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / p;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (p - 1.0);
        Self {
            paths: samples.len(),
            mean,
            stderr: (var / p).sqrt(),
        }
    }

    /// `|mean - target| / stderr`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.stderr
    }
}

fn check_paths(paths: usize) -> Result<()> {
    if paths < 2 {
        return Err(Error::Config("need at least two Monte Carlo paths".into()));
    }
    Ok(())
}

/// `|⟨δO^N_t - Oⁿ_t, δe_ℓ⟩_n|²` over `paths` full coupled linear solves with
/// seeds `base_seed, base_seed + 1, …`.
pub fn coupled_mode_variance(
    coarse: &GridSpec,
    reference: &GridSpec,
    ell: i64,
    t: f64,
    paths: usize,
    base_seed: u64,
) -> Result<MonteCarloEstimate> {
    check_paths(paths)?;
    let opts = SolveOptions {
        checkpoints: vec![t],
        monitor: false,
        ..SolveOptions::default()
    };
    let problem = Problem::linear();
    let mut samples = Vec::with_capacity(paths);
    for p in 0..paths as u64 {
        let records = coupled_solve(&[*coarse, *reference], &problem, base_seed + p, &opts)?;
        let err = error_field(&records[1], &records[0], t)?;
        samples.push(forward_transform(&err).coeff(ell).norm_sqr());
    }
    Ok(MonteCarloEstimate::from_samples(&samples))
}

// one fine mode k of the alias set, with what the block recursion needs
struct AliasMode {
    r_block: f64,
    // Cholesky factor of the covariance of (W1, W2) over one coarse step
    l11: f64,
    l21: f64,
    l22: f64,
    // coarse cell average of e_k, (1/R) Σ_{i<R} e^{2πiki/2N}
    g: Complex64,
    real: bool,
    // index of the conjugate partner in the alias set, if it is also there
    partner: Option<usize>,
}

/// Exact simulation of `⟨δO^N_t - Oⁿ_t, δe_ℓ⟩_n` restricted to the fine
/// modes `k ≡ ℓ (mod 2n)`. Over one coarse step each such mode receives the
/// pair `W1 = Σ_s Z_s`, `W2 = Σ_s r_k^{R²-1-s} Z_s` of its fine noise
/// coefficients, which is all that enters both the fine recursion and the
/// coarse noise.
pub fn mode_reduced_variance(
    coarse: &GridSpec,
    reference: &GridSpec,
    ell: i64,
    t: f64,
    paths: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    check_paths(paths)?;
    let m = coarse.refinement_to(reference)?;
    let n = coarse.n() as i64;
    if !(-n..n).contains(&ell) {
        return Err(Error::OutOfRange {
            what: "ell",
            value: ell as f64,
            range: "[-n, n-1]",
        });
    }
    let blocks = coarse.step_of(t)?;
    let ratio = 1u64 << m;
    let fine_per_block = (ratio * ratio) as f64;
    let h = reference.h();
    let big_n = reference.n() as i64;
    let ks = alias_set(coarse.n(), reference.n(), ell);
    let modes: Vec<AliasMode> = ks
        .iter()
        .map(|&k| {
            let r = 1.0 + h * eigenvalue_unchecked(reference.n(), k);
            let geo = |q: f64| {
                if (1.0 - q).abs() < 1e-15 {
                    fine_per_block
                } else {
                    (1.0 - q.powf(fine_per_block)) / (1.0 - q)
                }
            };
            let v1 = h * fine_per_block;
            let v2 = h * geo(r * r);
            let c12 = h * geo(r);
            let l11 = v1.sqrt();
            let l21 = c12 / l11;
            let l22 = (v2 - l21 * l21).max(0.0).sqrt();
            let g = (0..ratio as i64)
                .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (k * i) as f64 / (2 * big_n) as f64))
                .sum::<Complex64>()
                / ratio as f64;
            let conj = if k == -big_n { -big_n } else { -k };
            AliasMode {
                r_block: r.powf(fine_per_block),
                l11,
                l21,
                l22,
                g,
                real: conj == k,
                partner: ks.iter().position(|&j| j == conj).filter(|_| conj != k),
            }
        })
        .collect();
    let r_coarse = 1.0 + coarse.h() * eigenvalue_unchecked(coarse.n(), ell);

    let mut samples = Vec::with_capacity(paths);
    let mut fine = vec![Complex64::new(0.0, 0.0); modes.len()];
    let mut w = vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); modes.len()];
    for p in 0..paths as u64 {
        let mut rng = SplitMix64::at(seed, p << 32);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        fine.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let mut coarse_mode = Complex64::new(0.0, 0.0);
        for _ in 0..blocks {
            let mut increment = Complex64::new(0.0, 0.0);
            for (i, mode) in modes.iter().enumerate() {
                let (w1, w2) = match mode.partner {
                    Some(j) if j < i => (w[j].0.conj(), w[j].1.conj()),
                    _ => {
                        let (z1, z2) = if mode.real {
                            (Complex64::new(normal(), 0.0), Complex64::new(normal(), 0.0))
                        } else {
                            let s = std::f64::consts::FRAC_1_SQRT_2;
                            (
                                Complex64::new(s * normal(), s * normal()),
                                Complex64::new(s * normal(), s * normal()),
                            )
                        };
                        (z1 * mode.l11, z1 * mode.l21 + z2 * mode.l22)
                    }
                };
                w[i] = (w1, w2);
                increment += mode.g * w1;
                fine[i] = fine[i] * mode.r_block + w2;
            }
            coarse_mode = coarse_mode * r_coarse + increment;
        }
        let x = fine.iter().sum::<Complex64>() - coarse_mode;
        samples.push(x.norm_sqr());
    }
    Ok(MonteCarloEstimate::from_samples(&samples))
}
