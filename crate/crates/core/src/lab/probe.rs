//! Distances between the discrete and continuous heat semigroups.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::spectral::{continuous_eigenvalue, continuous_semigroup_apply, discrete_semigroup_apply, eigenvalue_unchecked, TrigPolynomial};

/// Output of [`heat_kernel_error_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelProbe {
    /// `max_{x∈Π_n} |Pⁿ_t ψ(x) - P_t ψ(x)|`.
    pub point_error: f64,
    /// `‖p_t(x, ·) - pⁿ_t(x, ρ_n(·))‖²_{L²(T)}`.
    pub kernel_l2_sq: f64,
    /// `kernel_l2_sq / (n^{-β} t^{-(β+1)/2})`.
    pub kernel_ratio: f64,
}

/// Compares `Pⁿ_t` and `P_t` on the trigonometric polynomial `ψ` and
/// measures the squared `L²` distance between their kernels.
pub fn heat_kernel_error_probe(grid: &GridSpec, beta: f64, t: f64, psi: &TrigPolynomial) -> Result<HeatKernelProbe> {
    if !(0.0..=2.0).contains(&beta) {
        return Err(Error::OutOfRange {
            what: "beta",
            value: beta,
            range: "[0, 2]",
        });
    }
    let steps = grid.step_of(t)?;
    if steps == 0 {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            range: "[h, 1]",
        });
    }
    let sampled = GridFunction::from_fn(*grid, |x| psi.eval(x).re);
    let discrete = discrete_semigroup_apply(grid, t, &sampled)?;
    let exact = continuous_semigroup_apply(psi, t)?;
    let point_error = (0..grid.points())
        .map(|i| (discrete.values()[i] - exact.eval(grid.x(i)).re).abs())
        .fold(0.0, f64::max);
    let kernel_l2_sq = kernel_distance_sq(grid, steps, t);
    let n = grid.n() as f64;
    Ok(HeatKernelProbe {
        point_error,
        kernel_l2_sq,
        kernel_ratio: kernel_l2_sq / (n.powf(-beta) * t.powf(-(beta + 1.0) / 2.0)),
    })
}

// ∫|p|² = Σ_k e^{-8π²k²t}, ∫|pⁿ∘ρ|² = Σ_j μ_j², and the cross term pairs
// mode k of p with the cell average of mode k mod 2n of pⁿ.
fn kernel_distance_sq(grid: &GridSpec, steps: u64, t: f64) -> f64 {
    let n = grid.n() as i64;
    let mu: Vec<f64> = (-n..n)
        .map(|j| (1.0 + grid.h() * eigenvalue_unchecked(grid.n(), j)).powf(steps as f64))
        .collect();
    let discrete: f64 = mu.iter().map(|m| m * m).sum();
    let mut continuous = 1.0;
    let mut cross = mu[n as usize];
    for k in 1.. {
        let decay = (continuous_eigenvalue(k) * t).exp();
        if decay < 1e-300 {
            break;
        }
        let x = PI * k as f64 / n as f64;
        let sinc = if k % n == 0 { 0.0 } else { x.sin() / x };
        for kk in [k, -k] {
            let folded = (kk + n).rem_euclid(2 * n);
            continuous += decay * decay;
            cross += decay * sinc * mu[folded as usize];
        }
    }
    (continuous + discrete - 2.0 * cross).max(0.0)
}
