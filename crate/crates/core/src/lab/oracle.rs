//! Exact second moments of the linear error `⟨δO_t - Oⁿ_t, δe_ℓ⟩_n` and the
//! deterministic Besov-type bound built from them.
//!
//! The stochastic convolution `O` (continuous) and `Oⁿ` (scheme with `F = 0`,
//! `ψ = 0`) are Gaussian, so every mode variance is an explicit integral of
//! exponentials. All time integrals are summed per time step in closed form;
//! the infinite alias sums use the partial-fraction identities
//! `Σ_j (x+j)^{-2} = π²/sin²(πx)` and `Σ_j (x+j)^{-3} = π³cos(πx)/sin³(πx)`
//! for their slowly decaying parts, so only exponentially small remainders
//! are summed term by term.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::besov::FilterBank;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::spectral::{continuous_eigenvalue, eigenvalue_unchecked};

/// Remainders below this are dropped from the alias sums.
const NEGLIGIBLE: f64 = 1e-300;

/// `Σ_{m<M} q^m`.
fn geo(q: f64, m: u64) -> f64 {
    if (1.0 - q).abs() < 1e-14 {
        return m as f64;
    }
    -((m as f64) * q.ln()).exp_m1() / (1.0 - q)
}

/// `∫_0^h e^{a u} du`.
fn integral_exp(a: f64, h: f64) -> f64 {
    if (a * h).abs() < 1e-12 {
        h
    } else {
        (a * h).exp_m1() / a
    }
}

/// `Re ⟨e_k, e_ℓ∘ρ_n⟩` for `k ≡ ℓ mod 2n`, i.e. `sin(πk/n)/(πk/n)`.
fn cell_factor(n: usize, k: i64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k % n as i64 == 0 {
        return 0.0;
    }
    let x = PI * k as f64 / n as f64;
    x.sin() / x
}

/// `E|⟨δO_t - Oⁿ_t, δe_ℓ⟩_n|²` split into its three sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVariance {
    pub n: usize,
    pub ell: i64,
    pub t: f64,
    /// Mode `ℓ` of `O` against mode `ℓ` of `Oⁿ`.
    pub direct: f64,
    /// Modes `ℓ + 2jn`, `j ≠ 0`, of `O`, which alias onto `ℓ`.
    pub alias: f64,
    /// Correlation of the aliased modes with `Oⁿ` through the cell averages.
    pub cross: f64,
    pub value: f64,
}

/// Exact mode variance for `|ℓ| ≤ n - 1` and `t` on the time grid.
pub fn exact_mode_variance(n: usize, ell: i64, t: f64, c: f64) -> Result<ModeVariance> {
    if ell.unsigned_abs() as usize >= n {
        return Err(Error::OutOfRange {
            what: "ell",
            value: ell as f64,
            range: "[-(n-1), n-1]",
        });
    }
    let grid = GridSpec::new(n, c)?;
    mode_variance_on(&grid, ell, t)
}

/// Same as [`exact_mode_variance`] but for any `ℓ ∈ {-n, …, n-1}`.
pub fn mode_variance_on(grid: &GridSpec, ell: i64, t: f64) -> Result<ModeVariance> {
    let n = grid.n();
    let steps = grid.step_of(t)?;
    let h = grid.h();
    if steps == 0 {
        return Ok(ModeVariance {
            n,
            ell,
            t,
            direct: 0.0,
            alias: 0.0,
            cross: 0.0,
            value: 0.0,
        });
    }
    let lam = continuous_eigenvalue(ell);
    let r = 1.0 + h * eigenvalue_unchecked(n, ell);
    let s_ell = cell_factor(n, ell);

    // B is constant on each step, A(s) = e^{λ(t-s)}; sum step by step
    let int_a2 = geo((2.0 * lam * h).exp(), steps) * integral_exp(2.0 * lam, h);
    let int_b2 = geo(r * r, steps) * h;
    let int_ab = geo(r * (lam * h).exp(), steps) * integral_exp(lam, h);
    let direct = int_a2 + int_b2 - 2.0 * s_ell * int_ab;

    let two_n = 2.0 * n as f64;
    let x = ell as f64 / two_n;
    // Σ_{j≠0} k^{-2} and Σ_{j≠0} k^{-3} over k = ℓ + 2jn
    let (s2, s3) = if ell == 0 {
        (PI * PI / (3.0 * two_n * two_n), 0.0)
    } else {
        let sin = (PI * x).sin();
        let p = PI / two_n;
        (
            p * p / (sin * sin) - 1.0 / (ell * ell) as f64,
            p * p * p * (PI * x).cos() / (sin * sin * sin) - 1.0 / (ell as f64).powi(3),
        )
    };
    // Each aliased mode contributes (1 - e^{-8π²k²t})/(8π²k²); its
    // correlation with Oⁿ is -2 (ℓ/k) S_ℓ ∫ A_k B, where
    // ∫ A_k B = 1/(-λ_k) + rem_k and rem_k is exponentially small in k.
    let mut alias = s2 / (8.0 * PI * PI);
    let mut cross = -2.0 * s_ell * ell as f64 * s3 / (4.0 * PI * PI);
    let two_n_i = 2 * n as i64;
    for j in 1.. {
        let mut done = true;
        for k in [ell + j * two_n_i, ell - j * two_n_i] {
            let kf = k as f64;
            let lk = continuous_eigenvalue(k);
            let decay = (2.0 * lk * t).exp() / (8.0 * PI * PI * kf * kf);
            alias -= decay;
            let e1 = (lk * h).exp();
            let q = r * e1;
            let rem = (e1 * (r - 1.0) - q.powf(steps as f64) * (1.0 - e1)) / ((1.0 - q) * (-lk));
            cross += -2.0 * (ell as f64 / kf) * s_ell * rem;
            if decay > NEGLIGIBLE || rem.abs() > NEGLIGIBLE {
                done = false;
            }
        }
        if done {
            break;
        }
    }
    Ok(ModeVariance {
        n,
        ell,
        t,
        direct,
        alias,
        cross,
        value: (direct + alias + cross).max(0.0),
    })
}

/// `a_ℓ²(t)` for every `ℓ ∈ {-n, …, n-1}`, in that order.
pub fn mode_variances(n: usize, t: f64, c: f64) -> Result<Vec<f64>> {
    let grid = GridSpec::new(n, c)?;
    let ni = n as i64;
    (-ni..ni).map(|l| mode_variance_on(&grid, l, t).map(|m| m.value)).collect()
}

/// Variance of `⟨δ O^N_t - Oⁿ_t, δe_ℓ⟩_n` when the reference is the scheme on
/// the finer grid `N = 2^m n` driven by the same noise. This is what a
/// coupled simulation estimates; it differs from [`exact_mode_variance`] by
/// the reference's own discretization error.
pub fn proxy_mode_variance(n: usize, reference_n: usize, ell: i64, t: f64, c: f64) -> Result<f64> {
    let coarse = GridSpec::new(n, c)?;
    let fine = GridSpec::new(reference_n, c)?;
    coarse.refinement_to(&fine)?;
    let ni = n as i64;
    if !(-ni..ni).contains(&ell) {
        return Err(Error::OutOfRange {
            what: "ell",
            value: ell as f64,
            range: "[-n, n-1]",
        });
    }
    let blocks = coarse.step_of(t)?;
    let ratio = (reference_n / n) as u64;
    let fine_per_block = ratio * ratio;
    let fine_steps = blocks * fine_per_block;
    let two_big_n = 2.0 * reference_n as f64;
    let r_n = 1.0 + coarse.h() * eigenvalue_unchecked(n, ell);

    let mut fine_only = 0.0;
    let mut cross = 0.0;
    for k in alias_set(n, reference_n, ell) {
        let r_k = 1.0 + fine.h() * eigenvalue_unchecked(reference_n, k);
        fine_only += geo(r_k * r_k, fine_steps);
        let g_k: Complex64 = (0..ratio)
            .map(|i| Complex64::from_polar(1.0, -2.0 * PI * (k * i as i64) as f64 / two_big_n))
            .sum();
        let lag = geo(r_n * r_k.powf(fine_per_block as f64), blocks) * geo(r_k, fine_per_block);
        cross += g_k.re * lag;
    }
    let coarse_only = fine_per_block as f64 * geo(r_n * r_n, blocks);
    let total = two_big_n * (fine_only + coarse_only) - 2.0 * (2 * n) as f64 * cross;
    Ok(total * fine.h() / two_big_n)
}

/// `{k ∈ [-N, N) : k ≡ ℓ mod 2n}`, ascending.
pub fn alias_set(n: usize, reference_n: usize, ell: i64) -> Vec<i64> {
    let big = reference_n as i64;
    let period = 2 * n as i64;
    (-big..big).filter(|k| (k - ell).rem_euclid(period) == 0).collect()
}

/// `( Σ_j 2^j ( Σ_k (2^{αj} φ^j(k) a_k)² )^{q/2} )^{1/q}` with `a_k²` given
/// for `k = -n, …, n-1`. Evaluated in logarithms, so large `q` is safe.
pub fn kolmogorov_bound(variances: &[f64], alpha: f64, q: f64, bank: &FilterBank) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::OutOfRange {
            what: "q",
            value: q,
            range: "[1, ∞)",
        });
    }
    if variances.len() != 2 * bank.n() {
        return Err(Error::Shape {
            expected: 2 * bank.n(),
            found: variances.len(),
        });
    }
    if variances.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Config("variances must be nonnegative".into()));
    }
    let logs: Vec<f64> = (0..bank.block_count())
        .filter_map(|j| {
            let w = bank.block_weights(j);
            let inner: f64 = w.iter().zip(variances).map(|(p, a2)| p * p * a2).sum();
            (inner > 0.0).then(|| {
                j as f64 * std::f64::consts::LN_2 + q / 2.0 * (2.0 * alpha * j as f64 * std::f64::consts::LN_2 + inner.ln())
            })
        })
        .collect();
    if logs.is_empty() {
        return Ok(0.0);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    Ok((lse / q).exp())
}

/// `(n, n² a₁²(t))` for each `n`.
pub fn lower_bound_scan(n_list: &[usize], t: f64, c: f64) -> Result<Vec<(usize, f64)>> {
    n_list
        .iter()
        .map(|&n| {
            let v = exact_mode_variance(n, 1, t, c)?;
            Ok((n, (n * n) as f64 * v.value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_sums() {
        assert_eq!(geo(1.0, 7), 7.0);
        assert!((geo(0.5, 3) - 1.75).abs() < 1e-15);
        assert_eq!(geo(0.5, 0), 0.0);
    }

    #[test]
    fn zero_time_is_zero() {
        let v = exact_mode_variance(8, 3, 0.0, 0.125).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(exact_mode_variance(8, 8, 0.5, 0.125).is_err());
        assert!(exact_mode_variance(8, -8, 0.5, 0.125).is_err());
        assert!(exact_mode_variance(8, 1, 0.001, 0.125).is_err());
    }

    #[test]
    fn alias_sets() {
        assert_eq!(alias_set(2, 8, 1), vec![-7, -3, 1, 5]);
        assert_eq!(alias_set(4, 4, -4), vec![-4]);
    }

    #[test]
    fn bound_of_single_mode() {
        let bank = FilterBank::new(8, 0.05).unwrap();
        let mut a = vec![0.0; 16];
        assert_eq!(kolmogorov_bound(&a, -0.4, 64.0, &bank).unwrap(), 0.0);
        a[8] = 1.0;
        for (alpha, q) in [(-0.4, 64.0), (0.3, 2.0), (0.0, 1.0)] {
            assert!((kolmogorov_bound(&a, alpha, q, &bank).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(kolmogorov_bound(&a, 0.0, 0.5, &bank).is_err());
        assert!(kolmogorov_bound(&a[1..], 0.0, 2.0, &bank).is_err());
    }
}
