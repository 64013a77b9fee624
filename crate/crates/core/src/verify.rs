//! Deterministic property checks: exact identities of the grid toolkit and
//! no-growth checks for the functional inequalities whose constants are not
//! explicit.
//!
//! Inequality constants are fitted at the smallest resolution and every
//! larger resolution must stay within [`GROWTH_LIMIT`] of it.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::besov::{besov_from_block_norms, lp_norm, paraproducts, Exponent, FilterBank};
use crate::error::Result;
use crate::grid::{GridFunction, GridSpec};
use crate::lab::probe::heat_kernel_error_probe;
use crate::noise::SplitMix64;
use crate::scheme::{euler_step, Polynomial, SchemeState};
use crate::spectral::{
    discrete_semigroup_apply, eigenvalue_unchecked, extend_iota, forward_transform, inverse_transform,
    inverse_transform_real, restrict_delta, step_factor, Spectrum, TrigPolynomial,
};

pub const GROWTH_LIMIT: f64 = 2.0;
pub const DEFAULT_EPS0: f64 = 0.05;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Worst ratio of one inequality at each resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoGrowth {
    pub name: String,
    pub ratios: Vec<(usize, f64)>,
    /// `max_n ratio(n) / ratio(n_0)`.
    pub growth: f64,
}

impl NoGrowth {
    fn new(name: &str, ratios: Vec<(usize, f64)>) -> Self {
        let base = ratios[0].1;
        let growth = ratios.iter().map(|(_, r)| r / base).fold(0.0, f64::max);
        Self {
            name: name.to_string(),
            ratios,
            growth,
        }
    }

    pub fn passed(&self) -> bool {
        self.growth.is_finite() && self.growth <= GROWTH_LIMIT
    }

    pub fn to_check(&self) -> CheckResult {
        let list: Vec<String> = self.ratios.iter().map(|(n, r)| format!("{n}:{r:.4e}")).collect();
        CheckResult {
            name: self.name.clone(),
            passed: self.passed(),
            detail: format!("growth {:.3} over [{}]", self.growth, list.join(", ")),
        }
    }
}

struct Normals(SplitMix64);

impl Normals {
    fn new(seed: u64, stream: u64) -> Self {
        Self(SplitMix64::at(seed, stream << 24))
    }

    fn next(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    fn complex(&mut self) -> Complex64 {
        Complex64::new(self.next(), self.next())
    }

    fn below(&mut self, m: u64) -> u64 {
        use rand_core::RngCore;
        self.0.next_u64() % m
    }
}

// Test inputs cycle through white values, a few low modes, a k^{-1}
// spectrum and a single cosine at a random frequency, all with mean zero so
// that the constant mode does not set a trivial floor on the ratios.
fn sample_field(grid: GridSpec, family: usize, rng: &mut Normals) -> GridFunction {
    let f = raw_field(grid, family, rng);
    let mean = f.values().iter().sum::<f64>() / f.len() as f64;
    f.map(|v| v - mean)
}

fn raw_field(grid: GridSpec, family: usize, rng: &mut Normals) -> GridFunction {
    let n = grid.n() as i64;
    match family % 4 {
        0 => {
            let v = (0..grid.points()).map(|_| rng.next()).collect();
            GridFunction::new(grid, v).expect("length")
        }
        1 | 2 => {
            let mut s = Spectrum::zeros(grid);
            for k in -n..n {
                let a = if family % 4 == 1 {
                    if k.abs() <= 3 { rng.complex() } else { Complex64::new(0.0, 0.0) }
                } else {
                    rng.complex() / (1.0 + k.abs() as f64)
                };
                s.set(k, a);
            }
            inverse_transform_real(&s)
        }
        _ => {
            let k = (1 + rng.below(n as u64 - 1)) as f64;
            let phase = rng.next();
            GridFunction::from_fn(grid, |x| (2.0 * std::f64::consts::PI * k * x + phase).cos())
        }
    }
}

fn grid(n: usize) -> GridSpec {
    GridSpec::with_default_c(n).expect("valid resolution")
}

fn rel(err: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

/// Resolutions used by the identity suite, including non-powers of two so
/// that both transform paths are exercised.
pub fn identity_resolutions() -> Vec<usize> {
    vec![4, 6, 8, 12, 16, 32, 48, 64, 96, 128, 256]
}

fn identity_check(name: &str, tol: f64, worst: f64, ns: &[usize]) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: worst <= tol,
        detail: format!("worst relative error {worst:.3e} (tolerance {tol:.0e}) over n in {ns:?}"),
    }
}

/// Exact identities: Parseval, transform round trip, `δι = id`,
/// Littlewood–Paley reconstruction, the paraproduct sum, the semigroup
/// property and stencil/spectral agreement of one Euler step.
pub fn identity_suite(ns: &[usize], samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut worst = [0.0f64; 7];
    for &n in ns {
        let g = grid(n);
        let bank = FilterBank::new(n, DEFAULT_EPS0)?;
        for i in 0..samples {
            let mut rng = Normals::new(seed, ((n as u64) << 16) | i as u64);
            let f = sample_field(g, i, &mut rng);
            let other = sample_field(g, i + 1, &mut rng);
            let scale = f.max_abs();
            let s = forward_transform(&f);

            let l2 = lp_norm(&f, Exponent::Finite(2.0)).powi(2);
            worst[0] = worst[0].max(rel((l2 - s.energy()).abs(), l2));

            let back = inverse_transform(&s);
            let err = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst[1] = worst[1].max(rel(err, scale));

            let again = restrict_delta(&extend_iota(&f), &g);
            let err = again.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            worst[2] = worst[2].max(rel(err, scale));

            let blocks = bank.blocks(&f)?;
            let mut sum = GridFunction::zeros(g);
            for b in &blocks {
                sum = sum.add(b)?;
            }
            worst[3] = worst[3].max(rel(sum.sub(&f)?.max_abs(), scale));

            let prod = f.mul(&other)?;
            let pp = paraproducts(&f, &other, &bank)?;
            worst[4] = worst[4].max(rel(pp.sum().sub(&prod)?.max_abs(), prod.max_abs()));

            let (a, b) = (g.time_of(7), g.time_of(13));
            let composed = discrete_semigroup_apply(&g, a, &discrete_semigroup_apply(&g, b, &f)?)?;
            let direct = discrete_semigroup_apply(&g, g.time_of(20), &f)?;
            worst[5] = worst[5].max(rel(composed.sub(&direct)?.max_abs(), scale));

            let stepped = euler_step(&SchemeState::new(f.clone()), &GridFunction::zeros(g), &Polynomial::zero())?;
            let nn = n as i64;
            let factors: Vec<f64> = (-nn..nn).map(|j| step_factor(&g, j)).collect::<Result<_>>()?;
            let spectral = inverse_transform_real(&s.multiply(|j| factors[(j + nn) as usize]));
            worst[6] = worst[6].max(rel(stepped.u.sub(&spectral)?.max_abs(), scale));
        }
    }
    Ok(vec![
        identity_check("parseval", 1e-10, worst[0], ns),
        identity_check("transform round trip", 1e-12, worst[1], ns),
        identity_check("delta iota is the identity", 1e-12, worst[2], ns),
        identity_check("littlewood-paley reconstruction", 1e-12, worst[3], ns),
        identity_check("paraproduct sum", 1e-10, worst[4], ns),
        identity_check("semigroup property", 1e-12, worst[5], ns),
        identity_check("stencil and spectral euler step agree", 1e-12, worst[6], ns),
    ])
}

/// `‖f‖_{L^q} ≤ (2m)^{1/p-1/q} ‖f‖_{L^p}` for `f = Σ_{|k|<m} a_k δe_k`,
/// with no fitted constant. Rounding slack is `1e-12` relative.
pub fn bernstein_check(samples: usize, seed: u64) -> CheckResult {
    let pairs = [
        (Exponent::Finite(1.0), Exponent::Infinity),
        (Exponent::Finite(2.0), Exponent::Infinity),
        (Exponent::Finite(1.0), Exponent::Finite(2.0)),
    ];
    let resolutions = [4usize, 8, 16, 32, 64, 128, 256];
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for i in 0..samples {
        let mut rng = Normals::new(seed ^ 0xbe75, i as u64);
        let n = resolutions[rng.below(resolutions.len() as u64) as usize];
        let m = 1 + rng.below(n as u64) as i64;
        let mut s = Spectrum::zeros(grid(n));
        for k in (1 - m)..m {
            s.set(k, rng.complex());
        }
        let f = inverse_transform(&s);
        for (p, q) in pairs {
            let bound = (2.0 * m as f64).powf(p.reciprocal() - q.reciprocal()) * lp_norm(&f, p);
            let lhs = lp_norm(&f, q);
            tightest = tightest.max(lhs / bound);
            if lhs > bound * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    CheckResult {
        name: "bernstein inequality".to_string(),
        passed: violations == 0,
        detail: format!(
            "{violations} violations in {samples} samples x 3 exponent pairs, tightest ratio {tightest:.6}"
        ),
    }
}

/// `‖f‖_{L^p} ≤ ‖f‖_{B^0_{p,1}}` with constant exactly one.
pub fn lp_below_besov_check(ns: &[usize], samples: usize, seed: u64) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for &n in ns {
        let g = grid(n);
        let bank = FilterBank::new(n, DEFAULT_EPS0)?;
        for i in 0..samples {
            let mut rng = Normals::new(seed ^ 0x1b, ((n as u64) << 16) | i as u64);
            let f = sample_field(g, i, &mut rng);
            for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
                let b = besov_from_block_norms(&bank.block_norms(&f, p)?, 0.0, Exponent::Finite(1.0));
                worst = worst.max(lp_norm(&f, p) / b);
            }
        }
    }
    Ok(CheckResult {
        name: "L^p norm below B^0_{p,1} norm".to_string(),
        passed: worst <= 1.0 + 1e-12,
        detail: format!("largest ratio {worst:.12}"),
    })
}

// max over samples of ratio(f) at every n
fn sweep(
    ns: &[usize],
    samples: usize,
    seed: u64,
    mut ratio: impl FnMut(&GridSpec, &FilterBank, &mut Normals, usize) -> Result<f64>,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let g = grid(n);
        let bank = FilterBank::new(n, DEFAULT_EPS0)?;
        let mut worst = 0.0f64;
        for i in 0..samples {
            let mut rng = Normals::new(seed, ((n as u64) << 16) | i as u64);
            worst = worst.max(ratio(&g, &bank, &mut rng, i)?);
        }
        out.push((n, worst));
    }
    Ok(out)
}

fn sup_besov(f: &GridFunction, bank: &FilterBank, alpha: f64) -> Result<f64> {
    Ok(besov_from_block_norms(&bank.block_norms(f, Exponent::Infinity)?, alpha, Exponent::Infinity))
}

// step counts 1, 2, 4, … up to one time unit
fn dyadic_steps(g: &GridSpec) -> Vec<u64> {
    let total = g.steps_per_unit();
    let mut k = 1;
    let mut out = Vec::new();
    while k < total {
        out.push(k);
        k *= 2;
    }
    out.push(total);
    out
}

fn heat_multipliers(g: &GridSpec, k: u64) -> Vec<f64> {
    let n = g.n() as i64;
    (-n..n)
        .map(|j| (1.0 + g.h() * eigenvalue_unchecked(g.n(), j)).powf(k as f64))
        .collect()
}

fn apply_multipliers(s: &Spectrum, m: &[f64]) -> GridFunction {
    let n = s.n() as i64;
    inverse_transform_real(&s.multiply(|j| m[(j + n) as usize]))
}

/// Bounded-ratio checks for the inequalities with unspecified constants.
pub fn inequality_suite(ns: &[usize], samples: usize, seed: u64) -> Result<Vec<NoGrowth>> {
    let mut out = Vec::new();

    for p in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Infinity] {
        let r = sweep(ns, samples, seed ^ 1, |g, bank, rng, i| {
            let f = sample_field(*g, i, rng);
            let b = besov_from_block_norms(&bank.block_norms(&f, p)?, 0.0, Exponent::Infinity);
            Ok(b / lp_norm(&f, p))
        })?;
        out.push(NoGrowth::new(&format!("B^0_{{{p},inf}} below L^{p}"), r));
    }

    // B^α_{1,∞} ⊂ B^{α-1}_{∞,∞}
    let r = sweep(ns, samples, seed ^ 2, |g, bank, rng, i| {
        let f = sample_field(*g, i, rng);
        let lhs = sup_besov(&f, bank, -1.0)?;
        let rhs = besov_from_block_norms(&bank.block_norms(&f, Exponent::Finite(1.0))?, 0.0, Exponent::Infinity);
        Ok(lhs / rhs)
    })?;
    out.push(NoGrowth::new("besov embedding B^0_{1,inf} into B^-1_{inf,inf}", r));

    let r = sweep(ns, samples, seed ^ 3, |g, bank, rng, i| {
        let f = sample_field(*g, i, rng);
        let h = sample_field(*g, i + 1, rng);
        let prod = f.mul(&h)?;
        Ok(sup_besov(&prod, bank, 0.4)? / (sup_besov(&f, bank, 0.4)? * sup_besov(&h, bank, 0.4)?))
    })?;
    out.push(NoGrowth::new("product estimate in B^0.4_{inf,inf}", r));

    let r = sweep(ns, samples, seed ^ 4, |g, _, rng, i| {
        let f = sample_field(*g, i, rng);
        let poly = extend_iota(&f);
        let fine = GridSpec::new(16 * g.n(), g.c())?;
        let oversampled = restrict_delta(&poly, &fine);
        Ok(lp_norm(&oversampled, Exponent::Finite(4.0)) / lp_norm(&f, Exponent::Finite(4.0)))
    })?;
    out.push(NoGrowth::new("L^4 norm of the trigonometric extension", r));

    let alpha = -0.5;
    let r = sweep(ns, samples, seed ^ 5, |g, bank, rng, i| {
        let f = sample_field(*g, i, rng);
        let s = forward_transform(&f);
        let base = sup_besov(&f, bank, alpha)?;
        let mut worst = 0.0f64;
        for k in dyadic_steps(g) {
            let pf = apply_multipliers(&s, &heat_multipliers(g, k));
            worst = worst.max(g.time_of(k).sqrt() * sup_besov(&pf, bank, alpha + 1.0)? / base);
        }
        Ok(worst)
    })?;
    out.push(NoGrowth::new("semigroup smoothing by one derivative", r));

    let r = sweep(ns, samples, seed ^ 6, |g, bank, rng, i| {
        let f = sample_field(*g, i, rng);
        let s = forward_transform(&f);
        let base = sup_besov(&f, bank, alpha + 1.0)?;
        let mut worst = 0.0f64;
        for k in dyadic_steps(g) {
            let pf = apply_multipliers(&s, &heat_multipliers(g, k));
            let diff = pf.sub(&f)?;
            worst = worst.max(sup_besov(&diff, bank, alpha)? / (g.time_of(k).sqrt() * base));
        }
        Ok(worst)
    })?;
    out.push(NoGrowth::new("semigroup continuity of order one half", r));

    // h Σ_{k<K} Pⁿ_{kh} g over one time unit, in closed form per mode
    let r = sweep(ns, samples, seed ^ 7, |g, bank, rng, i| {
        let f = sample_field(*g, i, rng);
        let total = g.steps_per_unit();
        let h = g.h();
        let m: Vec<f64> = heat_multipliers(g, 1)
            .iter()
            .map(|&r| if r == 1.0 { total as f64 * h } else { h * (1.0 - r.powf(total as f64)) / (1.0 - r) })
            .collect();
        let integral = apply_multipliers(&forward_transform(&f), &m);
        Ok(sup_besov(&integral, bank, alpha + 2.0)? / sup_besov(&f, bank, alpha)?)
    })?;
    out.push(NoGrowth::new("schauder estimate with two derivatives", r));

    let times = [1.0 / 64.0, 0.25, 1.0];
    let r = sweep(ns, samples.min(4), seed ^ 8, |g, _, rng, i| {
        let psi = low_mode_polynomial(rng, i);
        let mut worst = 0.0f64;
        for &t in &times {
            let p = heat_kernel_error_probe(g, 1.0, t, &psi)?;
            worst = worst.max(p.point_error * g.n() as f64);
        }
        Ok(worst)
    })?;
    out.push(NoGrowth::new("deterministic rate n^-1 for smooth data", r));

    let r = sweep(ns, 1, seed ^ 9, |g, _, _, _| {
        let psi = TrigPolynomial::mode(0, Complex64::new(1.0, 0.0));
        let n = g.n() as f64;
        let mut worst = 0.0f64;
        for t in [1.0 / (n * n), 1.0 / 64.0, 0.25, 1.0] {
            worst = worst.max(heat_kernel_error_probe(g, 1.0, t, &psi)?.kernel_ratio);
        }
        Ok(worst)
    })?;
    out.push(NoGrowth::new("heat kernel distance n^-1 t^-1", r));

    Ok(out)
}

// sin(2πx) first, then random real combinations of modes 1..=3
fn low_mode_polynomial(rng: &mut Normals, i: usize) -> TrigPolynomial {
    if i == 0 {
        return TrigPolynomial::new(
            -1,
            vec![Complex64::new(0.0, 0.5), Complex64::new(0.0, 0.0), Complex64::new(0.0, -0.5)],
        );
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 7];
    for k in 1..=3usize {
        let a = rng.complex();
        coeffs[3 + k] = a;
        coeffs[3 - k] = a.conj();
    }
    TrigPolynomial::new(-3, coeffs)
}

/// Resolutions of the inequality suite; the constant is fitted at the first.
pub fn inequality_resolutions() -> Vec<usize> {
    vec![8, 16, 32, 64, 128, 256]
}

/// Everything `verify` mode runs, in a fixed order.
pub fn full_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = identity_suite(&identity_resolutions(), 6, seed)?;
    out.push(bernstein_check(1000, seed));
    out.push(lp_below_besov_check(&inequality_resolutions(), 8, seed)?);
    out.extend(
        inequality_suite(&inequality_resolutions(), 12, seed)?
            .iter()
            .map(NoGrowth::to_check),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_is_relative_to_first_resolution() {
        let g = NoGrowth::new("x", vec![(8, 2.0), (16, 3.0), (32, 1.0)]);
        assert_eq!(g.growth, 1.5);
        assert!(g.passed());
        let g = NoGrowth::new("x", vec![(8, 1.0), (16, 2.5)]);
        assert!(!g.passed());
    }

    #[test]
    fn sample_fields_are_deterministic() {
        let g = grid(16);
        for family in 0..4 {
            let a = sample_field(g, family, &mut Normals::new(3, 1));
            let b = sample_field(g, family, &mut Normals::new(3, 1));
            assert_eq!(a, b);
            assert!(a.max_abs() > 0.0);
        }
    }
}
