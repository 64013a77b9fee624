//! Discrete Fourier analysis on the periodic grid.
//!
//! Coefficients are indexed by frequencies `k ∈ {-n, …, n-1}` and normalized
//! so that `coeff(k) = (2n)^{-1} Σ_x f(x) e^{-2πikx}`, i.e. the grid basis
//! `δe_k` is orthonormal for the averaged inner product.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Value};

/// Below this `n` the transform is a direct sum.
pub const FFT_THRESHOLD: usize = 64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// `e^{2πi m/len}` for `m = 0..len`.
fn roots(len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / len as f64))
        .collect()
}

/// Discrete Fourier coefficients of a grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: GridSpec,
    // coeffs[k + n]
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// Spectrum from coefficients listed for `k = -n, …, n-1`.
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.points() {
            return Err(Error::Shape {
                expected: grid.points(),
                found: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.points()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Coefficients for `k = -n, …, n-1`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Frequencies in storage order.
    pub fn frequencies(&self) -> impl Iterator<Item = i64> {
        let n = self.n() as i64;
        -n..n
    }

    /// `⟨f, δe_k⟩_n` for `k ∈ {-n, …, n-1}`.
    pub fn coeff(&self, k: i64) -> Complex64 {
        self.coeffs[self.slot(k)]
    }

    pub fn set(&mut self, k: i64, value: Complex64) {
        let i = self.slot(k);
        self.coeffs[i] = value;
    }

    fn slot(&self, k: i64) -> usize {
        let n = self.n() as i64;
        assert!((-n..n).contains(&k), "frequency {k} outside [-{n}, {n})");
        (k + n) as usize
    }

    /// `Σ_k |coeff(k)|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Multiplies coefficient `k` by `m(k)`.
    pub fn multiply(&self, m: impl Fn(i64) -> f64) -> Self {
        let coeffs = self
            .frequencies()
            .zip(&self.coeffs)
            .map(|(k, z)| z * m(k))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }
}

/// Coefficients `⟨f, δe_k⟩_n`, by FFT for `n ≥ 64` and a direct sum below.
pub fn forward_transform<T: Value>(f: &GridFunction<T>) -> Spectrum {
    let grid = *f.grid();
    let len = grid.points();
    let n = grid.n();
    let input: Vec<Complex64> = f.values().iter().map(|v| v.to_complex()).collect();
    let scale = 1.0 / len as f64;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
    if n >= FFT_THRESHOLD {
        let mut buf = input;
        plan(len, false).process(&mut buf);
        for (slot, c) in coeffs.iter_mut().enumerate() {
            let k = slot as i64 - n as i64;
            *c = buf[k.rem_euclid(len as i64) as usize] * scale;
        }
    } else {
        let w = roots(len);
        for (slot, c) in coeffs.iter_mut().enumerate() {
            let k = slot as i64 - n as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, v) in input.iter().enumerate() {
                let m = (k * i as i64).rem_euclid(len as i64) as usize;
                acc += v * w[m].conj();
            }
            *c = acc * scale;
        }
    }
    Spectrum { grid, coeffs }
}

/// `f = Σ_k coeff(k) δe_k`.
pub fn inverse_transform(s: &Spectrum) -> GridFunction<Complex64> {
    let grid = s.grid;
    let len = grid.points();
    let n = grid.n() as i64;
    let mut values = vec![Complex64::new(0.0, 0.0); len];
    if grid.n() >= FFT_THRESHOLD {
        for (slot, c) in s.coeffs.iter().enumerate() {
            let k = slot as i64 - n;
            values[k.rem_euclid(len as i64) as usize] = *c;
        }
        plan(len, true).process(&mut values);
    } else {
        let w = roots(len);
        for (i, v) in values.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (slot, c) in s.coeffs.iter().enumerate() {
                let k = slot as i64 - n;
                acc += c * w[(k * i as i64).rem_euclid(len as i64) as usize];
            }
            *v = acc;
        }
    }
    GridFunction::new(grid, values).expect("length preserved")
}

/// Inverse transform keeping the real part; exact for spectra of real
/// functions up to rounding.
pub fn inverse_transform_real(s: &Spectrum) -> GridFunction<f64> {
    inverse_transform(s).real_part()
}

/// `Δ_n f(x) = (2n)² (f(x + 1/2n) - 2f(x) + f(x - 1/2n))`, periodic.
pub fn discrete_laplacian<T: Value>(f: &GridFunction<T>) -> GridFunction<T> {
    let len = f.len();
    let scale = (len * len) as f64;
    let v = f.values();
    let values = (0..len)
        .map(|i| {
            let left = v[(i + len - 1) % len];
            let right = v[(i + 1) % len];
            (right - v[i] * 2.0 + left) * scale
        })
        .collect();
    GridFunction::new(*f.grid(), values).expect("length preserved")
}

fn check_frequency(n: usize, j: i64) -> Result<()> {
    if j.unsigned_abs() as usize > n {
        return Err(Error::OutOfRange {
            what: "frequency",
            value: j as f64,
            range: "[-n, n]",
        });
    }
    Ok(())
}

/// `λⁿ_j = -16 n² sin²(jπ/2n)`, the eigenvalue of `Δ_n` on `δe_j`.
pub fn eigenvalue(n: usize, j: i64) -> Result<f64> {
    check_frequency(n, j)?;
    Ok(eigenvalue_unchecked(n, j))
}

pub(crate) fn eigenvalue_unchecked(n: usize, j: i64) -> f64 {
    let nf = n as f64;
    let s = (j as f64 * PI / (2.0 * nf)).sin();
    -16.0 * nf * nf * s * s
}

/// `λ_j = -4π² j²`, the eigenvalue of `Δ` on `e_j`.
pub fn continuous_eigenvalue(j: i64) -> f64 {
    -4.0 * PI * PI * (j * j) as f64
}

/// `γⁿ_j = λⁿ_j / λ_j`, with `γⁿ_0 = 1`.
pub fn gamma_ratio(n: usize, j: i64) -> Result<f64> {
    check_frequency(n, j)?;
    if j == 0 {
        return Ok(1.0);
    }
    let x = j as f64 * PI / (2.0 * n as f64);
    let s = x.sin() / x;
    Ok(s * s)
}

/// `1 + hλⁿ_j`, the one-step factor of the explicit scheme on mode `j`.
pub fn step_factor(grid: &GridSpec, j: i64) -> Result<f64> {
    Ok(1.0 + grid.h() * eigenvalue(grid.n(), j)?)
}

/// `(1 + hλⁿ_j)^{t/h}` for `t` on the time grid.
pub fn heat_step_multiplier(grid: &GridSpec, j: i64, t: f64) -> Result<f64> {
    let k = grid.step_of(t)?;
    heat_multiplier_steps(grid, j, k)
}

/// `(1 + hλⁿ_j)^k`.
pub fn heat_multiplier_steps(grid: &GridSpec, j: i64, k: u64) -> Result<f64> {
    Ok(step_factor(grid, j)?.powf(k as f64))
}

/// Largest `κ` with `|1 + hλⁿ_j|^{t/h} ≤ e^{-κ t j²}` for all `0 < |j| ≤ n`.
pub fn decay_rate(grid: &GridSpec) -> f64 {
    let n = grid.n() as i64;
    (1..=n)
        .map(|j| {
            let r = 1.0 + grid.h() * eigenvalue_unchecked(grid.n(), j);
            -r.ln() / (grid.h() * (j * j) as f64)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `Pⁿ_t f`: every mode scaled by `(1 + hλⁿ_k)^{t/h}`.
pub fn discrete_semigroup_apply(grid: &GridSpec, t: f64, f: &GridFunction) -> Result<GridFunction> {
    if f.grid().n() != grid.n() {
        return Err(Error::Shape {
            expected: grid.points(),
            found: f.len(),
        });
    }
    let k = grid.step_of(t)?;
    let r: Vec<f64> = (-(grid.n() as i64)..grid.n() as i64)
        .map(|j| 1.0 + grid.h() * eigenvalue_unchecked(grid.n(), j))
        .collect();
    let n = grid.n() as i64;
    let s = forward_transform(f).multiply(|j| r[(j + n) as usize].powf(k as f64));
    Ok(inverse_transform_real(&s))
}

/// A trigonometric polynomial `Σ_k a_k e_k` on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    lowest: i64,
    coeffs: Vec<Complex64>,
}

impl TrigPolynomial {
    /// Coefficients for `k = lowest, lowest + 1, …`.
    pub fn new(lowest: i64, coeffs: Vec<Complex64>) -> Self {
        Self { lowest, coeffs }
    }

    /// Single mode `a e_k`.
    pub fn mode(k: i64, a: Complex64) -> Self {
        Self::new(k, vec![a])
    }

    pub fn lowest(&self) -> i64 {
        self.lowest
    }

    pub fn highest(&self) -> i64 {
        self.lowest + self.coeffs.len() as i64 - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &a)| (self.lowest + i as i64, a))
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let i = k - self.lowest;
        if i < 0 || i as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[i as usize]
        }
    }

    /// Point evaluation.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms()
            .map(|(k, a)| a * Complex64::from_polar(1.0, 2.0 * PI * (k as f64 * x).rem_euclid(1.0)))
            .sum()
    }

    /// Mode-wise multiplication by `m(k)`.
    pub fn multiply(&self, m: impl Fn(i64) -> f64) -> Self {
        Self {
            lowest: self.lowest,
            coeffs: self.terms().map(|(k, a)| a * m(k)).collect(),
        }
    }
}

/// `P_t`: mode `k` scaled by `e^{-4π²k²t}`.
pub fn continuous_semigroup_apply(series: &TrigPolynomial, t: f64) -> Result<TrigPolynomial> {
    if !(t >= 0.0) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            range: "[0, ∞)",
        });
    }
    Ok(series.multiply(|k| (continuous_eigenvalue(k) * t).exp()))
}

/// `ιf = Σ_{k=-n}^{n-1} ⟨f, δe_k⟩_n e_k`.
pub fn extend_iota<T: Value>(f: &GridFunction<T>) -> TrigPolynomial {
    let s = forward_transform(f);
    TrigPolynomial::new(-(s.n() as i64), s.coeffs)
}

/// `δ`: sampling on the grid. Modes are folded with `δe_{k+2n} = δe_k`
/// before a single inverse transform.
pub fn restrict_delta(series: &TrigPolynomial, target: &GridSpec) -> GridFunction<Complex64> {
    let n = target.n() as i64;
    let mut s = Spectrum::zeros(*target);
    for (k, a) in series.terms() {
        let folded = (k + n).rem_euclid(2 * n) - n;
        let slot = s.slot(folded);
        s.coeffs[slot] += a;
    }
    inverse_transform(&s)
}
