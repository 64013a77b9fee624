//! Space-time grids and functions on the periodic spatial grid.
//!
//! A resolution level `n` carries `2n` equispaced points on the unit torus
//! and a time step `h = c (2n)^{-2}` tied to the space step by parabolic
//! scaling. Times on the temporal grid are handled as integer step counts.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible ratio between time step and squared space step.
pub const MAX_C: f64 = 0.125;

const ON_GRID_TOL: f64 = 1e-9;

/// One resolution level: `2n` spatial points and time step `h = c (2n)^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    c: f64,
    h: f64,
    steps_per_unit: u64,
}

impl GridSpec {
    /// Builds a level, rejecting `n = 0`, `c` outside `(0, 1/8]` and any
    /// `(n, c)` for which `1/h` is not an integer.
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if !(c > 0.0 && c <= MAX_C) {
            return Err(Error::OutOfRange {
                what: "c",
                value: c,
                range: "(0, 1/8]",
            });
        }
        let points = (2 * n) as f64;
        let inverse_h = points * points / c;
        let rounded = inverse_h.round();
        if (inverse_h - rounded).abs() > ON_GRID_TOL * rounded || rounded > 2f64.powi(53) {
            return Err(Error::Config(format!(
                "1/h = {inverse_h} is not an integer for n = {n}, c = {c}"
            )));
        }
        Ok(Self {
            n,
            c,
            h: c / (points * points),
            steps_per_unit: rounded as u64,
        })
    }

    /// Default level used throughout the experiments (`c = 1/8`).
    pub fn with_default_c(n: usize) -> Result<Self> {
        Self::new(n, MAX_C)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps_per_unit(&self) -> u64 {
        self.steps_per_unit
    }

    /// Number of spatial points, `2n`.
    pub fn points(&self) -> usize {
        2 * self.n
    }

    /// Space step `(2n)^{-1}`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.points() as f64
    }

    /// Coordinate of the `i`-th grid point.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.points() as f64
    }

    /// Step count `k` with `t = k h`, or an error when `t` is off the grid.
    pub fn step_of(&self, t: f64) -> Result<u64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::OffGrid { t, h: self.h });
        }
        let k = t * self.steps_per_unit as f64;
        let rounded = k.round();
        if (k - rounded).abs() > ON_GRID_TOL * rounded.max(1.0) {
            return Err(Error::OffGrid { t, h: self.h });
        }
        Ok(rounded as u64)
    }

    /// Time of the `k`-th step; exact for dyadic step sizes.
    pub fn time_of(&self, k: u64) -> f64 {
        k as f64 / self.steps_per_unit as f64
    }

    /// Refinement exponent `m` with `finer.n = 2^m n`, both levels sharing `c`.
    pub fn refinement_to(&self, finer: &GridSpec) -> Result<u32> {
        if self.c != finer.c {
            return Err(Error::Coupling(format!(
                "levels use different c ({} vs {})",
                self.c, finer.c
            )));
        }
        if finer.n < self.n || !finer.n.is_multiple_of(self.n) || !(finer.n / self.n).is_power_of_two() {
            return Err(Error::Coupling(format!(
                "n = {} is not a power-of-two multiple of n = {}",
                finer.n, self.n
            )));
        }
        Ok((finer.n / self.n).trailing_zeros())
    }

    /// The level with half as many points, if `n` is even.
    pub fn coarser(&self) -> Option<GridSpec> {
        if self.n.is_multiple_of(2) {
            GridSpec::new(self.n / 2, self.c).ok()
        } else {
            None
        }
    }
}

/// Scalars a grid function may carry: real or complex.
pub trait Value:
    Copy
    + Send
    + Sync
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn to_complex(self) -> Complex64;
    fn modulus(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl Value for f64 {
    fn zero() -> Self {
        0.0
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Value for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Values indexed by the spatial grid; index arithmetic is periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T: Value = f64> {
    grid: GridSpec,
    values: Vec<T>,
}

impl<T: Value> GridFunction<T> {
    pub fn new(grid: GridSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::Shape {
                expected: grid.points(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.points()],
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> T) -> Self {
        let values = (0..grid.points()).map(|i| f(grid.x(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at a periodically wrapped index.
    pub fn at(&self, i: isize) -> T {
        let m = self.values.len() as isize;
        self.values[i.rem_euclid(m) as usize]
    }

    pub fn map<U: Value>(&self, f: impl Fn(T) -> U) -> GridFunction<U> {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `max_x |f(x)|`.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }

    pub fn to_complex(&self) -> GridFunction<Complex64> {
        self.map(Value::to_complex)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_value())
    }

    pub(crate) fn check_same_grid<U: Value>(&self, other: &GridFunction<U>) -> Result<()> {
        if self.grid.n != other.grid.n {
            return Err(Error::Shape {
                expected: self.grid.points(),
                found: other.grid.points(),
            });
        }
        Ok(())
    }
}

impl GridFunction<Complex64> {
    pub fn real_part(&self) -> GridFunction<f64> {
        self.map(|z| z.re)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.im.abs()))
    }
}

impl GridFunction<f64> {
    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }
}

/// Sampled Fourier mode `δe_k(x) = exp(2πikx)` on the grid.
pub fn fourier_mode(grid: GridSpec, k: i64) -> GridFunction<Complex64> {
    let points = grid.points() as i64;
    let mut values = Vec::with_capacity(grid.points());
    for i in 0..points {
        // reduce k·i modulo 2n before forming the phase
        let phase = (k * i).rem_euclid(points) as f64 / points as f64;
        values.push(Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase));
    }
    GridFunction { grid, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_matches_parabolic_scaling() {
        let g = GridSpec::new(2, 0.125).unwrap();
        assert_eq!(g.h(), 1.0 / 128.0);
        assert_eq!(g.steps_per_unit(), 128);
        let g = GridSpec::new(64, 0.125).unwrap();
        assert_eq!(g.steps_per_unit(), 32 * 64 * 64);
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(GridSpec::new(0, 0.1).is_err());
        assert!(GridSpec::new(4, 0.2).is_err());
        assert!(GridSpec::new(4, 0.0).is_err());
        assert!(GridSpec::new(4, -0.1).is_err());
        // 1/h = 64 / 0.07 is not an integer
        assert!(GridSpec::new(4, 0.07).is_err());
        assert!(GridSpec::new(4, 0.1).is_ok());
    }

    #[test]
    fn time_membership() {
        let g = GridSpec::new(4, 0.125).unwrap();
        assert_eq!(g.step_of(0.0).unwrap(), 0);
        assert_eq!(g.step_of(1.0).unwrap(), 512);
        assert_eq!(g.step_of(0.0625).unwrap(), 32);
        assert!(g.step_of(0.001).is_err());
        assert!(g.step_of(-1.0).is_err());
        assert_eq!(g.time_of(32), 0.0625);
    }

    #[test]
    fn refinement() {
        let a = GridSpec::new(16, 0.125).unwrap();
        let b = GridSpec::new(256, 0.125).unwrap();
        assert_eq!(a.refinement_to(&b).unwrap(), 4);
        assert_eq!(a.refinement_to(&a).unwrap(), 0);
        let c = GridSpec::new(48, 0.125).unwrap();
        assert!(a.refinement_to(&c).is_err());
        let d = GridSpec::new(32, 0.1).unwrap();
        assert!(a.refinement_to(&d).is_err());
    }

    #[test]
    fn periodic_indexing() {
        let g = GridSpec::new(2, 0.125).unwrap();
        let f = GridFunction::new(g, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.at(-1), 4.0);
        assert_eq!(f.at(4), 1.0);
        assert!(GridFunction::new(g, vec![1.0]).is_err());
    }
}
