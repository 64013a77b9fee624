//! Littlewood–Paley blocks, discrete Besov, Lebesgue and Hölder norms, and
//! the paraproduct decomposition on the grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Value};
use crate::spectral::{forward_transform, inverse_transform_real, Spectrum};

/// Integrability or summability exponent in `[1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn finite(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::OutOfRange {
                what: "exponent",
                value: p,
                range: "[1, ∞)",
            });
        }
        Ok(Exponent::Finite(p))
    }

    /// `1/p`, zero for `∞`.
    pub fn reciprocal(&self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Exponent::Finite(p) => Exponent::finite(*p).map(|_| ()),
            Exponent::Infinity => Ok(()),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("not an exponent: {other:?}")))?;
                Exponent::finite(p)
            }
        }
    }
}

/// `‖(x_j)‖_{ℓ^q}`, computed relative to the largest entry.
pub fn sequence_norm(xs: &[f64], q: Exponent) -> f64 {
    let m = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    match q {
        Exponent::Infinity => m,
        _ if m == 0.0 => 0.0,
        Exponent::Finite(q) => m * xs.iter().map(|x| (x.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q),
    }
}

/// Regularity and integrability indices of `B^α_{p,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub alpha: f64,
    pub p: Exponent,
    pub q: Exponent,
}

impl BesovParams {
    pub fn new(alpha: f64, p: Exponent, q: Exponent) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::OutOfRange {
                what: "alpha",
                value: alpha,
                range: "(-∞, ∞)",
            });
        }
        p.validate()?;
        q.validate()?;
        Ok(Self { alpha, p, q })
    }

    /// `B^α_{∞,∞}`.
    pub fn sup(alpha: f64) -> Self {
        Self {
            alpha,
            p: Exponent::Infinity,
            q: Exponent::Infinity,
        }
    }
}

/// The even bump `φ^0`: 1 on `|x| ≤ 1 - ε0`, 0 for `|x| ≥ 1`, smooth in between.
pub fn bump(x: f64, eps0: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 - eps0 {
        return 1.0;
    }
    if a >= 1.0 {
        return 0.0;
    }
    let s = (1.0 - a) / eps0;
    let rise = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let up = rise(s);
    up / (up + rise(1.0 - s))
}

/// Dyadic partition of unity `φ^j_{ρ_n}(k)` on the frequencies of `Π_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    n: usize,
    eps0: f64,
    rho0: f64,
    rho_n: f64,
    j_n: u32,
    // weights[j][k + n]
    weights: Vec<Vec<f64>>,
}

impl FilterBank {
    pub fn new(n: usize, eps0: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0 < 0.1) {
            return Err(Error::OutOfRange {
                what: "eps0",
                value: eps0,
                range: "(0, 1/10)",
            });
        }
        if n < 2 {
            return Err(Error::Config(format!("filter bank needs n >= 2, got {n}")));
        }
        let j_n = n.ilog2();
        let rho_n = n as f64 / (1u64 << j_n) as f64;
        let rho0 = (3.0 - 2.0 * eps0) / 2.0;
        let scaled = |x: f64| bump(rho0 / rho_n * x, eps0);
        let ni = n as i64;
        let weights = (0..=j_n + 1)
            .map(|j| {
                (-ni..ni)
                    .map(|k| {
                        let x = k as f64;
                        if j == 0 {
                            scaled(x)
                        } else {
                            scaled(x / (1u64 << j) as f64) - scaled(x / (1u64 << (j - 1)) as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            n,
            eps0,
            rho0,
            rho_n,
            j_n,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn rho_n(&self) -> f64 {
        self.rho_n
    }

    /// `J_n = ⌊log2 n⌋`.
    pub fn j_n(&self) -> u32 {
        self.j_n
    }

    /// Number of blocks, `J_n + 2`.
    pub fn block_count(&self) -> usize {
        self.weights.len()
    }

    /// `φ^j_{ρ_n}(k)` for `k ∈ {-n, …, n-1}`; zero for `j > J_n + 1`.
    pub fn weight(&self, j: usize, k: i64) -> f64 {
        match self.weights.get(j) {
            Some(w) => w[(k + self.n as i64) as usize],
            None => 0.0,
        }
    }

    /// Weights of block `j` in frequency order `-n, …, n-1`.
    pub fn block_weights(&self, j: usize) -> &[f64] {
        &self.weights[j]
    }

    fn check_grid<T: Value>(&self, f: &GridFunction<T>) -> Result<()> {
        if f.grid().n() != self.n {
            return Err(Error::Shape {
                expected: 2 * self.n,
                found: f.len(),
            });
        }
        Ok(())
    }

    fn block_from_spectrum(&self, s: &Spectrum, j: usize) -> GridFunction {
        let w = &self.weights[j];
        let n = self.n as i64;
        inverse_transform_real(&s.multiply(|k| w[(k + n) as usize]))
    }

    /// All blocks `f^{[0],n}, …, f^{[J_n+1],n}` from one transform.
    pub fn blocks(&self, f: &GridFunction) -> Result<Vec<GridFunction>> {
        self.check_grid(f)?;
        let s = forward_transform(f);
        Ok((0..self.block_count())
            .map(|j| self.block_from_spectrum(&s, j))
            .collect())
    }

    /// `‖f^{[j],n}‖_{L^p}` for every block.
    pub fn block_norms(&self, f: &GridFunction, p: Exponent) -> Result<Vec<f64>> {
        Ok(self.blocks(f)?.iter().map(|b| lp_norm(b, p)).collect())
    }
}

/// `f^{[j],n} = Σ_k φ^j_{ρ_n}(k) ⟨f, δe_k⟩_n δe_k`.
pub fn lp_block(f: &GridFunction, j: usize, bank: &FilterBank) -> Result<GridFunction> {
    bank.check_grid(f)?;
    if j >= bank.block_count() {
        return Err(Error::OutOfRange {
            what: "block index",
            value: j as f64,
            range: "[0, J_n + 1]",
        });
    }
    Ok(bank.block_from_spectrum(&forward_transform(f), j))
}

/// `‖f‖_{L^p(Π_n)}` with respect to the normalized counting measure.
pub fn lp_norm<T: Value>(f: &GridFunction<T>, p: Exponent) -> f64 {
    let m = f.max_abs();
    match p {
        Exponent::Infinity => m,
        _ if m == 0.0 => 0.0,
        Exponent::Finite(p) => {
            let mean = f.values().iter().map(|v| (v.modulus() / m).powf(p)).sum::<f64>() / f.len() as f64;
            m * mean.powf(1.0 / p)
        }
    }
}

/// `sup|f| + [f]_{C^α}` with the periodic distance on the grid.
pub fn holder_norm(f: &GridFunction, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfRange {
            what: "alpha",
            value: alpha,
            range: "(0, 1)",
        });
    }
    let v = f.values();
    let len = v.len();
    let mut seminorm = 0.0f64;
    for i in 0..len {
        for j in (i + 1)..len {
            let gap = (j - i).min(len - (j - i)) as f64 / len as f64;
            seminorm = seminorm.max((v[i] - v[j]).abs() / gap.powf(alpha));
        }
    }
    Ok(f.max_abs() + seminorm)
}

/// `‖j ↦ 2^{αj} x_j‖_{ℓ^q}` from precomputed block norms `x_j`.
pub fn besov_from_block_norms(block_norms: &[f64], alpha: f64, q: Exponent) -> f64 {
    let weighted: Vec<f64> = block_norms
        .iter()
        .enumerate()
        .map(|(j, x)| (alpha * j as f64).exp2() * x)
        .collect();
    sequence_norm(&weighted, q)
}

/// `‖f‖_{B^α_{p,q}(Π_n)}`.
pub fn besov_norm(f: &GridFunction, params: &BesovParams, bank: &FilterBank) -> Result<f64> {
    let norms = bank.block_norms(f, params.p)?;
    Ok(besov_from_block_norms(&norms, params.alpha, params.q))
}

/// The three Coifman–Meyer pieces of a product on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Paraproducts {
    /// `π_<(f, g) = Σ_k f^{[k]} g^{[≤k-2]}`.
    pub less: GridFunction,
    /// `π_=(f, g) = Σ_{|k-l|≤1} f^{[k]} g^{[l]}`.
    pub resonant: GridFunction,
    /// `π_>(f, g) = π_<(g, f)`.
    pub greater: GridFunction,
}

impl Paraproducts {
    pub fn sum(&self) -> GridFunction {
        let s = self.less.add(&self.resonant).expect("same grid");
        s.add(&self.greater).expect("same grid")
    }
}

fn accumulate_product(acc: &mut [f64], a: &GridFunction, b: &GridFunction) {
    for ((s, x), y) in acc.iter_mut().zip(a.values()).zip(b.values()) {
        *s += x * y;
    }
}

/// Splits `fg` into `π_< + π_= + π_>`.
pub fn paraproducts(f: &GridFunction, g: &GridFunction, bank: &FilterBank) -> Result<Paraproducts> {
    f.check_same_grid(g)?;
    let fb = bank.blocks(f)?;
    let gb = bank.blocks(g)?;
    let grid = *f.grid();
    let len = grid.points();
    let (mut less, mut resonant, mut greater) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for (k, fk) in fb.iter().enumerate() {
        for (l, gl) in gb.iter().enumerate() {
            let target = if l + 2 <= k {
                &mut less
            } else if k + 2 <= l {
                &mut greater
            } else {
                &mut resonant
            };
            accumulate_product(target, fk, gl);
        }
    }
    Ok(Paraproducts {
        less: GridFunction::new(grid, less)?,
        resonant: GridFunction::new(grid, resonant)?,
        greater: GridFunction::new(grid, greater)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.0, 0.05), 1.0);
        assert_eq!(bump(0.95, 0.05), 1.0);
        assert_eq!(bump(1.0, 0.05), 0.0);
        assert_eq!(bump(-1.3, 0.05), 0.0);
        let mid = bump(0.975, 0.05);
        assert!((mid - 0.5).abs() < 1e-12);
        assert_eq!(bump(0.97, 0.05), bump(-0.97, 0.05));
    }

    #[test]
    fn bank_for_n8() {
        let bank = FilterBank::new(8, 0.05).unwrap();
        assert_eq!(bank.j_n(), 3);
        assert_eq!(bank.rho_n(), 1.0);
        assert_eq!(bank.block_count(), 5);
        assert_eq!(bank.weight(0, 0), 1.0);
        for k in -8..8 {
            let total: f64 = (0..bank.block_count()).map(|j| bank.weight(j, k)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(bank.weight(9, 3), 0.0);
        assert!(FilterBank::new(8, 0.1).is_err());
        assert!(FilterBank::new(1, 0.05).is_err());
    }

    #[test]
    fn rho_range() {
        for n in 2..300 {
            let bank = FilterBank::new(n, 0.05).unwrap();
            assert!((1.0..2.0).contains(&bank.rho_n()));
        }
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinity);
        assert_eq!("2".parse::<Exponent>().unwrap(), Exponent::Finite(2.0));
        assert!("0.5".parse::<Exponent>().is_err());
        assert!(BesovParams::new(0.0, Exponent::Finite(0.9), Exponent::Infinity).is_err());
    }

    #[test]
    fn norms_of_simple_functions() {
        let g = GridSpec::new(8, 0.125).unwrap();
        let one = GridFunction::from_fn(g, |_| 1.0);
        for p in [Exponent::Finite(1.0), Exponent::Finite(3.5), Exponent::Infinity] {
            assert!((lp_norm(&one, p) - 1.0).abs() < 1e-15);
        }
        let mut spike = GridFunction::zeros(g);
        spike.values_mut()[3] = 16.0;
        assert_eq!(lp_norm(&spike, Exponent::Finite(1.0)), 1.0);
        let bank = FilterBank::new(8, 0.05).unwrap();
        for alpha in [-0.4, 0.0, 0.7] {
            for q in [Exponent::Finite(1.0), Exponent::Infinity] {
                let params = BesovParams::new(alpha, Exponent::Finite(2.0), q).unwrap();
                assert!((besov_norm(&one, &params, &bank).unwrap() - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(holder_norm(&one.scale(3.0), 0.5).unwrap(), 3.0);
        assert!(holder_norm(&one, 1.0).is_err());
    }

    #[test]
    fn constant_lives_in_block_zero() {
        let g = GridSpec::new(16, 0.125).unwrap();
        let bank = FilterBank::new(16, 0.05).unwrap();
        let one = GridFunction::from_fn(g, |_| 1.0);
        let blocks = bank.blocks(&one).unwrap();
        assert!(blocks[0].sub(&one).unwrap().max_abs() < 1e-14);
        for b in &blocks[1..] {
            assert!(b.max_abs() < 1e-14);
        }
        assert!(lp_block(&one, 6, &bank).is_err());
    }
}
