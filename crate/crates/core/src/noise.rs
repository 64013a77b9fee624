//! Seeded space-time white noise on the finest grid and its exact
//! aggregation onto coarser grids.
//!
//! Cell values are drawn from a counter-based stream: the draws for fine
//! time step `k` start at a fixed offset `k * 2^20` of one SplitMix64
//! sequence, so any row can be regenerated from `(seed, k)` alone.
//! Coarser levels are never resampled; their cells are sums of the fine
//! cells they cover, accumulated by repeated halving so that coarsening in
//! stages is bitwise identical to coarsening in one go.

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Draws reserved per fine time step.
const STREAM_STRIDE_LOG2: u32 = 20;

/// Largest number of spatial cells a fine row may have.
pub const MAX_FINE_POINTS: usize = 1 << (STREAM_STRIDE_LOG2 - 2);

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 positioned at an arbitrary counter.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Stream for `(seed, counter)`: the generator's next output is draw
    /// number `counter` of the sequence keyed by `seed`.
    pub fn at(seed: u64, counter: u64) -> Self {
        let key = mix64(seed.wrapping_add(GAMMA));
        Self {
            state: key.wrapping_add(counter.wrapping_mul(GAMMA)),
        }
    }
}

impl RngCore for SplitMix64 {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// One realization of space-time white noise, identified by its seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WhiteNoise {
    seed: u64,
}

impl WhiteNoise {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Writes `ξ([t_k, t_k + h] × [x_i, x_i + 1/(2N)])` for all `i` into `out`.
    pub fn fill_row(&self, grid: &GridSpec, fine_step: u64, out: &mut [f64]) -> Result<()> {
        if out.len() != grid.points() {
            return Err(Error::Shape {
                expected: grid.points(),
                found: out.len(),
            });
        }
        if grid.points() > MAX_FINE_POINTS {
            return Err(Error::Config(format!(
                "finest grid has {} points, the noise stream supports at most {MAX_FINE_POINTS}",
                grid.points()
            )));
        }
        let sd = (grid.h() * grid.spacing()).sqrt();
        let mut rng = SplitMix64::at(self.seed, fine_step << STREAM_STRIDE_LOG2);
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = sd * z;
        }
        Ok(())
    }
}

/// Cell integrals of the noise over one fine time step, `2N` values with
/// variance `h/(2N)` each.
pub fn stream_fine_noise(grid_finest: &GridSpec, seed: u64, fine_step: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; grid_finest.points()];
    WhiteNoise::new(seed).fill_row(grid_finest, fine_step, &mut out)?;
    Ok(out)
}

// acc[x] += row[2x] + row[2x+1]
fn add_halved(acc: &mut [f64], row: &[f64]) {
    for (a, pair) in acc.iter_mut().zip(row.chunks_exact(2)) {
        *a += pair[0] + pair[1];
    }
}

/// Aggregates `4^m` consecutive fine rows (one coarse time step) on
/// `from_level` into the `2n` cells of `to_level`, where `N = 2^m n`.
pub fn coarsen(rows: &[Vec<f64>], from_level: &GridSpec, to_level: &GridSpec) -> Result<Vec<f64>> {
    let m = to_level.refinement_to(from_level)?;
    let expected_rows = 1usize << (2 * m);
    if rows.len() != expected_rows {
        return Err(Error::Shape {
            expected: expected_rows,
            found: rows.len(),
        });
    }
    for row in rows {
        if row.len() != from_level.points() {
            return Err(Error::Shape {
                expected: from_level.points(),
                found: row.len(),
            });
        }
    }
    let mut current: Vec<Vec<f64>> = rows.to_vec();
    for _ in 0..m {
        current = current
            .chunks_exact(4)
            .map(|group| {
                let mut acc = vec![0.0; group[0].len() / 2];
                for row in group {
                    add_halved(&mut acc, row);
                }
                acc
            })
            .collect();
    }
    Ok(current.pop().unwrap_or_default())
}

/// The discrete noise `η_n(t, ·) = 2n h^{-1} ξ(cell)` from one coarse row.
pub fn eta_increment(cells: &[f64], grid: &GridSpec) -> Result<GridFunction> {
    let scale = grid.points() as f64 / grid.h();
    GridFunction::new(*grid, cells.iter().map(|v| scale * v).collect())
}

/// Noise cells completed during one fine step, for each level that
/// finished a time step of its own.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSlab {
    /// Index of the fine step that completed these cells.
    pub fine_step: u64,
    /// `(n, cells)` for each completed level, coarsest first.
    pub level_increments: Vec<(usize, Vec<f64>)>,
}

/// Streams the fine noise row by row and accumulates every coarser level
/// of a factor-two chain on the fly.
#[derive(Debug, Clone)]
pub struct NoiseCascade {
    noise: WhiteNoise,
    // finest first, each entry half the previous one
    chain: Vec<GridSpec>,
    rows: Vec<Vec<f64>>,
    filled: Vec<u32>,
    fresh: Vec<bool>,
    next_step: u64,
}

impl NoiseCascade {
    /// Cascade from `finest` down to `coarsest`; both must share `c` and
    /// differ by a power of two.
    pub fn new(noise: WhiteNoise, coarsest: &GridSpec, finest: &GridSpec) -> Result<Self> {
        let m = coarsest.refinement_to(finest)?;
        let mut chain = vec![*finest];
        for _ in 0..m {
            let next = chain
                .last()
                .and_then(GridSpec::coarser)
                .ok_or_else(|| Error::Coupling("cannot halve level".into()))?;
            chain.push(next);
        }
        let rows = chain.iter().map(|g| vec![0.0; g.points()]).collect();
        Ok(Self {
            noise,
            rows,
            filled: vec![0; chain.len()],
            fresh: vec![false; chain.len()],
            chain,
            next_step: 0,
        })
    }

    /// Levels in the chain, finest first.
    pub fn chain(&self) -> &[GridSpec] {
        &self.chain
    }

    /// Fine steps generated so far.
    pub fn fine_steps(&self) -> u64 {
        self.next_step
    }

    /// Generates the next fine row and pushes it down the chain.
    pub fn advance(&mut self) -> Result<()> {
        let finest = self.chain[0];
        self.noise.fill_row(&finest, self.next_step, &mut self.rows[0])?;
        self.fresh[0] = true;
        for i in 1..self.chain.len() {
            if !self.fresh[i - 1] {
                self.fresh[i] = false;
                continue;
            }
            let (finer, coarser) = self.rows.split_at_mut(i);
            let acc = &mut coarser[0];
            if self.filled[i] == 4 {
                acc.iter_mut().for_each(|v| *v = 0.0);
                self.filled[i] = 0;
            }
            add_halved(acc, &finer[i - 1]);
            self.filled[i] += 1;
            self.fresh[i] = self.filled[i] == 4;
        }
        self.next_step += 1;
        Ok(())
    }

    /// Cells of the level with `n` points if it completed a step during the
    /// last `advance`.
    pub fn completed(&self, n: usize) -> Option<&[f64]> {
        let i = self.index_of(n)?;
        self.fresh[i].then(|| self.rows[i].as_slice())
    }

    fn index_of(&self, n: usize) -> Option<usize> {
        self.chain.iter().position(|g| g.n() == n)
    }

    /// Owned snapshot of everything completed during the last `advance`.
    pub fn slab(&self) -> NoiseSlab {
        let level_increments = self
            .chain
            .iter()
            .zip(&self.rows)
            .zip(&self.fresh)
            .rev()
            .filter(|(_, &fresh)| fresh)
            .map(|((g, row), _)| (g.n(), row.clone()))
            .collect();
        NoiseSlab {
            fine_step: self.next_step.saturating_sub(1),
            level_increments,
        }
    }
}
