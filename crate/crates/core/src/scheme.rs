//! The explicit finite-difference scheme
//! `u_{t+h} = u_t + hΔ_n u_t + hF(u_t) + hη_n(t)`, coupled multi-level runs
//! and the a-priori monitor of the stochastic convolution.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::besov::{lp_norm, Exponent};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::noise::{NoiseCascade, WhiteNoise};
use crate::spectral::TrigPolynomial;

/// Polynomial nonlinearity `F(v) = Σ c_i v^i` of odd degree `ν ≥ 3` with
/// `c_ν < 0`, or the zero polynomial for linear runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("polynomial coefficients must be finite".into()));
        }
        if coeffs.is_empty() {
            return Ok(Self::zero());
        }
        let nu = coeffs.len() - 1;
        let mut problems = Vec::new();
        if nu < 3 || nu.is_multiple_of(2) {
            problems.push(format!("degree {nu} is not an odd integer >= 3"));
        }
        if coeffs[nu] >= 0.0 {
            problems.push(format!("leading coefficient {} is not negative", coeffs[nu]));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        Ok(Self { coeffs })
    }

    /// `F ≡ 0`.
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// `F(v) = v - v³`.
    pub fn allen_cahn() -> Self {
        Self {
            coeffs: vec![0.0, 1.0, 0.0, -1.0],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `ν`, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * v + c)
    }
}

/// Initial data sampled pointwise on every grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    Constant { value: f64 },
    /// `amplitude · sin(2π mode x)`
    Sine { mode: i64, amplitude: f64 },
    /// `amplitude · cos(2π mode x)`
    Cosine { mode: i64, amplitude: f64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Sine {
            mode: 1,
            amplitude: 1.0,
        }
    }
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Constant { value } => value,
            InitialCondition::Sine { mode, amplitude } => amplitude * (2.0 * PI * mode as f64 * x).sin(),
            InitialCondition::Cosine { mode, amplitude } => amplitude * (2.0 * PI * mode as f64 * x).cos(),
        }
    }

    pub fn sample(&self, grid: GridSpec) -> GridFunction {
        GridFunction::from_fn(grid, |x| self.eval(x))
    }

    /// Exact Fourier expansion.
    pub fn to_trig(&self) -> TrigPolynomial {
        use num_complex::Complex64 as C;
        match *self {
            InitialCondition::Zero => TrigPolynomial::new(0, Vec::new()),
            InitialCondition::Constant { value } => TrigPolynomial::mode(0, C::new(value, 0.0)),
            InitialCondition::Sine { mode, amplitude } | InitialCondition::Cosine { mode, amplitude } => {
                let m = mode.abs();
                if m == 0 {
                    let v = if matches!(self, InitialCondition::Sine { .. }) { 0.0 } else { amplitude };
                    return TrigPolynomial::mode(0, C::new(v, 0.0));
                }
                let mut coeffs = vec![C::new(0.0, 0.0); (2 * m + 1) as usize];
                let (lo, hi) = if matches!(self, InitialCondition::Sine { .. }) {
                    let s = amplitude * mode.signum() as f64;
                    // sin = (e_m - e_{-m}) / 2i
                    (C::new(0.0, s / 2.0), C::new(0.0, -s / 2.0))
                } else {
                    (C::new(amplitude / 2.0, 0.0), C::new(amplitude / 2.0, 0.0))
                };
                coeffs[0] = lo;
                coeffs[(2 * m) as usize] = hi;
                TrigPolynomial::new(-m, coeffs)
            }
        }
    }
}

/// Current iterate `uⁿ_t` with `t = step · h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub u: GridFunction,
    pub step: u64,
}

impl SchemeState {
    pub fn new(u: GridFunction) -> Self {
        Self { u, step: 0 }
    }

    pub fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    pub fn time(&self) -> f64 {
        self.u.grid().time_of(self.step)
    }
}

/// One explicit step into `out` with forcing `hη = noise_scale · noise`.
/// Returns the first non-finite site, if any.
fn step_kernel(
    u: &[f64],
    out: &mut [f64],
    h: f64,
    f: &Polynomial,
    noise: &[f64],
    noise_scale: f64,
) -> Option<usize> {
    match *f.coeffs() {
        [] => stencil(u, out, h, noise, noise_scale, |_| 0.0),
        [c0, c1, c2, c3] => stencil(u, out, h, noise, noise_scale, move |v| {
            c0 + v * (c1 + v * (c2 + v * c3))
        }),
        _ => stencil(u, out, h, noise, noise_scale, |v| f.eval(v)),
    }
    if out.iter().all(|v| v.is_finite()) {
        None
    } else {
        out.iter().position(|v| !v.is_finite())
    }
}

#[inline(always)]
fn stencil(u: &[f64], out: &mut [f64], h: f64, noise: &[f64], noise_scale: f64, react: impl Fn(f64) -> f64) {
    let len = u.len();
    let scale = (len * len) as f64;
    let update = |l: f64, c: f64, r: f64, w: f64| c + h * (scale * (r - 2.0 * c + l)) + h * react(c) + noise_scale * w;
    if len == 2 {
        out[0] = update(u[1], u[0], u[1], noise[0]);
        out[1] = update(u[0], u[1], u[0], noise[1]);
        return;
    }
    out[0] = update(u[len - 1], u[0], u[1], noise[0]);
    out[len - 1] = update(u[len - 2], u[len - 1], u[0], noise[len - 1]);
    let inner = out[1..len - 1]
        .iter_mut()
        .zip(&u[..len - 2])
        .zip(&u[1..len - 1])
        .zip(u[2..].iter().zip(&noise[1..len - 1]));
    for (((o, &l), &c), (&r, &w)) in inner {
        *o = update(l, c, r, w);
    }
}

/// `uⁿ_{t+h} = uⁿ_t + hΔ_n uⁿ_t + hF(uⁿ_t) + hη_n(t)`.
pub fn euler_step(state: &SchemeState, eta: &GridFunction, f: &Polynomial) -> Result<SchemeState> {
    state.u.check_same_grid(eta)?;
    let grid = *state.grid();
    let h = grid.h();
    let mut out = vec![0.0; grid.points()];
    if let Some(i) = step_kernel(state.u.values(), &mut out, h, f, eta.values(), h) {
        return Err(Error::BlowUp {
            t: grid.time_of(state.step + 1),
            x: grid.x(i),
            value: out[i],
        });
    }
    Ok(SchemeState {
        u: GridFunction::new(grid, out)?,
        step: state.step + 1,
    })
}

/// Running a-priori quantities of one path: `Rⁿ = 1 + max ‖Oⁿ_t‖_∞` and
/// `Aⁿ = max ‖uⁿ_t - Oⁿ_t‖_{L^μ}` over the steps seen so far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriMonitor {
    pub n: usize,
    pub mu: u32,
    pub nu: u32,
    pub r_n: f64,
    pub a_n: f64,
}

impl AprioriMonitor {
    pub fn new(n: usize, mu: u32, nu: u32) -> Result<Self> {
        validate_mu(mu, nu)?;
        Ok(Self {
            n,
            mu,
            nu,
            r_n: 1.0,
            a_n: 0.0,
        })
    }

    /// Folds in one time level given `Oⁿ_t` and `uⁿ_t`.
    pub fn observe(&mut self, o: &[f64], u: &[f64]) {
        let sup = o.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.r_n = self.r_n.max(1.0 + sup);
        let mu = self.mu as i32;
        let m = u.iter().zip(o).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if m > 0.0 {
            let mean = u.iter().zip(o).map(|(a, b)| ((a - b) / m).powi(mu)).sum::<f64>() / u.len() as f64;
            self.a_n = self.a_n.max(m * mean.powf(1.0 / self.mu as f64));
        }
    }

    /// `(Rⁿ)^{ν(ν+μ)} ≤ n^{2 - 2(ν-1)/μ}`, compared in logarithms.
    pub fn omega_n_holds(&self) -> bool {
        let (nu, mu) = (self.nu as f64, self.mu as f64);
        nu * (nu + mu) * self.r_n.ln() <= (2.0 - 2.0 * (nu - 1.0) / mu) * (self.n as f64).ln()
    }

    /// `Aⁿ / (Rⁿ)^{(ν+μ-1)/μ}`.
    pub fn ratio(&self) -> f64 {
        let (nu, mu) = (self.nu as f64, self.mu as f64);
        self.a_n / self.r_n.powf((nu + mu - 1.0) / mu)
    }
}

fn validate_mu(mu: u32, nu: u32) -> Result<()> {
    if !mu.is_multiple_of(2) || mu <= nu {
        return Err(Error::Config(format!("mu = {mu} must be even and larger than nu = {nu}")));
    }
    Ok(())
}

/// The a-priori quantities of a finished path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub r_n: f64,
    pub a_n: f64,
    pub omega_n_holds: bool,
    pub ratio: f64,
}

pub fn apriori_report(record: &PathRecord) -> Result<AprioriReport> {
    let m = record
        .monitor
        .ok_or_else(|| Error::Config("path was solved without the a-priori monitor".into()))?;
    validate_mu(m.mu, m.nu)?;
    Ok(AprioriReport {
        r_n: m.r_n,
        a_n: m.a_n,
        omega_n_holds: m.omega_n_holds(),
        ratio: m.ratio(),
    })
}

/// Equation data shared by every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub f: Polynomial,
    pub psi: InitialCondition,
}

impl Problem {
    pub fn allen_cahn() -> Self {
        Self {
            f: Polynomial::allen_cahn(),
            psi: InitialCondition::default(),
        }
    }

    /// `F ≡ 0`, `ψ ≡ 0`: the stochastic convolution itself.
    pub fn linear() -> Self {
        Self {
            f: Polynomial::zero(),
            psi: InitialCondition::Zero,
        }
    }
}

/// Knobs of a solve that are not part of the equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Snapshot times; the last one is the horizon.
    pub checkpoints: Vec<f64>,
    /// Integrability exponent of the monitor and of the truncation rule.
    pub mu: u32,
    /// Track `Rⁿ`, `Aⁿ` on levels with `n ≤ monitor_max_n`.
    pub monitor: bool,
    pub monitor_max_n: usize,
    /// Freeze a level once `‖uⁿ_t‖_{L^μ} ≥ factor · n`.
    pub truncation: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            checkpoints: default_checkpoints(),
            mu: 6,
            monitor: true,
            monitor_max_n: usize::MAX,
            truncation: None,
        }
    }
}

/// `{i/16 : i = 1..16}`.
pub fn default_checkpoints() -> Vec<f64> {
    (1..=16).map(|i| i as f64 / 16.0).collect()
}

/// Snapshots and monitor output of one path at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub grid: GridSpec,
    pub seed: u64,
    pub checkpoints: Vec<(f64, GridFunction)>,
    pub monitor: Option<AprioriMonitor>,
    /// Stopping time of a truncated run, if the threshold was crossed.
    pub tau: Option<f64>,
}

impl PathRecord {
    pub fn snapshot(&self, t: f64) -> Result<&GridFunction> {
        self.checkpoints
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|(_, f)| f)
            .ok_or(Error::MissingCheckpoint(t))
    }

    pub fn times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|(t, _)| *t).collect()
    }
}

struct LevelRun<'a> {
    grid: GridSpec,
    f: &'a Polynomial,
    u: Vec<f64>,
    next: Vec<f64>,
    linear: Option<(Vec<f64>, Vec<f64>)>,
    monitor: Option<AprioriMonitor>,
    schedule: Vec<(u64, f64)>,
    snapshots: Vec<(f64, GridFunction)>,
    step: u64,
    truncation: Option<(u32, f64)>,
    tau: Option<f64>,
}

impl<'a> LevelRun<'a> {
    fn new(grid: GridSpec, problem: &'a Problem, opts: &SolveOptions, nu: u32) -> Result<Self> {
        let mut schedule = Vec::with_capacity(opts.checkpoints.len());
        for &t in &opts.checkpoints {
            schedule.push((grid.step_of(t)?, t));
        }
        let u = problem.psi.sample(grid).into_values();
        let monitored = opts.monitor && grid.n() <= opts.monitor_max_n;
        let (linear, monitor) = if monitored {
            let o = vec![0.0; grid.points()];
            let mut m = AprioriMonitor::new(grid.n(), opts.mu, nu)?;
            m.observe(&o, &u);
            (Some((o, vec![0.0; grid.points()])), Some(m))
        } else {
            (None, None)
        };
        let mut run = Self {
            grid,
            f: &problem.f,
            next: vec![0.0; u.len()],
            u,
            linear,
            monitor,
            schedule,
            snapshots: Vec::new(),
            step: 0,
            truncation: opts.truncation.map(|factor| (opts.mu, factor * grid.n() as f64)),
            tau: None,
        };
        run.check_truncation();
        run.take_snapshots();
        Ok(run)
    }

    fn check_truncation(&mut self) {
        if let (Some((mu, level)), None) = (self.truncation, self.tau) {
            let norm = lp_norm(
                &GridFunction::new(self.grid, self.u.clone()).expect("level length"),
                Exponent::Finite(mu as f64),
            );
            if norm >= level {
                self.tau = Some(self.grid.time_of(self.step));
            }
        }
    }

    fn take_snapshots(&mut self) {
        while let Some(&(k, t)) = self.schedule.first() {
            if k != self.step {
                break;
            }
            self.snapshots
                .push((t, GridFunction::new(self.grid, self.u.clone()).expect("level length")));
            self.schedule.remove(0);
        }
    }

    fn advance(&mut self, cells: &[f64]) -> Result<()> {
        let h = self.grid.h();
        let scale = self.grid.points() as f64;
        if self.tau.is_none() {
            if let Some(i) = step_kernel(&self.u, &mut self.next, h, self.f, cells, scale) {
                return Err(Error::BlowUp {
                    t: self.grid.time_of(self.step + 1),
                    x: self.grid.x(i),
                    value: self.next[i],
                });
            }
            std::mem::swap(&mut self.u, &mut self.next);
        }
        if let Some((o, o_next)) = &mut self.linear {
            step_kernel(o, o_next, h, &Polynomial::zero(), cells, scale);
            std::mem::swap(o, o_next);
        }
        self.step += 1;
        if let (Some(m), Some((o, _))) = (&mut self.monitor, &self.linear) {
            m.observe(o, &self.u);
        }
        self.check_truncation();
        self.take_snapshots();
        Ok(())
    }

    fn finish(self, seed: u64) -> PathRecord {
        PathRecord {
            grid: self.grid,
            seed,
            checkpoints: self.snapshots,
            monitor: self.monitor,
            tau: self.tau,
        }
    }
}

fn horizon_of(opts: &SolveOptions) -> Result<f64> {
    let horizon = opts.checkpoints.iter().cloned().fold(0.0, f64::max);
    if horizon > 1.0 + 1e-12 {
        return Err(Error::OutOfRange {
            what: "horizon",
            value: horizon,
            range: "[0, 1]",
        });
    }
    Ok(horizon)
}

/// Runs every level in one sweep over the finest time grid, all driven by
/// the same noise realization. Levels must be ascending powers-of-two
/// multiples of each other with a common `c`.
pub fn coupled_solve(
    levels: &[GridSpec],
    problem: &Problem,
    seed: u64,
    opts: &SolveOptions,
) -> Result<Vec<PathRecord>> {
    let finest = *levels
        .last()
        .ok_or_else(|| Error::Config("no levels given".into()))?;
    for pair in levels.windows(2) {
        if pair[0].n() >= pair[1].n() {
            return Err(Error::Coupling(format!(
                "levels must be strictly ascending, got {} then {}",
                pair[0].n(),
                pair[1].n()
            )));
        }
        pair[0].refinement_to(&pair[1])?;
    }
    drive(levels, &finest, problem, seed, opts)
}

fn drive(
    levels: &[GridSpec],
    noise_grid: &GridSpec,
    problem: &Problem,
    seed: u64,
    opts: &SolveOptions,
) -> Result<Vec<PathRecord>> {
    let horizon = horizon_of(opts)?;
    let nu = problem.f.degree().unwrap_or(3) as u32;
    let mut cascade = NoiseCascade::new(WhiteNoise::new(seed), &levels[0], noise_grid)?;
    let mut runs = levels
        .iter()
        .map(|g| LevelRun::new(*g, problem, opts, nu))
        .collect::<Result<Vec<_>>>()?;
    let total = noise_grid.step_of(horizon)?;
    for _ in 0..total {
        cascade.advance()?;
        for run in runs.iter_mut() {
            if let Some(cells) = cascade.completed(run.grid.n()) {
                run.advance(cells)?;
            }
        }
    }
    Ok(runs.into_iter().map(|r| r.finish(seed)).collect())
}

/// A single level driven by the noise realization `seed` as seen on
/// `noise_grid` (a refinement of `grid`, or `grid` itself). The path is the
/// same one `coupled_solve` produces for this level.
pub fn solve_path(
    grid: &GridSpec,
    problem: &Problem,
    seed: u64,
    noise_grid: &GridSpec,
    opts: &SolveOptions,
) -> Result<PathRecord> {
    grid.refinement_to(noise_grid)?;
    let mut records = drive(std::slice::from_ref(grid), noise_grid, problem, seed, opts)?;
    Ok(records.remove(0))
}

/// `solve_path` stopped at `τ_n`, the first step with
/// `‖uⁿ_t‖_{L^μ} ≥ threshold_factor · n`; the state is frozen afterwards.
pub fn truncated_solve(
    grid: &GridSpec,
    problem: &Problem,
    seed: u64,
    noise_grid: &GridSpec,
    threshold_factor: f64,
    opts: &SolveOptions,
) -> Result<PathRecord> {
    if !(threshold_factor > 0.0) {
        return Err(Error::OutOfRange {
            what: "threshold_factor",
            value: threshold_factor,
            range: "(0, ∞)",
        });
    }
    let opts = SolveOptions {
        truncation: Some(threshold_factor),
        ..opts.clone()
    };
    solve_path(grid, problem, seed, noise_grid, &opts)
}

/// Writes `x,value` rows for one snapshot.
pub fn write_csv(snapshot: &GridFunction, mut out: impl Write) -> Result<()> {
    writeln!(out, "x,value")?;
    for (i, v) in snapshot.values().iter().enumerate() {
        writeln!(out, "{},{}", snapshot.grid().x(i), v)?;
    }
    Ok(())
}

pub const BSRT_MAGIC: &[u8; 4] = b"BSRT";
pub const BSRT_VERSION: u32 = 1;

/// Binary dump: magic, version, n, checkpoint count (u32 each, little
/// endian), then per checkpoint the time and `2n` values as f64.
pub fn write_bsrt(record: &PathRecord, mut out: impl Write) -> Result<()> {
    let n = u32::try_from(record.grid.n()).map_err(|_| Error::Format("n does not fit in u32".into()))?;
    out.write_all(BSRT_MAGIC)?;
    out.write_all(&BSRT_VERSION.to_le_bytes())?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&(record.checkpoints.len() as u32).to_le_bytes())?;
    for (t, f) in &record.checkpoints {
        out.write_all(&t.to_le_bytes())?;
        for v in f.values() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Contents of a binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDump {
    pub n: usize,
    pub checkpoints: Vec<(f64, Vec<f64>)>,
}

pub fn read_bsrt(mut input: impl Read) -> Result<PathDump> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    if &word != BSRT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut next_u32 = |input: &mut dyn Read| -> Result<u32> {
        input.read_exact(&mut word)?;
        Ok(u32::from_le_bytes(word))
    };
    let version = next_u32(&mut input)?;
    if version != BSRT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = next_u32(&mut input)? as usize;
    let count = next_u32(&mut input)? as usize;
    let mut buf = [0u8; 8];
    let mut next_f64 = |input: &mut dyn Read| -> Result<f64> {
        input.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut checkpoints = Vec::with_capacity(count);
    for _ in 0..count {
        let t = next_f64(&mut input)?;
        let values = (0..2 * n).map(|_| next_f64(&mut input)).collect::<Result<Vec<_>>>()?;
        checkpoints.push((t, values));
    }
    Ok(PathDump { n, checkpoints })
}
