//! Experiment configuration: a TOML table, validated key by key so that one
//! run reports every problem at once.

use std::path::PathBuf;

use besov_core::besov::FilterBank;
use besov_core::scheme::{default_checkpoints, InitialCondition, Polynomial};
use besov_core::GridSpec;
use clap::ValueEnum;
use serde::Serialize;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Rates,
    LinearOracle,
    LowerBound,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Rates => "rates",
            Mode::LinearOracle => "linear-oracle",
            Mode::LowerBound => "lower-bound",
            Mode::Verify => "verify",
        }
    }
}

/// What to do with a seed on which `Ω_n` fails at some monitored level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaPolicy {
    /// Keep the seed, count the failure.
    Record,
    /// Drop the seed from the statistics and fits.
    Exclude,
}

/// Fully resolved configuration. Its JSON form is what gets hashed into the
/// provenance of every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub levels: Vec<usize>,
    pub reference_multiple: usize,
    pub c: f64,
    #[serde(rename = "F")]
    pub f: Polynomial,
    pub psi: InitialCondition,
    pub theta_list: Vec<f64>,
    pub seeds: u64,
    pub base_seed: u64,
    pub checkpoints: Vec<f64>,
    /// Not part of the hash: where results land does not change them.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub mu: u32,
    pub eps0: f64,
    /// Stop a path once `|u| > truncation · n`; off when absent.
    pub truncation: Option<f64>,
    /// Moment exponent of the Kolmogorov bound in `linear-oracle` mode.
    pub oracle_q: f64,
    pub omega_policy: OmegaPolicy,
}

impl ExperimentConfig {
    pub fn defaults(mode: Mode) -> Self {
        Self {
            mode,
            levels: vec![16, 32, 64],
            reference_multiple: 4,
            c: 0.125,
            f: Polynomial::allen_cahn(),
            psi: InitialCondition::default(),
            theta_list: vec![-0.4, 0.0],
            seeds: 20,
            base_seed: 1,
            checkpoints: default_checkpoints(),
            output_dir: PathBuf::from("out"),
            mu: 6,
            eps0: 0.05,
            truncation: None,
            oracle_q: 64.0,
            omega_policy: OmegaPolicy::Record,
        }
    }

    pub fn reference(&self) -> usize {
        self.levels.last().copied().unwrap_or(0) * self.reference_multiple
    }

    pub fn seed_range(&self) -> std::ops::Range<u64> {
        self.base_seed..self.base_seed + self.seeds
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seeds: Option<u64>,
    pub out: Option<PathBuf>,
}

const KEYS: [&str; 16] = [
    "mode",
    "levels",
    "reference_multiple",
    "c",
    "F",
    "psi",
    "theta_list",
    "seeds",
    "base_seed",
    "checkpoints",
    "output_dir",
    "mu",
    "eps0",
    "truncation",
    "oracle_q",
    "omega_policy",
];

struct Reader<'a> {
    table: &'a Table,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn float(v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn get_f64(&mut self, key: &str) -> Option<f64> {
        let v = self.table.get(key)?;
        let x = Self::float(v);
        if x.is_none() {
            self.errors.push(format!("{key}: expected a number, found {}", v.type_str()));
        }
        x
    }

    fn get_uint(&mut self, key: &str) -> Option<u64> {
        let v = self.table.get(key)?;
        match v.as_integer() {
            Some(i) if i >= 0 => Some(i as u64),
            _ => {
                self.errors.push(format!("{key}: expected a non-negative integer, found {v}"));
                None
            }
        }
    }

    fn get_f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.table.get(key)?;
        let list = v.as_array().and_then(|a| a.iter().map(Self::float).collect::<Option<Vec<_>>>());
        if list.is_none() {
            self.errors.push(format!("{key}: expected a list of numbers"));
        }
        list
    }

    fn get_uint_list(&mut self, key: &str) -> Option<Vec<usize>> {
        let v = self.table.get(key)?;
        let list = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as usize))
                .collect::<Option<Vec<_>>>()
        });
        if list.is_none() {
            self.errors.push(format!("{key}: expected a list of non-negative integers"));
        }
        list
    }
}

fn parse_polynomial(v: &Value, errors: &mut Vec<String>) -> Option<Polynomial> {
    match v {
        Value::String(s) if s == "zero" => Some(Polynomial::zero()),
        Value::String(s) if s == "allen-cahn" => Some(Polynomial::allen_cahn()),
        Value::Array(a) => {
            let Some(coeffs) = a.iter().map(Reader::float).collect::<Option<Vec<f64>>>() else {
                errors.push("F: coefficients must be numbers".into());
                return None;
            };
            match Polynomial::new(coeffs) {
                Ok(p) => Some(p),
                Err(e) => {
                    errors.push(format!("F: {e}"));
                    None
                }
            }
        }
        other => {
            errors.push(format!(
                "F: expected \"zero\", \"allen-cahn\" or a coefficient list [c0, c1, ...], found {other}"
            ));
            None
        }
    }
}

fn parse_psi(v: &Value, errors: &mut Vec<String>) -> Option<InitialCondition> {
    let named = |s: &str| match s {
        "sin" => Some(InitialCondition::Sine {
            mode: 1,
            amplitude: 1.0,
        }),
        "cos" => Some(InitialCondition::Cosine {
            mode: 1,
            amplitude: 1.0,
        }),
        "zero" => Some(InitialCondition::Zero),
        _ => None,
    };
    let parsed = match v {
        Value::String(s) => named(s),
        Value::Table(_) => v.clone().try_into::<InitialCondition>().ok(),
        _ => None,
    };
    if parsed.is_none() {
        errors.push(format!(
            "psi: expected \"sin\", \"cos\", \"zero\" or a table with kind = zero|constant|sine|cosine, found {v}"
        ));
    }
    if let Some(InitialCondition::Constant { value }
    | InitialCondition::Sine { amplitude: value, .. }
    | InitialCondition::Cosine { amplitude: value, .. }) = parsed
    {
        if !value.is_finite() {
            errors.push("psi: amplitude must be finite".into());
            return None;
        }
    }
    parsed
}

/// Parses `text` (TOML) on top of the defaults for `mode`. On failure returns
/// every violated constraint.
pub fn load(text: &str, mode: Mode, overrides: &Overrides) -> Result<ExperimentConfig, Vec<String>> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| vec![format!("TOML syntax: {}", e.message())])?;
    let mut cfg = ExperimentConfig::defaults(mode);
    let mut r = Reader {
        table: &table,
        errors: Vec::new(),
    };
    for key in table.keys() {
        if !KEYS.contains(&key.as_str()) {
            r.errors.push(format!("{key}: unknown key"));
        }
    }
    if let Some(v) = table.get("mode") {
        match v.as_str() {
            Some(m) if m == mode.name() => {}
            Some(m) => r.errors.push(format!("mode: file says {m:?} but the command line asks for {:?}", mode.name())),
            None => r.errors.push("mode: expected a string".into()),
        }
    }
    if let Some(v) = r.get_uint_list("levels") {
        cfg.levels = v;
    }
    if let Some(v) = r.get_uint("reference_multiple") {
        cfg.reference_multiple = v as usize;
    }
    if let Some(v) = r.get_f64("c") {
        cfg.c = v;
    }
    if let Some(v) = table.get("F") {
        if let Some(p) = parse_polynomial(v, &mut r.errors) {
            cfg.f = p;
        }
    }
    if let Some(v) = table.get("psi") {
        if let Some(p) = parse_psi(v, &mut r.errors) {
            cfg.psi = p;
        }
    }
    if let Some(v) = r.get_f64_list("theta_list") {
        cfg.theta_list = v;
    }
    if let Some(v) = r.get_uint("seeds") {
        cfg.seeds = v;
    }
    if let Some(v) = r.get_uint("base_seed") {
        cfg.base_seed = v;
    }
    if let Some(v) = r.get_f64_list("checkpoints") {
        cfg.checkpoints = v;
    }
    if let Some(v) = table.get("output_dir") {
        match v.as_str() {
            Some(s) => cfg.output_dir = PathBuf::from(s),
            None => r.errors.push("output_dir: expected a string".into()),
        }
    }
    if let Some(v) = r.get_uint("mu") {
        cfg.mu = v.min(u32::MAX as u64) as u32;
    }
    if let Some(v) = r.get_f64("eps0") {
        cfg.eps0 = v;
    }
    if let Some(v) = r.get_f64("truncation") {
        cfg.truncation = Some(v);
    }
    if let Some(v) = r.get_f64("oracle_q") {
        cfg.oracle_q = v;
    }
    if let Some(v) = table.get("omega_policy") {
        match v.as_str() {
            Some("record") => cfg.omega_policy = OmegaPolicy::Record,
            Some("exclude") => cfg.omega_policy = OmegaPolicy::Exclude,
            _ => r.errors.push(format!("omega_policy: expected \"record\" or \"exclude\", found {v}")),
        }
    }
    let mut errors = r.errors;
    if let Some(s) = overrides.seeds {
        cfg.seeds = s;
    }
    if let Some(o) = &overrides.out {
        cfg.output_dir = o.clone();
    }
    errors.extend(violations(&cfg));
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

/// Every invariant `cfg` breaks.
pub fn violations(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if cfg.levels.is_empty() {
        out.push("levels: must not be empty".into());
    }
    for &n in &cfg.levels {
        if n < 2 || !n.is_power_of_two() {
            out.push(format!("levels: {n} is not a power of two >= 2"));
        }
    }
    if cfg.levels.windows(2).any(|w| w[0] >= w[1]) {
        out.push(format!("levels: {:?} is not strictly ascending", cfg.levels));
    }
    if cfg.reference_multiple < 2 || !cfg.reference_multiple.is_power_of_two() {
        out.push(format!(
            "reference_multiple: {} is not a power of two >= 2",
            cfg.reference_multiple
        ));
    }
    if !(cfg.c > 0.0 && cfg.c <= 0.125) {
        out.push(format!("c: {} is outside (0, 1/8]", cfg.c));
    } else if let Some(&n) = cfg.levels.first() {
        if let Err(e) = GridSpec::new(n, cfg.c) {
            out.push(format!("c: {e}"));
        } else if cfg.reference() <= 1 << 17 {
            if let Err(e) = GridSpec::new(cfg.reference(), cfg.c) {
                out.push(format!("c: {e}"));
            }
        }
    }
    if cfg.reference() > 1 << 17 {
        out.push(format!("reference_multiple: reference level {} exceeds 2^17", cfg.reference()));
    }
    if cfg.theta_list.is_empty() {
        out.push("theta_list: must not be empty".into());
    }
    for &t in &cfg.theta_list {
        if !(t > -0.5 && t <= 0.0) {
            out.push(format!("theta_list: {t} is outside (-1/2, 0]"));
        }
    }
    if cfg.seeds == 0 {
        out.push("seeds: must be at least 1".into());
    }
    if cfg.base_seed.checked_add(cfg.seeds).is_none() {
        out.push("base_seed: seed range overflows".into());
    }
    if cfg.checkpoints.is_empty() {
        out.push("checkpoints: must not be empty".into());
    }
    if cfg.checkpoints.windows(2).any(|w| !(w[0] < w[1])) {
        out.push("checkpoints: must be strictly ascending".into());
    }
    let coarse = cfg.levels.first().and_then(|&n| GridSpec::new(n, cfg.c).ok());
    for &t in &cfg.checkpoints {
        if !(t > 0.0 && t.is_finite()) {
            out.push(format!("checkpoints: {t} is not a positive time"));
        } else if let Some(g) = &coarse {
            if g.step_of(t).is_err() {
                out.push(format!("checkpoints: {t} is not on the time grid of level {} (h = {})", g.n(), g.h()));
            }
        }
    }
    let nu = cfg.f.degree().unwrap_or(0) as u32;
    if !cfg.mu.is_multiple_of(2) || cfg.mu <= nu || cfg.mu == 0 {
        out.push(format!("mu: {} is not an even integer above the degree {nu} of F", cfg.mu));
    }
    if let Err(e) = FilterBank::new(2, cfg.eps0) {
        out.push(format!("eps0: {e}"));
    }
    if let Some(k) = cfg.truncation {
        if !(k > 0.0 && k.is_finite()) {
            out.push(format!("truncation: {k} is not a positive factor"));
        }
    }
    if !(cfg.oracle_q >= 1.0 && cfg.oracle_q.is_finite()) {
        out.push(format!("oracle_q: {} is outside [1, ∞)", cfg.oracle_q));
    }
    if cfg.output_dir.as_os_str().is_empty() {
        out.push("output_dir: must not be empty".into());
    }
    out
}
