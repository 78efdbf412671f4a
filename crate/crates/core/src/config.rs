//! Line-oriented `key = value` run configuration.
//!
//! ```text
//! # worked-example channel, two-law scheme
//! scheme  = A2
//! eta     = 2
//! q       = 0.5
//! p       = 0.2 0.2 0.2 0.2 0.2
//! epsilon = 0.5
//! ```
//!
//! `#` starts a comment. Vector values are whitespace- or comma-separated.
//! Overrides use the same `key=value` syntax and replace file values.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `scheme` | `A2` | `B1`, `B2`, `A1` or `A2` |
//! | `eta` | `2` | processing units per fine-law evaluation |
//! | `lambda` | `4` | buffer slots |
//! | `n_max` | `len(p) - 1` | largest availability; alone it implies uniform `p` |
//! | `d` | `1` | trigger threshold on `abs(x)` |
//! | `q` | `0.5` | delivery probability of a triggered transmission |
//! | `p` | `0.2 0.2 0.2 0.2 0.2` | availability pmf `p_0 .. p_n_max` |
//! | `alpha` | `1.35` | open-loop growth bound |
//! | `rho1` | `0.9` | coarse-law contraction |
//! | `rho2` | none | fine-law contraction (exclusive with `epsilon`) |
//! | `epsilon` | `0.5` | `rho2 / rho1` when `rho2` is absent |
//! | `sigma_open` | `alpha` | growth bound inside the threshold |
//! | `nu` | `ones` | certificate right-hand side, `ones` or a vector |
//! | `horizon` | `200` | simulated steps |
//! | `runs` | `10000` | Monte Carlo realisations |
//! | `seed` | `0` | base seed; run `r` uses `seed ^ r` |
//! | `noise_std` | `1` | disturbance standard deviation |
//! | `x0` | `20` | initial state |
//! | `rho1_grid` | `0.05 .. 0.95` step `0.05` | sweep grid |
//! | `output` | stdout | output file (stdout when absent) |

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::markov::{check_probability, validate_probability_vector, ChannelModel};
use crate::schemes::{ControlLaw, Controller, Scheme};
use crate::simulate::{ExampleSystem, PlantModel, SchemeConfig};
use crate::stability::{ContractionSpec, CriticalAlphaConfig};
use crate::sweep::{default_grid, SweepSpec};

pub const KEYS: &[&str] = &[
    "scheme", "eta", "lambda", "n_max", "d", "q", "p", "alpha", "rho1", "rho2", "epsilon",
    "sigma_open", "nu", "horizon", "runs", "seed", "noise_std", "x0", "rho1_grid", "output",
];

/// Fine-law contraction, given directly or as a ratio of `rho1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FineContraction {
    Rho2(f64),
    Epsilon(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub eta: usize,
    pub lambda: usize,
    pub d: f64,
    pub q: f64,
    pub p: Vec<f64>,
    pub alpha: f64,
    pub rho1: f64,
    pub fine: FineContraction,
    pub sigma_open: Option<f64>,
    pub nu: Option<Vec<f64>>,
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub noise_std: f64,
    pub x0: f64,
    pub rho1_grid: Vec<f64>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::A2,
            eta: 2,
            lambda: 4,
            d: 1.0,
            q: 0.5,
            p: vec![0.2; 5],
            alpha: 1.35,
            rho1: 0.9,
            fine: FineContraction::Epsilon(0.5),
            sigma_open: None,
            nu: None,
            horizon: 200,
            runs: 10_000,
            seed: 0,
            noise_std: 1.0,
            x0: 20.0,
            rho1_grid: default_grid(),
            output: None,
        }
    }
}

#[derive(Debug, Clone)]
enum Location {
    Line(usize),
    Override(String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Override(s) => write!(f, "override `{s}`"),
        }
    }
}

fn config_error(at: &Location, reason: impl Into<String>) -> Error {
    Error::Config { location: at.to_string(), reason: reason.into() }
}

fn split_entry<'a>(text: &'a str, at: &Location) -> Result<(&'a str, &'a str)> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| config_error(at, format!("expected `key = value`, found `{text}`")))?;
    let key = key.trim();
    if !KEYS.contains(&key) {
        return Err(config_error(at, format!("unknown key `{key}`")));
    }
    Ok((key, value.trim()))
}

fn scalar<T: FromStr>(key: &str, value: &str, at: &Location) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_error(at, format!("`{key}`: cannot parse `{value}`")))
}

fn finite(key: &str, value: &str, at: &Location) -> Result<f64> {
    let v: f64 = scalar(key, value, at)?;
    if !v.is_finite() {
        return Err(config_error(at, format!("`{key}` must be finite, got `{value}`")));
    }
    Ok(v)
}

fn vector(key: &str, value: &str, at: &Location) -> Result<Vec<f64>> {
    let v: Vec<f64> = value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| finite(key, s, at))
        .collect::<Result<_>>()?;
    if v.is_empty() {
        return Err(config_error(at, format!("`{key}` needs at least one number")));
    }
    Ok(v)
}

/// Parses `text` and applies `overrides` (each `key=value`) on top.
pub fn parse_config<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<RunConfig> {
    let mut entries: BTreeMap<&str, (String, Location)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = Location::Line(idx + 1);
        let (key, value) = split_entry(line, &at)?;
        if let Some((_, prev)) = entries.get(key) {
            return Err(config_error(&at, format!("duplicate key `{key}` (first set at {prev})")));
        }
        entries.insert(key, (value.to_string(), at));
    }
    for o in overrides {
        let o = o.as_ref().trim();
        let at = Location::Override(o.to_string());
        let (key, value) = split_entry(o, &at)?;
        entries.insert(key, (value.to_string(), at));
    }
    build(&entries)
}

fn build(entries: &BTreeMap<&str, (String, Location)>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let get = |k: &str| entries.get(k).map(|(v, at)| (v.as_str(), at));

    if let Some((v, at)) = get("scheme") {
        cfg.scheme = v.parse().map_err(|e: Error| config_error(at, e.to_string()))?;
    }
    if let Some((v, at)) = get("eta") {
        cfg.eta = scalar("eta", v, at)?;
        if cfg.eta == 0 {
            return Err(config_error(at, "`eta` must be at least 1"));
        }
    }
    if let Some((v, at)) = get("lambda") {
        cfg.lambda = scalar("lambda", v, at)?;
        if cfg.lambda == 0 {
            return Err(config_error(at, "`lambda` must be at least 1"));
        }
    }
    if let Some((v, at)) = get("d") {
        cfg.d = finite("d", v, at)?;
        if cfg.d < 0.0 {
            return Err(config_error(at, "`d` must be nonnegative"));
        }
    }
    if let Some((v, at)) = get("q") {
        cfg.q = finite("q", v, at)?;
        check_probability("q", cfg.q)
            .map_err(|_| config_error(at, format!("`q` = {} is outside the valid range [0, 1]", cfg.q)))?;
    }
    match (get("p"), get("n_max")) {
        (Some((v, at)), n_max) => {
            cfg.p = vector("p", v, at)?;
            validate_probability_vector(&cfg.p).map_err(|e| config_error(at, format!("`p`: {e}")))?;
            if cfg.p.len() < 2 {
                return Err(config_error(at, "`p` needs at least two entries (n_max >= 1)"));
            }
            if let Some((nv, nat)) = n_max {
                let n: usize = scalar("n_max", nv, nat)?;
                if n + 1 != cfg.p.len() {
                    return Err(config_error(
                        nat,
                        format!("`n_max` = {n} but `p` has {} entries", cfg.p.len()),
                    ));
                }
            }
        }
        (None, Some((nv, nat))) => {
            let n: usize = scalar("n_max", nv, nat)?;
            if n == 0 {
                return Err(config_error(nat, "`n_max` must be at least 1"));
            }
            cfg.p = vec![1.0 / (n as f64 + 1.0); n + 1];
        }
        (None, None) => {}
    }
    for (key, slot) in [("alpha", &mut cfg.alpha), ("rho1", &mut cfg.rho1), ("x0", &mut cfg.x0)] {
        if let Some((v, at)) = get(key) {
            *slot = finite(key, v, at)?;
        }
    }
    for key in ["alpha", "rho1"] {
        if let Some((_, at)) = get(key) {
            let v = if key == "alpha" { cfg.alpha } else { cfg.rho1 };
            if v < 0.0 {
                return Err(config_error(at, format!("`{key}` must be nonnegative")));
            }
        }
    }
    match (get("rho2"), get("epsilon")) {
        (Some(_), Some((_, at))) => {
            return Err(config_error(at, "give exactly one of `rho2` and `epsilon`"));
        }
        (Some((v, at)), None) => {
            let r = finite("rho2", v, at)?;
            if r < 0.0 {
                return Err(config_error(at, "`rho2` must be nonnegative"));
            }
            cfg.fine = FineContraction::Rho2(r);
        }
        (None, Some((v, at))) => {
            let e = finite("epsilon", v, at)?;
            if !(0.0..=1.0).contains(&e) {
                return Err(config_error(at, format!("`epsilon` = {e} is outside [0, 1]")));
            }
            cfg.fine = FineContraction::Epsilon(e);
        }
        (None, None) => {}
    }
    if let Some((v, at)) = get("sigma_open") {
        let s = finite("sigma_open", v, at)?;
        if s < 0.0 {
            return Err(config_error(at, "`sigma_open` must be nonnegative"));
        }
        cfg.sigma_open = Some(s);
    }
    if let Some((v, at)) = get("nu") {
        if v.eq_ignore_ascii_case("ones") {
            cfg.nu = None;
        } else {
            let nu = vector("nu", v, at)?;
            if nu.iter().any(|&x| x <= 0.0) {
                return Err(config_error(at, "`nu` entries must be strictly positive"));
            }
            if nu.len() != cfg.p.len() {
                return Err(config_error(
                    at,
                    format!("`nu` has {} entries, the chain has {}", nu.len(), cfg.p.len()),
                ));
            }
            cfg.nu = Some(nu);
        }
    }
    if let Some((v, at)) = get("horizon") {
        cfg.horizon = scalar("horizon", v, at)?;
        if cfg.horizon == 0 {
            return Err(config_error(at, "`horizon` must be at least 1"));
        }
    }
    if let Some((v, at)) = get("runs") {
        cfg.runs = scalar("runs", v, at)?;
        if cfg.runs == 0 {
            return Err(config_error(at, "`runs` must be at least 1"));
        }
    }
    if let Some((v, at)) = get("seed") {
        cfg.seed = scalar("seed", v, at)?;
    }
    if let Some((v, at)) = get("noise_std") {
        cfg.noise_std = finite("noise_std", v, at)?;
        if cfg.noise_std < 0.0 {
            return Err(config_error(at, "`noise_std` must be nonnegative"));
        }
    }
    if let Some((v, at)) = get("rho1_grid") {
        cfg.rho1_grid = vector("rho1_grid", v, at)?;
    }
    if let Some((v, _)) = get("output") {
        cfg.output = Some(PathBuf::from(v));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }

    pub fn rho2(&self) -> f64 {
        match self.fine {
            FineContraction::Rho2(r) => r,
            FineContraction::Epsilon(e) => e * self.rho1,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self.fine {
            FineContraction::Epsilon(e) => e,
            FineContraction::Rho2(r) if self.rho1 > 0.0 => r / self.rho1,
            FineContraction::Rho2(_) => 0.0,
        }
    }

    /// Fine-law cost in effect: 1 for single-law schemes.
    pub fn effective_eta(&self) -> usize {
        if self.scheme.uses_fine_law() {
            self.eta
        } else {
            1
        }
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        ChannelModel::new(self.q, self.p.clone())
    }

    pub fn contraction_spec(&self) -> Result<ContractionSpec> {
        let rho2 = if self.scheme.uses_fine_law() { self.rho2() } else { self.rho1 };
        let spec = ContractionSpec::new(self.alpha, self.rho1, rho2, self.effective_eta())?
            .with_d_bound(self.d)?;
        match self.sigma_open {
            Some(s) => spec.with_sigma_open(s),
            None => Ok(spec),
        }
    }

    pub fn critical_alpha_config(&self) -> Result<CriticalAlphaConfig> {
        Ok(CriticalAlphaConfig {
            scheme: self.scheme,
            eta: self.effective_eta(),
            rho1: self.rho1,
            rho2: if self.scheme.uses_fine_law() { self.rho2() } else { self.rho1 },
            l: self.channel()?.l().to_vec(),
        })
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        SweepSpec::new(self.scheme, self.eta, self.epsilon(), self.rho1_grid.clone(), self.channel()?)
    }

    /// Benchmark plant with the configured `x0` and disturbance level.
    pub fn plant(&self, system: &ExampleSystem) -> Result<PlantModel> {
        Ok(system.plant.clone().with_noise_std(self.noise_std)?.with_x0(self.x0))
    }

    /// Closed loop on the benchmark laws: coarse law contracting by `rho1`,
    /// fine law by `rho2` at cost `eta`.
    pub fn scheme_config(&self, system: &ExampleSystem) -> Result<SchemeConfig> {
        let kappa1: ControlLaw<f64, f64> = system.law(self.rho1, 1)?;
        let kappa2 = if self.scheme.uses_fine_law() {
            Some(system.law(self.rho2(), self.eta)?)
        } else {
            None
        };
        let controller = Controller::new(self.scheme, kappa1, kappa2, self.lambda)?;
        SchemeConfig::new(controller, self.channel()?, self.d)
    }
}
