//! Closed-loop Monte Carlo simulation of the event-triggered schemes.
//!
//! Each step: the trigger fires when `|x_k| > d`; if it fires, the channel
//! delivers with probability `q` and, on delivery, `N_k ~ p`; the scheme
//! maps `(buffer, x_k, gamma_k, N_k)` to `u_k`; the plant advances with an
//! i.i.d. normal disturbance.
//!
//! Randomness: every run owns a `ChaCha8Rng` seeded with `seed_from_u64`.
//! Monte Carlo run `r` uses seed `base_seed ^ r`. Per step the stream is
//! consumed in a fixed order: one uniform for the channel outcome (only when
//! triggered), one uniform for `N` (only on delivery), one standard normal
//! for the disturbance (only when `noise_std > 0`). Normals come from
//! `rand_distr::StandardNormal` (ziggurat on the same stream).

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markov::ChannelModel;
use crate::schemes::{Buffer, ControlLaw, Controller, Gamma, Scheme, StepEnv};

/// States beyond this magnitude mark a run as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

type StepFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;
type LyapunovFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Scalar plant `x_{k+1} = f(x_k, u_k) + w_k` with a Lyapunov function.
#[derive(Clone)]
pub struct PlantModel {
    step: Arc<StepFn>,
    lyapunov: Arc<LyapunovFn>,
    pub noise_std: f64,
    pub x0: f64,
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("noise_std", &self.noise_std)
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl PlantModel {
    /// `step(x, u, w)` gives the next state, `lyapunov(x) >= 0`.
    pub fn new<F, V>(step: F, lyapunov: V, noise_std: f64, x0: f64) -> Result<Self>
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        V: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::Parameter {
                name: "noise_std",
                reason: format!("{noise_std} is not a finite nonnegative number"),
            });
        }
        if !x0.is_finite() {
            return Err(Error::Parameter { name: "x0", reason: "must be finite".into() });
        }
        Ok(Self { step: Arc::new(step), lyapunov: Arc::new(lyapunov), noise_std, x0 })
    }

    pub fn step(&self, x: f64, u: f64, w: f64) -> f64 {
        (self.step)(x, u, w)
    }

    /// Disturbance-free map used for predictions.
    pub fn nominal(&self, x: f64, u: f64) -> f64 {
        (self.step)(x, u, 0.0)
    }

    pub fn lyapunov(&self, x: f64) -> f64 {
        (self.lyapunov)(x)
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Result<Self> {
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::Parameter {
                name: "noise_std",
                reason: format!("{noise_std} is not a finite nonnegative number"),
            });
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }
}

/// The scalar benchmark plant `x+ = -1.34 x + 0.01 sin x + u + w` with
/// `V(x) = |x|`, and the feedback-linearising laws
/// `kappa_c(x) = 1.34 x - 0.01 sin x + c |x|`, which contract `V` by `c`.
#[derive(Debug, Clone)]
pub struct ExampleSystem {
    pub plant: PlantModel,
}

/// Open-loop growth bound of the benchmark plant under `V(x) = |x|`.
pub const EXAMPLE_ALPHA: f64 = 1.35;
/// Contraction of the benchmark coarse law.
pub const EXAMPLE_RHO1: f64 = 0.9;

pub fn example_plant(x: f64, u: f64, w: f64) -> f64 {
    -1.34 * x + 0.01 * x.sin() + u + w
}

pub fn example_law(c: f64, x: f64) -> f64 {
    1.34 * x - 0.01 * x.sin() + c * x.abs()
}

/// Benchmark plant from `x0 = 20` with unit-variance disturbance.
pub fn example_system() -> ExampleSystem {
    let plant = PlantModel::new(example_plant, f64::abs, 1.0, 20.0).expect("constants are valid");
    ExampleSystem { plant }
}

impl ExampleSystem {
    /// Law contracting `V` by `c`, costing `cost_units`.
    pub fn law(&self, c: f64, cost_units: usize) -> Result<ControlLaw<f64, f64>> {
        ControlLaw::new(cost_units, c, move |x: &f64| example_law(c, *x))
    }

    pub fn kappa1(&self) -> ControlLaw<f64, f64> {
        self.law(EXAMPLE_RHO1, 1).expect("unit cost is valid")
    }

    pub fn kappa2(&self, c2: f64, eta: usize) -> Result<ControlLaw<f64, f64>> {
        self.law(c2, eta)
    }
}

/// Scheme, channel statistics and trigger threshold of a closed loop.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub controller: Controller<f64, f64>,
    pub channel: ChannelModel,
    pub threshold: f64,
}

impl SchemeConfig {
    pub fn new(controller: Controller<f64, f64>, channel: ChannelModel, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::Parameter {
                name: "d",
                reason: format!("trigger threshold {threshold} must be finite and nonnegative"),
            });
        }
        Ok(Self { controller, channel, threshold })
    }

    pub fn triggered(&self, x: f64) -> bool {
        x.abs() > self.threshold
    }
}

/// Draws `(gamma, N)`: silent `(2, 0)` without trigger, otherwise delivery
/// with probability `q` and `N ~ p` on delivery, `(0, 0)` on dropout.
pub fn sample_env<R: Rng + ?Sized>(rng: &mut R, trigger: bool, q: f64, p: &[f64]) -> StepEnv {
    if !trigger {
        return StepEnv::silent();
    }
    let delivered = rng.random::<f64>() < q;
    if !delivered {
        return StepEnv::new(Gamma::Dropout, 0).expect("dropout carries no computation");
    }
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    let mut n = p.iter().rposition(|&pj| pj > 0.0).unwrap_or(0);
    for (j, pj) in p.iter().enumerate() {
        acc += pj;
        if u < acc {
            n = j;
            break;
        }
    }
    StepEnv::new(Gamma::Delivered, n).expect("delivery admits any N")
}

/// One row of a simulated trajectory: state, applied input, channel outcome,
/// availability and buffer counts after the step, `V(x_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub k: usize,
    pub x: f64,
    pub u: f64,
    pub gamma: u8,
    pub n: usize,
    pub fine: usize,
    pub coarse: usize,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    /// State after the last recorded step.
    pub final_x: f64,
    pub final_v: f64,
    /// The state left `[-DIVERGENCE_LIMIT, DIVERGENCE_LIMIT]` or became
    /// non-finite; the trajectory stops there.
    pub divergent: bool,
}

impl Trajectory {
    /// `V(x_0), ..., V(x_K)` for the recorded prefix.
    pub fn v_path(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.v).chain(std::iter::once(self.final_v)).collect()
    }

    pub fn inputs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.u).collect()
    }
}

/// Runs `horizon` steps drawing `(gamma, N)` from `env` and disturbances
/// from `noise`.
pub fn run_closed_loop(
    plant: &PlantModel,
    config: &SchemeConfig,
    horizon: usize,
    mut env: impl FnMut(bool) -> Result<StepEnv>,
    mut noise: impl FnMut() -> f64,
) -> Result<Trajectory> {
    let predict = |x: &f64, u: &f64| plant.nominal(*x, *u);
    let mut buffer: Buffer<f64> = config.controller.empty_buffer();
    let mut x = plant.x0;
    let mut steps = Vec::with_capacity(horizon);
    let mut divergent = false;
    for k in 0..horizon {
        let triggered = config.triggered(x);
        let e = env(triggered)?;
        if triggered == (e.gamma() == Gamma::Silent) {
            let side = if triggered { "outside" } else { "inside" };
            return Err(Error::Parameter {
                name: "env",
                reason: format!("step {k}: state {side} threshold but gamma = {}", e.gamma().as_u8()),
            });
        }
        let (u, next) = config.controller.step(buffer, &x, e, &predict);
        buffer = next;
        steps.push(TrajectoryStep {
            k,
            x,
            u,
            gamma: e.gamma().as_u8(),
            n: e.n(),
            fine: buffer.fine_count(),
            coarse: buffer.coarse_count(),
            v: plant.lyapunov(x),
        });
        let w = if plant.noise_std > 0.0 { plant.noise_std * noise() } else { 0.0 };
        let next_x = plant.step(x, u, w);
        if !next_x.is_finite() || next_x.abs() > DIVERGENCE_LIMIT {
            divergent = true;
            let v = plant.lyapunov(next_x);
            let final_v = if v.is_finite() { v } else { plant.lyapunov(x) };
            return Ok(Trajectory { steps, final_x: next_x, final_v, divergent });
        }
        x = next_x;
    }
    Ok(Trajectory { steps, final_x: x, final_v: plant.lyapunov(x), divergent })
}

/// Sampled closed-loop trajectory; deterministic in `seed`.
pub fn simulate_trajectory(
    plant: &PlantModel,
    config: &SchemeConfig,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Parameter { name: "horizon", reason: "must be at least 1".into() });
    }
    let q = config.channel.q();
    let p = config.channel.p();
    // env and noise draws interleave on one stream shared by both closures
    let rng = RefCell::new(ChaCha8Rng::seed_from_u64(seed));
    run_closed_loop(
        plant,
        config,
        horizon,
        |trigger| Ok(sample_env(&mut *rng.borrow_mut(), trigger, q, p)),
        || rng.borrow_mut().sample(StandardNormal),
    )
}

/// Replays a fixed `(gamma, N)` script; fails if the script runs out or
/// contradicts the trigger.
pub fn simulate_scripted(
    plant: &PlantModel,
    config: &SchemeConfig,
    script: &[StepEnv],
) -> Result<Trajectory> {
    let mut it = script.iter();
    run_closed_loop(
        plant,
        config,
        script.len(),
        |_| {
            it.next().copied().ok_or_else(|| Error::Parameter {
                name: "script",
                reason: "environment script exhausted".into(),
            })
        },
        || 0.0,
    )
}

/// Run-averaged Lyapunov values.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub horizon: usize,
    pub runs: usize,
    /// `mean_v[k]`: average of `V(x_k)` over runs, `k = 0..=horizon`.
    pub mean_v: Vec<f64>,
    /// Fraction of runs with `|x_k| > d` at each `k = 0..=horizon`.
    pub trigger_rate_by_step: Vec<f64>,
    /// Fraction of triggered steps over all runs and `k < horizon`.
    pub trigger_rate: f64,
    /// Runs stopped by the divergence guard; their last `V` is carried forward.
    pub divergent_runs: usize,
}

impl MonteCarloResult {
    pub fn max_over(&self, from: usize, to: usize) -> f64 {
        self.mean_v[from..=to].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct RunSummary {
    v: Vec<f64>,
    triggered: Vec<bool>,
    divergent: bool,
}

fn summarise(trajectory: Trajectory, horizon: usize, threshold: f64) -> RunSummary {
    let mut v = trajectory.v_path();
    let mut triggered: Vec<bool> = trajectory.steps.iter().map(|s| s.x.abs() > threshold).collect();
    triggered.push(trajectory.final_x.abs() > threshold || !trajectory.final_x.is_finite());
    let last_v = *v.last().expect("path has at least one entry");
    let last_t = *triggered.last().expect("nonempty");
    v.resize(horizon + 1, last_v);
    triggered.resize(horizon + 1, last_t);
    RunSummary { v, triggered, divergent: trajectory.divergent }
}

/// Averages `runs` independent trajectories.
///
/// Runs execute in parallel on the current rayon pool; results are summed in
/// run-index order, so the output does not depend on the thread count.
pub fn monte_carlo(
    plant: &PlantModel,
    config: &SchemeConfig,
    horizon: usize,
    runs: usize,
    base_seed: u64,
) -> Result<MonteCarloResult> {
    if runs == 0 {
        return Err(Error::Parameter { name: "runs", reason: "must be at least 1".into() });
    }
    let summaries: Vec<RunSummary> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            simulate_trajectory(plant, config, horizon, base_seed ^ r)
                .map(|t| summarise(t, horizon, config.threshold))
        })
        .collect::<Result<_>>()?;

    let mut sum_v = vec![0.0; horizon + 1];
    let mut count_t = vec![0usize; horizon + 1];
    let mut divergent_runs = 0;
    for s in &summaries {
        for (acc, v) in sum_v.iter_mut().zip(&s.v) {
            *acc += v;
        }
        for (acc, &t) in count_t.iter_mut().zip(&s.triggered) {
            *acc += usize::from(t);
        }
        divergent_runs += usize::from(s.divergent);
    }
    let r = runs as f64;
    let trigger_rate = count_t[..horizon].iter().sum::<usize>() as f64 / (r * horizon as f64);
    Ok(MonteCarloResult {
        horizon,
        runs,
        mean_v: sum_v.into_iter().map(|s| s / r).collect(),
        trigger_rate_by_step: count_t.into_iter().map(|c| c as f64 / r).collect(),
        trigger_rate,
        divergent_runs,
    })
}

/// Transition counts of the buffer state `(F; C)` over always-triggered steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounts {
    /// `counts[i][j]`: transitions from chain index `i` to `j`.
    pub counts: Vec<Vec<u64>>,
    pub steps: u64,
}

impl TransitionCounts {
    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }
}

/// Drives the controller's buffer with sampled `(gamma, N)` while the trigger
/// is held on and tallies chain-index transitions (`F * eta + C`, with
/// `eta = 1` for single-law schemes). States outside `0..=n_max` are an error.
pub fn empirical_buffer_transitions(
    controller: &Controller<f64, f64>,
    channel: &ChannelModel,
    steps: u64,
    seed: u64,
) -> Result<TransitionCounts> {
    if !controller.scheme().is_buffered() {
        return Err(Error::Parameter {
            name: "scheme",
            reason: format!("{} keeps no buffer", controller.scheme()),
        });
    }
    let eta = if controller.scheme() == Scheme::A1 { 1 } else { controller.eta() };
    let dim = channel.n_max() + 1;
    let mut counts = vec![vec![0u64; dim]; dim];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let predict = |x: &f64, u: &f64| x + u;
    let mut buffer = controller.empty_buffer();
    let mut from = 0usize;
    for _ in 0..steps {
        let env = sample_env(&mut rng, true, channel.q(), channel.p());
        let (_, next) = controller.step(buffer, &1.0, env, &predict);
        buffer = next;
        let state = buffer.state();
        let to = state.index(eta);
        let in_space = controller.scheme() == Scheme::A1 || state.coarse < eta;
        if !in_space || to >= dim {
            return Err(Error::Dimension(format!(
                "buffer state {:?} is outside the {dim}-state chain",
                buffer.state()
            )));
        }
        counts[from][to] += 1;
        from = to;
    }
    Ok(TransitionCounts { counts, steps })
}
