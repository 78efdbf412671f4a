//! Built-in acceptance checks, one per criterion. Each returns an outcome
//! with a one-line detail instead of failing fast, so a full run always
//! reports every criterion.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::Result;
use crate::example1::verify_example1;
use crate::linalg::Matrix;
use crate::markov::{buffer_chain, transition_matrix, ChannelModel};
use crate::schemes::Scheme;
use crate::simulate::{empirical_buffer_transitions, example_system, monte_carlo, MonteCarloResult};
use crate::stability::{
    block_schur_g1, certify, critical_alpha, psi_a2, omega_a1, spectral_radius, ContractionSpec,
    SPECTRAL_TOLERANCE,
};
use crate::sweep::{boundary_curve, SweepSpec};

/// Width of the band around the stability boundary where sign checks are skipped.
pub const BOUNDARY_BAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}. {}: {}", self.id, self.name, self.detail)
    }
}

/// Monte Carlo size and base seed for the trajectory criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelftestOptions {
    pub runs: usize,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self { runs: 10_000, seed: 0 }
    }
}

fn outcome(id: u8, name: &'static str, result: Result<(bool, String)>) -> CriterionOutcome {
    match result {
        Ok((passed, detail)) => CriterionOutcome { id, name, passed, detail },
        Err(e) => CriterionOutcome { id, name, passed: false, detail: format!("error: {e}") },
    }
}

/// Worked-example configurations: `Q1` (A2, eta 2), `Q2` (A2, eta 3), `Q3` (A1).
pub fn worked_config(label: &str) -> RunConfig {
    let mut cfg = RunConfig::default();
    match label {
        "Q2" => cfg.eta = 3,
        "Q3" => cfg.scheme = Scheme::A1,
        _ => {}
    }
    cfg
}

pub fn boundary_reproduction() -> CriterionOutcome {
    outcome(1, "boundary reproduction", (|| {
        let cases = [("Q1", 1.3527, 1.35265), ("Q2", 1.266, 1.26609), ("Q3", 1.175, 1.17477)];
        let mut passed = true;
        let mut parts = Vec::new();
        for (label, quoted, oracle) in cases {
            let a = critical_alpha(&worked_config(label).critical_alpha_config()?)?;
            let ok = [a.closed, a.spectral]
                .iter()
                .all(|v| (v - quoted).abs() <= 1e-3 && (v - oracle).abs() <= 1e-3);
            passed &= ok;
            parts.push(format!("{label} {:.6}/{:.6} (want {quoted})", a.closed, a.spectral));
        }
        Ok((passed, parts.join(", ")))
    })())
}

fn random_pmf(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn random_channel(rng: &mut ChaCha8Rng, n_max: usize) -> Result<ChannelModel> {
    let q = 0.05 + 0.95 * rng.random::<f64>();
    ChannelModel::new(q, random_pmf(rng, n_max + 1))
}

/// Grid of the boundary figure on the worked-example channel.
pub fn boundary_grid_specs() -> Result<Vec<SweepSpec>> {
    let base = RunConfig::default();
    let grid = base.rho1_grid.clone();
    let mut specs = Vec::new();
    for eta in [2, 3] {
        for eps in [0.25, 0.5, 0.75, 1.0] {
            specs.push(SweepSpec::new(Scheme::A2, eta, eps, grid.clone(), base.channel()?)?);
        }
    }
    specs.push(SweepSpec::new(Scheme::A1, 1, 1.0, grid, base.channel()?)?);
    Ok(specs)
}

pub fn closed_form_agreement(configs: usize) -> CriterionOutcome {
    outcome(2, "closed-form/spectral agreement", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
        let (mut checked, mut banded, mut mismatches) = (0usize, 0usize, 0usize);
        while checked + banded < configs {
            let n_max = rng.random_range(1..=8);
            let channel = random_channel(&mut rng, n_max)?;
            let alpha = 3.0 * rng.random::<f64>();
            let rho1 = 0.999 * rng.random::<f64>();
            let (scheme, eta, rho2) = if rng.random_bool(0.25) {
                (Scheme::A1, 1, rho1)
            } else {
                (Scheme::A2, rng.random_range(1..=n_max), rho1 * rng.random::<f64>())
            };
            let spec = ContractionSpec::new(alpha, rho1, rho2, eta)?;
            let report = certify(scheme, &spec, &channel, None)?;
            let closed = match scheme {
                Scheme::A1 => omega_a1(alpha, rho1, channel.l())?,
                _ if eta == 1 => omega_a1(alpha, rho2, channel.l())?,
                _ => psi_a2(&spec, channel.l())?,
            };
            let radius = report.spectral_radius;
            if (radius - 1.0).abs() <= BOUNDARY_BAND || (closed - 1.0).abs() <= BOUNDARY_BAND {
                banded += 1;
                continue;
            }
            checked += 1;
            if (closed < 1.0) != (radius < 1.0) {
                mismatches += 1;
            }
        }
        let mut max_gap: f64 = 0.0;
        let mut points = 0;
        for spec in boundary_grid_specs()? {
            for p in boundary_curve(&spec)? {
                max_gap = max_gap.max(p.discrepancy());
                points += 1;
            }
        }
        let passed = mismatches == 0 && max_gap < 1e-6;
        Ok((
            passed,
            format!(
                "{mismatches} sign mismatches in {checked} configs ({banded} in band); \
                 max |alpha*_closed - alpha*_spectral| = {max_gap:.3e} over {points} grid points"
            ),
        ))
    })())
}

/// Transition matrix for `eta = 1` written out row by row.
pub fn literal_single_law_matrix(l: &[f64]) -> Matrix {
    let n = l.len();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 1..n {
            m[(i, j)] = l[j];
        }
        if i <= 1 {
            m[(i, 0)] = l[0];
        } else {
            m[(i, i - 1)] = l[i - 1] + l[0];
        }
    }
    m
}

/// Entries of `pi` outside three standard errors of the empirical frequency,
/// plus observed transitions that `pi` forbids.
pub fn empirical_violations(pi: &Matrix, counts: &[Vec<u64>]) -> (usize, usize) {
    let (mut violations, mut entries) = (0, 0);
    for (i, row) in counts.iter().enumerate() {
        let n: u64 = row.iter().sum();
        if n == 0 {
            continue;
        }
        for (j, &c) in row.iter().enumerate() {
            let p = pi[(i, j)];
            let freq = c as f64 / n as f64;
            entries += 1;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let ok = if p == 0.0 { c == 0 } else { (freq - p).abs() <= 3.0 * se };
            violations += usize::from(!ok);
        }
    }
    (violations, entries)
}

pub fn transition_properties(steps: u64, seed: u64) -> CriterionOutcome {
    outcome(3, "transition-matrix properties", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
        let mut worst_row: f64 = 0.0;
        let mut literal_mismatch = 0;
        for n_max in 1..=12 {
            for _ in 0..5 {
                let l = random_channel(&mut rng, n_max)?.l().to_vec();
                for eta in 1..=n_max.min(6) {
                    let chain = transition_matrix(&l, eta)?;
                    for row in chain.pi().iter_rows() {
                        worst_row = worst_row.max((row.iter().sum::<f64>() - 1.0).abs());
                    }
                }
                let literal = literal_single_law_matrix(&l);
                if transition_matrix(&l, 1)?.pi() != &literal {
                    literal_mismatch += 1;
                }
            }
        }
        let system = example_system();
        let mut emp = Vec::new();
        let mut emp_ok = true;
        for label in ["Q1", "Q2", "Q3"] {
            let cfg = worked_config(label);
            let sc = cfg.scheme_config(&system)?;
            let counts = empirical_buffer_transitions(&sc.controller, &sc.channel, steps, seed)?;
            let chain = buffer_chain(&sc.channel, cfg.effective_eta())?;
            let (bad, entries) = empirical_violations(chain.pi(), &counts.counts);
            emp_ok &= bad == 0;
            emp.push(format!("{label} {bad}/{entries}"));
        }
        let passed = worst_row <= 1e-12 && literal_mismatch == 0 && emp_ok;
        Ok((
            passed,
            format!(
                "max |row sum - 1| = {worst_row:.1e}; {literal_mismatch} single-law mismatches; \
                 entries outside 3 SE over {steps} steps: {}",
                emp.join(", ")
            ),
        ))
    })())
}

pub fn example1_exactness() -> CriterionOutcome {
    outcome(4, "forced-scenario exactness", (|| {
        let results = verify_example1()?;
        let failed: Vec<String> = results
            .iter()
            .filter(|(_, _, ok)| !ok)
            .map(|(got, _, _)| got.scheme.to_string())
            .collect();
        let detail = if failed.is_empty() {
            format!("{} schemes match bit for bit", results.len())
        } else {
            format!("mismatch for {}", failed.join(", "))
        };
        Ok((failed.is_empty(), detail))
    })())
}

fn worked_monte_carlo(label: &str, opts: SelftestOptions, noise_std: f64) -> Result<MonteCarloResult> {
    let mut cfg = worked_config(label);
    cfg.noise_std = noise_std;
    let system = example_system();
    let plant = cfg.plant(&system)?;
    let sc = cfg.scheme_config(&system)?;
    monte_carlo(&plant, &sc, cfg.horizon, opts.runs, opts.seed)
}

pub fn trajectory_ordering(opts: SelftestOptions) -> CriterionOutcome {
    outcome(5, "averaged-trajectory ordering", (|| {
        let q1 = worked_monte_carlo("Q1", opts, 1.0)?;
        let q2 = worked_monte_carlo("Q2", opts, 1.0)?;
        let q3 = worked_monte_carlo("Q3", opts, 1.0)?;
        let h = q1.horizon;
        let tail = q1.max_over(100, h);
        let (e1, e2, e3) = (q1.mean_v[h], q2.mean_v[h], q3.mean_v[h]);
        let passed = tail < 50.0 && tail < e3 / 10.0 && e2 >= 10.0 * e1 && e3 >= 10.0 * e1;
        Ok((
            passed,
            format!(
                "Q1 max over k in [100,{h}] = {tail:.4}; at k={h}: Q1 {e1:.4}, Q2 {e2:.4e}, Q3 {e3:.4e} \
                 ({} runs, seed {})",
                opts.runs, opts.seed
            ),
        ))
    })())
}

pub fn decay_bound(opts: SelftestOptions) -> CriterionOutcome {
    outcome(6, "decay bound", (|| {
        let cfg = worked_config("Q1");
        let report = certify(cfg.scheme, &cfg.contraction_spec()?, &cfg.channel()?, None)?;
        let Some(bounds) = report.bounds else {
            return Ok((false, "configuration is not certified".into()));
        };
        let mc = worked_monte_carlo("Q1", opts, 0.0)?;
        let v0 = cfg.x0.abs();
        let mut worst = f64::NEG_INFINITY;
        let mut violations = 0;
        for (k, v) in mc.mean_v.iter().enumerate() {
            let b = bounds.bound_at(k, v0);
            worst = worst.max(v / b);
            violations += usize::from(*v > b * (1.0 + 1e-12));
        }
        Ok((
            violations == 0,
            format!(
                "xi = {:.6}, C1 = {:.4}, C2 = {:.4}; {violations} violations, max mean/bound = {worst:.4}",
                bounds.xi, bounds.c1, bounds.c2
            ),
        ))
    })())
}

/// Random nonnegative matrix whose lower-right block has `||M||_inf < 1` and
/// `trace(M^2) < 1`.
pub fn random_block_matrix(rng: &mut ChaCha8Rng) -> Matrix {
    loop {
        let n = rng.random_range(2..=6);
        let mut h = Matrix::zeros(n, n);
        for i in 1..n {
            let target = 0.99 * rng.random::<f64>();
            let w: Vec<f64> = (1..n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            for (j, x) in w.iter().enumerate() {
                h[(i, j + 1)] = target * x / s;
            }
        }
        let m = h.submatrix(1, n, 1, n);
        if m.matmul(&m).map(|m2| m2.trace()).unwrap_or(f64::INFINITY) >= 1.0 {
            continue;
        }
        let scale = 2.0 * rng.random::<f64>();
        h[(0, 0)] = 1.2 * rng.random::<f64>();
        for j in 1..n {
            h[(0, j)] = scale * rng.random::<f64>();
            h[(j, 0)] = scale * rng.random::<f64>();
        }
        return h;
    }
}

pub fn block_schur_agreement(samples: usize) -> CriterionOutcome {
    outcome(7, "block Schur-complement test", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
        let (mut checked, mut banded, mut disagreements, mut stable) = (0, 0, 0, 0);
        while checked + banded < samples {
            let h = random_block_matrix(&mut rng);
            let radius = spectral_radius(&h, SPECTRAL_TOLERANCE)?;
            let test = block_schur_g1(&h, 0.0)?;
            if (radius - 1.0).abs() <= BOUNDARY_BAND || test.g1.abs() <= BOUNDARY_BAND {
                banded += 1;
                continue;
            }
            checked += 1;
            stable += usize::from(radius < 1.0);
            disagreements += usize::from((test.g1 > 0.0) != (radius < 1.0));
        }
        Ok((
            disagreements == 0,
            format!(
                "{disagreements} disagreements in {checked} matrices ({stable} Schur, {banded} in band)"
            ),
        ))
    })())
}

pub fn run_all(opts: SelftestOptions) -> Vec<CriterionOutcome> {
    vec![
        boundary_reproduction(),
        closed_form_agreement(1000),
        transition_properties(100_000, opts.seed),
        example1_exactness(),
        trajectory_ordering(opts),
        decay_bound(opts),
        block_schur_agreement(1000),
    ]
}
