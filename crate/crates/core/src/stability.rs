//! Stochastic-stability certificates for the buffered schemes.
//!
//! A scheme is certified when the certification matrix `T = diag(phi) * Pi`
//! is Schur stable. `phi[i]` bounds the one-step growth of the Lyapunov
//! function while the chain sits in state `i`: `alpha` for the empty buffer,
//! `rho1` while only coarse inputs remain, `rho2` once a fine input is at
//! the head. `T` is nonnegative, so Schur stability is a test on its Perron
//! root, which [`spectral_radius`] computes by power iteration. The closed
//! forms [`psi_a2`] and [`omega_a1`] give the same verdict through a
//! first-row/first-column Schur complement and are linear in `alpha`, which
//! is what makes [`critical_alpha`] cheap.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::markov::{transition_matrix, validate_probability_vector, BufferChain, ChannelModel};
use crate::schemes::Scheme;

/// Margin below 1 required before a radius counts as Schur stable.
pub const SCHUR_MARGIN: f64 = 1e-9;
/// Default convergence tolerance of [`spectral_radius`].
pub const SPECTRAL_TOLERANCE: f64 = 1e-12;
/// Iteration cap of the power method before the Gelfand fallback.
pub const MAX_POWER_ITERATIONS: usize = 100_000;

/// Lyapunov growth and contraction bounds of the control laws.
///
/// `alpha` bounds open-loop growth (`V(f(x, 0)) <= alpha V(x)`), `rho1` and
/// `rho2` the closed-loop contraction of the coarse and fine laws. The
/// deterministic mode (state inside the trigger threshold, zero input) grows
/// by at most `sigma_open` and keeps `V` below `d_bound`. The lower comparison
/// function of the Lyapunov candidate enters none of the certificates and is
/// not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSpec {
    pub alpha: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub eta: usize,
    pub sigma_open: f64,
    pub d_bound: f64,
}

impl ContractionSpec {
    /// `sigma_open` defaults to `alpha` and `d_bound` to 1.
    pub fn new(alpha: f64, rho1: f64, rho2: f64, eta: usize) -> Result<Self> {
        let spec = Self { alpha, rho1, rho2, eta, sigma_open: alpha, d_bound: 1.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sigma_open(mut self, sigma_open: f64) -> Result<Self> {
        self.sigma_open = sigma_open;
        self.validate()?;
        Ok(self)
    }

    pub fn with_d_bound(mut self, d_bound: f64) -> Result<Self> {
        self.d_bound = d_bound;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        let sigma_open = if self.sigma_open == self.alpha { alpha } else { self.sigma_open };
        Self { alpha, sigma_open, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("sigma_open", self.sigma_open),
            ("d_bound", self.d_bound),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("{v} is not a finite nonnegative number"),
                });
            }
        }
        if self.eta == 0 {
            return Err(Error::Parameter { name: "eta", reason: "must be at least 1".into() });
        }
        if self.rho2 > self.rho1 {
            return Err(Error::Parameter {
                name: "rho2",
                reason: format!(
                    "fine-law contraction {} exceeds coarse-law contraction {}",
                    self.rho2, self.rho1
                ),
            });
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.rho2 == self.rho1 && self.eta > 1 {
            out.push(format!(
                "rho2 equals rho1 ({}): the fine law buys no extra contraction",
                self.rho1
            ));
        }
        out
    }
}

/// Per-state growth bounds `[alpha, rho1 x (eta - 1), rho2 x (n_max - eta + 1)]`.
pub fn gain_diagonal(spec: &ContractionSpec, n_max: usize) -> Result<Vec<f64>> {
    if spec.eta > n_max {
        return Err(Error::Parameter {
            name: "eta",
            reason: format!("eta = {} exceeds n_max = {n_max}", spec.eta),
        });
    }
    let mut phi = Vec::with_capacity(n_max + 1);
    phi.push(spec.alpha);
    phi.extend(std::iter::repeat_n(spec.rho1, spec.eta - 1));
    phi.extend(std::iter::repeat_n(spec.rho2, n_max + 1 - spec.eta));
    Ok(phi)
}

/// Gains for a scheme: the single-law scheme uses `rho1` in every
/// nonempty state, the two-law scheme follows [`gain_diagonal`].
pub fn scheme_gains(scheme: Scheme, spec: &ContractionSpec, n_max: usize) -> Result<Vec<f64>> {
    match scheme {
        Scheme::A1 => {
            let mut phi = vec![spec.rho1; n_max + 1];
            phi[0] = spec.alpha;
            Ok(phi)
        }
        Scheme::A2 => gain_diagonal(spec, n_max),
        other => Err(unsupported_scheme(other)),
    }
}

fn unsupported_scheme(scheme: Scheme) -> Error {
    Error::Parameter {
        name: "scheme",
        reason: format!("{scheme} keeps no buffer; certification covers A1 and A2"),
    }
}

/// `T[i][j] = phi[i] * Pi[i][j]`.
pub fn certification_matrix(phi: &[f64], chain: &BufferChain) -> Result<Matrix> {
    scale_rows(phi, chain.pi())
}

fn scale_rows(phi: &[f64], pi: &Matrix) -> Result<Matrix> {
    if phi.len() != pi.rows() {
        return Err(Error::Dimension(format!(
            "gain vector has length {}, transition matrix has {} rows",
            phi.len(),
            pi.rows()
        )));
    }
    if let Some((i, &g)) = phi.iter().enumerate().find(|(_, g)| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::NegativeEntry { row: i, col: i, value: g });
    }
    let mut t = pi.clone();
    for (i, &g) in phi.iter().enumerate() {
        t.row_mut(i).iter_mut().for_each(|v| *v *= g);
    }
    Ok(t)
}

fn check_nonnegative_square(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    for (i, row) in m.iter_rows().enumerate() {
        if let Some((j, &v)) = row.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::NegativeEntry { row: i, col: j, value: v });
        }
    }
    Ok(())
}

/// Perron root of a nonnegative square matrix.
///
/// Power iteration runs on `m + I` from the all-ones vector: the shift makes
/// the iteration aperiodic without moving the Perron eigenvector, and keeps
/// every iterate strictly positive. Each step yields the Collatz–Wielandt
/// bracket `min_i (Av)_i / v_i <= rho <= max_i (Av)_i / v_i`; the iteration
/// stops when the bracket is narrower than `tol`, or, for reducible inputs
/// whose bracket cannot close, when successive growth estimates differ by
/// less than `tol`. After [`MAX_POWER_ITERATIONS`] steps it falls back to the
/// Gelfand estimate `||m^k||^(1/k)` with `k = 2^s` by repeated squaring.
pub fn spectral_radius(m: &Matrix, tol: f64) -> Result<f64> {
    check_nonnegative_square(m)?;
    if !(tol > 0.0) {
        return Err(Error::Parameter { name: "tol", reason: "must be positive".into() });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(0.0);
    }
    if m.as_slice().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut prev_estimate = f64::NAN;
    let mut gap = f64::INFINITY;
    for _ in 0..MAX_POWER_ITERATIONS {
        let mut w = m.mul_vec(&v);
        w.iter_mut().zip(&v).for_each(|(wi, vi)| *wi += vi);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (wi, vi) in w.iter().zip(&v) {
            let r = wi / vi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        gap = hi - lo;
        if gap <= tol {
            return Ok((0.5 * (lo + hi) - 1.0).max(0.0));
        }
        let total: f64 = w.iter().sum();
        // v sums to one, so total is the 1-norm growth of the shifted matrix
        let estimate = total - 1.0;
        if (estimate - prev_estimate).abs() < tol {
            return Ok(estimate.max(0.0));
        }
        prev_estimate = estimate;
        w.iter_mut().for_each(|wi| *wi /= total);
        v = w;
    }
    gelfand_radius(m, tol).ok_or(Error::NotConverged { iterations: MAX_POWER_ITERATIONS, gap })
}

/// `||m^k||_inf^(1/k)` for `k = 2, 4, 8, ...`, tracked in log scale, until two
/// successive estimates agree within `tol`. `None` if they never do.
fn gelfand_radius(m: &Matrix, tol: f64) -> Option<f64> {
    let mut power = m.clone();
    let mut log_scale = 0.0;
    let mut k = 1.0_f64;
    let mut prev = f64::NAN;
    for _ in 0..64 {
        let norm = power.norm_inf();
        if norm == 0.0 {
            return Some(0.0);
        }
        let estimate = ((log_scale + norm.ln()) / k).exp();
        if (estimate - prev).abs() < tol {
            return Some(estimate);
        }
        prev = estimate;
        let scaled = scale_rows(&vec![1.0 / norm; power.rows()], &power).ok()?;
        power = scaled.matmul(&scaled).ok()?;
        log_scale = 2.0 * (log_scale + norm.ln());
        k *= 2.0;
    }
    None
}

/// `spectral_radius(m) < 1 - SCHUR_MARGIN`.
pub fn is_schur(m: &Matrix) -> Result<bool> {
    Ok(spectral_radius(m, SPECTRAL_TOLERANCE)? < 1.0 - SCHUR_MARGIN)
}

fn check_positive(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Parameter { name, reason: "vector is empty".into() });
    }
    if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::Parameter {
            name,
            reason: format!("entry {i} = {x} is not strictly positive"),
        });
    }
    Ok(())
}

/// Solves `(I - T) zeta = nu` for the coupled Lyapunov certificate.
pub fn solve_certificate(t: &Matrix, nu: &[f64]) -> Result<Vec<f64>> {
    check_positive("nu", nu)?;
    if nu.len() != t.rows() {
        return Err(Error::Dimension(format!(
            "nu has length {}, matrix has {} rows",
            nu.len(),
            t.rows()
        )));
    }
    let radius = spectral_radius(t, SPECTRAL_TOLERANCE)?;
    if radius >= 1.0 - SCHUR_MARGIN {
        return Err(Error::NotSchur { spectral_radius: radius });
    }
    let n = t.rows();
    let mut a = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] -= t[(i, j)];
        }
    }
    let zeta = a.solve(nu)?;
    if let Some((i, z)) = zeta.iter().enumerate().find(|(_, z)| !(**z > 0.0)) {
        return Err(Error::Certificate(format!(
            "zeta[{i}] = {z} is not positive although T is Schur (radius {radius})"
        )));
    }
    Ok(zeta)
}

/// Decay rate and offsets of `E V_k <= c1 xi^k E V_0 + c2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBounds {
    pub xi: f64,
    pub c1: f64,
    pub c2: f64,
}

impl DecayBounds {
    pub fn bound_at(&self, k: usize, v0: f64) -> f64 {
        self.c1 * self.xi.powi(k as i32) * v0 + self.c2
    }
}

pub fn decay_bounds(
    zeta: &[f64],
    nu: &[f64],
    sigma_open: f64,
    d_bound: f64,
) -> Result<DecayBounds> {
    check_positive("zeta", zeta)?;
    check_positive("nu", nu)?;
    let zeta_max = zeta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let zeta_min = zeta.iter().copied().fold(f64::INFINITY, f64::min);
    let nu_min = nu.iter().copied().fold(f64::INFINITY, f64::min);
    let xi = 1.0 - nu_min / zeta_max;
    if !(0.0..1.0).contains(&xi) {
        return Err(Error::Certificate(format!(
            "decay rate xi = {xi} is outside [0, 1); zeta and nu are inconsistent"
        )));
    }
    let c1 = zeta_max / zeta_min;
    let spread = (zeta_max * sigma_open - xi * zeta_min).abs() * d_bound;
    let c2 = (zeta_min * d_bound).max(spread) / (zeta_min * (1.0 - xi));
    Ok(DecayBounds { xi, c1, c2 })
}

/// Outcome of the block Schur-complement test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSchurTest {
    pub g1: f64,
    pub schur: bool,
}

/// Splits a nonnegative `h` as `[[X, Y], [Z, M]]` with `X` the top-left
/// entry and evaluates `g(1) = (1 - X) - Y (I - M)^-1 Z`.
///
/// `M` must satisfy `||M||_inf < 1` and `trace(M^2) < 1`; `h` is then Schur
/// stable iff `g(1) > tol`.
pub fn block_schur_g1(h: &Matrix, tol: f64) -> Result<BlockSchurTest> {
    check_nonnegative_square(h)?;
    if h.rows() < 2 {
        return Err(Error::Dimension("block split needs at least a 2x2 matrix".into()));
    }
    let n = h.rows();
    let m = h.submatrix(1, n, 1, n);
    let norm = m.norm_inf();
    if norm >= 1.0 {
        return Err(Error::Hypothesis(format!("||M||_inf = {norm} is not below 1")));
    }
    let tr = m.matmul(&m)?.trace();
    if tr >= 1.0 {
        return Err(Error::Hypothesis(format!("trace(M^2) = {tr} is not below 1")));
    }
    let g1 = 1.0 - schur_complement_value(h)?;
    Ok(BlockSchurTest { g1, schur: g1 > tol })
}

/// `X + Y (I - M)^-1 Z` for the first-row/first-column split of `t`.
fn schur_complement_value(t: &Matrix) -> Result<f64> {
    let n = t.rows();
    let x = t[(0, 0)];
    let y = &t.row(0)[1..];
    let z: Vec<f64> = (1..n).map(|i| t[(i, 0)]).collect();
    let mut i_minus_m = t.submatrix(1, n, 1, n);
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let delta = if i == j { 1.0 } else { 0.0 };
            i_minus_m[(i, j)] = delta - i_minus_m[(i, j)];
        }
    }
    let w = i_minus_m.solve(&z)?;
    Ok(x + y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
}

fn require_contractive(name: &'static str, rho: f64) -> Result<()> {
    if rho >= 1.0 {
        return Err(Error::ClosedFormUnavailable(format!(
            "{name} = {rho} is not below 1; use the spectral radius of T instead"
        )));
    }
    Ok(())
}

/// Closed-form index of the two-law scheme; `Psi < 1` iff `T` is Schur.
///
/// Evaluated as `X + Y (I - M)^-1 Z` on the first-row/first-column split of
/// `T = diag(phi) Pi`, where `X = l_0 alpha`, `Y = alpha [l_1 .. l_n_max]`,
/// `Z` is the `l_0`-weighted first column and `M` the lower-right block.
pub fn psi_a2(spec: &ContractionSpec, l: &[f64]) -> Result<f64> {
    require_contractive("rho1", spec.rho1)?;
    require_contractive("rho2", spec.rho2)?;
    if spec.eta < 2 {
        return Err(Error::ClosedFormUnavailable(
            "eta = 1 reduces to the single-law scheme; use omega_a1".into(),
        ));
    }
    let chain = transition_matrix(l, spec.eta)?;
    let phi = gain_diagonal(spec, chain.n_max())?;
    schur_complement_value(&certification_matrix(&phi, &chain)?)
}

/// Closed-form index of the single-law scheme,
/// `Omega = l_0 alpha (1 + rho1 theta^T (I - rho1 G)^-1 e_1)` with `G` the
/// lower-right block of the single-law transition matrix and
/// `theta = [l_1 .. l_n_max]`.
pub fn omega_a1(alpha: f64, rho1: f64, l: &[f64]) -> Result<f64> {
    require_contractive("rho1", rho1)?;
    let chain = transition_matrix(l, 1)?;
    let n = chain.dim();
    let g = chain.pi().submatrix(1, n, 1, n);
    let mut a = Matrix::identity(n - 1);
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            a[(i, j)] -= rho1 * g[(i, j)];
        }
    }
    let mut e1 = vec![0.0; n - 1];
    e1[0] = 1.0;
    let w = a.solve(&e1)?;
    let theta_w: f64 = l[1..].iter().zip(&w).map(|(t, w)| t * w).sum();
    Ok(l[0] * alpha * (1.0 + rho1 * theta_w))
}

/// Which closed form a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormKind {
    Psi,
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub kind: ClosedFormKind,
    pub value: f64,
}

fn closed_form(scheme: Scheme, spec: &ContractionSpec, l: &[f64]) -> Result<ClosedForm> {
    match scheme {
        Scheme::A1 => Ok(ClosedForm {
            kind: ClosedFormKind::Omega,
            value: omega_a1(spec.alpha, spec.rho1, l)?,
        }),
        // with eta = 1 every nonempty state runs the fine law
        Scheme::A2 if spec.eta == 1 => {
            require_contractive("rho1", spec.rho1)?;
            Ok(ClosedForm { kind: ClosedFormKind::Omega, value: omega_a1(spec.alpha, spec.rho2, l)? })
        }
        Scheme::A2 => Ok(ClosedForm { kind: ClosedFormKind::Psi, value: psi_a2(spec, l)? }),
        other => Err(unsupported_scheme(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedStable,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub scheme: Scheme,
    pub phi: Vec<f64>,
    pub t_matrix: Matrix,
    pub spectral_radius: f64,
    pub closed_form: Option<ClosedForm>,
    pub nu: Vec<f64>,
    pub zeta: Option<Vec<f64>>,
    pub bounds: Option<DecayBounds>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

impl CertificationReport {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedStable
    }
}

/// Full certification of a buffered scheme. `nu` defaults to all ones.
///
/// The closed form is attached whenever both contractions are below one;
/// the verdict always comes from the spectral radius.
pub fn certify(
    scheme: Scheme,
    spec: &ContractionSpec,
    channel: &ChannelModel,
    nu: Option<&[f64]>,
) -> Result<CertificationReport> {
    let eta = match scheme {
        Scheme::A1 => 1,
        Scheme::A2 => spec.eta,
        other => return Err(unsupported_scheme(other)),
    };
    let chain = transition_matrix(channel.l(), eta)?;
    let phi = scheme_gains(scheme, spec, chain.n_max())?;
    let t = certification_matrix(&phi, &chain)?;
    let radius = spectral_radius(&t, SPECTRAL_TOLERANCE)?;
    let closed = match closed_form(scheme, spec, channel.l()) {
        Ok(c) => Some(c),
        Err(Error::ClosedFormUnavailable(_)) => None,
        Err(e) => return Err(e),
    };
    let nu = match nu {
        Some(v) => v.to_vec(),
        None => vec![1.0; chain.dim()],
    };
    let verdict = if radius < 1.0 - SCHUR_MARGIN {
        Verdict::CertifiedStable
    } else {
        Verdict::NotCertified
    };
    let (zeta, bounds) = if verdict == Verdict::CertifiedStable {
        let zeta = solve_certificate(&t, &nu)?;
        let bounds = decay_bounds(&zeta, &nu, spec.sigma_open, spec.d_bound)?;
        (Some(zeta), Some(bounds))
    } else {
        check_positive("nu", &nu)?;
        (None, None)
    };
    let mut warnings = spec.warnings();
    if let Some(c) = closed {
        if (c.value < 1.0) != (radius < 1.0) && (radius - 1.0).abs() > SCHUR_MARGIN {
            warnings.push(format!(
                "closed form {} disagrees with spectral radius {radius}",
                c.value
            ));
        }
    }
    Ok(CertificationReport {
        scheme,
        phi,
        t_matrix: t,
        spectral_radius: radius,
        closed_form: closed,
        nu,
        zeta,
        bounds,
        verdict,
        warnings,
    })
}

/// Scheme and contraction data whose stability boundary in `alpha` is sought.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalAlphaConfig {
    pub scheme: Scheme,
    pub eta: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub l: Vec<f64>,
}

impl CriticalAlphaConfig {
    fn spec(&self, alpha: f64) -> Result<ContractionSpec> {
        let eta = if self.scheme == Scheme::A1 { 1 } else { self.eta };
        let rho2 = if self.scheme == Scheme::A1 { self.rho1 } else { self.rho2 };
        ContractionSpec::new(alpha, self.rho1, rho2, eta)
    }

    /// `T(alpha)` for this configuration.
    pub fn certification_matrix(&self, alpha: f64) -> Result<Matrix> {
        let spec = self.spec(alpha)?;
        let chain = transition_matrix(&self.l, spec.eta)?;
        let phi = scheme_gains(self.scheme, &spec, chain.n_max())?;
        certification_matrix(&phi, &chain)
    }
}

/// Boundary `alpha*` by both routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalAlpha {
    pub closed: f64,
    pub spectral: f64,
}

impl CriticalAlpha {
    pub fn discrepancy(&self) -> f64 {
        (self.closed - self.spectral).abs()
    }
}

/// `alpha*` from the closed form, which is linear in `alpha`: `1 / index(alpha = 1)`.
pub fn critical_alpha_closed(cfg: &CriticalAlphaConfig) -> Result<f64> {
    validate_probability_vector(&cfg.l)?;
    let unit = closed_form(cfg.scheme, &cfg.spec(1.0)?, &cfg.l)?.value;
    if !(unit > 0.0) {
        return Err(Error::Bracket(
            "closed form vanishes at alpha = 1 (l_0 = 0): no finite critical alpha".into(),
        ));
    }
    Ok(1.0 / unit)
}

/// Upper end of the bisection search; brackets beyond this are reported as failures.
pub const ALPHA_SEARCH_LIMIT: f64 = 1e6;
/// Width at which [`critical_alpha_bisection`] stops.
pub const BISECTION_TOLERANCE: f64 = 1e-10;

/// `alpha*` by bisection on `spectral_radius(T(alpha)) = 1`.
///
/// The radius is nondecreasing and continuous in `alpha`. The bracket starts
/// at `[0, 1]` and the upper end doubles until the radius reaches one, up to
/// [`ALPHA_SEARCH_LIMIT`].
pub fn critical_alpha_bisection(cfg: &CriticalAlphaConfig) -> Result<f64> {
    let radius = |alpha: f64| -> Result<f64> {
        spectral_radius(&cfg.certification_matrix(alpha)?, 1e-13)
    };
    let r0 = radius(0.0)?;
    if r0 >= 1.0 {
        return Err(Error::Bracket(format!(
            "spectral radius at alpha = 0 is already {r0}; no stable alpha exists"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while radius(hi)? < 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > ALPHA_SEARCH_LIMIT {
            return Err(Error::Bracket(format!(
                "spectral radius stays below 1 up to alpha = {ALPHA_SEARCH_LIMIT}"
            )));
        }
    }
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if radius(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn critical_alpha(cfg: &CriticalAlphaConfig) -> Result<CriticalAlpha> {
    Ok(CriticalAlpha {
        closed: critical_alpha_closed(cfg)?,
        spectral: critical_alpha_bisection(cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::effective_availability;

    const L_EXAMPLE: [f64; 5] = [0.6, 0.1, 0.1, 0.1, 0.1];

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn gain_diagonal_examples() {
        let spec = ContractionSpec::new(1.35, 0.9, 0.45, 2).unwrap();
        assert_eq!(gain_diagonal(&spec, 4).unwrap(), vec![1.35, 0.9, 0.45, 0.45, 0.45]);

        let spec = ContractionSpec::new(1.2, 0.7, 0.7, 1).unwrap();
        assert_eq!(gain_diagonal(&spec, 3).unwrap(), vec![1.2, 0.7, 0.7, 0.7]);

        let spec = ContractionSpec::new(1.2, 0.7, 0.3, 2).unwrap();
        assert_eq!(gain_diagonal(&spec, 2).unwrap(), vec![1.2, 0.7, 0.3]);
        assert!(gain_diagonal(&spec, 1).is_err());
    }

    #[test]
    fn contraction_spec_validation() {
        assert!(ContractionSpec::new(1.0, 0.5, 0.6, 2).is_err());
        assert!(ContractionSpec::new(-1.0, 0.5, 0.4, 2).is_err());
        assert!(ContractionSpec::new(1.0, 0.5, 0.4, 0).is_err());
        assert!(ContractionSpec::new(f64::INFINITY, 0.5, 0.4, 2).is_err());
        let eq = ContractionSpec::new(1.0, 0.5, 0.5, 2).unwrap();
        assert_eq!(eq.warnings().len(), 1);
        assert_eq!(eq.sigma_open, 1.0);
        assert_eq!(eq.with_alpha(2.0).sigma_open, 2.0);
    }

    #[test]
    fn certification_matrix_examples() {
        let chain = transition_matrix(&L_EXAMPLE, 2).unwrap();
        let t = certification_matrix(&[1.0; 5], &chain).unwrap();
        assert_eq!(&t, chain.pi());

        let chain = transition_matrix(&[0.5, 0.5], 1).unwrap();
        let t = certification_matrix(&[2.0, 0.5], &chain).unwrap();
        assert_eq!(t.to_rows(), vec![vec![1.0, 1.0], vec![0.25, 0.25]]);

        let chain = transition_matrix(&L_EXAMPLE, 2).unwrap();
        let spec = ContractionSpec::new(1.35, 0.9, 0.45, 2).unwrap();
        let t = certification_matrix(&gain_diagonal(&spec, 4).unwrap(), &chain).unwrap();
        let expected = [0.0, 0.315, 0.045, 0.045, 0.045];
        for (a, b) in t.row(3).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(certification_matrix(&[1.0; 4], &chain).is_err());
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&Matrix::identity(3), 1e-12).unwrap() - 1.0).abs() < 1e-12);
        let r = spectral_radius(&m(&[&[0.5, 0.5], &[0.25, 0.25]]), 1e-12).unwrap();
        assert!((r - 0.75).abs() < 1e-12);
        assert_eq!(spectral_radius(&Matrix::zeros(3, 3), 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn spectral_radius_periodic_and_reducible() {
        // permutation: eigenvalues on the unit circle
        let p = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        assert!((spectral_radius(&p, 1e-12).unwrap() - 1.0).abs() < 1e-10);
        // nilpotent
        let n = m(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(spectral_radius(&n, 1e-12).unwrap() < 1e-6);
        // block triangular, reducible
        let r = m(&[&[0.3, 0.0], &[0.7, 0.8]]);
        assert!((spectral_radius(&r, 1e-12).unwrap() - 0.8).abs() < 1e-10);
    }

    #[test]
    fn spectral_radius_rejects_bad_input() {
        assert!(matches!(
            spectral_radius(&m(&[&[0.5, -0.1], &[0.0, 0.2]]), 1e-12),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            spectral_radius(&Matrix::zeros(2, 3), 1e-12),
            Err(Error::Dimension(_))
        ));
        assert!(spectral_radius(&Matrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn gelfand_fallback_agrees() {
        let t = m(&[&[0.5, 0.5], &[0.25, 0.25]]);
        let g = gelfand_radius(&t, 1e-12).unwrap();
        assert!((g - 0.75).abs() < 1e-9, "{g}");
    }

    #[test]
    fn solve_certificate_examples() {
        assert_eq!(solve_certificate(&m(&[&[0.5]]), &[1.0]).unwrap(), vec![2.0]);
        assert_eq!(solve_certificate(&Matrix::zeros(2, 2), &[1.0, 3.0]).unwrap(), vec![1.0, 3.0]);
        match solve_certificate(&m(&[&[1.5]]), &[1.0]) {
            Err(Error::NotSchur { spectral_radius }) => assert!((spectral_radius - 1.5).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert!(solve_certificate(&m(&[&[0.5]]), &[0.0]).is_err());
        assert!(solve_certificate(&m(&[&[0.5]]), &[1.0, 1.0]).is_err());
    }

    #[test]
    fn solve_certificate_q1_residual() {
        let chain = transition_matrix(&L_EXAMPLE, 2).unwrap();
        let spec = ContractionSpec::new(1.3, 0.9, 0.45, 2).unwrap();
        let t = certification_matrix(&gain_diagonal(&spec, 4).unwrap(), &chain).unwrap();
        let nu = [1.0; 5];
        let zeta = solve_certificate(&t, &nu).unwrap();
        assert!(zeta.iter().all(|&z| z > 0.0));
        let tz = t.mul_vec(&zeta);
        let residual = zeta
            .iter()
            .zip(&tz)
            .zip(&nu)
            .map(|((z, tz), n)| (z - tz - n).abs())
            .fold(0.0, f64::max);
        assert!(residual < 1e-10, "{residual}");
    }

    #[test]
    fn decay_bound_examples() {
        let b = decay_bounds(&[2.0], &[1.0], 1.0, 1.0).unwrap();
        assert_eq!((b.xi, b.c1, b.c2), (0.5, 1.0, 2.0));
        let b = decay_bounds(&[2.0, 4.0], &[1.0, 1.0], 1.0, 1.0).unwrap();
        assert_eq!((b.xi, b.c1), (0.75, 2.0));
        let b = decay_bounds(&[4.0], &[1.0], 1.0, 1.0).unwrap();
        assert_eq!((b.xi, b.c1), (0.75, 1.0));
        assert!(decay_bounds(&[1.0], &[2.0], 1.0, 1.0).is_err());
        assert!(decay_bounds(&[1.0, -1.0], &[1.0, 1.0], 1.0, 1.0).is_err());
        assert_eq!(b.bound_at(0, 10.0), 10.0 + b.c2);
    }

    #[test]
    fn block_schur_examples() {
        let r = block_schur_g1(&m(&[&[0.5, 0.5], &[0.25, 0.25]]), 1e-12).unwrap();
        assert!((r.g1 - 1.0 / 3.0).abs() < 1e-15 && r.schur);
        let r = block_schur_g1(&m(&[&[0.5, 0.0], &[0.0, 0.5]]), 1e-12).unwrap();
        assert_eq!(r.g1, 0.5);
        assert!(r.schur);
        let r = block_schur_g1(&m(&[&[1.2, 0.0], &[0.0, 0.5]]), 1e-12).unwrap();
        assert!((r.g1 + 0.2).abs() < 1e-15 && !r.schur);
    }

    #[test]
    fn block_schur_hypotheses() {
        assert!(matches!(
            block_schur_g1(&m(&[&[0.1, 0.0], &[0.0, 1.0]]), 1e-12),
            Err(Error::Hypothesis(_))
        ));
        // row sums below 1 but trace(M^2) = 1.28
        let h = m(&[&[0.1, 0.0, 0.0], &[0.0, 0.8, 0.0], &[0.0, 0.0, 0.8]]);
        assert!(matches!(block_schur_g1(&h, 1e-12), Err(Error::Hypothesis(_))));
        assert!(block_schur_g1(&m(&[&[0.5]]), 1e-12).is_err());
    }

    #[test]
    fn psi_q1_value_and_boundary() {
        let spec = ContractionSpec::new(1.35, 0.9, 0.45, 2).unwrap();
        let psi = psi_a2(&spec, &L_EXAMPLE).unwrap();
        // 0.739286439645... * 1.35 from an independent dense solve
        assert!((psi - 0.998036693).abs() < 1e-8, "{psi}");
        let boundary = psi_a2(&spec.with_alpha(1.3527), &L_EXAMPLE).unwrap();
        assert!((boundary - 1.0).abs() < 1e-4, "{boundary}");
    }

    #[test]
    fn psi_all_dropouts_is_alpha() {
        let l = effective_availability(0.0, &[0.2; 5]).unwrap();
        let spec = ContractionSpec::new(1.7, 0.9, 0.45, 2).unwrap();
        assert!((psi_a2(&spec, &l).unwrap() - 1.7).abs() < 1e-15);
        assert!((omega_a1(1.7, 0.9, &l).unwrap() - 1.7).abs() < 1e-15);
    }

    #[test]
    fn psi_refusals() {
        let l = &L_EXAMPLE;
        let s = ContractionSpec::new(1.0, 1.0, 0.5, 2).unwrap();
        assert!(matches!(psi_a2(&s, l), Err(Error::ClosedFormUnavailable(_))));
        let s = ContractionSpec::new(1.0, 0.9, 0.5, 1).unwrap();
        assert!(matches!(psi_a2(&s, l), Err(Error::ClosedFormUnavailable(_))));
        assert!(matches!(omega_a1(1.0, 1.0, l), Err(Error::ClosedFormUnavailable(_))));
        let s = ContractionSpec::new(1.0, 0.9, 0.5, 5).unwrap();
        assert!(psi_a2(&s, l).is_err());
    }

    #[test]
    fn omega_examples() {
        let om = omega_a1(1.0, 0.5, &[0.5, 0.5]).unwrap();
        assert!((om - 2.0 / 3.0).abs() < 1e-15);
        let om = omega_a1(1.0, 0.9, &L_EXAMPLE).unwrap();
        assert!((1.0 / om - 1.1748).abs() < 1e-3, "{}", 1.0 / om);
    }

    #[test]
    fn critical_alpha_two_routes() {
        for (scheme, eta, rho2, expected) in [
            (Scheme::A2, 2, 0.45, 1.3527),
            (Scheme::A2, 3, 0.45, 1.266),
            (Scheme::A1, 1, 0.9, 1.175),
        ] {
            let cfg = CriticalAlphaConfig { scheme, eta, rho1: 0.9, rho2, l: L_EXAMPLE.to_vec() };
            let a = critical_alpha(&cfg).unwrap();
            assert!((a.closed - expected).abs() < 1e-3, "{scheme} {eta}: {a:?}");
            assert!(a.discrepancy() < 1e-6, "{a:?}");
        }
    }

    #[test]
    fn critical_alpha_without_dropout_mass() {
        let cfg = CriticalAlphaConfig {
            scheme: Scheme::A2,
            eta: 2,
            rho1: 0.9,
            rho2: 0.45,
            l: vec![0.0, 0.25, 0.25, 0.25, 0.25],
        };
        assert!(matches!(critical_alpha_closed(&cfg), Err(Error::Bracket(_))));
        assert!(matches!(critical_alpha_bisection(&cfg), Err(Error::Bracket(_))));
    }

    #[test]
    fn certify_q1_and_q3() {
        let channel = ChannelModel::uniform(0.5, 4).unwrap();
        let q1 = ContractionSpec::new(1.35, 0.9, 0.45, 2).unwrap();
        let report = certify(Scheme::A2, &q1, &channel, None).unwrap();
        assert!(report.is_certified());
        assert!(report.spectral_radius < 1.0);
        let cf = report.closed_form.unwrap();
        assert_eq!(cf.kind, ClosedFormKind::Psi);
        assert!((cf.value - 0.998).abs() < 1e-3);
        let b = report.bounds.unwrap();
        assert!(b.xi > 0.0 && b.xi < 1.0 && b.c1 >= 1.0 && b.c2 > 0.0);
        assert!(report.zeta.unwrap().iter().all(|&z| z > 0.0));

        let q3 = ContractionSpec::new(1.35, 0.9, 0.9, 1).unwrap();
        let report = certify(Scheme::A1, &q3, &channel, None).unwrap();
        assert!(!report.is_certified());
        assert_eq!(report.closed_form.unwrap().kind, ClosedFormKind::Omega);
        assert!(report.zeta.is_none() && report.bounds.is_none());

        assert!(certify(Scheme::B2, &q1, &channel, None).is_err());
    }

    #[test]
    fn certify_without_closed_form() {
        let channel = ChannelModel::uniform(0.9, 4).unwrap();
        let spec = ContractionSpec::new(0.5, 1.05, 0.2, 2).unwrap();
        let report = certify(Scheme::A2, &spec, &channel, None).unwrap();
        assert!(report.closed_form.is_none());
        assert!(report.is_certified(), "radius {}", report.spectral_radius);
    }

    #[test]
    fn a2_eta1_matches_a1() {
        let l = [0.3, 0.2, 0.1, 0.15, 0.25];
        let a2 = ContractionSpec::new(1.4, 0.6, 0.6, 1).unwrap();
        let t2 = certification_matrix(
            &gain_diagonal(&a2, 4).unwrap(),
            &transition_matrix(&l, 1).unwrap(),
        )
        .unwrap();
        let t1 = certification_matrix(
            &scheme_gains(Scheme::A1, &a2, 4).unwrap(),
            &transition_matrix(&l, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(t1, t2);
        assert_eq!(
            spectral_radius(&t1, 1e-12).unwrap(),
            spectral_radius(&t2, 1e-12).unwrap()
        );
    }
}
