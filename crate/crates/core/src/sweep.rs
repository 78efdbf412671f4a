//! Stability-guarantee boundaries `alpha*(rho1)` at fixed `eps = rho2 / rho1`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::markov::ChannelModel;
use crate::schemes::Scheme;
use crate::stability::{critical_alpha, CriticalAlphaConfig};

/// `rho1 = 0.05, 0.10, ..., 0.95`.
pub fn default_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub scheme: Scheme,
    pub eta: usize,
    pub epsilon: f64,
    pub rho1_grid: Vec<f64>,
    pub channel: ChannelModel,
}

impl SweepSpec {
    pub fn new(
        scheme: Scheme,
        eta: usize,
        epsilon: f64,
        rho1_grid: Vec<f64>,
        channel: ChannelModel,
    ) -> Result<Self> {
        if !scheme.is_buffered() {
            return Err(Error::Parameter {
                name: "scheme",
                reason: format!("{scheme} has no stability boundary; sweep A1 or A2"),
            });
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Parameter {
                name: "epsilon",
                reason: format!("{epsilon} is outside [0, 1]"),
            });
        }
        if rho1_grid.is_empty() {
            return Err(Error::Parameter { name: "rho1_grid", reason: "grid is empty".into() });
        }
        if rho1_grid.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return Err(Error::Parameter {
                name: "rho1_grid",
                reason: "grid points must lie strictly inside (0, 1)".into(),
            });
        }
        if rho1_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter {
                name: "rho1_grid",
                reason: "grid must be strictly ascending".into(),
            });
        }
        let eta = if scheme == Scheme::A1 { 1 } else { eta };
        if eta == 0 || eta > channel.n_max() {
            return Err(Error::Parameter {
                name: "eta",
                reason: format!("eta = {eta} must lie in 1..={}", channel.n_max()),
            });
        }
        Ok(Self { scheme, eta, epsilon, rho1_grid, channel })
    }

    fn config(&self, rho1: f64) -> CriticalAlphaConfig {
        let rho2 = if self.scheme == Scheme::A1 { rho1 } else { self.epsilon * rho1 };
        CriticalAlphaConfig {
            scheme: self.scheme,
            eta: self.eta,
            rho1,
            rho2,
            l: self.channel.l().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub rho1: f64,
    pub alpha_star_closed: f64,
    pub alpha_star_spectral: f64,
}

impl BoundaryPoint {
    pub fn discrepancy(&self) -> f64 {
        (self.alpha_star_closed - self.alpha_star_spectral).abs()
    }
}

/// `alpha*` at every grid point by both routes, in grid order.
pub fn boundary_curve(spec: &SweepSpec) -> Result<Vec<BoundaryPoint>> {
    spec.rho1_grid
        .par_iter()
        .map(|&rho1| {
            let a = critical_alpha(&spec.config(rho1))?;
            Ok(BoundaryPoint { rho1, alpha_star_closed: a.closed, alpha_star_spectral: a.spectral })
        })
        .collect()
}
