//! Certification and simulation of event-triggered control over shared,
//! intermittently available processors.
//!
//! A controller either runs a cheap coarse law or, when enough processing
//! units are free, an expensive fine law, and buffers predicted inputs for
//! steps when the processor is busy or the channel drops the packet. The
//! buffer content evolves as a Markov chain; stability is certified by the
//! spectral radius of the gain-weighted transition matrix.
//!
//! - [`markov`]: channel model and buffer transition matrix
//! - [`stability`]: certification matrix, spectral radius, closed forms,
//!   decay bounds and the critical open-loop growth
//! - [`schemes`]: buffer semantics of the four control schemes
//! - [`simulate`]: closed-loop and Monte Carlo simulation
//! - [`sweep`]: stability boundary over a contraction grid
//! - [`config`], [`output`], [`selftest`]: run configuration, CSV and reports,
//!   built-in acceptance checks

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod example1;
pub mod linalg;
pub mod markov;
pub mod output;
pub mod schemes;
pub mod selftest;
pub mod simulate;
pub mod stability;
pub mod sweep;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use markov::{buffer_chain, effective_availability, transition_matrix, BufferChain, BufferState, ChannelModel};
pub use schemes::{Buffer, ControlLaw, Controller, Gamma, Scheme, StepEnv};
pub use simulate::{monte_carlo, simulate_trajectory, MonteCarloResult, PlantModel, SchemeConfig, Trajectory};
pub use stability::{
    certify, critical_alpha, spectral_radius, CertificationReport, ContractionSpec, CriticalAlpha,
    CriticalAlphaConfig, Verdict,
};
pub use sweep::{boundary_curve, BoundaryPoint, SweepSpec};
