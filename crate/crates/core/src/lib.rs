//! Stationary states of a truncated stochastic nonlinear Schrodinger
//! equation whose Fourier modes are thermostatted by Langevin baths and
//! amplitude-capped with reflecting or wave-breaking boundary rules.
//!
//! The crate has two halves. The simulation half ([`lattice`], [`dynamics`],
//! [`estat`]) integrates the capped Langevin system and estimates its
//! stationary histograms, with a Metropolis Gibbs sampler as the
//! reflecting-case oracle. The theory half ([`specfun`], [`meanfield`])
//! solves the large-system mean-field self-consistency equation, selects
//! branches by free energy, scans the coupling for the low/high-field
//! transition, and probes the infrared behavior of 1/k cap profiles.
//!
//! Trajectory ensembles, Monte Carlo chains and parameter sweeps fan out
//! over rayon when the `parallel` feature (default) is enabled; without it
//! the same code runs sequentially.

pub mod csvio;
pub mod dynamics;
pub mod error;
pub mod estat;
pub mod exec;
pub mod lattice;
pub mod meanfield;
pub mod nonlinear;
pub mod quad;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
