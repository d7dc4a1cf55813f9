//! Fluctuation theory and Monte Carlo for Lévy insurance risk processes near ruin.
//!
//! The claim-surplus process is `X_t = Σ claims − c·t`; ruin at reserve `u`
//! happens at `τ(u) = inf{t : X_t > u}`. The crate computes ladder-process
//! quantities and the limiting laws of the process conditioned on ruin as
//! `u → ∞`, and checks each against exact path simulation.
//!
//! Modules follow the flow of a computation:
//! [`risk_model`] → [`ladder_calculus`] → [`limit_laws`], with [`path_sim`]
//! and [`estimator`] providing the Monte Carlo side and [`cli`] tying them
//! together.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod ladder_calculus;
pub mod limit_laws;
pub mod numerics;
pub mod path_sim;
pub mod risk_model;
pub mod rng;

pub use error::{Error, Result};
