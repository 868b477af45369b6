//! Numerics for localization of low-lying states of magnetic Schrodinger
//! operators H = s(-i grad - A)^2 + V on 1D/2D boxes with Dirichlet walls:
//! landscape functions, smoothed (local) landscapes, monitor-function eigenpair
//! search, and Feynman-Kac Monte Carlo bounds.
//!
//! Everything is deterministic given the configured seeds: model weights and
//! Monte Carlo paths draw from counter-based per-index streams, and parallel
//! reductions have a fixed shape, so results are bit-identical across thread
//! counts and reruns.

pub mod analytic;
pub mod banded;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod io;
pub mod landscape;
pub mod model;
pub mod operator;
pub mod pathint;
pub mod rng;

pub use error::{CoreError, Result};
