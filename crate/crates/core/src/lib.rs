//! Distributed composite stochastic mirror descent under sub-Weibull gradient noise.
//!
//! A network of `m` agents cooperatively minimizes
//! `F(x) = Σ_i [f_i(x) + ψ_i(x)]` over a closed convex set `X`. Each agent
//! mixes its neighbours' states with a doubly stochastic matrix `W_t` and then
//! takes a regularized mirror-descent step with a noisy subgradient whose
//! dual-norm error is sub-Weibull. The crate provides:
//!
//! - [`graph`]: time-varying doubly stochastic communication schedules and
//!   transition-matrix mixing bounds;
//! - [`geometry`]: Bregman geometries (Euclidean box, entropic simplex) and
//!   closed-form regularized mirror steps;
//! - [`noise`]: sub-Weibull noise samplers and Orlicz-norm diagnostics;
//! - [`problem`]: composite regression instances and a centralized reference
//!   solver;
//! - [`engine`]: the synchronous iteration and its ergodic outputs;
//! - [`metrics`]: agent quantiles, trial aggregation and rate fits;
//! - [`cli`]: experiment presets, configuration files and artifact writers.

pub mod cli;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod metrics;
pub mod noise;
pub mod problem;
pub mod rng;

mod linalg;

pub use error::{Error, Result};
