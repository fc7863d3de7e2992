//! Robust scatter and location estimation through proper-scoring-rule GANs.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical piece:
//! dense symmetric linear algebra, the Beta family of scoring rules, samplers
//! for Gaussian, elliptical and contaminated data, hand-written feed-forward
//! networks with exact gradients, the alternating SGD trainer, and classical
//! baselines (Tyler's M-estimator, scaled Kendall's tau, a 1-D depth oracle).
//!
//! File formats, the benchmark harness and the CLI live in `scoregan-bench`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod baselines;
pub mod distributions;
mod error;
pub mod gan;
pub mod linalg;
mod math;
pub mod nets;
pub mod rng;
pub mod scoring;
pub mod special;

pub use error::{Error, Result};
pub use linalg::{Matrix, SymMatrix};
pub use scoring::ScoringRule;
