//! steindom: exact risk analysis for generator-induced shrinkage estimators
//! of a multivariate normal mean.
//!
//! The library builds shrinkage factors from monotone generator functions,
//! evaluates their exact quadratic risk by Poisson-mixture quadrature,
//! checks the dominance conditions over the James-Stein estimator, and
//! classifies parameter tables into individually-verified, uniformly-covered
//! and negative cells. A seeded Monte Carlo module cross-validates the
//! quadrature independently.

pub mod asymptotics;
pub mod dominance;
pub mod error;
pub mod generators;
pub mod montecarlo;
pub mod numerics;
pub mod parallel;
pub mod risk;
pub mod shrinkage;

pub use error::{Error, Result};
pub use generators::GeneratorSpec;
pub use numerics::{QuadConfig, RiskReport};
pub use shrinkage::{ShrinkageKind, ShrinkageSpec};
