//! Zeta-regularized action integrals, spectral zeta functions and spectral
//! determinants for `-d²/dq² + q^M + g q^N`, with the closed-form small-coupling
//! asymptotics and the numerics that check them.

pub mod action;
pub mod cli;
pub mod config;
pub mod error;
pub mod mellin;
pub mod ode;
pub mod potential;
pub mod predictions;
pub mod quadrature;
pub mod semiclassical;
pub mod special;
pub mod spectral;
pub mod spectrum;

pub use error::{Error, Result};
pub use potential::{AnomalyType, PotentialSpec};
pub use special::Jet1;
