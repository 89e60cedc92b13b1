//! Monte Carlo simulation and verification of local hidden-variable models
//! that reproduce (and in one mixture exceed) the spin-singlet correlations
//! using nothing but synchronized watches shared before the run.

pub mod config;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod models;
pub mod optimizer;
pub mod protocol;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod watches;

pub use error::{Result, SimError};
pub use geometry::{dot, sample_uniform_sphere, sign, Outcome, UnitVector};
pub use models::{HiddenState, ModelKind, SettingsPair};
pub use rng::RandomStream;
