//! Sparse principal component analysis: the restarted truncated power method,
//! the combinatorial baselines, adversarial covariance constructions and an
//! experiment harness.

pub mod algos;
pub mod counterexamples;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod models;

pub use algos::{CandidateVector, Mode, RtpmConfig};
pub use error::{ErrorClass, Result, SpcaError};
pub use linalg::{EigPair, OrthonormalBasis, SymMatrix};
pub use models::{CovOperator, Dataset, PlantedInstance};
