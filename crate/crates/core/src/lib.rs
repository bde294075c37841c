//! Coded distributed matrix multiplication with straggling and failing
//! workers.
//!
//! - [`codes`]: repetition, MDS, polynomial, MatDot and product codes
//!   (encode, decodability, decode).
//! - [`delay`]: shifted-scaled exponential delays and order statistics.
//! - [`analysis`]: closed-form computing time, storage, load and success
//!   probability for each scheme.
//! - [`selector`]: adaptive per-round code selection under storage and
//!   reliability constraints.
//! - [`sim`]: seeded Monte Carlo simulation of master/worker rounds.

pub mod analysis;
pub mod codes;
pub mod delay;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod selector;
pub mod sim;

pub use codes::{CodeChoice, CompletionPattern, Scheme};
pub use error::{Error, Result};
pub use matrix::DenseMatrix;
