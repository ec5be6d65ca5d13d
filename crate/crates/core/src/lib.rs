//! Analytic training of 2-layer quadratic convolutional neural networks.
//!
//! A network with activation `σ(z) = a·z² + b·z + c`, filters of length `f`
//! sliding with stride 1 over an input of length `n`, and a linear second
//! layer has the input-output map
//!
//! ```text
//! ŷ(x) = a·xᵀZ̄¹x + b·Z̄²ᵀx + c·trace(Z̄¹)
//! ```
//!
//! where `Z̄¹` is symmetric and vanishes outside the band `|r − c| < f`. The
//! output is linear in the band entries of `Z̄¹` and in `Z̄²`, so the globally
//! optimal weights come from one least-squares solve.
//!
//! - [`quadcore`]: activation parameters, convolution geometry, band indexing.
//! - [`regressor`]: datasets and the least-squares regressor matrix.
//! - [`solver`]: (ridge) least squares with a pseudoinverse fallback.
//! - [`model`]: the banded model, prediction, sensitivity, model files.
//! - [`oracle`]: brute-force references for cross-checking.
//! - [`dataio`]: CSV ingestion, NARX and block windowing, splits, synthetic data.
//! - [`pipeline`]: end-to-end fit and evaluation.
//! - [`verify`]: randomized oracle suites.

pub mod dataio;
pub mod error;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod quadcore;
pub mod regressor;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use model::{reconstruct, QuadraticModel};
pub use pipeline::{fit, Fit};
pub use quadcore::{band_counts, vecf, ActivationParams, BandCounts, BandIndexMap, ConvSpec};
pub use regressor::{build_regressor, Dataset, RegressorMatrix};
pub use solver::{solve_ls, solve_ridge, SolveReport, SolveStrategy, WeightVector};
