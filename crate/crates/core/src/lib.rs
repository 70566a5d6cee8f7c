//! Low-rank discriminant analysis with a data-routed training objective.
//!
//! The precision matrix is parameterized as `Σ⁻¹ = L Lᵀ + σ² I` with `L` of
//! size p × d. A pair of cheap diagnostics (mean-shift sparsity and excess
//! kurtosis) decides whether `L` is trained by cross-entropy or by a shrunk
//! Gaussian likelihood. See [`trainer::fit`].

pub mod baselines;
pub mod classifier;
pub mod csvio;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod linalg;
pub mod losses;
pub mod model_file;
pub mod precision;
pub mod rng;
pub mod simgen;
pub mod trainer;

pub use classifier::Classifier;
pub use data::{Dataset, FittedStandardizer, Standardized};
pub use diagnostics::{Diagnostics, LossPath, Thresholds};
pub use error::{Error, Result};
pub use precision::{PrecisionFactor, TrainedModel};
pub use trainer::{fit, FitConfig, FitReport, LossChoice};
