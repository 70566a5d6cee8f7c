//! The two training objectives and their analytic gradients in `L`.

pub mod ce;
pub mod nll;
pub mod reference;

pub use ce::{ce_gradient, ce_loss, CeWorkspace};
pub use nll::{
    nll_gradient, nll_loss, nll_loss_and_gradient, oas_alpha, oas_shrinkage,
    pooled_within_covariance, CovarianceRepr, OasShrinkage, PooledCovariance, ShrunkCovariance,
    SIGMA2_FLOOR,
};
