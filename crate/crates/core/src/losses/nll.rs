//! Gaussian negative log-likelihood of the within-class residuals under the
//! factored precision, with the covariance shrunk by OAS.
//!
//! The loss (constants dropped) and its gradient in `L` are
//!
//! ```text
//! ℓ(L)  = ½ tr(S_α Σ⁻¹) − ½ log det Σ⁻¹,         Σ⁻¹ = LLᵀ + σ²I
//! ∇ℓ(L) = S_α L − L (σ² I_d + LᵀL)⁻¹
//! ```
//!
//! with `S_α = (1 − α) S + α μ I`, `μ = tr(S)/p`. The log-determinant uses
//! `det(LLᵀ + σ²I_p) = σ^{2(p−d)} det(σ²I_d + LᵀL)`, so only d × d systems are
//! factorized.
//!
//! OAS shrinkage, for `S` of size p estimated from `n` samples:
//!
//! ```text
//! α = min(1, [(1 − 2/p) tr(S²) + tr(S)²] / [(n + 1 − 2/p)(tr(S²) − tr(S)²/p)])
//! ```
//!
//! taking `α = 1` when the denominator is not positive (S ∝ I). The isotropic
//! precision is `σ² = max(ε, 1/(αμ))` with `ε = 1e-6`.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{spd_log_det, spd_solve, trace};
use crate::precision::MATERIALIZE_LIMIT;

pub const SIGMA2_FLOOR: f64 = 1e-6;

/// Above this p the pooled covariance is kept as residuals and never formed.
pub const DENSE_COVARIANCE_MAX_P: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceRepr {
    /// Dense for p ≤ [`DENSE_COVARIANCE_MAX_P`], residual-backed above.
    #[default]
    Auto,
    Dense,
    Residual,
}

/// Pooled within-class covariance `S = RᵀR / (n − K)` of residuals `R`.
#[derive(Debug, Clone)]
pub enum PooledCovariance {
    Dense(Array2<f64>),
    Residual { residuals: Array2<f64>, denom: f64 },
}

impl PooledCovariance {
    pub fn p(&self) -> usize {
        match self {
            PooledCovariance::Dense(s) => s.nrows(),
            PooledCovariance::Residual { residuals, .. } => residuals.ncols(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            PooledCovariance::Dense(s) => trace(s.view()),
            PooledCovariance::Residual { residuals, denom } => {
                residuals.iter().map(|v| v * v).sum::<f64>() / denom
            }
        }
    }

    /// `tr(S²) = ‖S‖_F²`, through whichever Gram matrix is smaller.
    pub fn trace_of_square(&self) -> f64 {
        let gram = match self {
            PooledCovariance::Dense(s) => return s.iter().map(|v| v * v).sum(),
            PooledCovariance::Residual { residuals, denom } => {
                let g = if residuals.nrows() <= residuals.ncols() {
                    residuals.dot(&residuals.t())
                } else {
                    residuals.t().dot(residuals)
                };
                g / *denom
            }
        };
        gram.iter().map(|v| v * v).sum()
    }

    /// `S M`.
    pub fn apply(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            PooledCovariance::Dense(s) => s.dot(&m),
            PooledCovariance::Residual { residuals, denom } => {
                residuals.t().dot(&residuals.dot(&m)) / *denom
            }
        }
    }

    pub fn to_dense(&self) -> Result<Array2<f64>> {
        match self {
            PooledCovariance::Dense(s) => Ok(s.clone()),
            PooledCovariance::Residual { residuals, denom } => {
                let p = residuals.ncols();
                if p > MATERIALIZE_LIMIT {
                    return Err(Error::SizeGuard {
                        p,
                        limit: MATERIALIZE_LIMIT,
                    });
                }
                Ok(residuals.t().dot(residuals) / *denom)
            }
        }
    }
}

/// Pooled covariance of `x_i − means[labels[i]]` with the `n − K` denominator.
pub fn pooled_within_covariance(
    x: ArrayView2<'_, f64>,
    means: ArrayView2<'_, f64>,
    labels: &[usize],
    repr: CovarianceRepr,
) -> Result<PooledCovariance> {
    let (n, p) = x.dim();
    let k = means.nrows();
    if n <= k {
        return Err(Error::InsufficientSamples { n, k });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "label vector length",
            expected: n,
            found: labels.len(),
        });
    }
    let mut residuals = x.to_owned();
    for (mut row, &l) in residuals.rows_mut().into_iter().zip(labels) {
        row -= &means.row(l);
    }
    let denom = (n - k) as f64;
    let dense = match repr {
        CovarianceRepr::Auto => p <= DENSE_COVARIANCE_MAX_P,
        CovarianceRepr::Dense => true,
        CovarianceRepr::Residual => false,
    };
    Ok(if dense {
        let mut s = residuals.t().dot(&residuals) / denom;
        for i in 0..p {
            for j in 0..i {
                let v = 0.5 * (s[[i, j]] + s[[j, i]]);
                s[[i, j]] = v;
                s[[j, i]] = v;
            }
        }
        PooledCovariance::Dense(s)
    } else {
        PooledCovariance::Residual { residuals, denom }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OasShrinkage {
    pub alpha: f64,
    pub mu_trace: f64,
    pub sigma2: f64,
}

/// OAS intensity from `tr(S)`, `tr(S²)`, dimension and sample count.
pub fn oas_alpha(trace_s: f64, trace_s2: f64, p: usize, n: usize) -> f64 {
    let p = p as f64;
    let n = n as f64;
    let num = (1.0 - 2.0 / p) * trace_s2 + trace_s * trace_s;
    let spread = trace_s2 - trace_s * trace_s / p;
    // An isotropic S (always the case at p = 1) is its own target; rounding
    // would otherwise leave a tiny, arbitrarily signed denominator.
    if spread <= 1e-12 * trace_s2 {
        return 1.0;
    }
    let den = (n + 1.0 - 2.0 / p) * spread;
    (num / den).clamp(0.0, 1.0)
}

pub fn oas_shrinkage(cov: &PooledCovariance, n: usize) -> OasShrinkage {
    let p = cov.p();
    let trace_s = cov.trace();
    let alpha = oas_alpha(trace_s, cov.trace_of_square(), p, n);
    let mu_trace = trace_s / p as f64;
    OasShrinkage {
        alpha,
        mu_trace,
        sigma2: (1.0 / (alpha * mu_trace)).max(SIGMA2_FLOOR),
    }
}

/// `S_α = (1 − α) S + α μ I`, applied lazily.
#[derive(Debug, Clone)]
pub struct ShrunkCovariance {
    pub within: PooledCovariance,
    pub alpha: f64,
    pub mu: f64,
}

impl ShrunkCovariance {
    pub fn new(within: PooledCovariance, shrinkage: &OasShrinkage) -> Self {
        Self {
            within,
            alpha: shrinkage.alpha,
            mu: shrinkage.mu_trace,
        }
    }

    pub fn p(&self) -> usize {
        self.within.p()
    }

    /// `S_α M = (1 − α)(S M) + α μ M`.
    pub fn apply(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = self.within.apply(m) * (1.0 - self.alpha);
        out.scaled_add(self.alpha * self.mu, &m);
        out
    }

    pub fn trace(&self) -> f64 {
        (1.0 - self.alpha) * self.within.trace() + self.alpha * self.mu * self.p() as f64
    }

    pub fn sigma_w(&self) -> Result<Array2<f64>> {
        self.within.to_dense()
    }

    pub fn sigma_w_alpha(&self) -> Result<Array2<f64>> {
        let mut s = self.within.to_dense()? * (1.0 - self.alpha);
        s.diag_mut().mapv_inplace(|v| v + self.alpha * self.mu);
        Ok(s)
    }
}

/// Loss and gradient together; the trainer needs both every iteration.
pub fn nll_loss_and_gradient(
    l: ArrayView2<'_, f64>,
    shrunk: &ShrunkCovariance,
    sigma2: f64,
) -> Result<(f64, Array2<f64>)> {
    let (p, d) = l.dim();
    if p != shrunk.p() {
        return Err(Error::DimensionMismatch {
            context: "precision factor rows",
            expected: shrunk.p(),
            found: p,
        });
    }
    if !(sigma2 > 0.0) {
        return Err(Error::SingularPrecision(sigma2));
    }
    let s_l = shrunk.apply(l);
    let mut inner = l.t().dot(&l);
    inner.diag_mut().mapv_inplace(|v| v + sigma2);

    let trace_term = (&s_l * &l).sum() + sigma2 * shrunk.trace();
    let log_det_inner = spd_log_det(inner.view()).ok_or(Error::NonFinite("log-determinant"))?;
    let log_det = (p - d) as f64 * sigma2.ln() + log_det_inner;
    let loss = 0.5 * trace_term - 0.5 * log_det;

    // L (σ²I + LᵀL)⁻¹ = ((σ²I + LᵀL)⁻¹ Lᵀ)ᵀ since the inner matrix is symmetric.
    let solved = spd_solve(inner.view(), l.t()).ok_or(Error::NonFinite("inner inverse"))?;
    let grad = s_l - solved.t();
    Ok((loss, grad))
}

pub fn nll_loss(l: ArrayView2<'_, f64>, shrunk: &ShrunkCovariance, sigma2: f64) -> Result<f64> {
    nll_loss_and_gradient(l, shrunk, sigma2).map(|(v, _)| v)
}

pub fn nll_gradient(
    l: ArrayView2<'_, f64>,
    shrunk: &ShrunkCovariance,
    sigma2: f64,
) -> Result<Array2<f64>> {
    nll_loss_and_gradient(l, shrunk, sigma2).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigen;
    use ndarray::array;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    fn scalar_shrunk(s: f64) -> ShrunkCovariance {
        ShrunkCovariance {
            within: PooledCovariance::Dense(array![[s]]),
            alpha: 0.0,
            mu: s,
        }
    }

    #[test]
    fn zero_residuals_give_zero_matrix() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [3.0, 0.0]];
        let m = array![[1.0, 2.0], [3.0, 0.0]];
        let s = pooled_within_covariance(x.view(), m.view(), &[0, 0, 1], CovarianceRepr::Dense)
            .unwrap()
            .to_dense()
            .unwrap();
        assert_eq!(s, Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn hand_evaluated_pooled_variance() {
        let x = array![[-1.0], [1.0], [-1.0], [1.0]];
        let m = array![[0.0], [0.0]];
        let s = pooled_within_covariance(x.view(), m.view(), &[0, 0, 1, 1], CovarianceRepr::Auto)
            .unwrap();
        assert_eq!(s.to_dense().unwrap(), array![[2.0]]);
    }

    #[test]
    fn pooled_matches_double_loop() {
        let mut seed = 11;
        let x = Array2::from_shape_fn((10, 3), |_| lcg(&mut seed));
        let labels = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0];
        let mut means = Array2::<f64>::zeros((3, 3));
        let mut counts = [0.0; 3];
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..3 {
                means[[l, j]] += x[[i, j]];
            }
            counts[l] += 1.0;
        }
        for k in 0..3 {
            for j in 0..3 {
                means[[k, j]] /= counts[k];
            }
        }
        let mut naive = Array2::<f64>::zeros((3, 3));
        for (i, &l) in labels.iter().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    naive[[a, b]] += (x[[i, a]] - means[[l, a]]) * (x[[i, b]] - means[[l, b]]);
                }
            }
        }
        naive /= 7.0;
        for repr in [CovarianceRepr::Dense, CovarianceRepr::Residual] {
            let s = pooled_within_covariance(x.view(), means.view(), &labels, repr)
                .unwrap()
                .to_dense()
                .unwrap();
            for (a, b) in s.iter().zip(naive.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_few_samples() {
        let x = array![[1.0], [2.0]];
        let m = array![[1.0], [2.0]];
        assert!(matches!(
            pooled_within_covariance(x.view(), m.view(), &[0, 1], CovarianceRepr::Auto),
            Err(Error::InsufficientSamples { n: 2, k: 2 })
        ));
    }

    #[test]
    fn isotropic_covariance_forces_full_shrinkage() {
        for p in [2usize, 5, 40] {
            let oas = oas_shrinkage(&PooledCovariance::Dense(Array2::eye(p)), 30);
            assert_eq!(oas.alpha, 1.0);
            assert_eq!(oas.mu_trace, 1.0);
            assert_eq!(oas.sigma2, 1.0);
        }
    }

    #[test]
    fn diag_one_three_at_n_ten() {
        // tr S = 4, tr S² = 10, p = 2: (1 − 2/p) = 0 so num = 16;
        // den = (10 + 1 − 1)(10 − 16/2) = 20; α = 0.8.
        let oas = oas_shrinkage(&PooledCovariance::Dense(array![[1.0, 0.0], [0.0, 3.0]]), 10);
        assert!((oas.alpha - 0.8).abs() < 1e-15);
        assert_eq!(oas.mu_trace, 2.0);
        assert!((oas.sigma2 - 1.0 / 1.6).abs() < 1e-15);
    }

    #[test]
    fn alpha_shrinks_with_more_samples() {
        let s = PooledCovariance::Dense(Array2::from_diag(&array![1.0, 2.0, 5.0, 9.0]));
        let a: Vec<f64> = [10, 100, 1000].iter().map(|&n| oas_shrinkage(&s, n).alpha).collect();
        assert!(a[0] > a[1] && a[1] > a[2], "{a:?}");
    }

    #[test]
    fn residual_traces_match_dense() {
        let mut seed = 3;
        let r = Array2::from_shape_fn((7, 12), |_| lcg(&mut seed));
        let res = PooledCovariance::Residual {
            residuals: r.clone(),
            denom: 5.0,
        };
        let dense = PooledCovariance::Dense(r.t().dot(&r) / 5.0);
        assert!((res.trace() - dense.trace()).abs() < 1e-12);
        assert!((res.trace_of_square() - dense.trace_of_square()).abs() < 1e-10);
        let tall = PooledCovariance::Residual {
            residuals: r.t().to_owned(),
            denom: 5.0,
        };
        let dense_tall = PooledCovariance::Dense(r.dot(&r.t()) / 5.0);
        assert!((tall.trace_of_square() - dense_tall.trace_of_square()).abs() < 1e-10);
    }

    #[test]
    fn scalar_loss_and_gradient() {
        let (s, ell, sigma2) = (2.0, 1.0, 0.5);
        let (loss, grad) =
            nll_loss_and_gradient(array![[ell]].view(), &scalar_shrunk(s), sigma2).unwrap();
        let q: f64 = ell * ell + sigma2;
        assert!((loss - (0.5 * s * q - 0.5 * q.ln())).abs() < 1e-15);
        assert!((grad[[0, 0]] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_factor_has_zero_gradient() {
        let sh = ShrunkCovariance {
            within: PooledCovariance::Dense(array![[2.0, 0.3], [0.3, 1.0]]),
            alpha: 0.3,
            mu: 1.5,
        };
        let g = nll_gradient(Array2::zeros((2, 1)).view(), &sh, 0.7).unwrap();
        assert_eq!(g, Array2::<f64>::zeros((2, 1)));
    }

    #[test]
    fn log_det_identity_against_explicit() {
        let mut seed = 8;
        let (p, d) = (5, 2);
        let l = Array2::from_shape_fn((p, d), |_| lcg(&mut seed));
        let a = Array2::from_shape_fn((p, p), |_| lcg(&mut seed));
        let s = a.t().dot(&a);
        let sh = ShrunkCovariance {
            within: PooledCovariance::Dense(s.clone()),
            alpha: 0.25,
            mu: trace(s.view()) / p as f64,
        };
        let sigma2 = 0.6;
        let mut prec = l.dot(&l.t());
        prec.diag_mut().mapv_inplace(|v| v + sigma2);
        let sa = sh.sigma_w_alpha().unwrap();
        let (vals, _) = symmetric_eigen(prec.view());
        let explicit = 0.5 * (&sa * &prec).sum() - 0.5 * vals.mapv(f64::ln).sum();
        let loss = nll_loss(l.view(), &sh, sigma2).unwrap();
        assert!((loss - explicit).abs() < 1e-10);
    }

    #[test]
    fn zero_sigma2_is_rejected() {
        let err = nll_loss(array![[1.0]].view(), &scalar_shrunk(1.0), 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularPrecision(_)));
    }

    #[test]
    fn shrunk_apply_matches_dense() {
        let sh = ShrunkCovariance {
            within: PooledCovariance::Dense(array![[2.0, 0.5], [0.5, 1.0]]),
            alpha: 0.4,
            mu: 1.5,
        };
        let m = array![[1.0, -2.0], [0.5, 3.0]];
        let a = sh.apply(m.view());
        let b = sh.sigma_w_alpha().unwrap().dot(&m);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
        let expected_trace = 0.6 * 3.0 + 0.4 * 1.5 * 2.0;
        assert!((sh.trace() - expected_trace).abs() < 1e-14);
    }
}
