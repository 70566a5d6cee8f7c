//! Closed-form comparison classifiers: classical LDA, Ledoit-Wolf LDA and
//! Gaussian naive Bayes.
//!
//! Both LDA variants work in the same within-class standardized coordinates
//! as the main model (features divided by the residual standard deviation)
//! and store their precision there as
//!
//! ```text
//! P = s·I + V diag(c) Vᵀ
//! ```
//!
//! where `V` holds the retained eigenvectors of the pooled covariance
//! `Σ̂ = RᵀR / (n − K)`. Nothing p × p is formed when p > n: the eigenvectors
//! come from the n × n Gram matrix.
//!
//! * Classical LDA uses the pseudo-inverse: `s = 0`, `c = 1/λ` for every
//!   eigenvalue above `1e-8 · tr(Σ̂)/p`. For two classes this reproduces the
//!   SVD solver of common LDA implementations.
//! * LW-LDA inverts `(1 − γ)Σ̂ + γνI` with `ν = tr(Σ̂)/p`, so
//!   `s = 1/(γν)` and `c = 1/((1 − γ)λ + γν) − s`.
//!
//! The Ledoit-Wolf intensity is the usual plug-in computed on the
//! standardized residuals `X` (n × p, normalized by n):
//!
//! ```text
//! m     = tr(XᵀX/n) / p
//! δ     = (‖XᵀX‖²_F / n² − p m²) / p
//! β     = (Σᵢ ‖xᵢ‖⁴ / n − ‖XᵀX‖²_F / n²) / (p n)
//! γ     = min(β, δ) / δ        (γ = 1 when δ = 0), clamped to [0, 1]
//! ```
//!
//! Naive Bayes keeps per-class, per-feature variances (n_k denominator,
//! floored at 1e-9) in raw coordinates.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::data::{estimate_class_stats, Dataset, FittedStandardizer, Standardized};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::precision::MATERIALIZE_LIMIT;

/// Relative eigenvalue cutoff for the pseudo-inverse.
pub const EIGEN_FLOOR: f64 = 1e-8;
/// Variance floor for naive Bayes.
pub const NB_VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    ClassicLda,
    LwLda,
    NaiveBayes,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::ClassicLda => "LDA",
            BaselineKind::LwLda => "LW_LDA",
            BaselineKind::NaiveBayes => "NB",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LDA" => Ok(BaselineKind::ClassicLda),
            "LW_LDA" | "LW-LDA" | "LWLDA" => Ok(BaselineKind::LwLda),
            "NB" => Ok(BaselineKind::NaiveBayes),
            other => Err(Error::InvalidArgument(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Precision `s·I + V diag(c) Vᵀ` in standardized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPrecision {
    pub standardizer: FittedStandardizer,
    pub basis: Array2<f64>,
    pub coef: Array1<f64>,
    pub iso: f64,
    /// Ledoit-Wolf intensity, when applicable.
    pub gamma: Option<f64>,
}

impl SpectralPrecision {
    /// `P m` for a p × k matrix `m`.
    fn apply(&self, m: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut proj = self.basis.t().dot(&m);
        for (mut row, &c) in proj.rows_mut().into_iter().zip(self.coef.iter()) {
            row *= c;
        }
        let mut out = self.basis.dot(&proj);
        if self.iso != 0.0 {
            out.scaled_add(self.iso, &m);
        }
        out
    }

    /// Explicit p × p precision in standardized coordinates.
    pub fn materialize(&self) -> Result<Array2<f64>> {
        let p = self.basis.nrows();
        if p > MATERIALIZE_LIMIT {
            return Err(Error::SizeGuard {
                p,
                limit: MATERIALIZE_LIMIT,
            });
        }
        Ok(self.apply(Array2::eye(p).view()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaselineParams {
    Lda(SpectralPrecision),
    NaiveBayes { variances: Array2<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBaselineModel {
    pub kind: BaselineKind,
    /// Class means in raw coordinates, K × p.
    pub means: Array2<f64>,
    pub priors: Array1<f64>,
    pub params: BaselineParams,
    pub label_table: Vec<i64>,
}

impl GaussianBaselineModel {
    pub fn p(&self) -> usize {
        self.means.ncols()
    }

    pub fn score(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let p = self.p();
        if x.ncols() != p {
            return Err(Error::DimensionMismatch {
                context: "feature count",
                expected: p,
                found: x.ncols(),
            });
        }
        let log_priors = self.priors.mapv(f64::ln);
        match &self.params {
            BaselineParams::Lda(prec) => {
                let xs = prec.standardizer.transform(x)?;
                let ms = prec.standardizer.transform(self.means.view())?;
                let pm = prec.apply(ms.t());
                let quad = (&ms * &pm.t()).sum_axis(Axis(1));
                let mut scores = xs.dot(&pm);
                scores += &(&log_priors - &(0.5 * quad));
                Ok(scores)
            }
            BaselineParams::NaiveBayes { variances } => {
                let k = self.means.nrows();
                let mut scores = Array2::<f64>::zeros((x.nrows(), k));
                for c in 0..k {
                    let mu = self.means.row(c);
                    let var = variances.row(c);
                    let norm: f64 = var
                        .iter()
                        .map(|v| (2.0 * std::f64::consts::PI * v).ln())
                        .sum::<f64>();
                    for (i, row) in x.rows().into_iter().enumerate() {
                        let mut q = 0.0;
                        for j in 0..p {
                            let d = row[j] - mu[j];
                            q += d * d / var[j];
                        }
                        scores[[i, c]] = log_priors[c] - 0.5 * (norm + q);
                    }
                }
                Ok(scores)
            }
        }
    }
}

impl Classifier for GaussianBaselineModel {
    fn scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.score(x)
    }

    fn label_table(&self) -> &[i64] {
        &self.label_table
    }
}

/// Retained eigenpairs of `RᵀR / denom` via the smaller Gram matrix.
/// Eigenvalues not above `EIGEN_FLOOR · tr/p` are dropped.
fn pooled_spectrum(r: &Array2<f64>, denom: f64) -> (Array1<f64>, Array2<f64>, f64) {
    let (n, p) = r.dim();
    let trace = r.iter().map(|v| v * v).sum::<f64>() / denom;
    let tol = EIGEN_FLOOR * trace / p as f64;
    if p <= n {
        let c = r.t().dot(r) / denom;
        let (vals, vecs) = symmetric_eigen(c.view());
        let keep: Vec<usize> = (0..p).filter(|&i| vals[i] > tol).collect();
        let lam = Array1::from_iter(keep.iter().map(|&i| vals[i]));
        let v = Array2::from_shape_fn((p, keep.len()), |(a, b)| vecs[[a, keep[b]]]);
        (lam, v, trace)
    } else {
        let g = r.dot(&r.t()) / denom;
        let (vals, u) = symmetric_eigen(g.view());
        let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > tol).collect();
        let lam = Array1::from_iter(keep.iter().map(|&i| vals[i]));
        let mut v = Array2::<f64>::zeros((p, keep.len()));
        for (b, &i) in keep.iter().enumerate() {
            let col = r.t().dot(&u.column(i)) / (denom * vals[i]).sqrt();
            v.column_mut(b).assign(&col);
        }
        (lam, v, trace)
    }
}

fn prepare(data: &Dataset) -> Result<(Standardized, Array2<f64>, f64)> {
    let (n, k) = (data.n(), data.n_classes());
    if n <= k {
        return Err(Error::InsufficientSamples { n, k });
    }
    let std = Standardized::from_dataset(data)?;
    let r = std.residuals();
    Ok((std, r, (n - k) as f64))
}

fn raw_means(std: &Standardized) -> Result<Array2<f64>> {
    std.standardizer.inverse_transform(std.means.view())
}

pub fn fit_classic_lda(data: &Dataset) -> Result<GaussianBaselineModel> {
    let (std, r, denom) = prepare(data)?;
    let (lam, basis, _) = pooled_spectrum(&r, denom);
    let coef = lam.mapv(|l| 1.0 / l);
    Ok(GaussianBaselineModel {
        kind: BaselineKind::ClassicLda,
        means: raw_means(&std)?,
        priors: std.priors.clone(),
        params: BaselineParams::Lda(SpectralPrecision {
            standardizer: std.standardizer,
            basis,
            coef,
            iso: 0.0,
            gamma: None,
        }),
        label_table: data.label_table().to_vec(),
    })
}

/// Ledoit-Wolf intensity for already-centered rows `x`, clamped to [0, 1].
pub fn ledoit_wolf_gamma(x: ArrayView2<'_, f64>) -> f64 {
    let (n, p) = x.dim();
    let (nf, pf) = (n as f64, p as f64);
    let row_sq: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r)).collect();
    let m = row_sq.iter().sum::<f64>() / nf / pf;
    let gram_sq = if p <= n {
        x.t().dot(&x).iter().map(|v| v * v).sum::<f64>()
    } else {
        x.dot(&x.t()).iter().map(|v| v * v).sum::<f64>()
    };
    let delta_ = gram_sq / (nf * nf);
    let beta_ = row_sq.iter().map(|v| v * v).sum::<f64>();
    let delta = (delta_ - pf * m * m) / pf;
    let beta = ((beta_ / nf - delta_) / (pf * nf)).min(delta);
    if !(delta > 0.0) {
        return 1.0;
    }
    (beta / delta).clamp(0.0, 1.0)
}

pub fn fit_lw_lda(data: &Dataset) -> Result<GaussianBaselineModel> {
    fit_lw_lda_with(data, None)
}

/// LW-LDA with an optional fixed intensity in place of the plug-in.
pub fn fit_lw_lda_with(data: &Dataset, gamma: Option<f64>) -> Result<GaussianBaselineModel> {
    let (std, r, denom) = prepare(data)?;
    let p = r.ncols();
    let gamma = match gamma {
        Some(g) if (0.0..=1.0).contains(&g) => g,
        Some(g) => return Err(Error::InvalidArgument(format!("gamma {g} outside [0, 1]"))),
        None => ledoit_wolf_gamma(r.view()),
    };
    let (lam, basis, trace) = pooled_spectrum(&r, denom);
    let nu = trace / p as f64;
    let (iso, coef) = if gamma > 0.0 {
        let iso = 1.0 / (gamma * nu);
        (iso, lam.mapv(|l| 1.0 / ((1.0 - gamma) * l + gamma * nu) - iso))
    } else {
        (0.0, lam.mapv(|l| 1.0 / l))
    };
    Ok(GaussianBaselineModel {
        kind: BaselineKind::LwLda,
        means: raw_means(&std)?,
        priors: std.priors.clone(),
        params: BaselineParams::Lda(SpectralPrecision {
            standardizer: std.standardizer,
            basis,
            coef,
            iso,
            gamma: Some(gamma),
        }),
        label_table: data.label_table().to_vec(),
    })
}

pub fn fit_naive_bayes(data: &Dataset) -> Result<GaussianBaselineModel> {
    let stats = estimate_class_stats(data)?;
    let (k, p) = stats.means.dim();
    let mut variances = Array2::<f64>::zeros((k, p));
    let x = data.features();
    for (row, &l) in x.rows().into_iter().zip(data.labels()) {
        let mut acc = variances.slice_mut(s![l, ..]);
        for j in 0..p {
            let d = row[j] - stats.means[[l, j]];
            acc[j] += d * d;
        }
    }
    for (mut row, &count) in variances.rows_mut().into_iter().zip(&stats.counts) {
        row.mapv_inplace(|v| (v / count as f64).max(NB_VARIANCE_FLOOR));
    }
    Ok(GaussianBaselineModel {
        kind: BaselineKind::NaiveBayes,
        means: stats.means,
        priors: stats.priors,
        params: BaselineParams::NaiveBayes { variances },
        label_table: data.label_table().to_vec(),
    })
}

pub fn fit_baseline(kind: BaselineKind, data: &Dataset) -> Result<GaussianBaselineModel> {
    match kind {
        BaselineKind::ClassicLda => fit_classic_lda(data),
        BaselineKind::LwLda => fit_lw_lda(data),
        BaselineKind::NaiveBayes => fit_naive_bayes(data),
    }
}
