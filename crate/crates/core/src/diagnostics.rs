//! Structural diagnostics that route training to the cross-entropy or the
//! Gaussian-likelihood loss.
//!
//! Signal sparsity: with between-class variance per feature
//! `b_j = Σ_k π_k (μ̃_kj − mean_j(X̃))²`, the effective signal dimension is
//! `D_eff = (Σ b_j)² / Σ b_j²` and the sparsity ratio `r = D_eff / p`. When
//! every `b_j` is zero there is no signal and `D_eff = p`, `r = 1`.
//!
//! Kurtosis gap: `κ = mean_j |e_j − 3|` where `e_j = m4 / m2²` is the Pearson
//! kurtosis (population moments) of residual column `j`. A zero-variance
//! column counts as `e_j = 3`.
//!
//! Both run in O(np) time and O(p) extra memory.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Standardized;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossPath {
    #[serde(rename = "CE")]
    CrossEntropy,
    #[serde(rename = "NLL")]
    Nll,
}

impl fmt::Display for LossPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossPath::CrossEntropy => "CE",
            LossPath::Nll => "NLL",
        })
    }
}

impl FromStr for LossPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CE" => Ok(LossPath::CrossEntropy),
            "NLL" => Ok(LossPath::Nll),
            other => Err(Error::InvalidArgument(format!("unknown loss path {other:?}"))),
        }
    }
}

/// Routing thresholds. CE is chosen iff `r < sparsity` or `κ > kurtosis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub sparsity: f64,
    pub kurtosis: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            sparsity: 0.10,
            kurtosis: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub between_var: Array1<f64>,
    pub d_eff: f64,
    pub sparsity: f64,
    pub kurtosis_gap: f64,
    pub per_feature_kurtosis: Array1<f64>,
    pub selected_loss: LossPath,
}

/// Returns `(b, D_eff, r)`.
pub fn compute_sparsity(
    x: ArrayView2<'_, f64>,
    means: ArrayView2<'_, f64>,
    priors: ArrayView1<'_, f64>,
) -> (Array1<f64>, f64, f64) {
    let p = x.ncols();
    let grand = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(p));
    let mut b = Array1::<f64>::zeros(p);
    for (mu, &pi) in means.rows().into_iter().zip(priors.iter()) {
        for j in 0..p {
            let diff = mu[j] - grand[j];
            b[j] += pi * diff * diff;
        }
    }
    let (d_eff, sparsity) = effective_dimension(b.view());
    (b, d_eff, sparsity)
}

/// `(D_eff, D_eff / p)` for a between-class variance vector.
pub fn effective_dimension(b: ArrayView1<'_, f64>) -> (f64, f64) {
    let p = b.len() as f64;
    let sum: f64 = b.sum();
    let sum_sq: f64 = b.iter().map(|v| v * v).sum();
    if sum_sq > 0.0 {
        let d_eff = sum * sum / sum_sq;
        (d_eff, d_eff / p)
    } else {
        (p, 1.0)
    }
}

/// Returns `(e, κ)`; residuals are recomputed as `x̃_i − μ̃_{y_i}`.
pub fn compute_kurtosis_gap(
    x: ArrayView2<'_, f64>,
    means: ArrayView2<'_, f64>,
    labels: &[usize],
) -> (Array1<f64>, f64) {
    let (n, p) = x.dim();
    let nf = n as f64;
    let mut mean = Array1::<f64>::zeros(p);
    for (row, &l) in x.rows().into_iter().zip(labels) {
        let mu = means.row(l);
        for j in 0..p {
            mean[j] += row[j] - mu[j];
        }
    }
    mean /= nf;

    let mut m2 = Array1::<f64>::zeros(p);
    let mut m4 = Array1::<f64>::zeros(p);
    for (row, &l) in x.rows().into_iter().zip(labels) {
        let mu = means.row(l);
        for j in 0..p {
            let r = row[j] - mu[j] - mean[j];
            let r2 = r * r;
            m2[j] += r2;
            m4[j] += r2 * r2;
        }
    }
    let e = Array1::from_shape_fn(p, |j| {
        let v2 = m2[j] / nf;
        if v2 > 0.0 && v2.is_finite() {
            (m4[j] / nf) / (v2 * v2)
        } else {
            3.0
        }
    });
    let gap = e.iter().map(|v| (v - 3.0).abs()).sum::<f64>() / p as f64;
    (e, gap)
}

pub fn select_loss(sparsity: f64, kurtosis_gap: f64, thresholds: &Thresholds) -> LossPath {
    if sparsity < thresholds.sparsity || kurtosis_gap > thresholds.kurtosis {
        LossPath::CrossEntropy
    } else {
        LossPath::Nll
    }
}

pub fn diagnose(data: &Standardized, thresholds: &Thresholds) -> Diagnostics {
    let (between_var, d_eff, sparsity) =
        compute_sparsity(data.x.view(), data.means.view(), data.priors.view());
    let (per_feature_kurtosis, kurtosis_gap) =
        compute_kurtosis_gap(data.x.view(), data.means.view(), &data.labels);
    Diagnostics {
        between_var,
        d_eff,
        sparsity,
        kurtosis_gap,
        per_feature_kurtosis,
        selected_loss: select_loss(sparsity, kurtosis_gap, thresholds),
    }
}
