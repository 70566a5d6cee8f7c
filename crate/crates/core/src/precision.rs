//! Factored precision `Σ⁻¹ = L Lᵀ + σ² I` and the discriminant it induces.
//!
//! Scores are evaluated in the d-dimensional embedding
//!
//! ```text
//! δ_k(x) = zᵀw_k − ½‖w_k‖² + σ²(x̃ᵀμ̃_k − ½‖μ̃_k‖²) + log π_k,
//! z = Lᵀx̃,  w_k = Lᵀμ̃_k
//! ```
//!
//! so nothing p × p is ever allocated. [`materialize_precision`] is the only
//! constructor of an explicit p × p precision and exists for checking.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::data::FittedStandardizer;
use crate::diagnostics::LossPath;
use crate::error::{Error, Result};

/// Largest p for which [`materialize_precision`] will allocate.
pub const MATERIALIZE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionFactor {
    pub l: Array2<f64>,
    pub sigma2: f64,
}

impl PrecisionFactor {
    pub fn new(l: Array2<f64>, sigma2: f64) -> Result<Self> {
        let (p, d) = l.dim();
        if d > p {
            return Err(Error::RankTooLarge { d, p });
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma2 must be finite and non-negative, got {sigma2}"
            )));
        }
        Ok(Self { l, sigma2 })
    }

    pub fn p(&self) -> usize {
        self.l.nrows()
    }

    pub fn d(&self) -> usize {
        self.l.ncols()
    }
}

/// Default rank: `min(20, p)`.
pub fn default_rank(p: usize) -> usize {
    p.min(20)
}

/// Explicit `L Lᵀ + σ² I`.
pub fn materialize_precision(pf: &PrecisionFactor) -> Result<Array2<f64>> {
    let p = pf.p();
    if p > MATERIALIZE_LIMIT {
        return Err(Error::SizeGuard {
            p,
            limit: MATERIALIZE_LIMIT,
        });
    }
    let mut m = pf.l.dot(&pf.l.t());
    // Symmetrize exactly; the product is symmetric only up to rounding.
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
        m[[i, i]] += pf.sigma2;
    }
    Ok(m)
}

/// Discriminant matrix for standardized samples and means.
pub fn discriminants(
    x: ArrayView2<'_, f64>,
    means: ArrayView2<'_, f64>,
    log_priors: ArrayView1<'_, f64>,
    pf: &PrecisionFactor,
) -> Result<Array2<f64>> {
    let p = pf.p();
    if x.ncols() != p || means.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "feature count",
            expected: p,
            found: if x.ncols() != p { x.ncols() } else { means.ncols() },
        });
    }
    if log_priors.len() != means.nrows() {
        return Err(Error::DimensionMismatch {
            context: "prior count",
            expected: means.nrows(),
            found: log_priors.len(),
        });
    }
    let z = x.dot(&pf.l);
    let w = means.dot(&pf.l);
    let mut scores = z.dot(&w.t());
    let mut offset: Array1<f64> = &log_priors - &(0.5 * w.map_axis(Axis(1), |r| r.dot(&r)));
    if pf.sigma2 != 0.0 {
        scores.scaled_add(pf.sigma2, &x.dot(&means.t()));
        offset -= &(0.5 * pf.sigma2 * means.map_axis(Axis(1), |r| r.dot(&r)));
    }
    scores += &offset;
    Ok(scores)
}

/// The deployable LDA-GO classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub standardizer: FittedStandardizer,
    pub class_means_std: Array2<f64>,
    pub priors: Array1<f64>,
    pub precision: PrecisionFactor,
    pub loss_path: LossPath,
    pub label_table: Vec<i64>,
}

impl TrainedModel {
    pub fn new(
        standardizer: FittedStandardizer,
        class_means_std: Array2<f64>,
        priors: Array1<f64>,
        precision: PrecisionFactor,
        loss_path: LossPath,
        label_table: Vec<i64>,
    ) -> Result<Self> {
        let p = standardizer.p();
        let k = label_table.len();
        if k < 2 {
            return Err(Error::TooFewClasses(k));
        }
        for (context, expected, found) in [
            ("standardizer scale length", p, standardizer.scale.len()),
            ("class means rows", k, class_means_std.nrows()),
            ("class means columns", p, class_means_std.ncols()),
            ("prior count", k, priors.len()),
            ("precision factor rows", p, precision.p()),
        ] {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    found,
                });
            }
        }
        Ok(Self {
            standardizer,
            class_means_std,
            priors,
            precision,
            loss_path,
            label_table,
        })
    }

    pub fn p(&self) -> usize {
        self.standardizer.p()
    }

    pub fn n_classes(&self) -> usize {
        self.label_table.len()
    }

    pub fn score(&self, x_raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let x = self.standardizer.transform(x_raw)?;
        let log_priors = self.priors.mapv(f64::ln);
        discriminants(
            x.view(),
            self.class_means_std.view(),
            log_priors.view(),
            &self.precision,
        )
    }
}

impl Classifier for TrainedModel {
    fn scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.score(x)
    }

    fn label_table(&self) -> &[i64] {
        &self.label_table
    }
}
