//! Datasets, class statistics and within-class standardization.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale entries below this are replaced by it.
pub const SCALE_FLOOR: f64 = 1e-8;

/// Dense row-major samples with class labels remapped to `0..K`.
///
/// External labels are arbitrary integers; `label_table[k]` is the external
/// label of internal class `k`, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    label_table: Vec<i64>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, raw_labels: &[i64]) -> Result<Self> {
        let mut table = raw_labels.to_vec();
        table.sort_unstable();
        table.dedup();
        let labels = raw_labels
            .iter()
            .map(|l| table.binary_search(l).expect("label is in table"))
            .collect();
        Self::with_label_table(features, labels, table)
    }

    /// Builds a dataset from internal class indices and an explicit table.
    /// Every class in the table must occur at least once.
    pub fn with_label_table(
        features: Array2<f64>,
        labels: Vec<usize>,
        label_table: Vec<i64>,
    ) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 || p == 0 {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "label vector length",
                expected: n,
                found: labels.len(),
            });
        }
        let k = label_table.len();
        let mut seen = vec![false; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::InvalidArgument(format!(
                    "class index {l} outside label table of size {k}"
                )));
            }
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyClass {
                label: label_table[missing],
            });
        }
        Ok(Self {
            features,
            labels,
            label_table,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_table.len()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Internal class index per sample.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_table(&self) -> &[i64] {
        &self.label_table
    }

    /// External label per sample.
    pub fn raw_labels(&self) -> Vec<i64> {
        self.labels.iter().map(|&l| self.label_table[l]).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Applies `f` to every feature column, keeping labels.
    pub fn map_features(&self, f: impl Fn(ArrayView2<'_, f64>) -> Array2<f64>) -> Result<Self> {
        Self::with_label_table(
            f(self.features.view()),
            self.labels.clone(),
            self.label_table.clone(),
        )
    }
}

/// Per-class means, counts and empirical priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub means: Array2<f64>,
    pub priors: Array1<f64>,
    pub counts: Vec<usize>,
}

fn cmp_rows(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Sample indices in a canonical order (by class, then row contents), so sums
/// taken in this order do not depend on how the input rows were arranged.
fn canonical_order(data: &Dataset) -> Vec<usize> {
    let x = data.features();
    let y = data.labels();
    let mut order: Vec<usize> = (0..data.n()).collect();
    order.sort_by(|&i, &j| y[i].cmp(&y[j]).then_with(|| cmp_rows(x.row(i), x.row(j))));
    order
}

pub fn estimate_class_stats(data: &Dataset) -> Result<ClassStats> {
    let (n, p) = (data.n(), data.p());
    let k = data.n_classes();
    let x = data.features();
    let y = data.labels();

    let mut sums = Array2::<f64>::zeros((k, p));
    let mut counts = vec![0usize; k];
    for i in canonical_order(data) {
        let mut row = sums.row_mut(y[i]);
        row += &x.row(i);
        counts[y[i]] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyClass {
            label: data.label_table()[empty],
        });
    }
    for (mut row, &c) in sums.rows_mut().into_iter().zip(&counts) {
        row /= c as f64;
    }
    let priors = Array1::from_iter(counts.iter().map(|&c| c as f64 / n as f64));
    Ok(ClassStats {
        means: sums,
        priors,
        counts,
    })
}

/// Overall centre and within-class residual scale per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStandardizer {
    pub center: Array1<f64>,
    pub scale: Array1<f64>,
}

impl FittedStandardizer {
    /// `center` is the column mean of X; `scale` the population standard
    /// deviation of each residual column `x_i - mean_{y_i}`, floored at
    /// [`SCALE_FLOOR`].
    pub fn fit(data: &Dataset, stats: &ClassStats) -> Result<Self> {
        let p = data.p();
        if stats.means.dim() != (data.n_classes(), p) {
            return Err(Error::DimensionMismatch {
                context: "class means",
                expected: p,
                found: stats.means.ncols(),
            });
        }
        let x = data.features();
        let y = data.labels();
        let n = data.n() as f64;
        let center = x.mean_axis(Axis(0)).expect("n > 0");

        let mut resid_mean = Array1::<f64>::zeros(p);
        for (row, &l) in x.rows().into_iter().zip(y) {
            resid_mean.zip_mut_with(&(&row - &stats.means.row(l)), |a, r| *a += r);
        }
        resid_mean /= n;
        let mut var = Array1::<f64>::zeros(p);
        for (row, &l) in x.rows().into_iter().zip(y) {
            for j in 0..p {
                let r = row[j] - stats.means[[l, j]] - resid_mean[j];
                var[j] += r * r;
            }
        }
        let scale = var.mapv(|v| (v / n).sqrt().max(SCALE_FLOOR));
        Ok(Self { center, scale })
    }

    pub fn p(&self) -> usize {
        self.center.len()
    }

    /// `(x - center) / scale`, elementwise per row.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::DimensionMismatch {
                context: "feature count",
                expected: self.p(),
                found: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            row -= &self.center;
            row /= &self.scale;
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::DimensionMismatch {
                context: "feature count",
                expected: self.p(),
                found: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            row *= &self.scale;
            row += &self.center;
        }
        Ok(out)
    }

    /// Transforms a sample matrix and a class-mean matrix together.
    pub fn apply(
        &self,
        x: ArrayView2<'_, f64>,
        means: ArrayView2<'_, f64>,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        Ok((self.transform(x)?, self.transform(means)?))
    }
}

/// Training data in optimization space, with the statistics that produced it.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub x: Array2<f64>,
    pub means: Array2<f64>,
    pub labels: Vec<usize>,
    pub priors: Array1<f64>,
    pub counts: Vec<usize>,
    pub standardizer: FittedStandardizer,
}

impl Standardized {
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let stats = estimate_class_stats(data)?;
        let standardizer = FittedStandardizer::fit(data, &stats)?;
        let (x, means) = standardizer.apply(data.features(), stats.means.view())?;
        Ok(Self {
            x,
            means,
            labels: data.labels().to_vec(),
            priors: stats.priors,
            counts: stats.counts,
            standardizer,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.means.nrows()
    }

    /// Within-class residuals `x̃_i - μ̃_{y_i}` as an n × p matrix.
    pub fn residuals(&self) -> Array2<f64> {
        let mut r = self.x.clone();
        for (mut row, &l) in r.rows_mut().into_iter().zip(&self.labels) {
            row -= &self.means.row(l);
        }
        r
    }
}
