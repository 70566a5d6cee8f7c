//! Both losses evaluated at an explicit p × p precision matrix. Used to check
//! the factored implementations and the convexity of each loss; not on any
//! training path.

use ndarray::{ArrayView1, ArrayView2};

use crate::linalg::spd_log_det;

/// Mean negative log posterior with `δ_k(x) = xᵀAμ_k − ½μ_kᵀAμ_k + log π_k`,
/// one sample at a time.
pub fn ce_loss_at(
    precision: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    means: ArrayView2<'_, f64>,
    priors: ArrayView1<'_, f64>,
    labels: &[usize],
) -> f64 {
    let a_mu = means.dot(&precision.t());
    let k = means.nrows();
    let mut total = 0.0;
    for (xi, &y) in x.rows().into_iter().zip(labels) {
        let deltas: Vec<f64> = (0..k)
            .map(|c| {
                xi.dot(&a_mu.row(c)) - 0.5 * means.row(c).dot(&a_mu.row(c)) + priors[c].ln()
            })
            .collect();
        let max = deltas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + deltas.iter().map(|d| (d - max).exp()).sum::<f64>().ln();
        total += lse - deltas[y];
    }
    total / x.nrows() as f64
}

/// `½ tr(S A) − ½ log det A`, or `None` when `A` is not positive definite.
pub fn nll_loss_at(precision: ArrayView2<'_, f64>, covariance: ArrayView2<'_, f64>) -> Option<f64> {
    let trace: f64 = (&covariance * &precision.t()).sum();
    Some(0.5 * trace - 0.5 * spd_log_det(precision)?)
}
