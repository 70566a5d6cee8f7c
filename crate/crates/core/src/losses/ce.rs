//! Cross-entropy of the softmax over embedded discriminants (σ² = 0), and its
//! gradient assembled without any p × p intermediate:
//!
//! ```text
//! ∇ = −(1/n) ( X̃ᵀ R W + M̃ᵀ (Rᵀ Z) − M̃ᵀ diag(1ᵀR) W ),   R = Y − P
//! ```
//!
//! with `Z = X̃L` (n × d) and `W = M̃L` (K × d).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Intermediates of one loss evaluation, reused by [`ce_gradient`].
#[derive(Debug, Clone)]
pub struct CeWorkspace {
    pub z: Array2<f64>,
    pub w: Array2<f64>,
    pub probs: Array2<f64>,
    pub resid: Array2<f64>,
    pub onehot: Array2<f64>,
}

pub fn ce_loss(
    l: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    means: ArrayView2<'_, f64>,
    priors: ArrayView1<'_, f64>,
    labels: &[usize],
) -> Result<(f64, CeWorkspace)> {
    let (n, p) = x.dim();
    let k = means.nrows();
    for (context, expected, found) in [
        ("precision factor rows", p, l.nrows()),
        ("class means columns", p, means.ncols()),
        ("prior count", k, priors.len()),
        ("label vector length", n, labels.len()),
    ] {
        if expected != found {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                found,
            });
        }
    }
    let z = x.dot(&l);
    let w = means.dot(&l);
    let offset: Array1<f64> =
        priors.mapv(f64::ln) - 0.5 * w.map_axis(Axis(1), |r| r.dot(&r));
    let mut probs = z.dot(&w.t());
    probs += &offset;

    let mut onehot = Array2::<f64>::zeros((n, k));
    let mut total = 0.0;
    for ((mut row, &y), mut oh) in probs
        .rows_mut()
        .into_iter()
        .zip(labels)
        .zip(onehot.rows_mut())
    {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let own = row[y] - max;
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        // -log P_iy = -(δ_iy − max) + log Σ exp(δ − max)
        total += sum.ln() - own;
        row /= sum;
        oh[y] = 1.0;
    }
    let resid = &onehot - &probs;
    Ok((
        total / n as f64,
        CeWorkspace {
            z,
            w,
            probs,
            resid,
            onehot,
        },
    ))
}

pub fn ce_gradient(
    ws: &CeWorkspace,
    l: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    means: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    let d = l.ncols();
    let k = means.nrows();
    if ws.z.dim() != (n, d) {
        return Err(Error::StaleWorkspace("embedded samples Z"));
    }
    if ws.w.dim() != (k, d) {
        return Err(Error::StaleWorkspace("embedded means W"));
    }
    if ws.resid.dim() != (n, k) {
        return Err(Error::StaleWorkspace("residual matrix"));
    }
    if l.nrows() != p || means.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "feature count",
            expected: p,
            found: l.nrows(),
        });
    }
    let r = &ws.resid;
    let mut g = x.t().dot(&r.dot(&ws.w));
    g += &means.t().dot(&r.t().dot(&ws.z));
    let col_sums = r.sum_axis(Axis(0));
    let scaled_w = &ws.w * &col_sums.insert_axis(Axis(1));
    g -= &means.t().dot(&scaled_w);
    g *= -1.0 / n as f64;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn equal_scores_give_log_two() {
        let x = array![[1.0, 2.0], [-1.0, 0.5], [0.0, 0.0]];
        let m = array![[1.0, 0.0], [0.0, 1.0]];
        let (loss, ws) = ce_loss(
            Array2::zeros((2, 1)).view(),
            x.view(),
            m.view(),
            array![0.5, 0.5].view(),
            &[0, 1, 1],
        )
        .unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        for row in ws.probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_only_posterior() {
        let x = array![[0.3], [-2.0], [4.0]];
        let m = array![[1.0], [0.0], [-1.0]];
        let (loss, _) = ce_loss(
            Array2::zeros((1, 1)).view(),
            x.view(),
            m.view(),
            array![0.5, 0.25, 0.25].view(),
            &[0, 0, 0],
        )
        .unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let ws = CeWorkspace {
            z: Array2::zeros((2, 1)),
            w: array![[1.0], [-1.0]],
            probs: array![[1.0, 0.0], [0.0, 1.0]],
            resid: Array2::zeros((2, 2)),
            onehot: array![[1.0, 0.0], [0.0, 1.0]],
        };
        let g = ce_gradient(
            &ws,
            array![[1.0]].view(),
            array![[1.0], [-1.0]].view(),
            array![[1.0], [-1.0]].view(),
        )
        .unwrap();
        assert_eq!(g, array![[0.0]]);
    }

    #[test]
    fn scalar_chain_rule() {
        // n = p = d = 1, K = 2, μ = (+1, −1), x = 1, equal priors:
        // δ_k = ℓ²(x μ_k − ½ μ_k²) + log π_k, so δ_1 − δ_2 = 2ℓ²x = 2ℓ².
        // For label 1: loss = log(1 + exp(−2ℓ²)), dloss/dℓ = −4ℓ / (1 + exp(2ℓ²)).
        let ell: f64 = 0.7;
        let (loss, ws) = ce_loss(
            array![[ell]].view(),
            array![[1.0]].view(),
            array![[1.0], [-1.0]].view(),
            array![0.5, 0.5].view(),
            &[0],
        )
        .unwrap();
        let e = (2.0 * ell * ell).exp();
        assert!((loss - (1.0 + 1.0 / e).ln()).abs() < 1e-14);
        let g = ce_gradient(
            &ws,
            array![[ell]].view(),
            array![[1.0]].view(),
            array![[1.0], [-1.0]].view(),
        )
        .unwrap();
        assert!((g[[0, 0]] + 4.0 * ell / (1.0 + e)).abs() < 1e-14);
    }

    #[test]
    fn stale_workspace_is_detected() {
        let (_, ws) = ce_loss(
            array![[1.0]].view(),
            array![[1.0], [2.0]].view(),
            array![[1.0], [-1.0]].view(),
            array![0.5, 0.5].view(),
            &[0, 1],
        )
        .unwrap();
        let err = ce_gradient(
            &ws,
            array![[1.0]].view(),
            array![[1.0], [2.0], [3.0]].view(),
            array![[1.0], [-1.0]].view(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StaleWorkspace(_)));
    }

    #[test]
    fn huge_scores_do_not_overflow() {
        let (loss, ws) = ce_loss(
            array![[100.0]].view(),
            array![[50.0], [-50.0]].view(),
            array![[1.0], [-1.0]].view(),
            array![0.5, 0.5].view(),
            &[1, 1],
        )
        .unwrap();
        assert!(loss.is_finite());
        assert!(ws.probs.iter().all(|v| v.is_finite()));
    }
}
