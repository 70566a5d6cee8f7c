//! Central-difference gradients, used as an independent check on the
//! analytic ones.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::frobenius_norm;

/// `(f(L + hE_ij) − f(L − hE_ij)) / 2h` for every entry.
pub fn finite_difference_gradient<F>(mut f: F, l: ArrayView2<'_, f64>, step: f64) -> Result<Array2<f64>>
where
    F: FnMut(ArrayView2<'_, f64>) -> Result<f64>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let mut probe = l.to_owned();
    let mut grad = Array2::<f64>::zeros(l.dim());
    for idx in ndarray::indices(l.dim()) {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let up = f(probe.view())?;
        probe[idx] = orig - step;
        let down = f(probe.view())?;
        probe[idx] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFinite("finite-difference evaluation"));
        }
        grad[idx] = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`, or the absolute difference when both
/// are below `floor`.
pub fn relative_error(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, floor: f64) -> f64 {
    let diff = frobenius_norm((&a - &b).view());
    let scale = frobenius_norm(a).max(frobenius_norm(b));
    if scale < floor {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn half_squared_norm() {
        let l = array![[1.0, -2.0], [0.5, 3.0], [0.0, 7.0]];
        let g = finite_difference_gradient(
            |m| Ok(0.5 * m.iter().map(|v| v * v).sum::<f64>()),
            l.view(),
            1e-5,
        )
        .unwrap();
        assert!(relative_error(g.view(), l.view(), 1e-12) < 1e-8);
    }

    #[test]
    fn bad_step_and_non_finite() {
        let l = array![[1.0]];
        assert!(finite_difference_gradient(|_| Ok(0.0), l.view(), 0.0).is_err());
        assert!(finite_difference_gradient(|_| Ok(f64::NAN), l.view(), 1e-3).is_err());
    }
}
