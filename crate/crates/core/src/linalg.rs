//! Small dense linear-algebra helpers on top of `ndarray`, with `nalgebra`
//! doing the factorizations.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};


pub(crate) fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigen-decomposition of a symmetric matrix. Eigenvalues are returned in
/// ascending order with matching eigenvector columns.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let eig = SymmetricEigen::new(to_dmatrix(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let p = a.nrows();
    let vectors = Array2::from_shape_fn((p, order.len()), |(i, j)| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Lower Cholesky factor, or `None` if the matrix is not numerically PD.
pub fn cholesky_lower(a: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
    Cholesky::new(to_dmatrix(a)).map(|c| from_dmatrix(&c.l()))
}

/// A factor `F` with `F Fᵀ = a` for symmetric PSD `a`. Uses Cholesky when it
/// succeeds and falls back to `V diag(sqrt(max(λ, 0)))` otherwise.
pub fn psd_factor(a: ArrayView2<'_, f64>) -> Array2<f64> {
    if let Some(l) = cholesky_lower(a) {
        return l;
    }
    let (values, mut vectors) = symmetric_eigen(a);
    for (mut col, &v) in vectors.columns_mut().into_iter().zip(values.iter()) {
        col *= v.max(0.0).sqrt();
    }
    vectors
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
    Cholesky::new(to_dmatrix(a)).map(|c| from_dmatrix(&c.inverse()))
}

/// Solves `a X = b` for symmetric positive definite `a`.
pub fn spd_solve(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
    let chol = Cholesky::new(to_dmatrix(a))?;
    Some(from_dmatrix(&chol.solve(&to_dmatrix(b))))
}

/// `log det a` for symmetric positive definite `a`.
pub fn spd_log_det(a: ArrayView2<'_, f64>) -> Option<f64> {
    let l = cholesky_lower(a)?;
    Some(2.0 * l.diag().iter().map(|v| v.ln()).sum::<f64>())
}

pub fn frobenius_norm(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn trace(a: ArrayView2<'_, f64>) -> f64 {
    a.diag().sum()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_of_diagonal_is_sorted() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        let (vals, vecs) = symmetric_eigen(a.view());
        assert_eq!(vals.to_vec(), vec![1.0, 3.0]);
        assert!((vecs[[1, 0]].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psd_factor_handles_singular_input() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let f = psd_factor(a.view());
        let back = f.dot(&f.t());
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn log_det_matches_product_of_diagonal() {
        let a = array![[2.0, 0.0], [0.0, 5.0]];
        assert!((spd_log_det(a.view()).unwrap() - 10f64.ln()).abs() < 1e-14);
        assert!(spd_log_det(array![[-1.0]].view()).is_none());
    }

    #[test]
    fn normal_cdf_reference_point() {
        let v = normal_cdf(-1.5);
        assert!((v - 0.066_807_201_268_858_1).abs() < 1e-12, "{v:?}");
    }
}
