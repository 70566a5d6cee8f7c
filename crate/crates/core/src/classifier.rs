use ndarray::{Array2, ArrayView2};

use crate::data::Dataset;
use crate::error::Result;

/// Anything that produces one discriminant score per class.
pub trait Classifier {
    /// n × K matrix of discriminant values for raw (unstandardized) inputs.
    fn scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>>;

    /// External label for each class column of [`Classifier::scores`].
    fn label_table(&self) -> &[i64];

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<i64>> {
        let scores = self.scores(x)?;
        let table = self.label_table();
        Ok(argmax_rows(scores.view()).into_iter().map(|k| table[k]).collect())
    }

    /// Fraction of misclassified samples.
    fn error_rate(&self, data: &Dataset) -> Result<f64> {
        let pred = self.predict(data.features())?;
        let wrong = pred
            .iter()
            .zip(data.raw_labels())
            .filter(|(p, t)| **p != *t)
            .count();
        Ok(wrong as f64 / data.n() as f64)
    }
}

/// Row-wise argmax; ties go to the lowest column index. NaN never wins.
pub fn argmax_rows(scores: ArrayView2<'_, f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (k, &v) in row.iter().enumerate() {
                if v > best_val {
                    best = k;
                    best_val = v;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn argmax_picks_largest() {
        assert_eq!(argmax_rows(array![[0.1, 0.9]].view()), vec![1]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax_rows(array![[0.5, 0.5], [1.0, 2.0]].view()), vec![0, 1]);
    }

    #[test]
    fn constant_shift_does_not_change_argmax() {
        let s = array![[0.3, -1.0, 2.0], [4.0, 4.5, -3.0]];
        let shifted = &s + 17.25;
        assert_eq!(argmax_rows(s.view()), argmax_rows(shifted.view()));
    }
}
