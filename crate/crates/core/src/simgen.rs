//! The 20 two-class simulation settings and their samplers.
//!
//! Settings are grouped in five categories of four (A–E). Unless a setting
//! says otherwise: p = 200, n_train = 200, n_test = 10 000, K = 2, equal
//! priors, shared Gaussian covariance, and a mean gap calibrated to
//! Mahalanobis distance 3 so the Bayes error is Φ(−1.5) ≈ 6.68%.
//!
//! Choices the setting table leaves open:
//!
//! * The dense mean direction is the all-ones vector before scaling; sparse
//!   patterns use the indicator of the first k coordinates.
//! * Classes sit at ±Δμ/2.
//! * E2 calibrates Δμ against Σ = I; class 1 then has covariance 4I.
//! * E3 draws multivariate t (df = 3) with scale Σ·(df − 2)/df, so that its
//!   covariance is Toeplitz(0.5).
//! * E4 gives each class two equally weighted components at ±1.5·u, with u a
//!   random unit vector orthogonal to Δμ.
//! * A4 has no mean signal; both classes are N(0, AAᵀ/p).
//!
//! Each sample draws its covariance, train split and test split from
//! separate streams, so changing `n_test` leaves the training data intact.
//! Labels alternate 0, 1, 0, 1, … which keeps classes balanced to within one.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{normal_cdf, psd_factor, spd_solve};
use crate::rng::{seeded, stream_seed, Rng};

/// Mahalanobis distance between the two class means.
pub const MAHALANOBIS_TARGET: f64 = 3.0;
/// Nominal Bayes error of the calibrated settings.
pub const TARGET_BAYES_ERROR: f64 = 0.067;
/// Offset of the mixture components along the orthogonal direction.
pub const MIXTURE_OFFSET: f64 = 1.5;
pub const DEFAULT_N_TEST: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovarianceKind {
    Identity,
    /// diag(1, 4, 9, …, 100, 1, …, 1).
    DiagRamp,
    Toeplitz(f64),
    /// AAᵀ/p with A i.i.d. standard normal.
    RandomDense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeanPattern {
    DenseCalibrated,
    Sparse(usize),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    None,
    /// Class 1 covariance is 4I instead of I.
    ClassScale,
    HeavyTails(f64),
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub id: String,
    pub p: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub k: usize,
    pub covariance_kind: CovarianceKind,
    pub mean_pattern: MeanPattern,
    pub violation: Violation,
    pub target_bayes_error: f64,
}

pub const SETTING_IDS: [&str; 20] = [
    "A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4", "C1", "C2", "C3", "C4", "D1", "D2", "D3",
    "D4", "E1", "E2", "E3", "E4",
];

impl SimulationSpec {
    pub fn by_id(id: &str) -> Result<Self> {
        use CovarianceKind as C;
        use MeanPattern as M;
        let id = id.trim().to_ascii_uppercase();
        let (p, n_train, cov, pattern, violation) = match id.as_str() {
            "A1" => (200, 200, C::Identity, M::DenseCalibrated, Violation::None),
            "A2" => (200, 200, C::DiagRamp, M::DenseCalibrated, Violation::None),
            "A3" => (200, 200, C::Toeplitz(0.9), M::DenseCalibrated, Violation::None),
            "A4" => (200, 200, C::RandomDense, M::None, Violation::None),
            "B1" => (20, 200, C::Identity, M::DenseCalibrated, Violation::None),
            "B2" => (100, 200, C::Identity, M::DenseCalibrated, Violation::None),
            "B3" => (500, 200, C::Identity, M::DenseCalibrated, Violation::None),
            "B4" => (1000, 200, C::Identity, M::DenseCalibrated, Violation::None),
            "C1" => (500, 200, C::Identity, M::Sparse(50), Violation::None),
            "C2" => (500, 200, C::Identity, M::Sparse(10), Violation::None),
            "C3" => (500, 200, C::Identity, M::Sparse(5), Violation::None),
            "C4" => (500, 200, C::Identity, M::Sparse(1), Violation::None),
            "D1" => (200, 50, C::Toeplitz(0.8), M::DenseCalibrated, Violation::None),
            "D2" => (200, 100, C::Toeplitz(0.8), M::DenseCalibrated, Violation::None),
            "D3" => (200, 500, C::Toeplitz(0.8), M::DenseCalibrated, Violation::None),
            "D4" => (200, 1000, C::Toeplitz(0.8), M::DenseCalibrated, Violation::None),
            "E1" => (200, 200, C::Toeplitz(0.5), M::DenseCalibrated, Violation::None),
            "E2" => (200, 200, C::Identity, M::DenseCalibrated, Violation::ClassScale),
            "E3" => (200, 200, C::Toeplitz(0.5), M::DenseCalibrated, Violation::HeavyTails(3.0)),
            "E4" => (200, 200, C::Toeplitz(0.5), M::DenseCalibrated, Violation::Mixture),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown setting {other:?}; expected A1..E4"
                )))
            }
        };
        Ok(Self {
            id,
            p,
            n_train,
            n_test: DEFAULT_N_TEST,
            k: 2,
            covariance_kind: cov,
            mean_pattern: pattern,
            violation,
            target_bayes_error: TARGET_BAYES_ERROR,
        })
    }

    pub fn all() -> Vec<Self> {
        SETTING_IDS
            .iter()
            .map(|id| Self::by_id(id).expect("table ids are valid"))
            .collect()
    }

    pub fn with_n_test(mut self, n_test: usize) -> Self {
        self.n_test = n_test;
        self
    }

    pub fn with_n_train(mut self, n_train: usize) -> Self {
        self.n_train = n_train;
        self
    }

    /// Shared Gaussian classes: the analytic Bayes error applies.
    pub fn is_shared_gaussian(&self) -> bool {
        self.violation == Violation::None
    }
}

pub fn toeplitz(rho: f64, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((p, p), |(i, j)| rho.powi(i.abs_diff(j) as i32))
}

pub fn build_covariance(kind: CovarianceKind, p: usize, rng: &mut Rng) -> Result<Array2<f64>> {
    if p == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(match kind {
        CovarianceKind::Identity => Array2::eye(p),
        CovarianceKind::DiagRamp => {
            if p < 10 {
                return Err(Error::InvalidArgument(format!(
                    "diagonal ramp covariance needs p >= 10, got {p}"
                )));
            }
            let mut m = Array2::eye(p);
            for i in 0..10 {
                m[[i, i]] = ((i + 1) * (i + 1)) as f64;
            }
            m
        }
        CovarianceKind::Toeplitz(rho) => {
            if !(rho.abs() < 1.0) {
                return Err(Error::InvalidArgument(format!("Toeplitz rho {rho} not in (-1, 1)")));
            }
            toeplitz(rho, p)
        }
        CovarianceKind::RandomDense => {
            let a = Array2::from_shape_simple_fn((p, p), || rng.sample::<f64, _>(StandardNormal));
            let mut m = a.dot(&a.t()) / p as f64;
            for i in 0..p {
                for j in 0..i {
                    let v = 0.5 * (m[[i, j]] + m[[j, i]]);
                    m[[i, j]] = v;
                    m[[j, i]] = v;
                }
            }
            m
        }
    })
}

/// Scales the pattern's direction so that `√(ΔμᵀΣ⁻¹Δμ) = distance`.
/// The `None` pattern yields a zero gap.
pub fn calibrate_delta_mu(
    sigma: ArrayView2<'_, f64>,
    pattern: MeanPattern,
    distance: f64,
) -> Result<Array1<f64>> {
    let p = sigma.nrows();
    let direction = match pattern {
        MeanPattern::None => return Ok(Array1::zeros(p)),
        MeanPattern::DenseCalibrated => Array1::ones(p),
        MeanPattern::Sparse(k) => {
            if k == 0 || k > p {
                return Err(Error::InvalidArgument(format!(
                    "sparse pattern needs 1 <= k <= p, got k = {k}, p = {p}"
                )));
            }
            Array1::from_shape_fn(p, |j| if j < k { 1.0 } else { 0.0 })
        }
    };
    let col = direction.view().insert_axis(Axis(1));
    let solved = spd_solve(sigma, col).ok_or(Error::SingularPrecision(0.0))?;
    let m2 = direction.dot(&solved.column(0));
    if !(m2 > 0.0) {
        return Err(Error::InvalidArgument("mean direction has zero length".into()));
    }
    Ok(direction * (distance / m2.sqrt()))
}

/// Zero-mean multivariate t rows: `z / √(g/df)` with `z ~ N(0, scale)` and
/// `g ~ χ²(df)`. Covariance is `scale · df/(df − 2)`.
pub fn multivariate_t_sampler(
    scale: ArrayView2<'_, f64>,
    df: f64,
    n: usize,
    rng: &mut Rng,
) -> Result<Array2<f64>> {
    if !(df > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "multivariate t needs df > 2 for a finite covariance, got {df}"
        )));
    }
    let factor = psd_factor(scale);
    let chi = ChiSquared::new(df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = gaussian_rows(&factor, n, rng);
    for mut row in out.rows_mut() {
        let g: f64 = chi.sample(rng);
        row /= (g / df).sqrt();
    }
    Ok(out)
}

/// `n` rows of `N(0, F Fᵀ)`.
fn gaussian_rows(factor: &Array2<f64>, n: usize, rng: &mut Rng) -> Array2<f64> {
    let p = factor.nrows();
    let z = Array2::from_shape_simple_fn((n, factor.ncols()), || {
        rng.sample::<f64, _>(StandardNormal)
    });
    debug_assert_eq!(factor.ncols(), p);
    z.dot(&factor.t())
}

/// The generating distribution of a sample, enough to score any classifier
/// against the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueDistribution {
    /// K × p.
    pub class_means: Array2<f64>,
    /// Covariance of class 0 (and of every class unless `class_scales` says
    /// otherwise).
    pub covariance: Array2<f64>,
    /// Per-class standard deviation multiplier.
    pub class_scales: Vec<f64>,
    pub heavy_tail_df: Option<f64>,
    /// Offset of each ± mixture component.
    pub mixture_offset: Option<Array1<f64>>,
}

impl TrueDistribution {
    fn is_shared_gaussian(&self) -> bool {
        self.heavy_tail_df.is_none()
            && self.mixture_offset.is_none()
            && self.class_scales.iter().all(|&s| s == 1.0)
    }

    /// Exact error of the rule "class 1 iff wᵀx + b > 0" under equal priors.
    /// Only defined for shared Gaussian classes.
    pub fn linear_rule_error(&self, w: ArrayView1<'_, f64>, b: f64) -> Result<f64> {
        if !self.is_shared_gaussian() || self.class_means.nrows() != 2 {
            return Err(Error::InvalidArgument(
                "exact linear-rule error needs two shared Gaussian classes".into(),
            ));
        }
        let sd = w.dot(&self.covariance.dot(&w)).sqrt();
        let m0 = w.dot(&self.class_means.row(0)) + b;
        let m1 = w.dot(&self.class_means.row(1)) + b;
        if sd == 0.0 {
            let e0 = if m0 > 0.0 { 1.0 } else { 0.0 };
            let e1 = if m1 > 0.0 { 0.0 } else { 1.0 };
            return Ok(0.5 * (e0 + e1));
        }
        Ok(0.5 * (normal_cdf(m0 / sd) + normal_cdf(-m1 / sd)))
    }

    /// Bayes-optimal linear classifier for shared Gaussian classes.
    pub fn oracle(&self, label_table: Vec<i64>) -> Result<OracleClassifier> {
        if !self.is_shared_gaussian() {
            return Err(Error::InvalidArgument(
                "the linear oracle needs shared Gaussian classes".into(),
            ));
        }
        let solved = spd_solve(self.covariance.view(), self.class_means.t())
            .ok_or(Error::SingularPrecision(0.0))?;
        let quad = (&self.class_means * &solved.t()).sum_axis(Axis(1));
        Ok(OracleClassifier {
            weights: solved,
            offsets: -0.5 * quad,
            label_table,
        })
    }
}

/// `δ_k(x) = xᵀΣ⁻¹μ_k − ½μ_kᵀΣ⁻¹μ_k` with the true parameters (equal priors).
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    weights: Array2<f64>,
    offsets: Array1<f64>,
    label_table: Vec<i64>,
}

impl Classifier for OracleClassifier {
    fn scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.weights.nrows() {
            return Err(Error::DimensionMismatch {
                context: "feature count",
                expected: self.weights.nrows(),
                found: x.ncols(),
            });
        }
        Ok(x.dot(&self.weights) + &self.offsets)
    }

    fn label_table(&self) -> &[i64] {
        &self.label_table
    }
}

/// Affine form `(w, b)` of `score₁(x) − score₀(x)` for a two-class
/// classifier whose scores are affine in x, probed at 0 and the unit vectors.
pub fn affine_score_difference<C: Classifier + ?Sized>(
    model: &C,
    p: usize,
) -> Result<(Array1<f64>, f64)> {
    let mut probes = Array2::<f64>::zeros((p + 1, p));
    for j in 0..p {
        probes[[j + 1, j]] = 1.0;
    }
    let s = model.scores(probes.view())?;
    if s.ncols() != 2 {
        return Err(Error::InvalidArgument("needs a two-class classifier".into()));
    }
    let diff: Array1<f64> = &s.column(1) - &s.column(0);
    let b = diff[0];
    Ok((diff.slice(ndarray::s![1..]).mapv(|v| v - b), b))
}

#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub spec: SimulationSpec,
    pub seed: u64,
    pub train: Dataset,
    pub test: Dataset,
    pub true_delta_mu: Array1<f64>,
    pub bayes_error_analytic: Option<f64>,
    pub truth: TrueDistribution,
}

/// JSON-friendly record of what generated a sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleManifest {
    pub spec: SimulationSpec,
    pub seed: u64,
    pub true_delta_mu: Array1<f64>,
    pub bayes_error_analytic: Option<f64>,
    pub truth: TrueDistribution,
}

impl GeneratedSample {
    pub fn manifest(&self) -> SampleManifest {
        SampleManifest {
            spec: self.spec.clone(),
            seed: self.seed,
            true_delta_mu: self.true_delta_mu.clone(),
            bayes_error_analytic: self.bayes_error_analytic,
            truth: self.truth.clone(),
        }
    }
}

fn balanced_labels(n: usize) -> Vec<usize> {
    (0..n).map(|i| i % 2).collect()
}

fn draw_split(
    truth: &TrueDistribution,
    factor: Option<&Array2<f64>>,
    n: usize,
    rng: &mut Rng,
) -> Result<Dataset> {
    let p = truth.class_means.ncols();
    let labels = balanced_labels(n);
    let mut x = match (truth.heavy_tail_df, factor) {
        (Some(df), _) => {
            let scale = &truth.covariance * ((df - 2.0) / df);
            multivariate_t_sampler(scale.view(), df, n, rng)?
        }
        (None, Some(f)) => gaussian_rows(f, n, rng),
        (None, None) => Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal)),
    };
    for (mut row, &y) in x.rows_mut().into_iter().zip(&labels) {
        let s = truth.class_scales[y];
        if s != 1.0 {
            row *= s;
        }
        row += &truth.class_means.row(y);
    }
    if let Some(offset) = &truth.mixture_offset {
        for mut row in x.rows_mut() {
            if rng.random::<bool>() {
                row += offset;
            } else {
                row -= offset;
            }
        }
    }
    Dataset::with_label_table(x, labels, vec![0, 1])
}

pub fn sample_setting(spec: &SimulationSpec, seed: u64) -> Result<GeneratedSample> {
    if spec.k != 2 {
        return Err(Error::InvalidArgument("only two-class settings are defined".into()));
    }
    if spec.n_train < 2 || spec.n_test < 2 {
        return Err(Error::InvalidArgument("need at least two samples per split".into()));
    }
    let p = spec.p;
    let mut param_rng = seeded(stream_seed(seed, "parameters", 0));
    let covariance = build_covariance(spec.covariance_kind, p, &mut param_rng)?;
    let calibration_cov = match spec.violation {
        Violation::ClassScale => Array2::eye(p),
        _ => covariance.clone(),
    };
    let delta_mu = calibrate_delta_mu(calibration_cov.view(), spec.mean_pattern, MAHALANOBIS_TARGET)?;
    let half = &delta_mu * 0.5;
    let class_means = ndarray::stack![Axis(0), (-&half).view(), half.view()];

    let mixture_offset = match spec.violation {
        Violation::Mixture => {
            let mut u = Array1::from_shape_simple_fn(p, || param_rng.sample::<f64, _>(StandardNormal));
            let dm2 = delta_mu.dot(&delta_mu);
            if dm2 > 0.0 {
                let proj = u.dot(&delta_mu) / dm2;
                u.scaled_add(-proj, &delta_mu);
            }
            let norm = u.dot(&u).sqrt();
            Some(u * (MIXTURE_OFFSET / norm))
        }
        _ => None,
    };
    let truth = TrueDistribution {
        class_means,
        covariance,
        class_scales: match spec.violation {
            Violation::ClassScale => vec![1.0, 2.0],
            _ => vec![1.0, 1.0],
        },
        heavy_tail_df: match spec.violation {
            Violation::HeavyTails(df) => Some(df),
            _ => None,
        },
        mixture_offset,
    };

    let factor = match (spec.covariance_kind, spec.violation) {
        (_, Violation::HeavyTails(_)) => None,
        (CovarianceKind::Identity, _) => None,
        _ => Some(psd_factor(truth.covariance.view())),
    };
    let train = draw_split(
        &truth,
        factor.as_ref(),
        spec.n_train,
        &mut seeded(stream_seed(seed, "train", 0)),
    )?;
    let test = draw_split(
        &truth,
        factor.as_ref(),
        spec.n_test,
        &mut seeded(stream_seed(seed, "test", 0)),
    )?;

    let bayes_error_analytic = match (spec.violation, spec.mean_pattern) {
        (Violation::None, MeanPattern::None) => Some(0.5),
        (Violation::None, _) => Some(normal_cdf(-MAHALANOBIS_TARGET / 2.0)),
        _ => None,
    };
    Ok(GeneratedSample {
        spec: spec.clone(),
        seed,
        train,
        test,
        true_delta_mu: delta_mu,
        bayes_error_analytic,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn toeplitz_small_cases() {
        let mut rng = seeded(0);
        assert_eq!(build_covariance(CovarianceKind::Toeplitz(0.0), 4, &mut rng).unwrap(), Array2::eye(4));
        let t = build_covariance(CovarianceKind::Toeplitz(0.9), 3, &mut rng).unwrap();
        let want = array![[1.0, 0.9, 0.81], [0.9, 1.0, 0.9], [0.81, 0.9, 1.0]];
        for (a, b) in t.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn diag_ramp_layout() {
        let m = build_covariance(CovarianceKind::DiagRamp, 12, &mut seeded(0)).unwrap();
        let diag: Vec<f64> = m.diag().to_vec();
        assert_eq!(diag, vec![1., 4., 9., 16., 25., 36., 49., 64., 81., 100., 1., 1.]);
        assert!(build_covariance(CovarianceKind::DiagRamp, 9, &mut seeded(0)).is_err());
    }

    #[test]
    fn calibration_examples() {
        let eye = Array2::<f64>::eye(100);
        let dm = calibrate_delta_mu(eye.view(), MeanPattern::DenseCalibrated, 3.0).unwrap();
        assert!((dm.dot(&dm).sqrt() - 3.0).abs() < 1e-12);
        assert!(dm.iter().all(|v| (v - 0.3).abs() < 1e-12));
        let sparse = calibrate_delta_mu(eye.view(), MeanPattern::Sparse(1), 3.0).unwrap();
        assert_eq!(sparse[0], 3.0);
        assert!(sparse.iter().skip(1).all(|&v| v == 0.0));
        assert!(calibrate_delta_mu(eye.view(), MeanPattern::Sparse(0), 3.0).is_err());
    }

    #[test]
    fn calibration_under_correlation() {
        let t = toeplitz(0.8, 30);
        let dm = calibrate_delta_mu(t.view(), MeanPattern::DenseCalibrated, 3.0).unwrap();
        let solved = spd_solve(t.view(), dm.view().insert_axis(Axis(1))).unwrap();
        assert!((dm.dot(&solved.column(0)) - 9.0).abs() < 1e-9);
    }

    #[test]
    fn bayes_error_of_calibrated_gap() {
        assert!((normal_cdf(-1.5) - 0.0668).abs() < 1e-4);
    }

    #[test]
    fn t_sampler_rejects_small_df() {
        assert!(multivariate_t_sampler(Array2::eye(2).view(), 2.0, 10, &mut seeded(1)).is_err());
    }

    #[test]
    fn labels_balanced_and_reproducible() {
        let spec = SimulationSpec::by_id("E4").unwrap().with_n_test(101);
        let a = sample_setting(&spec, 5).unwrap();
        let b = sample_setting(&spec, 5).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let counts = a.test.class_counts();
        assert!(counts[0].abs_diff(counts[1]) <= 1);
    }

    #[test]
    fn test_size_does_not_change_train() {
        let spec = SimulationSpec::by_id("A4").unwrap();
        let a = sample_setting(&spec.clone().with_n_test(10), 9).unwrap();
        let b = sample_setting(&spec.with_n_test(50), 9).unwrap();
        assert_eq!(a.train, b.train);
    }

    #[test]
    fn linear_rule_error_of_oracle_is_bayes() {
        let spec = SimulationSpec::by_id("D2").unwrap().with_n_test(4);
        let s = sample_setting(&spec, 1).unwrap();
        let oracle = s.truth.oracle(vec![0, 1]).unwrap();
        let (w, b) = affine_score_difference(&oracle, spec.p).unwrap();
        let err = s.truth.linear_rule_error(w.view(), b).unwrap();
        assert!((err - normal_cdf(-1.5)).abs() < 1e-9, "{err}");
    }

    #[test]
    fn mixture_offset_is_orthogonal() {
        let s = sample_setting(&SimulationSpec::by_id("E4").unwrap().with_n_test(4), 2).unwrap();
        let u = s.truth.mixture_offset.unwrap();
        assert!(u.dot(&s.true_delta_mu).abs() < 1e-10);
        assert!((u.dot(&u).sqrt() - MIXTURE_OFFSET).abs() < 1e-12);
    }
}
