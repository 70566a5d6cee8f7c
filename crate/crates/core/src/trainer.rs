//! End-to-end LDA-GO training.
//!
//! `fit` standardizes the data, computes the routing diagnostics, and then
//! optimizes `L` on the chosen path:
//!
//! * CE: `σ² = 0`, plain gradient descent `L ← L − η∇`.
//! * NLL: `σ²` from OAS, Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
//!
//! Both start from `L⁰ = I_{p×d} + N(0, init_noise_sd²)` and stop once the
//! Frobenius norm of the gradient falls below `grad_tol`, or after
//! `max_iters` iterations.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardized};
use crate::diagnostics::{diagnose, Diagnostics, LossPath, Thresholds};
use crate::error::{Error, Result};
use crate::linalg::frobenius_norm;
use crate::losses::{
    ce_gradient, ce_loss, nll_loss_and_gradient, oas_shrinkage, pooled_within_covariance,
    CovarianceRepr, OasShrinkage, ShrunkCovariance,
};
use crate::precision::{default_rank, PrecisionFactor, TrainedModel};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LossChoice {
    #[default]
    Auto,
    Ce,
    Nll,
}

impl FromStr for LossChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AUTO" => Ok(LossChoice::Auto),
            "CE" => Ok(LossChoice::Ce),
            "NLL" => Ok(LossChoice::Nll),
            other => Err(Error::InvalidArgument(format!(
                "loss_override must be AUTO, CE or NLL, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for LossChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossChoice::Auto => "AUTO",
            LossChoice::Ce => "CE",
            LossChoice::Nll => "NLL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Rank of `L`; `None` means `min(20, p)`.
    pub d: Option<usize>,
    pub max_iters: usize,
    pub learning_rate: f64,
    pub grad_tol: f64,
    pub init_noise_sd: f64,
    pub sparsity_threshold: f64,
    pub kurtosis_threshold: f64,
    pub loss_override: LossChoice,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            d: None,
            max_iters: 500,
            learning_rate: 0.01,
            grad_tol: 1e-4,
            init_noise_sd: 0.01,
            sparsity_threshold: 0.10,
            kurtosis_threshold: 10.0,
            loss_override: LossChoice::Auto,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            sparsity: self.sparsity_threshold,
            kurtosis: self.kurtosis_threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.d == Some(0) {
            return bad("d must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.grad_tol >= 0.0) {
            return bad("grad_tol must be non-negative");
        }
        if !(self.init_noise_sd >= 0.0 && self.init_noise_sd.is_finite()) {
            return bad("init_noise_sd must be non-negative");
        }
        if !(self.sparsity_threshold > 0.0 && self.kurtosis_threshold > 0.0) {
            return bad("thresholds must be positive");
        }
        Ok(())
    }

    /// Overrides fields from `key = value` lines. Keys are the field names;
    /// `#` starts a comment; `d = auto` restores the default rank.
    pub fn apply_kv(&mut self, text: &str, source: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, line_no, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let num_err = |_| Error::parse(source, line_no, format!("bad value for {key}: {value:?}"));
            match key {
                "d" => {
                    self.d = if value.eq_ignore_ascii_case("auto") {
                        None
                    } else {
                        Some(value.parse().map_err(num_err)?)
                    }
                }
                "max_iters" => self.max_iters = value.parse().map_err(num_err)?,
                "learning_rate" => self.learning_rate = parse_f64(value, source, line_no)?,
                "grad_tol" => self.grad_tol = parse_f64(value, source, line_no)?,
                "init_noise_sd" => self.init_noise_sd = parse_f64(value, source, line_no)?,
                "sparsity_threshold" => {
                    self.sparsity_threshold = parse_f64(value, source, line_no)?
                }
                "kurtosis_threshold" => {
                    self.kurtosis_threshold = parse_f64(value, source, line_no)?
                }
                "loss_override" => self.loss_override = value.parse()?,
                "seed" => self.seed = value.parse().map_err(num_err)?,
                other => {
                    return Err(Error::parse(source, line_no, format!("unknown key {other:?}")))
                }
            }
        }
        self.validate()
    }

    pub fn from_kv(text: &str, source: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text, source)?;
        Ok(cfg)
    }
}

fn parse_f64(value: &str, source: &str, line: usize) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::parse(source, line, format!("not a number: {value:?}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Array2<f64>,
    pub second_moment: Array2<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(shape: (usize, usize)) -> Self {
        Self {
            first_moment: Array2::zeros(shape),
            second_moment: Array2::zeros(shape),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step on `l`, in place.
pub fn adam_update(state: &mut AdamState, l: &mut Array2<f64>, grad: ArrayView2<'_, f64>, eta: f64) {
    assert_eq!(l.dim(), grad.dim(), "gradient shape");
    assert_eq!(l.dim(), state.first_moment.dim(), "Adam state shape");
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    ndarray::Zip::from(l)
        .and(&mut state.first_moment)
        .and(&mut state.second_moment)
        .and(grad)
        .for_each(|w, m, v, &g| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= eta * m_hat / (v_hat.sqrt() + state.eps);
        });
}

/// First `d` columns of the p × p identity plus i.i.d. `N(0, noise_sd²)`,
/// drawn row-major.
pub fn initialize_l(p: usize, d: usize, noise_sd: f64, rng: &mut Rng) -> Result<Array2<f64>> {
    if d > p {
        return Err(Error::RankTooLarge { d, p });
    }
    let mut l = Array2::<f64>::zeros((p, d));
    for ((i, j), v) in l.indexed_iter_mut() {
        let noise: f64 = rng.sample(StandardNormal);
        *v = if i == j { 1.0 } else { 0.0 } + noise_sd * noise;
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations_run: usize,
    pub final_grad_norm: f64,
    pub final_loss: f64,
    pub loss_path: LossPath,
    pub diagnostics: Diagnostics,
    pub loss_trace: Vec<f64>,
    /// OAS `(α, μ, σ²)` on the NLL path.
    pub shrinkage: Option<(f64, f64, f64)>,
}

fn check_finite(iteration: usize, loss: f64, grad: &Array2<f64>) -> Result<f64> {
    if !loss.is_finite() {
        return Err(Error::Divergence {
            iteration,
            what: "loss",
        });
    }
    let norm = frobenius_norm(grad.view());
    if !norm.is_finite() {
        return Err(Error::Divergence {
            iteration,
            what: "gradient",
        });
    }
    Ok(norm)
}

struct PathOutcome {
    l: Array2<f64>,
    sigma2: f64,
    iterations: usize,
    grad_norm: f64,
    final_loss: f64,
    trace: Vec<f64>,
    shrinkage: Option<OasShrinkage>,
}

fn run_ce(data: &Standardized, mut l: Array2<f64>, cfg: &FitConfig) -> Result<PathOutcome> {
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    let eval = |l: &Array2<f64>| {
        ce_loss(l.view(), data.x.view(), data.means.view(), data.priors.view(), &data.labels)
    };
    for t in 1..=cfg.max_iters {
        let (loss, ws) = eval(&l)?;
        let grad = ce_gradient(&ws, l.view(), data.x.view(), data.means.view())?;
        grad_norm = check_finite(t, loss, &grad)?;
        l.scaled_add(-cfg.learning_rate, &grad);
        trace.push(loss);
        iterations = t;
        if grad_norm < cfg.grad_tol {
            break;
        }
    }
    let final_loss = eval(&l)?.0;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            iteration: iterations,
            what: "loss",
        });
    }
    Ok(PathOutcome {
        l,
        sigma2: 0.0,
        iterations,
        grad_norm,
        final_loss,
        trace,
        shrinkage: None,
    })
}

fn run_nll(data: &Standardized, mut l: Array2<f64>, cfg: &FitConfig) -> Result<PathOutcome> {
    let cov = pooled_within_covariance(
        data.x.view(),
        data.means.view(),
        &data.labels,
        CovarianceRepr::Auto,
    )?;
    let oas = oas_shrinkage(&cov, data.n());
    if !oas.sigma2.is_finite() {
        return Err(Error::InvalidArgument(
            "within-class covariance is zero; the NLL path is undefined".into(),
        ));
    }
    let shrunk = ShrunkCovariance::new(cov, &oas);
    let mut adam = AdamState::new(l.dim());
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    for t in 1..=cfg.max_iters {
        let (loss, grad) = nll_loss_and_gradient(l.view(), &shrunk, oas.sigma2)?;
        grad_norm = check_finite(t, loss, &grad)?;
        adam_update(&mut adam, &mut l, grad.view(), cfg.learning_rate);
        trace.push(loss);
        iterations = t;
        if grad_norm < cfg.grad_tol {
            break;
        }
    }
    let final_loss = nll_loss_and_gradient(l.view(), &shrunk, oas.sigma2)?.0;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            iteration: iterations,
            what: "loss",
        });
    }
    Ok(PathOutcome {
        l,
        sigma2: oas.sigma2,
        iterations,
        grad_norm,
        final_loss,
        trace,
        shrinkage: Some(oas),
    })
}

pub fn fit(data: &Dataset, config: &FitConfig) -> Result<(TrainedModel, FitReport)> {
    config.validate()?;
    let k = data.n_classes();
    if k < 2 {
        return Err(Error::TooFewClasses(k));
    }
    let std = Standardized::from_dataset(data)?;
    let p = std.p();
    let d = config.d.unwrap_or_else(|| default_rank(p));
    if d > p {
        return Err(Error::RankTooLarge { d, p });
    }

    let diagnostics = diagnose(&std, &config.thresholds());
    let path = match config.loss_override {
        LossChoice::Auto => diagnostics.selected_loss,
        LossChoice::Ce => LossPath::CrossEntropy,
        LossChoice::Nll => LossPath::Nll,
    };

    let mut rng = seeded(config.seed);
    let l0 = initialize_l(p, d, config.init_noise_sd, &mut rng)?;
    let outcome = match path {
        LossPath::CrossEntropy => run_ce(&std, l0, config)?,
        LossPath::Nll => run_nll(&std, l0, config)?,
    };

    let model = TrainedModel::new(
        std.standardizer.clone(),
        std.means.clone(),
        std.priors.clone(),
        PrecisionFactor::new(outcome.l, outcome.sigma2)?,
        path,
        data.label_table().to_vec(),
    )?;
    let report = FitReport {
        iterations_run: outcome.iterations,
        final_grad_norm: outcome.grad_norm,
        final_loss: outcome.final_loss,
        loss_path: path,
        diagnostics,
        loss_trace: outcome.trace,
        shrinkage: outcome.shrinkage.map(|s| (s.alpha, s.mu_trace, s.sigma2)),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn noiseless_init_is_truncated_identity() {
        let l = initialize_l(4, 2, 0.0, &mut seeded(1)).unwrap();
        assert_eq!(l, array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(
            initialize_l(2, 3, 0.0, &mut seeded(1)),
            Err(Error::RankTooLarge { .. })
        ));
    }

    #[test]
    fn init_is_reproducible() {
        let a = initialize_l(30, 5, 0.01, &mut seeded(77)).unwrap();
        let b = initialize_l(30, 5, 0.01, &mut seeded(77)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, initialize_l(30, 5, 0.01, &mut seeded(78)).unwrap());
    }

    #[test]
    fn init_noise_moments() {
        // 10⁵ off-diagonal draws from a 1000 × 100 factor.
        let l = initialize_l(1000, 100, 0.01, &mut seeded(2024)).unwrap();
        let off: Vec<f64> = l
            .indexed_iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, &v)| v)
            .collect();
        let n = off.len() as f64;
        let mean = off.iter().sum::<f64>() / n;
        let sd = (off.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 3.0 * 0.01 / n.sqrt(), "mean {mean}");
        assert!((sd - 0.01).abs() < 0.05 * 0.01, "sd {sd}");
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut l = array![[1.0, -2.0], [0.5, 3.0]];
        let before = l.clone();
        let mut st = AdamState::new(l.dim());
        adam_update(&mut st, &mut l, Array2::zeros((2, 2)).view(), 0.01);
        assert_eq!(l, before);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn adam_two_steps_by_hand() {
        // g₁ = 2: m = 0.2, v = 0.004, m̂ = 2, v̂ = 4, step = 0.1·2/(2 + 1e-8).
        // g₂ = −1: m = 0.18 − 0.1 = 0.08, v = 0.003996 + 0.001 = 0.004996,
        // m̂ = 0.08/0.19, v̂ = 0.004996/0.001999.
        let mut l = array![[1.0]];
        let mut st = AdamState::new((1, 1));
        adam_update(&mut st, &mut l, array![[2.0]].view(), 0.1);
        let after1 = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((l[[0, 0]] - after1).abs() < 1e-15);
        adam_update(&mut st, &mut l, array![[-1.0]].view(), 0.1);
        let m_hat = 0.08 / (1.0 - 0.81);
        let v_hat: f64 = 0.004996 / (1.0 - 0.998001);
        let after2 = after1 - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((l[[0, 0]] - after2).abs() < 1e-14, "{} vs {after2}", l[[0, 0]]);
    }

    #[test]
    fn adam_constant_gradient_step_tends_to_eta_sign() {
        let mut l = array![[0.0, 0.0]];
        let mut st = AdamState::new((1, 2));
        let g = array![[3.5, -0.02]];
        let mut prev = l.clone();
        for _ in 0..2000 {
            prev.assign(&l);
            adam_update(&mut st, &mut l, g.view(), 0.01);
        }
        let step = &l - &prev;
        assert!((step[[0, 0]] + 0.01).abs() < 1e-6);
        assert!((step[[0, 1]] - 0.01).abs() < 1e-5);
    }

    #[test]
    fn config_file_parsing() {
        let cfg = FitConfig::from_kv(
            "# comment\nd = 5\nmax_iters=100\nlearning_rate = 0.05 # trailing\nloss_override = ce\nseed = 9\n",
            "cfg",
        )
        .unwrap();
        assert_eq!(cfg.d, Some(5));
        assert_eq!(cfg.max_iters, 100);
        assert_eq!(cfg.learning_rate, 0.05);
        assert_eq!(cfg.loss_override, LossChoice::Ce);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.grad_tol, 1e-4);

        assert!(FitConfig::from_kv("bogus = 1", "cfg").is_err());
        assert!(FitConfig::from_kv("learning_rate = -1", "cfg").is_err());
        assert!(FitConfig::from_kv("d", "cfg").is_err());
    }

    #[test]
    fn defaults_follow_the_algorithm() {
        let c = FitConfig::default();
        assert_eq!(c.max_iters, 500);
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.grad_tol, 1e-4);
        assert_eq!(c.init_noise_sd, 0.01);
        assert_eq!(c.sparsity_threshold, 0.10);
        assert_eq!(c.kurtosis_threshold, 10.0);
        assert_eq!(c.loss_override, LossChoice::Auto);
    }
}
