//! Monte Carlo benchmark over the simulation settings.
//!
//! Replicate `r` of setting `s` uses seed `stream_seed(base_seed, s, r)`, and
//! LDA-GO's initialization seed is derived from that. Every (setting,
//! replicate) cell runs independently (in parallel) and results are keyed by
//! position, so a plan always yields the same numbers.
//!
//! A method that fails on a cell is recorded with a NaN error and the reason;
//! the rest of the run continues.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_baseline, BaselineKind};
use crate::classifier::Classifier;
use crate::csvio::write_atomic;
use crate::data::Standardized;
use crate::diagnostics::{diagnose, LossPath};
use crate::error::{Error, Result};
use crate::rng::stream_seed;
use crate::simgen::{sample_setting, SimulationSpec};
use crate::trainer::{fit, FitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LDAGO")]
    LdaGo,
    #[serde(rename = "LDA")]
    Lda,
    #[serde(rename = "LW_LDA")]
    LwLda,
    #[serde(rename = "NB")]
    Nb,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::LdaGo, Method::Lda, Method::LwLda, Method::Nb];

    fn baseline(self) -> Option<BaselineKind> {
        match self {
            Method::LdaGo => None,
            Method::Lda => Some(BaselineKind::ClassicLda),
            Method::LwLda => Some(BaselineKind::LwLda),
            Method::Nb => Some(BaselineKind::NaiveBayes),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::LdaGo => "LDAGO",
            Method::Lda => "LDA",
            Method::LwLda => "LW_LDA",
            Method::Nb => "NB",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "LDAGO" | "LDA_GO" => Ok(Method::LdaGo),
            "LDA" => Ok(Method::Lda),
            "LW_LDA" | "LWLDA" => Ok(Method::LwLda),
            "NB" => Ok(Method::Nb),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?}; expected LDAGO, LDA, LW_LDA or NB"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub settings: Vec<String>,
    pub replicates: usize,
    pub n_test: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Used for LDA-GO; its `seed` field is replaced per replicate.
    pub fit_config: FitConfig,
}

pub const DESK_REPLICATES: usize = 5;
pub const DESK_N_TEST: usize = 2_000;
pub const FULL_REPLICATES: usize = 20;
pub const FULL_N_TEST: usize = 10_000;

impl BenchPlan {
    pub fn desk(settings: Vec<String>, methods: Vec<Method>, base_seed: u64) -> Self {
        Self {
            settings,
            replicates: DESK_REPLICATES,
            n_test: DESK_N_TEST,
            methods,
            base_seed,
            fit_config: FitConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<Vec<SimulationSpec>> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        if self.settings.is_empty() {
            return Err(Error::InvalidArgument("no settings selected".into()));
        }
        self.settings
            .iter()
            .map(|id| SimulationSpec::by_id(id).map(|s| s.with_n_test(self.n_test)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub error: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateDiagnostics {
    pub r: f64,
    pub kappa: f64,
    pub selected_loss: LossPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub setting_id: String,
    pub replicate: usize,
    pub seed: u64,
    pub outcomes: BTreeMap<Method, CellOutcome>,
    pub diagnostics: Option<ReplicateDiagnostics>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub setting_id: String,
    pub method: Method,
    pub mean_error: f64,
    pub stderr: f64,
    pub n_replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub setting_id: String,
    pub replicate: usize,
    pub r: f64,
    pub kappa: f64,
    pub selected_loss: LossPath,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub plan: BenchPlan,
    /// Ordered by setting (plan order), then replicate.
    pub replicates: Vec<ReplicateRecord>,
    /// Wall time per replicate record, in the same order.
    pub wall_seconds: Vec<f64>,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl BenchResult {
    /// Per-replicate errors of one cell, in replicate order.
    pub fn errors(&self, setting_id: &str, method: Method) -> Vec<f64> {
        self.replicates
            .iter()
            .filter(|r| r.setting_id == setting_id)
            .map(|r| r.outcomes.get(&method).map_or(f64::NAN, |o| o.error))
            .collect()
    }

    pub fn mean_error(&self, setting_id: &str, method: Method) -> f64 {
        mean_and_stderr(&self.errors(setting_id, method)).0
    }

    pub fn table2_rows(&self) -> Vec<Table2Row> {
        let mut rows = Vec::new();
        for id in &self.plan.settings {
            for &m in &self.plan.methods {
                let errs = self.errors(id, m);
                let (mean, se) = mean_and_stderr(&errs);
                rows.push(Table2Row {
                    setting_id: id.clone(),
                    method: m,
                    mean_error: mean,
                    stderr: se,
                    n_replicates: errs.len(),
                });
            }
        }
        rows
    }

    pub fn diagnostics_rows(&self) -> Vec<DiagnosticsRow> {
        self.replicates
            .iter()
            .filter_map(|r| {
                r.diagnostics.as_ref().map(|d| DiagnosticsRow {
                    setting_id: r.setting_id.clone(),
                    replicate: r.replicate,
                    r: d.r,
                    kappa: d.kappa,
                    selected_loss: d.selected_loss,
                })
            })
            .collect()
    }

    /// Methods whose mean error, in percent rounded to one decimal, is the
    /// lowest for the setting. Ties all count as wins. Settings with any
    /// failed cell have no winner.
    pub fn winners(&self, setting_id: &str) -> Vec<Method> {
        let rounded: Vec<(Method, f64)> = self
            .plan
            .methods
            .iter()
            .map(|&m| (m, (self.mean_error(setting_id, m) * 1000.0).round()))
            .collect();
        if rounded.iter().any(|(_, v)| !v.is_finite()) {
            return Vec::new();
        }
        let best = rounded.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        rounded
            .into_iter()
            .filter(|(_, v)| *v == best)
            .map(|(m, _)| m)
            .collect()
    }

    pub fn win_counts(&self) -> BTreeMap<Method, usize> {
        let mut counts: BTreeMap<Method, usize> = self.plan.methods.iter().map(|&m| (m, 0)).collect();
        for id in &self.plan.settings {
            for m in self.winners(id) {
                *counts.entry(m).or_default() += 1;
            }
        }
        counts
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.replicates {
            if let Some(f) = &r.failure {
                out.push(format!("{} replicate {}: {f}", r.setting_id, r.replicate));
            }
            for (m, o) in &r.outcomes {
                if let Some(f) = &o.failure {
                    out.push(format!("{} replicate {} {m}: {f}", r.setting_id, r.replicate));
                }
            }
        }
        out
    }
}

fn run_cell(spec: &SimulationSpec, replicate: usize, plan: &BenchPlan) -> ReplicateRecord {
    let seed = stream_seed(plan.base_seed, &spec.id, replicate as u64);
    let mut record = ReplicateRecord {
        setting_id: spec.id.clone(),
        replicate,
        seed,
        outcomes: BTreeMap::new(),
        diagnostics: None,
        failure: None,
    };
    let sample = match sample_setting(spec, seed) {
        Ok(s) => s,
        Err(e) => {
            let reason = format!("data generation failed: {e}");
            for &m in &plan.methods {
                record.outcomes.insert(
                    m,
                    CellOutcome {
                        error: f64::NAN,
                        failure: Some(reason.clone()),
                    },
                );
            }
            record.failure = Some(reason);
            return record;
        }
    };

    for &m in &plan.methods {
        let outcome = match m.baseline() {
            None => {
                let config = FitConfig {
                    seed: stream_seed(seed, "init", 0),
                    ..plan.fit_config.clone()
                };
                fit(&sample.train, &config).and_then(|(model, report)| {
                    record.diagnostics = Some(ReplicateDiagnostics {
                        r: report.diagnostics.sparsity,
                        kappa: report.diagnostics.kurtosis_gap,
                        selected_loss: report.diagnostics.selected_loss,
                    });
                    model.error_rate(&sample.test)
                })
            }
            Some(kind) => {
                fit_baseline(kind, &sample.train).and_then(|model| model.error_rate(&sample.test))
            }
        };
        record.outcomes.insert(
            m,
            match outcome {
                Ok(error) => CellOutcome {
                    error,
                    failure: None,
                },
                Err(e) => CellOutcome {
                    error: f64::NAN,
                    failure: Some(e.to_string()),
                },
            },
        );
    }

    if record.diagnostics.is_none() {
        let thresholds = plan.fit_config.thresholds();
        if let Ok(std) = Standardized::from_dataset(&sample.train) {
            let d = diagnose(&std, &thresholds);
            record.diagnostics = Some(ReplicateDiagnostics {
                r: d.sparsity,
                kappa: d.kurtosis_gap,
                selected_loss: d.selected_loss,
            });
        }
    }
    record
}

pub fn run_bench(plan: &BenchPlan) -> Result<BenchResult> {
    let specs = plan.validate()?;
    plan.fit_config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|s| (0..plan.replicates).map(move |r| (s, r)))
        .collect();
    let results: Vec<(ReplicateRecord, f64)> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let start = Instant::now();
            let rec = run_cell(&specs[s], r, plan);
            (rec, start.elapsed().as_secs_f64())
        })
        .collect();
    let (replicates, wall_seconds) = results.into_iter().unzip();
    Ok(BenchResult {
        plan: plan.clone(),
        replicates,
        wall_seconds,
    })
}

fn csv_string<T: Serialize>(rows: &[T], headers: &[&str]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv encoding failed: {e}"));
    w.write_record(headers).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub const TABLE2_COLUMNS: [&str; 5] = ["setting_id", "method", "mean_error", "stderr", "n_replicates"];
pub const DIAGNOSTICS_COLUMNS: [&str; 5] = ["setting_id", "replicate", "r", "kappa", "selected_loss"];

pub fn table2_csv(result: &BenchResult) -> Result<String> {
    csv_string(&result.table2_rows(), &TABLE2_COLUMNS)
}

pub fn diagnostics_csv(result: &BenchResult) -> Result<String> {
    csv_string(&result.diagnostics_rows(), &DIAGNOSTICS_COLUMNS)
}

fn parse_rows<T: for<'de> Deserialize<'de>>(text: &str, source: &str) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(source, i + 2, e.to_string())))
        .collect()
}

pub fn parse_table2(text: &str) -> Result<Vec<Table2Row>> {
    parse_rows(text, "table2.csv")
}

pub fn parse_diagnostics(text: &str) -> Result<Vec<DiagnosticsRow>> {
    parse_rows(text, "diagnostics.csv")
}

pub fn summary_markdown(result: &BenchResult) -> String {
    let plan = &result.plan;
    let mut out = String::new();
    writeln!(out, "# Benchmark summary\n").unwrap();
    writeln!(
        out,
        "{} settings, {} replicates, n_test = {}, base seed {}.\n",
        plan.settings.len(),
        plan.replicates,
        plan.n_test,
        plan.base_seed
    )
    .unwrap();
    writeln!(out, "## Mean test error (%)\n").unwrap();
    let header: Vec<String> = plan.methods.iter().map(|m| m.to_string()).collect();
    writeln!(out, "| setting | {} |", header.join(" | ")).unwrap();
    writeln!(out, "|---|{}", "---|".repeat(plan.methods.len())).unwrap();
    for id in &plan.settings {
        let winners = result.winners(id);
        let cells: Vec<String> = plan
            .methods
            .iter()
            .map(|&m| {
                let v = result.mean_error(id, m) * 100.0;
                if winners.contains(&m) {
                    format!("**{v:.1}**")
                } else {
                    format!("{v:.1}")
                }
            })
            .collect();
        writeln!(out, "| {id} | {} |", cells.join(" | ")).unwrap();
    }
    writeln!(
        out,
        "\n## Wins\n\nA method wins a setting when its mean error, rounded to 0.1%, is the lowest (ties all count).\n"
    )
    .unwrap();
    for (m, c) in result.win_counts() {
        writeln!(out, "- {m}: {c}/{}", plan.settings.len()).unwrap();
    }
    let failures = result.failures();
    if !failures.is_empty() {
        writeln!(out, "\n## Failed cells\n").unwrap();
        for f in failures {
            writeln!(out, "- {f}").unwrap();
        }
    }
    out
}

/// Writes `table2.csv`, `diagnostics.csv` and `summary.md` into `out_dir`.
pub fn emit_reports(result: &BenchResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = [
        ("table2.csv", table2_csv(result)?),
        ("diagnostics.csv", diagnostics_csv(result)?),
        ("summary.md", summary_markdown(result)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_result(errors: &[(&str, Method, [f64; 2])]) -> BenchResult {
        let mut settings: Vec<String> = errors.iter().map(|e| e.0.to_string()).collect();
        settings.dedup();
        let mut methods: Vec<Method> = errors.iter().map(|e| e.1).collect();
        methods.sort();
        methods.dedup();
        let mut replicates = Vec::new();
        for id in &settings {
            for r in 0..2 {
                let outcomes = errors
                    .iter()
                    .filter(|e| e.0 == id)
                    .map(|e| {
                        (
                            e.1,
                            CellOutcome {
                                error: e.2[r],
                                failure: None,
                            },
                        )
                    })
                    .collect();
                replicates.push(ReplicateRecord {
                    setting_id: id.clone(),
                    replicate: r,
                    seed: 0,
                    outcomes,
                    diagnostics: Some(ReplicateDiagnostics {
                        r: 0.1 * r as f64 + 1.0 / 3.0,
                        kappa: 2.5,
                        selected_loss: LossPath::Nll,
                    }),
                    failure: None,
                });
            }
        }
        BenchResult {
            plan: BenchPlan {
                settings,
                replicates: 2,
                n_test: 10,
                methods,
                base_seed: 1,
                fit_config: FitConfig::default(),
            },
            replicates,
            wall_seconds: vec![0.0; 4],
        }
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_and_stderr(&[0.1, 0.3]);
        assert!((m - 0.2).abs() < 1e-15);
        assert!((se - 0.1).abs() < 1e-15);
        assert_eq!(mean_and_stderr(&[0.4]), (0.4, 0.0));
    }

    #[test]
    fn csv_round_trip() {
        let res = fake_result(&[
            ("A1", Method::LdaGo, [0.1, 0.2 / 3.0]),
            ("A1", Method::Lda, [0.4, 0.45]),
            ("B1", Method::LdaGo, [0.07, 0.08]),
            ("B1", Method::Lda, [0.075, 0.0801]),
        ]);
        assert_eq!(parse_table2(&table2_csv(&res).unwrap()).unwrap(), res.table2_rows());
        assert_eq!(
            parse_diagnostics(&diagnostics_csv(&res).unwrap()).unwrap(),
            res.diagnostics_rows()
        );
        assert!(table2_csv(&res)
            .unwrap()
            .starts_with("setting_id,method,mean_error,stderr,n_replicates\n"));
    }

    #[test]
    fn dominant_method_wins_everything() {
        let res = fake_result(&[
            ("A1", Method::LdaGo, [0.1, 0.1]),
            ("A1", Method::Nb, [0.2, 0.2]),
            ("B1", Method::LdaGo, [0.1, 0.1]),
            ("B1", Method::Nb, [0.3, 0.2]),
            ("C1", Method::LdaGo, [0.0, 0.1]),
            ("C1", Method::Nb, [0.3, 0.2]),
        ]);
        let wins = res.win_counts();
        assert_eq!(wins[&Method::LdaGo], 3);
        assert_eq!(wins[&Method::Nb], 0);
        assert!(summary_markdown(&res).contains("- LDAGO: 3/3"));
    }

    #[test]
    fn rounding_ties_count_for_both() {
        let res = fake_result(&[
            ("A1", Method::LdaGo, [0.1101, 0.1101]),
            ("A1", Method::LwLda, [0.1099, 0.1099]),
        ]);
        assert_eq!(res.winners("A1"), vec![Method::LdaGo, Method::LwLda]);
    }

    #[test]
    fn single_method_table() {
        let res = fake_result(&[("A1", Method::Nb, [0.5, 0.5])]);
        let rows = res.table2_rows();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].method, Method::Nb);
    }

    #[test]
    fn plan_validation() {
        let mut plan = BenchPlan::desk(vec!["A1".into()], vec![], 0);
        assert!(plan.validate().is_err());
        plan.methods = vec![Method::Nb];
        assert!(plan.validate().is_ok());
        plan.replicates = 0;
        assert!(plan.validate().is_err());
        plan.replicates = 1;
        plan.settings = vec!["Z9".into()];
        assert!(plan.validate().is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("lda-go".parse::<Method>().unwrap(), Method::LdaGo);
    }
}
