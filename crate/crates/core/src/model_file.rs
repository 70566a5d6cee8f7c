//! Plain-text model container.
//!
//! ```text
//! LDAGO v1
//! dims n/a <p> <d> <K>
//! labels <label_1> ... <label_K>
//! center
//! <p values>
//! scale
//! <p values>
//! means
//! <K lines of p values>
//! priors
//! <K values>
//! L
//! <p lines of d values>
//! sigma2 <value>
//! loss_path <CE|NLL>
//! ```
//!
//! Values are whitespace separated and written in the shortest decimal form
//! that parses back to the identical `f64`, so save/load is exact.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::csvio::write_atomic;
use crate::data::FittedStandardizer;
use crate::error::{Error, Result};
use crate::precision::{PrecisionFactor, TrainedModel};

pub const HEADER: &str = "LDAGO v1";

fn write_values<'a>(out: &mut String, values: impl IntoIterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v:?}").unwrap();
    }
    out.push('\n');
}

pub fn to_string(model: &TrainedModel) -> String {
    let p = model.p();
    let d = model.precision.d();
    let k = model.n_classes();
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    writeln!(out, "dims n/a {p} {d} {k}").unwrap();
    let labels: Vec<String> = model.label_table.iter().map(|l| l.to_string()).collect();
    writeln!(out, "labels {}", labels.join(" ")).unwrap();
    out.push_str("center\n");
    write_values(&mut out, model.standardizer.center.iter());
    out.push_str("scale\n");
    write_values(&mut out, model.standardizer.scale.iter());
    out.push_str("means\n");
    for row in model.class_means_std.rows() {
        write_values(&mut out, row.iter());
    }
    out.push_str("priors\n");
    write_values(&mut out, model.priors.iter());
    out.push_str("L\n");
    for row in model.precision.l.rows() {
        write_values(&mut out, row.iter());
    }
    writeln!(out, "sigma2 {:?}", model.precision.sigma2).unwrap();
    writeln!(out, "loss_path {}", model.loss_path).unwrap();
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a str,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::parse(self.source, 0, "unexpected end of model file"))
    }

    fn expect_keyword(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let (line, text) = self.next_line()?;
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some(t) if t == keyword => Ok(tokens.collect()),
            other => Err(Error::parse(
                self.source,
                line,
                format!("expected {keyword:?}, found {:?}", other.unwrap_or("")),
            )),
        }
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>> {
        let (line, text) = self.next_line()?;
        let vals = text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(self.source, line, format!("not a number: {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != count {
            return Err(Error::parse(
                self.source,
                line,
                format!("expected {count} values, found {}", vals.len()),
            ));
        }
        Ok(vals)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.values(cols)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("sizes checked"))
    }
}

fn parse_usize(source: &str, line: usize, token: Option<&&str>, what: &str) -> Result<usize> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(source, line, format!("bad or missing {what}")))
}

pub fn from_str(text: &str, source: &str) -> Result<TrainedModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        source,
    };
    let (line, header) = lines.next_line()?;
    if header.trim() != HEADER {
        return Err(Error::parse(source, line, format!("expected header {HEADER:?}")));
    }
    let dims = lines.expect_keyword("dims")?;
    let line = 2;
    if dims.len() != 4 {
        return Err(Error::parse(source, line, "dims needs 4 fields: n/a p d K"));
    }
    let p = parse_usize(source, line, dims.get(1), "p")?;
    let d = parse_usize(source, line, dims.get(2), "d")?;
    let k = parse_usize(source, line, dims.get(3), "K")?;

    let label_tokens = lines.expect_keyword("labels")?;
    let labels = label_tokens
        .iter()
        .map(|t| t.parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::parse(source, 3, "labels must be integers"))?;
    if labels.len() != k {
        return Err(Error::parse(source, 3, format!("expected {k} labels")));
    }

    lines.expect_keyword("center")?;
    let center = Array1::from(lines.values(p)?);
    lines.expect_keyword("scale")?;
    let scale = Array1::from(lines.values(p)?);
    lines.expect_keyword("means")?;
    let means = lines.matrix(k, p)?;
    lines.expect_keyword("priors")?;
    let priors = Array1::from(lines.values(k)?);
    lines.expect_keyword("L")?;
    let l = lines.matrix(p, d)?;
    let sigma2_tokens = lines.expect_keyword("sigma2")?;
    let sigma2: f64 = sigma2_tokens
        .first()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(source, 0, "bad sigma2"))?;
    let path_tokens = lines.expect_keyword("loss_path")?;
    let loss_path = path_tokens
        .first()
        .ok_or_else(|| Error::parse(source, 0, "missing loss_path token"))?
        .parse()?;

    TrainedModel::new(
        FittedStandardizer { center, scale },
        means,
        priors,
        PrecisionFactor::new(l, sigma2)?,
        loss_path,
        labels,
    )
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<()> {
    write_atomic(path, to_string(model).as_bytes())
}

pub fn load(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text, &path.display().to_string())
}
