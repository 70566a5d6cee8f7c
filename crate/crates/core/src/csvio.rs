//! CSV dataset format: one sample per row, features first, integer label in
//! the last column. Header row optional. UTF-8, `.` as decimal separator.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{}.tmp", file_name.to_string_lossy())),
        None => Path::new(&format!(".{}.tmp", file_name.to_string_lossy())).to_path_buf(),
    };
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Reads a numeric matrix; every row must have the same number of fields.
pub fn read_matrix_from<R: Read>(reader: R, has_header: bool, source: &str) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::parse(source, line, e.to_string()))?;
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::parse(
                    source,
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(source, line, format!("not a number: {field:?}")))?;
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or(Error::EmptyDataset)?;
    Ok(Array2::from_shape_vec((rows, width), values).expect("row widths checked"))
}

pub fn read_matrix(path: &Path, has_header: bool) -> Result<Array2<f64>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_from(f, has_header, &path.display().to_string())
}

pub fn read_dataset_from<R: Read>(reader: R, has_header: bool, source: &str) -> Result<Dataset> {
    let m = read_matrix_from(reader, has_header, source)?;
    let (n, cols) = m.dim();
    if cols < 2 {
        return Err(Error::parse(source, 1, "need at least one feature column and a label column"));
    }
    let mut labels = Vec::with_capacity(n);
    for (i, &v) in m.column(cols - 1).iter().enumerate() {
        if v.fract() != 0.0 || !v.is_finite() || v.abs() > 9.0e15 {
            return Err(Error::parse(
                source,
                i + 1 + usize::from(has_header),
                format!("label {v} is not an integer"),
            ));
        }
        labels.push(v as i64);
    }
    let features = m.slice(ndarray::s![.., ..cols - 1]).to_owned();
    Dataset::new(features, &labels)
}

pub fn read_dataset(path: &Path, has_header: bool) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_from(f, has_header, &path.display().to_string())
}

fn push_row(out: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&format!("{v:?}"));
    }
}

/// Serializes a dataset; floats use the shortest representation that parses
/// back to the same value.
pub fn dataset_to_string(data: &Dataset, header: bool) -> String {
    let mut out = String::new();
    if header {
        let names: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
        out.push_str(&names.join(","));
        out.push_str(",label\n");
    }
    let x: ArrayView2<'_, f64> = data.features();
    for (row, label) in x.rows().into_iter().zip(data.raw_labels()) {
        push_row(&mut out, row.iter().copied());
        out.push_str(&format!(",{label}\n"));
    }
    out
}

pub fn write_dataset(path: &Path, data: &Dataset, header: bool) -> Result<()> {
    write_atomic(path, dataset_to_string(data, header).as_bytes())
}
