//! CSV ingestion and emission of survival datasets.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::SurvivalDataset;
use crate::regression::DesignMatrices;

/// Which columns hold time, event and the covariates of each link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSpec {
    pub time: String,
    pub event: String,
    pub alpha_covariates: Vec<String>,
    pub beta_covariates: Vec<String>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            time: "time".into(),
            event: "event".into(),
            alpha_covariates: Vec::new(),
            beta_covariates: Vec::new(),
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Reads a header-first CSV into a dataset.
pub fn load_dataset(path: impl AsRef<Path>, cols: &ColumnSpec) -> Result<SurvivalDataset> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::InvalidData(format!("cannot open {}: {e}", path.display())))?;
    read_dataset(file, cols)
}

/// As [`load_dataset`], from any reader.
pub fn read_dataset<R: Read>(reader: R, cols: &ColumnSpec) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::InvalidData("empty file: no header row".into()));
    }
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidData(format!("column '{name}' not found in header")))
    };
    let t_col = find(&cols.time)?;
    let e_col = find(&cols.event)?;
    let a_cols = cols
        .alpha_covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let b_cols = cols
        .beta_covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut t = Vec::new();
    let mut delta = Vec::new();
    let mut a_rows = Vec::new();
    let mut b_rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(k as u64 + 2, |p| p.line());
        let field = |j: usize, name: &str| -> Result<f64> {
            let raw = rec.get(j).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                return Err(Error::InvalidData(format!(
                    "line {line}: missing value in column '{name}'"
                )));
            }
            raw.parse::<f64>().map_err(|_| {
                Error::InvalidData(format!(
                    "line {line}: column '{name}' is not numeric: '{raw}'"
                ))
            })
        };
        let ti = field(t_col, &cols.time)?;
        if !(ti > 0.0 && ti.is_finite()) {
            return Err(Error::InvalidData(format!(
                "line {line}: time must be positive and finite, got {ti}"
            )));
        }
        let ei = field(e_col, &cols.event)?;
        let flag = if ei == 0.0 {
            false
        } else if ei == 1.0 {
            true
        } else {
            return Err(Error::InvalidData(format!(
                "line {line}: event column '{}' must be 0 or 1, got {ei}",
                cols.event
            )));
        };
        let mut ar = Vec::with_capacity(a_cols.len());
        for (&j, name) in a_cols.iter().zip(&cols.alpha_covariates) {
            ar.push(field(j, name)?);
        }
        let mut br = Vec::with_capacity(b_cols.len());
        for (&j, name) in b_cols.iter().zip(&cols.beta_covariates) {
            br.push(field(j, name)?);
        }
        t.push(ti);
        delta.push(flag);
        a_rows.push(ar);
        b_rows.push(br);
    }
    if t.is_empty() {
        return Err(Error::InvalidData("file has a header but no data rows".into()));
    }
    let x = DesignMatrices::from_covariates(
        &a_rows,
        &b_rows,
        &cols.alpha_covariates,
        &cols.beta_covariates,
    )?;
    SurvivalDataset::new(t, delta, x)
}

/// Writes time, event and the non-intercept design columns. The α columns
/// are named after `x1_names` and the β columns after `x2_names`; a β column
/// whose name and values duplicate an α column is written once.
pub fn write_dataset<W: Write>(data: &SurvivalDataset, writer: W) -> Result<ColumnSpec> {
    let x = data.design();
    let mut header = vec!["time".to_string(), "event".to_string()];
    let mut cols = ColumnSpec::default();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for j in 1..x.n_alpha() {
        let name = x.x1_names()[j].clone();
        columns.push((name.clone(), x.x1().column(j).iter().copied().collect()));
        cols.alpha_covariates.push(name);
    }
    for j in 1..x.n_beta() {
        let name = x.x2_names()[j].clone();
        let values: Vec<f64> = x.x2().column(j).iter().copied().collect();
        match columns.iter().find(|(n, _)| *n == name) {
            Some((_, v)) if *v == values => {}
            Some(_) => {
                return Err(Error::InvalidData(format!(
                    "column name '{name}' is used for different alpha and beta covariates"
                )))
            }
            None => columns.push((name.clone(), values)),
        }
        cols.beta_covariates.push(name);
    }
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec = vec![
            fmt_f64(data.times()[i]),
            u8::from(data.events()[i]).to_string(),
        ];
        rec.extend(columns.iter().map(|(_, v)| fmt_f64(v[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(cols)
}
