//! CSV ingestion and emission.
//!
//! A file has a header row with an outcome column `y`, an integer arm column
//! `t` (labels `0..H`), optional propensity columns `e1..eH` and any number
//! of numeric covariate columns, kept in file order.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use siprop::Dataset;

use crate::error::{CliError, Result};

/// Row filters and dropped columns applied while reading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOptions {
    /// Keep only rows whose `column` cell equals `value` (after trimming).
    /// Filter columns are constant afterwards and are not used as covariates.
    pub filters: Vec<(String, String)>,
    /// Columns to drop from the covariates.
    pub exclude: Vec<String>,
}

impl IngestOptions {
    /// Parse `column=value` filter arguments.
    pub fn parse_filters(args: &[String]) -> Result<Vec<(String, String)>> {
        args.iter()
            .map(|a| match a.split_once('=') {
                Some((c, v)) if !c.trim().is_empty() => Ok((c.trim().to_string(), v.trim().to_string())),
                _ => Err(CliError::Usage(format!("filter {a:?} is not of the form column=value"))),
            })
            .collect()
    }
}

/// A dataset together with its covariate names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub dataset: Dataset,
    pub covariates: Vec<String>,
}

fn is_outcome(name: &str) -> bool {
    name == "y" || name == "Y"
}

fn is_arm(name: &str) -> bool {
    name == "t" || name == "T"
}

/// Arm number of a propensity column `e<k>`, 1-based.
fn propensity_arm(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('e')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<Table> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: &IngestOptions) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::schema(Some(1), None, format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    for (k, name) in header.iter().enumerate() {
        if name.is_empty() {
            return Err(CliError::schema(Some(1), None, format!("column {} has an empty name", k + 1)));
        }
        if header[..k].contains(name) {
            return Err(CliError::schema(Some(1), Some(name), "duplicate column"));
        }
    }
    let find = |pred: &dyn Fn(&str) -> bool, what: &str| -> Result<usize> {
        let hits: Vec<usize> = (0..header.len()).filter(|&k| pred(&header[k])).collect();
        match hits.as_slice() {
            [k] => Ok(*k),
            [] => Err(CliError::schema(Some(1), None, format!("missing {what} column"))),
            _ => Err(CliError::schema(Some(1), None, format!("more than one {what} column"))),
        }
    };
    let y_col = find(&is_outcome, "outcome (y)")?;
    let t_col = find(&is_arm, "arm (t)")?;
    let col_index = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::schema(None, Some(name), "no such column"))
    };
    let filters: Vec<(usize, &str)> = opts
        .filters
        .iter()
        .map(|(c, v)| Ok((col_index(c)?, v.as_str())))
        .collect::<Result<_>>()?;
    if let Some(&(k, _)) = filters.iter().find(|&&(k, _)| k == y_col || k == t_col) {
        return Err(CliError::schema(None, Some(&header[k]), "the outcome and arm columns cannot be filtered on"));
    }
    let mut excluded = Vec::new();
    for c in &opts.exclude {
        let k = col_index(c)?;
        if k == y_col || k == t_col {
            return Err(CliError::schema(None, Some(c), "the outcome and arm columns cannot be excluded"));
        }
        excluded.push(k);
    }
    let mut e_cols: Vec<(usize, usize)> =
        (0..header.len()).filter_map(|k| propensity_arm(&header[k]).map(|a| (a, k))).collect();
    e_cols.sort_unstable();
    let x_cols: Vec<usize> = (0..header.len())
        .filter(|&k| {
            k != y_col
                && k != t_col
                && propensity_arm(&header[k]).is_none()
                && !excluded.contains(&k)
                && !filters.iter().any(|&(c, _)| c == k)
        })
        .collect();
    if x_cols.is_empty() {
        return Err(CliError::schema(Some(1), None, "no covariate columns"));
    }

    let mut y = Vec::new();
    let mut labels = Vec::new();
    let mut x = Vec::new();
    let mut e = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        // Header is line 1.
        let line = k + 2;
        let rec = rec.map_err(|err| CliError::schema(Some(line), None, err.to_string()))?;
        if rec.len() != header.len() {
            return Err(CliError::schema(
                Some(line),
                None,
                format!("{} fields, header has {}", rec.len(), header.len()),
            ));
        }
        if filters.iter().any(|&(c, v)| &rec[c] != v) {
            continue;
        }
        let num = |c: usize| -> Result<f64> {
            let v: f64 = rec[c]
                .parse()
                .map_err(|_| CliError::schema(Some(line), Some(&header[c]), format!("{:?} is not a number", &rec[c])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::schema(Some(line), Some(&header[c]), "value is not finite"))
            }
        };
        y.push(num(y_col)?);
        let label: usize = rec[t_col].parse().map_err(|_| {
            CliError::schema(Some(line), Some(&header[t_col]), format!("{:?} is not an arm label 0, 1, ...", &rec[t_col]))
        })?;
        labels.push((label, line));
        for &c in &x_cols {
            x.push(num(c)?);
        }
        for &(_, c) in &e_cols {
            e.push(num(c)?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(CliError::schema(None, None, "no data rows left after filtering"));
    }

    let max_label = labels.iter().map(|&(l, _)| l).max().unwrap_or(0);
    let arms = if e_cols.is_empty() {
        max_label + 1
    } else {
        let h = e_cols.len();
        if e_cols.iter().enumerate().any(|(k, &(a, _))| a != k + 1) {
            return Err(CliError::schema(Some(1), None, format!("propensity columns must be e1..e{h} without gaps")));
        }
        if let Some(&(l, line)) = labels.iter().find(|&&(l, _)| l >= h) {
            return Err(CliError::schema(
                Some(line),
                Some(&header[t_col]),
                format!("arm {l} has no propensity column (file has e1..e{h})"),
            ));
        }
        h
    };
    if arms < 2 {
        return Err(CliError::schema(None, Some(&header[t_col]), "need at least two arms"));
    }
    let p = x_cols.len();
    let xm = DMatrix::from_row_slice(n, p, &x);
    let em = (!e_cols.is_empty()).then(|| DMatrix::from_row_slice(n, arms, &e));
    let label_vec: Vec<usize> = labels.iter().map(|&(l, _)| l).collect();
    let dataset = Dataset::from_labels(DVector::from_vec(y), &label_vec, arms, xm, em)?;
    Ok(Table { dataset, covariates: x_cols.iter().map(|&c| header[c].clone()).collect() })
}

/// Write `table` in the ingestion format. Values are printed in shortest
/// round-trip form, so reading the output back gives the same dataset.
pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<()> {
    let ds = &table.dataset;
    let io = |e: csv::Error| CliError::Io { path: "<output>".into(), source: e.into() };
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string(), "t".to_string()];
    header.extend(table.covariates.iter().cloned());
    if ds.e.is_some() {
        header.extend((1..=ds.arms()).map(|h| format!("e{h}")));
    }
    w.write_record(&header).map_err(io)?;
    for i in 0..ds.n() {
        let mut row = vec![ds.y[i].to_string(), ds.arm_of(i).to_string()];
        row.extend(ds.x.row(i).iter().map(f64::to_string));
        if let Some(e) = &ds.e {
            row.extend(e.row(i).iter().map(f64::to_string));
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|source| CliError::Io { path: "<output>".into(), source })
}

pub fn emit_csv(table: &Table, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    write_csv(table, file)
}
