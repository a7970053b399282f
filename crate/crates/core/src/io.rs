//! CSV formats.
//!
//! Logit files: header `logit_0,...,logit_{K-1},label`, one record per row.
//! Floats are written in Rust's shortest round-trip form, so write/read
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dataset::LogitDataset;
use crate::error::{CalibError, Result};
use crate::synthetic::{BinaryDataset, Theorem1Trial};

fn parse_err(line: usize, message: impl Into<String>) -> CalibError {
    CalibError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a logit CSV document. Line numbers in errors are 1-based.
pub fn parse_logit_csv(text: &str) -> Result<LogitDataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols.last() != Some(&"label") {
        return Err(parse_err(1, "header must be logit_0,...,logit_{K-1},label with K >= 2"));
    }
    let k = cols.len() - 1;
    for (i, c) in cols[..k].iter().enumerate() {
        if *c != format!("logit_{i}") {
            return Err(parse_err(1, format!("expected column logit_{i}, found {c:?}")));
        }
    }
    let mut logits = Vec::new();
    let mut labels = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != k + 1 {
            return Err(parse_err(ln, format!("expected {} columns, found {}", k + 1, fields.len())));
        }
        for (j, f) in fields[..k].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(ln, format!("logit_{j}: cannot parse {f:?} as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(ln, format!("logit_{j}: non-finite value {f:?}")));
            }
            logits.push(v);
        }
        let y: usize = fields[k]
            .parse()
            .map_err(|_| parse_err(ln, format!("label: cannot parse {:?} as a class index", fields[k])))?;
        if y >= k {
            return Err(parse_err(ln, format!("label {y} outside 0..{k}")));
        }
        labels.push(y);
    }
    LogitDataset::from_flat(k, logits, labels)
}

pub fn read_logit_csv(path: impl AsRef<Path>) -> Result<LogitDataset> {
    parse_logit_csv(&fs::read_to_string(path)?)
}

pub fn logit_csv_string(ds: &LogitDataset) -> String {
    let k = ds.num_classes();
    let mut out = String::new();
    for j in 0..k {
        let _ = write!(out, "logit_{j},");
    }
    out.push_str("label\n");
    for (z, y) in ds.records() {
        for v in z {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{y}");
    }
    out
}

pub fn write_logit_csv(ds: &LogitDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, logit_csv_string(ds))?;
    Ok(())
}

/// Feature CSV for binary datasets: `x_0,...,x_{d-1},label`.
pub fn binary_csv_string(ds: &BinaryDataset) -> String {
    let mut out = String::new();
    for j in 0..ds.dim {
        let _ = write!(out, "x_{j},");
    }
    out.push_str("label\n");
    for (x, y) in ds.records() {
        for v in x {
            // -0 from negated atoms prints as 0
            let _ = write!(out, "{},", v + 0.0);
        }
        let _ = writeln!(out, "{y}");
    }
    out
}

pub const THEOREM1_HEADER: &str =
    "trial,scenario,sample_size,rare_atom_present,balanced,min_confidence,accuracy,weight_norm,cosine_to_v,intercept";

pub fn theorem1_csv_string(trials: &[Theorem1Trial]) -> String {
    let mut out = String::from(THEOREM1_HEADER);
    out.push('\n');
    for t in trials {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            t.trial,
            t.scenario.as_str(),
            t.sample_size,
            t.rare_atom_present,
            t.balanced,
            t.min_confidence,
            t.accuracy,
            t.weight_norm,
            t.cosine_to_v,
            t.intercept
        );
    }
    out
}
