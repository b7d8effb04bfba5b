use std::io::Write;

use eigeninf::Error;
use serde_json::Value;

use crate::{Common, Format};

pub const SCHEMA_VERSION: u32 = 1;

pub fn emit(report: &Value, common: &Common) -> std::io::Result<()> {
    let text = match common.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", report, &mut rows);
            let mut s = String::from("key,value\n");
            for (k, v) in rows {
                s.push_str(&format!("{k},{v}\n"));
            }
            s
        }
    };
    match &common.output {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::String(s) if s.contains(',') || s.contains('"') => {
            out.push((prefix.to_string(), format!("\"{}\"", s.replace('"', "\"\""))))
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn hint(e: &Error) -> Option<&'static str> {
    Some(match e {
        Error::Parse { .. } => "fix the file at the reported line and column",
        Error::Dimension(_) => "check that all matrices share the same dimension p and covariances are p×p or p²×p²",
        Error::NonFinite { .. } => "remove NaN or infinite entries from the input",
        Error::Defective { .. } => {
            "the matrix lacks a full set of eigenvectors; the tests need a diagonalizable mean matrix"
        }
        Error::SpectralOverlap { .. } | Error::SingularOperator { .. } => {
            "selected and remaining roots are too close; choose a selector at a clear spectral gap"
        }
        Error::ConjugationSplit { .. } => "select both members of a complex conjugate pair",
        Error::Selection(_) => "use largest:k, indices:1,3, modulus>x, modulus<x or real>x",
        Error::RankDeficient(_) => {
            "the statistic's covariance is singular; use more observations or --structure kronecker-columns"
        }
        Error::SingularNormalization { .. } => {
            "the bottom block of the eigenvector basis is near singular; reorder coordinates"
        }
        Error::NonPositiveVariance { .. } => "the coefficient has no sampling variability; check the covariance input",
        Error::NotPositiveSemidefinite(_) => "supply a positive semidefinite covariance",
        Error::DominantTie(_) => "the dominant root is not unique; scores are not identified",
        Error::NonConvergence { .. } => "rescale the matrix or check for extreme entries",
        Error::UnknownVertex(_) | Error::InvalidArgument(_) | Error::Io(_) => return None,
    })
}
