//! Matrix text formats.
//!
//! CSV: one row per line, comma separated, no header; blank lines and lines
//! starting with `#` are skipped. JSON: `{"rows": r, "cols": c, "data": [...]}`
//! with `data` in row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Mat;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_mat(m: &Mat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_mat(&self) -> Result<Mat> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "JSON matrix declares {}x{} but carries {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(Mat::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// `#[serde(with = "...")]` adapter storing a matrix as [`MatrixJson`].
pub mod as_json {
    use super::{Mat, MatrixJson};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from_mat(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        MatrixJson::deserialize(d)?.to_mat().map_err(D::Error::custom)
    }
}

/// Optional-matrix variant of [`as_json`].
pub mod as_json_opt {
    use super::{Mat, MatrixJson};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(MatrixJson::from_mat).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Mat>, D::Error> {
        Option::<MatrixJson>::deserialize(d)?
            .map(|j| j.to_mat().map_err(D::Error::custom))
            .transpose()
    }
}

pub fn parse_csv(text: &str) -> Result<Mat> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (colno, field) in trimmed.split(',').enumerate() {
            let f = field.trim();
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                column: colno + 1,
                message: format!("'{f}' is not a number"),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: row.len().min(first.len()) + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no matrix rows".into(),
        });
    }
    let (r, c) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Mat::from_row_slice(r, c, &flat))
}

pub fn to_csv(m: &Mat) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_json(text: &str) -> Result<Mat> {
    let mj: MatrixJson = serde_json::from_str(text)?;
    mj.to_mat()
}

pub fn to_json(m: &Mat) -> String {
    serde_json::to_string(&MatrixJson::from_mat(m)).expect("matrix serializes")
}

/// Reads a matrix, choosing JSON for `.json` files and CSV otherwise.
pub fn read_matrix(path: &Path) -> Result<Mat> {
    let text = std::fs::read_to_string(path)?;
    if is_json(path) {
        parse_json(&text)
    } else {
        parse_csv(&text)
    }
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    let text = if is_json(path) { to_json(m) } else { to_csv(m) };
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses a JSON array of matrices in the [`MatrixJson`] layout.
pub fn parse_json_list(text: &str) -> Result<Vec<Mat>> {
    let list: Vec<MatrixJson> = serde_json::from_str(text)?;
    list.iter().map(MatrixJson::to_mat).collect()
}

/// Reads a list of observations: a `.json` array of matrices, or a directory
/// whose `.csv`/`.json` files (in name order) hold one matrix each.
pub fn read_matrix_list(path: &Path) -> Result<Vec<Mat>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("json"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Io(format!("no .csv or .json matrices in {}", path.display())));
        }
        files.iter().map(|p| read_matrix(p)).collect()
    } else {
        parse_json_list(&std::fs::read_to_string(path)?)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
