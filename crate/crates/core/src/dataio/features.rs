//! Header-free `label,v1,...,vD` feature files.

use std::io::Write;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::math::Matrix;

pub fn load_features_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            row: 0,
            msg: format!("{}: {e}", path.display()),
        })?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Csv { row, msg: e.to_string() })?;
        if rec.len() < 2 {
            return Err(Error::Csv {
                row,
                msg: "expected a label and at least one value".into(),
            });
        }
        let d = rec.len() - 1;
        match width {
            None => width = Some(d),
            Some(w) if w != d => {
                return Err(Error::Csv {
                    row,
                    msg: format!("ragged row: {d} values, expected {w}"),
                })
            }
            _ => {}
        }
        let label: usize = rec[0].parse().map_err(|_| Error::Csv {
            row,
            msg: format!("label {:?} is not a non-negative integer", &rec[0]),
        })?;
        labels.push(label);
        for (col, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                row,
                msg: format!("column {} value {cell:?} is not numeric", col + 2),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row,
                    msg: format!("column {} value is not finite", col + 2),
                });
            }
            data.push(v);
        }
    }
    let Some(d) = width else {
        return Err(Error::Csv {
            row: 0,
            msg: format!("{} contains no rows", path.display()),
        });
    };
    Ok(Dataset {
        x: Matrix::new(labels.len(), d, data)?,
        labels,
    })
}

/// Values are written in shortest round-trip form.
pub fn write_features_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    for (row, label) in data.x.row_iter().zip(&data.labels) {
        out.push_str(&label.to_string());
        for v in row {
            out.push(',');
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
