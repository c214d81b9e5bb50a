//! File formats: conic-program files and CSV datasets.

use std::path::Path;

use sinkhorn_dro::finite_space::{from_cbf, to_cbf, FiniteInstance};

use crate::error::{HarnessError, Result};

pub fn write_cbf(path: &Path, inst: &FiniteInstance) -> Result<()> {
    std::fs::write(path, to_cbf(inst)).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_cbf(path: &Path) -> Result<FiniteInstance> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(from_cbf(&text)?)
}

/// Features and `±1` labels read from a CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl LabeledTable {
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rescales every feature column to zero mean and unit variance; constant
    /// columns are only centered.
    pub fn standardize(&mut self) {
        let n = self.len() as f64;
        for c in 0..self.dim() {
            let mean = self.features.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = self.features.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for r in &mut self.features {
                r[c] = (r[c] - mean) / sd;
            }
        }
    }
}

/// Reads a numeric table; labels `0/1` are mapped to `−1/+1`.
///
/// `label_column` names the label header; the last column is used otherwise.
pub fn read_labeled_csv(path: &Path, label_column: Option<&str>) -> Result<LabeledTable> {
    let bad = |reason: String| HarnessError::Dataset {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(bad("need at least one feature and one label column".into()));
    }
    let label_at = match label_column {
        Some(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("no column named `{name}`")))?,
        None => headers.len() - 1,
    };
    let mut table = LabeledTable {
        features: Vec::new(),
        labels: Vec::new(),
    };
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(headers.len() - 1);
        let mut label = f64::NAN;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("row {}: `{field}` is not a number", line + 2)))?;
            if c == label_at {
                label = v;
            } else {
                row.push(v);
            }
        }
        label = if label == 1.0 {
            1.0
        } else if label == 0.0 || label == -1.0 {
            -1.0
        } else {
            return Err(bad(format!("row {}: label {label} is not 0/1 or -1/+1", line + 2)));
        };
        table.features.push(row);
        table.labels.push(label);
    }
    if table.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn reads_named_label_column() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "y,a,b\n1,0.5,2\n0,1.5,4\n1,2.5,6").unwrap();
        let t = read_labeled_csv(f.path(), Some("y")).unwrap();
        assert_eq!(t.labels, vec![1.0, -1.0, 1.0]);
        assert_eq!(t.features[1], vec![1.5, 4.0]);
    }

    #[test]
    fn standardized_columns_have_unit_variance() {
        let mut t = LabeledTable {
            features: vec![vec![1.0, 3.0], vec![2.0, 3.0], vec![3.0, 3.0]],
            labels: vec![1.0, -1.0, 1.0],
        };
        t.standardize();
        let col: Vec<f64> = t.features.iter().map(|r| r[0]).collect();
        assert!(col.iter().sum::<f64>().abs() < 1e-12);
        assert!((col.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        assert!(t.features.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn rejects_bad_labels_and_text() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,y\n1,2").unwrap();
        assert!(matches!(
            read_labeled_csv(f.path(), None),
            Err(HarnessError::Dataset { .. })
        ));
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "a,y\nx,1").unwrap();
        assert!(read_labeled_csv(g.path(), None).is_err());
    }

    #[test]
    fn cbf_file_round_trip() {
        let inst = FiniteInstance::new(vec![0.0, 1.0], vec![0.5, 0.5, 0.2, 0.8], 2, 0.1, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.cbf");
        write_cbf(&path, &inst).unwrap();
        let back = read_cbf(&path).unwrap();
        assert_eq!(back.f, inst.f);
        assert_eq!(back.n, inst.n);
        for (a, b) in back.q.iter().zip(&inst.q) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
