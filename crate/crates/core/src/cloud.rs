//! Point clouds and their CSV representation.
//!
//! The on-disk format is one row per point, `p` numeric columns named
//! `x0..x{p-1}`, and an optional trailing integer column named `label`.
//! A header row is required.

use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{DiffmapError, Result};

/// `n` sample points in `p` dimensions with optional ground-truth labels.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Array2<f64>,
    labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = points.nrows();
        if n < 2 {
            return Err(DiffmapError::Dimension(format!(
                "need at least 2 points, got {n}"
            )));
        }
        if points.ncols() == 0 {
            return Err(DiffmapError::Dimension("points have zero columns".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(DiffmapError::Dimension(
                "point coordinates must be finite".into(),
            ));
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(DiffmapError::Dimension(format!(
                    "label vector length {} does not match point count {n}",
                    l.len()
                )));
            }
        }
        Ok(Self { points, labels })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// Squared Euclidean distance between points `i` and `j`.
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.points.row(i), self.points.row(j))
    }

    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())?;
        let headers = reader
            .headers()
            .map_err(|e| DiffmapError::Parse {
                row: 1,
                msg: e.to_string(),
            })?
            .clone();
        if headers.is_empty() {
            return Err(DiffmapError::Parse {
                row: 1,
                msg: "empty header".into(),
            });
        }
        let has_labels = headers.iter().last() == Some("label");
        let p = if has_labels {
            headers.len() - 1
        } else {
            headers.len()
        };
        if p == 0 {
            return Err(DiffmapError::Parse {
                row: 1,
                msg: "no coordinate columns".into(),
            });
        }

        let mut coords: Vec<f64> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        let mut n = 0usize;
        for (idx, record) in reader.records().enumerate() {
            let row = idx + 2; // 1-based, after the header
            let record = record.map_err(|e| DiffmapError::Parse {
                row,
                msg: e.to_string(),
            })?;
            if record.len() != headers.len() {
                return Err(DiffmapError::Parse {
                    row,
                    msg: format!("expected {} fields, got {}", headers.len(), record.len()),
                });
            }
            for field in record.iter().take(p) {
                let v: f64 = field.trim().parse().map_err(|_| DiffmapError::Parse {
                    row,
                    msg: format!("non-numeric cell {field:?}"),
                })?;
                coords.push(v);
            }
            if has_labels {
                let field = record.get(p).unwrap();
                let l: usize = field.trim().parse().map_err(|_| DiffmapError::Parse {
                    row,
                    msg: format!("non-integer label {field:?}"),
                })?;
                labels.push(l);
            }
            n += 1;
        }
        if n == 0 {
            return Err(DiffmapError::Parse {
                row: 2,
                msg: "no data rows".into(),
            });
        }
        let points =
            Array2::from_shape_vec((n, p), coords).expect("shape follows from construction");
        Self::new(points, if has_labels { Some(labels) } else { None })
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut writer = csv::Writer::from_path(path.as_ref())?;
        let p = self.dim();
        let mut header: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        writer.write_record(&header)?;
        for i in 0..self.n() {
            let mut record: Vec<String> =
                self.points.row(i).iter().map(|v| format!("{v}")).collect();
            if let Some(ref l) = self.labels {
                record.push(format!("{}", l[i]));
            }
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

impl From<csv::Error> for DiffmapError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => match e.into_kind() {
                csv::ErrorKind::Io(io) => DiffmapError::Io(io),
                _ => unreachable!(),
            },
            _ => DiffmapError::Parse {
                row: e.position().map(|pos| pos.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            },
        }
    }
}

pub(crate) fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_single_point() {
        let res = PointCloud::new(array![[0.0, 1.0]], None);
        assert!(res.is_err());
    }

    #[test]
    fn rejects_nonfinite() {
        let res = PointCloud::new(array![[0.0], [f64::NAN]], None);
        assert!(res.is_err());
    }

    #[test]
    fn rejects_label_length_mismatch() {
        let res = PointCloud::new(array![[0.0], [1.0]], Some(vec![0]));
        assert!(res.is_err());
    }

    #[test]
    fn empty_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        match PointCloud::load_csv(&path) {
            Err(DiffmapError::Parse { .. }) => {}
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn hand_written_file_parses_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("three.csv");
        std::fs::write(&path, "x0,x1,label\n0.5,-1.25,0\n2,3,1\n-0.125,0.75,1\n").unwrap();
        let cloud = PointCloud::load_csv(&path).unwrap();
        assert_eq!(cloud.n(), 3);
        assert_eq!(cloud.dim(), 2);
        assert_eq!(cloud.points()[[0, 0]], 0.5);
        assert_eq!(cloud.points()[[1, 1]], 3.0);
        assert_eq!(cloud.points()[[2, 0]], -0.125);
        assert_eq!(cloud.labels(), Some(&[0, 1, 1][..]));
    }

    #[test]
    fn ragged_row_reports_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ragged.csv");
        std::fs::write(&path, "x0,x1\n1,2\n3\n").unwrap();
        match PointCloud::load_csv(&path) {
            Err(DiffmapError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x0\n1.0\nabc\n").unwrap();
        match PointCloud::load_csv(&path) {
            Err(DiffmapError::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }
}
