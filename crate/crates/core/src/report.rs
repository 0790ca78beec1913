//! Plot-ready CSV writers and JSON reports.
//!
//! All floats are serialized with Rust's shortest round-trip formatting, so
//! reading a file back reproduces the in-memory values exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::Result;

pub fn write_json<T: Serialize, P: AsRef<Path>>(value: &T, path: P) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value).map_err(std::io::Error::from)?;
    writeln!(file)?;
    file.flush()?;
    Ok(())
}

/// Numeric matrix with generated column names `{prefix}0..{prefix}{c-1}`.
pub fn write_matrix_csv<P: AsRef<Path>>(
    matrix: ArrayView2<f64>,
    prefix: &str,
    path: P,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let header: Vec<String> = (0..matrix.ncols()).map(|j| format!("{prefix}{j}")).collect();
    writer.write_record(&header)?;
    for row in matrix.rows() {
        let record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_matrix_csv<P: AsRef<Path>>(path: P) -> Result<Array2<f64>> {
    let cloud = crate::cloud::PointCloud::load_csv(path)?;
    Ok(cloud.points().to_owned())
}

/// `index,eigenvalue` rows in descending order.
pub fn write_spectrum_csv<P: AsRef<Path>>(eigenvalues: ArrayView1<f64>, path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["index", "eigenvalue"])?;
    for (i, v) in eigenvalues.iter().enumerate() {
        writer.write_record([i.to_string(), v.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_spectrum_csv<P: AsRef<Path>>(path: P) -> Result<Array1<f64>> {
    let m = read_matrix_csv(path)?;
    Ok(m.column(1).to_owned())
}

/// `index,label` rows.
pub fn write_labels_csv<P: AsRef<Path>>(labels: &[usize], path: P) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["index", "label"])?;
    for (i, l) in labels.iter().enumerate() {
        writer.write_record([i.to_string(), l.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Self-contained run summary: the echoed configuration reproduces every
/// number under the same seeds.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<crate::clustering::GapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub timings_ms: Vec<(String, f64)>,
}
