//! One-dimensional potentials U(x). The sampling density is e^{-U(x)}.

use serde::{Deserialize, Serialize};

use crate::error::{DiffmapError, Result};

/// Built-in potential profiles plus tabulated values with linear
/// interpolation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Potential {
    Const,
    /// U(x) = a (x^2 - 1)^2 + b x; b != 0 tilts the wells.
    DoubleWell { a: f64, b: f64 },
    /// U(x) = k x^2 / 2.
    Harmonic { k: f64 },
    /// Piecewise-linear table of (x, U); x strictly increasing.
    Table { points: Vec<(f64, f64)> },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        if let Potential::Table { points } = self {
            if points.len() < 2 {
                return Err(DiffmapError::Range(
                    "potential table needs at least 2 points".into(),
                ));
            }
            if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(DiffmapError::Range(
                    "potential table abscissae must be strictly increasing".into(),
                ));
            }
            if points.iter().any(|(x, u)| !x.is_finite() || !u.is_finite()) {
                return Err(DiffmapError::Range("potential table must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Const => 0.0,
            Potential::DoubleWell { a, b } => {
                let q = x * x - 1.0;
                a * q * q + b * x
            }
            Potential::Harmonic { k } => 0.5 * k * x * x,
            Potential::Table { points } => {
                let (i, _) = table_segment(points, x);
                let (x0, u0) = points[i];
                let (x1, u1) = points[i + 1];
                u0 + (u1 - u0) * (x - x0) / (x1 - x0)
            }
        }
    }

    pub fn gradient(&self, x: f64) -> f64 {
        match self {
            Potential::Const => 0.0,
            Potential::DoubleWell { a, b } => 4.0 * a * x * (x * x - 1.0) + b,
            Potential::Harmonic { k } => k * x,
            Potential::Table { points } => {
                let (i, _) = table_segment(points, x);
                let (x0, u0) = points[i];
                let (x1, u1) = points[i + 1];
                (u1 - u0) / (x1 - x0)
            }
        }
    }

    /// Parses CLI potential specs: `const`, `double_well:a,b`, `harmonic:k`
    /// or a path to a CSV table of (x, U).
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let pot = if spec == "const" {
            Potential::Const
        } else if let Some(args) = spec.strip_prefix("double_well:") {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() != 2 {
                return Err(DiffmapError::Range(format!(
                    "double_well takes two parameters, got {spec:?}"
                )));
            }
            let a = parse_f64(parts[0])?;
            let b = parse_f64(parts[1])?;
            Potential::DoubleWell { a, b }
        } else if let Some(arg) = spec.strip_prefix("harmonic:") {
            Potential::Harmonic { k: parse_f64(arg)? }
        } else {
            Potential::load_table_csv(spec)?
        };
        pot.validate()?;
        Ok(pot)
    }

    /// CSV table of (x, U) with a header row.
    pub fn load_table_csv<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())?;
        let mut points = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let row = idx + 2;
            let record = record.map_err(|e| DiffmapError::Parse {
                row,
                msg: e.to_string(),
            })?;
            if record.len() != 2 {
                return Err(DiffmapError::Parse {
                    row,
                    msg: format!("expected 2 fields, got {}", record.len()),
                });
            }
            let x: f64 = record[0].trim().parse().map_err(|_| DiffmapError::Parse {
                row,
                msg: format!("non-numeric x {:?}", &record[0]),
            })?;
            let u: f64 = record[1].trim().parse().map_err(|_| DiffmapError::Parse {
                row,
                msg: format!("non-numeric U {:?}", &record[1]),
            })?;
            points.push((x, u));
        }
        let pot = Potential::Table { points };
        pot.validate()?;
        Ok(pot)
    }

    /// Interior local maxima of U on a fine scan; these separate the wells.
    pub fn barriers(&self, lo: f64, hi: f64) -> Vec<f64> {
        const SCAN: usize = 2048;
        let h = (hi - lo) / SCAN as f64;
        let mut out = Vec::new();
        let mut prev = self.value(lo);
        let mut cur = self.value(lo + h);
        for i in 2..=SCAN {
            let next = self.value(lo + h * i as f64);
            if cur > prev && cur >= next {
                out.push(lo + h * (i as f64 - 1.0));
            }
            prev = cur;
            cur = next;
        }
        out
    }

    /// Index of the well basin containing x: the number of barriers below x.
    pub fn basin(&self, barriers: &[f64], x: f64) -> usize {
        barriers.iter().filter(|&&b| x > b).count()
    }
}

/// Segment index for x (clamped extrapolation with the edge slope) plus a
/// unit factor kept for clarity.
fn table_segment(points: &[(f64, f64)], x: f64) -> (usize, f64) {
    let n = points.len();
    if x <= points[0].0 {
        return (0, 1.0);
    }
    if x >= points[n - 1].0 {
        return (n - 2, 1.0);
    }
    let i = points.partition_point(|(px, _)| *px <= x) - 1;
    (i.min(n - 2), 1.0)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| DiffmapError::Range(format!("invalid number {s:?}")))
}
