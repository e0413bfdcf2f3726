//! File formats: JSON model, trajectory, and noise descriptions plus CSV
//! trajectories. All readers report schema problems with the offending field
//! named, so the command line can fail with a usable message.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::gains::robust::{ball_noise_model, NoiseModel};
use crate::lti::{StateSpace, Trajectory};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("reading {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} is not valid JSON: {detail}")]
    Json { path: String, detail: String },
    #[error("{path}: {detail}")]
    Schema { path: String, detail: String },
    #[error("{path}: {detail}")]
    Csv { path: String, detail: String },
}

fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn schema(path: &Path, detail: impl Into<String>) -> IoError {
    IoError::Schema {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Nested row-major array into a matrix; rejects ragged rows.
fn to_matrix(path: &Path, name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, IoError> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let ncols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(schema(
                path,
                format!(
                    "field {name}: row {i} has {} entries but row 0 has {ncols}",
                    r.len()
                ),
            ));
        }
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

/// Reads a state-space model from a JSON object with keys `A`, `B`, `C`, `D`
/// holding row-major nested arrays.
pub fn read_model(path: &Path) -> Result<StateSpace<f64>, IoError> {
    let text = read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let a = to_matrix(path, "A", &file.a)?;
    let b = to_matrix(path, "B", &file.b)?;
    let c = to_matrix(path, "C", &file.c)?;
    let d = to_matrix(path, "D", &file.d)?;
    // Empty arrays lose their column counts; rebuild them for static models.
    let (b, c) = if a.nrows() == 0 {
        (DMatrix::zeros(0, d.ncols()), DMatrix::zeros(d.nrows(), 0))
    } else {
        (b, c)
    };
    StateSpace::new(a, b, c, d).map_err(|e| schema(path, e.to_string()))
}

pub fn write_model(path: &Path, ss: &StateSpace<f64>) -> Result<(), IoError> {
    let file = ModelFile {
        a: to_rows(ss.a()),
        b: to_rows(ss.b()),
        c: to_rows(ss.c()),
        d: to_rows(ss.d()),
    };
    let text = serde_json::to_string_pretty(&file).expect("model serializes");
    write_bytes(path, text.as_bytes())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryFile {
    u: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

pub fn read_trajectory_json(path: &Path) -> Result<Trajectory<f64>, IoError> {
    let text = read_to_string(path)?;
    let file: TrajectoryFile = serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let u = to_matrix(path, "u", &file.u)?;
    let y = to_matrix(path, "y", &file.y)?;
    Trajectory::new(u, y).map_err(|e| schema(path, e.to_string()))
}

pub fn write_trajectory_json(path: &Path, traj: &Trajectory<f64>) -> Result<(), IoError> {
    let file = TrajectoryFile {
        u: to_rows(traj.u()),
        y: to_rows(traj.y()),
    };
    let text = serde_json::to_string_pretty(&file).expect("trajectory serializes");
    write_bytes(path, text.as_bytes())
}

/// Reads a trajectory from CSV with headers `u_1..u_m,y_1..y_m`. The channel
/// count is inferred from the header row.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory<f64>, IoError> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IoError::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?
        .clone();
    let m = headers.iter().take_while(|h| h.starts_with("u_")).count();
    if m == 0 {
        return Err(schema(path, "header must start with u_1"));
    }
    let expect: Vec<String> = (1..=m)
        .map(|i| format!("u_{i}"))
        .chain((1..=m).map(|i| format!("y_{i}")))
        .collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expect.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(schema(
            path,
            format!("expected header {} but found {}", expect.join(","), got.join(",")),
        ));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IoError::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if record.len() != 2 * m {
            return Err(schema(
                path,
                format!("row {k} has {} fields, expected {}", record.len(), 2 * m),
            ));
        }
        let mut row = Vec::with_capacity(2 * m);
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                schema(path, format!("row {k}, column {}: not a number: {field:?}", j + 1))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(schema(path, "no data rows"));
    }
    let n = rows.len();
    let u = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    let y = DMatrix::from_fn(n, m, |i, j| rows[i][m + j]);
    Trajectory::new(u, y).map_err(|e| schema(path, e.to_string()))
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory<f64>) -> Result<(), IoError> {
    let m = traj.channels();
    let mut out = String::new();
    let header: Vec<String> = (1..=m)
        .map(|i| format!("u_{i}"))
        .chain((1..=m).map(|i| format!("y_{i}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..traj.len() {
        let mut fields = Vec::with_capacity(2 * m);
        for j in 0..m {
            fields.push(format!("{}", traj.u()[(k, j)]));
        }
        for j in 0..m {
            fields.push(format!("{}", traj.y()[(k, j)]));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BallSpec {
    pub v_bar: f64,
}

/// Noise description: either a per-sample norm ball or explicit quadratic
/// bound matrices.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseFile {
    Ball {
        ball: BallSpec,
    },
    Full {
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
        #[serde(rename = "S")]
        s: Vec<Vec<f64>>,
        #[serde(rename = "R")]
        r: Vec<Vec<f64>>,
        #[serde(rename = "Bv")]
        bv: Vec<Vec<f64>>,
    },
}

pub fn read_noise(path: &Path) -> Result<NoiseFile, IoError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

impl NoiseFile {
    /// Expands the description into explicit matrices for a record of
    /// `n_samples` steps, window length `l`, and `m` channels.
    pub fn to_noise_model(
        &self,
        path: &Path,
        n_samples: usize,
        l: usize,
        m: usize,
    ) -> Result<NoiseModel<f64>, IoError> {
        match self {
            NoiseFile::Ball { ball } => {
                if ball.v_bar < 0.0 {
                    return Err(schema(path, "ball.v_bar must be nonnegative"));
                }
                ball_noise_model(ball.v_bar, n_samples, l, m)
                    .map_err(|e| schema(path, e.to_string()))
            }
            NoiseFile::Full { q, s, r, bv } => {
                let q = to_matrix(path, "Q", q)?;
                let s = to_matrix(path, "S", s)?;
                let r = to_matrix(path, "R", r)?;
                let bv = to_matrix(path, "Bv", bv)?;
                NoiseModel::new(q, s, r, bv).map_err(|e| schema(path, e.to_string()))
            }
        }
    }
}
