//! Training reports, their JSON form, and plain-text factor files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// JSON Schema every serialized [`TrainReport`] conforms to.
pub const REPORT_SCHEMA: &str = include_str!("../schema/train_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
    pub objective: f64,
    /// Step parameter used during this iteration (`τ_t`, or the SGD rate for baselines).
    pub tau: f64,
    /// Cumulative wall time of the iteration loop, excluding setup and I/O.
    pub seconds: f64,
    pub epoch_seconds: f64,
    /// Batch mode only: `Σ_p L^p` before and after the local step, with
    /// duals and consensus held at their pre-step values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_objective_before: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_objective_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
    pub converged: bool,
    pub total_seconds: f64,
    pub iterations: usize,
}

/// Metric history plus the global factors `A` (stacked), `B̄`, `C̄`.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub config: Value,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl TrainReport {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.iterations.last()
    }

    pub fn final_train_rmse(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.train_rmse)
    }

    pub fn final_test_rmse(&self) -> Option<f64> {
        self.last().and_then(|r| r.test_rmse)
    }

    pub fn train_rmse_history(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.train_rmse).collect()
    }

    pub fn final_summary(&self) -> FinalSummary {
        FinalSummary {
            train_rmse: self.final_train_rmse(),
            test_rmse: self.final_test_rmse(),
            converged: self.converged,
            total_seconds: self.last().map_or(0.0, |r| r.seconds),
            iterations: self.iterations.len(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "config": self.config,
            "iterations": self.iterations,
            "final": self.final_summary(),
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(w, &self.to_json())?;
        Ok(())
    }

    /// Writes `A.txt`, `B.txt`, `C.txt` into `dir`.
    pub fn write_factors(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (name, m) in [("A.txt", &self.a), ("B.txt", &self.b), ("C.txt", &self.c)] {
            write_matrix_file(dir.join(name), m)?;
        }
        Ok(())
    }
}

/// `rows cols` header, then one row per line with 17 significant digits.
pub fn write_matrix<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    writeln!(w, "{} {}", m.rows(), m.cols())?;
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_matrix_file(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<Matrix> {
    let mut lines = r.lines().enumerate();
    let (rows, cols) = loop {
        let Some((n, line)) = lines.next() else {
            return Err(Error::Parse {
                line: 0,
                message: "missing \"rows cols\" header".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line: n + 1,
                message: "invalid matrix header".into(),
            })?;
        if f.len() != 2 {
            return Err(Error::Parse {
                line: n + 1,
                message: "header must be \"rows cols\"".into(),
            });
        }
        break (f[0], f[1]);
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (n, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                line: n + 1,
                message: format!("invalid number {tok:?}"),
            })?);
        }
        if data.len() - before != cols {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected {cols} values"),
            });
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {rows} rows, found {}", data.len() / cols.max(1)),
        });
    }
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<Matrix> {
    read_matrix(BufReader::new(File::open(path)?))
}
