//! Dense nonnegative matrices and the elementwise arithmetic used by the
//! multiplicative solvers.
//!
//! Data is stored row-major. Samples are columns: a data set of `n` samples
//! with `d` features each is a `d x n` matrix, and the column views are the
//! sample vectors. CSV rows therefore correspond to feature dimensions.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};
use std::time::Duration;

use crate::error::{Error, Result};

/// Floor added to every multiplicative-update denominator so the quotient is
/// always finite.
pub const EPS: f64 = 1e-12;

/// Dense matrix with entrywise nonnegative, finite entries and at least one
/// row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct NonNegMatrix {
    data: Array2<f64>,
}

impl NonNegMatrix {
    /// Validates and wraps a raw array. Entry indices in errors are 1-based.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        for ((i, j), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i + 1,
                    col: j + 1,
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i + 1,
                    col: j + 1,
                    value: v,
                });
            }
        }
        Ok(NonNegMatrix { data })
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("rows have unequal lengths"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), cols), flat)
            .map_err(|e| Error::dim(e.to_string()))?;
        Self::new(data)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[[row, col]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }
}

/// Squared Frobenius distance `sum_ij (a - b)^2` between two equally shaped
/// matrices.
pub fn frobenius_sq(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dim(format!(
            "frobenius_sq operands {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(Zip::from(a).and(b).fold(0.0, |acc, &x, &y| {
        let d = x - y;
        acc + d * d
    }))
}

/// Elementwise product.
pub fn hadamard(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    a * b
}

/// Elementwise quotient with the denominator floored by [`EPS`]. Maps
/// nonnegative inputs to nonnegative outputs.
pub fn floored_div(num: &Array2<f64>, den: &Array2<f64>) -> Array2<f64> {
    Zip::from(num).and(den).map_collect(|&n, &d| n / (d + EPS))
}

/// How a solver run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// Outcome bookkeeping for one solver run.
///
/// `objective_trace` always holds `iterations + 1` entries: the objective at
/// the initial point followed by the objective after each recorded update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub seed: u64,
    #[serde(with = "duration_ms", rename = "wall_time_ms")]
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn final_objective(&self) -> f64 {
        *self
            .objective_trace
            .last()
            .expect("trace holds at least the initial objective")
    }
}

/// Serializes a `Duration` as fractional milliseconds.
mod duration_ms {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        (d.as_secs_f64() * 1e3).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1e3))
    }
}
