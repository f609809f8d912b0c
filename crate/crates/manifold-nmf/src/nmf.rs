//! Plain and graph-regularized NMF solved by multiplicative updates.
//!
//! The factor model is `X ~ H W` with `X` a `d x n` data matrix, `H` a
//! `d x m` basis matrix, and `W` an `m x n` coefficient matrix, all entrywise
//! nonnegative. One update step is
//!
//! ```text
//!     H <- H .* (X W^T) ./ (H W W^T + eps)
//!     W <- W .* (H^T X + alpha W A) ./ (H^T H W + alpha W D + eps)
//! ```
//!
//! where `A` is the graph affinity, `D = diag(degree)`, and the updated `H`
//! feeds the `W` step. With `alpha = 0` the graph terms vanish and the rules
//! reduce to plain NMF bit for bit. The updates keep nonnegative factors
//! nonnegative and drive the objective downhill; descent is asserted
//! empirically throughout the test suite rather than re-derived here.
//!
//! Solver runs are deterministic given the seed. Restarts draw seeds
//! `seed, seed + 1, ...`, run independently (in parallel), and the lowest
//! final objective wins, ties broken by the lowest seed. Factors are never
//! normalized mid-run; [`normalize_columns`] offers the post-hoc
//! reparameterization.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{regularizer_value, AffinityGraph};
use crate::matrix::{floored_div, frobenius_sq, NonNegMatrix, SolveReport, Termination, EPS};

/// Shared solver configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    /// Inner rank `m` (number of basis vectors).
    pub m: usize,
    /// Graph regularization tradeoff; ignored by the plain solver.
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Relative objective-change threshold in `(0, 1)`.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_max_iter() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-6
}

fn default_restarts() -> usize {
    1
}

impl NmfConfig {
    pub fn new(m: usize) -> Self {
        NmfConfig {
            m,
            alpha: 0.0,
            max_iter: default_max_iter(),
            tol: default_tol(),
            seed: 0,
            restarts: default_restarts(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::param("m", "inner rank must be at least 1"));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(Error::param("alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if self.tol <= 0.0 || self.tol >= 1.0 || self.tol.is_nan() {
            return Err(Error::param("tol", format!("must lie in (0, 1), got {}", self.tol)));
        }
        if self.restarts < 1 {
            return Err(Error::param("restarts", "must be at least 1"));
        }
        Ok(())
    }
}

/// A solved factor pair with its run report.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub h: NonNegMatrix,
    pub w: NonNegMatrix,
    pub report: SolveReport,
}

/// Draws strictly positive starting factors, uniform on `(0, 1]` scaled by
/// `sqrt(mean(X) / m)` so the initial product matches the magnitude of `X`.
/// Deterministic given the seed.
pub fn init_factors(x: &NonNegMatrix, m: usize, seed: u64) -> Result<(Array2<f64>, Array2<f64>)> {
    if m < 1 {
        return Err(Error::param("m", "inner rank must be at least 1"));
    }
    Ok(init_factors_impl(x.as_array(), m, seed))
}

pub(crate) fn init_factors_impl(
    x: &Array2<f64>,
    m: usize,
    seed: u64,
) -> (Array2<f64>, Array2<f64>) {
    let (d, n) = x.dim();
    let mean = x.sum() / (d * n) as f64;
    // The EPS floor keeps the start strictly positive even for all-zero input.
    let scale = (mean / m as f64).sqrt().max(EPS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
        let flat: Vec<f64> = (0..rows * cols)
            .map(|_| (1.0 - rng.gen::<f64>()) * scale)
            .collect();
        Array2::from_shape_vec((rows, cols), flat).expect("shape matches draw count")
    };
    let h = draw(d, m, &mut rng);
    let w = draw(m, n, &mut rng);
    (h, w)
}

fn check_factor_dims(x: &Array2<f64>, h: &Array2<f64>, w: &Array2<f64>) -> Result<()> {
    let (d, n) = x.dim();
    if h.nrows() != d || h.ncols() != w.nrows() || w.ncols() != n {
        return Err(Error::dim(format!(
            "x is {d}x{n}, h is {}x{}, w is {}x{}",
            h.nrows(),
            h.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// Reconstruction error `||X - H W||^2`.
pub fn nmf_objective(x: &Array2<f64>, h: &Array2<f64>, w: &Array2<f64>) -> Result<f64> {
    check_factor_dims(x, h, w)?;
    frobenius_sq(x, &h.dot(w))
}

/// Reconstruction error plus `alpha` times the manifold regularizer.
pub fn gnmf_objective(
    x: &Array2<f64>,
    h: &Array2<f64>,
    w: &Array2<f64>,
    graph: &AffinityGraph,
    alpha: f64,
) -> Result<f64> {
    let recon = nmf_objective(x, h, w)?;
    Ok(recon + alpha * regularizer_value(graph, w)?)
}

pub(crate) fn update_h(x: &Array2<f64>, h: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
    let num = x.dot(&w.t());
    let den = h.dot(&w.dot(&w.t()));
    h * &floored_div(&num, &den)
}

/// The `W` update, optionally with a graph term and/or squared feature-row
/// weights inserted as `diag(u^2)` between `H^T` and the data.
pub(crate) fn update_w(
    x: &Array2<f64>,
    h_new: &Array2<f64>,
    w: &Array2<f64>,
    graph: Option<(&AffinityGraph, f64)>,
    row_weights_sq: Option<&[f64]>,
) -> Array2<f64> {
    let (mut num, mut den) = match row_weights_sq {
        None => (h_new.t().dot(x), h_new.t().dot(h_new).dot(w)),
        Some(u2) => {
            let mut hs = h_new.clone();
            for (mut row, &s) in hs.rows_mut().into_iter().zip(u2) {
                row.mapv_inplace(|v| v * s);
            }
            (hs.t().dot(x), hs.t().dot(h_new).dot(w))
        }
    };
    if let Some((g, alpha)) = graph {
        num.scaled_add(alpha, &w.dot(g.affinity()));
        let mut wd = w.clone();
        for (mut col, &deg) in wd.columns_mut().into_iter().zip(g.degree()) {
            col.mapv_inplace(|v| v * deg);
        }
        den.scaled_add(alpha, &wd);
    }
    w * &floored_div(&num, &den)
}

/// One multiplicative step of plain NMF. The updated `H` feeds the `W` update.
pub fn nmf_step(
    x: &Array2<f64>,
    h: &Array2<f64>,
    w: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_factor_dims(x, h, w)?;
    let h2 = update_h(x, h, w);
    let w2 = update_w(x, &h2, w, None, None);
    Ok((h2, w2))
}

/// One multiplicative step of graph-regularized NMF.
pub fn gnmf_step(
    x: &Array2<f64>,
    h: &Array2<f64>,
    w: &Array2<f64>,
    graph: &AffinityGraph,
    alpha: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_factor_dims(x, h, w)?;
    if graph.n() != x.ncols() {
        return Err(Error::dim(format!(
            "graph covers {} samples, data has {}",
            graph.n(),
            x.ncols()
        )));
    }
    if alpha < 0.0 || alpha.is_nan() {
        return Err(Error::param("alpha", format!("must be >= 0, got {alpha}")));
    }
    let h2 = update_h(x, h, w);
    let w2 = update_w(x, &h2, w, Some((graph, alpha)), None);
    Ok((h2, w2))
}

fn run_once(
    x: &Array2<f64>,
    graph: Option<&AffinityGraph>,
    cfg: &NmfConfig,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>, SolveReport)> {
    let start = Instant::now();
    let (mut h, mut w) = init_factors_impl(x, cfg.m, seed);
    let objective = |h: &Array2<f64>, w: &Array2<f64>| -> Result<f64> {
        match graph {
            Some(g) => gnmf_objective(x, h, w, g, cfg.alpha),
            None => nmf_objective(x, h, w),
        }
    };
    let mut trace = Vec::with_capacity(cfg.max_iter + 1);
    trace.push(objective(&h, &w)?);
    let mut termination = Termination::MaxIterations;
    for _ in 0..cfg.max_iter {
        let (h2, w2) = match graph {
            Some(g) => gnmf_step(x, &h, &w, g, cfg.alpha)?,
            None => nmf_step(x, &h, &w)?,
        };
        h = h2;
        w = w2;
        let obj = objective(&h, &w)?;
        let prev = *trace.last().expect("trace seeded with the initial objective");
        trace.push(obj);
        if (obj - prev).abs() / (1.0 + prev) < cfg.tol {
            termination = Termination::Converged;
            break;
        }
    }
    let iterations = trace.len() - 1;
    Ok((
        h,
        w,
        SolveReport {
            objective_trace: trace,
            iterations,
            termination,
            seed,
            wall_time: start.elapsed(),
        },
    ))
}

fn solve_common(
    x: &NonNegMatrix,
    graph: Option<&AffinityGraph>,
    cfg: &NmfConfig,
) -> Result<Factorization> {
    cfg.validate()?;
    if let Some(g) = graph {
        if g.n() != x.cols() {
            return Err(Error::dim(format!(
                "graph covers {} samples, data has {}",
                g.n(),
                x.cols()
            )));
        }
    }
    if cfg.m > x.rows().min(x.cols()) {
        log::warn!(
            "inner rank m={} exceeds min(d, n)={}; the factorization is overcomplete",
            cfg.m,
            x.rows().min(x.cols())
        );
    }
    let start = Instant::now();
    let runs: Result<Vec<_>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_once(x.as_array(), graph, cfg, cfg.seed.wrapping_add(r as u64)))
        .collect();
    let best = runs?
        .into_iter()
        .min_by(|a, b| {
            a.2.final_objective()
                .total_cmp(&b.2.final_objective())
                .then(a.2.seed.cmp(&b.2.seed))
        })
        .expect("restarts >= 1");
    let (h, w, mut report) = best;
    report.wall_time = start.elapsed();
    Ok(Factorization {
        h: NonNegMatrix::new(h)?,
        w: NonNegMatrix::new(w)?,
        report,
    })
}

/// Factorizes `x` by plain NMF, returning the best of `cfg.restarts` seeded
/// runs.
pub fn solve_nmf(x: &NonNegMatrix, cfg: &NmfConfig) -> Result<Factorization> {
    solve_common(x, None, cfg)
}

/// Factorizes `x` with the manifold regularizer on the given graph.
pub fn solve_gnmf(
    x: &NonNegMatrix,
    graph: &AffinityGraph,
    cfg: &NmfConfig,
) -> Result<Factorization> {
    solve_common(x, Some(graph), cfg)
}

/// Rescales `H` to unit-norm columns with compensating row scaling of `W`.
/// The product `H W` is unchanged; zero columns are left alone. Meant as a
/// post-hoc reparameterization only, since it changes the graph-term value.
pub fn normalize_columns(
    h: &NonNegMatrix,
    w: &NonNegMatrix,
) -> Result<(NonNegMatrix, NonNegMatrix)> {
    if h.cols() != w.rows() {
        return Err(Error::dim(format!(
            "h has {} columns, w has {} rows",
            h.cols(),
            w.rows()
        )));
    }
    let mut hn = h.as_array().clone();
    let mut wn = w.as_array().clone();
    for k in 0..hn.ncols() {
        let norm = hn.column(k).dot(&hn.column(k)).sqrt();
        if norm > 0.0 {
            hn.column_mut(k).mapv_inplace(|v| v / norm);
            wn.row_mut(k).mapv_inplace(|v| v * norm);
        }
    }
    Ok((NonNegMatrix::new(hn)?, NonNegMatrix::new(wn)?))
}
