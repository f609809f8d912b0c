//! Multi-kernel adaptive-graph NMF.
//!
//! The basis lives in an implicit feature space: `H = Phi(X) G` with a
//! nonnegative coefficient matrix `G`, so `H` is never formed and every piece
//! of solver algebra goes through the Gram matrix `K = Phi(X)^T Phi(X)`. The
//! reconstruction objective is
//!
//! ```text
//!     tr(K) - 2 tr(K G W) + tr(K G W W^T G^T)
//! ```
//!
//! which equals `||Phi(X) - Phi(X) G W||^2` for any feature map realizing `K`.
//! A bank of candidate kernels is blended as `K = sum_k mu_k K^k`, the same
//! combination scores the graph affinities on a fixed k-nearest-neighbor edge
//! set, and `mu` solves the familiar diagonal simplex QP with per-kernel
//! energies as linear costs.
//!
//! The edge set is built once from Euclidean neighbors in the input space and
//! reused across `mu` updates; rebuilding it per iteration would make the
//! `mu` subproblem non-smooth.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{graph_from_kernel, knn_edges, regularizer_value, AffinityGraph, Distance, EdgeSet};
use crate::kernel::{combine, gram, KernelMatrix, KernelSpec};
use crate::matrix::{floored_div, NonNegMatrix, SolveReport, Termination, EPS};
use crate::multi_graph::{default_inner_iters, update_mu};
use crate::nmf::NmfConfig;
use crate::simplex::SimplexWeights;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiKernelConfig {
    pub base: NmfConfig,
    /// Tradeoff of the `||mu||^2` anti-concentration term; must be positive.
    pub beta: f64,
    /// Candidate kernel bank; must be nonempty.
    pub kernels: Vec<KernelSpec>,
    /// Neighbor count for the fixed edge set.
    pub k_neighbors: usize,
    pub outer_iters: usize,
    /// Kernel-space multiplicative steps per outer iteration.
    #[serde(default = "default_inner_iters")]
    pub inner_iters: usize,
}

impl MultiKernelConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.beta <= 0.0 || !self.beta.is_finite() {
            return Err(Error::param("beta", format!("must be > 0, got {}", self.beta)));
        }
        if self.kernels.is_empty() {
            return Err(Error::param("kernels", "candidate bank must not be empty"));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        if self.k_neighbors < 1 {
            return Err(Error::param("k_neighbors", "must be at least 1"));
        }
        Ok(())
    }
}

/// Output of [`solve_multi_kernel`]: coefficient factors, learned kernel
/// weights, the outer-iteration objective trace, and per-iteration snapshots.
#[derive(Clone, Debug)]
pub struct MultiKernelResult {
    pub g: NonNegMatrix,
    pub w: NonNegMatrix,
    pub mu: SimplexWeights,
    pub report: SolveReport,
    pub mu_trace: Vec<SimplexWeights>,
    pub energy_trace: Vec<Vec<f64>>,
    /// `X G`, exported when the first bank kernel is linear (there `H = X G`).
    pub linear_h: Option<NonNegMatrix>,
}

fn check_kernel_dims(k: &KernelMatrix, g: &Array2<f64>, w: &Array2<f64>) -> Result<()> {
    let n = k.n();
    if g.nrows() != n || g.ncols() != w.nrows() || w.ncols() != n {
        return Err(Error::dim(format!(
            "kernel over {n} samples, g is {}x{}, w is {}x{}",
            g.nrows(),
            g.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// Reconstruction objective in the implicit feature space:
/// `tr(K) - 2 tr(K G W) + tr(K G W W^T G^T)`. Nonnegative up to roundoff.
pub fn kernel_objective(k: &KernelMatrix, g: &Array2<f64>, w: &Array2<f64>) -> Result<f64> {
    check_kernel_dims(k, g, w)?;
    let gram = k.gram();
    let gw = g.dot(w);
    let kgw = gram.dot(&gw);
    let tr_k: f64 = gram.diag().sum();
    let tr_kgw: f64 = kgw.diag().sum();
    let tr_quad: f64 = (&kgw * &gw).sum();
    Ok(tr_k - 2.0 * tr_kgw + tr_quad)
}

/// Per-kernel energies of the `mu` subproblem: reconstruction under `K^k`
/// plus the masked graph term `alpha/2 sum_{(i,j) in E} K^k_ij ||w_i - w_j||^2`
/// (counting both orientations).
pub fn per_kernel_energies(
    kernels: &[KernelMatrix],
    g: &Array2<f64>,
    w: &Array2<f64>,
    edges: &EdgeSet,
    alpha: f64,
) -> Result<Vec<f64>> {
    kernels
        .iter()
        .map(|k| {
            let recon = kernel_objective(k, g, w)?;
            let masked = graph_from_kernel(k, edges)?;
            Ok(recon + alpha * regularizer_value(&masked, w)?)
        })
        .collect()
}

/// The `mu` subproblem is the same diagonal simplex QP as the multi-graph
/// variant.
pub fn update_mu_kernel(energies: &[f64], beta: f64) -> Result<SimplexWeights> {
    update_mu(energies, beta)
}

/// One multiplicative step in kernel space:
///
/// ```text
///     G <- G .* (K W^T) ./ (K G W W^T + eps)
///     W <- W .* (G^T K + alpha W A) ./ (G^T K G W + alpha W D + eps)
/// ```
pub fn kernel_step(
    k: &KernelMatrix,
    g: &Array2<f64>,
    w: &Array2<f64>,
    graph_mu: &AffinityGraph,
    alpha: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_kernel_dims(k, g, w)?;
    if graph_mu.n() != k.n() {
        return Err(Error::dim(format!(
            "graph covers {} samples, kernel covers {}",
            graph_mu.n(),
            k.n()
        )));
    }
    if alpha < 0.0 || alpha.is_nan() {
        return Err(Error::param("alpha", format!("must be >= 0, got {alpha}")));
    }
    let gram = k.gram();

    let num_g = gram.dot(&w.t());
    let den_g = gram.dot(g).dot(&w.dot(&w.t()));
    let g2 = g * &floored_div(&num_g, &den_g);

    let g2tk = g2.t().dot(gram);
    let mut num_w = g2tk.clone();
    num_w.scaled_add(alpha, &w.dot(graph_mu.affinity()));
    let mut den_w = g2tk.dot(&g2).dot(w);
    let mut wd = w.clone();
    for (mut col, &deg) in wd.columns_mut().into_iter().zip(graph_mu.degree()) {
        col.mapv_inplace(|v| v * deg);
    }
    den_w.scaled_add(alpha, &wd);
    let w2 = w * &floored_div(&num_w, &den_w);
    Ok((g2, w2))
}

/// Strictly positive starting factors for the kernel solver, scaled so the
/// product `G W` starts near identity magnitude. Deterministic given the seed.
pub fn init_kernel_factors(n: usize, m: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let scale = (1.0 / (n as f64 * m as f64)).sqrt().max(EPS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
        let flat: Vec<f64> = (0..rows * cols)
            .map(|_| (1.0 - rng.gen::<f64>()) * scale)
            .collect();
        Array2::from_shape_vec((rows, cols), flat).expect("shape matches draw count")
    };
    let g = draw(n, m, &mut rng);
    let w = draw(m, n, &mut rng);
    (g, w)
}

/// Alternating solver for the multi-kernel objective. The trace records
/// `sum_k mu_k e_k + beta ||mu||^2` once per outer iteration.
pub fn solve_multi_kernel(x: &NonNegMatrix, cfg: &MultiKernelConfig) -> Result<MultiKernelResult> {
    cfg.validate()?;
    let start = Instant::now();
    let bank: Result<Vec<KernelMatrix>> = cfg
        .kernels
        .par_iter()
        .map(|spec| gram(spec, x))
        .collect();
    let bank = bank?;
    let edges = knn_edges(x, cfg.k_neighbors, Distance::Euclidean)?;
    let n = x.cols();
    let alpha = cfg.base.alpha;
    let beta = cfg.beta;

    let (mut g, mut w) = init_kernel_factors(n, cfg.base.m, cfg.base.seed);
    let mut mu = SimplexWeights::uniform(bank.len())?;

    let joint = |mu: &SimplexWeights, e: &[f64]| -> f64 {
        let lin: f64 = mu.values().iter().zip(e).map(|(&m, &e)| m * e).sum();
        let ridge: f64 = mu.values().iter().map(|&m| m * m).sum();
        lin + beta * ridge
    };

    let mut energies = per_kernel_energies(&bank, &g, &w, &edges, alpha)?;
    let mut trace = vec![joint(&mu, &energies)];
    let mut mu_trace = Vec::with_capacity(cfg.outer_iters);
    let mut energy_trace = Vec::with_capacity(cfg.outer_iters);

    for _ in 0..cfg.outer_iters {
        let combined = combine(&bank, &mu)?;
        let graph_mu = graph_from_kernel(&combined, &edges)?;
        for _ in 0..cfg.inner_iters {
            let (g2, w2) = kernel_step(&combined, &g, &w, &graph_mu, alpha)?;
            g = g2;
            w = w2;
        }
        energies = per_kernel_energies(&bank, &g, &w, &edges, alpha)?;
        mu = update_mu_kernel(&energies, beta)?;
        trace.push(joint(&mu, &energies));
        mu_trace.push(mu.clone());
        energy_trace.push(energies.clone());
    }

    let linear_h = match cfg.kernels.first() {
        Some(KernelSpec::Linear) => Some(NonNegMatrix::new(x.as_array().dot(&g))?),
        _ => None,
    };
    let iterations = trace.len() - 1;
    let report = SolveReport {
        objective_trace: trace,
        iterations,
        termination: Termination::MaxIterations,
        seed: cfg.base.seed,
        wall_time: start.elapsed(),
    };
    Ok(MultiKernelResult {
        g: NonNegMatrix::new(g)?,
        w: NonNegMatrix::new(w)?,
        mu,
        report,
        mu_trace,
        energy_trace,
        linear_h,
    })
}
