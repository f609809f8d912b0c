//! Multiple-graph regularized NMF.
//!
//! A pool of candidate graphs `{A^1, ..., A^l}` (different distances,
//! affinities, neighborhood sizes) is blended into a single regularizer
//! `A* = sum_k mu_k A^k` with simplex-constrained weights `mu`. The joint
//! objective is
//!
//! ```text
//!     ||X - H W||^2 + alpha/2 sum_ij A*_ij ||w_i - w_j||^2 + beta ||mu||^2
//! ```
//!
//! and is minimized by alternation: graph-regularized multiplicative steps on
//! the combined graph at fixed `mu`, then the exact diagonal simplex QP for
//! `mu` at fixed factors. The `beta ||mu||^2` term keeps the learned graph
//! from collapsing onto a single candidate.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, regularizer_value, AffinityGraph, GraphSpec};
use crate::matrix::{NonNegMatrix, SolveReport, Termination};
use crate::nmf::{gnmf_step, init_factors_impl, nmf_objective, Factorization, NmfConfig};
use crate::simplex::{self, DiagQP, SimplexWeights};

pub(crate) fn default_inner_iters() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiGraphConfig {
    pub base: NmfConfig,
    /// Tradeoff of the `||mu||^2` anti-concentration term; must be positive.
    pub beta: f64,
    /// Candidate graph pool; must be nonempty.
    pub graphs: Vec<GraphSpec>,
    pub outer_iters: usize,
    /// Graph-regularized steps per outer iteration.
    #[serde(default = "default_inner_iters")]
    pub inner_iters: usize,
}

impl MultiGraphConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.beta <= 0.0 || !self.beta.is_finite() {
            return Err(Error::param("beta", format!("must be > 0, got {}", self.beta)));
        }
        if self.graphs.is_empty() {
            return Err(Error::param("graphs", "candidate pool must not be empty"));
        }
        for g in &self.graphs {
            g.validate()?;
        }
        Ok(())
    }
}

/// Output of [`solve_multi_graph`]: the factorization, the learned graph
/// weights, and the per-outer-iteration weight and energy snapshots.
#[derive(Clone, Debug)]
pub struct MultiGraphResult {
    pub factorization: Factorization,
    pub mu: SimplexWeights,
    pub mu_trace: Vec<SimplexWeights>,
    pub energy_trace: Vec<Vec<f64>>,
}

/// Per-graph regularizer energies `e_k = alpha * (1/2) sum_ij A^k_ij
/// ||w_i - w_j||^2`, the linear costs of the `mu` subproblem.
pub fn graph_energies(
    graphs: &[AffinityGraph],
    w: &Array2<f64>,
    alpha: f64,
) -> Result<Vec<f64>> {
    graphs
        .iter()
        .map(|g| Ok(alpha * regularizer_value(g, w)?))
        .collect()
}

/// Solves the `mu` subproblem `min sum_k beta mu_k^2 + sum_k e_k mu_k` on the
/// simplex. Equivalently, the Euclidean projection of `-e / (2 beta)`.
pub fn update_mu(energies: &[f64], beta: f64) -> Result<SimplexWeights> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::param("beta", format!("must be > 0, got {beta}")));
    }
    let qp = DiagQP::new(vec![beta; energies.len()], energies.to_vec())?;
    simplex::solve(&qp)
}

/// Blends candidate affinities into `A* = sum_k mu_k A^k`.
pub fn combine_graphs(graphs: &[AffinityGraph], mu: &SimplexWeights) -> Result<AffinityGraph> {
    if graphs.is_empty() {
        return Err(Error::param("graphs", "need at least one graph"));
    }
    if mu.len() != graphs.len() {
        return Err(Error::dim(format!(
            "{} graphs but {} weights",
            graphs.len(),
            mu.len()
        )));
    }
    let n = graphs[0].n();
    if graphs.iter().any(|g| g.n() != n) {
        return Err(Error::dim("graphs cover different sample counts".to_string()));
    }
    let mut affinity = Array2::zeros((n, n));
    for (g, &w) in graphs.iter().zip(mu.values()) {
        affinity.scaled_add(w, g.affinity());
    }
    AffinityGraph::from_affinity(affinity)
}

/// Alternating solver for the multiple-graph objective.
///
/// Builds the candidate pool from `cfg.graphs`, starts from uniform `mu`, and
/// per outer iteration (i) combines the pool under the current `mu`, (ii) runs
/// `inner_iters` graph-regularized steps, (iii) refreshes `mu` by the exact
/// QP. The report trace holds the joint objective once per outer iteration.
pub fn solve_multi_graph(x: &NonNegMatrix, cfg: &MultiGraphConfig) -> Result<MultiGraphResult> {
    cfg.validate()?;
    let start = Instant::now();
    let graphs: Result<Vec<AffinityGraph>> = cfg
        .graphs
        .par_iter()
        .map(|spec| build_knn_graph(x, spec))
        .collect();
    let graphs = graphs?;
    let alpha = cfg.base.alpha;
    let beta = cfg.beta;
    let data = x.as_array();

    let (mut h, mut w) = init_factors_impl(data, cfg.base.m, cfg.base.seed);
    let mut mu = SimplexWeights::uniform(graphs.len())?;

    let joint = |h: &Array2<f64>, w: &Array2<f64>, mu: &SimplexWeights, e: &[f64]| -> Result<f64> {
        let recon = nmf_objective(data, h, w)?;
        let graph_term: f64 = mu.values().iter().zip(e).map(|(&m, &e)| m * e).sum();
        let ridge: f64 = mu.values().iter().map(|&m| m * m).sum();
        Ok(recon + graph_term + beta * ridge)
    };

    let mut energies = graph_energies(&graphs, &w, alpha)?;
    let mut trace = vec![joint(&h, &w, &mu, &energies)?];
    let mut mu_trace = Vec::with_capacity(cfg.outer_iters);
    let mut energy_trace = Vec::with_capacity(cfg.outer_iters);

    for _ in 0..cfg.outer_iters {
        let combined = combine_graphs(&graphs, &mu)?;
        for _ in 0..cfg.inner_iters {
            let (h2, w2) = gnmf_step(data, &h, &w, &combined, alpha)?;
            h = h2;
            w = w2;
        }
        energies = graph_energies(&graphs, &w, alpha)?;
        mu = update_mu(&energies, beta)?;
        trace.push(joint(&h, &w, &mu, &energies)?);
        mu_trace.push(mu.clone());
        energy_trace.push(energies.clone());
    }

    let iterations = trace.len() - 1;
    let report = SolveReport {
        objective_trace: trace,
        iterations,
        termination: Termination::MaxIterations,
        seed: cfg.base.seed,
        wall_time: start.elapsed(),
    };
    Ok(MultiGraphResult {
        factorization: Factorization {
            h: NonNegMatrix::new(h)?,
            w: NonNegMatrix::new(w)?,
            report,
        },
        mu,
        mu_trace,
        energy_trace,
    })
}
