//! Feature-selection adaptive-graph NMF.
//!
//! Each feature row gets a simplex-constrained weight `u_c`, and both the
//! reconstruction and the neighborhood graph live in the weighted space:
//!
//! ```text
//!     ||diag(u)(X - H W)||^2 + alpha/2 sum_ij A^u_ij ||w_i - w_j||^2
//! ```
//!
//! with `A^u` built from `diag(u) X`, neighbor sets included. One outer
//! iteration (i) rebuilds `A^u` from the current `u`, (ii) runs weighted
//! multiplicative steps, and (iii) refreshes `u` by the diagonal simplex QP
//! with costs `q_c = sum_j (X - HW)^2_cj`, which routes weight toward features
//! the factorization explains well.
//!
//! Rebuilding the graph changes the objective itself, so monotonicity is only
//! meaningful inside one outer iteration; the result keeps a per-phase trace
//! (`phases`) and tests assert descent within phases, never across a refresh.

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_weighted_graph, regularizer_value, AffinityGraph, GraphSpec};
use crate::matrix::{NonNegMatrix, SolveReport, Termination};
use crate::multi_graph::default_inner_iters;
use crate::nmf::{init_factors_impl, update_h, update_w, Factorization, NmfConfig};
use crate::simplex::{self, DiagQP, SimplexWeights};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelectConfig {
    pub base: NmfConfig,
    /// Graph recipe applied in the `u`-weighted feature space.
    pub graph: GraphSpec,
    pub outer_iters: usize,
    /// Weighted multiplicative steps per outer iteration.
    #[serde(default = "default_inner_iters")]
    pub inner_iters: usize,
    /// Optional lower bound per feature weight; `u` is clamped then
    /// renormalized. Zero (the default) disables the floor.
    #[serde(default)]
    pub u_floor: f64,
}

impl FeatureSelectConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.graph.validate()?;
        if self.u_floor < 0.0 || !self.u_floor.is_finite() {
            return Err(Error::param("u_floor", format!("must be >= 0, got {}", self.u_floor)));
        }
        Ok(())
    }
}

/// Output of [`solve_feature_select`]. `phases[t]` is the objective trace of
/// outer iteration `t` at its fixed graph: the value after the refresh, after
/// each inner step, and after the `u` update. The flattened concatenation is
/// the factorization report's trace.
#[derive(Clone, Debug)]
pub struct FeatureSelectResult {
    pub factorization: Factorization,
    pub u: SimplexWeights,
    pub u_trace: Vec<SimplexWeights>,
    pub residual_energy_trace: Vec<Vec<f64>>,
    pub phases: Vec<Vec<f64>>,
}

/// Weighted objective `||diag(u)(X - HW)||^2 + alpha * regularizer(A^u, W)`.
pub fn weighted_objective(
    x: &Array2<f64>,
    h: &Array2<f64>,
    w: &Array2<f64>,
    u: &SimplexWeights,
    graph_u: &AffinityGraph,
    alpha: f64,
) -> Result<f64> {
    if u.len() != x.nrows() {
        return Err(Error::dim(format!(
            "u has {} weights for {} feature rows",
            u.len(),
            x.nrows()
        )));
    }
    let energies = residual_row_energies(x, h, w)?;
    let recon: f64 = u
        .values()
        .iter()
        .zip(&energies)
        .map(|(&uc, &qc)| uc * uc * qc)
        .sum();
    Ok(recon + alpha * regularizer_value(graph_u, w)?)
}

/// One weighted multiplicative step. The `H` rule is the plain one (the row
/// weights cancel between numerator and denominator); the `W` rule carries
/// `diag(u^2)` and the graph terms.
pub fn weighted_step(
    x: &Array2<f64>,
    h: &Array2<f64>,
    w: &Array2<f64>,
    u: &SimplexWeights,
    graph_u: &AffinityGraph,
    alpha: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if u.len() != x.nrows() {
        return Err(Error::dim(format!(
            "u has {} weights for {} feature rows",
            u.len(),
            x.nrows()
        )));
    }
    if h.nrows() != x.nrows() || h.ncols() != w.nrows() || w.ncols() != x.ncols() {
        return Err(Error::dim("factor shapes do not match the data".to_string()));
    }
    if graph_u.n() != x.ncols() {
        return Err(Error::dim(format!(
            "graph covers {} samples, data has {}",
            graph_u.n(),
            x.ncols()
        )));
    }
    let u_sq: Vec<f64> = u.values().iter().map(|&v| v * v).collect();
    let h2 = update_h(x, h, w);
    let w2 = update_w(x, &h2, w, Some((graph_u, alpha)), Some(&u_sq));
    Ok((h2, w2))
}

/// Residual row energies `q_c = sum_j (X - HW)^2_cj`.
pub fn residual_row_energies(
    x: &Array2<f64>,
    h: &Array2<f64>,
    w: &Array2<f64>,
) -> Result<Vec<f64>> {
    if h.nrows() != x.nrows() || h.ncols() != w.nrows() || w.ncols() != x.ncols() {
        return Err(Error::dim("factor shapes do not match the data".to_string()));
    }
    let residual = x - &h.dot(w);
    Ok(residual
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|&v| v * v).sum())
        .collect())
}

/// Refreshes `u` by minimizing `sum_c u_c^2 q_c` on the simplex. With a
/// strictly positive residual, `u_c` is proportional to `1/q_c`; if the
/// residual is identically zero every `u` is optimal and the uniform vector is
/// returned.
pub fn update_u(x: &Array2<f64>, h: &Array2<f64>, w: &Array2<f64>) -> Result<SimplexWeights> {
    let q = residual_row_energies(x, h, w)?;
    if q.iter().all(|&v| v == 0.0) {
        return SimplexWeights::uniform(q.len());
    }
    let qp = DiagQP::new(q, vec![0.0; x.nrows()])?;
    simplex::solve(&qp)
}

fn apply_floor(u: SimplexWeights, floor: f64) -> Result<SimplexWeights> {
    if floor == 0.0 {
        return Ok(u);
    }
    let clamped: Vec<f64> = u.values().iter().map(|&v| v.max(floor)).collect();
    let sum: f64 = clamped.iter().sum();
    SimplexWeights::new(clamped.into_iter().map(|v| v / sum).collect())
}

/// Alternating solver: graph refresh, weighted factor steps, `u` refresh.
pub fn solve_feature_select(
    x: &NonNegMatrix,
    cfg: &FeatureSelectConfig,
) -> Result<FeatureSelectResult> {
    cfg.validate()?;
    let start = Instant::now();
    let data = x.as_array();
    let d = x.rows();
    let alpha = cfg.base.alpha;

    let mut u = SimplexWeights::uniform(d)?;
    let (mut h, mut w) = init_factors_impl(data, cfg.base.m, cfg.base.seed);

    let mut phases: Vec<Vec<f64>> = Vec::with_capacity(cfg.outer_iters);
    let mut u_trace = Vec::with_capacity(cfg.outer_iters);
    let mut residual_energy_trace = Vec::with_capacity(cfg.outer_iters);

    for _ in 0..cfg.outer_iters {
        let graph_u = build_weighted_graph(x, &u, &cfg.graph)?;
        let mut phase = Vec::with_capacity(cfg.inner_iters + 2);
        phase.push(weighted_objective(data, &h, &w, &u, &graph_u, alpha)?);
        for _ in 0..cfg.inner_iters {
            let (h2, w2) = weighted_step(data, &h, &w, &u, &graph_u, alpha)?;
            h = h2;
            w = w2;
            phase.push(weighted_objective(data, &h, &w, &u, &graph_u, alpha)?);
        }
        let energies = residual_row_energies(data, &h, &w)?;
        u = apply_floor(update_u(data, &h, &w)?, cfg.u_floor)?;
        phase.push(weighted_objective(data, &h, &w, &u, &graph_u, alpha)?);
        phases.push(phase);
        u_trace.push(u.clone());
        residual_energy_trace.push(energies);
    }

    let trace: Vec<f64> = if phases.is_empty() {
        // No outer iterations: report the initial objective on the graph the
        // first refresh would have produced.
        let graph_u = build_weighted_graph(x, &u, &cfg.graph)?;
        vec![weighted_objective(data, &h, &w, &u, &graph_u, alpha)?]
    } else {
        phases.iter().flatten().copied().collect()
    };
    let iterations = trace.len() - 1;
    let report = SolveReport {
        objective_trace: trace,
        iterations,
        termination: Termination::MaxIterations,
        seed: cfg.base.seed,
        wall_time: start.elapsed(),
    };
    Ok(FeatureSelectResult {
        factorization: Factorization {
            h: NonNegMatrix::new(h)?,
            w: NonNegMatrix::new(w)?,
            report,
        },
        u,
        u_trace,
        residual_energy_trace,
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_knn_graph, Affinity, Bandwidth, Distance};
    use crate::nmf::{gnmf_step, solve_gnmf};
    use crate::synth;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(k: usize) -> GraphSpec {
        GraphSpec {
            k,
            distance: Distance::Euclidean,
            affinity: Affinity::Gaussian(Bandwidth::Fixed(1.0)),
        }
    }

    fn random(d: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((d, n), |_| rng.gen::<f64>())
    }

    #[test]
    fn exact_reconstruction_leaves_only_the_graph_term() {
        let h = random(3, 2, 1);
        let w = random(2, 5, 2);
        let x = h.dot(&w);
        let xm = NonNegMatrix::new(x.clone()).unwrap();
        let u = SimplexWeights::uniform(3).unwrap();
        let g = build_weighted_graph(&xm, &u, &spec(2)).unwrap();
        let obj = weighted_objective(&x, &h, &w, &u, &g, 2.0).unwrap();
        let reg = regularizer_value(&g, &w).unwrap();
        assert_abs_diff_eq!(obj, 2.0 * reg, epsilon = 1e-12);
    }

    #[test]
    fn one_hot_weights_select_a_single_row() {
        let x = random(4, 6, 3);
        let h = random(4, 2, 4);
        let w = random(2, 6, 5);
        let xm = NonNegMatrix::new(x.clone()).unwrap();
        let u = SimplexWeights::new(vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let g = build_weighted_graph(&xm, &u, &spec(2)).unwrap();

        let q = residual_row_energies(&x, &h, &w).unwrap();
        let expect = q[2] + 1.5 * regularizer_value(&g, &w).unwrap();
        let got = weighted_objective(&x, &h, &w, &u, &g, 1.5).unwrap();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn weighted_objective_matches_elementwise_oracle() {
        let x = random(4, 5, 6);
        let h = random(4, 2, 7);
        let w = random(2, 5, 8);
        let xm = NonNegMatrix::new(x.clone()).unwrap();
        let u = SimplexWeights::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let g = build_weighted_graph(&xm, &u, &spec(2)).unwrap();

        let hw = h.dot(&w);
        let mut recon = 0.0;
        for c in 0..4 {
            for j in 0..5 {
                let r = u.values()[c] * (x[[c, j]] - hw[[c, j]]);
                recon += r * r;
            }
        }
        let mut reg = 0.0;
        let a = g.affinity();
        for i in 0..5 {
            for j in 0..5 {
                let mut sq = 0.0;
                for r in 0..2 {
                    let dd = w[[r, i]] - w[[r, j]];
                    sq += dd * dd;
                }
                reg += a[[i, j]] * sq;
            }
        }
        let expect = recon + 0.9 * 0.5 * reg;
        let got = weighted_objective(&x, &h, &w, &u, &g, 0.9).unwrap();
        assert!((got - expect).abs() <= 1e-10 * (1.0 + expect));
    }

    #[test]
    fn uniform_weights_reduce_to_the_gnmf_w_update() {
        // With no graph term the constant u_c^2 = 1/16 cancels between
        // numerator and denominator up to the EPS floor. (With alpha > 0 the
        // graph terms enter unweighted, so the rules deliberately differ.)
        let x = random(4, 7, 9);
        let xm = NonNegMatrix::new(x.clone()).unwrap();
        let (h, w) = init_factors_impl(&x, 2, 0);
        let u = SimplexWeights::uniform(4).unwrap();
        let g = build_knn_graph(&xm, &spec(3)).unwrap();

        let (h_weighted, w_weighted) = weighted_step(&x, &h, &w, &u, &g, 0.0).unwrap();
        let (h_gnmf, w_gnmf) = gnmf_step(&x, &h, &w, &g, 0.0).unwrap();
        assert_eq!(h_weighted, h_gnmf);
        for (a, b) in w_weighted.iter().zip(w_gnmf.iter()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }

        // The H update never sees u at all.
        let (h_alpha, _) = weighted_step(&x, &h, &w, &u, &g, 1.2).unwrap();
        let (h_plain, _) = gnmf_step(&x, &h, &w, &g, 1.2).unwrap();
        assert_eq!(h_alpha, h_plain);
    }

    #[test]
    fn one_hot_weights_match_single_feature_instance() {
        let x = random(3, 6, 10);
        let xm = NonNegMatrix::new(x.clone()).unwrap();
        let (h, w) = init_factors_impl(&x, 2, 1);
        let u = SimplexWeights::new(vec![0.0, 1.0, 0.0]).unwrap();
        let g = build_weighted_graph(&xm, &u, &spec(2)).unwrap();
        let (h2, w2) = weighted_step(&x, &h, &w, &u, &g, 0.7).unwrap();

        // Restrict the reconstruction part to feature row 1 by hand.
        let x1 = x.row(1).insert_axis(ndarray::Axis(0)).to_owned();
        let h1 = h2.row(1).insert_axis(ndarray::Axis(0)).to_owned();
        let num = h1.t().dot(&x1) + 0.7 * &w.dot(g.affinity());
        let mut wd = w.clone();
        for (mut col, &deg) in wd.columns_mut().into_iter().zip(g.degree()) {
            col.mapv_inplace(|v| v * deg);
        }
        let den = h1.t().dot(&h1).dot(&w) + 0.7 * &wd;
        let expect = &w * &crate::matrix::floored_div(&num, &den);
        for (a, b) in w2.iter().zip(expect.iter()) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn weighted_steps_descend_for_200_iterations() {
        let x = random(6, 9, 11);
        let xm = NonNegMatrix::new(x.clone()).unwrap();
        let u = SimplexWeights::new(vec![0.3, 0.25, 0.2, 0.15, 0.07, 0.03]).unwrap();
        let g = build_weighted_graph(&xm, &u, &spec(3)).unwrap();
        let (mut h, mut w) = init_factors_impl(&x, 2, 2);
        let mut prev = weighted_objective(&x, &h, &w, &u, &g, 1.0).unwrap();
        for _ in 0..200 {
            let (h2, w2) = weighted_step(&x, &h, &w, &u, &g, 1.0).unwrap();
            h = h2;
            w = w2;
            let obj = weighted_objective(&x, &h, &w, &u, &g, 1.0).unwrap();
            assert!(obj <= prev + 1e-8 * (1.0 + prev));
            prev = obj;
        }
    }

    #[test]
    fn update_u_inverse_energy_solution() {
        // Equal energies: uniform.
        let h = array![[1.0], [1.0]];
        let w = array![[1.0, 1.0]];
        let x = array![[2.0, 1.0], [2.0, 1.0]];
        let u = update_u(&x, &h, &w).unwrap();
        assert_abs_diff_eq!(u.values()[0], 0.5, epsilon = 1e-10);

        // q = (1, 3): u proportional to 1/q, so (3/4, 1/4).
        let x2 = array![[2.0, 1.0], [1.0 + 3f64.sqrt(), 1.0]];
        let u2 = update_u(&x2, &h, &w).unwrap();
        assert_abs_diff_eq!(u2.values()[0], 0.75, epsilon = 1e-9);
        assert_abs_diff_eq!(u2.values()[1], 0.25, epsilon = 1e-9);

        // Interior KKT: 2 q_c u_c constant across the support.
        let q = residual_row_energies(&x2, &h, &w).unwrap();
        let s0 = 2.0 * q[0] * u2.values()[0];
        let s1 = 2.0 * q[1] * u2.values()[1];
        assert!((s0 - s1).abs() <= 1e-8 * (1.0 + s0.abs()));
    }

    #[test]
    fn zero_residual_row_takes_all_mass() {
        let h = array![[1.0], [1.0]];
        let w = array![[1.0, 2.0]];
        // Row 0 is fit exactly; row 1 is not.
        let x = array![[1.0, 2.0], [3.0, 3.0]];
        let u = update_u(&x, &h, &w).unwrap();
        assert_eq!(u.values(), &[1.0, 0.0]);
    }

    #[test]
    fn fully_zero_residual_returns_uniform() {
        let h = array![[1.0], [2.0]];
        let w = array![[1.0, 2.0]];
        let x = h.dot(&w);
        let u = update_u(&x, &h, &w).unwrap();
        assert_eq!(u.values(), &[0.5, 0.5]);
    }

    #[test]
    fn single_feature_reduces_to_gnmf() {
        let x = synth::two_clusters(1, 14, 40).unwrap();
        let mut base = NmfConfig::new(2);
        base.alpha = 0.6;
        base.seed = 3;
        base.max_iter = 24;
        base.tol = 1e-15;
        let cfg = FeatureSelectConfig {
            base: base.clone(),
            graph: spec(3),
            outer_iters: 3,
            inner_iters: 8,
            u_floor: 0.0,
        };
        let result = solve_feature_select(&x, &cfg).unwrap();
        assert!(result.u_trace.iter().all(|u| u.values() == [1.0]));

        let g = build_knn_graph(&x, &spec(3)).unwrap();
        let single = solve_gnmf(&x, &g, &base).unwrap();
        assert_eq!(result.factorization.h, single.h);
        assert_eq!(result.factorization.w, single.w);
    }

    #[test]
    fn zero_outer_iterations_is_a_no_op() {
        let x = synth::two_clusters(4, 10, 41).unwrap();
        let cfg = FeatureSelectConfig {
            base: NmfConfig::new(2),
            graph: spec(2),
            outer_iters: 0,
            inner_iters: 10,
            u_floor: 0.0,
        };
        let result = solve_feature_select(&x, &cfg).unwrap();
        assert!(result.phases.is_empty());
        let uniform = SimplexWeights::uniform(4).unwrap();
        assert_eq!(result.u, uniform);
        let (h0, _) = init_factors_impl(x.as_array(), 2, 0);
        assert_eq!(result.factorization.h.as_array(), &h0);
        assert_eq!(result.factorization.report.objective_trace.len(), 1);
    }

    #[test]
    fn phases_descend_and_u_stays_feasible() {
        let x = synth::noisy_features(5, 5, 24, 42).unwrap();
        let mut base = NmfConfig::new(2);
        base.alpha = 1.0;
        base.seed = 1;
        let cfg = FeatureSelectConfig {
            base,
            graph: GraphSpec {
                k: 5,
                distance: Distance::Euclidean,
                affinity: Affinity::Gaussian(Bandwidth::LocalScaling),
            },
            outer_iters: 6,
            inner_iters: 10,
            u_floor: 0.0,
        };
        let result = solve_feature_select(&x, &cfg).unwrap();
        for phase in &result.phases {
            for pair in phase.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-8 * (1.0 + pair[0].abs()));
            }
        }
        for u in &result.u_trace {
            let sum: f64 = u.values().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-10);
            assert!(u.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn informative_features_attract_the_weight() {
        let x = synth::noisy_features(5, 5, 40, 7).unwrap();
        let mut base = NmfConfig::new(2);
        base.alpha = 1.0;
        base.seed = 11;
        let cfg = FeatureSelectConfig {
            base,
            graph: GraphSpec {
                k: 5,
                distance: Distance::Euclidean,
                affinity: Affinity::Gaussian(Bandwidth::LocalScaling),
            },
            outer_iters: 8,
            inner_iters: 10,
            u_floor: 0.0,
        };
        let result = solve_feature_select(&x, &cfg).unwrap();
        let u = result.u.values();
        let informative: f64 = u[..5].iter().sum();
        let noisy: f64 = u[5..].iter().sum();
        assert!(informative > noisy, "informative {informative} vs noisy {noisy}");
    }

    #[test]
    fn u_floor_keeps_every_feature_alive() {
        let x = synth::noisy_features(3, 3, 16, 8).unwrap();
        let cfg = FeatureSelectConfig {
            base: NmfConfig::new(2),
            graph: spec(3),
            outer_iters: 4,
            inner_iters: 5,
            u_floor: 0.01,
        };
        let result = solve_feature_select(&x, &cfg).unwrap();
        assert!(result.u.values().iter().all(|&v| v >= 0.009));
        let sum: f64 = result.u.values().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-10);
    }
}
