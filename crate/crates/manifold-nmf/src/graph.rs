//! k-nearest-neighbor graphs and their affinity data.
//!
//! A graph over `n` samples (the columns of a `d x n` matrix) is built in
//! three steps: pick a distance function, connect each sample to its `k`
//! nearest neighbors, and score the connected pairs with an affinity function.
//! The neighbor relation is symmetrized by taking the union of the directed
//! edges; since every offered affinity is symmetric in its two arguments, the
//! resulting matrix satisfies `A = A^T` exactly and averaging `(A + A^T)/2`
//! would change nothing.
//!
//! The Gaussian affinity is `exp(-dist^2 / (2 sigma^2))`, decaying with
//! distance. Its bandwidth is either a fixed global `sigma`, or locally scaled
//! with `sigma_ij^2 = sigma_i * sigma_j` where `sigma_i` is the distance from
//! sample `i` to its k-th neighbor (floored at 1e-12); the locally scaled
//! variant is invariant under a global rescaling of the data.
//!
//! Distance ties during neighbor selection break toward the smaller sample
//! index, and self-loops are always excluded.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::matrix::NonNegMatrix;
use crate::simplex::SimplexWeights;

/// Unordered sample index pairs, stored as `(min, max)`.
pub type EdgeSet = BTreeSet<(usize, usize)>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Euclidean,
    Cosine,
}

/// Bandwidth policy for the Gaussian affinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    LocalScaling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affinity {
    Gaussian(Bandwidth),
    Binary,
    DotProduct,
}

/// Recipe for building a neighborhood graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub k: usize,
    pub distance: Distance,
    pub affinity: Affinity,
}

impl GraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::param("k", "neighbor count must be at least 1"));
        }
        if let Affinity::Gaussian(Bandwidth::Fixed(sigma)) = self.affinity {
            if sigma <= 0.0 || !sigma.is_finite() {
                return Err(Error::param("bandwidth", format!("must be > 0, got {sigma}")));
            }
        }
        Ok(())
    }

    /// Short human-readable tag, used to label learned weights.
    pub fn label(&self) -> String {
        let dist = match self.distance {
            Distance::Euclidean => "euclidean",
            Distance::Cosine => "cosine",
        };
        let aff = match self.affinity {
            Affinity::Gaussian(Bandwidth::Fixed(s)) => format!("gaussian(sigma={s})"),
            Affinity::Gaussian(Bandwidth::LocalScaling) => "gaussian(local_scaling)".to_string(),
            Affinity::Binary => "binary".to_string(),
            Affinity::DotProduct => "dot_product".to_string(),
        };
        format!("{}nn-{dist}-{aff}", self.k)
    }
}

/// Symmetric nonnegative affinity matrix with zero diagonal, its degree
/// vector, and the supporting edge set.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityGraph {
    affinity: Array2<f64>,
    degree: Array1<f64>,
    edges: EdgeSet,
}

impl AffinityGraph {
    /// Wraps a raw affinity matrix, deriving the edge set from its support.
    /// The matrix must be square, entrywise finite and nonnegative, exactly
    /// symmetric, and zero on the diagonal.
    pub fn from_affinity(affinity: Array2<f64>) -> Result<Self> {
        let n = affinity.nrows();
        if affinity.ncols() != n {
            return Err(Error::dim(format!(
                "affinity matrix is {}x{}, expected square",
                n,
                affinity.ncols()
            )));
        }
        let mut edges = EdgeSet::new();
        for i in 0..n {
            if affinity[[i, i]] != 0.0 {
                return Err(Error::domain(format!("affinity diagonal entry {i} is nonzero")));
            }
            for j in (i + 1)..n {
                let v = affinity[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::domain(format!("affinity entry ({i}, {j}) is {v}")));
                }
                if v != affinity[[j, i]] {
                    return Err(Error::domain(format!(
                        "affinity is not symmetric at ({i}, {j})"
                    )));
                }
                if v > 0.0 {
                    edges.insert((i, j));
                }
            }
        }
        let degree = affinity.sum_axis(ndarray::Axis(1));
        Ok(AffinityGraph {
            affinity,
            degree,
            edges,
        })
    }

    fn from_parts(affinity: Array2<f64>, edges: EdgeSet) -> Self {
        let degree = affinity.sum_axis(ndarray::Axis(1));
        AffinityGraph {
            affinity,
            degree,
            edges,
        }
    }

    pub fn n(&self) -> usize {
        self.affinity.nrows()
    }

    pub fn affinity(&self) -> &Array2<f64> {
        &self.affinity
    }

    pub fn degree(&self) -> &Array1<f64> {
        &self.degree
    }

    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    /// The graph Laplacian `L = D - A`.
    pub fn laplacian(&self) -> Array2<f64> {
        let mut l = -&self.affinity;
        for i in 0..self.n() {
            l[[i, i]] += self.degree[i];
        }
        l
    }

    /// Exports the affinity matrix; usable with [`crate::io::save_matrix`].
    pub fn to_matrix(&self) -> Result<NonNegMatrix> {
        NonNegMatrix::new(self.affinity.clone())
    }
}

/// Pairwise distances between the columns of `x` under the chosen metric.
fn distance_matrix(x: &ArrayView2<f64>, distance: Distance) -> Result<Array2<f64>> {
    let n = x.ncols();
    let mut dist = Array2::zeros((n, n));
    match distance {
        Distance::Euclidean => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let mut s = 0.0;
                    for r in 0..x.nrows() {
                        let d = x[[r, i]] - x[[r, j]];
                        s += d * d;
                    }
                    let d = s.sqrt();
                    dist[[i, j]] = d;
                    dist[[j, i]] = d;
                }
            }
        }
        Distance::Cosine => {
            let norms: Vec<f64> = (0..n)
                .map(|i| x.column(i).dot(&x.column(i)).sqrt())
                .collect();
            if let Some(i) = norms.iter().position(|&v| v == 0.0) {
                return Err(Error::domain(format!(
                    "sample {i} has zero norm; cosine distance is undefined"
                )));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let cos = x.column(i).dot(&x.column(j)) / (norms[i] * norms[j]);
                    let d = (1.0 - cos).max(0.0);
                    dist[[i, j]] = d;
                    dist[[j, i]] = d;
                }
            }
        }
    }
    Ok(dist)
}

/// Per-sample neighbor lists (k nearest, self excluded, ties toward the
/// smaller index), each sorted by increasing distance.
fn neighbor_lists(dist: &Array2<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = dist.nrows();
    (0..n)
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| dist[[i, a]].total_cmp(&dist[[i, b]]).then(a.cmp(&b)));
            order.truncate(k);
            order
        })
        .collect()
}

fn knn_edges_impl(x: &ArrayView2<f64>, k: usize, distance: Distance) -> Result<EdgeSet> {
    let n = x.ncols();
    if n < 2 {
        return Err(Error::param("n", "need at least 2 samples to build a graph"));
    }
    if k >= n {
        return Err(Error::param(
            "k",
            format!("neighbor count {k} must be smaller than the sample count {n}"),
        ));
    }
    let dist = distance_matrix(x, distance)?;
    let mut edges = EdgeSet::new();
    for (i, neigh) in neighbor_lists(&dist, k).iter().enumerate() {
        for &j in neigh {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    Ok(edges)
}

/// The symmetrized k-nearest-neighbor edge set of the samples in `x`.
pub fn knn_edges(x: &NonNegMatrix, k: usize, distance: Distance) -> Result<EdgeSet> {
    knn_edges_impl(&x.as_array().view(), k, distance)
}

fn build_impl(x: &ArrayView2<f64>, spec: &GraphSpec) -> Result<AffinityGraph> {
    spec.validate()?;
    let n = x.ncols();
    if n < 2 {
        return Err(Error::param("n", "need at least 2 samples to build a graph"));
    }
    if spec.k >= n {
        return Err(Error::param(
            "k",
            format!("neighbor count {} must be smaller than the sample count {n}", spec.k),
        ));
    }
    let dist = distance_matrix(x, spec.distance)?;
    let neighbors = neighbor_lists(&dist, spec.k);

    let mut edges = EdgeSet::new();
    for (i, neigh) in neighbors.iter().enumerate() {
        for &j in neigh {
            edges.insert((i.min(j), i.max(j)));
        }
    }

    // Local scaling bandwidths: distance to the k-th neighbor, floored.
    let sigma: Option<Vec<f64>> = match spec.affinity {
        Affinity::Gaussian(Bandwidth::LocalScaling) => Some(
            neighbors
                .iter()
                .enumerate()
                .map(|(i, neigh)| dist[[i, *neigh.last().expect("k >= 1")]].max(1e-12))
                .collect(),
        ),
        _ => None,
    };

    let mut affinity = Array2::zeros((n, n));
    for &(i, j) in &edges {
        let a = match spec.affinity {
            Affinity::Binary => 1.0,
            Affinity::DotProduct => x.column(i).dot(&x.column(j)),
            Affinity::Gaussian(Bandwidth::Fixed(s)) => {
                let d = dist[[i, j]];
                (-(d * d) / (2.0 * s * s)).exp()
            }
            Affinity::Gaussian(Bandwidth::LocalScaling) => {
                let s = sigma.as_ref().expect("sigma computed for local scaling");
                let d = dist[[i, j]];
                (-(d * d) / (2.0 * s[i] * s[j])).exp()
            }
        };
        affinity[[i, j]] = a;
        affinity[[j, i]] = a;
    }
    Ok(AffinityGraph::from_parts(affinity, edges))
}

/// Builds a k-nearest-neighbor affinity graph over the columns of `x`.
pub fn build_knn_graph(x: &NonNegMatrix, spec: &GraphSpec) -> Result<AffinityGraph> {
    build_impl(&x.as_array().view(), spec)
}

/// Builds the graph of `diag(u) * x`: both the neighbor sets and the
/// affinities are recomputed in the feature-weighted space.
pub fn build_weighted_graph(
    x: &NonNegMatrix,
    u: &SimplexWeights,
    spec: &GraphSpec,
) -> Result<AffinityGraph> {
    if u.len() != x.rows() {
        return Err(Error::dim(format!(
            "feature weights have length {} but the matrix has {} feature rows",
            u.len(),
            x.rows()
        )));
    }
    let mut scaled = x.as_array().clone();
    for (mut row, &w) in scaled.rows_mut().into_iter().zip(u.values()) {
        row.mapv_inplace(|v| v * w);
    }
    build_impl(&scaled.view(), spec)
}

/// Masks a kernel matrix onto an edge set: `A_ij = K_ij` for `(i, j)` in `E`,
/// zero elsewhere, with a zero diagonal.
pub fn graph_from_kernel(kernel: &KernelMatrix, edges: &EdgeSet) -> Result<AffinityGraph> {
    let n = kernel.n();
    let gram = kernel.gram();
    let mut affinity = Array2::zeros((n, n));
    let mut kept = EdgeSet::new();
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::dim(format!(
                "edge ({i}, {j}) is out of range for a kernel over {n} samples"
            )));
        }
        if i == j {
            continue;
        }
        let v = gram[[i, j]];
        affinity[[i, j]] = v;
        affinity[[j, i]] = v;
        kept.insert((i.min(j), i.max(j)));
    }
    Ok(AffinityGraph::from_parts(affinity, kept))
}

/// Manifold regularizer `(1/2) sum_ij A_ij ||w_i - w_j||^2` where the `w_i`
/// are the columns of `w`. Equals `trace(W L W^T)` for `L = D - A`.
pub fn regularizer_value(graph: &AffinityGraph, w: &Array2<f64>) -> Result<f64> {
    if w.ncols() != graph.n() {
        return Err(Error::dim(format!(
            "coefficient matrix has {} columns, graph covers {} samples",
            w.ncols(),
            graph.n()
        )));
    }
    let a = graph.affinity();
    let mut total = 0.0;
    for &(i, j) in graph.edges() {
        let aij = a[[i, j]];
        if aij == 0.0 {
            continue;
        }
        let mut sq = 0.0;
        for r in 0..w.nrows() {
            let d = w[[r, i]] - w[[r, j]];
            sq += d * d;
        }
        total += aij * sq;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn samples_1d(values: &[f64]) -> NonNegMatrix {
        NonNegMatrix::from_rows(&[values.to_vec()]).unwrap()
    }

    fn spec(k: usize, affinity: Affinity) -> GraphSpec {
        GraphSpec {
            k,
            distance: Distance::Euclidean,
            affinity,
        }
    }

    #[test]
    fn binary_knn_on_line_matches_enumeration() {
        // Brute force: 0's nearest is 1, 1's nearest is 0, 2's nearest is 1.
        let x = samples_1d(&[0.0, 1.0, 10.0]);
        let g = build_knn_graph(&x, &spec(1, Affinity::Binary)).unwrap();
        assert_eq!(g.affinity()[[0, 1]], 1.0);
        assert_eq!(g.affinity()[[1, 0]], 1.0);
        assert_eq!(g.affinity()[[1, 2]], 1.0);
        assert_eq!(g.affinity()[[2, 1]], 1.0);
        assert_eq!(g.affinity()[[0, 2]], 0.0);
        assert_eq!(g.edges(), &EdgeSet::from([(0, 1), (1, 2)]));
    }

    #[test]
    fn identical_samples_have_unit_gaussian_affinity() {
        let x = samples_1d(&[3.0, 3.0]);
        let g = build_knn_graph(&x, &spec(1, Affinity::Gaussian(Bandwidth::Fixed(1.0)))).unwrap();
        assert_eq!(g.affinity()[[0, 1]], 1.0);
    }

    #[test]
    fn gaussian_affinity_scalar_evaluation() {
        let x = samples_1d(&[0.0, 2.0]);
        let g = build_knn_graph(&x, &spec(1, Affinity::Gaussian(Bandwidth::Fixed(1.0)))).unwrap();
        assert_abs_diff_eq!(g.affinity()[[0, 1]], (-2.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn k_too_large_is_rejected() {
        let x = samples_1d(&[0.0, 1.0]);
        assert!(matches!(
            build_knn_graph(&x, &spec(2, Affinity::Binary)),
            Err(Error::Parameter { .. })
        ));
    }

    #[test]
    fn cosine_rejects_zero_norm_sample() {
        let x = NonNegMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let s = GraphSpec {
            k: 1,
            distance: Distance::Cosine,
            affinity: Affinity::Binary,
        };
        assert!(matches!(build_knn_graph(&x, &s), Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_weights_are_a_global_rescale() {
        let x = NonNegMatrix::from_rows(&[
            vec![0.0, 1.0, 4.0, 9.0, 9.5],
            vec![0.5, 1.5, 4.5, 9.0, 8.5],
        ])
        .unwrap();
        let s = spec(2, Affinity::Binary);
        let u = SimplexWeights::uniform(2).unwrap();
        let weighted = build_weighted_graph(&x, &u, &s).unwrap();

        // Identical to building on X / d directly.
        let halved =
            NonNegMatrix::new(x.as_array().mapv(|v| v * 0.5)).unwrap();
        let rescaled = build_knn_graph(&halved, &s).unwrap();
        assert_eq!(weighted, rescaled);

        // Scaling never reorders neighbors, so the binary graph is untouched.
        let plain = build_knn_graph(&x, &s).unwrap();
        assert_eq!(plain.edges(), weighted.edges());
        assert_eq!(plain.affinity(), weighted.affinity());

        // Local-scaling gaussian affinities are scale invariant too.
        let s = spec(2, Affinity::Gaussian(Bandwidth::LocalScaling));
        let weighted = build_weighted_graph(&x, &u, &s).unwrap();
        let plain = build_knn_graph(&x, &s).unwrap();
        assert_eq!(plain.edges(), weighted.edges());
        for (a, b) in plain.affinity().iter().zip(weighted.affinity().iter()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn one_hot_weights_reduce_to_single_feature() {
        let x = NonNegMatrix::from_rows(&[
            vec![0.0, 1.0, 2.0, 7.0, 8.0],
            vec![9.0, 0.0, 5.0, 2.0, 6.0],
        ])
        .unwrap();
        let s = spec(2, Affinity::Binary);
        let u = SimplexWeights::new(vec![1.0, 0.0]).unwrap();
        let weighted = build_weighted_graph(&x, &u, &s).unwrap();
        let first_row_only = samples_1d(&[0.0, 1.0, 2.0, 7.0, 8.0]);
        let reduced = build_knn_graph(&first_row_only, &s).unwrap();
        assert_eq!(weighted.edges(), reduced.edges());
        assert_eq!(weighted.affinity(), reduced.affinity());
    }

    #[test]
    fn one_hot_on_constant_feature_collapses_distances() {
        let x = NonNegMatrix::from_rows(&[
            vec![2.0, 2.0, 2.0, 2.0],
            vec![1.0, 5.0, 9.0, 13.0],
        ])
        .unwrap();
        let u = SimplexWeights::new(vec![1.0, 0.0]).unwrap();
        let g = build_weighted_graph(&x, &u, &spec(1, Affinity::Gaussian(Bandwidth::Fixed(1.0))))
            .unwrap();
        for &(i, j) in g.edges() {
            assert_eq!(g.affinity()[[i, j]], 1.0);
        }
    }

    #[test]
    fn kernel_masking_hand_cases() {
        use crate::kernel::{combine, KernelMatrix, KernelProvenance, KernelSpec};
        let k1 = KernelMatrix::from_gram(
            array![[1.0, 0.0], [0.0, 1.0]],
            KernelProvenance::Single(KernelSpec::Linear),
        )
        .unwrap();
        let k2 = KernelMatrix::from_gram(
            array![[1.0, 2.0], [2.0, 1.0]],
            KernelProvenance::Single(KernelSpec::Linear),
        )
        .unwrap();
        let mu = SimplexWeights::new(vec![0.5, 0.5]).unwrap();
        let mixed = combine(&[k1, k2], &mu).unwrap();

        let empty = graph_from_kernel(&mixed, &EdgeSet::new()).unwrap();
        assert!(empty.affinity().iter().all(|&v| v == 0.0));

        let full = graph_from_kernel(&mixed, &EdgeSet::from([(0, 1)])).unwrap();
        assert_eq!(full.affinity()[[0, 1]], 1.0);
        assert_eq!(full.affinity()[[1, 1]], 0.0);
    }

    #[test]
    fn all_ones_kernel_on_complete_edges() {
        use crate::kernel::{KernelMatrix, KernelProvenance, KernelSpec};
        let k = KernelMatrix::from_gram(
            Array2::ones((3, 3)),
            KernelProvenance::Single(KernelSpec::Linear),
        )
        .unwrap();
        let edges = EdgeSet::from([(0, 1), (0, 2), (1, 2)]);
        let g = graph_from_kernel(&k, &edges).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.0 } else { 1.0 };
                assert_eq!(g.affinity()[[i, j]], expect);
            }
        }
    }

    #[test]
    fn regularizer_hand_instance() {
        let g = AffinityGraph::from_affinity(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let w = array![[1.0, 0.0], [0.0, 1.0]];
        assert_abs_diff_eq!(regularizer_value(&g, &w).unwrap(), 2.0, epsilon = 1e-15);

        let same = array![[0.3, 0.3], [0.7, 0.7]];
        assert_eq!(regularizer_value(&g, &same).unwrap(), 0.0);
    }

    #[test]
    fn regularizer_matches_trace_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = NonNegMatrix::new(Array2::from_shape_fn((3, 6), |_| rng.gen::<f64>())).unwrap();
        let g = build_knn_graph(&x, &spec(2, Affinity::Gaussian(Bandwidth::Fixed(0.7)))).unwrap();
        let w = Array2::from_shape_fn((4, 6), |_| rng.gen::<f64>());

        let direct = regularizer_value(&g, &w).unwrap();
        let l = g.laplacian();
        let trace_form = (w.dot(&l) * &w).sum();
        assert!((direct - trace_form).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn gaussian_affinity_decays_with_distance() {
        let x = samples_1d(&[0.0, 1.0, 2.5, 6.0]);
        let g = build_knn_graph(&x, &spec(3, Affinity::Gaussian(Bandwidth::Fixed(2.0)))).unwrap();
        // Distances from sample 0 grow along the line, so affinities shrink.
        assert!(g.affinity()[[0, 1]] > g.affinity()[[0, 2]]);
        assert!(g.affinity()[[0, 2]] > g.affinity()[[0, 3]]);
    }

    proptest! {
        #[test]
        fn structural_invariants_hold(
            seed in 0u64..1000,
            n in 4usize..9,
            k in 1usize..3,
            gaussian in proptest::bool::ANY,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = NonNegMatrix::new(
                Array2::from_shape_fn((3, n), |_| rng.gen::<f64>() * 4.0),
            ).unwrap();
            let affinity = if gaussian {
                Affinity::Gaussian(Bandwidth::LocalScaling)
            } else {
                Affinity::Binary
            };
            let g = build_knn_graph(&x, &spec(k, affinity)).unwrap();
            let a = g.affinity();
            for i in 0..n {
                prop_assert_eq!(a[[i, i]], 0.0);
                let row_sum: f64 = (0..n).map(|j| a[[i, j]]).sum();
                prop_assert!((row_sum - g.degree()[i]).abs() <= 1e-12);
                for j in 0..n {
                    prop_assert_eq!(a[[i, j]], a[[j, i]]);
                    prop_assert!(a[[i, j]] >= 0.0 && a[[i, j]] <= 1.0);
                    if a[[i, j]] > 0.0 {
                        prop_assert!(g.edges().contains(&(i.min(j), i.max(j))));
                    }
                }
            }
            let w = Array2::from_shape_fn((2, n), |_| rng.gen::<f64>());
            prop_assert!(regularizer_value(&g, &w).unwrap() >= 0.0);
        }
    }
}
