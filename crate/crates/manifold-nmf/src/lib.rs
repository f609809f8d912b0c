//! Manifold-regularized nonnegative matrix factorization with learned graphs.
//!
//! The classic graph-regularized NMF objective couples the reconstruction
//! `||X - H W||^2` with a penalty `alpha/2 sum_ij A_ij ||w_i - w_j||^2` that
//! pulls the coefficient vectors of neighboring samples together. Everything
//! here revolves around one question: where does the affinity matrix `A` come
//! from? Three answers are implemented, each learning its graph jointly with
//! the factors by alternating multiplicative updates with a diagonal simplex
//! QP:
//!
//! * [`multi_graph`]: blend a pool of candidate graphs with learned weights;
//! * [`feature_select`]: learn per-feature weights and rebuild the graph in
//!   the weighted feature space;
//! * [`multi_kernel`]: factor in an implicit kernel space and score the
//!   graph with a learned kernel combination.
//!
//! [`nmf`] holds the plain and graph-regularized baselines, [`simplex`] the
//! shared QP engine, [`graph`] and [`kernel`] the geometry, [`matrix`] and
//! [`io`] the data layer, and [`runner`] the end-to-end CLI driver. The
//! long-form guide lives in `book/` and its snippets compile as the doc-tests
//! of [`guide`].

pub mod config;
pub mod error;
pub mod feature_select;
pub mod graph;
pub mod guide;
pub mod io;
pub mod kernel;
pub mod matrix;
pub mod multi_graph;
pub mod multi_kernel;
pub mod nmf;
pub mod runner;
pub mod simplex;
pub mod synth;

pub use config::{InputSpec, MethodConfig, RunConfig};
pub use error::{Error, Result};
pub use feature_select::{
    solve_feature_select, update_u, weighted_objective, weighted_step, FeatureSelectConfig,
    FeatureSelectResult,
};
pub use graph::{
    build_knn_graph, build_weighted_graph, graph_from_kernel, knn_edges, regularizer_value,
    Affinity, AffinityGraph, Bandwidth, Distance, EdgeSet, GraphSpec,
};
pub use io::{load_matrix, save_matrix, MatrixFormat};
pub use kernel::{combine, gram, KernelMatrix, KernelProvenance, KernelSpec};
pub use matrix::{frobenius_sq, NonNegMatrix, SolveReport, Termination, EPS};
pub use multi_graph::{
    combine_graphs, graph_energies, solve_multi_graph, update_mu, MultiGraphConfig,
    MultiGraphResult,
};
pub use multi_kernel::{
    kernel_objective, kernel_step, per_kernel_energies, solve_multi_kernel, update_mu_kernel,
    MultiKernelConfig, MultiKernelResult,
};
pub use nmf::{
    gnmf_objective, gnmf_step, init_factors, nmf_objective, nmf_step, normalize_columns,
    solve_gnmf, solve_nmf, Factorization, NmfConfig,
};
pub use simplex::{grid_oracle, kkt_residual, DiagQP, SimplexWeights};
pub use synth::SyntheticKind;
