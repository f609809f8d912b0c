//! The long-form guide, rendered with mdbook from `book/` at the repository
//! root. Each chapter is included here as a module doc so `cargo test --doc`
//! compiles and runs every snippet the book shows; the book and the tests
//! cannot drift apart.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/matrices.md")]
pub mod matrices {}

#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}

#[doc = include_str!("../../../book/src/factorization.md")]
pub mod factorization {}

#[doc = include_str!("../../../book/src/simplex-qp.md")]
pub mod simplex_qp {}

#[doc = include_str!("../../../book/src/multi-graph.md")]
pub mod multi_graph {}

#[doc = include_str!("../../../book/src/feature-selection.md")]
pub mod feature_selection {}

#[doc = include_str!("../../../book/src/multi-kernel.md")]
pub mod multi_kernel {}

#[doc = include_str!("../../../book/src/datasets.md")]
pub mod datasets {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
