//! Higher-order weighted graph convolution.
//!
//! The pipeline splits every node's neighborhood into disjoint shells by
//! shortest-path distance ([`graph`]), learns nonnegative per-neighbor weights
//! for each shell by a simplex-constrained least-squares fit against the
//! node's first-order aggregate ([`lasso`], solved with [`qp`]), adds the
//! weighted shells to the adjacency, and trains an ordinary two-layer GCN on
//! the resulting filter ([`nn`]). [`data`] reads citation-graph bundles and
//! builds splits; [`experiment`] wires everything into reproducible runs.

pub mod data;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod lasso;
pub mod nn;
pub mod qp;
pub mod sparse;

pub use error::{Error, Result};
