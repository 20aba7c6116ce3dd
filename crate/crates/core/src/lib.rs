//! Tensor clustering with a heterogeneous Tucker model.
//!
//! Samples are stacked along the last mode of a data tensor. The first
//! `N − 1` modes get orthonormal factors, while the last mode gets a
//! row-stochastic membership matrix optimized by a Riemannian trust-region
//! method on the multinomial manifold. Hard labels come from k-means over
//! the membership rows.
//!
//! The main entry point is [`cluster::fit`]; see the `examples/` directory
//! of this crate for one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cluster;
pub mod error;
pub mod io;
pub mod manifold;
pub mod metrics;
pub mod objective;
pub mod rtr;
pub mod tensor;

pub use cluster::{fit, ClusterConfig, ClusteringResult, FactorSet, InitStrategy};
pub use error::{Error, Result};
pub use manifold::{MultinomialPoint, TangentVector};
pub use tensor::{DenseTensor, Matrix};
