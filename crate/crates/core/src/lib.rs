//! Solvers for the utility/privacy trade-off problem.
//!
//! An agent with a private type `y` drawn from a discrete prior `p0` picks an
//! action `x`. A strategy is a joint law `gamma` of `(x, y)` whose type
//! marginal equals `p0`, and its cost is
//!
//! ```text
//! sum_{i,k} gamma[i][k] c(x_i, y_k)  +  lambda * sum_i m_i D(p_{x_i}, p0)
//! ```
//!
//! where `m_i` is the mass of action `i`, `p_{x_i}` the posterior on the type
//! after observing `x_i`, and `D` an f-divergence. The crate provides
//!
//! - [`measures`]: distributions, transport plans and the objective,
//! - [`divergence`]: f-divergences and their row-wise perspectives,
//! - [`grad`]: a small reverse-mode tape, projections and optimizers,
//! - [`sinkhorn`]: entropic optimal transport and the Sinkhorn-loss scheme
//!   (KL privacy cost),
//! - [`direct`]: projected descent on the finite `(gamma, x)` parametrization,
//! - [`dca`]: the difference-of-convex scheme for linear costs on boxes,
//! - [`grid`]: the convex problem over a finite action grid,
//! - [`auctions`]: bid-shading policies for repeated auctions,
//! - [`toy`]: random linear-cost benchmark instances.

pub mod auctions;
pub mod dca;
pub mod direct;
pub mod divergence;
mod error;
pub mod grad;
pub mod grid;
pub mod measures;
mod polytope;
pub mod scheme;
pub mod seed;
pub mod sinkhorn;
pub mod toy;

pub use divergence::FDivergence;
pub use error::{Error, Result};
pub use measures::{CostOracle, DiscreteDistribution, LinearCost, TransportPlan};
