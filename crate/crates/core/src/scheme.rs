//! Settings and results shared by the first-order schemes
//! ([`crate::sinkhorn::minimize_sinkhorn`] and [`crate::direct::minimize_direct`]).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grad::Method;
use crate::measures::{CostOracle, TransportPlan};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    /// Number of action atoms; `None` means `K + 2`.
    pub n_atoms: Option<usize>,
    pub method: Method,
    /// Step size for simplex-constrained weights (`alpha` or `gamma`).
    pub lr_weights: f64,
    /// Step size for action atoms.
    pub lr_atoms: f64,
    pub steps: usize,
    /// Sinkhorn iterations differentiated through per step.
    pub unroll_iters: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            n_atoms: None,
            method: Method::Adam,
            lr_weights: 0.05,
            lr_atoms: 0.01,
            steps: 500,
            unroll_iters: 100,
        }
    }
}

impl SchemeConfig {
    pub fn atoms_for(&self, n_types: usize) -> usize {
        self.n_atoms.unwrap_or(n_types + 2)
    }
}

/// Final plan and per-iteration objective of a scheme.
#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub plan: TransportPlan,
    /// Objective of the current plan before each step, then after the last
    /// one: `steps + 1` entries.
    pub trace: Vec<f64>,
}

/// Uniform atoms in the box of `cost`.
pub fn initial_atoms(cost: &dyn CostOracle, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let bounds = cost
        .bounds()
        .ok_or_else(|| invalid("the scheme needs a cost with box bounds"))?;
    let mut rng = seed::rng(seed);
    Ok((0..n)
        .map(|_| bounds.iter().map(|&(a, b)| rng.gen_range(a..=b)).collect())
        .collect())
}
