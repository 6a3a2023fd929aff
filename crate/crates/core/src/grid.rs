//! The problem over a fixed finite set of actions.
//!
//! With the actions frozen, the objective is convex in `gamma`: a linear
//! cost plus a sum of row-wise perspective functions. It is minimized by
//! projected gradient from the product plan.

use serde::{Deserialize, Serialize};

use crate::divergence::FDivergence;
use crate::error::{invalid, Result};
use crate::measures::{cost_matrix, CostOracle, DiscreteDistribution, TransportPlan};
use crate::polytope::{Problem, Settings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub plan: TransportPlan,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn solve_grid(
    prior: &DiscreteDistribution,
    actions: &[Vec<f64>],
    cost: &dyn CostOracle,
    div: &FDivergence,
    lambda: f64,
    config: &GridConfig,
) -> Result<GridResult> {
    if actions.is_empty() {
        return Err(invalid("the action grid is empty"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    let c = cost_matrix(cost, actions, prior.atoms());
    let problem = Problem {
        div,
        prior: prior.weights(),
        lambda,
        linear: &c,
    };
    let n = actions.len() as f64;
    let init = TransportPlan::product(&vec![1.0 / n; actions.len()], actions.to_vec(), prior.clone())?;
    let out = problem.solve(
        init.gamma(),
        Settings {
            tol: config.tol,
            max_iter: config.max_iter,
        },
    );
    Ok(GridResult {
        plan: TransportPlan::new(out.gamma, actions.to_vec(), prior.clone())?,
        objective: out.objective,
        iterations: out.iterations,
        converged: out.converged,
    })
}
