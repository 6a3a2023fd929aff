//! Difference-of-convex scheme for linear costs on a box.
//!
//! With `c(x, y) = <x, y>` and `x` in `[a, b]`, write
//! `x = a + (x~ + 1)(b - a)/2` with `x~` in `[-1, 1]^d`. Then
//!
//! ```text
//! <x, y> = <x~, phi(y)> + eta(y),   phi(y)_l = (b_l - a_l) y_l / 2,
//!                                   eta(y)   = sum_l (a_l + b_l) y_l / 2,
//! ```
//!
//! and minimizing over the actions leaves
//!
//! ```text
//! F(gamma) = lambda H(gamma) - sum_i |z_i(gamma)|_1 + sum_k p0_k eta(y_k),
//! z_i(gamma) = sum_k gamma_ik phi(y_k),
//! ```
//!
//! a convex function minus a convex function of `gamma`. Each iteration
//! linearizes the subtracted part and solves the convex remainder; the best
//! actions are then `x~_i = -sign(z_i)`.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::{row_privacy, FDivergence};
use crate::error::{invalid, Error, Result};
use crate::measures::{prp_objective, CostOracle, DiscreteDistribution, LinearCost, TransportPlan};
use crate::polytope::{self, Settings};
use crate::seed;

/// Starting plan of [`dca_solve`]. Product plans are not offered: they
/// are fixed points of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DcaInit {
    /// Type `k` entirely on action `k mod n`.
    Revealing,
    /// See [`random_plan`].
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcaConfig {
    /// Number of actions; `None` means `K + 2`.
    pub n_actions: Option<usize>,
    pub init: DcaInit,
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for DcaConfig {
    fn default() -> Self {
        Self {
            n_actions: None,
            init: DcaInit::Revealing,
            tol: 1e-9,
            max_iter: 200,
            inner_tol: 1e-8,
            inner_max_iter: 5000,
        }
    }
}

/// The decomposed problem for one prior, box, divergence and `lambda`.
#[derive(Debug, Clone)]
pub struct DcProgram {
    prior: DiscreteDistribution,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// `phi(y_k)`, one row per type.
    phi: Vec<Vec<f64>>,
    constant: f64,
    div: FDivergence,
    lambda: f64,
}

pub fn build_dc(prior: &DiscreteDistribution, cost: &LinearCost, div: &FDivergence, lambda: f64) -> Result<DcProgram> {
    let bounds = cost.bounds().expect("linear costs carry a box");
    for (l, &(a, b)) in bounds.iter().enumerate() {
        if !(a < b) {
            return Err(Error::DegenerateBox { coord: l, value: a });
        }
    }
    if prior.atoms().iter().any(|y| y.len() != bounds.len()) {
        return Err(invalid("type dimension differs from the box dimension"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    let phi = prior
        .atoms()
        .iter()
        .map(|y| bounds.iter().zip(y).map(|(&(a, b), &v)| (b - a) * v / 2.0).collect())
        .collect();
    let constant = prior
        .atoms()
        .iter()
        .zip(prior.weights())
        .map(|(y, &w)| w * bounds.iter().zip(y).map(|(&(a, b), &v)| (a + b) * v / 2.0).sum::<f64>())
        .sum();
    Ok(DcProgram {
        prior: prior.clone(),
        lower: bounds.iter().map(|b| b.0).collect(),
        upper: bounds.iter().map(|b| b.1).collect(),
        phi,
        constant,
        div: div.clone(),
        lambda,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl DcProgram {
    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    /// `sum_k p0_k eta(y_k)`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `z_i = sum_k gamma_ik phi(y_k)`, one row per action.
    pub fn z(&self, gamma: &Array2<f64>) -> Array2<f64> {
        let d = self.lower.len();
        Array2::from_shape_fn((gamma.nrows(), d), |(i, l)| {
            (0..gamma.ncols()).map(|k| gamma[[i, k]] * self.phi[k][l]).sum()
        })
    }

    pub fn dc_objective(&self, gamma: &Array2<f64>) -> f64 {
        let z = self.z(gamma);
        let concave: f64 = z.iter().map(|v| v.abs()).sum();
        let privacy = if self.lambda == 0.0 {
            0.0
        } else {
            let p = self.prior.weights();
            self.lambda
                * gamma
                    .rows()
                    .into_iter()
                    .map(|r| row_privacy(&self.div, &r.to_vec(), p))
                    .sum::<f64>()
        };
        privacy - concave + self.constant
    }

    /// `s_ik = sum_l sign(z_il) phi(y_k)_l`, a subgradient of
    /// `sum_i |z_i|_1` (with `sign(0) = 0`).
    pub fn concave_part_subgradient(&self, gamma: &Array2<f64>) -> Array2<f64> {
        let z = self.z(gamma);
        Array2::from_shape_fn(gamma.dim(), |(i, k)| {
            self.phi[k].iter().enumerate().map(|(l, &f)| sign(z[[i, l]]) * f).sum()
        })
    }

    /// Approximately minimizes `lambda H(gamma) - <s, gamma>` from `init`.
    /// Returns the plan and whether the stopping rule was met.
    pub fn convex_subproblem(
        &self,
        s: &Array2<f64>,
        init: &Array2<f64>,
        tol: f64,
        max_iter: usize,
    ) -> (Array2<f64>, bool) {
        let linear = s.mapv(|v| -v);
        let problem = polytope::Problem {
            div: &self.div,
            prior: self.prior.weights(),
            lambda: self.lambda,
            linear: &linear,
        };
        let out = problem.solve(init, Settings { tol, max_iter });
        (out.gamma, out.converged)
    }

    /// `x_i = a + (1 - sign(z_i)) (b - a) / 2`.
    pub fn recover_actions(&self, gamma: &Array2<f64>) -> Vec<Vec<f64>> {
        let z = self.z(gamma);
        z.rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(l, &v)| {
                        let t = -sign(v);
                        self.lower[l] + (t + 1.0) * (self.upper[l] - self.lower[l]) / 2.0
                    })
                    .collect()
            })
            .collect()
    }

    fn plan(&self, gamma: &Array2<f64>) -> Result<TransportPlan> {
        TransportPlan::new(gamma.clone(), self.recover_actions(gamma), self.prior.clone())
    }
}

#[derive(Debug, Clone)]
pub struct DcaResult {
    pub plan: TransportPlan,
    /// Objective after each outer iteration, starting with the initial plan.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Each type on its own action: type `k` goes entirely to row `k mod n`.
pub fn revealing_plan(prior: &[f64], n: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, prior.len()), |(i, k)| if i == k % n { prior[k] } else { 0.0 })
}

/// Random feasible plan: each column of the prior split by normalized
/// exponential weights.
pub fn random_plan(prior: &[f64], n: usize, seed: u64) -> Array2<f64> {
    let mut rng = seed::rng(seed);
    let mut gamma = Array2::from_shape_fn((n, prior.len()), |_| -(1.0 - rng.gen::<f64>()).ln());
    for (k, mut col) in gamma.columns_mut().into_iter().enumerate() {
        let s = col.sum();
        col.mapv_inplace(|v| prior[k] * v / s);
    }
    gamma
}

pub fn dca_solve(
    prior: &DiscreteDistribution,
    cost: &LinearCost,
    div: &FDivergence,
    lambda: f64,
    config: &DcaConfig,
    seed: u64,
) -> Result<DcaResult> {
    let program = build_dc(prior, cost, div, lambda)?;
    let n = config.n_actions.unwrap_or(prior.len() + 2);
    if n == 0 {
        return Err(invalid("at least one action is needed"));
    }
    let mut gamma = match config.init {
        DcaInit::Revealing => revealing_plan(prior.weights(), n),
        DcaInit::Random => random_plan(prior.weights(), n, seed),
    };
    let mut plan = program.plan(&gamma)?;
    let mut value = prp_objective(&plan, cost, div, lambda);
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let s = program.concave_part_subgradient(&gamma);
        let (next, _) = program.convex_subproblem(&s, &gamma, config.inner_tol, config.inner_max_iter);
        let next_plan = program.plan(&next)?;
        let next_value = prp_objective(&next_plan, cost, div, lambda);
        let done = (value - next_value).abs() <= config.tol * (1.0 + value.abs());
        if next_value <= value {
            gamma = next;
            plan = next_plan;
            value = next_value;
        }
        trace.push(value);
        if done {
            converged = true;
            break;
        }
    }
    Ok(DcaResult {
        plan,
        trace,
        iterations,
        converged,
    })
}
