//! Discrete distributions, transport plans and the privacy-regularized
//! objective.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::divergence::{self, FDivergence};
use crate::error::{invalid, Error, Result};

/// Absolute tolerance on plan column sums.
pub const COLUMN_TOLERANCE: f64 = 1e-9;

/// Default sup-norm tolerance under which two action atoms are the same.
pub const DEFAULT_ATOM_TOL: f64 = 1e-8;

/// Weighted atoms. Weights are nonnegative and renormalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(invalid(format!("{} atoms but {} weights", atoms.len(), weights.len())));
        }
        if weights.is_empty() {
            return Err(invalid("empty distribution"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(invalid(format!("weight {w} is not a finite nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid("weights sum to zero"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { atoms, weights })
    }

    /// A distribution over the labels `0, 1, ..., n - 1`.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let atoms = (0..weights.len()).map(|k| vec![k as f64]).collect();
        Self::new(atoms, weights)
    }

    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0; n])
    }

    pub fn atoms(&self) -> &[Vec<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// A joint law of (action, type): `gamma[i][k]` is the mass on
/// `(action_atoms[i], prior.atoms()[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    gamma: Array2<f64>,
    action_atoms: Vec<Vec<f64>>,
    prior: DiscreteDistribution,
}

impl TransportPlan {
    /// Checked constructor: entries must be nonnegative and column sums must
    /// match the prior within [`COLUMN_TOLERANCE`]; columns are then rescaled
    /// onto the prior exactly.
    pub fn new(gamma: Array2<f64>, action_atoms: Vec<Vec<f64>>, prior: DiscreteDistribution) -> Result<Self> {
        let mut plan = Self::from_parts_unchecked(gamma, action_atoms, prior)?;
        if let Some(g) = plan.gamma.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(invalid(format!("plan entry {g} is not finite and nonnegative")));
        }
        if let Some(w) = plan.prior.weights().iter().find(|w| **w <= 0.0) {
            return Err(invalid(format!("prior weight {w} must be positive")));
        }
        for (k, mut col) in plan.gamma.columns_mut().into_iter().enumerate() {
            let target = plan.prior.weights[k];
            let sum: f64 = col.iter().sum();
            if (sum - target).abs() > COLUMN_TOLERANCE {
                return Err(invalid(format!("column {k} sums to {sum}, prior weight is {target}")));
            }
            if sum > 0.0 {
                col.mapv_inplace(|g| g * target / sum);
            }
        }
        Ok(plan)
    }

    /// Only shapes are checked. Used for diagnostics of infeasible plans.
    pub fn from_parts_unchecked(
        gamma: Array2<f64>,
        action_atoms: Vec<Vec<f64>>,
        prior: DiscreteDistribution,
    ) -> Result<Self> {
        let (n, k) = gamma.dim();
        if n != action_atoms.len() {
            return Err(invalid(format!(
                "{n} plan rows but {} action atoms",
                action_atoms.len()
            )));
        }
        if k != prior.len() {
            return Err(invalid(format!("{k} plan columns but {} types", prior.len())));
        }
        Ok(Self {
            gamma,
            action_atoms,
            prior,
        })
    }

    /// The independent coupling `weights (x) prior`.
    pub fn product(weights: &[f64], action_atoms: Vec<Vec<f64>>, prior: DiscreteDistribution) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        let gamma = Array2::from_shape_fn((weights.len(), prior.len()), |(i, k)| {
            weights[i] / total * prior.weights()[k]
        });
        Self::new(gamma, action_atoms, prior)
    }

    pub fn gamma(&self) -> &Array2<f64> {
        &self.gamma
    }

    pub fn action_atoms(&self) -> &[Vec<f64>] {
        &self.action_atoms
    }

    pub fn type_atoms(&self) -> &[Vec<f64>] {
        self.prior.atoms()
    }

    pub fn prior(&self) -> &DiscreteDistribution {
        &self.prior
    }

    pub fn n_actions(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn n_types(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.gamma.row(i).to_vec()
    }

    /// Row masses `m_i = sum_k gamma[i][k]`, i.e. the action marginal.
    pub fn row_masses(&self) -> Vec<f64> {
        self.gamma.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Posterior on the type after observing action `i` (Bayes rule).
    pub fn posterior(&self, i: usize) -> Result<DiscreteDistribution> {
        let row = self.gamma.row(i);
        let mass = row.sum();
        if !(mass > 0.0) {
            return Err(Error::ZeroMassRow { row: i });
        }
        DiscreteDistribution::new(self.prior.atoms().to_vec(), row.iter().map(|g| g / mass).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PlanDocument::from(self)).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PlanDocument = serde_json::from_str(text).map_err(|e| invalid(format!("plan JSON: {e}")))?;
        doc.try_into()
    }
}

/// On-disk form of a plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanDocument {
    pub atoms: Vec<Vec<f64>>,
    pub types: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
}

impl From<&TransportPlan> for PlanDocument {
    fn from(plan: &TransportPlan) -> Self {
        Self {
            atoms: plan.action_atoms.clone(),
            types: plan.prior.atoms().to_vec(),
            prior: plan.prior.weights().to_vec(),
            gamma: plan.gamma.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl TryFrom<PlanDocument> for TransportPlan {
    type Error = Error;

    fn try_from(doc: PlanDocument) -> Result<Self> {
        let n = doc.gamma.len();
        let k = doc.prior.len();
        if doc.gamma.iter().any(|r| r.len() != k) {
            return Err(invalid("ragged gamma matrix"));
        }
        let flat: Vec<f64> = doc.gamma.into_iter().flatten().collect();
        let gamma = Array2::from_shape_vec((n, k), flat).map_err(|e| invalid(e.to_string()))?;
        let prior = DiscreteDistribution::new(doc.types, doc.prior)?;
        TransportPlan::new(gamma, doc.atoms, prior)
    }
}

/// Utility loss `c(x, y)` of playing `x` with type `y`.
pub trait CostOracle: Send + Sync {
    fn cost(&self, x: &[f64], y: &[f64]) -> f64;

    /// Box `[a_l, b_l]` per coordinate of the action space, if any.
    fn bounds(&self) -> Option<&[(f64, f64)]> {
        None
    }

    fn is_differentiable(&self) -> bool {
        false
    }

    /// Gradient in `x`; `None` when the oracle is not differentiable.
    fn grad_x(&self, _x: &[f64], _y: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Whether `c(x, y) = x . y` on its box, which enables the DC scheme.
    fn is_linear(&self) -> bool {
        false
    }
}

/// `c(x, y) = x . y` on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCost {
    bounds: Vec<(f64, f64)>,
}

impl LinearCost {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Self { bounds }
    }

    /// The box `[-1, 1]^d`.
    pub fn symmetric(d: usize) -> Self {
        Self::new(vec![(-1.0, 1.0); d])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }
}

impl CostOracle for LinearCost {
    fn cost(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    fn bounds(&self) -> Option<&[(f64, f64)]> {
        Some(&self.bounds)
    }

    fn is_differentiable(&self) -> bool {
        true
    }

    fn grad_x(&self, _x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        Some(y.to_vec())
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// `C[i][j] = c(x_i, y_j)`.
pub fn cost_matrix(cost: &dyn CostOracle, actions: &[Vec<f64>], types: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((actions.len(), types.len()), |(i, j)| cost.cost(&actions[i], &types[j]))
}

/// `sum_{i,k} gamma[i][k] c(x_i, y_k)`; zero-mass cells are skipped.
pub fn expected_cost(plan: &TransportPlan, cost: &dyn CostOracle) -> f64 {
    let mut total = 0.0;
    for ((i, k), &g) in plan.gamma.indexed_iter() {
        if g > 0.0 {
            total += g * cost.cost(&plan.action_atoms[i], &plan.type_atoms()[k]);
        }
    }
    total
}

/// `sum_i m_i D(p_{x_i}, p0)`, skipping zero-mass rows.
pub fn privacy_cost(plan: &TransportPlan, div: &FDivergence) -> f64 {
    let prior = plan.prior.weights();
    let mut total = 0.0;
    for i in 0..plan.n_actions() {
        if let Ok(post) = plan.posterior(i) {
            let mass = plan.gamma.row(i).sum();
            let d = divergence::divergence_weights(div, post.weights(), prior);
            total += if d.is_infinite() { d } else { mass * d };
        }
    }
    total
}

/// `sum_{i,k} p0_k h_k(gamma_i)`: the same quantity as [`privacy_cost`]
/// computed row-wise through the perspective functions.
pub fn privacy_cost_perspective(plan: &TransportPlan, div: &FDivergence) -> f64 {
    let prior = plan.prior.weights();
    plan.gamma
        .rows()
        .into_iter()
        .map(|r| divergence::row_privacy(div, r.as_slice().expect("standard layout"), prior))
        .sum()
}

/// Expected cost plus `lambda` times the expected posterior-to-prior
/// divergence. Returns `+inf` when some posterior is not absolutely
/// continuous and the divergence blows up.
pub fn prp_objective(plan: &TransportPlan, cost: &dyn CostOracle, div: &FDivergence, lambda: f64) -> f64 {
    let utility = expected_cost(plan, cost);
    if lambda == 0.0 {
        return utility;
    }
    utility + lambda * privacy_cost(plan, div)
}

/// Sums rows whose action atoms agree within `atom_tol` in sup norm. The
/// first atom of each group is kept. Merging never increases the objective
/// since every `h_k` is subadditive.
pub fn merge_duplicate_atoms(plan: &TransportPlan, atom_tol: f64) -> TransportPlan {
    let mut atoms: Vec<Vec<f64>> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, atom) in plan.action_atoms.iter().enumerate() {
        let row = plan.gamma.row(i);
        let existing = atoms
            .iter()
            .position(|a| a.len() == atom.len() && a.iter().zip(atom).all(|(u, v)| (u - v).abs() <= atom_tol));
        match existing {
            Some(j) => rows[j].iter_mut().zip(row).for_each(|(r, g)| *r += g),
            None => {
                atoms.push(atom.clone());
                rows.push(row.to_vec());
            }
        }
    }
    let k = plan.n_types();
    let gamma =
        Array2::from_shape_vec((rows.len(), k), rows.into_iter().flatten().collect()).expect("consistent shape");
    TransportPlan {
        gamma,
        action_atoms: atoms,
        prior: plan.prior.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanDiagnostics {
    /// `max(0, -min_{i,k} gamma[i][k])`.
    pub max_negativity: f64,
    /// `max_k |sum_i gamma[i][k] - p0_k|`.
    pub max_column_violation: f64,
    pub row_masses: Vec<f64>,
}

impl PlanDiagnostics {
    pub fn is_feasible(&self) -> bool {
        self.max_negativity == 0.0 && self.max_column_violation <= COLUMN_TOLERANCE
    }
}

pub fn validate_plan(plan: &TransportPlan) -> PlanDiagnostics {
    let min = plan.gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let max_column_violation = plan
        .gamma
        .columns()
        .into_iter()
        .zip(plan.prior.weights())
        .map(|(c, w)| (c.sum() - w).abs())
        .fold(0.0, f64::max);
    PlanDiagnostics {
        max_negativity: (-min).max(0.0),
        max_column_violation,
        row_masses: plan.row_masses(),
    }
}
