//! Projected first-order descent on the finite parametrization
//! `(gamma, x)` of a strategy: `n` atoms `x_i` in the cost's box and a
//! plan `gamma` whose columns sum to the prior.

use crate::divergence::FDivergence;
use crate::error::{invalid, Error, Result};
use crate::grad::{project_box, project_scaled_simplex, OptimizerState, Tape, Tensor, Var};
use crate::measures::{cost_matrix, prp_objective, CostOracle, DiscreteDistribution, TransportPlan};
use crate::scheme::{initial_atoms, SchemeConfig, SchemeResult};
use crate::sinkhorn::chain_atoms;

/// Floor inside logarithms.
const LOG_FLOOR: f64 = 1e-300;
/// Added to row masses before dividing; keeps `gamma / m` and its
/// derivatives finite on empty rows.
const MASS_FLOOR: f64 = 1e-150;

/// Records `sum_i m_i D(p_i, p0)` for the `n x K` plan node `gamma`.
///
/// Posteriors are formed as `gamma_ik / (m_i + 1e-150)` and logarithms are
/// floored at `1e-300`, so empty rows contribute zero with zero gradient.
/// Divergences given by an arbitrary closure cannot be recorded.
pub fn privacy_on_tape(tape: &mut Tape, div: &FDivergence, gamma: Var, prior: &[f64]) -> Result<Var> {
    let (n, k) = tape.shape(gamma);
    if prior.len() != k {
        return Err(invalid("prior length differs from the plan columns"));
    }
    let mass = tape.sum_rows(gamma);
    let padded = tape.offset(mass, MASS_FLOOR);
    let padded = tape.broadcast(padded, n, k);
    let post = tape.div(gamma, padded);
    let prior_row = Tensor::row(prior.to_vec()).broadcast_to(n, k);
    let p0 = tape.constant(prior_row.clone());
    let term = if div.is_kl() {
        let log_p0 = tape.constant(Tensor::row(prior.iter().map(|p| p.ln()).collect()).broadcast_to(n, k));
        let shifted = tape.offset(post, LOG_FLOOR);
        let log_post = tape.log(shifted);
        let ratio = tape.sub(log_post, log_p0);
        tape.mul(post, ratio)
    } else if div.is_reverse_kl() {
        let log_p0 = tape.constant(Tensor::row(prior.iter().map(|p| p.ln()).collect()).broadcast_to(n, k));
        let shifted = tape.offset(post, LOG_FLOOR);
        let log_post = tape.log(shifted);
        let ratio = tape.sub(log_p0, log_post);
        tape.mul(p0, ratio)
    } else if div.is_total_variation() {
        let diff = tape.sub(post, p0);
        let a = tape.abs(diff);
        tape.scale(a, 0.5)
    } else if let Some(alpha) = div.alpha_exponent() {
        let weight = tape.constant(Tensor::row(prior.iter().map(|p| p.powf(1.0 - alpha)).collect()).broadcast_to(n, k));
        let pw = tape.powf(post, alpha);
        let weighted = tape.mul(pw, weight);
        let centered = tape.sub(weighted, p0);
        tape.scale(centered, 1.0 / (alpha - 1.0))
    } else {
        return Err(Error::NotTapeable(div.name().to_string()));
    };
    let per_row = tape.sum_rows(term);
    let weighted = tape.mul(per_row, mass);
    Ok(tape.sum(weighted))
}

/// Value and gradients of the objective at `(gamma, x)`.
struct Evaluation {
    grad_gamma: Vec<f64>,
    grad_x: Vec<Vec<f64>>,
}

fn evaluate(
    gamma: &[f64],
    atoms: &[Vec<f64>],
    prior: &DiscreteDistribution,
    cost: &dyn CostOracle,
    div: &FDivergence,
    lambda: f64,
) -> Result<Evaluation> {
    let (n, k) = (atoms.len(), prior.len());
    let c = cost_matrix(cost, atoms, prior.atoms());
    let mut tape = Tape::new();
    let g = tape.leaf(Tensor::new(n, k, gamma.to_vec()));
    let cv = tape.leaf(Tensor::from_array(&c));
    let weighted = tape.mul(g, cv);
    let utility = tape.sum(weighted);
    let objective = if lambda == 0.0 {
        utility
    } else {
        let privacy = privacy_on_tape(&mut tape, div, g, prior.weights())?;
        let scaled = tape.scale(privacy, lambda);
        tape.add(utility, scaled)
    };
    let grads = tape.backward(objective)?;
    let d_cost = grads.wrt(&tape, cv);
    Ok(Evaluation {
        grad_gamma: grads.wrt(&tape, g).into_data(),
        grad_x: chain_atoms(cost, atoms, prior.atoms(), &d_cost)?,
    })
}

fn project_columns(gamma: &mut [f64], n: usize, prior: &[f64]) {
    let k = prior.len();
    for j in 0..k {
        let col: Vec<f64> = (0..n).map(|i| gamma[i * k + j]).collect();
        for (i, v) in project_scaled_simplex(&col, prior[j]).into_iter().enumerate() {
            gamma[i * k + j] = v;
        }
    }
}

/// First-order minimization of the objective over `(gamma, x)`.
///
/// Starts from the uniform product plan and atoms drawn uniformly in the
/// box from `seed`, the same starting atoms as
/// [`crate::sinkhorn::minimize_sinkhorn`].
pub fn minimize_direct(
    prior: &DiscreteDistribution,
    cost: &dyn CostOracle,
    div: &FDivergence,
    lambda: f64,
    config: &SchemeConfig,
    seed: u64,
) -> Result<SchemeResult> {
    if !cost.is_differentiable() {
        return Err(Error::NonDifferentiableCost);
    }
    let n = config.atoms_for(prior.len());
    if n == 0 {
        return Err(invalid("at least one action atom is needed"));
    }
    let bounds = cost
        .bounds()
        .ok_or_else(|| invalid("the direct scheme needs a cost with box bounds"))?
        .to_vec();
    let d = bounds.len();
    let p0 = prior.weights();
    let k = p0.len();
    let mut atoms = initial_atoms(cost, n, seed)?;
    let mut gamma: Vec<f64> = (0..n * k).map(|idx| p0[idx % k] / n as f64).collect();
    let mut opt_gamma = OptimizerState::new(config.method, config.lr_weights, n * k);
    let mut opt_atoms = OptimizerState::new(config.method, config.lr_atoms, n * d);
    let plan_of = |gamma: &[f64], atoms: &[Vec<f64>]| -> Result<TransportPlan> {
        let g = ndarray::Array2::from_shape_vec((n, k), gamma.to_vec()).expect("n x K plan");
        TransportPlan::new(g, atoms.to_vec(), prior.clone())
    };
    let mut trace = Vec::with_capacity(config.steps + 1);
    for _ in 0..config.steps {
        trace.push(prp_objective(&plan_of(&gamma, &atoms)?, cost, div, lambda));
        let e = evaluate(&gamma, &atoms, prior, cost, div, lambda)?;
        opt_gamma.step(&mut gamma, &e.grad_gamma);
        project_columns(&mut gamma, n, p0);
        let mut flat: Vec<f64> = atoms.iter().flatten().copied().collect();
        let grad_flat: Vec<f64> = e.grad_x.iter().flatten().copied().collect();
        opt_atoms.step(&mut flat, &grad_flat);
        atoms = flat.chunks(d).map(|x| project_box(x, &bounds)).collect();
    }
    let plan = plan_of(&gamma, &atoms)?;
    trace.push(prp_objective(&plan, cost, div, lambda));
    Ok(SchemeResult { plan, trace })
}
