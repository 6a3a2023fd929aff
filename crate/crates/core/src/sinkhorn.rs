//! Entropic optimal transport.
//!
//! For weights `alpha` (n), `beta` (m), a cost matrix `C` and `lambda > 0`,
//! the Sinkhorn loss is
//!
//! ```text
//! OT(alpha, beta) = min_{gamma in Pi(alpha, beta)} <C, gamma>
//!                   + lambda sum_ij gamma_ij log(gamma_ij / (alpha_i beta_j))
//! ```
//!
//! Its minimizer has the form `diag(u) K diag(v)` with `K = exp(-C / lambda)`.
//! With `beta = p0` the regularizer is exactly the expected KL privacy cost
//! of the plan, which is what makes the Sinkhorn loss the right objective
//! for KL-regularized strategies.
//!
//! All solvers end on the `v` (column) update, so the type marginal of the
//! returned plan is exact.

use ndarray::{Array1, Array2};

use crate::divergence::FDivergence;
use crate::error::{invalid, Error, Result};
use crate::grad::{project_box, project_simplex, OptimizerState, Tape, Tensor, Var};
use crate::measures::{cost_matrix, prp_objective, CostOracle, DiscreteDistribution, TransportPlan};
use crate::scheme::{initial_atoms, SchemeConfig, SchemeResult};

/// Kernel entries below this switch [`solve`] to the log-domain solver.
pub const KERNEL_FLOOR: f64 = 1e-300;

pub const DEFAULT_MAX_ITER: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-9;

/// Cap on shifted exponents in the differentiable column update. Only rows
/// with weight below `exp(-EXPONENT_CAP)` are affected.
const EXPONENT_CAP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornProblem {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub cost: Array2<f64>,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

fn check_simplex(w: &[f64], what: &str) -> Result<()> {
    if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid(format!("{what} must be nonnegative and nonempty")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl SinkhornProblem {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, cost: Array2<f64>, lambda: f64) -> Result<Self> {
        check_simplex(&alpha, "alpha")?;
        check_simplex(&beta, "beta")?;
        if cost.dim() != (alpha.len(), beta.len()) {
            return Err(invalid(format!(
                "cost is {:?}, expected {}x{}",
                cost.dim(),
                alpha.len(),
                beta.len()
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            alpha,
            beta,
            cost,
            lambda,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        })
    }

    pub fn with_limits(mut self, max_iter: usize, tol: f64) -> Self {
        self.max_iter = max_iter;
        self.tol = tol;
        self
    }

    fn dims(&self) -> (usize, usize) {
        self.cost.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    pub plan: Array2<f64>,
    /// `log u`; `-inf` on rows with zero weight.
    pub log_u: Vec<f64>,
    /// `log v`.
    pub log_v: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    /// Largest deviation of a row or column sum from its target.
    pub marginal_error: f64,
}

fn marginal_error(plan: &Array2<f64>, alpha: &[f64], beta: &[f64]) -> f64 {
    let rows = plan.rows().into_iter().zip(alpha).map(|(r, a)| (r.sum() - a).abs());
    let cols = plan.columns().into_iter().zip(beta).map(|(c, b)| (c.sum() - b).abs());
    rows.chain(cols).fold(0.0, f64::max)
}

/// `<C, gamma> + lambda sum gamma log(gamma / (alpha beta))`, `0 log 0 = 0`.
pub fn entropic_cost(plan: &Array2<f64>, cost: &Array2<f64>, alpha: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let mut total = 0.0;
    for ((i, j), &g) in plan.indexed_iter() {
        if g > 0.0 {
            total += g * cost[[i, j]] + lambda * g * (g / (alpha[i] * beta[j])).ln();
        }
    }
    total
}

/// Loss of a solved problem, evaluated on its plan.
pub fn sinkhorn_loss(problem: &SinkhornProblem, result: &SinkhornResult) -> f64 {
    entropic_cost(
        &result.plan,
        &problem.cost,
        &problem.alpha,
        &problem.beta,
        problem.lambda,
    )
}

/// Plain scaling iterations `u = alpha / K v`, `v = beta / K^T u`.
pub fn sinkhorn_iterate(problem: &SinkhornProblem) -> Result<SinkhornResult> {
    let (n, m) = problem.dims();
    let kernel = problem.cost.mapv(|c| (-c / problem.lambda).exp());
    for (i, row) in kernel.rows().into_iter().enumerate() {
        if row.iter().all(|&k| k < f64::MIN_POSITIVE) {
            return Err(Error::NumericalUnderflow { what: "row", index: i });
        }
    }
    for (j, col) in kernel.columns().into_iter().enumerate() {
        if col.iter().all(|&k| k < f64::MIN_POSITIVE) {
            return Err(Error::NumericalUnderflow {
                what: "column",
                index: j,
            });
        }
    }
    let alpha = Array1::from(problem.alpha.clone());
    let beta = Array1::from(problem.beta.clone());
    let mut u = Array1::<f64>::zeros(n);
    let mut v = Array1::<f64>::ones(m);
    let mut iterations = 0;
    while iterations < problem.max_iter {
        iterations += 1;
        let kv = kernel.dot(&v);
        for i in 0..n {
            u[i] = if alpha[i] > 0.0 { alpha[i] / kv[i] } else { 0.0 };
        }
        let ktu = kernel.t().dot(&u);
        for j in 0..m {
            if !(ktu[j] > 0.0) {
                return Err(Error::NumericalUnderflow {
                    what: "column",
                    index: j,
                });
            }
            v[j] = beta[j] / ktu[j];
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NumericalUnderflow { what: "row", index: 0 });
        }
        // Columns are exact after the v update; only rows can be off.
        let kv = kernel.dot(&v);
        let row_error = (0..n).map(|i| (u[i] * kv[i] - alpha[i]).abs()).fold(0.0, f64::max);
        if row_error < problem.tol {
            break;
        }
    }
    let plan = Array2::from_shape_fn((n, m), |(i, j)| u[i] * kernel[[i, j]] * v[j]);
    let loss = entropic_cost(&plan, &problem.cost, &problem.alpha, &problem.beta, problem.lambda);
    Ok(SinkhornResult {
        marginal_error: marginal_error(&plan, &problem.alpha, &problem.beta),
        plan,
        log_u: u.iter().map(|x| x.ln()).collect(),
        log_v: v.iter().map(|x| x.ln()).collect(),
        loss,
        iterations,
    })
}

/// `log sum_i exp(x_i)` ignoring `-inf` entries.
fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// The same iterations on `log u`, `log v` with log-sum-exp reductions.
pub fn sinkhorn_log_domain(problem: &SinkhornProblem) -> SinkhornResult {
    let (n, m) = problem.dims();
    let log_k = problem.cost.mapv(|c| -c / problem.lambda);
    let log_alpha: Vec<f64> = problem.alpha.iter().map(|a| a.ln()).collect();
    let log_beta: Vec<f64> = problem.beta.iter().map(|b| b.ln()).collect();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let plan_of = |f: &[f64], g: &[f64]| {
        Array2::from_shape_fn((n, m), |(i, j)| {
            let e = f[i] + log_k[[i, j]] + g[j];
            if e == f64::NEG_INFINITY {
                0.0
            } else {
                e.exp()
            }
        })
    };
    while iterations < problem.max_iter {
        iterations += 1;
        for i in 0..n {
            f[i] = if problem.alpha[i] > 0.0 {
                log_alpha[i] - log_sum_exp((0..m).map(|j| log_k[[i, j]] + g[j]))
            } else {
                f64::NEG_INFINITY
            };
        }
        for j in 0..m {
            g[j] = log_beta[j] - log_sum_exp((0..n).map(|i| log_k[[i, j]] + f[i]));
        }
        let row_error = (0..n)
            .map(|i| {
                let s = log_sum_exp((0..m).map(|j| f[i] + log_k[[i, j]] + g[j]));
                let mass = if s == f64::NEG_INFINITY { 0.0 } else { s.exp() };
                (mass - problem.alpha[i]).abs()
            })
            .fold(0.0, f64::max);
        if row_error < problem.tol {
            break;
        }
    }
    let plan = plan_of(&f, &g);
    let loss = entropic_cost(&plan, &problem.cost, &problem.alpha, &problem.beta, problem.lambda);
    SinkhornResult {
        marginal_error: marginal_error(&plan, &problem.alpha, &problem.beta),
        plan,
        log_u: f,
        log_v: g,
        loss,
        iterations,
    }
}

/// Plain iterations unless the kernel has entries below [`KERNEL_FLOOR`]
/// or the scalings underflow, in which case the log-domain iteration runs.
pub fn solve(problem: &SinkhornProblem) -> Result<SinkhornResult> {
    let min_kernel = problem
        .cost
        .iter()
        .map(|c| (-c / problem.lambda).exp())
        .fold(f64::INFINITY, f64::min);
    if min_kernel < KERNEL_FLOOR {
        return Ok(sinkhorn_log_domain(problem));
    }
    match sinkhorn_iterate(problem) {
        Err(Error::NumericalUnderflow { .. }) => Ok(sinkhorn_log_domain(problem)),
        other => other,
    }
}

/// Nodes produced by [`unrolled_sinkhorn`].
#[derive(Debug, Clone, Copy)]
pub struct Unrolled {
    /// Scalar loss.
    pub loss: Var,
    /// `n x m` plan after the last column update.
    pub plan: Var,
}

/// Records exactly `iters` log-domain Sinkhorn iterations on the tape and
/// the resulting loss, differentiable in `alpha` (`n x 1`) and `cost`
/// (`n x m`).
///
/// Potentials are kept in the scaled form `a_i = log(u_i / alpha_i)` and
/// `b_j = log(v_j / beta_j)`, so rows with zero weight stay finite.
/// Max-shifts inside the log-sum-exp reductions are recorded as constants,
/// which leaves gradients exact.
pub fn unrolled_sinkhorn(tape: &mut Tape, alpha: Var, cost: Var, beta: &[f64], lambda: f64, iters: usize) -> Unrolled {
    let (n, m) = tape.shape(cost);
    assert_eq!(tape.shape(alpha), (n, 1), "alpha must be an n x 1 column");
    assert_eq!(beta.len(), m, "beta length must match the cost columns");
    let alpha_values = tape.value(alpha).data().to_vec();
    let scaled = tape.scale(cost, 1.0 / lambda);
    let beta_mat = tape.constant(Tensor::row(beta.to_vec()).broadcast_to(n, m));
    let alpha_mat = tape.broadcast(alpha, n, m);

    let mut b = tape.constant(Tensor::zeros(1, m));
    let mut a = tape.constant(Tensor::zeros(n, 1));
    for _ in 0..iters {
        // a_i = -log sum_j beta_j exp(b_j - C_ij / lambda)
        let bb = tape.broadcast(b, n, m);
        let z = tape.sub(bb, scaled);
        let zv = tape.value(z);
        let shift: Vec<f64> = (0..n)
            .map(|i| (0..m).map(|j| zv.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let shift_mat = tape.constant(Tensor::column(shift.clone()).broadcast_to(n, m));
        let centered = tape.sub(z, shift_mat);
        let e = tape.exp(centered);
        let w = tape.mul(e, beta_mat);
        let s = tape.sum_rows(w);
        let ls = tape.log(s);
        let shift_col = tape.constant(Tensor::column(shift));
        let lse = tape.add(ls, shift_col);
        a = tape.neg(lse);

        // b_j = -log sum_i alpha_i exp(a_i - C_ij / lambda)
        let ab = tape.broadcast(a, n, m);
        let z = tape.sub(ab, scaled);
        let zv = tape.value(z);
        let shift: Vec<f64> = (0..m)
            .map(|j| {
                (0..n)
                    .filter(|&i| alpha_values[i] > 0.0)
                    .map(|i| zv.get(i, j) + alpha_values[i].ln())
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let shift_mat = tape.constant(Tensor::row(shift.clone()).broadcast_to(n, m));
        let centered = tape.sub(z, shift_mat);
        let capped = tape.min_const(centered, EXPONENT_CAP);
        let e = tape.exp(capped);
        let w = tape.mul(e, alpha_mat);
        let s = tape.sum_cols(w);
        let ls = tape.log(s);
        let shift_row = tape.constant(Tensor::row(shift));
        let lse = tape.add(ls, shift_row);
        b = tape.neg(lse);
    }
    // log(gamma_ij / (alpha_i beta_j)) = a_i + b_j - C_ij / lambda
    let ab = tape.broadcast(a, n, m);
    let bb = tape.broadcast(b, n, m);
    let ab_sum = tape.add(ab, bb);
    let log_ratio = tape.sub(ab_sum, scaled);
    let ratio = tape.exp(log_ratio);
    let weights = tape.mul(alpha_mat, beta_mat);
    let plan = tape.mul(weights, ratio);
    let reg = tape.scale(log_ratio, lambda);
    let integrand = tape.add(cost, reg);
    let weighted = tape.mul(plan, integrand);
    let loss = tape.sum(weighted);
    Unrolled { loss, plan }
}

/// Loss of the unrolled Sinkhorn iterations for `mu = sum_i alpha_i delta_{x_i}`
/// against the prior, with gradients in `alpha` and in every atom.
#[derive(Debug, Clone)]
pub struct SinkhornGradient {
    pub loss: f64,
    pub grad_alpha: Vec<f64>,
    pub grad_x: Vec<Vec<f64>>,
    pub plan: Array2<f64>,
}

pub fn sinkhorn_loss_grad(
    alpha: &[f64],
    atoms: &[Vec<f64>],
    prior: &DiscreteDistribution,
    cost: &dyn CostOracle,
    lambda: f64,
    unroll_iters: usize,
) -> Result<SinkhornGradient> {
    if !cost.is_differentiable() {
        return Err(Error::NonDifferentiableCost);
    }
    if alpha.len() != atoms.len() {
        return Err(invalid("alpha and atoms differ in length"));
    }
    let types = prior.atoms();
    let c = cost_matrix(cost, atoms, types);
    let mut tape = Tape::new();
    let alpha_var = tape.leaf(Tensor::column(alpha.to_vec()));
    let cost_var = tape.leaf(Tensor::from_array(&c));
    let out = unrolled_sinkhorn(&mut tape, alpha_var, cost_var, prior.weights(), lambda, unroll_iters);
    let grads = tape.backward(out.loss)?;
    let d_cost = grads.wrt(&tape, cost_var);
    let grad_x = chain_atoms(cost, atoms, types, &d_cost)?;
    Ok(SinkhornGradient {
        loss: tape.value(out.loss).item(),
        grad_alpha: grads.wrt(&tape, alpha_var).into_data(),
        grad_x,
        plan: tape.value(out.plan).to_array(),
    })
}

/// `dL/dx_i = sum_j dL/dC_ij grad_x c(x_i, y_j)`.
pub(crate) fn chain_atoms(
    cost: &dyn CostOracle,
    atoms: &[Vec<f64>],
    types: &[Vec<f64>],
    d_cost: &Tensor,
) -> Result<Vec<Vec<f64>>> {
    atoms
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut g = vec![0.0; x.len()];
            for (j, y) in types.iter().enumerate() {
                let w = d_cost.get(i, j);
                if w == 0.0 {
                    continue;
                }
                let gc = cost.grad_x(x, y).ok_or(Error::NonDifferentiableCost)?;
                g.iter_mut().zip(gc).for_each(|(a, b)| *a += w * b);
            }
            Ok(g)
        })
        .collect()
}

/// First-order minimization of the Sinkhorn loss over `(alpha, x)`.
///
/// Each step differentiates `unroll_iters` Sinkhorn iterations, moves
/// `alpha` and the atoms with the configured optimizer, then projects
/// `alpha` onto the simplex and the atoms onto the box. The trace holds the
/// KL objective of the coupling at each iterate.
pub fn minimize_sinkhorn(
    prior: &DiscreteDistribution,
    cost: &dyn CostOracle,
    lambda: f64,
    config: &SchemeConfig,
    seed: u64,
) -> Result<SchemeResult> {
    let n = config.atoms_for(prior.len());
    if n == 0 {
        return Err(invalid("at least one action atom is needed"));
    }
    let bounds = cost
        .bounds()
        .ok_or_else(|| invalid("the Sinkhorn scheme needs a cost with box bounds"))?
        .to_vec();
    let mut atoms = initial_atoms(cost, n, seed)?;
    let mut alpha = vec![1.0 / n as f64; n];
    let d = bounds.len();
    let mut opt_alpha = OptimizerState::new(config.method, config.lr_weights, n);
    let mut opt_atoms = OptimizerState::new(config.method, config.lr_atoms, n * d);
    let kl = FDivergence::kl();
    let mut trace = Vec::with_capacity(config.steps + 1);

    let plan_of = |grad: &SinkhornGradient, atoms: &[Vec<f64>]| -> Result<TransportPlan> {
        TransportPlan::new(grad.plan.clone(), atoms.to_vec(), prior.clone())
    };
    for _ in 0..config.steps {
        let g = sinkhorn_loss_grad(&alpha, &atoms, prior, cost, lambda, config.unroll_iters)?;
        trace.push(prp_objective(&plan_of(&g, &atoms)?, cost, &kl, lambda));
        opt_alpha.step(&mut alpha, &g.grad_alpha);
        alpha = project_simplex(&alpha);
        let mut flat: Vec<f64> = atoms.iter().flatten().copied().collect();
        let grad_flat: Vec<f64> = g.grad_x.iter().flatten().copied().collect();
        opt_atoms.step(&mut flat, &grad_flat);
        atoms = flat.chunks(d).map(|x| project_box(x, &bounds)).collect();
    }
    let g = sinkhorn_loss_grad(&alpha, &atoms, prior, cost, lambda, config.unroll_iters)?;
    let plan = plan_of(&g, &atoms)?;
    trace.push(prp_objective(&plan, cost, &kl, lambda));
    Ok(SchemeResult { plan, trace })
}
