//! Repeated second-price auctions against a single truthful opponent.
//!
//! A bidder of type `y` has values `y v` with `v ~ Exp(1)`. A strategy maps
//! types to bid policies `beta`, each a one-hidden-layer ReLU network of the
//! base value `v`. The expected revenue of policy `beta` for type `y` is
//!
//! ```text
//! r(beta, y) = E_v[(y v - beta(v) + beta'(v)) G(beta(v)) 1{beta(v) - beta'(v) >= 0}]
//! ```
//!
//! with `G` the opponent's value cdf, and the cost of the pair is
//! `1 - r(beta, y)`. Since `r` is affine in `y`, one pass over the samples
//! gives the revenue of a policy for every type at once:
//! `r(beta, y) = y A(beta) + B(beta)`.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::{divergence_weights, FDivergence};
use crate::error::{invalid, Result};
use crate::grad::{project_simplex, Method, OptimizerState, Tape, Tensor};
use crate::measures::{privacy_cost, DiscreteDistribution, TransportPlan};
use crate::seed::{self, Purpose};
use crate::sinkhorn::{solve, unrolled_sinkhorn, SinkhornProblem};

pub const DEFAULT_WIDTH: usize = 100;
pub const DEFAULT_TYPES: usize = 10;

/// `beta(v) = b + sum_j a_j relu(w_j v + c_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidPolicy {
    pub w: Vec<f64>,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub b: f64,
}

impl BidPolicy {
    pub fn new(w: Vec<f64>, c: Vec<f64>, a: Vec<f64>, b: f64) -> Result<Self> {
        if w.len() != c.len() || w.len() != a.len() {
            return Err(invalid("policy layers differ in width"));
        }
        Ok(Self { w, c, a, b })
    }

    /// `beta = b` with no hidden units.
    pub fn constant(b: f64) -> Self {
        Self {
            w: Vec::new(),
            c: Vec::new(),
            a: Vec::new(),
            b,
        }
    }

    /// Slopes in `[0.5, 1.5]`, offsets in `[-0.5, 0.5]`, output weights in
    /// `[0, 0.01]` and zero output bias: a gently increasing bid.
    pub fn random(width: usize, rng: &mut impl Rng) -> Self {
        let w = (0..width).map(|_| rng.gen_range(0.5..=1.5)).collect();
        let c = (0..width).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let a = (0..width).map(|_| rng.gen_range(0.0..=0.01)).collect();
        Self { w, c, a, b: 0.0 }
    }

    pub fn width(&self) -> usize {
        self.w.len()
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.b
            + (0..self.width())
                .map(|j| self.a[j] * (self.w[j] * v + self.c[j]).max(0.0))
                .sum::<f64>()
    }

    /// `sum_j a_j w_j 1{w_j v + c_j > 0}`.
    pub fn derivative(&self, v: f64) -> f64 {
        (0..self.width())
            .filter(|&j| self.w[j] * v + self.c[j] > 0.0)
            .map(|j| self.a[j] * self.w[j])
            .sum()
    }

    /// `(beta(v), beta'(v))` in one pass over the hidden layer.
    pub fn eval_with_derivative(&self, v: f64) -> (f64, f64) {
        let (mut value, mut slope) = (self.b, 0.0);
        for j in 0..self.width() {
            let h = self.w[j] * v + self.c[j];
            if h > 0.0 {
                value += self.a[j] * h;
                slope += self.a[j] * self.w[j];
            }
        }
        (value, slope)
    }

    /// Parameters as `[w, c, a, b]`.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(3 * self.width() + 1);
        p.extend_from_slice(&self.w);
        p.extend_from_slice(&self.c);
        p.extend_from_slice(&self.a);
        p.push(self.b);
        p
    }

    pub fn from_params(p: &[f64]) -> Result<Self> {
        if p.is_empty() || (p.len() - 1) % 3 != 0 {
            return Err(invalid(format!("{} is not a valid policy parameter count", p.len())));
        }
        let w = (p.len() - 1) / 3;
        Ok(Self {
            w: p[..w].to_vec(),
            c: p[w..2 * w].to_vec(),
            a: p[2 * w..3 * w].to_vec(),
            b: p[3 * w],
        })
    }
}

/// Types on the midpoints `(j - 1/2) / K` of `[0, 1]` with a uniform prior.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionModel {
    prior: DiscreteDistribution,
}

impl AuctionModel {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("the model needs at least one type"));
        }
        let atoms = (1..=k).map(|j| vec![(j as f64 - 0.5) / k as f64]).collect();
        Ok(Self {
            prior: DiscreteDistribution::uniform(atoms)?,
        })
    }

    pub fn prior(&self) -> &DiscreteDistribution {
        &self.prior
    }

    pub fn types(&self) -> Vec<f64> {
        self.prior.atoms().iter().map(|y| y[0]).collect()
    }

    pub fn k(&self) -> usize {
        self.prior.len()
    }
}

/// Value cdf of an opponent uniform on `[0, 1]`.
pub fn opponent_cdf(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `n` draws of `Exp(1)` by inversion.
pub fn sample_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect()
}

/// Per-sample pieces of the revenue: `y * slope + offset` is the revenue
/// of the sample for type `y`.
///
/// With `tau > 0` the indicator `1{beta - beta' >= 0}` is replaced by the
/// logistic weight `sigma((beta - beta') / tau)`; `tau = 0` is the exact
/// indicator, held constant under differentiation.
struct SampleTerms {
    beta: f64,
    dbeta: f64,
    g: f64,
    weight: f64,
    /// Derivative of `weight` in `beta - beta'`.
    dweight: f64,
}

impl SampleTerms {
    fn new(policy: &BidPolicy, v: f64, tau: f64) -> Self {
        let (beta, dbeta) = policy.eval_with_derivative(v);
        let z = beta - dbeta;
        let (weight, dweight) = if tau > 0.0 {
            let s = 1.0 / (1.0 + (-z / tau).exp());
            (s, s * (1.0 - s) / tau)
        } else if z >= 0.0 {
            (1.0, 0.0)
        } else {
            (0.0, 0.0)
        };
        Self {
            beta,
            dbeta,
            g: opponent_cdf(beta),
            weight,
            dweight,
        }
    }

    fn slope(&self, v: f64) -> f64 {
        v * self.g * self.weight
    }

    fn offset(&self) -> f64 {
        (self.dbeta - self.beta) * self.g * self.weight
    }
}

fn coefficients(policy: &BidPolicy, values: &[f64], tau: f64) -> (f64, f64) {
    let (mut a, mut b) = (0.0, 0.0);
    for &v in values {
        let t = SampleTerms::new(policy, v, tau);
        a += t.slope(v);
        b += t.offset();
    }
    let n = values.len() as f64;
    (a / n, b / n)
}

fn coefficients_grad(policy: &BidPolicy, values: &[f64], tau: f64, ga: f64, gb: f64, grad: &mut [f64]) {
    let width = policy.width();
    assert_eq!(grad.len(), 3 * width + 1, "gradient buffer has the wrong size");
    let scale = 1.0 / values.len() as f64;
    let (gw, rest) = grad.split_at_mut(width);
    let (gc, rest) = rest.split_at_mut(width);
    let (ga_out, gbias) = rest.split_at_mut(width);
    for &v in values {
        let t = SampleTerms::new(policy, v, tau);
        if t.weight == 0.0 && t.dweight == 0.0 {
            continue;
        }
        let slope_g = if t.beta > 0.0 && t.beta < 1.0 { 1.0 } else { 0.0 };
        // The sample contributes (ga v + gb (beta' - beta)) G(beta) w(beta - beta').
        let outer = ga * v + gb * (t.dbeta - t.beta);
        let d_beta = scale * (outer * (slope_g * t.weight + t.g * t.dweight) - gb * t.g * t.weight);
        let d_dbeta = scale * (gb * t.g * t.weight - outer * t.g * t.dweight);
        gbias[0] += d_beta;
        for j in 0..width {
            let h = policy.w[j] * v + policy.c[j];
            if h <= 0.0 {
                continue;
            }
            let aj = policy.a[j];
            ga_out[j] += d_beta * h + d_dbeta * policy.w[j];
            gw[j] += d_beta * aj * v + d_dbeta * aj;
            gc[j] += d_beta * aj;
        }
    }
}

/// `(A, B)` with `r(beta, y) = y A + B` on the given samples.
pub fn revenue_coefficients(policy: &BidPolicy, values: &[f64]) -> (f64, f64) {
    coefficients(policy, values, 0.0)
}

/// Adds `ga dA + gb dB` (derivatives in the `[w, c, a, b]` layout) to
/// `grad`. The indicator and the activation pattern are held fixed.
pub fn revenue_coefficients_grad(policy: &BidPolicy, values: &[f64], ga: f64, gb: f64, grad: &mut [f64]) {
    coefficients_grad(policy, values, 0.0, ga, gb, grad);
}

/// Revenue of `policy` for type `y` on a fixed sample set.
pub fn revenue_on_samples(policy: &BidPolicy, y: f64, values: &[f64]) -> f64 {
    let (a, b) = revenue_coefficients(policy, values);
    y * a + b
}

/// Gradient of [`revenue_on_samples`] in the `[w, c, a, b]` layout.
pub fn revenue_grad_on_samples(policy: &BidPolicy, y: f64, values: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; 3 * policy.width() + 1];
    revenue_coefficients_grad(policy, values, y, 1.0, &mut g);
    g
}

/// Monte-Carlo revenue with `n_samples` values drawn from `seed`.
pub fn revenue(policy: &BidPolicy, y: f64, n_samples: usize, seed: u64) -> f64 {
    revenue_on_samples(policy, y, &sample_values(n_samples.max(1), seed))
}

/// Pathwise gradient of [`revenue`] on the same samples.
pub fn revenue_grad(policy: &BidPolicy, y: f64, n_samples: usize, seed: u64) -> Vec<f64> {
    revenue_grad_on_samples(policy, y, &sample_values(n_samples.max(1), seed))
}

/// `C_ij = 1 - r(beta_i, y_j)` on one sample set, with the coefficients.
fn cost_table(policies: &[BidPolicy], types: &[f64], values: &[f64], tau: f64) -> Array2<f64> {
    let coeffs: Vec<(f64, f64)> = policies.iter().map(|p| coefficients(p, values, tau)).collect();
    Array2::from_shape_fn((policies.len(), types.len()), |(i, j)| {
        1.0 - (types[j] * coeffs[i].0 + coeffs[i].1)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Number of policies; `None` means `K + 2`.
    pub n_atoms: Option<usize>,
    pub width: usize,
    pub steps: usize,
    pub train_samples: usize,
    /// Samples for the cost matrix of the returned plan.
    pub plan_samples: usize,
    pub unroll_iters: usize,
    pub method: Method,
    pub lr_weights: f64,
    pub lr_policy: f64,
    /// Width of the logistic indicator used while training; `0` keeps the
    /// exact indicator.
    pub indicator_width: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_atoms: None,
            width: DEFAULT_WIDTH,
            steps: 2000,
            train_samples: 1000,
            plan_samples: 10_000,
            unroll_iters: 300,
            method: Method::Adam,
            lr_weights: 1e-3,
            lr_policy: 1e-3,
            indicator_width: 0.05,
        }
    }
}

/// A trained strategy. The plan's action atoms are the policies' parameter
/// vectors.
#[derive(Debug, Clone)]
pub struct TrainedStrategy {
    pub policies: Vec<BidPolicy>,
    pub plan: TransportPlan,
    /// Sinkhorn loss at each training step.
    pub trace: Vec<f64>,
}

/// Descends the Sinkhorn loss over the atom weights and the policies, with
/// fresh samples at every step shared by all policies and types.
pub fn train_strategy(model: &AuctionModel, lambda: f64, config: &TrainConfig, seed: u64) -> Result<TrainedStrategy> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let n = config.n_atoms.unwrap_or(model.k() + 2);
    if n == 0 || config.train_samples == 0 || config.plan_samples == 0 {
        return Err(invalid("atoms and sample counts must be positive"));
    }
    let types = model.types();
    let beta = model.prior().weights().to_vec();
    let mut init_rng = seed::rng(seed::derive(seed, 0, Purpose::Init));
    let mut policies: Vec<BidPolicy> = (0..n).map(|_| BidPolicy::random(config.width, &mut init_rng)).collect();
    let mut alpha = vec![1.0 / n as f64; n];
    let n_params = 3 * config.width + 1;
    let mut opt_alpha = OptimizerState::new(config.method, config.lr_weights, n);
    let mut opt_policy: Vec<OptimizerState> = (0..n)
        .map(|_| OptimizerState::new(config.method, config.lr_policy, n_params))
        .collect();
    let training = seed::derive(seed, 0, Purpose::Training);
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let values = sample_values(config.train_samples, seed::derive_raw(training, step as u64, 0));
        let cost = cost_table(&policies, &types, &values, config.indicator_width);
        let mut tape = Tape::new();
        let alpha_var = tape.leaf(Tensor::column(alpha.clone()));
        let cost_var = tape.leaf(Tensor::from_array(&cost));
        let out = unrolled_sinkhorn(&mut tape, alpha_var, cost_var, &beta, lambda, config.unroll_iters);
        trace.push(tape.value(out.loss).item());
        let grads = tape.backward(out.loss)?;
        let d_cost = grads.wrt(&tape, cost_var);
        let d_alpha = grads.wrt(&tape, alpha_var).into_data();
        for (i, policy) in policies.iter_mut().enumerate() {
            // C_ij = 1 - y_j A_i - B_i
            let ga: f64 = (0..types.len()).map(|j| -d_cost.get(i, j) * types[j]).sum();
            let gb: f64 = (0..types.len()).map(|j| -d_cost.get(i, j)).sum();
            let mut g = vec![0.0; n_params];
            coefficients_grad(policy, &values, config.indicator_width, ga, gb, &mut g);
            let mut params = policy.to_params();
            opt_policy[i].step(&mut params, &g);
            *policy = BidPolicy::from_params(&params)?;
        }
        // Only differences between the entries matter on the simplex; the
        // common part would otherwise dominate the adaptive step scaling.
        let mean = d_alpha.iter().sum::<f64>() / n as f64;
        let d_alpha: Vec<f64> = d_alpha.iter().map(|g| g - mean).collect();
        opt_alpha.step(&mut alpha, &d_alpha);
        alpha = project_simplex(&alpha);
    }
    let values = sample_values(config.plan_samples, seed::derive(seed, 0, Purpose::Plan));
    let cost = cost_table(&policies, &types, &values, 0.0);
    let problem = SinkhornProblem::new(alpha, beta, cost, lambda)?;
    let result = solve(&problem)?;
    let atoms = policies.iter().map(BidPolicy::to_params).collect();
    let plan = TransportPlan::new(result.plan, atoms, model.prior().clone())?;
    Ok(TrainedStrategy { policies, plan, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyEvaluation {
    /// `sum_ik gamma_ik r(beta_i, y_k)`.
    pub utility: f64,
    /// Monte-Carlo standard error of `utility`.
    pub utility_stderr: f64,
    /// `sum_i m_i KL(p_i, p0)`.
    pub privacy: f64,
}

/// Utility and KL privacy of a plan whose atoms are policy parameters.
pub fn evaluate_strategy(
    model: &AuctionModel,
    plan: &TransportPlan,
    eval_samples: usize,
    seed: u64,
) -> Result<StrategyEvaluation> {
    if eval_samples == 0 {
        return Err(invalid("eval_samples must be positive"));
    }
    let types = model.types();
    let policies = plan
        .action_atoms()
        .iter()
        .map(|p| BidPolicy::from_params(p))
        .collect::<Result<Vec<_>>>()?;
    let gamma = plan.gamma();
    let mass: Vec<f64> = plan.row_masses();
    let mean_type: Vec<f64> = (0..policies.len())
        .map(|i| (0..types.len()).map(|k| gamma[[i, k]] * types[k]).sum())
        .collect();
    let values = sample_values(eval_samples, seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for &v in &values {
        let x: f64 = policies
            .iter()
            .enumerate()
            .filter(|(i, _)| mass[*i] > 0.0)
            .map(|(i, p)| {
                let t = SampleTerms::new(p, v, 0.0);
                mean_type[i] * t.slope(v) + mass[i] * t.offset()
            })
            .sum();
        sum += x;
        sum_sq += x * x;
    }
    let n = eval_samples as f64;
    let mean = sum / n;
    let var = if eval_samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(StrategyEvaluation {
        utility: mean,
        utility_stderr: (var / n).sqrt(),
        privacy: privacy_cost(plan, &FDivergence::kl()),
    })
}

/// Mean total-variation distance from posteriors to the prior, weighted by
/// row mass.
pub fn mean_posterior_tv(plan: &TransportPlan) -> f64 {
    let tv = FDivergence::total_variation();
    (0..plan.n_actions())
        .filter_map(|i| {
            let post = plan.posterior(i).ok()?;
            let m: f64 = plan.row(i).iter().sum();
            Some(m * divergence_weights(&tv, post.weights(), plan.prior().weights()))
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub runs: usize,
    pub eval_samples: usize,
    pub train: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: log_grid(1e-3, 1.0, 12),
            runs: 5,
            eval_samples: 1_000_000,
            train: TrainConfig::default(),
        }
    }
}

/// `n` log-spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| match i {
                0 => lo,
                _ if i == n - 1 => hi,
                _ => (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub lambda: f64,
    pub utility: f64,
    pub utility_stderr: f64,
    pub privacy: f64,
    pub privacy_stderr: f64,
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub strategy: TrainedStrategy,
    pub evaluation: StrategyEvaluation,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<TradeoffRow>,
    /// Runs per grid point, in grid order.
    pub runs: Vec<Vec<SweepRun>>,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Trains and evaluates `runs` strategies per grid point. Run `r` uses the
/// same training seed at every `lambda` and the same evaluation samples
/// everywhere. With a single run, the utility error is the Monte-Carlo one.
pub fn sweep_lambda(model: &AuctionModel, config: &SweepConfig, master: u64) -> Result<SweepResult> {
    if config.runs == 0 && !config.lambdas.is_empty() {
        return Err(invalid("runs must be positive"));
    }
    let eval_seed = seed::derive(master, 0, Purpose::Evaluation);
    let mut rows = Vec::with_capacity(config.lambdas.len());
    let mut all = Vec::with_capacity(config.lambdas.len());
    for &lambda in &config.lambdas {
        let mut runs = Vec::with_capacity(config.runs);
        for r in 0..config.runs {
            let strategy = train_strategy(
                model,
                lambda,
                &config.train,
                seed::derive(master, r as u64, Purpose::Training),
            )?;
            let evaluation = evaluate_strategy(model, &strategy.plan, config.eval_samples, eval_seed)?;
            runs.push(SweepRun { strategy, evaluation });
        }
        let utilities: Vec<f64> = runs.iter().map(|r| r.evaluation.utility).collect();
        let privacies: Vec<f64> = runs.iter().map(|r| r.evaluation.privacy).collect();
        let (utility, mut utility_stderr) = mean_and_stderr(&utilities);
        let (privacy, privacy_stderr) = mean_and_stderr(&privacies);
        if runs.len() == 1 {
            utility_stderr = runs[0].evaluation.utility_stderr;
        }
        rows.push(TradeoffRow {
            lambda,
            utility,
            utility_stderr,
            privacy,
            privacy_stderr,
        });
        all.push(runs);
    }
    Ok(SweepResult { rows, runs: all })
}

/// For each type, the row carrying the most mass (ties to the lowest row).
pub fn dominant_action_map(plan: &TransportPlan) -> Vec<usize> {
    let gamma = plan.gamma();
    (0..plan.n_types())
        .map(|k| {
            let mut best = 0;
            for i in 1..plan.n_actions() {
                if gamma[[i, k]] > gamma[[best, k]] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Base values at which bid curves are exported: 81 points on `[0, 4]`.
pub fn value_grid() -> Vec<f64> {
    (0..=80).map(|i| i as f64 * 0.05).collect()
}

/// `(v, beta(v))` on `grid`.
pub fn bid_curve(policy: &BidPolicy, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter().map(|&v| (v, policy.eval(v))).collect()
}

/// Average over `grid` of the range of the dominant policies' bids across
/// types.
pub fn curve_spread(plan: &TransportPlan, grid: &[f64]) -> Result<f64> {
    let map = dominant_action_map(plan);
    let policies = map
        .iter()
        .map(|&i| BidPolicy::from_params(&plan.action_atoms()[i]))
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = grid
        .iter()
        .map(|&v| {
            let bids = policies.iter().map(|p| p.eval(v));
            let hi = bids.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = bids.fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .sum();
    Ok(total / grid.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::{central_differences, max_relative_error};

    #[test]
    fn zero_policy_earns_nothing() {
        assert_eq!(revenue(&BidPolicy::constant(0.0), 0.5, 1000, 1), 0.0);
    }

    #[test]
    fn constant_policy_matches_expectation() {
        let c = 0.3;
        let y = 0.55;
        let n = 1_000_000;
        let values = sample_values(n, 4);
        let r = revenue_on_samples(&BidPolicy::constant(c), y, &values);
        let per_sample: Vec<f64> = values.iter().map(|v| (y * v - c) * c).collect();
        let mean = per_sample.iter().sum::<f64>() / n as f64;
        let var = per_sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((r - c * (y - c)).abs() < 3.0 * se, "{r} vs {}", c * (y - c));
    }

    /// Value from adaptive quadrature of the integrand against the Exp(1)
    /// density (frozen).
    #[test]
    fn linear_policy_matches_quadrature() {
        let policy = BidPolicy::new(vec![1.0], vec![0.0], vec![0.5], 0.1).unwrap();
        let r = revenue(&policy, 0.55, 1_000_000, 9);
        assert!((r - LINEAR_POLICY_REVENUE).abs() < 2e-3, "{r}");
    }

    const LINEAR_POLICY_REVENUE: f64 = 0.18264124449500113;

    #[test]
    fn constant_policy_gradient() {
        let b = 0.2;
        let y = 0.6;
        let g = revenue_grad(&BidPolicy::constant(b), y, 1000, 2);
        let values = sample_values(1000, 2);
        let mean_v = values.iter().sum::<f64>() / 1000.0;
        // d/db [(y v - b) b] = y v - 2b on every sample.
        assert!((g[0] - (y * mean_v - 2.0 * b)).abs() < 1e-12);
    }

    #[test]
    fn zero_output_weights_match_constant_policy() {
        let p = BidPolicy::new(vec![1.0, 0.7], vec![0.1, -0.2], vec![0.0, 0.0], 0.2).unwrap();
        let g = revenue_grad(&p, 0.6, 1000, 2);
        let g0 = revenue_grad(&BidPolicy::constant(0.2), 0.6, 1000, 2);
        assert!((g[6] - g0[0]).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_slope_away_from_kinks() {
        let mut rng = seed::rng(5);
        let p = BidPolicy::random(100, &mut rng);
        let mut checked = 0;
        while checked < 1000 {
            let v: f64 = rng.gen_range(0.0..5.0);
            let h = 1e-7;
            let near_kink = (0..p.width()).any(|j| (p.w[j] * v + p.c[j]).abs() < 2.0 * h * p.w[j]);
            if near_kink {
                continue;
            }
            let fd = (p.eval(v + h) - p.eval(v - h)) / (2.0 * h);
            let d = p.derivative(v);
            assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0));
            checked += 1;
        }
    }

    #[test]
    fn revenue_gradient_matches_finite_differences() {
        let mut rng = seed::rng(17);
        let mut p = BidPolicy::random(8, &mut rng);
        p.b = 0.05;
        let values = sample_values(1000, 3);
        let ad = revenue_grad_on_samples(&p, 0.45, &values);
        let fd = central_differences(
            |x| revenue_on_samples(&BidPolicy::from_params(x).unwrap(), 0.45, &values),
            &p.to_params(),
            1e-7,
        );
        assert!(max_relative_error(&ad, &fd) < 1e-3);
    }

    #[test]
    fn smoothed_indicator_gradient_matches_finite_differences() {
        let mut rng = seed::rng(23);
        let mut p = BidPolicy::random(8, &mut rng);
        p.b = 0.05;
        let values = sample_values(1000, 4);
        let (ga, gb) = (0.3, -0.8);
        let mut ad = vec![0.0; 3 * p.width() + 1];
        coefficients_grad(&p, &values, 0.05, ga, gb, &mut ad);
        let fd = central_differences(
            |x| {
                let (a, b) = coefficients(&BidPolicy::from_params(x).unwrap(), &values, 0.05);
                ga * a + gb * b
            },
            &p.to_params(),
            1e-7,
        );
        assert!(max_relative_error(&ad, &fd) < 1e-3);
    }

    #[test]
    fn zero_width_is_the_exact_indicator() {
        let mut rng = seed::rng(5);
        let p = BidPolicy::random(6, &mut rng);
        let values = sample_values(200, 9);
        assert_eq!(coefficients(&p, &values, 0.0), revenue_coefficients(&p, &values));
        let sharp = coefficients(&p, &values, 1e-9);
        let exact = revenue_coefficients(&p, &values);
        assert!((sharp.0 - exact.0).abs() < 1e-6 && (sharp.1 - exact.1).abs() < 1e-6);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = seed::rng(1);
        let p = BidPolicy::random(4, &mut rng);
        assert_eq!(BidPolicy::from_params(&p.to_params()).unwrap(), p);
        assert!(BidPolicy::from_params(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn model_types_are_midpoints() {
        let m = AuctionModel::new(4).unwrap();
        assert_eq!(m.types(), vec![0.125, 0.375, 0.625, 0.875]);
    }

    fn plan_of(gamma: Array2<f64>, k: usize) -> TransportPlan {
        let model = AuctionModel::new(k).unwrap();
        let atoms = (0..gamma.nrows())
            .map(|i| BidPolicy::constant(0.1 * i as f64).to_params())
            .collect();
        TransportPlan::new(gamma, atoms, model.prior().clone()).unwrap()
    }

    #[test]
    fn evaluation_privacy_examples() {
        let model = AuctionModel::new(2).unwrap();
        let product = plan_of(Array2::from_elem((2, 2), 0.25), 2);
        assert_eq!(evaluate_strategy(&model, &product, 100, 1).unwrap().privacy, 0.0);
        let diag = plan_of(ndarray::array![[0.5, 0.0], [0.0, 0.5]], 2);
        let e = evaluate_strategy(&model, &diag, 100, 1).unwrap();
        assert!((e.privacy - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn evaluation_matches_per_pair_revenues() {
        let model = AuctionModel::new(2).unwrap();
        let plan = plan_of(ndarray::array![[0.3, 0.1], [0.2, 0.4]], 2);
        let e = evaluate_strategy(&model, &plan, 5000, 8).unwrap();
        let types = model.types();
        let mut expected = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                let p = BidPolicy::from_params(&plan.action_atoms()[i]).unwrap();
                expected += plan.gamma()[[i, k]] * revenue(&p, types[k], 5000, 8);
            }
        }
        assert!((e.utility - expected).abs() < 1e-12);
    }

    #[test]
    fn dominant_actions() {
        let diag = plan_of(ndarray::array![[0.5, 0.0], [0.0, 0.5]], 2);
        assert_eq!(dominant_action_map(&diag), vec![0, 1]);
        let product = plan_of(Array2::from_elem((2, 2), 0.25), 2);
        assert_eq!(dominant_action_map(&product), vec![0, 0]);
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-3, 1.0, 12);
        assert_eq!(g.len(), 12);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[11] - 1.0).abs() < 1e-15);
        assert!(log_grid(1.0, 2.0, 0).is_empty());
    }

    #[test]
    fn empty_sweep_is_empty() {
        let model = AuctionModel::new(3).unwrap();
        let config = SweepConfig {
            lambdas: vec![],
            ..SweepConfig::default()
        };
        assert!(sweep_lambda(&model, &config, 1).unwrap().rows.is_empty());
    }

    #[test]
    fn single_type_training_ignores_privacy() {
        let model = AuctionModel::new(1).unwrap();
        let config = TrainConfig {
            steps: 30,
            width: 10,
            train_samples: 200,
            plan_samples: 500,
            ..TrainConfig::default()
        };
        let s = train_strategy(&model, 0.5, &config, 3).unwrap();
        assert_eq!(privacy_cost(&s.plan, &FDivergence::kl()), 0.0);
        assert_eq!(s.trace.len(), 30);
    }
}
