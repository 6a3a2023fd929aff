//! The acceptance suite. Prints one line per criterion and exits nonzero
//! when any fails. Criterion numbers given as arguments select a subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;

use common::{entropic_grid_oracle, prp_grid_oracle, Div};
use prp_cli::experiments;
use prp_cli::ExperimentConfig;
use prp_core::auctions::{revenue_grad_on_samples, revenue_on_samples, sample_values, BidPolicy};
use prp_core::dca::{build_dc, dca_solve, random_plan, DcaConfig, DcaInit};
use prp_core::direct::privacy_on_tape;
use prp_core::divergence::perspective_h;
use prp_core::grad::{central_differences, max_relative_error, Tape, Tensor};
use prp_core::grid::{solve_grid, GridConfig};
use prp_core::measures::{cost_matrix, privacy_cost, privacy_cost_perspective, prp_objective};
use prp_core::seed::{self, Purpose};
use prp_core::sinkhorn::{sinkhorn_loss, sinkhorn_loss_grad, solve, SinkhornProblem};
use prp_core::toy::{generate, run_method, ToyMethod, ToySettings};
use prp_core::{DiscreteDistribution, FDivergence, LinearCost, TransportPlan};

struct Outcome {
    pass: bool,
    details: String,
}

impl Outcome {
    fn new(pass: bool, details: impl Into<String>) -> Self {
        Self {
            pass,
            details: details.into(),
        }
    }
}

fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn point(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn oracle_equivalence() -> Outcome {
    let shapes = [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (4, 1)];
    let lambdas = [0.05, 0.3, 1.0, 3.0];
    let (mut worst, mut failures) = (0.0f64, 0);
    let count = 24;
    for i in 0..count {
        let mut rng = seed::rng(9000 + i as u64);
        let (n, k) = shapes[i % shapes.len()];
        let (div, name) = if i % 2 == 0 { (Div::Kl, "kl") } else { (Div::Tv, "tv") };
        let d = 1 + i % 2;
        let types: Vec<Vec<f64>> = (0..k).map(|_| point(&mut rng, d)).collect();
        let actions: Vec<Vec<f64>> = (0..n).map(|_| point(&mut rng, d)).collect();
        let prior = DiscreteDistribution::new(types.clone(), simplex(&mut rng, k)).unwrap();
        let cost = LinearCost::symmetric(d);
        let lambda = lambdas[i % lambdas.len()];
        let oracle = prp_grid_oracle(&cost_matrix(&cost, &actions, &types), prior.weights(), div, lambda);
        let div = FDivergence::from_name(name).unwrap();
        let got = solve_grid(&prior, &actions, &cost, &div, lambda, &GridConfig::default()).unwrap();
        let err = (got.objective - oracle).abs();
        worst = worst.max(err);
        failures += usize::from(err > 1e-3);
    }
    Outcome::new(
        failures == 0,
        format!("{count} instances, max |solver - oracle| {worst:.2e}, {failures} above 1e-3"),
    )
}

fn sinkhorn_correctness() -> Outcome {
    let mut rng = seed::rng(9100);
    let (mut worst_loss, mut worst_marginal) = (0.0f64, 0.0f64);
    let count = 24;
    for case in 0..count {
        let n = 1 + rng.gen_range(1..3);
        let m = 1 + rng.gen_range(1..3);
        let lambda = [0.1, 1.0, 10.0][case % 3];
        let alpha = simplex(&mut rng, n);
        let beta = simplex(&mut rng, m);
        let cost = Array2::from_shape_fn((n, m), |_| rng.gen_range(-1.0..1.0));
        let problem = SinkhornProblem::new(alpha.clone(), beta.clone(), cost.clone(), lambda).unwrap();
        let result = solve(&problem).unwrap();
        let oracle = entropic_grid_oracle(&cost, &alpha, &beta, lambda);
        worst_loss = worst_loss.max((sinkhorn_loss(&problem, &result) - oracle).abs());
        let rows = result
            .plan
            .rows()
            .into_iter()
            .zip(&alpha)
            .map(|(r, a)| (r.sum() - a).abs());
        let cols = result
            .plan
            .columns()
            .into_iter()
            .zip(&beta)
            .map(|(c, b)| (c.sum() - b).abs());
        worst_marginal = rows.chain(cols).fold(worst_marginal, f64::max);
    }
    Outcome::new(
        worst_loss < 1e-4 && worst_marginal < 1e-8,
        format!("{count} instances, max loss error {worst_loss:.2e}, max marginal error {worst_marginal:.2e}"),
    )
}

fn sinkhorn_gradient_error(rng: &mut impl Rng) -> f64 {
    let (n, k, d) = (rng.gen_range(2..5), rng.gen_range(2..4), rng.gen_range(1..3));
    let atoms: Vec<Vec<f64>> = (0..k).map(|_| point(rng, d)).collect();
    let prior = DiscreteDistribution::new(atoms, simplex(rng, k)).unwrap();
    let cost = LinearCost::symmetric(d);
    let alpha = simplex(rng, n);
    let x: Vec<Vec<f64>> = (0..n).map(|_| point(rng, d)).collect();
    let lambda = rng.gen_range(0.3..2.0);
    let g = sinkhorn_loss_grad(&alpha, &x, &prior, &cost, lambda, 50).unwrap();
    let mut at = alpha.clone();
    at.extend(x.iter().flatten());
    let loss = |p: &[f64]| {
        let xs: Vec<Vec<f64>> = p[n..].chunks(d).map(|c| c.to_vec()).collect();
        sinkhorn_loss_grad(&p[..n], &xs, &prior, &cost, lambda, 50)
            .unwrap()
            .loss
    };
    let mut ad = g.grad_alpha;
    ad.extend(g.grad_x.iter().flatten());
    max_relative_error(&ad, &central_differences(loss, &at, 1e-6))
}

fn plan_gradient_error(rng: &mut impl Rng, div: &FDivergence) -> f64 {
    let (n, k) = (rng.gen_range(2..5), rng.gen_range(2..5));
    let prior = DiscreteDistribution::new(vec![vec![0.0]; k], simplex(rng, k)).unwrap();
    let cost = Array2::from_shape_fn((n, k), |_| rng.gen_range(-1.0..1.0));
    let gamma = Array2::from_shape_fn((n, k), |_| rng.gen_range(0.05..0.3));
    let lambda = rng.gen_range(0.1..3.0);
    let mut tape = Tape::new();
    let g = tape.leaf(Tensor::from_array(&gamma));
    let c = tape.constant(Tensor::from_array(&cost));
    let linear = tape.mul(g, c);
    let linear = tape.sum(linear);
    let privacy = privacy_on_tape(&mut tape, div, g, prior.weights()).unwrap();
    let privacy = tape.scale(privacy, lambda);
    let total = tape.add(linear, privacy);
    let ad = tape.backward(total).unwrap().wrt(&tape, g).into_data();
    let objective = |p: &[f64]| {
        let gm = Array2::from_shape_vec((n, k), p.to_vec()).unwrap();
        let linear: f64 = gm.iter().zip(cost.iter()).map(|(a, b)| a * b).sum();
        let plan = TransportPlan::from_parts_unchecked(gm, vec![vec![0.0]; n], prior.clone()).unwrap();
        linear + lambda * privacy_cost(&plan, div)
    };
    max_relative_error(&ad, &central_differences(objective, gamma.as_slice().unwrap(), 1e-6))
}

/// Revenue gradient on samples kept away from the kinks of the revenue.
fn revenue_gradient_error(seed_value: u64) -> f64 {
    let mut rng = seed::rng(seed_value);
    let width = 10;
    let policy = BidPolicy::new(
        (0..width).map(|_| rng.gen_range(0.5..1.5)).collect(),
        (0..width).map(|_| rng.gen_range(-1.0..0.5)).collect(),
        (0..width).map(|_| rng.gen_range(0.02..0.15)).collect(),
        0.05,
    )
    .unwrap();
    let margin = 1e-3;
    let values: Vec<f64> = sample_values(500, seed_value)
        .into_iter()
        .filter(|&v| {
            let (beta, slope) = policy.eval_with_derivative(v);
            (0..width).all(|j| (policy.w[j] * v + policy.c[j]).abs() > margin)
                && beta.abs() > margin
                && (beta - 1.0).abs() > margin
                && (beta - slope).abs() > margin
        })
        .collect();
    let y = rng.gen_range(0.05..0.95);
    let ad = revenue_grad_on_samples(&policy, y, &values);
    let f = |p: &[f64]| revenue_on_samples(&BidPolicy::from_params(p).unwrap(), y, &values);
    max_relative_error(&ad, &central_differences(f, &policy.to_params(), 1e-7))
}

fn gradient_suite() -> Outcome {
    let mut rng = seed::rng(9200);
    let a = (0..20).map(|_| sinkhorn_gradient_error(&mut rng)).fold(0.0, f64::max);
    let divs = ["kl", "reverse_kl", "alpha:2"].map(|n| FDivergence::from_name(n).unwrap());
    let b = (0..30)
        .map(|i| plan_gradient_error(&mut rng, &divs[i % 3]))
        .fold(0.0, f64::max);
    let c = (0..20).map(|s| revenue_gradient_error(9300 + s)).fold(0.0, f64::max);
    Outcome::new(
        a < 1e-4 && b < 1e-4 && c < 1e-3,
        format!("max relative error: sinkhorn {a:.2e}, plan objective {b:.2e}, revenue {c:.2e}"),
    )
}

fn convexity_suite() -> Outcome {
    let mut rng = seed::rng(9400);
    let divs = ["kl", "reverse_kl", "tv", "alpha:2"].map(|n| FDivergence::from_name(n).unwrap());
    let mut convexity_failures = 0;
    for trial in 0..1000 {
        let (n, k, d) = (rng.gen_range(1..6), rng.gen_range(1..5), rng.gen_range(1..4));
        let types: Vec<Vec<f64>> = (0..k).map(|_| point(&mut rng, d)).collect();
        let prior = DiscreteDistribution::new(types, simplex(&mut rng, k)).unwrap();
        let atoms: Vec<Vec<f64>> = (0..n).map(|_| point(&mut rng, d)).collect();
        let cost = LinearCost::symmetric(d);
        let div = &divs[trial % divs.len()];
        let lambda = rng.gen_range(0.0..5.0);
        let (g1, g2) = (
            random_plan(prior.weights(), n, rng.gen()),
            random_plan(prior.weights(), n, rng.gen()),
        );
        let t: f64 = rng.gen();
        let mix = &g1 * t + &g2 * (1.0 - t);
        let value = |g| {
            prp_objective(
                &TransportPlan::new(g, atoms.clone(), prior.clone()).unwrap(),
                &cost,
                div,
                lambda,
            )
        };
        let (j1, j2, jm) = (value(g1), value(g2), value(mix));
        convexity_failures += usize::from(jm > t * j1 + (1.0 - t) * j2 + 1e-9);
    }
    let (mut sub, mut homo, mut ident) = (0, 0, 0);
    for trial in 0..1000 {
        let div = &divs[trial % divs.len()];
        let k = rng.gen_range(1..6);
        let prior = simplex(&mut rng, k);
        let r: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sum: Vec<f64> = r.iter().zip(&s).map(|(a, b)| a + b).collect();
        let t = rng.gen_range(0.0..10.0);
        let scaled: Vec<f64> = r.iter().map(|v| t * v).collect();
        for idx in 0..k {
            let h = |row: &[f64]| perspective_h(div, row, &prior, idx);
            sub += usize::from(h(&sum) > h(&r) + h(&s) + 1e-9);
            homo += usize::from((h(&scaled) - t * h(&r)).abs() > 1e-9 * (1.0 + t * h(&r).abs()));
        }
        // The row joins a random plan whose other rows absorb the rest of
        // each column.
        let n = rng.gen_range(1..4);
        let scale = prior.iter().zip(&r).map(|(p, v)| p / v).fold(f64::INFINITY, f64::min) * rng.gen_range(0.0..1.0);
        let row: Vec<f64> = r.iter().map(|v| v * scale).collect();
        let rest: Vec<f64> = prior.iter().zip(&row).map(|(p, v)| p - v).collect();
        let mut gamma = Array2::zeros((n + 1, k));
        gamma.row_mut(0).assign(&ndarray::Array1::from(row));
        let tail = random_plan(&rest, n, rng.gen());
        gamma.slice_mut(ndarray::s![1.., ..]).assign(&tail);
        let types = vec![vec![0.0]; k];
        let plan = TransportPlan::new(
            gamma,
            vec![vec![0.0]; n + 1],
            DiscreteDistribution::new(types, prior).unwrap(),
        );
        let Ok(plan) = plan else {
            ident += 1;
            continue;
        };
        let (a, b) = (privacy_cost(&plan, div), privacy_cost_perspective(&plan, div));
        let agree = a == b || (a - b).abs() <= 1e-9 * (1.0 + a.abs());
        ident += usize::from(!agree);
    }
    Outcome::new(
        convexity_failures + sub + homo + ident == 0,
        format!(
            "failures: convexity {convexity_failures}/1000, subadditivity {sub}, homogeneity {homo}, identity {ident}/1000"
        ),
    )
}

fn dca_suite() -> Outcome {
    let (mut trace_worst, mut vertex_failures, mut dc_worst, mut constant_worst) = (0.0f64, 0, 0.0f64, 0.0f64);
    for i in 0..50u64 {
        let mut rng = seed::rng(9500 + i);
        let d = 1 + (i as usize % 6);
        let k = rng.gen_range(2..5);
        let bounds: Vec<(f64, f64)> = (0..d)
            .map(|_| {
                let a = rng.gen_range(-2.0..1.0);
                (a, a + rng.gen_range(0.5..2.0))
            })
            .collect();
        let types: Vec<Vec<f64>> = (0..k).map(|_| point(&mut rng, d)).collect();
        let prior = DiscreteDistribution::new(types, simplex(&mut rng, k)).unwrap();
        let cost = LinearCost::new(bounds.clone());
        let div = FDivergence::from_name(if i % 2 == 0 { "kl" } else { "tv" }).unwrap();
        let lambda = 10f64.powf(rng.gen_range(-2.0..1.0));
        let config = DcaConfig {
            init: if i % 3 == 0 {
                DcaInit::Revealing
            } else {
                DcaInit::Random
            },
            ..DcaConfig::default()
        };
        let result = dca_solve(&prior, &cost, &div, lambda, &config, i).unwrap();
        for w in result.trace.windows(2) {
            trace_worst = trace_worst.max(w[1] - w[0]);
        }
        let plan = &result.plan;
        for (row, x) in plan.gamma().rows().into_iter().zip(plan.action_atoms()) {
            let row_cost = |v: &[f64]| -> f64 {
                row.iter()
                    .zip(prior.atoms())
                    .map(|(g, y)| g * v.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
                    .sum()
            };
            let own = row_cost(x);
            vertex_failures += common::vertices(&bounds)
                .iter()
                .filter(|v| own > row_cost(v) + 1e-12)
                .count();
        }
        let dc = build_dc(&prior, &cost, &div, lambda).unwrap();
        let constant: f64 = prior
            .atoms()
            .iter()
            .zip(prior.weights())
            .map(|(y, w)| w * bounds.iter().zip(y).map(|((a, b), v)| (a + b) / 2.0 * v).sum::<f64>())
            .sum();
        constant_worst = constant_worst.max((dc.constant() - constant).abs());
        dc_worst = dc_worst.max((dc.dc_objective(plan.gamma()) - prp_objective(plan, &cost, &div, lambda)).abs());
    }
    Outcome::new(
        trace_worst <= 1e-10 && vertex_failures == 0 && dc_worst <= 1e-9 && constant_worst <= 1e-9,
        format!(
            "50 instances, largest trace increase {trace_worst:.2e}, {vertex_failures} vertex violations, \
             dc identity error {dc_worst:.2e}, constant error {constant_worst:.2e}"
        ),
    )
}

const TOY_MASTER: u64 = 7;

/// Final objective per method and run.
fn toy_finals(lambda: f64) -> HashMap<ToyMethod, Vec<f64>> {
    let settings = ToySettings::default();
    let mut finals: HashMap<ToyMethod, Vec<f64>> = HashMap::new();
    for r in 0..20u64 {
        let instance = generate(2, 3, seed::derive(TOY_MASTER, r, Purpose::Instance)).unwrap();
        for method in ToyMethod::ALL {
            let run = run_method(&instance, method, lambda, &settings, TOY_MASTER, r).unwrap();
            finals.entry(method).or_default().push(*run.trace.last().unwrap());
        }
    }
    finals
}

/// Whether `a` is at most `b` on the mean, and the per-run win count.
fn ordering(a: &[f64], b: &[f64]) -> (bool, usize) {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    (mean(a) <= mean(b), a.iter().zip(b).filter(|(x, y)| x <= y).count())
}

fn toy_benchmark() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let sink = [ToyMethod::SinkAdam, ToyMethod::SinkRms];
    let prp = [ToyMethod::PrpAdam, ToyMethod::PrpRms];
    for lambda in [0.1, 1.0] {
        let finals = toy_finals(lambda);
        let dca = &finals[&ToyMethod::Dca];
        let wins: Vec<String> = sink
            .iter()
            .chain(&prp)
            .map(|m| {
                let (mean_ok, w) = ordering(dca, &finals[m]);
                pass &= mean_ok && w >= 15;
                format!("{} {w}", m.label())
            })
            .collect();
        notes.push(format!("lambda {lambda}: dca wins [{}]", wins.join(", ")));
        if lambda == 1.0 {
            let mut pairs = Vec::new();
            for s in sink {
                for p in prp {
                    let (mean_ok, w) = ordering(&finals[&s], &finals[&p]);
                    pass &= mean_ok && w >= 15;
                    pairs.push(format!("{}<{} {w}", s.label(), p.label()));
                }
            }
            notes.push(format!("sink vs prp [{}]", pairs.join(", ")));
        }
    }
    Outcome::new(pass, format!("20 runs each; {}", notes.join("; ")))
}

fn read_table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

const SWEEP_POINTS: usize = 12;

fn run_sweep(out: &Path) {
    let config = ExperimentConfig::from_json(&format!(
        r#"{{"kind": "sweep", "seed": 2024, "runs": 3, "k": 10, "lambda_min": 1e-3, "lambda_max": 1.0,
            "points": {SWEEP_POINTS}, "eval_samples": 100000, "train": {{"steps": 1000}}}}"#
    ))
    .unwrap();
    experiments::run(&config, out).unwrap();
}

fn tradeoff_curve(out: &Path) -> Outcome {
    let rows = read_table(&out.join("tradeoff.csv"));
    let series = |key: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .map(|r| (num(r, key), num(r, &format!("{key}_stderr"))))
            .collect()
    };
    let monotone = |s: &[(f64, f64)]| -> (bool, f64) {
        // Largest increase between neighbours in units of the allowance.
        let worst = s
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) / (2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt()).max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max);
        (worst <= 1.0, worst)
    };
    let (utility, privacy) = (series("utility"), series("privacy"));
    let (u_ok, u_worst) = monotone(&utility);
    let (p_ok, p_worst) = monotone(&privacy);
    let (p_first, p_last) = (privacy[0].0, privacy[privacy.len() - 1].0);
    let (u_first, u_last) = (utility[0].0, utility[utility.len() - 1].0);
    let drop = (u_first - u_last) / u_first;
    let ratio_ok = p_first >= 10.0 * p_last;
    Outcome::new(
        u_ok && p_ok && ratio_ok && drop >= 0.04,
        format!(
            "utility {u_first:.5} -> {u_last:.5} (drop {:.1}%), privacy {p_first:.4} -> {p_last:.2e}, \
             worst neighbour increase / 2 SE: utility {u_worst:.2}, privacy {p_worst:.2}",
            100.0 * drop
        ),
    )
}

fn dominant_actions(out: &Path) -> Outcome {
    let rows: Vec<_> = read_table(&out.join("runs.csv"))
        .into_iter()
        .filter(|r| r["run"] == "0")
        .collect();
    let distinct = |i: usize| num(&rows[i], "distinct_actions") as usize;
    let (first, last) = (distinct(0), distinct(rows.len() - 1));
    let picks = [0, SWEEP_POINTS / 2, SWEEP_POINTS - 1];
    let spreads: Vec<f64> = picks.iter().map(|&i| num(&rows[i], "curve_spread")).collect();
    let shrinking = spreads.windows(2).all(|w| w[1] < w[0]);
    let lambdas: Vec<String> = picks
        .iter()
        .map(|&i| format!("{:.3e}", num(&rows[i], "lambda")))
        .collect();
    Outcome::new(
        first >= 7 && last <= 2 && shrinking,
        format!(
            "distinct dominant actions {first} at lambda {} and {last} at lambda {}, bid-curve spread {:?} at lambda {:?}",
            lambdas[0],
            lambdas[2],
            spreads.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>(),
            lambdas
        ),
    )
}

fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.insert(
                    path.strip_prefix(root).unwrap().display().to_string(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn determinism() -> Outcome {
    let train = r#"{"steps": 20, "width": 8, "train_samples": 200, "plan_samples": 500, "unroll_iters": 50}"#;
    let configs = [
        r#"{"kind": "toy", "runs": 3, "scheme": {"steps": 50}}"#.to_string(),
        r#"{"kind": "grid", "runs": 2, "actions": {"grid": 4}}"#.to_string(),
        r#"{"kind": "dca", "runs": 3, "solver": {"init": "random"}}"#.to_string(),
        format!(r#"{{"kind": "auctions", "k": 4, "lambdas": [0.01, 1.0], "eval_samples": 5000, "train": {train}}}"#),
        format!(r#"{{"kind": "sweep", "k": 4, "runs": 2, "points": 3, "eval_samples": 5000, "train": {train}}}"#),
    ];
    let mut same = Vec::new();
    let mut pass = true;
    for text in configs {
        let config = ExperimentConfig::from_json(&text).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        experiments::run(&config, a.path()).unwrap();
        let again = ExperimentConfig::load(&a.path().join("manifest.json")).unwrap();
        experiments::run(&again, b.path()).unwrap();
        let (first, second) = (csvs(a.path()), csvs(b.path()));
        let ok = !first.is_empty() && first == second;
        pass &= ok;
        same.push(format!(
            "{} {} files {}",
            config.kind(),
            first.len(),
            if ok { "identical" } else { "differ" }
        ));
    }
    Outcome::new(pass, same.join(", "))
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| selected.is_empty() || selected.contains(&n);
    let sweep_dir = tempfile::tempdir().unwrap();
    let mut sweep_done = false;
    let mut ensure_sweep = |dir: &Path| {
        if !sweep_done {
            run_sweep(dir);
            sweep_done = true;
        }
    };
    let mut failed = 0;
    for n in 1..=9 {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let (name, outcome) = match n {
            1 => ("grid solver against exhaustive search", oracle_equivalence()),
            2 => ("sinkhorn against coupling search", sinkhorn_correctness()),
            3 => ("gradients against finite differences", gradient_suite()),
            4 => ("convexity and perspective properties", convexity_suite()),
            5 => ("difference-of-convex scheme", dca_suite()),
            6 => ("linear-cost benchmark ordering", toy_benchmark()),
            7 => {
                ensure_sweep(sweep_dir.path());
                ("auction trade-off curve", tradeoff_curve(sweep_dir.path()))
            }
            8 => {
                ensure_sweep(sweep_dir.path());
                ("dominant actions and bid curves", dominant_actions(sweep_dir.path()))
            }
            _ => ("reruns from manifests", determinism()),
        };
        failed += usize::from(!outcome.pass);
        println!(
            "criterion {n} ({name}): {}, {} [{:.1}s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.details,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
