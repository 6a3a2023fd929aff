//! Experiment runners. Each writes its tables under the output directory
//! and finishes with `manifest.json`.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use serde_json::json;

use prp_core::auctions::{
    curve_spread, dominant_action_map, mean_posterior_tv, sweep_lambda, value_grid, AuctionModel, BidPolicy,
    SweepConfig, TrainConfig,
};
use prp_core::dca::{build_dc, dca_solve};
use prp_core::grid::solve_grid;
use prp_core::seed::{self, Purpose};
use prp_core::toy::{generate, pad_trace, run_method, ToySettings};
use prp_core::{DiscreteDistribution, FDivergence, LinearCost, TransportPlan};

use crate::config::{
    ActionSpec, DcaExperiment, ExperimentConfig, GridExperiment, InstanceSpec, SweepExperiment, ToyExperiment,
};
use crate::error::{CliError, Result};
use crate::output::{float, Csv, OutDir};

/// Largest action grid the grid experiment will build.
const MAX_GRID_ACTIONS: usize = 100_000;

/// Runs `config` into `out` and returns the relative paths written.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Vec<String>> {
    config.validate()?;
    let mut dir = OutDir::create(out)?;
    let start = Instant::now();
    let run_seeds = match config {
        ExperimentConfig::Toy(c) => run_toy(c, &mut dir)?,
        ExperimentConfig::Grid(c) => run_grid(c, &mut dir)?,
        ExperimentConfig::Dca(c) => run_dca(c, &mut dir)?,
        ExperimentConfig::Auctions(c) => {
            run_auctions(c.k, &c.lambdas, c.runs, c.eval_samples, &c.train, c.seed, &mut dir)?
        }
        ExperimentConfig::Sweep(c) => run_sweep(c, &mut dir)?,
    };
    let manifest = json!({
        "kind": config.kind(),
        "config": config.to_json(),
        "seed": config.seed(),
        "run_seeds": run_seeds,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "files": dir.written(),
    });
    dir.json("manifest.json", &manifest)?;
    Ok(dir.written().to_vec())
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

fn run_toy(c: &ToyExperiment, dir: &mut OutDir) -> Result<Vec<u64>> {
    let settings = ToySettings {
        scheme: c.scheme.clone(),
        dca: c.dca.clone(),
    };
    let len = c.scheme.steps + 1;
    let mut traces = vec![Vec::with_capacity(c.runs); c.methods.len()];
    let mut finals = Csv::new(&["run", "method", "objective"]);
    let mut seeds = Vec::with_capacity(c.runs);
    for r in 0..c.runs {
        let instance_seed = seed::derive(c.seed, r as u64, Purpose::Instance);
        seeds.push(instance_seed);
        let instance = generate(c.d, c.k, instance_seed)?;
        for (m, &method) in c.methods.iter().enumerate() {
            let out = run_method(&instance, method, c.lambda, &settings, c.seed, r as u64)?;
            let last = *out.trace.last().expect("traces are never empty");
            finals.row(&[r.to_string(), method.label().into(), float(last)]);
            traces[m].push(pad_trace(&out.trace, len));
        }
    }
    let mut bench = Csv::new(&["method", "iteration", "mean_objective", "stderr"]);
    for (m, method) in c.methods.iter().enumerate() {
        for it in 0..len {
            let column: Vec<f64> = traces[m].iter().map(|t| t[it]).collect();
            let (mean, se) = mean_and_stderr(&column);
            bench.row(&[method.label().into(), it.to_string(), float(mean), float(se)]);
        }
    }
    dir.csv("benchmark.csv", &bench)?;
    dir.csv("finals.csv", &finals)?;
    Ok(seeds)
}

/// The prior and cost of run `run`.
fn instance(spec: &InstanceSpec, master: u64, run: usize) -> Result<(DiscreteDistribution, LinearCost, u64)> {
    let bounds = spec.bounds_or_default();
    let instance_seed = seed::derive(master, run as u64, Purpose::Instance);
    let prior = match &spec.prior {
        Some(p) => DiscreteDistribution::new(p.atoms.clone(), p.weights.clone())?,
        None => generate(bounds.len(), spec.k, instance_seed)?.prior,
    };
    Ok((prior, LinearCost::new(bounds), instance_seed))
}

fn grid_points(bounds: &[(f64, f64)], per_axis: usize) -> Result<Vec<Vec<f64>>> {
    let total = (0..bounds.len()).try_fold(1usize, |acc, _| acc.checked_mul(per_axis));
    if total.is_none_or(|t| t > MAX_GRID_ACTIONS) {
        return Err(CliError::Config(format!(
            "{per_axis}^{} grid points exceed the limit of {MAX_GRID_ACTIONS}",
            bounds.len()
        )));
    }
    let axis = |&(a, b): &(f64, f64)| -> Vec<f64> {
        if per_axis == 1 {
            return vec![(a + b) / 2.0];
        }
        (0..per_axis)
            .map(|i| a + (b - a) * i as f64 / (per_axis - 1) as f64)
            .collect()
    };
    let mut points = vec![Vec::new()];
    for b in bounds {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis(b).into_iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Plan as a table: the action coordinates, then one mass column per type.
fn plan_table(plan: &TransportPlan) -> Csv {
    let d = plan.action_atoms().first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=d).map(|l| format!("x_{l}")).collect();
    header.extend((1..=plan.n_types()).map(|k| format!("type_{k}")));
    let mut table = Csv::with_header(header);
    for (i, x) in plan.action_atoms().iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(|&v| float(v)).collect();
        row.extend(plan.gamma().row(i).iter().map(|&g| float(g)));
        table.row(&row);
    }
    table
}

fn run_grid(c: &GridExperiment, dir: &mut OutDir) -> Result<Vec<u64>> {
    let div = FDivergence::from_name(&c.divergence)?;
    let mut results = Csv::new(&["run", "objective", "iterations", "converged"]);
    let mut seeds = Vec::with_capacity(c.runs);
    for r in 0..c.runs {
        let (prior, cost, s) = instance(&c.instance, c.seed, r)?;
        seeds.push(s);
        let actions = match &c.actions {
            ActionSpec::Grid(n) => grid_points(&c.instance.bounds_or_default(), *n)?,
            ActionSpec::List(xs) => xs.clone(),
        };
        let out = solve_grid(&prior, &actions, &cost, &div, c.lambda, &c.solver)?;
        results.row(&[
            r.to_string(),
            float(out.objective),
            out.iterations.to_string(),
            out.converged.to_string(),
        ]);
        dir.csv(&format!("plans/run_{r:03}.csv"), &plan_table(&out.plan))?;
    }
    dir.csv("results.csv", &results)?;
    Ok(seeds)
}

fn run_dca(c: &DcaExperiment, dir: &mut OutDir) -> Result<Vec<u64>> {
    let div = FDivergence::from_name(&c.divergence)?;
    let mut results = Csv::new(&["run", "objective", "dc_constant", "iterations", "converged"]);
    let mut traces = Csv::new(&["run", "iteration", "objective"]);
    let mut seeds = Vec::with_capacity(c.runs);
    for r in 0..c.runs {
        let (prior, cost, s) = instance(&c.instance, c.seed, r)?;
        seeds.push(s);
        let constant = build_dc(&prior, &cost, &div, c.lambda)?.constant();
        let out = dca_solve(
            &prior,
            &cost,
            &div,
            c.lambda,
            &c.solver,
            seed::derive(c.seed, r as u64, Purpose::Init),
        )?;
        let last = *out.trace.last().expect("traces are never empty");
        results.row(&[
            r.to_string(),
            float(last),
            float(constant),
            out.iterations.to_string(),
            out.converged.to_string(),
        ]);
        for (it, v) in out.trace.iter().enumerate() {
            traces.row(&[r.to_string(), it.to_string(), float(*v)]);
        }
        dir.csv(&format!("plans/run_{r:03}.csv"), &plan_table(&out.plan))?;
    }
    dir.csv("results.csv", &results)?;
    dir.csv("traces.csv", &traces)?;
    Ok(seeds)
}

fn run_sweep(c: &SweepExperiment, dir: &mut OutDir) -> Result<Vec<u64>> {
    run_auctions(c.k, &c.lambdas(), c.runs, c.eval_samples, &c.train, c.seed, dir)
}

fn distinct(map: &[usize]) -> usize {
    let mut m = map.to_vec();
    m.sort_unstable();
    m.dedup();
    m.len()
}

fn run_auctions(
    k: usize,
    lambdas: &[f64],
    runs: usize,
    eval_samples: usize,
    train: &TrainConfig,
    master: u64,
    dir: &mut OutDir,
) -> Result<Vec<u64>> {
    let model = AuctionModel::new(k)?;
    let config = SweepConfig {
        lambdas: lambdas.to_vec(),
        runs,
        eval_samples,
        train: train.clone(),
    };
    let result = sweep_lambda(&model, &config, master)?;
    let grid = value_grid();
    let types = model.types();

    let mut tradeoff = Csv::new(&["lambda", "utility", "utility_stderr", "privacy", "privacy_stderr"]);
    for row in &result.rows {
        tradeoff.row(&[
            float(row.lambda),
            float(row.utility),
            float(row.utility_stderr),
            float(row.privacy),
            float(row.privacy_stderr),
        ]);
    }
    dir.csv("tradeoff.csv", &tradeoff)?;

    let mut per_run = Csv::new(&[
        "lambda",
        "run",
        "utility",
        "utility_stderr",
        "privacy",
        "posterior_tv",
        "distinct_actions",
        "curve_spread",
    ]);
    let mut dominant = Csv::new(&["lambda_index", "lambda", "type", "type_value", "row"]);
    for (li, (row, lambda_runs)) in result.rows.iter().zip(&result.runs).enumerate() {
        for (r, run) in lambda_runs.iter().enumerate() {
            let plan = &run.strategy.plan;
            per_run.row(&[
                float(row.lambda),
                r.to_string(),
                float(run.evaluation.utility),
                float(run.evaluation.utility_stderr),
                float(run.evaluation.privacy),
                float(mean_posterior_tv(plan)),
                distinct(&dominant_action_map(plan)).to_string(),
                float(curve_spread(plan, &grid)?),
            ]);
        }
        // Run 0 represents the λ in the maps and curves.
        let plan = &lambda_runs[0].strategy.plan;
        dir.csv(&format!("heatmaps/lambda_{li:02}.csv"), &heatmap(plan.gamma()))?;
        let map = dominant_action_map(plan);
        for (t, &i) in map.iter().enumerate() {
            dominant.row(&[
                li.to_string(),
                float(row.lambda),
                t.to_string(),
                float(types[t]),
                i.to_string(),
            ]);
            let policy = BidPolicy::from_params(&plan.action_atoms()[i])?;
            let mut curve = Csv::new(&["v", "beta"]);
            for (v, b) in prp_core::auctions::bid_curve(&policy, &grid) {
                curve.row(&[float(v), float(b)]);
            }
            dir.csv(&format!("curves/lambda_{li:02}_type_{t:02}.csv"), &curve)?;
        }
    }
    dir.csv("runs.csv", &per_run)?;
    dir.csv("dominant.csv", &dominant)?;
    Ok((0..runs as u64)
        .map(|r| seed::derive(master, r, Purpose::Training))
        .collect())
}

/// The joint law as a matrix: one row per policy, one column per type.
fn heatmap(gamma: &Array2<f64>) -> Csv {
    let header = (1..=gamma.ncols()).map(|k| format!("type_{k}")).collect();
    let mut table = Csv::with_header(header);
    for row in gamma.rows() {
        table.row(&row.iter().map(|&g| float(g)).collect::<Vec<_>>());
    }
    table
}
