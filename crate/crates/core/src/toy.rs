//! Random linear-cost instances and the methods compared on them.
//!
//! An instance has `K` types `y_k` drawn uniformly in `[-1, 1]^d` and
//! rescaled to unit l1 norm, a prior `p0_k` proportional to `exp(Z_k)` with
//! `Z_k` uniform on `[0, 1]`, and the cost `<x, y>` on `[-1, 1]^d`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dca::{dca_solve, DcaConfig};
use crate::direct::minimize_direct;
use crate::divergence::FDivergence;
use crate::error::Result;
use crate::grad::Method;
use crate::measures::{DiscreteDistribution, LinearCost, TransportPlan};
use crate::scheme::SchemeConfig;
use crate::seed::{self, Purpose};
use crate::sinkhorn::minimize_sinkhorn;

#[derive(Debug, Clone)]
pub struct ToyInstance {
    pub prior: DiscreteDistribution,
    pub cost: LinearCost,
}

pub fn generate(d: usize, k: usize, seed: u64) -> Result<ToyInstance> {
    let mut rng = seed::rng(seed);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen::<f64>().exp()).collect();
    let atoms: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let norm: f64 = y.iter().map(|v| v.abs()).sum();
            y.iter().map(|v| v / norm).collect()
        })
        .collect();
    Ok(ToyInstance {
        prior: DiscreteDistribution::new(atoms, weights)?,
        cost: LinearCost::symmetric(d),
    })
}

/// Methods of the linear-cost benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToyMethod {
    #[serde(rename = "dca")]
    Dca,
    #[serde(rename = "sink-adam")]
    SinkAdam,
    #[serde(rename = "sink-rms")]
    SinkRms,
    #[serde(rename = "prp-adam")]
    PrpAdam,
    #[serde(rename = "prp-rms")]
    PrpRms,
}

impl ToyMethod {
    pub const ALL: [ToyMethod; 5] = [
        ToyMethod::Dca,
        ToyMethod::SinkAdam,
        ToyMethod::SinkRms,
        ToyMethod::PrpAdam,
        ToyMethod::PrpRms,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ToyMethod::Dca => "dca",
            ToyMethod::SinkAdam => "sink-adam",
            ToyMethod::SinkRms => "sink-rms",
            ToyMethod::PrpAdam => "prp-adam",
            ToyMethod::PrpRms => "prp-rms",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == name)
    }
}

/// Settings of one benchmark method run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToySettings {
    pub scheme: SchemeConfig,
    pub dca: DcaConfig,
}

impl Default for ToySettings {
    fn default() -> Self {
        Self {
            scheme: SchemeConfig::default(),
            dca: DcaConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ToyRun {
    pub plan: TransportPlan,
    /// KL objective per iteration, starting at the initial point.
    pub trace: Vec<f64>,
}

/// Runs `method` on `instance` with the KL privacy cost. Run `run` of a
/// benchmark seeded by `master` uses the same initial atoms for every
/// gradient method.
pub fn run_method(
    instance: &ToyInstance,
    method: ToyMethod,
    lambda: f64,
    settings: &ToySettings,
    master: u64,
    run: u64,
) -> Result<ToyRun> {
    let kl = FDivergence::kl();
    let init_seed = seed::derive(master, run, Purpose::Init);
    let with = |m: Method| SchemeConfig {
        method: m,
        ..settings.scheme.clone()
    };
    let (plan, trace) = match method {
        ToyMethod::Dca => {
            let r = dca_solve(&instance.prior, &instance.cost, &kl, lambda, &settings.dca, init_seed)?;
            (r.plan, r.trace)
        }
        ToyMethod::SinkAdam | ToyMethod::SinkRms => {
            let m = if method == ToyMethod::SinkAdam {
                Method::Adam
            } else {
                Method::Rmsprop
            };
            let r = minimize_sinkhorn(&instance.prior, &instance.cost, lambda, &with(m), init_seed)?;
            (r.plan, r.trace)
        }
        ToyMethod::PrpAdam | ToyMethod::PrpRms => {
            let m = if method == ToyMethod::PrpAdam {
                Method::Adam
            } else {
                Method::Rmsprop
            };
            let r = minimize_direct(&instance.prior, &instance.cost, &kl, lambda, &with(m), init_seed)?;
            (r.plan, r.trace)
        }
    };
    Ok(ToyRun { plan, trace })
}

/// Extends `trace` to `len` entries by repeating its last value.
pub fn pad_trace(trace: &[f64], len: usize) -> Vec<f64> {
    let last = *trace.last().expect("traces are never empty");
    let mut out: Vec<f64> = trace.iter().copied().take(len).collect();
    out.resize(len, last);
    out
}
