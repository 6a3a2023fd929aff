//! Experiment configuration: one JSON document with a `kind` discriminator.
//!
//! A run manifest embeds the resolved config under `"config"`, so a
//! manifest is accepted wherever a config is.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use prp_core::auctions::TrainConfig;
use prp_core::dca::DcaConfig;
use prp_core::grid::GridConfig;
use prp_core::scheme::SchemeConfig;
use prp_core::toy::ToyMethod;
use prp_core::FDivergence;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExperimentConfig {
    Toy(ToyExperiment),
    Grid(GridExperiment),
    Dca(DcaExperiment),
    Auctions(AuctionsExperiment),
    Sweep(SweepExperiment),
}

/// The linear-cost benchmark with the KL privacy cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyExperiment {
    pub seed: u64,
    pub runs: usize,
    pub out: Option<PathBuf>,
    pub d: usize,
    pub k: usize,
    pub lambda: f64,
    pub methods: Vec<ToyMethod>,
    pub scheme: SchemeConfig,
    pub dca: DcaConfig,
}

impl Default for ToyExperiment {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 20,
            out: None,
            d: 2,
            k: 3,
            lambda: 0.1,
            methods: ToyMethod::ALL.to_vec(),
            scheme: SchemeConfig::default(),
            dca: DcaConfig::default(),
        }
    }
}

/// An explicit discrete prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Instance of a linear cost `<x, y>` on a box. Without an explicit prior,
/// each run draws a benchmark instance of size `(d, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceSpec {
    pub d: usize,
    pub k: usize,
    pub prior: Option<PriorSpec>,
    /// Per-coordinate `(a, b)`; `[-1, 1]^d` when absent.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            d: 2,
            k: 3,
            prior: None,
            bounds: None,
        }
    }
}

impl InstanceSpec {
    pub fn dim(&self) -> usize {
        match (&self.bounds, &self.prior) {
            (Some(b), _) => b.len(),
            (None, Some(p)) => p.atoms.first().map_or(0, Vec::len),
            (None, None) => self.d,
        }
    }

    pub fn bounds_or_default(&self) -> Vec<(f64, f64)> {
        self.bounds.clone().unwrap_or_else(|| vec![(-1.0, 1.0); self.dim()])
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(config("the action space needs at least one dimension"));
        }
        match &self.prior {
            Some(p) => {
                if p.atoms.is_empty() || p.atoms.len() != p.weights.len() {
                    return Err(config("prior atoms and weights must be nonempty and of equal length"));
                }
                if p.atoms.iter().any(|y| y.len() != d) {
                    return Err(config(format!("every prior atom must have dimension {d}")));
                }
            }
            None if self.k == 0 => return Err(config("k must be positive")),
            None => {}
        }
        for (l, &(a, b)) in self.bounds_or_default().iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(config(format!("bounds[{l}] = ({a}, {b}) is not an interval")));
            }
        }
        Ok(())
    }
}

/// Candidate actions of the grid solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSpec {
    /// A regular grid with this many points per axis, endpoints included.
    Grid(usize),
    List(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridExperiment {
    pub seed: u64,
    pub runs: usize,
    pub out: Option<PathBuf>,
    pub instance: InstanceSpec,
    pub actions: ActionSpec,
    pub divergence: String,
    pub lambda: f64,
    pub solver: GridConfig,
}

impl Default for GridExperiment {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1,
            out: None,
            instance: InstanceSpec::default(),
            actions: ActionSpec::Grid(5),
            divergence: "kl".into(),
            lambda: 0.1,
            solver: GridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcaExperiment {
    pub seed: u64,
    pub runs: usize,
    pub out: Option<PathBuf>,
    pub instance: InstanceSpec,
    pub divergence: String,
    pub lambda: f64,
    pub solver: DcaConfig,
}

impl Default for DcaExperiment {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1,
            out: None,
            instance: InstanceSpec::default(),
            divergence: "kl".into(),
            lambda: 0.1,
            solver: DcaConfig::default(),
        }
    }
}

/// Auction strategies trained at the listed `lambdas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuctionsExperiment {
    pub seed: u64,
    pub runs: usize,
    pub out: Option<PathBuf>,
    pub k: usize,
    pub lambdas: Vec<f64>,
    pub eval_samples: usize,
    pub train: TrainConfig,
}

impl Default for AuctionsExperiment {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 1,
            out: None,
            k: prp_core::auctions::DEFAULT_TYPES,
            lambdas: vec![0.01],
            eval_samples: 1_000_000,
            train: TrainConfig::default(),
        }
    }
}

/// Auction strategies over `points` log-spaced values in
/// `[lambda_min, lambda_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepExperiment {
    pub seed: u64,
    pub runs: usize,
    pub out: Option<PathBuf>,
    pub k: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    pub eval_samples: usize,
    pub train: TrainConfig,
}

impl Default for SweepExperiment {
    fn default() -> Self {
        Self {
            seed: 0,
            runs: 5,
            out: None,
            k: prp_core::auctions::DEFAULT_TYPES,
            lambda_min: 1e-3,
            lambda_max: 1.0,
            points: 12,
            eval_samples: 1_000_000,
            train: TrainConfig::default(),
        }
    }
}

impl SweepExperiment {
    pub fn lambdas(&self) -> Vec<f64> {
        prp_core::auctions::log_grid(self.lambda_min, self.lambda_max, self.points)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub runs: Option<usize>,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_lambda(lambda: f64, positive: bool) -> Result<()> {
    let ok = lambda.is_finite() && if positive { lambda > 0.0 } else { lambda >= 0.0 };
    if ok {
        Ok(())
    } else {
        let bound = if positive { "positive" } else { "nonnegative" };
        Err(config(format!("lambda must be finite and {bound}, got {lambda}")))
    }
}

fn check_divergence(name: &str) -> Result<()> {
    FDivergence::from_name(name)
        .map(|_| ())
        .map_err(|e| config(e.to_string()))
}

fn check_train(train: &TrainConfig, eval_samples: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(config("k must be positive"));
    }
    if eval_samples == 0 || train.train_samples == 0 || train.plan_samples == 0 {
        return Err(config("sample counts must be positive"));
    }
    if train.n_atoms == Some(0) {
        return Err(config("n_atoms must be positive"));
    }
    if !(train.indicator_width >= 0.0 && train.indicator_width.is_finite()) {
        return Err(config("indicator_width must be finite and nonnegative"));
    }
    if !(train.lr_weights > 0.0 && train.lr_policy > 0.0) {
        return Err(config("learning rates must be positive"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Toy(_) => "toy",
            ExperimentConfig::Grid(_) => "grid",
            ExperimentConfig::Dca(_) => "dca",
            ExperimentConfig::Auctions(_) => "auctions",
            ExperimentConfig::Sweep(_) => "sweep",
        }
    }

    /// Parses a config or a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| config(e.to_string()))?;
        let value = match value.get("config") {
            Some(inner) if inner.is_object() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configs serialize")
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Toy(c) => c.seed,
            ExperimentConfig::Grid(c) => c.seed,
            ExperimentConfig::Dca(c) => c.seed,
            ExperimentConfig::Auctions(c) => c.seed,
            ExperimentConfig::Sweep(c) => c.seed,
        }
    }

    pub fn runs(&self) -> usize {
        match self {
            ExperimentConfig::Toy(c) => c.runs,
            ExperimentConfig::Grid(c) => c.runs,
            ExperimentConfig::Dca(c) => c.runs,
            ExperimentConfig::Auctions(c) => c.runs,
            ExperimentConfig::Sweep(c) => c.runs,
        }
    }

    pub fn out(&self) -> Option<&Path> {
        match self {
            ExperimentConfig::Toy(c) => c.out.as_deref(),
            ExperimentConfig::Grid(c) => c.out.as_deref(),
            ExperimentConfig::Dca(c) => c.out.as_deref(),
            ExperimentConfig::Auctions(c) => c.out.as_deref(),
            ExperimentConfig::Sweep(c) => c.out.as_deref(),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($c:expr) => {{
                if let Some(s) = o.seed {
                    $c.seed = s;
                }
                if let Some(r) = o.runs {
                    $c.runs = r;
                }
                if let Some(p) = &o.out {
                    $c.out = Some(p.clone());
                }
            }};
        }
        match self {
            ExperimentConfig::Toy(c) => set!(c),
            ExperimentConfig::Grid(c) => set!(c),
            ExperimentConfig::Dca(c) => set!(c),
            ExperimentConfig::Auctions(c) => set!(c),
            ExperimentConfig::Sweep(c) => set!(c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs() == 0 {
            return Err(config("runs must be positive"));
        }
        match self {
            ExperimentConfig::Toy(c) => {
                if c.d == 0 || c.k == 0 {
                    return Err(config("d and k must be positive"));
                }
                if c.methods.is_empty() {
                    return Err(config("at least one method is needed"));
                }
                if c.scheme.steps == 0 {
                    return Err(config("scheme.steps must be positive"));
                }
                check_lambda(c.lambda, false)
            }
            ExperimentConfig::Grid(c) => {
                c.instance.validate()?;
                match &c.actions {
                    ActionSpec::Grid(0) => return Err(config("actions.grid must be positive")),
                    ActionSpec::List(xs) if xs.is_empty() => return Err(config("actions.list is empty")),
                    ActionSpec::List(xs) if xs.iter().any(|x| x.len() != c.instance.dim()) => {
                        return Err(config("every action must match the instance dimension"))
                    }
                    _ => {}
                }
                check_divergence(&c.divergence)?;
                check_lambda(c.lambda, false)
            }
            ExperimentConfig::Dca(c) => {
                c.instance.validate()?;
                if c.instance.bounds_or_default().iter().any(|(a, b)| a == b) {
                    return Err(config(
                        "the difference-of-convex scheme needs a box with a < b in every coordinate",
                    ));
                }
                if c.solver.n_actions == Some(0) {
                    return Err(config("solver.n_actions must be positive"));
                }
                check_divergence(&c.divergence)?;
                check_lambda(c.lambda, false)
            }
            ExperimentConfig::Auctions(c) => {
                check_train(&c.train, c.eval_samples, c.k)?;
                c.lambdas.iter().try_for_each(|&l| check_lambda(l, true))
            }
            ExperimentConfig::Sweep(c) => {
                check_train(&c.train, c.eval_samples, c.k)?;
                check_lambda(c.lambda_min, true)?;
                check_lambda(c.lambda_max, true)?;
                if c.lambda_min > c.lambda_max {
                    return Err(config("lambda_min exceeds lambda_max"));
                }
                Ok(())
            }
        }
    }
}
