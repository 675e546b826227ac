//! CVaR-VQE runs: bind parameters, score with exact or sampled CVaR, let the
//! optimizer drive, and track the exact fidelity of every evaluated state.

use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{AnsatzSpec, Circuit};
use crate::cvar::{cvar_exact, cvar_sampled, Shots};
use crate::error::{invalid, Result};
use crate::optimizer::{Cobyla, Minimizer, OptimizerOptions};
use crate::qubo::{optimal_set, EnergyTable, OptimalSet, QuboInstance};
use crate::rng::{rng_from_seed, stream};
use crate::statevector::State;
use crate::warmstart::{warm_start, WarmStartConfig};

pub const TRACE_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_SHOTS: u64 = 10_000;
pub const DEFAULT_FIDELITY_THRESHOLD: f64 = 0.01;
pub const EVALS_PER_QUBIT: usize = 50;

/// Instance with its energy table and optimum, shared across runs.
#[derive(Debug, Clone)]
pub struct Problem {
    pub instance: QuboInstance,
    pub table: EnergyTable,
    pub optimal: OptimalSet,
}

impl Problem {
    pub fn new(instance: QuboInstance) -> Result<Self> {
        let table = EnergyTable::new(&instance)?;
        let optimal = optimal_set(&table);
        Ok(Self { instance, table, optimal })
    }

    pub fn n(&self) -> usize {
        self.instance.n()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitStrategy {
    Zeros,
    WarmStart(WarmStartConfig),
    Explicit { params: Vec<f64> },
    Random { seed: u64, low: f64, high: f64 },
}

impl InitStrategy {
    pub fn label(&self) -> String {
        match self {
            InitStrategy::Zeros => "zeros".into(),
            InitStrategy::WarmStart(c) => format!("warm_start_{}", c.mode),
            InitStrategy::Explicit { .. } => "explicit".into(),
            InitStrategy::Random { .. } => "random".into(),
        }
    }

    pub fn initial_params(&self, instance: &QuboInstance, circuit: &Circuit) -> Result<Vec<f64>> {
        match self {
            InitStrategy::Zeros => Ok(vec![0.0; circuit.param_count]),
            InitStrategy::WarmStart(cfg) => Ok(warm_start(instance, circuit, cfg)?.params),
            InitStrategy::Explicit { params } => {
                if params.len() != circuit.param_count {
                    return Err(invalid(format!(
                        "explicit start has {} parameters, circuit needs {}",
                        params.len(),
                        circuit.param_count
                    )));
                }
                Ok(params.clone())
            }
            InitStrategy::Random { seed, low, high } => {
                if low.is_nan() || high.is_nan() || low >= high {
                    return Err(invalid(format!("random range [{low}, {high}) is empty")));
                }
                let mut rng = rng_from_seed(*seed);
                Ok((0..circuit.param_count).map(|_| rng.random_range(*low..*high)).collect())
            }
        }
    }
}

/// Missing fields in a config file take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub ansatz: AnsatzSpec,
    pub alpha: f64,
    pub shots: Shots,
    pub init: InitStrategy,
    /// Defaults to 50 evaluations per qubit.
    #[serde(default)]
    pub max_evals: Option<usize>,
    pub seed: u64,
    pub fidelity_threshold: f64,
    #[serde(default = "default_initial_radius")]
    pub initial_trust_radius: f64,
    #[serde(default = "default_final_radius")]
    pub final_trust_radius: f64,
}

fn default_initial_radius() -> f64 {
    OptimizerOptions::default().initial_trust_radius
}

fn default_final_radius() -> f64 {
    OptimizerOptions::default().final_trust_radius
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ansatz: AnsatzSpec::sia(1),
            alpha: DEFAULT_ALPHA,
            shots: Shots::Finite(DEFAULT_SHOTS),
            init: InitStrategy::Zeros,
            max_evals: None,
            seed: 0,
            fidelity_threshold: DEFAULT_FIDELITY_THRESHOLD,
            initial_trust_radius: default_initial_radius(),
            final_trust_radius: default_final_radius(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        crate::cvar::check_alpha(self.alpha)?;
        if !(self.fidelity_threshold > 0.0 && self.fidelity_threshold <= 1.0) {
            return Err(invalid(format!(
                "fidelity threshold must lie in (0, 1], got {}",
                self.fidelity_threshold
            )));
        }
        if self.max_evals == Some(0) {
            return Err(invalid("max_evals must be at least 1"));
        }
        self.optimizer_options(2).validate()
    }

    pub fn budget(&self, n: usize) -> usize {
        self.max_evals.unwrap_or(EVALS_PER_QUBIT * n)
    }

    pub fn optimizer_options(&self, n: usize) -> OptimizerOptions {
        OptimizerOptions {
            max_iterations: self.budget(n),
            initial_trust_radius: self.initial_trust_radius,
            final_trust_radius: self.final_trust_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// 1-based; evaluation 1 is the initial parameter vector.
    pub index: usize,
    pub cvar: f64,
    pub std_error: Option<f64>,
    pub fidelity: f64,
    /// Lowest-energy basis state among the shots, when sampling.
    pub best_sample: Option<usize>,
    pub params_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub success: bool,
    pub max_fidelity: f64,
    pub iterations_to_threshold: Option<usize>,
    pub best_cvar: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeTrace {
    pub format_version: u32,
    pub n: usize,
    pub instance_seed: u64,
    pub config: RunConfig,
    pub param_count: usize,
    pub optimizer_status: String,
    pub records: Vec<EvalRecord>,
    pub summary: RunSummary,
    pub best_params: Vec<f64>,
    /// Excluded from files unless timing is requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl VqeTrace {
    /// One JSON object per evaluation.
    pub fn records_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

pub fn success(records: &[EvalRecord], threshold: f64) -> bool {
    records.iter().any(|r| r.fidelity > threshold)
}

pub fn iterations_to_threshold(records: &[EvalRecord], threshold: f64) -> Option<usize> {
    records.iter().find(|r| r.fidelity > threshold).map(|r| r.index)
}

pub fn summarize(records: &[EvalRecord], threshold: f64) -> RunSummary {
    RunSummary {
        success: success(records, threshold),
        max_fidelity: records.iter().map(|r| r.fidelity).fold(0.0, f64::max),
        iterations_to_threshold: iterations_to_threshold(records, threshold),
        best_cvar: records.iter().map(|r| r.cvar).fold(f64::INFINITY, f64::min),
        evaluations: records.len(),
    }
}

/// Short hex digest of the little-endian parameter bytes.
pub fn params_hash(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Scores one parameter vector. Returns the record without its index.
pub struct Evaluator<'a> {
    problem: &'a Problem,
    circuit: &'a Circuit,
    alpha: f64,
    shots: Shots,
    seed: u64,
    state: State,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a Problem, circuit: &'a Circuit, alpha: f64, shots: Shots, seed: u64) -> Result<Self> {
        Ok(Self { problem, circuit, alpha, shots, seed, state: State::plus(circuit.n)? })
    }

    /// Evaluation `index` (1-based) draws its shots from its own stream.
    pub fn evaluate(&mut self, params: &[f64], index: usize) -> Result<EvalRecord> {
        self.circuit.prepare_into(params, &mut self.state)?;
        let fidelity = self.state.fidelity(&self.problem.optimal)?;
        let (est, best_sample) = match self.shots {
            Shots::Exact => (cvar_exact(&self.state, &self.problem.table, self.alpha)?, None),
            Shots::Finite(s) => {
                let mut rng = stream(self.seed, index as u64);
                let counts = self.state.sample_counts(s, &mut rng)?;
                let table = &self.problem.table;
                let best = counts.keys().copied().min_by(|&a, &b| table[a].total_cmp(&table[b]));
                (cvar_sampled(&counts, table, self.alpha)?, best)
            }
        };
        Ok(EvalRecord {
            index,
            cvar: est.value,
            std_error: est.std_error,
            fidelity,
            best_sample,
            params_hash: params_hash(params),
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }
}

pub fn run_vqe(problem: &Problem, config: &RunConfig) -> Result<VqeTrace> {
    config.validate()?;
    let started = Instant::now();
    let circuit = config.ansatz.build(&problem.instance)?;
    let x0 = config.init.initial_params(&problem.instance, &circuit)?;
    let mut evaluator = Evaluator::new(problem, &circuit, config.alpha, config.shots, config.seed)?;
    let mut records = Vec::new();
    let mut objective = |params: &[f64]| -> Result<f64> {
        let rec = evaluator.evaluate(params, records.len() + 1)?;
        let v = rec.cvar;
        records.push(rec);
        Ok(v)
    };
    let minimum = Cobyla { options: config.optimizer_options(problem.n()) }
        .minimize(&mut objective, &x0)?;
    let summary = summarize(&records, config.fidelity_threshold);
    Ok(VqeTrace {
        format_version: TRACE_FORMAT_VERSION,
        n: problem.n(),
        instance_seed: problem.instance.seed(),
        config: config.clone(),
        param_count: circuit.param_count,
        optimizer_status: minimum.status,
        records,
        summary,
        best_params: minimum.best_params,
        wall_time_s: Some(started.elapsed().as_secs_f64()),
    })
}
