//! Command-line surface: instance generation, single runs, batch sweeps,
//! diagnostics and resource tables.
//!
//! Relative output paths are resolved under `$SIAVQE_OUTPUT_DIR` when it is
//! set. Every file written carries a provenance block (tool version, seeds,
//! sha256 of the effective config); CSV files carry it as `#` lines.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{resource_estimate, AnsatzKind, AnsatzSpec, Connectivity, EdgeOrder, ResourceEstimate};
use crate::cvar::{cvar_exact, Shots};
use crate::diagnostics::{
    cost_concentration, gradient_magnitude, DiagnosticsRow, DEFAULT_FD_STEP, DEFAULT_SAMPLES,
};
use crate::error::{invalid, Error, Result};
use crate::qubo::{brute_force_solve, generate_instance, QuboInstance};
use crate::rng::derive_seed;
use crate::vqe::{run_vqe, summarize, EvalRecord, InitStrategy, Problem, RunConfig, VqeTrace};
use crate::warmstart::{warm_start, EdgeStep, WarmStartConfig, WarmStartMode};

pub const OUTPUT_DIR_ENV: &str = "SIAVQE_OUTPUT_DIR";
pub const FORMAT_VERSION: u32 = 1;
pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "siavqe", version, about = "CVaR-VQE laboratory for QUBO instances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write random complete-graph instances.
    Generate(GenerateArgs),
    /// Brute-force optimum of an instance.
    Solve(SolveArgs),
    /// Warm-start parameters and the fidelity they reach.
    Warmstart(WarmstartArgs),
    /// One optimization run.
    Vqe(VqeArgs),
    /// Sweep sizes, instances and init modes from a spec file.
    Batch(BatchArgs),
    /// Recompute batch tables from the raw traces in a directory.
    Aggregate(AggregateArgs),
    /// Cost concentration and gradient sweeps from a spec file.
    Diagnose(DiagnoseArgs),
    /// Two-qubit gate counts and depth.
    Resources(ResourcesArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Instance k gets seed `seed + k`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "instances")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WarmstartArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub mode: Option<WarmStartMode>,
    #[arg(long)]
    pub shots_per_pauli: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long)]
    pub edge_order: Option<EdgeOrder>,
    /// CVaR level for the reported cost of the warm-started state.
    #[arg(long, default_value_t = crate::vqe::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InitMode {
    Zeros,
    WarmStart,
    Random,
}

#[derive(Debug, Args)]
pub struct VqeArgs {
    pub instance: PathBuf,
    /// Run config JSON; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ansatz: Option<AnsatzKind>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub edge_order: Option<EdgeOrder>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Shots per evaluation, or `exact`.
    #[arg(long)]
    pub shots: Option<Shots>,
    #[arg(long, value_enum)]
    pub init: Option<InitMode>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub warm_mode: Option<WarmStartMode>,
    #[arg(long)]
    pub shots_per_pauli: Option<u64>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value = "vqe")]
    pub out: PathBuf,
    /// Record wall-clock time in the outputs.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub instances_per_size: Option<usize>,
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// A batch output directory.
    pub dir: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub spec: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ResourcesArgs {
    #[arg(long)]
    pub kind: AnsatzKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "linear")]
    pub connectivity: Connectivity,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where a file came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seeds: Vec<u64>,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(command: &str, seeds: Vec<u64>, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seeds,
            config_hash: config_hash(config)?,
        })
    }

    fn csv_header(&self) -> String {
        format!(
            "# format_version: {FORMAT_VERSION}\n# tool: {} {}\n# command: {}\n# seeds: {}\n# config_hash: {}\n",
            self.tool,
            self.version,
            self.command,
            self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
            self.config_hash
        )
    }
}

/// sha256 of the compact JSON form.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let text = serde_json::to_string(config)?;
    Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Serialize)]
struct WithProvenance<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

fn json_with_provenance(body: &impl Serialize, provenance: &Provenance) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&WithProvenance { provenance, body })?;
    text.push('\n');
    Ok(text)
}

/// Resolves relative output paths under the output root.
pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(root) if path.is_relative() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let path = resolve_output(p);
            write_file(&path, text)?;
            report_written(vec![path])
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn csv_text<R: Serialize>(provenance: &Provenance, rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut text = provenance.csv_header();
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(text)
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(invalid("jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| invalid(e.to_string()))
}

#[derive(Serialize)]
struct Written {
    written: Vec<PathBuf>,
}

fn report_written(mut written: Vec<PathBuf>) -> Result<()> {
    written.sort();
    let mut text = serde_json::to_string_pretty(&Written { written })?;
    text.push('\n');
    emit(None, &text)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    if args.count == 0 {
        return Err(invalid("count must be at least 1"));
    }
    let dir = resolve_output(&args.out);
    let mut written = Vec::with_capacity(args.count);
    for k in 0..args.count as u64 {
        let seed = args.seed + k;
        let instance = generate_instance(args.n, seed)?;
        let body: serde_json::Value = serde_json::from_str(&instance.to_json()?)?;
        let provenance = Provenance::new("generate", vec![seed], &(args.n, seed))?;
        let path = dir.join(instance_file_name(args.n, seed));
        write_file(&path, &json_with_provenance(&body, &provenance)?)?;
        written.push(path);
    }
    report_written(written)
}

pub fn instance_file_name(n: usize, seed: u64) -> String {
    format!("n{n:02}_s{seed}.json")
}

#[derive(Serialize)]
struct SolveReport {
    format_version: u32,
    n: usize,
    instance_seed: u64,
    min_energy: f64,
    /// Basis indices; bit q is qubit q.
    states: Vec<usize>,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let instance = QuboInstance::load(&args.instance)?;
    let opt = brute_force_solve(&instance)?;
    let report = SolveReport {
        format_version: FORMAT_VERSION,
        n: opt.n,
        instance_seed: instance.seed(),
        min_energy: opt.min_energy,
        states: opt.states,
    };
    let provenance = Provenance::new("solve", vec![instance.seed()], &instance.to_json()?)?;
    emit(args.out.as_deref(), &json_with_provenance(&report, &provenance)?)
}

#[derive(Serialize)]
struct WarmstartReport {
    format_version: u32,
    n: usize,
    instance_seed: u64,
    config: WarmStartConfig,
    layers: usize,
    fidelity: f64,
    alpha: f64,
    cvar: f64,
    params: Vec<f64>,
    per_edge: Vec<EdgeStep>,
}

pub fn cmd_warmstart(args: &WarmstartArgs) -> Result<()> {
    let instance = QuboInstance::load(&args.instance)?;
    let defaults = WarmStartConfig::default();
    let config = WarmStartConfig {
        tau: args.tau.unwrap_or(defaults.tau),
        mode: args.mode.unwrap_or(defaults.mode),
        shots_per_pauli: args.shots_per_pauli.unwrap_or(defaults.shots_per_pauli),
        seed: args.seed.unwrap_or(defaults.seed),
    };
    let spec = AnsatzSpec {
        kind: AnsatzKind::SiaYz,
        layers: args.layers,
        edge_order: args.edge_order.clone().unwrap_or_default(),
    };
    let problem = Problem::new(instance)?;
    let circuit = spec.build(&problem.instance)?;
    let result = warm_start(&problem.instance, &circuit, &config)?;
    let state = circuit.prepare(&result.params)?;
    let report = WarmstartReport {
        format_version: FORMAT_VERSION,
        n: problem.n(),
        instance_seed: problem.instance.seed(),
        fidelity: state.fidelity(&problem.optimal)?,
        alpha: args.alpha,
        cvar: cvar_exact(&state, &problem.table, args.alpha)?.value,
        config,
        layers: args.layers,
        params: result.params,
        per_edge: result.per_edge,
    };
    let provenance = Provenance::new(
        "warmstart",
        vec![report.instance_seed, report.config.seed],
        &(&report.config, &spec, args.alpha),
    )?;
    emit(args.out.as_deref(), &json_with_provenance(&report, &provenance)?)
}

/// First line of a records file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format_version: u32,
    pub provenance: Provenance,
    pub n: usize,
    pub instance_seed: u64,
    pub init: String,
    pub config: RunConfig,
    pub param_count: usize,
    pub optimizer_status: String,
}

fn records_file(trace: &VqeTrace, provenance: &Provenance) -> Result<String> {
    let header = TraceHeader {
        format_version: trace.format_version,
        provenance: provenance.clone(),
        n: trace.n,
        instance_seed: trace.instance_seed,
        init: trace.config.init.label(),
        config: trace.config.clone(),
        param_count: trace.param_count,
        optimizer_status: trace.optimizer_status.clone(),
    };
    let mut text = serde_json::to_string(&header)?;
    text.push('\n');
    text.push_str(&trace.records_jsonl()?);
    Ok(text)
}

/// Reads a records file back into its header and records.
pub fn read_records(path: &Path) -> Result<(TraceHeader, Vec<EvalRecord>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: TraceHeader = serde_json::from_str(
        lines.next().ok_or_else(|| invalid(format!("{} is empty", path.display())))?,
    )?;
    if header.format_version > crate::vqe::TRACE_FORMAT_VERSION {
        return Err(invalid(format!("unsupported trace format_version {}", header.format_version)));
    }
    let records = lines.map(serde_json::from_str).collect::<std::result::Result<_, _>>()?;
    Ok((header, records))
}

fn vqe_config(args: &VqeArgs) -> Result<RunConfig> {
    let mut c: RunConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    if let Some(k) = args.ansatz {
        c.ansatz.kind = k;
    }
    if let Some(l) = args.layers {
        c.ansatz.layers = l;
    }
    if let Some(o) = &args.edge_order {
        c.ansatz.edge_order = o.clone();
    }
    if let Some(a) = args.alpha {
        c.alpha = a;
    }
    if let Some(s) = args.shots {
        c.shots = s;
    }
    if let Some(m) = args.max_evals {
        c.max_evals = Some(m);
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(t) = args.threshold {
        c.fidelity_threshold = t;
    }
    match args.init {
        Some(InitMode::Zeros) => c.init = InitStrategy::Zeros,
        Some(InitMode::WarmStart) => {
            if !matches!(c.init, InitStrategy::WarmStart(_)) {
                c.init = InitStrategy::WarmStart(WarmStartConfig::default());
            }
        }
        Some(InitMode::Random) => {
            let pi = std::f64::consts::PI;
            c.init = InitStrategy::Random { seed: c.seed, low: -pi, high: pi };
        }
        None => {}
    }
    let ws_flags = args.tau.is_some() || args.warm_mode.is_some() || args.shots_per_pauli.is_some();
    match &mut c.init {
        InitStrategy::WarmStart(ws) => {
            if let Some(t) = args.tau {
                ws.tau = t;
            }
            if let Some(m) = args.warm_mode {
                ws.mode = m;
            }
            if let Some(s) = args.shots_per_pauli {
                ws.shots_per_pauli = s;
            }
        }
        _ if ws_flags => return Err(invalid("warm-start flags need --init warm-start")),
        _ => {}
    }
    c.validate()?;
    Ok(c)
}

pub fn cmd_vqe(args: &VqeArgs) -> Result<()> {
    let config = vqe_config(args)?;
    let problem = Problem::new(QuboInstance::load(&args.instance)?)?;
    let mut trace = run_vqe(&problem, &config)?;
    if !args.timing {
        trace.wall_time_s = None;
    }
    let provenance =
        Provenance::new("vqe", vec![problem.instance.seed(), config.seed], &config)?;
    let dir = resolve_output(&args.out);
    let records = dir.join("records.jsonl");
    let summary = dir.join("trace.json");
    write_file(&records, &records_file(&trace, &provenance)?)?;
    write_file(&summary, &json_with_provenance(&trace, &provenance)?)?;
    report_written(vec![records, summary])
}

/// A batch sweep. Instance `k` of size `n` uses generator seed
/// `base_seed + k` and run seed `run.seed + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub format_version: u32,
    pub sizes: Vec<usize>,
    pub instances_per_size: usize,
    pub base_seed: u64,
    /// Init strategies compared on every instance; `run.init` is ignored.
    pub inits: Vec<InitStrategy>,
    pub run: RunConfig,
    pub output_dir: Option<PathBuf>,
    pub parallelism: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            sizes: vec![],
            instances_per_size: 100,
            base_seed: 0,
            inits: vec![InitStrategy::Zeros, InitStrategy::WarmStart(WarmStartConfig::default())],
            run: RunConfig::default(),
            output_dir: None,
            parallelism: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.format_version > FORMAT_VERSION {
            return Err(invalid(format!("unsupported spec format_version {}", self.format_version)));
        }
        if self.sizes.is_empty() {
            return Err(invalid("spec lists no sizes"));
        }
        if self.instances_per_size == 0 {
            return Err(invalid("instances_per_size must be at least 1"));
        }
        if self.inits.is_empty() {
            return Err(invalid("spec lists no init strategies"));
        }
        for &n in &self.sizes {
            if n > crate::qubo::DEFAULT_QUBIT_CAP {
                return Err(Error::ResourceLimit {
                    what: "batch instance",
                    requested: n,
                    cap: crate::qubo::DEFAULT_QUBIT_CAP,
                });
            }
        }
        self.run.validate()
    }

    pub fn seeds(&self) -> Vec<u64> {
        vec![self.base_seed, self.run.seed]
    }
}

/// One run in the per-run table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub n: usize,
    pub instance_seed: u64,
    pub run_seed: u64,
    pub init: String,
    pub success: bool,
    pub max_fidelity: f64,
    pub iterations_to_threshold: Option<usize>,
    pub best_cvar: f64,
    pub evaluations: usize,
    pub rel_std_error_10: Option<f64>,
}

/// One (size, init) row of the aggregate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub init: String,
    pub instances: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Over successful runs only.
    pub mean_iterations: Option<f64>,
    pub se_iterations: Option<f64>,
    pub mean_rel_std_error_10: Option<f64>,
}

/// `sigma / |CVaR|` at the given 1-based evaluation, when sampled.
pub fn relative_std_error(records: &[EvalRecord], index: usize) -> Option<f64> {
    let r = records.iter().find(|r| r.index == index)?;
    Some(r.std_error? / r.cvar.abs())
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let se = (xs.len() > 1).then(|| {
        (crate::diagnostics::sample_variance(xs) / xs.len() as f64).sqrt()
    });
    (Some(mean), se)
}

pub fn run_row(header: &TraceHeader, records: &[EvalRecord]) -> RunRow {
    let s = summarize(records, header.config.fidelity_threshold);
    RunRow {
        n: header.n,
        instance_seed: header.instance_seed,
        run_seed: header.config.seed,
        init: header.init.clone(),
        success: s.success,
        max_fidelity: s.max_fidelity,
        iterations_to_threshold: s.iterations_to_threshold,
        best_cvar: s.best_cvar,
        evaluations: s.evaluations,
        rel_std_error_10: relative_std_error(records, 10),
    }
}

/// Groups runs by (n, init). Input order does not matter.
pub fn aggregate(runs: &[RunRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, &str), Vec<&RunRow>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.n, r.init.as_str())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, init), mut rows)| {
            rows.sort_by_key(|r| r.instance_seed);
            let successes = rows.iter().filter(|r| r.success).count();
            let iters: Vec<f64> =
                rows.iter().filter_map(|r| r.iterations_to_threshold).map(|i| i as f64).collect();
            let rse: Vec<f64> = rows.iter().filter_map(|r| r.rel_std_error_10).collect();
            let (mean_iterations, se_iterations) = mean_and_se(&iters);
            AggregateRow {
                n,
                init: init.to_string(),
                instances: rows.len(),
                successes,
                success_rate: successes as f64 / rows.len() as f64,
                mean_iterations,
                se_iterations,
                mean_rel_std_error_10: mean_and_se(&rse).0,
            }
        })
        .collect()
}

pub const TRACES_DIR: &str = "traces";
pub const RUNS_CSV: &str = "runs.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";

/// Reads every records file under `dir/traces`, sorted by name.
pub fn collect_runs(dir: &Path) -> Result<Vec<RunRow>> {
    let traces = dir.join(TRACES_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&traces)
        .map_err(|e| invalid(format!("cannot list {}: {e}", traces.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let (header, records) = read_records(p)?;
            Ok(run_row(&header, &records))
        })
        .collect()
}

fn batch_run(
    spec: &ExperimentSpec,
    n: usize,
    k: usize,
    dir: &Path,
    timing: bool,
    provenance: &Provenance,
) -> Result<Vec<PathBuf>> {
    let problem = Problem::new(generate_instance(n, spec.base_seed + k as u64)?)?;
    let mut written = Vec::new();
    for init in &spec.inits {
        let mut init = init.clone();
        if let InitStrategy::WarmStart(ws) = &mut init {
            ws.seed += k as u64;
        }
        let config = RunConfig { init, seed: spec.run.seed + k as u64, ..spec.run.clone() };
        let mut trace = run_vqe(&problem, &config)?;
        if !timing {
            trace.wall_time_s = None;
        }
        let stem = format!("n{n:02}_i{k:04}_{}", config.init.label());
        let path = dir.join(TRACES_DIR).join(format!("{stem}.jsonl"));
        write_file(&path, &records_file(&trace, provenance)?)?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_batch(args: &BatchArgs) -> Result<()> {
    let mut spec: ExperimentSpec = read_json(&args.spec)?;
    if let Some(k) = args.instances_per_size {
        spec.instances_per_size = k;
    }
    if let Some(j) = args.jobs {
        spec.parallelism = Some(j);
    }
    if let Some(o) = &args.out {
        spec.output_dir = Some(o.clone());
    }
    spec.validate()?;
    let labels: Vec<String> = spec.inits.iter().map(InitStrategy::label).collect();
    let mut unique = labels.clone();
    unique.sort();
    unique.dedup();
    if unique.len() != labels.len() {
        return Err(invalid("init strategies in a batch must have distinct labels"));
    }
    let dir = resolve_output(spec.output_dir.as_deref().unwrap_or(Path::new("batch")));
    let provenance = Provenance::new("batch", spec.seeds(), &spec)?;
    let jobs: Vec<(usize, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&n| (0..spec.instances_per_size).map(move |k| (n, k)))
        .collect();
    let pool = thread_pool(spec.parallelism)?;
    let written: Vec<Vec<PathBuf>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(n, k)| batch_run(&spec, n, k, &dir, args.timing, &provenance))
            .collect::<Result<_>>()
    })?;
    let mut written: Vec<PathBuf> = written.into_iter().flatten().collect();

    // single-threaded aggregation from the files just written
    let runs = collect_runs(&dir)?;
    let runs_path = dir.join(RUNS_CSV);
    let agg_path = dir.join(AGGREGATE_CSV);
    write_file(&runs_path, &csv_text(&provenance, &runs)?)?;
    write_file(&agg_path, &csv_text(&provenance, &aggregate(&runs))?)?;
    written.push(runs_path);
    written.push(agg_path);
    report_written(written)
}

pub fn cmd_aggregate(args: &AggregateArgs) -> Result<()> {
    let runs = collect_runs(&args.dir)?;
    // reuse the batch provenance so a re-aggregation reproduces the table
    let first = fs::read_dir(args.dir.join(TRACES_DIR))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .min()
        .ok_or_else(|| invalid("no traces to aggregate"))?;
    let (header, _) = read_records(&first)?;
    emit(args.out.as_deref(), &csv_text(&header.provenance, &aggregate(&runs))?)
}

/// A diagnostics sweep. Instance `k` of size `n` uses generator seed
/// `base_seed + k`; its parameter samples use `derive_seed(seed, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnoseSpec {
    pub format_version: u32,
    pub sizes: Vec<usize>,
    pub layers: Vec<usize>,
    pub instances: usize,
    pub base_seed: u64,
    pub seed: u64,
    pub samples: usize,
    pub alpha: f64,
    /// Also compute the mean squared gradient at warm-start parameters.
    pub gradient: bool,
    pub fd_step: f64,
    pub warm_start: WarmStartConfig,
    pub output_dir: Option<PathBuf>,
    pub parallelism: Option<usize>,
}

impl Default for DiagnoseSpec {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            sizes: vec![],
            layers: vec![1, 2, 3],
            instances: 10,
            base_seed: 0,
            seed: 0,
            samples: DEFAULT_SAMPLES,
            alpha: crate::vqe::DEFAULT_ALPHA,
            gradient: false,
            fd_step: DEFAULT_FD_STEP,
            warm_start: WarmStartConfig::default(),
            output_dir: None,
            parallelism: None,
        }
    }
}

/// Instance means of one (n, layers) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummaryRow {
    pub n: usize,
    pub layers: usize,
    pub depth: usize,
    pub alpha: f64,
    pub instances: usize,
    pub var_delta_c: f64,
    pub g: Option<f64>,
}

pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const DIAGNOSTICS_SUMMARY_CSV: &str = "diagnostics_summary.csv";

fn diagnose_cell(spec: &DiagnoseSpec, n: usize, layers: usize, k: usize) -> Result<DiagnosticsRow> {
    let instance_seed = spec.base_seed + k as u64;
    let problem = Problem::new(generate_instance(n, instance_seed)?)?;
    let ansatz = AnsatzSpec::sia(layers);
    let conc = cost_concentration(
        &problem,
        &ansatz,
        spec.samples,
        spec.alpha,
        derive_seed(spec.seed, k as u64),
    )?;
    let g = if spec.gradient {
        let circuit = ansatz.build(&problem.instance)?;
        let params = warm_start(&problem.instance, &circuit, &spec.warm_start)?.params;
        Some(gradient_magnitude(&problem, &circuit, &params, spec.alpha, spec.fd_step)?)
    } else {
        None
    };
    Ok(DiagnosticsRow {
        n,
        layers,
        depth: 2 * n * layers,
        alpha: spec.alpha,
        instance_seed,
        var_delta_c: conc.var_delta_c,
        g,
        sample_count: spec.samples,
        fd_step: spec.fd_step,
    })
}

pub fn summarize_diagnostics(rows: &[DiagnosticsRow]) -> Vec<DiagnosticsSummaryRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<&DiagnosticsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.layers)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, layers), mut cell)| {
            cell.sort_by_key(|r| r.instance_seed);
            let m = cell.len() as f64;
            let g: Option<Vec<f64>> = cell.iter().map(|r| r.g).collect();
            DiagnosticsSummaryRow {
                n,
                layers,
                depth: cell[0].depth,
                alpha: cell[0].alpha,
                instances: cell.len(),
                var_delta_c: cell.iter().map(|r| r.var_delta_c).sum::<f64>() / m,
                g: g.map(|g| g.iter().sum::<f64>() / m),
            }
        })
        .collect()
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let mut spec: DiagnoseSpec = read_json(&args.spec)?;
    if let Some(j) = args.jobs {
        spec.parallelism = Some(j);
    }
    if let Some(o) = &args.out {
        spec.output_dir = Some(o.clone());
    }
    if spec.sizes.is_empty() || spec.layers.is_empty() || spec.instances == 0 {
        return Err(invalid("diagnose spec needs sizes, layers and at least one instance"));
    }
    crate::cvar::check_alpha(spec.alpha)?;
    if spec.gradient {
        spec.warm_start.validate()?;
    }
    let dir = resolve_output(spec.output_dir.as_deref().unwrap_or(Path::new("diagnostics")));
    let provenance = Provenance::new("diagnose", vec![spec.base_seed, spec.seed], &spec)?;
    let cells: Vec<(usize, usize, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&n| {
            spec.layers.iter().flat_map(move |&l| (0..spec.instances).map(move |k| (n, l, k)))
        })
        .collect();
    let pool = thread_pool(spec.parallelism)?;
    let rows: Vec<DiagnosticsRow> = pool.install(|| {
        cells.par_iter().map(|&(n, l, k)| diagnose_cell(&spec, n, l, k)).collect::<Result<_>>()
    })?;
    let rows_path = dir.join(DIAGNOSTICS_CSV);
    let summary_path = dir.join(DIAGNOSTICS_SUMMARY_CSV);
    write_file(&rows_path, &csv_text(&provenance, &rows)?)?;
    write_file(&summary_path, &csv_text(&provenance, &summarize_diagnostics(&rows))?)?;
    report_written(vec![rows_path, summary_path])
}

#[derive(Serialize)]
struct ResourcesReport {
    format_version: u32,
    #[serde(flatten)]
    estimate: ResourceEstimate,
}

pub fn cmd_resources(args: &ResourcesArgs) -> Result<()> {
    let estimate = resource_estimate(args.kind, args.n, args.layers, args.connectivity)?;
    let provenance = Provenance::new("resources", vec![], &estimate)?;
    let report = ResourcesReport { format_version: FORMAT_VERSION, estimate };
    emit(args.out.as_deref(), &json_with_provenance(&report, &provenance)?)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Warmstart(a) => cmd_warmstart(a),
        Command::Vqe(a) => cmd_vqe(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Aggregate(a) => cmd_aggregate(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Resources(a) => cmd_resources(a),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::UnsupportedAnsatz(_) | Error::Json(_) | Error::Csv(_) => {
            EXIT_INVALID
        }
        Error::ResourceLimit { .. } => EXIT_RESOURCE,
        Error::UndefinedEstimate(_) | Error::NonFiniteObjective { .. } | Error::Io(_) => {
            EXIT_INTERNAL
        }
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidArgument(_) => "invalid_argument",
        Error::ResourceLimit { .. } => "resource_limit",
        Error::UndefinedEstimate(_) => "undefined_estimate",
        Error::UnsupportedAnsatz(_) => "unsupported_ansatz",
        Error::NonFiniteObjective { .. } => "non_finite_objective",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn report_error(kind: &str, message: String, exit_code: i32) -> i32 {
    let report = ErrorReport { error: kind, message, exit_code };
    let text = serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"exit_code\":{exit_code}}}"));
    eprintln!("{text}");
    exit_code
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => return report_error("usage", e.render().to_string(), EXIT_INVALID),
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(error_kind(&e), e.to_string(), exit_code(&e)),
    }
}
