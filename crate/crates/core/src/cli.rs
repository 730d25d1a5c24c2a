//! The `idgs` command-line harness.
//!
//! Every subcommand accepts `--config FILE`: a JSON object whose keys mirror
//! the long flag names (`{"n": 5, "target": "01100", "brute-force-tail":
//! true}`); flags given on the command line win over the file. The `config`
//! object embedded in a `run` record is itself a valid config file, so
//! records can be replayed.
//!
//! Exit codes: 0 success, 1 target not found (or a check failed), 2 invalid
//! configuration, 3 infeasible phase plan.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::depth::depth_report;
use crate::distributed::{
    run_idgs, run_idgs_multiprocess, serve_node_requests, NodeReport, OracleSpec, RunConfig, SearchOutcome,
};
use crate::error::Error;
use crate::identities::{verify_identities, IdentityOptions};
use crate::noise::{
    default_trajectories, idgs_noisy_success, long_noisy_success, Backend, ChannelKind, NoiseSpec,
};
use crate::operators::{long_circuit, stage1_circuit, SearchOperator};
use crate::oracle::{MarkedOracle, SubfunctionId};
use crate::planner::{idgs_plan_with_branch, long_params, Branch, IdgsPlan};

/// Environment variable naming the directory outputs are written to when no
/// `--output` is given.
pub const OUTPUT_DIR_ENV: &str = "IDGS_OUTPUT_DIR";

/// Amplitude-damping sweep grid used when `--gamma` is absent.
pub const AD_GRID: [f64; 8] = [0.001, 0.005, 0.007, 0.010, 0.020, 0.030, 0.040, 0.050];
/// Phase-damping sweep grid used when `--gamma` is absent.
pub const PD_GRID: [f64; 5] = [0.001, 0.002, 0.003, 0.005, 0.007];

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_FOUND: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    /// The command ran but its check failed (target not found, identity
    /// failed); the output has already been written.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_INVALID,
            CliError::Core(Error::Infeasible { .. }) => EXIT_INFEASIBLE,
            CliError::Core(Error::Worker(_) | Error::Integrity(_)) => EXIT_NOT_FOUND,
            CliError::Core(_) => EXIT_INVALID,
            CliError::Io { .. } | CliError::Failed(_) => EXIT_NOT_FOUND,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

#[derive(Debug, Parser)]
#[command(
    name = "idgs",
    version,
    about = "Exact partial search and iterative exact distributed Grover search",
    after_help = "Bit strings are MSB-first: the leftmost character is qubit 0. \
                  A node's subfunction fixes the last k input bits."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the phase plan for (n, k, p) as JSON.
    Plan(PlanArgs),
    /// Run IDGS over all 2^k nodes and write a JSON run record.
    Run(RunArgs),
    /// Sweep a damping coefficient and write success rates as CSV.
    NoiseSweep(SweepArgs),
    /// Check the analytic identities numerically.
    VerifyIdentities(VerifyArgs),
    /// Circuit-depth and query-count accounting.
    Depth(DepthArgs),
    /// Print the gate sequence of one operator or stage.
    DumpCircuit(DumpArgs),
    /// Worker mode: read node requests as JSON lines on stdin, answer with
    /// node reports on stdout.
    Node,
}

/// Flags shared by every file-producing subcommand; never part of the
/// replayable config.
#[derive(Debug, Clone, Default, Args)]
pub struct IoArgs {
    /// JSON config file; command-line flags take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output file (default: stdout, or a file in $IDGS_OUTPUT_DIR).
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Idgs,
    Long,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Text,
    Json,
    Csv,
}

fn parse_channel(s: &str) -> Result<ChannelKind, String> {
    match s {
        "ad" => Ok(ChannelKind::AmplitudeDamping),
        "pd" => Ok(ChannelKind::PhaseDamping),
        "custom" => Err("custom channels are only available through the library API".into()),
        _ => parse_kebab(s),
    }
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "dm" | "density" => Ok(Backend::DensityMatrix),
        _ => parse_kebab(s),
    }
}

fn parse_kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn parse_bits(s: &str) -> Result<BitString, String> {
    BitString::parse(s).map_err(|e| e.to_string())
}

/// `(n, k, p)` with `n` inferred from `--target` when absent.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ShapeArgs {
    /// Input width n.
    #[arg(short = 'n', long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// log2 of the number of nodes.
    #[arg(short = 'k', long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Prefix width found in stage 1.
    #[arg(short = 'p', long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PlanArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: ShapeArgs,
    /// Use the mirrored phase solution (θ, φ) → (−θ, −φ).
    #[arg(long)]
    #[serde(default)]
    pub mirrored: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: ShapeArgs,
    /// The marked input string.
    #[arg(short, long, value_parser = parse_bits)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<BitString>,
    /// Base seed; node i uses seed + i.
    #[arg(short, long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Maximum number of nodes run concurrently.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    /// Replace stage 2 by a classical scan when the suffix is at most 4 bits.
    #[arg(long)]
    #[serde(default)]
    pub brute_force_tail: bool,
    #[arg(long)]
    #[serde(default)]
    pub mirrored: bool,
    /// Run each node as a separate `idgs node` process.
    #[arg(long)]
    #[serde(default)]
    pub multiprocess: bool,
    /// Worker executable for --multiprocess (default: this binary).
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worker: Option<PathBuf>,
    /// Damping channel applied after every gate.
    #[arg(long, value_parser = parse_channel)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = parse_backend)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    /// Include the wall-clock time in the record (makes it non-reproducible).
    #[arg(long)]
    #[serde(skip)]
    pub timing: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: ShapeArgs,
    #[arg(short, long, value_parser = parse_bits)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<BitString>,
    #[arg(short, long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    /// amplitude-damping (ad) or phase-damping (pd).
    #[arg(long, value_parser = parse_channel)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelKind>,
    /// Comma-separated damping coefficients (default: the channel's grid).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    /// density-matrix, trajectories or auto.
    #[arg(long, value_parser = parse_backend)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    /// Trajectories per estimate on the trajectory backend.
    #[arg(long, alias = "shots")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    /// csv (default) or json.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct VerifyArgs {
    /// text (default) or json.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Flip the sign of φ before checking (the checks must then fail).
    #[arg(long, hide = true)]
    #[serde(default)]
    pub inject_sign_error: bool,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DepthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: ShapeArgs,
    /// text (default) or json.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DumpOp {
    G,
    G1,
    G2,
    G3,
    G4,
    Gg,
    L,
    /// Whole stage-1 circuit of the node owning the target.
    Stage1,
    /// Whole stage-2 (Long) circuit of the target node.
    Stage2,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DumpArgs {
    #[arg(value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op: Option<DumpOp>,
    #[command(flatten)]
    #[serde(flatten)]
    pub shape: ShapeArgs,
    /// Marked string on the operator's register (stage1/stage2: the full
    /// n-bit target).
    #[arg(short, long, value_parser = parse_bits)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<BitString>,
    /// Override θ for g4/gg.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Override φ for g4/gg.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    /// Override ω for l.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

/// Fill unset flags from a config file.
trait Merge: Sized {
    fn merge(self, base: Self) -> Self;
}

macro_rules! merge_fields {
    ($self:ident, $base:ident; opt: $($o:ident),*; flag: $($b:ident),*; keep: $($k:ident),*) => {
        Self {
            $($o: $self.$o.or($base.$o),)*
            $($b: $self.$b || $base.$b,)*
            $($k: $self.$k,)*
        }
    };
}

impl Merge for ShapeArgs {
    fn merge(self, base: Self) -> Self {
        merge_fields!(self, base; opt: n, k, p; flag: ; keep: )
    }
}

impl Merge for PlanArgs {
    fn merge(self, base: Self) -> Self {
        Self {
            shape: self.shape.merge(base.shape),
            mirrored: self.mirrored || base.mirrored,
            io: self.io,
        }
    }
}

impl Merge for RunArgs {
    fn merge(self, base: Self) -> Self {
        let shape = self.shape.clone().merge(base.shape.clone());
        Self {
            shape,
            ..merge_fields!(self, base;
                opt: target, seed, parallelism, worker, channel, gamma, backend;
                flag: brute_force_tail, mirrored, multiprocess, timing;
                keep: io, shape)
        }
    }
}

impl Merge for SweepArgs {
    fn merge(self, base: Self) -> Self {
        let shape = self.shape.clone().merge(base.shape.clone());
        Self {
            shape,
            ..merge_fields!(self, base;
                opt: target, seed, algorithm, channel, gamma, backend, trajectories, format;
                flag: ;
                keep: io, shape)
        }
    }
}

impl Merge for VerifyArgs {
    fn merge(self, base: Self) -> Self {
        merge_fields!(self, base; opt: format; flag: inject_sign_error; keep: io)
    }
}

impl Merge for DepthArgs {
    fn merge(self, base: Self) -> Self {
        Self {
            shape: self.shape.merge(base.shape),
            format: self.format.or(base.format),
            io: self.io,
        }
    }
}

impl Merge for DumpArgs {
    fn merge(self, base: Self) -> Self {
        let shape = self.shape.clone().merge(base.shape.clone());
        Self {
            shape,
            ..merge_fields!(self, base; opt: op, target, theta, phi, omega; flag: ; keep: io, shape)
        }
    }
}

/// Read a config file. A saved run record (an object with a `config` key)
/// is accepted in place of a bare config.
fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    if let Some(inner) = value.get_mut("config").filter(|c| c.is_object()) {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))
}

fn with_config<T: Merge + DeserializeOwned + Default>(args: T, config: Option<&Path>) -> CliResult<T> {
    match config {
        Some(path) => Ok(args.merge(load_config(path)?)),
        None => Ok(args),
    }
}

/// Collects validation problems so they can be reported together.
#[derive(Default)]
struct Problems(Vec<String>);

impl Problems {
    fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    fn require<T: Copy>(&mut self, v: Option<T>, flag: &str) -> Option<T> {
        if v.is_none() {
            self.push(format!("missing --{flag}"));
        }
        v
    }

    fn finish(self) -> CliResult<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(self.0))
        }
    }
}

/// Concrete `(n, k, p)` after defaults and checks.
#[derive(Clone, Copy, Debug)]
struct Shape {
    n: usize,
    k: usize,
    p: usize,
}

fn resolve_shape(shape: &ShapeArgs, target: Option<BitString>, problems: &mut Problems) -> Option<Shape> {
    let n = shape.n.or(target.map(|t| t.width()));
    let n = problems.require(n, "n (or --target)");
    let k = shape.k.unwrap_or(1);
    let p = problems.require(shape.p, "p");
    if let (Some(n), Some(t)) = (n, target) {
        if t.width() != n {
            problems.push(format!("--target has {} bits but n = {n}", t.width()));
        }
    }
    let (n, p) = (n?, p?);
    let mut ok = true;
    if p == 0 {
        problems.push("p must be at least 1");
        ok = false;
    }
    if p + k >= n {
        problems.push(format!("need p + k < n, got n = {n}, k = {k}, p = {p}"));
        ok = false;
    }
    ok.then_some(Shape { n, k, p })
}

fn check_gamma(g: f64, problems: &mut Problems) {
    if !(0.0..=1.0).contains(&g) || g.is_nan() {
        problems.push(format!("gamma must lie in [0, 1], got {g}"));
    }
}

fn branch(mirrored: bool) -> Branch {
    if mirrored {
        Branch::Mirrored
    } else {
        Branch::Positive
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Write `text` to `--output`, else into `$IDGS_OUTPUT_DIR/default_name`,
/// else to stdout.
fn emit(text: &str, io_args: &IoArgs, default_name: &str) -> CliResult<()> {
    let path = match (&io_args.output, std::env::var_os(OUTPUT_DIR_ENV)) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) if !dir.is_empty() => {
            let dir = PathBuf::from(dir);
            std::fs::create_dir_all(&dir).map_err(io_err(format!("cannot create {}", dir.display())))?;
            Some(dir.join(default_name))
        }
        _ => None,
    };
    match path {
        Some(p) => {
            std::fs::write(&p, text).map_err(io_err(format!("cannot write {}", p.display())))?;
            eprintln!("wrote {}", p.display());
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(io_err("cannot write to stdout"))?;
        }
    }
    Ok(())
}

fn cmd_plan(args: PlanArgs) -> CliResult<()> {
    let args = with_config(args.clone(), args.io.config.as_deref())?;
    let mut problems = Problems::default();
    let shape = resolve_shape(&args.shape, None, &mut problems);
    problems.finish()?;
    let Shape { n, k, p } = shape.expect("validated");
    let plan = idgs_plan_with_branch(n, k, p, branch(args.mirrored))?;
    emit(&to_json(&plan), &args.io, &format!("plan-n{n}-k{k}-p{p}.json"))
}

/// Replayable record of one `run`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunArgs,
    pub plan: IdgsPlan,
    pub reports: Vec<NodeReport>,
    pub outcome: SearchOutcome,
    /// The verified target, or null.
    pub target: Option<BitString>,
    /// Seconds; present only with `--timing`.
    pub wall_time: Option<f64>,
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let mut args = with_config(args.clone(), args.io.config.as_deref())?;
    let mut problems = Problems::default();
    let target = problems.require(args.target, "target");
    let shape = resolve_shape(&args.shape, args.target, &mut problems);
    let parallelism = args.parallelism.unwrap_or(1);
    if parallelism == 0 {
        problems.push("--parallelism must be at least 1");
    }
    let noise = match (args.channel, args.gamma) {
        (Some(channel), Some(gamma)) => {
            check_gamma(gamma, &mut problems);
            let mut spec = NoiseSpec::new(channel, gamma);
            spec.backend = args.backend.unwrap_or_default();
            Some(spec)
        }
        (None, None) => {
            if args.backend.is_some() {
                problems.push("--backend needs --channel and --gamma");
            }
            None
        }
        _ => {
            problems.push("--channel and --gamma must be given together");
            None
        }
    };
    if args.multiprocess && (noise.is_some() || args.brute_force_tail) {
        problems.push("--multiprocess runs noiseless nodes without --brute-force-tail");
    }
    if args.worker.is_some() && !args.multiprocess {
        problems.push("--worker needs --multiprocess");
    }
    problems.finish()?;
    let (Some(target), Some(Shape { n, k, p })) = (target, shape) else {
        unreachable!("validated")
    };

    // make the stored config complete so it replays to the same record
    args.shape = ShapeArgs {
        n: Some(n),
        k: Some(k),
        p: Some(p),
    };
    args.seed = Some(args.seed.unwrap_or(0));
    args.parallelism = Some(parallelism);

    let f = OracleSpec { n, target }.build()?;
    let cfg = RunConfig {
        base_seed: args.seed.unwrap_or(0),
        parallelism,
        noise,
        brute_force_tail: args.brute_force_tail,
        branch: branch(args.mirrored),
        ..RunConfig::new(n, k, p)
    };
    cfg.validate()?;
    let start = Instant::now();
    let result = if args.multiprocess {
        let worker = match &args.worker {
            Some(w) => w.clone(),
            None => std::env::current_exe().map_err(io_err("cannot locate the idgs executable"))?,
        };
        run_idgs_multiprocess(&f, &cfg, &worker)?
    } else {
        run_idgs(&f, &cfg)?
    };
    let elapsed = start.elapsed().as_secs_f64();
    let found = result.outcome.target();
    let name = format!("run-n{n}-k{k}-p{p}-{target}-seed{}.json", cfg.base_seed);
    let record = RunRecord {
        wall_time: args.timing.then_some(elapsed),
        config: args,
        plan: result.plan,
        reports: result.reports,
        outcome: result.outcome,
        target: found,
    };
    emit(&to_json(&record), &record.config.io, &name)?;
    match found {
        Some(_) => Ok(()),
        None => Err(CliError::Failed("target not found".into())),
    }
}

/// One line of a noise sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub algorithm: String,
    pub backend: String,
    pub p1_bar: Option<f64>,
    pub p2_bar: Option<f64>,
    pub success: f64,
    pub stderr: f64,
}

fn backend_label(a: Backend, b: Backend) -> String {
    if a == b {
        a.name().into()
    } else {
        format!("{}+{}", a.name(), b.name())
    }
}

/// Run a sweep. IDGS rows are scored at the target node; Long rows run on
/// the full register.
pub fn noise_sweep(
    f: &MarkedOracle,
    plan: &IdgsPlan,
    algorithm: Algorithm,
    base: NoiseSpec,
    grid: &[f64],
    seed: u64,
) -> crate::error::Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &gamma in grid {
        let spec = NoiseSpec { gamma, ..base };
        if algorithm != Algorithm::Long {
            let est = idgs_noisy_success(f, plan, &spec, seed)?;
            rows.push(SweepRow {
                gamma,
                algorithm: "idgs".into(),
                backend: backend_label(est.stage1.backend, est.stage2.backend),
                p1_bar: Some(est.stage1.success),
                p2_bar: Some(est.stage2.success),
                success: est.combined,
                stderr: est.combined_stderr,
            });
        }
        if algorithm != Algorithm::Idgs {
            let est = long_noisy_success(f, &spec, seed)?;
            rows.push(SweepRow {
                gamma,
                algorithm: "long".into(),
                backend: est.backend.name().into(),
                p1_bar: None,
                p2_bar: None,
                success: est.success,
                stderr: est.stderr,
            });
        }
    }
    Ok(rows)
}

/// CSV with the fixed header; empty cells for the stage columns of Long rows.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialize");
    }
    if rows.is_empty() {
        w.write_record(["gamma", "algorithm", "backend", "p1_bar", "p2_bar", "success", "stderr"])
            .expect("header");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

fn cmd_noise_sweep(args: SweepArgs) -> CliResult<()> {
    let args = with_config(args.clone(), args.io.config.as_deref())?;
    let mut problems = Problems::default();
    let target = problems.require(args.target, "target");
    let shape = resolve_shape(&args.shape, args.target, &mut problems);
    let channel = problems.require(args.channel, "channel");
    let grid: Vec<f64> = match (&args.gamma, channel) {
        (Some(g), _) => g.clone(),
        (None, Some(ChannelKind::PhaseDamping)) => PD_GRID.to_vec(),
        _ => AD_GRID.to_vec(),
    };
    if grid.is_empty() {
        problems.push("--gamma needs at least one value");
    }
    for &g in &grid {
        check_gamma(g, &mut problems);
    }
    let format = args.format.unwrap_or(Format::Csv);
    if format == Format::Text {
        problems.push("noise-sweep writes csv or json");
    }
    let mut base = NoiseSpec::new(channel.unwrap_or(ChannelKind::AmplitudeDamping), 0.0);
    base.backend = args.backend.unwrap_or_default();
    base.trajectories = args.trajectories.unwrap_or_else(default_trajectories);
    if let Err(e) = base.validate() {
        problems.push(e.to_string());
    }
    problems.finish()?;
    let (Some(target), Some(Shape { n, k, p })) = (target, shape) else {
        unreachable!("validated")
    };
    let f = OracleSpec { n, target }.build()?;
    let plan = idgs_plan_with_branch(n, k, p, Branch::Positive)?;
    let algorithm = args.algorithm.unwrap_or_default();
    let rows = noise_sweep(&f, &plan, algorithm, base, &grid, args.seed.unwrap_or(0))?;
    let ch = match base.channel {
        ChannelKind::PhaseDamping => "pd",
        _ => "ad",
    };
    let (text, ext) = match format {
        Format::Json => (to_json(&rows), "json"),
        _ => (sweep_csv(&rows), "csv"),
    };
    emit(&text, &args.io, &format!("sweep-{ch}-n{n}-k{k}-p{p}.{ext}"))
}

fn cmd_verify(args: VerifyArgs) -> CliResult<()> {
    let args = with_config(args.clone(), args.io.config.as_deref())?;
    let format = args.format.unwrap_or(Format::Text);
    if format == Format::Csv {
        return Err(CliError::Config(vec!["verify-identities writes text or json".into()]));
    }
    let report = verify_identities(&IdentityOptions {
        inject_sign_error: args.inject_sign_error,
    })?;
    let (text, ext) = match format {
        Format::Json => (to_json(&report), "json"),
        _ => (report.to_text(), "txt"),
    };
    emit(&text, &args.io, &format!("identities.{ext}"))?;
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Failed(format!("identity checks failed: {}", failed.join(", "))))
    }
}

fn cmd_depth(args: DepthArgs) -> CliResult<()> {
    let args = with_config(args.clone(), args.io.config.as_deref())?;
    let mut problems = Problems::default();
    let shape = resolve_shape(&args.shape, None, &mut problems);
    let format = args.format.unwrap_or(Format::Text);
    if format == Format::Csv {
        problems.push("depth writes text or json");
    }
    problems.finish()?;
    let Shape { n, k, p } = shape.expect("validated");
    let report = depth_report(n, k, p)?;
    let (text, ext) = match format {
        Format::Json => (to_json(&report), "json"),
        _ => (report.to_table(), "txt"),
    };
    emit(&text, &args.io, &format!("depth-n{n}-k{k}-p{p}.{ext}"))
}

fn cmd_dump(args: DumpArgs) -> CliResult<()> {
    let args = with_config(args.clone(), args.io.config.as_deref())?;
    let mut problems = Problems::default();
    let op = problems.require(args.op, "op (positional)");
    let target = problems.require(args.target, "target");
    problems.finish()?;
    let (op, target) = (op.expect("validated"), target.expect("validated"));
    let w = target.width();
    let f = MarkedOracle::marked(w, target)?;
    let k = args.shape.k.unwrap_or(0);
    let need_p = |problems: &mut Problems| problems.require(args.shape.p, "p");

    let mut problems = Problems::default();
    let circuit = match op {
        DumpOp::G => SearchOperator::g(f)?.compile()?,
        DumpOp::G2 => SearchOperator::g2(f)?.compile()?,
        DumpOp::G1 | DumpOp::G3 => {
            let p = need_p(&mut problems);
            problems.finish()?;
            let p = p.expect("validated");
            let op = if op == DumpOp::G1 {
                SearchOperator::g1(f, p)?
            } else {
                SearchOperator::g3(f, p)?
            };
            op.compile()?
        }
        DumpOp::G4 | DumpOp::Gg => {
            // the operator acts on the node register: n = width + k
            let (theta, phi) = match (args.theta, args.phi) {
                (Some(t), Some(ph)) => (t, ph),
                _ => {
                    let kk = if op == DumpOp::Gg { 0 } else { k };
                    let p = need_p(&mut problems);
                    problems.finish()?;
                    let plan = idgs_plan_with_branch(w + kk, kk, p.expect("validated"), Branch::Positive)?;
                    (args.theta.unwrap_or(plan.theta), args.phi.unwrap_or(plan.phi))
                }
            };
            if op == DumpOp::G4 {
                SearchOperator::g4(f, theta, phi)?.compile()?
            } else {
                SearchOperator::gg(f, theta, phi)?.compile()?
            }
        }
        DumpOp::L => {
            let omega = match args.omega {
                Some(o) => o,
                None => long_params(w)?.omega,
            };
            SearchOperator::l(f, omega)?.compile()?
        }
        DumpOp::Stage1 | DumpOp::Stage2 => {
            let shape = resolve_shape(&ShapeArgs { k: Some(k.max(1)), ..args.shape.clone() }, Some(target), &mut problems);
            problems.finish()?;
            let Shape { n, k, p } = shape.expect("validated");
            let plan = idgs_plan_with_branch(n, k, p, Branch::Positive)?;
            let f_i = f.subfunction(&SubfunctionId::new(target.suffix(k)))?;
            if op == DumpOp::Stage1 {
                stage1_circuit(&plan, &f_i)?
            } else {
                let f_ix = f_i.restrict_prefix(&target.prefix(p))?;
                long_circuit(&f_ix, plan.stage2.omega, plan.stage2.iterations)?
            }
        }
    };
    if let Some(n) = args.shape.n {
        let expect = match op {
            DumpOp::G2 | DumpOp::G3 | DumpOp::G4 => Some(n.saturating_sub(k)),
            DumpOp::G | DumpOp::G1 | DumpOp::Gg => Some(n),
            _ => None,
        };
        if let Some(e) = expect.filter(|&e| e != w) {
            return Err(CliError::Config(vec![format!(
                "--target has {w} bits but this operator acts on {e} qubits (n = {n}, k = {k})"
            )]));
        }
    }
    let name = format!("{}-{target}.txt", serde_json::to_value(op).expect("op").as_str().unwrap_or("op"));
    emit(&circuit.to_text(), &args.io, &name)
}

fn cmd_node() -> CliResult<()> {
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    serve_node_requests(stdin, stdout).map_err(io_err("worker I/O failed"))
}

/// Dispatch a parsed command line.
pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Run(a) => cmd_run(a),
        Command::NoiseSweep(a) => cmd_noise_sweep(a),
        Command::VerifyIdentities(a) => cmd_verify(a),
        Command::Depth(a) => cmd_depth(a),
        Command::DumpCircuit(a) => cmd_dump(a),
        Command::Node => cmd_node(),
    }
}

/// Entry point for the binary: parse, run, report, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
