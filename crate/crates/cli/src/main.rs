//! Command-line front end for the cardsketch library.
//!
//! One binary drives the whole toolkit: building sketches from newline-
//! delimited input, evaluating privacy-accuracy bounds, emitting privacy-loss
//! curves, running the Monte-Carlo ignore-probability survey, mounting the
//! three attacks, serving the sketch store over HTTP, and rotating salts.
//!
//! Every run prints its resolved configuration (seed included) to stderr as
//! one JSON line, so any output can be reproduced from the log alone.
//!
//! Exit codes are a stable contract: 0 success, 2 domain error (bad
//! parameters, refused operation), 3 I/O error, 4 policy violation.

mod client;
mod server;

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cardsketch::attack::{
    external_api_attack, intersection_attack, membership_attack, simulate_ignore_probabilities,
    AttackError, ExternalAttackConfig, SimulationConfig,
};
use cardsketch::bounds::{hll_privacy_csv, min_std_error_curve, curve_csv, DomainError, Regime};
use cardsketch::service::{ApiMode, ApiPolicy, ServiceError, SketchService};
use cardsketch::store::{RotationOutcome, SketchStore, StoreError};
use cardsketch::{hash_element, Algo, Salt, Sketch, SketchError};
use clap::{Args, Parser, Subcommand};

/// Most add operations a desk-scale simulation may perform.
const DESK_ADD_OP_BUDGET: u128 = 100_000_000;

/// Top-level failure, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid parameters or a refused domain operation. Exit code 2.
    Domain(String),
    /// Filesystem or network failure. Exit code 3.
    Io(String),
    /// A service policy refused the operation. Exit code 4.
    Policy(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 2,
            CliError::Io(_) => 3,
            CliError::Policy(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Policy(m) => write!(f, "{m}"),
        }
    }
}

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> CliError {
        CliError::Domain(e.to_string())
    }
}

impl From<SketchError> for CliError {
    fn from(e: SketchError) -> CliError {
        CliError::Domain(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> CliError {
        match e {
            StoreError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> CliError {
        match e {
            ServiceError::PolicyViolation(m) => CliError::Policy(m),
            ServiceError::Io(io) => CliError::Io(io.to_string()),
            ServiceError::Store(StoreError::Io(io)) => CliError::Io(io.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> CliError {
        match e {
            AttackError::Service(m) if m.starts_with("policy violation") => CliError::Policy(m),
            AttackError::Service(m) if m.starts_with("transport") => CliError::Io(m),
            other => CliError::Domain(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cardsketch",
    version,
    about = "Cardinality sketches, their privacy bounds, and the attacks against them"
)]
struct Cli {
    /// Seed for randomized subcommands, echoed in the resolved config.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Worker threads for parallel simulation; 0 uses the default pool.
    /// Thread count never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Emit machine-readable JSON on stdout instead of human text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sketch from newline-delimited UTF-8 elements and print its estimate.
    Build(BuildArgs),
    /// Emit the minimum-standard-error curve forced by a deniability guarantee.
    Bounds(BoundsArgs),
    /// Emit average HyperLogLog privacy loss over a grid of cardinalities.
    HllPrivacy(HllPrivacyArgs),
    /// Survey how often sketches ignore random non-members, by percentile.
    Simulate(SimulateArgs),
    /// Run one of the attacks against sketches or a sketch service.
    #[command(subcommand)]
    Attack(AttackCommand),
    /// Serve a sketch store over HTTP.
    Serve(ServeArgs),
    /// Re-key every stored sketch under a new salt, from raw streams.
    Rotate(RotateArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Input file, one element per line; empty lines are skipped.
    input: PathBuf,
    /// Sketch algorithm: kmv, pcsa, loglog or hll.
    #[arg(long, default_value = "hll")]
    algo: String,
    /// Register exponent for loglog/hll (2^p registers).
    #[arg(long)]
    p: Option<u8>,
    /// Size parameter for kmv/pcsa.
    #[arg(long)]
    k: Option<u32>,
    /// File whose raw bytes key the element hash; defaults to the public salt.
    #[arg(long)]
    salt_file: Option<PathBuf>,
    /// Where to write the serialized sketch.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    /// Guarantee flavor: pure, delta or average.
    #[arg(long, default_value = "pure")]
    regime: String,
    /// Privacy parameter, strictly positive.
    #[arg(long)]
    epsilon: f64,
    /// Additive relaxation, required by the delta regime.
    #[arg(long)]
    delta: Option<f64>,
    /// Cardinality above which the guarantee must hold.
    #[arg(long, default_value_t = 100)]
    min_cardinality: u64,
    #[arg(long, default_value_t = 100)]
    n_from: u64,
    #[arg(long, default_value_t = 20_000)]
    n_to: u64,
    #[arg(long, default_value_t = 100)]
    n_step: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HllPrivacyArgs {
    /// Register exponents to tabulate.
    #[arg(long, value_delimiter = ',', default_value = "9,12,15")]
    p: Vec<u32>,
    #[arg(long, default_value_t = 100)]
    n_from: u64,
    #[arg(long, default_value_t = 1_000_000)]
    n_to: u64,
    /// Number of geometrically spaced cardinalities between n-from and n-to.
    #[arg(long, default_value_t = 25)]
    points: u32,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// desk keeps the run under 1e8 add operations; full lifts the cap.
    #[arg(long, default_value = "desk")]
    scale: String,
    /// Register exponent of the surveyed HyperLogLog sketches.
    #[arg(long)]
    p: Option<u8>,
    /// Sketch cardinalities to survey.
    #[arg(long, value_delimiter = ',')]
    cardinalities: Option<Vec<u64>>,
    /// Random targets per cardinality (at least 100).
    #[arg(long)]
    targets: Option<u32>,
    /// Random sketches per cardinality (at least 100).
    #[arg(long)]
    sketches: Option<u32>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full JSON report (config plus rows) here.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AttackCommand {
    /// Decide membership of a target from one sketch file.
    Membership(MembershipArgs),
    /// Narrow down the shared element of several sketch files.
    Intersect(IntersectArgs),
    /// Decide membership through an estimates-only HTTP service.
    External(ExternalArgs),
}

#[derive(Args)]
struct MembershipArgs {
    /// Serialized sketch to probe.
    sketch: PathBuf,
    /// The element whose membership is in question.
    #[arg(long)]
    target: String,
    /// Attacker's prior membership belief, strictly inside (0, 1).
    #[arg(long, default_value_t = 0.5)]
    prior: f64,
    /// Ignore probability to use for the update; estimated from the sketch
    /// when omitted.
    #[arg(long)]
    ignore_prob: Option<f64>,
    /// Salt the sketch was built under; must match its fingerprint.
    #[arg(long)]
    salt_file: Option<PathBuf>,
}

#[derive(Args)]
struct IntersectArgs {
    /// Two or more serialized sketches of identical shape and salt.
    #[arg(num_args = 2..)]
    sketches: Vec<PathBuf>,
    /// Optional known element to test against the candidate constraints.
    #[arg(long)]
    target: Option<String>,
    /// Salt used to hash --target; must match the sketches.
    #[arg(long)]
    salt_file: Option<PathBuf>,
}

#[derive(Args)]
struct ExternalArgs {
    /// Base URL of a running sketch service, e.g. http://127.0.0.1:8080.
    #[arg(long)]
    url: String,
    /// Victim sketch key as dimension/period; repeatable.
    #[arg(long = "key", required = true)]
    keys: Vec<String>,
    /// The element whose membership is in question.
    #[arg(long)]
    target: String,
    /// Sketch shape of the victim sketches: kmv, pcsa, loglog or hll.
    #[arg(long, default_value = "hll")]
    algo: String,
    #[arg(long)]
    p: Option<u8>,
    #[arg(long)]
    k: Option<u32>,
    /// Attacker-controlled dimension the probe sketch is ingested under.
    #[arg(long, default_value = "probe")]
    probe_dimension: String,
    #[arg(long, default_value = "2000-01-01")]
    probe_period: String,
    /// Rounding granularity to request from the service.
    #[arg(long)]
    rounding: Option<u64>,
}

#[derive(Args)]
struct ServeArgs {
    /// Sketch store root directory.
    #[arg(long)]
    root: PathBuf,
    /// Bind address; port 0 picks a free port, printed on startup.
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Refuse sketch-byte endpoints and audit every request.
    #[arg(long)]
    restricted: bool,
    /// Estimate rounding granularity the policy enforces.
    #[arg(long, default_value_t = 1)]
    rounding: u64,
    /// Audit log path (JSON lines); restricted mode only.
    #[arg(long)]
    audit_log: Option<PathBuf>,
    /// Service salt; defaults to the public salt.
    #[arg(long)]
    salt_file: Option<PathBuf>,
    /// HTTP worker threads.
    #[arg(long, default_value_t = 4)]
    workers: usize,
}

#[derive(Args)]
struct RotateArgs {
    /// Sketch store root directory.
    #[arg(long)]
    root: PathBuf,
    /// File whose raw bytes become the new salt.
    #[arg(long)]
    new_salt_file: PathBuf,
    /// Pretend raw element streams are unavailable; the rotation then
    /// refuses and lists every stranded sketch.
    #[arg(long)]
    no_raw: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build(ref args) => cmd_build(&cli, args),
        Command::Bounds(ref args) => cmd_bounds(&cli, args),
        Command::HllPrivacy(ref args) => cmd_hll_privacy(&cli, args),
        Command::Simulate(ref args) => cmd_simulate(&cli, args),
        Command::Attack(AttackCommand::Membership(ref args)) => cmd_attack_membership(&cli, args),
        Command::Attack(AttackCommand::Intersect(ref args)) => cmd_attack_intersect(&cli, args),
        Command::Attack(AttackCommand::External(ref args)) => cmd_attack_external(&cli, args),
        Command::Serve(ref args) => cmd_serve(&cli, args),
        Command::Rotate(ref args) => cmd_rotate(&cli, args),
    }
}

/// Prints the resolved run configuration as one JSON line on stderr.
fn echo_config(config: serde_json::Value) {
    eprintln!("config: {config}");
}

fn load_salt(path: Option<&Path>) -> Result<Salt, CliError> {
    match path {
        None => Ok(Salt::default_public()),
        Some(p) => {
            let bytes = fs::read(p)
                .map_err(|e| CliError::Io(format!("read salt file {}: {e}", p.display())))?;
            Ok(Salt::new(&bytes)?)
        }
    }
}

/// Resolves --algo/--p/--k into a sketch shape.
fn resolve_shape(algo: &str, p: Option<u8>, k: Option<u32>) -> Result<(Algo, u32), CliError> {
    let algo: Algo = algo.parse()?;
    let param = match algo {
        Algo::Kmv | Algo::Pcsa => {
            if p.is_some() {
                return Err(CliError::Domain(format!(
                    "{} takes --k, not --p",
                    algo.name()
                )));
            }
            k.unwrap_or(1024)
        }
        Algo::LogLog | Algo::Hll => {
            if k.is_some() {
                return Err(CliError::Domain(format!(
                    "{} takes --p, not --k",
                    algo.name()
                )));
            }
            u32::from(p.unwrap_or(12))
        }
    };
    Ok((algo, param))
}

fn read_elements(path: &Path) -> Result<Vec<Vec<u8>>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Io(format!("open {}: {e}", path.display())))?;
    let mut elements = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CliError::Io(format!("read {}: {e}", path.display())))?;
        if !line.is_empty() {
            elements.push(line.into_bytes());
        }
    }
    Ok(elements)
}

fn load_sketch(path: &Path) -> Result<Sketch, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Io(format!("read {}: {e}", path.display())))?;
    Ok(Sketch::deserialize(&bytes)?)
}

/// Writes to the file when given, else to stdout.
fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Io(format!("write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_build(cli: &Cli, args: &BuildArgs) -> Result<(), CliError> {
    let (algo, param) = resolve_shape(&args.algo, args.p, args.k)?;
    echo_config(serde_json::json!({
        "command": "build",
        "input": args.input,
        "algo": algo.name(),
        "param": param,
        "salt_file": args.salt_file,
        "out": args.out,
        "seed": cli.seed,
    }));

    let salt = load_salt(args.salt_file.as_deref())?;
    let elements = read_elements(&args.input)?;
    let mut sketch = Sketch::empty(algo, param, &salt)?;
    for element in &elements {
        sketch.add(element, &salt)?;
    }
    let estimate = sketch.estimate();
    let bytes = sketch.serialize();
    fs::write(&args.out, &bytes)
        .map_err(|e| CliError::Io(format!("write {}: {e}", args.out.display())))?;

    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "elements": elements.len(),
                "algo": algo.name(),
                "param": param,
                "estimate": estimate,
                "out": args.out,
                "bytes": bytes.len(),
            })
        );
    } else {
        println!("read {} elements from {}", elements.len(), args.input.display());
        println!("estimate: {estimate:.1}");
        println!(
            "wrote {} sketch ({} bytes) to {}",
            algo.name(),
            bytes.len(),
            args.out.display()
        );
    }
    Ok(())
}

fn cmd_bounds(cli: &Cli, args: &BoundsArgs) -> Result<(), CliError> {
    let regime: Regime = args.regime.parse().map_err(CliError::Domain)?;
    echo_config(serde_json::json!({
        "command": "bounds",
        "regime": args.regime.to_ascii_lowercase(),
        "epsilon": args.epsilon,
        "delta": args.delta,
        "min_cardinality": args.min_cardinality,
        "n_from": args.n_from,
        "n_to": args.n_to,
        "n_step": args.n_step,
        "seed": cli.seed,
    }));

    if args.n_step == 0 {
        return Err(CliError::Domain("--n-step must be positive".into()));
    }
    if args.n_from > args.n_to {
        return Err(CliError::Domain(format!(
            "--n-from {} exceeds --n-to {}",
            args.n_from, args.n_to
        )));
    }
    let ns: Vec<u64> = (args.n_from..=args.n_to).step_by(args.n_step as usize).collect();
    let points = min_std_error_curve(
        regime,
        args.epsilon,
        args.delta,
        args.min_cardinality,
        &ns,
    )?;
    emit(args.out.as_deref(), &curve_csv(&points))
}

/// Geometrically spaced integer grid from `from` to `to`, deduplicated.
fn geometric_grid(from: u64, to: u64, points: u32) -> Result<Vec<u64>, CliError> {
    if from == 0 {
        return Err(CliError::Domain("--n-from must be positive".into()));
    }
    if from > to {
        return Err(CliError::Domain(format!("--n-from {from} exceeds --n-to {to}")));
    }
    if points == 0 {
        return Err(CliError::Domain("--points must be positive".into()));
    }
    if points == 1 || from == to {
        return Ok(vec![from]);
    }
    let (lo, span) = ((from as f64).ln(), (to as f64).ln() - (from as f64).ln());
    let mut grid: Vec<u64> = (0..points)
        .map(|i| (lo + span * f64::from(i) / f64::from(points - 1)).exp().round() as u64)
        .collect();
    grid.dedup();
    Ok(grid)
}

fn cmd_hll_privacy(cli: &Cli, args: &HllPrivacyArgs) -> Result<(), CliError> {
    echo_config(serde_json::json!({
        "command": "hll-privacy",
        "p": args.p,
        "n_from": args.n_from,
        "n_to": args.n_to,
        "points": args.points,
        "seed": cli.seed,
    }));
    let ns = geometric_grid(args.n_from, args.n_to, args.points)?;
    let csv = hll_privacy_csv(&args.p, &ns)?;
    emit(args.out.as_deref(), &csv)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let mut config = match args.scale.to_ascii_lowercase().as_str() {
        "desk" => SimulationConfig::desk(cli.seed),
        "full" => SimulationConfig::full(cli.seed),
        other => {
            return Err(CliError::Domain(format!(
                "unknown scale '{other}' (desk|full)"
            )))
        }
    };
    if let Some(p) = args.p {
        config.p = p;
    }
    if let Some(cards) = &args.cardinalities {
        config.cardinalities = cards.clone();
    }
    if let Some(t) = args.targets {
        config.num_targets = t;
    }
    if let Some(s) = args.sketches {
        config.num_sketches = s;
    }
    config.threads = cli.threads;
    echo_config(serde_json::json!({
        "command": "simulate",
        "scale": args.scale.to_ascii_lowercase(),
        "config": config,
    }));

    if args.scale.eq_ignore_ascii_case("desk") && config.add_operations() > DESK_ADD_OP_BUDGET {
        return Err(CliError::Domain(format!(
            "desk scale caps the survey at {DESK_ADD_OP_BUDGET} add operations, \
             this configuration needs {}; pass --scale full to lift the cap",
            config.add_operations()
        )));
    }

    let report = simulate_ignore_probabilities(&config)?;
    if let Some(path) = &args.json_out {
        fs::write(path, report.to_json())
            .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
    }
    emit(args.out.as_deref(), &report.to_csv())
}

fn cmd_attack_membership(cli: &Cli, args: &MembershipArgs) -> Result<(), CliError> {
    echo_config(serde_json::json!({
        "command": "attack membership",
        "sketch": args.sketch,
        "target": args.target,
        "prior": args.prior,
        "ignore_prob": args.ignore_prob,
        "salt_file": args.salt_file,
        "seed": cli.seed,
    }));
    let salt = load_salt(args.salt_file.as_deref())?;
    let sketch = load_sketch(&args.sketch)?;
    let finding = membership_attack(
        &sketch,
        args.target.as_bytes(),
        &salt,
        args.prior,
        args.ignore_prob,
    )?;

    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "changed": finding.changed,
                "posterior": finding.posterior,
                "prior": args.prior,
                "ignore_probability": finding.ignore_probability,
                "epsilon": finding.epsilon,
            })
        );
    } else {
        println!(
            "sketch: {} (param {}), estimate {:.1}",
            sketch.algo().name(),
            sketch.param(),
            sketch.estimate()
        );
        if finding.changed {
            println!("adding the target would change the sketch, so it is not a member");
        } else {
            println!(
                "the sketch ignores the target (ignore probability {:.4}, epsilon {:.4})",
                finding.ignore_probability, finding.epsilon
            );
        }
        println!(
            "posterior membership probability: {:.4} (prior {:.4})",
            finding.posterior, args.prior
        );
        println!(
            "verdict: {}",
            if finding.posterior >= 0.5 {
                "likely a member"
            } else {
                "likely not a member"
            }
        );
    }
    Ok(())
}

fn cmd_attack_intersect(cli: &Cli, args: &IntersectArgs) -> Result<(), CliError> {
    echo_config(serde_json::json!({
        "command": "attack intersect",
        "sketches": args.sketches,
        "target": args.target,
        "salt_file": args.salt_file,
        "seed": cli.seed,
    }));
    let sketches = args
        .sketches
        .iter()
        .map(|p| load_sketch(p))
        .collect::<Result<Vec<_>, _>>()?;
    let true_hash = match &args.target {
        None => None,
        Some(target) => {
            let salt = load_salt(args.salt_file.as_deref())?;
            if let Some(first) = sketches.first() {
                if first.salt_fingerprint() != salt.fingerprint() {
                    return Err(CliError::Domain(
                        "the salt does not match the sketches, so the target cannot be hashed \
                         against them"
                            .into(),
                    ));
                }
            }
            Some(hash_element(target.as_bytes(), &salt)?)
        }
    };
    let finding = intersection_attack(&sketches, true_hash)?;

    if cli.json {
        println!("{}", serde_json::to_string(&finding).expect("finding serializes"));
    } else {
        println!(
            "intersected {} {} sketches",
            finding.num_sketches_used,
            finding.algo.name()
        );
        println!(
            "candidate constraints narrow the shared element to {} possibilities",
            finding.candidate_count
        );
        match finding.contains_target {
            Some(true) => println!("the known target satisfies every constraint"),
            Some(false) => println!("the known target is ruled out"),
            None => {}
        }
    }
    Ok(())
}

fn cmd_attack_external(cli: &Cli, args: &ExternalArgs) -> Result<(), CliError> {
    let (algo, param) = resolve_shape(&args.algo, args.p, args.k)?;
    echo_config(serde_json::json!({
        "command": "attack external",
        "url": args.url,
        "keys": args.keys,
        "target": args.target,
        "algo": algo.name(),
        "param": param,
        "probe_dimension": args.probe_dimension,
        "probe_period": args.probe_period,
        "rounding": args.rounding,
        "seed": cli.seed,
    }));
    let base_keys = args
        .keys
        .iter()
        .map(|k| {
            k.split_once('/')
                .map(|(d, p)| (d.to_string(), p.to_string()))
                .ok_or_else(|| {
                    CliError::Domain(format!("key '{k}' is not of the form dimension/period"))
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut client = client::HttpClient::new(&args.url);
    let cfg = ExternalAttackConfig {
        base_keys: &base_keys,
        probe_dimension: &args.probe_dimension,
        probe_period: &args.probe_period,
        algo,
        param,
        rounding: args.rounding,
    };
    let finding = external_api_attack(&mut client, &cfg, args.target.as_bytes())?;

    if cli.json {
        println!(
            "{}",
            serde_json::json!({
                "estimate_without_target": finding.estimate_without_target,
                "estimate_with_target": finding.estimate_with_target,
                "guess_member": finding.guess_member,
            })
        );
    } else {
        println!(
            "estimate without the probe: {}",
            finding.estimate_without_target
        );
        println!("estimate with the probe:    {}", finding.estimate_with_target);
        println!(
            "verdict: {}",
            if finding.guess_member {
                "the probe moved nothing, so the target looks like a member"
            } else {
                "the probe moved the estimate, so the target is not a member"
            }
        );
    }
    Ok(())
}

fn cmd_serve(cli: &Cli, args: &ServeArgs) -> Result<(), CliError> {
    echo_config(serde_json::json!({
        "command": "serve",
        "root": args.root,
        "addr": args.addr,
        "restricted": args.restricted,
        "rounding": args.rounding,
        "audit_log": args.audit_log,
        "salt_file": args.salt_file,
        "workers": args.workers,
        "seed": cli.seed,
    }));
    let salt = load_salt(args.salt_file.as_deref())?;
    let store = SketchStore::open(&args.root)?;
    let policy = ApiPolicy {
        mode: if args.restricted {
            ApiMode::Restricted
        } else {
            ApiMode::Raw
        },
        rounding: args.rounding,
        audit_log_path: args.audit_log.clone(),
    };
    let service = SketchService::new(store, salt, policy)?;
    server::serve(service, &args.addr, args.workers)
}

fn cmd_rotate(cli: &Cli, args: &RotateArgs) -> Result<(), CliError> {
    echo_config(serde_json::json!({
        "command": "rotate",
        "root": args.root,
        "new_salt_file": args.new_salt_file,
        "no_raw": args.no_raw,
        "seed": cli.seed,
    }));
    let new_salt = load_salt(Some(&args.new_salt_file))?;
    let store = SketchStore::open(&args.root)?;
    let outcome = store.rotate_salt(&new_salt, !args.no_raw)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome).expect("outcome serializes")
    );
    match outcome {
        RotationOutcome::Rotated { .. } => Ok(()),
        RotationOutcome::Refused { stranded } => Err(CliError::Domain(format!(
            "rotation refused, {} sketches have no raw stream to rebuild from",
            stranded.len()
        ))),
    }
}
