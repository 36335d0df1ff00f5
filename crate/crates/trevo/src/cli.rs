//! The `trevo` command.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (for `validate`: no error diagnostics) |
//! | 1 | `validate` found error diagnostics |
//! | 2 | bad command line |
//! | 3 | a file or directory could not be read or written |
//! | 4 | the dataset failed to load |
//! | 5 | the query, selection or simulation parameters were rejected |
//! | 6 | the server could not start |

use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trevo_core::dataset::validate_dir;
use trevo_core::pattern::{preset, MetricSpec, Target};
use trevo_core::summaries::DEFAULT_BIN_COUNT;
use trevo_core::synth::{simulate, Injection, SimConfig, DEFAULT_LAMBDA};
use trevo_core::{Dataset, DatasetError, Severity, Strictness};

use crate::api::{app, AppState};
use crate::error::ApiError;
use crate::service::{
    bins_response, build_selection, rank_response, BinsRequest, PredicateSpec, RankRequest, RankResponse,
    SelectionRequest, Session, SortKey,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_LOAD: u8 = 4;
pub const EXIT_QUERY: u8 = 5;
pub const EXIT_SERVER: u8 = 6;

/// Environment variable that overrides `serve --port`.
pub const PORT_ENV: &str = "TREVO_PORT";

#[derive(Debug, Parser)]
#[command(name = "trevo", version, about = "Phylogenetic trait analytics: validation, ranking, binning, simulation and the JSON API")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dataset directory and list every problem found.
    Validate(ValidateArgs),
    /// Rank all leaf pairs against a pattern.
    Rank(RankArgs),
    /// Bin a selection by time and summarize its traits.
    Bins(BinsArgs),
    /// Write a synthetic dataset.
    Simulate(SimulateArgs),
    /// Serve the JSON API (and optionally a UI bundle).
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ValidateFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RankFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BinsFormat {
    Json,
}

#[derive(Debug, Args)]
struct Load {
    /// Dataset directory holding tree.nwk and traits.csv.
    dir: PathBuf,
    /// Relax the rule that leaves are exact and ancestors carry intervals.
    #[arg(long)]
    lenient: bool,
}

impl Load {
    fn strictness(&self) -> Strictness {
        if self.lenient {
            Strictness::Lenient
        } else {
            Strictness::Strict
        }
    }
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    load: Load,
    /// `text` writes diagnostics to stderr; `json` writes them to stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: ValidateFormat,
}

/// `high`, `low` or `ignore`, optionally followed by `:weight`.
fn parse_metric(s: &str) -> Result<MetricSpec, String> {
    let (t, w) = match s.split_once(':') {
        Some((t, w)) => (t, w.parse::<f64>().map_err(|e| format!("bad weight '{w}': {e}"))?),
        None => (s, 1.0),
    };
    let target = match t {
        "high" => Target::High,
        "low" => Target::Low,
        "ignore" => Target::Ignore,
        _ => return Err(format!("target must be high, low or ignore, got '{t}'")),
    };
    Ok(MetricSpec::new(target, w))
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    load: Load,
    /// Preset pattern; the metric flags below override its targets.
    #[arg(long, default_value = "convergence")]
    preset: String,
    /// Continuous trait that drives the ranking (default: the first one).
    #[arg(long = "trait")]
    trait_name: Option<String>,
    /// Distance target, e.g. `high` or `high:2`.
    #[arg(long, value_parser = parse_metric)]
    distance: Option<MetricSpec>,
    /// Delta target, e.g. `high` or `low:0.5`.
    #[arg(long, value_parser = parse_metric)]
    delta: Option<MetricSpec>,
    /// Closeness target, e.g. `low`.
    #[arg(long, value_parser = parse_metric)]
    closeness: Option<MetricSpec>,
    /// Share of MRCA time (vs edge count) in the distance metric.
    #[arg(long)]
    alpha: Option<f64>,
    /// Drop pairs whose MRCA is more recent than this.
    #[arg(long)]
    min_distance: Option<f64>,
    #[arg(long, default_value_t = 20)]
    top: usize,
    #[arg(long, value_enum, default_value = "score")]
    sort: SortArg,
    #[arg(long, value_enum, default_value = "json")]
    format: RankFormat,
    /// Leave trajectories out of the JSON output.
    #[arg(long)]
    no_trajectories: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SortArg {
    Score,
    Frequency,
}

#[derive(Debug, Args)]
struct BinsArgs {
    #[command(flatten)]
    load: Load,
    /// Select leaves by this trait (with --states or --min/--max).
    #[arg(long)]
    selection_trait: Option<String>,
    /// Comma-separated states of a discrete selection trait.
    #[arg(long, value_delimiter = ',')]
    states: Option<Vec<String>>,
    #[arg(long, allow_negative_numbers = true)]
    min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    max: Option<f64>,
    /// Select the clade below this node instead.
    #[arg(long, conflicts_with = "selection_trait")]
    clade: Option<String>,
    /// Select these comma-separated leaves instead.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["selection_trait", "clade"])]
    leaves: Option<Vec<String>>,
    #[arg(long, default_value_t = DEFAULT_BIN_COUNT)]
    k: usize,
    /// Comma-separated traits to summarize (default: all).
    #[arg(long, value_delimiter = ',')]
    traits: Option<Vec<String>>,
    /// Discrete trait that splits each bin into categories.
    #[arg(long)]
    color_key: Option<String>,
    #[arg(long, default_value_t = 0)]
    jitter_seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: BinsFormat,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 64)]
    leaves: usize,
    /// Number of continuous traits; a discrete `region` trait is added.
    #[arg(long, default_value_t = 6)]
    traits: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Brownian-motion rate.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    sigma: f64,
    /// Make one leaf pair convergent in the first continuous trait.
    #[arg(long)]
    inject_convergence: bool,
    /// The pair to make convergent, as `A,B` (default: chosen from the tree).
    #[arg(long, value_delimiter = ',', num_args = 1, requires = "inject_convergence")]
    pair: Option<Vec<String>>,
    /// Convergence strength in [0, 1].
    #[arg(long, default_value_t = DEFAULT_LAMBDA, requires = "inject_convergence", allow_negative_numbers = true)]
    lambda: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Dataset directory; without one every data endpoint answers 409.
    dir: Option<PathBuf>,
    #[arg(long)]
    lenient: bool,
    /// Listening port; the TREVO_PORT environment variable takes precedence.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// Directory of static UI files served at `/`.
    #[arg(long = "static")]
    static_dir: Option<PathBuf>,
}

/// A failure with its exit code; the message goes to stderr.
struct Failure(u8, String);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure(EXIT_QUERY, e.to_string())
    }
}

fn io_failure(what: &str, e: io::Error) -> Failure {
    Failure(EXIT_IO, format!("{what}: {e}"))
}

fn load_failure(e: DatasetError) -> Failure {
    match e {
        DatasetError::Io { .. } => Failure(EXIT_IO, e.to_string()),
        DatasetError::Invalid(diags) => {
            let lines: Vec<String> = diags.iter().filter(|d| d.severity == Severity::Error).map(|d| d.message.clone()).collect();
            Failure(EXIT_LOAD, lines.join("\n"))
        }
        e => Failure(EXIT_LOAD, e.to_string()),
    }
}

fn load(l: &Load) -> Result<Dataset, Failure> {
    Dataset::load_dir(&l.dir, l.strictness()).map_err(load_failure)
}

fn write_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    writeln!(out).map_err(|e| io_failure("stdout", e))
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("trevo: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::Rank(a) => rank(a),
        Command::Bins(a) => bins(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Serve(a) => serve(a),
    }
}

fn validate(a: ValidateArgs) -> Result<u8, Failure> {
    let diags = validate_dir(&a.load.dir, a.load.strictness()).map_err(load_failure)?;
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    match a.format {
        ValidateFormat::Json => write_json(&diags)?,
        ValidateFormat::Text => {
            for d in &diags {
                let sev = match d.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                let code = serde_json::to_value(d.code).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                eprintln!("{sev}[{code}]: {}", d.message);
            }
            eprintln!("{}: {errors} error(s), {} warning(s)", a.load.dir.display(), diags.len() - errors);
        }
    }
    Ok(if errors > 0 { EXIT_INVALID } else { EXIT_OK })
}

fn rank(a: RankArgs) -> Result<u8, Failure> {
    let ds = load(&a.load)?;
    let mut query = preset(&a.preset).map_err(ApiError::from)?.query;
    if a.distance.is_some() || a.delta.is_some() || a.closeness.is_some() || a.alpha.is_some() {
        query.preset_id = None;
    }
    query.distance = a.distance.unwrap_or(query.distance);
    query.delta = a.delta.unwrap_or(query.delta);
    query.closeness = a.closeness.unwrap_or(query.closeness);
    query.distance_mix = a.alpha.unwrap_or(query.distance_mix);
    let req = RankRequest {
        preset: None,
        query: Some(query),
        trait_name: a.trait_name,
        min_distance: a.min_distance,
        top: Some(a.top),
        offset: 0,
        sort: match a.sort {
            SortArg::Score => SortKey::Score,
            SortArg::Frequency => SortKey::Frequency,
        },
        trajectories: !a.no_trajectories && matches!(a.format, RankFormat::Json),
    };
    let out = rank_response(&Session::new(ds), &req)?;
    match a.format {
        RankFormat::Csv => write_rank_csv(&out)?,
        RankFormat::Json => write_json(&out)?,
    }
    Ok(EXIT_OK)
}

fn write_rank_csv(r: &RankResponse) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    let fail = |e: csv::Error| Failure(EXIT_IO, e.to_string());
    w.write_record([
        "rank", "a", "b", "mrca", "score", "distance_time", "topo_edges", "delta", "closeness", "top_rank_frequency",
    ])
    .map_err(fail)?;
    for c in &r.pairs {
        let p = &c.pair;
        let m = &p.metrics;
        w.write_record([
            p.rank.to_string(),
            p.a.clone(),
            p.b.clone(),
            p.mrca.clone(),
            p.score.to_string(),
            m.distance_time.to_string(),
            m.topo_edges.to_string(),
            m.delta.to_string(),
            m.closeness.to_string(),
            p.top_rank_frequency.to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| io_failure("stdout", e))
}

fn bins(a: BinsArgs) -> Result<u8, Failure> {
    let BinsFormat::Json = a.format;
    let ds = load(&a.load)?;
    let predicate = a.selection_trait.map(|t| PredicateSpec { trait_name: t, states: a.states, min: a.min, max: a.max });
    let name = "cli".to_string();
    let (node, leaves) = match (&predicate, a.clade, a.leaves) {
        (None, None, None) => (Some(ds.tree().label(ds.tree().root()).to_string()), None),
        (_, c, l) => (c, l),
    };
    let sel_req = SelectionRequest { name: name.clone(), origin: None, predicate, node, leaves, color_key: None };
    let sel = build_selection(&ds, &sel_req)?;
    let req = BinsRequest {
        selection: name,
        k: a.k,
        traits: a.traits,
        color_key: a.color_key,
        jitter_seed: a.jitter_seed,
        histogram_bins: None,
        align_with: None,
    };
    write_json(&bins_response(&ds, &sel, None, &req)?)?;
    Ok(EXIT_OK)
}

fn simulate_cmd(a: SimulateArgs) -> Result<u8, Failure> {
    let pair = match a.pair {
        Some(p) if p.len() == 2 => Some((p[0].clone(), p[1].clone())),
        Some(_) => return Err(Failure(EXIT_USAGE, "--pair takes exactly two leaves, as A,B".into())),
        None => None,
    };
    let cfg = SimConfig {
        n_leaves: a.leaves,
        n_traits: a.traits,
        sigma: a.sigma,
        seed: a.seed,
        inject: a.inject_convergence.then_some(Injection { pair, lambda: a.lambda }),
    };
    let sim = simulate(&cfg).map_err(|e| Failure(EXIT_QUERY, e.to_string()))?;
    sim.dataset.write_dir(&a.out, Some(&sim.meta)).map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    let mut msg = format!("wrote {} leaves, {} traits to {}", a.leaves, a.traits, a.out.display());
    if let Some((x, y)) = &sim.injected {
        msg.push_str(&format!("; convergent pair {x},{y}"));
    }
    eprintln!("{msg}");
    Ok(EXIT_OK)
}

/// `TREVO_PORT` wins over `--port` when it holds a valid port.
fn effective_port(flag: u16) -> Result<u16, Failure> {
    match std::env::var(PORT_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Failure(EXIT_USAGE, format!("{PORT_ENV}='{v}' is not a port number"))),
        Err(_) => Ok(flag),
    }
}

fn serve(a: ServeArgs) -> Result<u8, Failure> {
    let strictness = if a.lenient { Strictness::Lenient } else { Strictness::Strict };
    let dataset = a.dir.as_deref().map(|d| Dataset::load_dir(d, strictness)).transpose().map_err(load_failure)?;
    if let Some(dir) = &a.static_dir {
        if !dir.is_dir() {
            return Err(Failure(EXIT_IO, format!("static directory {} does not exist", dir.display())));
        }
    }
    let addr = SocketAddr::new(a.bind, effective_port(a.port)?);
    let router = app(Arc::new(AppState::new(dataset)), a.static_dir.as_deref());
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(EXIT_SERVER, e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Failure(EXIT_SERVER, format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| Failure(EXIT_SERVER, e.to_string()))?;
        eprintln!("trevo: serving {} on http://{local}", describe(a.dir.as_deref()));
        axum::serve(listener, router)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure(EXIT_SERVER, e.to_string()))
    })?;
    Ok(EXIT_OK)
}

fn describe(dir: Option<&Path>) -> String {
    dir.map_or_else(|| "no dataset".to_string(), |d| d.display().to_string())
}
