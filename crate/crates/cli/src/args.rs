use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "cachelab",
    version,
    about = "Cache hit-ratio experiments: simulation, exact solvers, approximations and bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate a request trace and write it as CSV.
    Gen(GenArgs),
    /// Simulate policies on a trace for every capacity and replication.
    Sim(Common),
    /// Hit-ratio curves over a capacity grid, with analytic columns.
    Sweep(Common),
    /// Exact steady-state hit ratios of a small instance.
    Exact(ExactArgs),
    /// Che, Fagin and FIFO approximations and convergence times.
    Approx(ApproxArgs),
    /// Offline bounds on a trace: 2D knapsack, Belady, exhaustive search.
    Bounds(BoundsArgs),
    /// TTL cache hit ratios and occupancy.
    Ttl(TtlArgs),
    /// Request throughput of each policy, median of repeated runs.
    Bench(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Gen(a) => &a.common,
            Command::Sim(c) | Command::Sweep(c) | Command::Bench(c) => c,
            Command::Exact(a) => &a.common,
            Command::Approx(a) => &a.common,
            Command::Bounds(a) => &a.common,
            Command::Ttl(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Each one ignores what it has no use
/// for.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Trace CSV with `time,object,size,value` columns.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Catalog CSV with `id,size,value,weight` columns; replaces the
    /// generated catalog.
    #[arg(long, value_name = "PATH")]
    pub instance: Option<PathBuf>,
    /// Number of objects of the generated catalog.
    #[arg(long = "catalog", value_name = "N", default_value_t = 1000)]
    pub objects: usize,
    /// Zipf exponent of the generated popularity.
    #[arg(long, value_name = "BETA", default_value_t = 0.8)]
    pub zipf: f64,
    /// `unit` or `lognormal:MU,SIGMA`; lognormal sizes are `exp(MU + SIGMA Z)`
    /// kilobytes.
    #[arg(long, value_name = "SPEC", default_value = "unit")]
    pub sizes: String,
    /// `unit` or `lognormal:MU,SIGMA`.
    #[arg(long, value_name = "SPEC", default_value = "unit")]
    pub values: String,
    /// Length of generated IRM traces.
    #[arg(long, value_name = "R", default_value_t = 100_000)]
    pub requests: usize,
    /// Comma list such as `10,100,1000`, or `log:LO:HI:K` / `lin:LO:HI:K`.
    #[arg(long, value_name = "LIST", default_value = "100")]
    pub capacity: String,
    /// Comma list of policies, e.g. `lru,fifo,cpr,random,lfu,sgc,gd`.
    #[arg(long, value_name = "LIST")]
    pub policy: Option<String>,
    #[arg(long, value_name = "U64", default_value_t = 1)]
    pub seed: u64,
    /// Replications; replication `i` uses seed `seed + i`.
    #[arg(long, value_name = "K", default_value_t = 1)]
    pub reps: usize,
    /// Fraction of leading requests excluded from the counters.
    #[arg(long, value_name = "FRAC", default_value_t = 0.1)]
    pub warmup: f64,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Manifest file; defaults to `<out>.manifest.json` when `--out` is set.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "K", default_value_t = 0)]
    pub workers: usize,
    /// Experiment id written into every row; the subcommand name when
    /// absent.
    #[arg(long, value_name = "ID")]
    pub experiment: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum TraceKind {
    /// Independent draws from the catalog popularity.
    Irm,
    /// Poisson streams with timestamps.
    Prm,
    /// Objects requested cyclically.
    Loop,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = TraceKind::Irm)]
    pub kind: TraceKind,
    /// Total request rate of a PRM trace, per second.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Length of a PRM trace in seconds.
    #[arg(long, default_value_t = 1000.0)]
    pub horizon: f64,
    /// Also write the catalog as CSV.
    #[arg(long, value_name = "PATH")]
    pub catalog_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExactArgs {
    #[command(flatten)]
    pub common: Common,
    /// State limit of the explicit chains.
    #[arg(long, default_value_t = cachelab::markov::DEFAULT_STATE_LIMIT)]
    pub state_limit: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ApproxArgs {
    #[command(flatten)]
    pub common: Common,
    /// Simulated fill-time replications per capacity; 0 disables them.
    #[arg(long, default_value_t = 0)]
    pub fill_reps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fraction of requests dropped at each end of the trace.
    #[arg(long, default_value_t = 0.1)]
    pub trim: f64,
    /// Also run the exhaustive offline optimum on small traces.
    #[arg(long)]
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TtlArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma list of TTL values in seconds.
    #[arg(long, value_name = "LIST", default_value = "1,10,100")]
    pub ttl: String,
    /// Comma list of reset rules: `miss`, `request`, `periodic`.
    #[arg(long, value_name = "LIST", default_value = "miss,request,periodic")]
    pub reset: String,
    /// Total request rate of the generated catalog, per second.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Simulate a generated PRM trace of this many seconds per replication.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Report the TTL reaching this aggregate hit ratio.
    #[arg(long)]
    pub target_hit: Option<f64>,
}
