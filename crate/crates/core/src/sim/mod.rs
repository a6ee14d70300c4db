//! Trace-driven cache simulation.
//!
//! [`simulate`] replays a [`Trace`] through one policy at one capacity and
//! reports object, byte and value hit ratios together with upload counts.
//! [`hrc_sweep_stack`] computes whole hit-ratio curves for stack policies
//! in a single pass.
//!
//! Objects larger than the capacity are never admitted; their requests
//! count as misses without an upload.

mod list;
mod policies;
mod stack;

use std::fmt;
use std::str::FromStr;

use crate::catalog::Trace;
use crate::{Error, Result};

pub use stack::hrc_sweep_stack;

/// Multiplicative score built from a subset of request count, value and
/// inverse size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ScoreSpec {
    pub count: bool,
    pub value: bool,
    pub inverse_size: bool,
}

impl ScoreSpec {
    /// `c * v / s`
    pub const COUNT_VALUE_PER_SIZE: ScoreSpec = ScoreSpec {
        count: true,
        value: true,
        inverse_size: true,
    };
    /// `c / s`
    pub const COUNT_PER_SIZE: ScoreSpec = ScoreSpec {
        count: true,
        value: false,
        inverse_size: true,
    };

    pub fn eval(&self, count: u64, value: f64, size: u64) -> f64 {
        let mut s = 1.0;
        if self.count {
            s *= count as f64;
        }
        if self.value {
            s *= value;
        }
        if self.inverse_size {
            s /= size as f64;
        }
        s
    }
}

impl Default for ScoreSpec {
    fn default() -> Self {
        ScoreSpec::COUNT_VALUE_PER_SIZE
    }
}

impl fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut factors = Vec::new();
        if self.count {
            factors.push("c");
        }
        if self.value {
            factors.push("v");
        }
        let num = if factors.is_empty() {
            "1".to_string()
        } else {
            factors.join("*")
        };
        if self.inverse_size {
            write!(f, "{num}/s")
        } else {
            write!(f, "{num}")
        }
    }
}

impl FromStr for ScoreSpec {
    type Err = Error;

    /// Parses forms such as `c*v/s`, `c/s`, `v` or `1/s`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (num, inverse_size) = match s.split_once('/') {
            Some((num, "s")) => (num, true),
            Some(_) => return Err(Error::invalid(format!("score {s:?}: only `/s` may divide"))),
            None => (s, false),
        };
        let mut spec = ScoreSpec {
            count: false,
            value: false,
            inverse_size,
        };
        for factor in num.split('*').map(str::trim) {
            match factor {
                "c" if !spec.count => spec.count = true,
                "v" if !spec.value => spec.value = true,
                "1" => {}
                _ => return Err(Error::invalid(format!("score {s:?}: unknown factor {factor:?}"))),
            }
        }
        Ok(spec)
    }
}

/// Replacement order used inside one level of a multi-level cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum LevelKind {
    Fifo,
    Random,
    Clock,
    Lru,
}

impl FromStr for LevelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(LevelKind::Fifo),
            "random" | "rand" => Ok(LevelKind::Random),
            "clock" | "cpr" => Ok(LevelKind::Clock),
            "lru" => Ok(LevelKind::Lru),
            other => Err(Error::invalid(format!("unknown level kind {other:?}"))),
        }
    }
}

impl fmt::Display for LevelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LevelKind::Fifo => "fifo",
            LevelKind::Random => "random",
            LevelKind::Clock => "cpr",
            LevelKind::Lru => "lru",
        })
    }
}

/// How a probabilistic cache decides whether a request is handled.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum AdmitRule {
    /// One probability per catalog object, each in `(0, 1]`.
    PerObject(Vec<f64>),
    /// `q_k = exp(-beta * s_k / v_k)`.
    SizeValue { beta: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum PolicyKind {
    Lru,
    Fifo,
    ClockPerRequest,
    Random,
    Lfu,
    WindowLfu {
        window: usize,
    },
    ScoreGatedClock {
        score: ScoreSpec,
    },
    GreedyDual {
        score: ScoreSpec,
    },
    /// Levels from top to bottom as `(slots, kind)`; unit sizes only and the
    /// slots must add up to the capacity.
    MultiLevel {
        levels: Vec<(usize, LevelKind)>,
    },
    ProbAdmit {
        inner: Box<PolicyKind>,
        rule: AdmitRule,
    },
}

impl PolicyKind {
    /// Whether [`hrc_sweep_stack`] supports the policy.
    pub fn is_stack(&self) -> bool {
        matches!(self, PolicyKind::Lru | PolicyKind::Lfu)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Lru => write!(f, "lru"),
            PolicyKind::Fifo => write!(f, "fifo"),
            PolicyKind::ClockPerRequest => write!(f, "cpr"),
            PolicyKind::Random => write!(f, "random"),
            PolicyKind::Lfu => write!(f, "lfu"),
            PolicyKind::WindowLfu { window } => write!(f, "wlfu:{window}"),
            PolicyKind::ScoreGatedClock { score } => write!(f, "sgc:{score}"),
            PolicyKind::GreedyDual { score } => write!(f, "gd:{score}"),
            PolicyKind::MultiLevel { levels } => {
                let parts: Vec<String> = levels.iter().map(|(l, k)| format!("{k}{l}")).collect();
                write!(f, "ml:{}", parts.join(","))
            }
            PolicyKind::ProbAdmit { inner, rule } => match rule {
                AdmitRule::SizeValue { beta } => write!(f, "padmit:{beta}:{inner}"),
                AdmitRule::PerObject(_) => write!(f, "padmit:q:{inner}"),
            },
        }
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    /// Parses the short names used on the command line: `lru`, `fifo`,
    /// `cpr`, `random`, `lfu`, `wlfu:W`, `sgc[:SCORE]`, `gd[:SCORE]`,
    /// `ml:fifo2,random1` and `padmit:BETA:INNER`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let score = |rest: Option<&str>| rest.map_or(Ok(ScoreSpec::default()), str::parse);
        match (head.to_ascii_lowercase().as_str(), rest) {
            ("lru", None) => Ok(PolicyKind::Lru),
            ("fifo", None) => Ok(PolicyKind::Fifo),
            ("cpr" | "clock", None) => Ok(PolicyKind::ClockPerRequest),
            ("random" | "rand", None) => Ok(PolicyKind::Random),
            ("lfu", None) => Ok(PolicyKind::Lfu),
            ("wlfu", Some(w)) => {
                let window = w
                    .parse()
                    .map_err(|_| Error::invalid(format!("window {w:?} is not a count")))?;
                Ok(PolicyKind::WindowLfu { window })
            }
            ("sgc", rest) => Ok(PolicyKind::ScoreGatedClock { score: score(rest)? }),
            ("gd" | "gdsf", rest) => Ok(PolicyKind::GreedyDual { score: score(rest)? }),
            ("ml", Some(levels)) => {
                let levels = levels
                    .split(',')
                    .map(|part| {
                        let split = part.find(|c: char| c.is_ascii_digit()).unwrap_or(part.len());
                        let (kind, slots) = part.split_at(split);
                        let slots = slots
                            .parse()
                            .map_err(|_| Error::invalid(format!("level {part:?} lacks a slot count")))?;
                        Ok((slots, kind.parse()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(PolicyKind::MultiLevel { levels })
            }
            ("padmit", Some(rest)) => {
                let (beta, inner) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::invalid("padmit needs BETA:INNER"))?;
                let beta: f64 = beta
                    .parse()
                    .map_err(|_| Error::invalid(format!("beta {beta:?} is not a number")))?;
                Ok(PolicyKind::ProbAdmit {
                    inner: Box::new(inner.parse()?),
                    rule: AdmitRule::SizeValue { beta },
                })
            }
            _ => Err(Error::invalid(format!("unknown policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Seed for randomized eviction and admission.
    pub seed: u64,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyConfig { kind, seed: 0 }
    }

    pub fn with_seed(kind: PolicyKind, seed: u64) -> Self {
        PolicyConfig { kind, seed }
    }
}

/// Default fraction of leading requests excluded from the counters.
pub const DEFAULT_WARMUP: f64 = 0.1;

/// Number of consecutive batches used for the batch-means standard error.
const BATCHES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub warmup_fraction: f64,
    /// Hard TTL in seconds: a resident whose load lies `ttl` or more in the
    /// past is reloaded and the request counts as a miss. Needs timestamps.
    pub ttl: Option<f64>,
    /// Records the hit ratio of each consecutive window of this many
    /// counted requests.
    pub series_window: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            warmup_fraction: DEFAULT_WARMUP,
            ttl: None,
            series_window: None,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub capacity: u64,
    pub requests: u64,
    pub warmup_excluded: u64,
    pub hits: u64,
    pub misses: u64,
    pub uploads: u64,
    pub ohr: f64,
    pub bhr: f64,
    pub vhr: f64,
    /// Batch-means standard error of `ohr`.
    pub ohr_stderr: f64,
    pub hit_series: Option<Vec<f64>>,
    /// Requests per second of the run; not part of equality.
    pub throughput: f64,
}

impl PartialEq for SimReport {
    fn eq(&self, other: &Self) -> bool {
        self.policy == other.policy
            && self.capacity == other.capacity
            && self.requests == other.requests
            && self.warmup_excluded == other.warmup_excluded
            && self.hits == other.hits
            && self.misses == other.misses
            && self.uploads == other.uploads
            && self.ohr == other.ohr
            && self.bhr == other.bhr
            && self.vhr == other.vhr
            && self.ohr_stderr == other.ohr_stderr
            && self.hit_series == other.hit_series
    }
}

impl SimReport {
    pub fn counted(&self) -> u64 {
        self.requests - self.warmup_excluded
    }
}

/// Counters accumulated over the counted requests of one run.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tally {
    pub(crate) counted: u64,
    pub(crate) hits: u64,
    pub(crate) uploads: u64,
    pub(crate) hit_bytes: f64,
    pub(crate) bytes: f64,
    pub(crate) hit_value: f64,
    pub(crate) value: f64,
    pub(crate) batch_hits: Vec<u64>,
    pub(crate) batch_sizes: Vec<u64>,
    span: u64,
}

impl Tally {
    pub(crate) fn new(counted: usize) -> Self {
        let batches = if counted >= 2 * BATCHES { BATCHES } else { 1 };
        let first = |b: usize| (b * counted).div_ceil(batches) as u64;
        Tally {
            batch_hits: vec![0; batches],
            batch_sizes: (0..batches).map(|b| first(b + 1) - first(b)).collect(),
            span: counted as u64,
            ..Tally::default()
        }
    }

    /// Batch of the `i`-th counted request.
    pub(crate) fn batch_of(&self, i: usize) -> usize {
        let batches = self.batch_hits.len() as u64;
        let total = self.span;
        if total == 0 {
            return 0;
        }
        match (i as u64).checked_mul(batches) {
            Some(x) => (x / total) as usize,
            None => (i as u128 * batches as u128 / total as u128) as usize,
        }
    }

    fn stderr(&self) -> f64 {
        let b = self.batch_hits.len();
        if b < 2 {
            return 0.0;
        }
        let ratios: Vec<f64> = self
            .batch_hits
            .iter()
            .zip(&self.batch_sizes)
            .map(|(&h, &n)| h as f64 / n as f64)
            .collect();
        let mean = ratios.iter().sum::<f64>() / b as f64;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        (var / b as f64).sqrt()
    }

    pub(crate) fn report(
        &self,
        policy: String,
        capacity: u64,
        requests: u64,
        hit_series: Option<Vec<f64>>,
        throughput: f64,
    ) -> SimReport {
        let ratio = |a: f64, b: f64| if b > 0.0 { (a / b).clamp(0.0, 1.0) } else { 0.0 };
        SimReport {
            policy,
            capacity,
            requests,
            warmup_excluded: requests - self.counted,
            hits: self.hits,
            misses: self.counted - self.hits,
            uploads: self.uploads,
            ohr: ratio(self.hits as f64, self.counted as f64),
            bhr: ratio(self.hit_bytes, self.bytes),
            vhr: ratio(self.hit_value, self.value),
            ohr_stderr: self.stderr(),
            hit_series,
            throughput,
        }
    }
}

pub(crate) fn warmup_len(requests: usize, warmup_fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::invalid(format!(
            "warmup fraction {warmup_fraction} outside [0, 1)"
        )));
    }
    Ok((warmup_fraction * requests as f64).floor() as usize)
}

struct Clock(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Clock {
    fn start() -> Self {
        Clock(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn rate(&self, requests: usize) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            let secs = self.0.elapsed().as_secs_f64();
            if secs > 0.0 {
                return requests as f64 / secs;
            }
        }
        let _ = requests;
        0.0
    }
}

/// Simulates one policy with the default options and the given warmup.
pub fn simulate(policy: &PolicyConfig, trace: &Trace, capacity: u64, warmup_fraction: f64) -> Result<SimReport> {
    let options = SimOptions {
        warmup_fraction,
        ..SimOptions::default()
    };
    simulate_with(policy, trace, capacity, &options)
}

pub fn simulate_with(policy: &PolicyConfig, trace: &Trace, capacity: u64, options: &SimOptions) -> Result<SimReport> {
    let catalog = trace.catalog();
    let mut cache = policies::build(&policy.kind, policy.seed, catalog, capacity)?;
    let requests = trace.requests();
    let warmup = warmup_len(requests.len(), options.warmup_fraction)?;
    let mut expiry = match options.ttl {
        None => None,
        Some(ttl) => {
            if !(ttl > 0.0) {
                return Err(Error::invalid(format!("ttl {ttl} must be positive")));
            }
            if !trace.is_timed() && !trace.is_empty() {
                return Err(Error::invalid("ttl invalidation needs request timestamps"));
            }
            Some((ttl, vec![f64::INFINITY; catalog.len()]))
        }
    };
    if options.series_window == Some(0) {
        return Err(Error::invalid("series window must be positive"));
    }
    let mut series = options.series_window.map(|w| (w, Vec::new(), 0u64, 0u64));
    let mut tally = Tally::new(requests.len() - warmup);
    let clock = Clock::start();
    for (i, r) in requests.iter().enumerate() {
        let k = r.object;
        let entry = catalog.entry(k);
        let outcome = if entry.size > capacity {
            policies::Access::Rejected
        } else {
            match &mut expiry {
                Some((ttl, exp)) => {
                    let t = r.time.unwrap_or(0.0);
                    let stale = cache.contains(k) && t >= exp[k];
                    let a = cache.access(k);
                    if a == policies::Access::Admitted || (stale && a == policies::Access::Hit) {
                        exp[k] = t + *ttl;
                    }
                    if stale && a == policies::Access::Hit {
                        policies::Access::Admitted
                    } else {
                        a
                    }
                }
                None => cache.access(k),
            }
        };
        debug_assert!(cache.used() <= capacity);
        if i < warmup {
            continue;
        }
        let j = i - warmup;
        let size = entry.size as f64;
        tally.counted += 1;
        tally.bytes += size;
        tally.value += entry.value;
        let hit = outcome == policies::Access::Hit;
        match outcome {
            policies::Access::Hit => {
                tally.hits += 1;
                tally.hit_bytes += size;
                tally.hit_value += entry.value;
                let b = tally.batch_of(j);
                tally.batch_hits[b] += 1;
            }
            policies::Access::Admitted => tally.uploads += 1,
            policies::Access::Rejected => {}
        }
        if let Some((w, out, n, h)) = &mut series {
            *n += 1;
            *h += hit as u64;
            if *n == *w as u64 {
                out.push(*h as f64 / *n as f64);
                *n = 0;
                *h = 0;
            }
        }
    }
    let throughput = clock.rate(requests.len());
    Ok(tally.report(
        policy.kind.to_string(),
        capacity,
        requests.len() as u64,
        series.map(|(_, out, _, _)| out),
        throughput,
    ))
}

/// Fraction of counted requests that loaded an object into the cache.
pub fn upload_ratio(report: &SimReport) -> Result<f64> {
    let counted = report.counted();
    if counted == 0 {
        return Err(Error::UndefinedRatio("no counted requests".into()));
    }
    Ok(report.uploads as f64 / counted as f64)
}

/// Replays a trace and returns the resident set after every request; used
/// by tests that inspect cache contents directly.
#[doc(hidden)]
pub fn trace_residents(policy: &PolicyConfig, trace: &Trace, capacity: u64) -> Result<Vec<(u64, Vec<usize>)>> {
    let catalog = trace.catalog();
    let mut cache = policies::build(&policy.kind, policy.seed, catalog, capacity)?;
    let mut out = Vec::with_capacity(trace.len());
    for r in trace.requests() {
        if catalog.entry(r.object).size <= capacity {
            cache.access(r.object);
        }
        out.push((cache.used(), cache.residents()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
