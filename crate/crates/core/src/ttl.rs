//! Hit ratios of TTL caches with unbounded storage.
//!
//! Three timer disciplines are covered. A copy is valid for `ΔT` after the
//! miss that loaded it, for `ΔT` after the latest request, or until the
//! next boundary of a fixed grid of windows of length `ΔT`. Objects are
//! independent, so everything is computed per object and aggregated with
//! request rates as weights.

use rand_distr::{Distribution, Exp};

use crate::catalog::{seeded_rng, Trace};
use crate::numeric::solve_increasing;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ResetKind {
    /// Expires `ΔT` after the miss that loaded it. Hits do not extend it.
    PerMiss,
    /// Every request, hit or miss, restarts the timer.
    PerRequest,
    /// All copies expire at multiples of `ΔT` after a fixed origin.
    Periodic,
}

impl std::fmt::Display for ResetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResetKind::PerMiss => "miss",
            ResetKind::PerRequest => "request",
            ResetKind::Periodic => "periodic",
        })
    }
}

impl std::str::FromStr for ResetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "miss" | "per-miss" => Ok(ResetKind::PerMiss),
            "request" | "per-request" => Ok(ResetKind::PerRequest),
            "periodic" => Ok(ResetKind::Periodic),
            other => Err(Error::invalid(format!("unknown TTL discipline {other:?}"))),
        }
    }
}

/// One TTL for all objects or one per object, in seconds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Timers {
    Global(f64),
    PerObject(Vec<f64>),
}

impl Timers {
    pub fn get(&self, k: usize) -> f64 {
        match self {
            Timers::Global(t) => *t,
            Timers::PerObject(v) => v[k],
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let ok = |t: f64| t >= 0.0 && !t.is_nan();
        match self {
            Timers::Global(t) if ok(*t) => Ok(()),
            Timers::PerObject(v) if v.len() == n && v.iter().all(|&t| ok(t)) => Ok(()),
            Timers::Global(t) => Err(Error::invalid(format!("TTL {t} must be non-negative"))),
            Timers::PerObject(v) => Err(Error::invalid(format!(
                "{} TTLs for {n} objects, all must be non-negative",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TtlDiscipline {
    pub kind: ResetKind,
    pub timers: Timers,
}

impl TtlDiscipline {
    pub fn global(kind: ResetKind, delta_t: f64) -> Self {
        TtlDiscipline {
            kind,
            timers: Timers::Global(delta_t),
        }
    }
}

/// Independent Poisson request streams, rates per second.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RateModel {
    lambdas: Vec<f64>,
}

impl RateModel {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("request rates must be finite and non-negative"));
        }
        if lambdas.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("total request rate must be positive"));
        }
        Ok(RateModel { lambdas })
    }

    /// Splits `total_rate` according to `pmf`.
    pub fn from_pmf(pmf: &[f64], total_rate: f64) -> Result<Self> {
        crate::numeric::validate_pmf(pmf)?;
        RateModel::new(pmf.iter().map(|p| p * total_rate).collect())
    }

    /// Request counts over the time spanned by a timed trace.
    pub fn from_trace(trace: &Trace) -> Result<Self> {
        let (first, last) = time_span(trace)?;
        if last <= first {
            return Err(Error::invalid("trace spans no time"));
        }
        let mut counts = vec![0.0; trace.catalog().len()];
        for r in trace.requests() {
            counts[r.object] += 1.0;
        }
        RateModel::new(counts.into_iter().map(|c| c / (last - first)).collect())
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn total(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// `λΔT / (λΔT + 1)`.
pub fn ttl_hit_reset_per_miss(lambda: f64, delta_t: f64) -> f64 {
    let x = lambda * delta_t;
    if x.is_infinite() {
        1.0
    } else if x > 0.0 {
        x / (x + 1.0)
    } else {
        0.0
    }
}

/// `1 − e^{−λΔT}`.
pub fn ttl_hit_reset_per_request(lambda: f64, delta_t: f64) -> f64 {
    let x = lambda * delta_t;
    if x > 0.0 {
        -(-x).exp_m1()
    } else {
        0.0
    }
}

/// `(λΔT − 1 + e^{−λΔT}) / (λΔT)`: Poisson requests, windows of length ΔT.
pub fn ttl_hit_periodic_prm(lambda: f64, delta_t: f64) -> f64 {
    periodic_curve(lambda * delta_t).0
}

/// `g(x) = (x − 1 + e^{−x}) / x` and `g'(x)`.
fn periodic_curve(x: f64) -> (f64, f64) {
    if !(x > 0.0) {
        (0.0, 0.5)
    } else if x.is_infinite() {
        (1.0, 0.0)
    } else if x < 1e-4 {
        (x / 2.0 - x * x / 6.0 + x * x * x / 24.0, 0.5 - x / 3.0 + x * x / 8.0)
    } else {
        let e = (-x).exp();
        ((x - 1.0 + e) / x, (1.0 - e - x * e) / (x * x))
    }
}

/// Hit probability of one object, with its derivative in `ΔT`.
fn object_curve(kind: ResetKind, lambda: f64, delta_t: f64) -> (f64, f64) {
    let x = lambda * delta_t;
    match kind {
        ResetKind::PerMiss => (
            ttl_hit_reset_per_miss(lambda, delta_t),
            lambda / ((x + 1.0) * (x + 1.0)),
        ),
        ResetKind::PerRequest => (ttl_hit_reset_per_request(lambda, delta_t), lambda * (-x).exp()),
        ResetKind::Periodic => {
            let (g, dg) = periodic_curve(x);
            (g, lambda * dg)
        }
    }
}

/// Hit probability of one object with Poisson requests.
pub fn object_hit_ratio(kind: ResetKind, lambda: f64, delta_t: f64) -> f64 {
    object_curve(kind, lambda, delta_t).0
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TtlHitRatios {
    pub per_object: Vec<f64>,
    /// Rate-weighted mean of `per_object`.
    pub aggregate: f64,
}

/// Per-object and aggregate hit ratios of a rate model under a discipline.
pub fn prm_hit_ratio(model: &RateModel, discipline: &TtlDiscipline) -> Result<TtlHitRatios> {
    discipline.timers.validate(model.len())?;
    let per_object: Vec<f64> = model
        .lambdas
        .iter()
        .enumerate()
        .map(|(k, &l)| object_hit_ratio(discipline.kind, l, discipline.timers.get(k)))
        .collect();
    let aggregate = model.lambdas.iter().zip(&per_object).map(|(l, h)| l * h).sum::<f64>() / model.total();
    Ok(TtlHitRatios { per_object, aggregate })
}

/// Window statistics of one object.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObjectWindowStats {
    pub object: usize,
    pub delta_t: f64,
    /// Number of complete windows observed.
    pub windows: usize,
    /// Mean number of requests per window.
    pub mean_requests: f64,
    /// Fraction of windows without any request.
    pub empty_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntervalStats {
    pub objects: Vec<ObjectWindowStats>,
}

fn time_span(trace: &Trace) -> Result<(f64, f64)> {
    if !trace.is_timed() {
        return Err(Error::invalid("request timestamps are required"));
    }
    let reqs = trace.requests();
    match (reqs.first(), reqs.last()) {
        (Some(a), Some(b)) => Ok((a.time.unwrap(), b.time.unwrap())),
        _ => Err(Error::invalid("trace is empty")),
    }
}

/// Counts requests per window for every requested object. Windows of
/// object `k` start at `first timestamp + offset + i·ΔT_k`. Windows that
/// are cut off by the last timestamp are dropped, as are requests before
/// the first window.
pub fn trace_interval_stats(trace: &Trace, timers: &Timers, offset: f64) -> Result<IntervalStats> {
    let n = trace.catalog().len();
    timers.validate(n)?;
    if !(offset >= 0.0) {
        return Err(Error::invalid("window offset must be non-negative"));
    }
    let (first, last) = time_span(trace)?;
    let origin = first + offset;
    let mut counts: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut requested = vec![false; n];
    let full_windows = |k: usize| {
        let d = timers.get(k);
        if d > 0.0 && last > origin {
            ((last - origin) / d).floor() as usize
        } else {
            0
        }
    };
    for k in 0..n {
        counts[k] = vec![0; full_windows(k)];
    }
    for r in trace.requests() {
        let k = r.object;
        requested[k] = true;
        let t = r.time.unwrap();
        if t < origin {
            continue;
        }
        let w = ((t - origin) / timers.get(k)).floor() as usize;
        if let Some(c) = counts[k].get_mut(w) {
            *c += 1;
        }
    }
    let objects = (0..n)
        .filter(|&k| requested[k] && !counts[k].is_empty())
        .map(|k| {
            let c = &counts[k];
            let total: u64 = c.iter().map(|&x| x as u64).sum();
            let empty = c.iter().filter(|&&x| x == 0).count();
            ObjectWindowStats {
                object: k,
                delta_t: timers.get(k),
                windows: c.len(),
                mean_requests: total as f64 / c.len() as f64,
                empty_fraction: empty as f64 / c.len() as f64,
            }
        })
        .collect();
    Ok(IntervalStats { objects })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PeriodicHitRatios {
    /// `(object, hit ratio)` for objects with at least one request.
    pub per_object: Vec<(usize, f64)>,
    pub aggregate: f64,
}

/// Periodic-reset hit ratios from window statistics. Each non-empty window
/// costs exactly one miss, which holds for any request timing. The
/// aggregate weighs objects by requests per unit time.
pub fn periodic_reset_hit_ratio(stats: &IntervalStats) -> Result<PeriodicHitRatios> {
    let mut per_object = Vec::new();
    let mut hits_rate = 0.0;
    let mut request_rate = 0.0;
    for s in &stats.objects {
        let (e, p0) = (s.mean_requests, s.empty_fraction);
        if !(e >= 0.0) || !(0.0..=1.0).contains(&p0) {
            return Err(Error::InconsistentStats(format!(
                "object {}: E = {e}, p0 = {p0}",
                s.object
            )));
        }
        if e == 0.0 {
            if p0 < 1.0 {
                return Err(Error::InconsistentStats(format!(
                    "object {} has no requests but {p0} empty windows",
                    s.object
                )));
            }
            continue;
        }
        // at least one request per non-empty window
        if e + 1e-12 < 1.0 - p0 {
            return Err(Error::InconsistentStats(format!(
                "object {}: E = {e} below non-empty fraction {}",
                s.object,
                1.0 - p0
            )));
        }
        let h = ((e - 1.0 + p0) / e).max(0.0);
        per_object.push((s.object, h));
        hits_rate += (e - 1.0 + p0).max(0.0) / s.delta_t;
        request_rate += e / s.delta_t;
    }
    let aggregate = if request_rate > 0.0 {
        hits_rate / request_rate
    } else {
        0.0
    };
    Ok(PeriodicHitRatios { per_object, aggregate })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum TtlTarget {
    /// Rate-weighted hit ratio.
    HitRatio(f64),
    /// Expected number of valid objects.
    Occupancy(f64),
}

/// Global TTL that meets `target` under `kind`.
pub fn ttl_adapt(model: &RateModel, target: TtlTarget, kind: ResetKind) -> Result<f64> {
    let lambdas = &model.lambdas;
    let total = model.total();
    let (goal, supremum, weighted) = match target {
        TtlTarget::HitRatio(h) => (h, 1.0, true),
        TtlTarget::Occupancy(n) => (n, lambdas.iter().filter(|&&l| l > 0.0).count() as f64, false),
    };
    if !(goal >= 0.0) || goal >= supremum {
        return Err(Error::OutOfRange { target: goal, supremum });
    }
    if goal == 0.0 {
        return Ok(0.0);
    }
    let f = |d: f64| {
        lambdas.iter().fold((0.0, 0.0), |(s, ds), &l| {
            let (h, dh) = object_curve(kind, l, d);
            let w = if weighted { l / total } else { 1.0 };
            (s + w * h, ds + w * dh)
        })
    };
    let hint = 1.0 / total.max(f64::MIN_POSITIVE);
    solve_increasing(f, goal, 0.0, hint)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Expected number of valid objects. Poisson arrivals see time averages,
/// so the fraction of time an object is valid equals its hit probability
/// under every discipline.
pub fn ttl_occupancy(model: &RateModel, discipline: &TtlDiscipline) -> Result<f64> {
    Ok(prm_hit_ratio(model, discipline)?.per_object.iter().sum())
}

/// Calls `request(hit)` for each request and `valid(from, to)` for each
/// stretch of validity of one Poisson stream on `[0, horizon)`.
fn run_stream<R: rand::Rng>(
    kind: ResetKind,
    lambda: f64,
    delta_t: f64,
    horizon: f64,
    rng: &mut R,
    mut request: impl FnMut(f64, bool),
    mut valid: impl FnMut(f64, f64),
) {
    if lambda <= 0.0 {
        return;
    }
    let gap = Exp::new(lambda).expect("positive rate");
    let mut t = 0.0;
    // end of the current validity stretch, and where it began
    let mut expiry = f64::NEG_INFINITY;
    let mut since = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= horizon {
            break;
        }
        let hit = t < expiry;
        request(t, hit);
        let new_expiry = match kind {
            ResetKind::PerMiss if hit => expiry,
            ResetKind::PerMiss | ResetKind::PerRequest => t + delta_t,
            ResetKind::Periodic if hit => expiry,
            ResetKind::Periodic => ((t / delta_t).floor() + 1.0) * delta_t,
        };
        if !hit {
            if expiry > since {
                valid(since, expiry.min(horizon));
            }
            since = t;
        }
        expiry = new_expiry;
    }
    if expiry > since {
        valid(since, expiry.min(horizon));
    }
}

/// Event simulation of one Poisson stream over `cycles` regeneration
/// cycles, with a ratio-estimator standard error.
///
/// A cycle runs from one miss to the next for [`ResetKind::PerMiss`], from
/// one request to the next for [`ResetKind::PerRequest`] and over one window
/// for [`ResetKind::Periodic`]. Exponential gaps make each cycle start
/// afresh, so cycles are independent.
pub fn simulate_prm_hit_ratio(
    kind: ResetKind,
    lambda: f64,
    delta_t: f64,
    cycles: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(delta_t >= 0.0 && delta_t.is_finite()) || cycles < 2 {
        return Err(Error::invalid(
            "need a positive rate, a finite non-negative TTL and at least two cycles",
        ));
    }
    let gap = Exp::new(lambda).expect("positive rate");
    let mut rng = seeded_rng(seed);
    // arrivals strictly inside an interval of length delta_t
    let arrivals_within = |rng: &mut rand_chacha::ChaCha8Rng| {
        let mut t = gap.sample(rng);
        let mut n = 0.0;
        while t < delta_t {
            n += 1.0;
            t += gap.sample(rng);
        }
        n
    };
    let pairs: Vec<(f64, f64)> = (0..cycles)
        .map(|_| match kind {
            ResetKind::PerMiss => {
                let hits = arrivals_within(&mut rng);
                (hits, hits + 1.0)
            }
            ResetKind::PerRequest => (f64::from(u8::from(gap.sample(&mut rng) < delta_t)), 1.0),
            ResetKind::Periodic => {
                let n = arrivals_within(&mut rng);
                ((n - 1.0).max(0.0), n)
            }
        })
        .collect();
    Ok(ratio_estimate(&pairs))
}

/// Ratio `Σ a / Σ b` with its delta-method standard error.
fn ratio_estimate(pairs: &[(f64, f64)]) -> Estimate {
    let n = pairs.len() as f64;
    let a: f64 = pairs.iter().map(|p| p.0).sum();
    let b: f64 = pairs.iter().map(|p| p.1).sum();
    let mean = a / b;
    let b_bar = b / n;
    let var = pairs.iter().map(|&(x, y)| (x - mean * y).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        mean,
        stderr: (var / n).sqrt() / b_bar,
    }
}

/// Monte Carlo estimate of the expected number of valid objects over
/// `[0, horizon)`, with a batch-means standard error.
pub fn ttl_occupancy_monte_carlo(
    model: &RateModel,
    discipline: &TtlDiscipline,
    horizon: f64,
    seed: u64,
) -> Result<Estimate> {
    discipline.timers.validate(model.len())?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("horizon must be positive and finite"));
    }
    const BATCHES: usize = 32;
    let width = horizon / BATCHES as f64;
    let mut batch = [0.0f64; BATCHES];
    let mut rng = seeded_rng(seed);
    for (k, &l) in model.lambdas.iter().enumerate() {
        let d = discipline.timers.get(k);
        if d == 0.0 {
            continue;
        }
        run_stream(
            discipline.kind,
            l,
            d,
            horizon,
            &mut rng,
            |_, _| {},
            |a, b| {
                let mut lo = a;
                while lo < b {
                    let i = ((lo / width) as usize).min(BATCHES - 1);
                    let hi = b.min((i + 1) as f64 * width);
                    batch[i] += hi - lo;
                    if hi <= lo {
                        break;
                    }
                    lo = hi;
                }
            },
        );
    }
    let occ: Vec<f64> = batch.iter().map(|b| b / width).collect();
    let mean = occ.iter().sum::<f64>() / BATCHES as f64;
    let var = occ.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(Estimate {
        mean,
        stderr: (var / BATCHES as f64).sqrt(),
    })
}

/// Estimated hit ratio of a TTL-unaware policy once stale copies are
/// treated as misses: `base · h_TTL`.
pub fn consistency_discount(base: f64, kind: ResetKind, lambda: f64, delta_t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&base) {
        return Err(Error::invalid(format!("base hit ratio {base} outside [0, 1]")));
    }
    Ok(base * object_hit_ratio(kind, lambda, delta_t))
}

/// Replays a timed trace through an unbounded TTL cache and reports, per
/// request, whether it hit. Periodic windows are aligned at the first
/// timestamp plus `offset`. A request at the exact expiry instant misses.
pub fn simulate_ttl(trace: &Trace, discipline: &TtlDiscipline, offset: f64) -> Result<Vec<bool>> {
    let n = trace.catalog().len();
    discipline.timers.validate(n)?;
    let (first, _) = time_span(trace)?;
    let origin = first + offset;
    let mut expiry = vec![f64::NEG_INFINITY; n];
    let mut out = Vec::with_capacity(trace.len());
    for r in trace.requests() {
        let k = r.object;
        let t = r.time.unwrap();
        let d = discipline.timers.get(k);
        let hit = t < expiry[k];
        match discipline.kind {
            ResetKind::PerMiss if hit => {}
            ResetKind::PerMiss | ResetKind::PerRequest => expiry[k] = t + d,
            ResetKind::Periodic if hit => {}
            ResetKind::Periodic => {
                expiry[k] = if d > 0.0 {
                    origin + (((t - origin) / d).floor() + 1.0) * d
                } else {
                    t
                }
            }
        }
        out.push(hit);
    }
    Ok(out)
}
