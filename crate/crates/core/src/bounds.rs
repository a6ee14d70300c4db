//! Offline bounds on the achievable hit ratio: the static knapsack bound
//! for independent requests, its per-request extension under popularity
//! churn, Belady's algorithm for unit sizes and the two-dimensional
//! knapsack bounds on a concrete trace.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::ops::Range;

use crate::catalog::{ChurnLog, Trace};
use crate::numeric::validate_pmf;
use crate::{Error, Result};

/// Greedy knapsack solution over a static catalog, as value hit ratios.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KnapsackBound {
    /// Value captured by the `prefix` whole objects.
    pub lower: f64,
    /// `lower` plus the fractional share of the next object.
    pub upper: f64,
    pub prefix: usize,
    pub fraction: f64,
    /// Objects that fit at all, by descending `v p / s`.
    pub order: Vec<usize>,
}

fn score_order(pmf: &[f64], sizes: &[u64], values: &[f64], capacity: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pmf.len())
        .filter(|&k| sizes[k] <= capacity && pmf[k] * values[k] > 0.0)
        .collect();
    // compare v p / s by cross multiplication to keep exact ties
    order.sort_by(|&a, &b| {
        let sa = values[a] * pmf[a] * sizes[b] as f64;
        let sb = values[b] * pmf[b] * sizes[a] as f64;
        sb.total_cmp(&sa).then(a.cmp(&b))
    });
    order
}

/// Returns the unnormalized captured value `(lower, upper)` together with
/// prefix length and fraction.
fn greedy_fill(pmf: &[f64], sizes: &[u64], values: &[f64], capacity: u64) -> (f64, f64, usize, f64, Vec<usize>) {
    let order = score_order(pmf, sizes, values, capacity);
    let mut free = capacity;
    let mut lower = 0.0;
    for (i, &k) in order.iter().enumerate() {
        if sizes[k] > free {
            let q = free as f64 / sizes[k] as f64;
            let upper = lower + q * pmf[k] * values[k];
            return (lower, upper, i, q, order);
        }
        free -= sizes[k];
        lower += pmf[k] * values[k];
    }
    let prefix = order.len();
    (lower, lower, prefix, 0.0, order)
}

fn check_lengths(n: usize, sizes: &[u64], values: &[f64]) -> Result<()> {
    if sizes.len() != n || values.len() != n {
        return Err(Error::invalid("pmf, sizes and values must have the same length"));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("object sizes must be positive"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("object values must be finite and non-negative"));
    }
    Ok(())
}

/// Upper bound on the value hit ratio of any cache of `capacity` bytes
/// under independent requests. Objects larger than the cache are never
/// selected but stay in the denominator.
pub fn static_knapsack_bound(pmf: &[f64], sizes: &[u64], values: &[f64], capacity: u64) -> Result<KnapsackBound> {
    if pmf.is_empty() {
        return Err(Error::invalid("empty catalog"));
    }
    validate_pmf(pmf)?;
    check_lengths(pmf.len(), sizes, values)?;
    let total: f64 = pmf.iter().zip(values).map(|(p, v)| p * v).sum();
    if total <= 0.0 {
        return Err(Error::UndefinedRatio("total requested value is zero".into()));
    }
    let (lower, upper, prefix, fraction, order) = greedy_fill(pmf, sizes, values, capacity);
    Ok(KnapsackBound {
        lower: lower / total,
        upper: (upper / total).min(1.0),
        prefix,
        fraction,
        order,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DynamicBound {
    /// Request ranges with constant popularity and the value-weighted bound
    /// for each request in that range, `(1 − p_new)` already applied.
    pub epochs: Vec<(Range<usize>, f64)>,
    /// Ratio of summed per-request bounds to summed requested value.
    pub bound: f64,
}

impl DynamicBound {
    /// Bound contribution of request `r`.
    pub fn at(&self, r: usize) -> Option<f64> {
        let i = self.epochs.partition_point(|(range, _)| range.end <= r);
        self.epochs
            .get(i)
            .filter(|(range, _)| range.contains(&r))
            .map(|(_, b)| *b)
    }
}

/// Knapsack bound under churning popularity: every request is bounded by the
/// static solution for the pmf in force at that request, scaled by the
/// probability that the request does not go to a brand-new object.
///
/// `sizes` and `values` must cover every object in the log, including the
/// ones created during the trace.
pub fn dynamic_popularity_bound(log: &ChurnLog, sizes: &[u64], values: &[f64], capacity: u64) -> Result<DynamicBound> {
    if log.requests == 0 {
        return Err(Error::invalid("churn log covers no requests"));
    }
    let objects = log.initial_pmf.len() + log.events.len();
    if sizes.len() < objects || values.len() < objects {
        return Err(Error::invalid(format!(
            "sizes and values must cover all {objects} objects of the log"
        )));
    }
    let keep = 1.0 - log.p_new;
    let mut epochs = Vec::new();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for (range, pmf) in log.epochs() {
        let n = pmf.len();
        let len = range.len() as f64;
        let total: f64 = pmf.iter().zip(values).map(|(p, v)| p * v).sum();
        let per_request = if n == 0 || keep == 0.0 {
            0.0
        } else {
            keep * greedy_fill(&pmf, &sizes[..n], &values[..n], capacity).1
        };
        numerator += len * per_request;
        denominator += len * total;
        epochs.push((range, if total > 0.0 { per_request / total } else { 0.0 }));
    }
    let bound = if denominator > 0.0 {
        (numerator / denominator).min(1.0)
    } else {
        0.0
    };
    Ok(DynamicBound { epochs, bound })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BeladyResult {
    pub hits: u64,
    pub requests: u64,
    pub hit_ratio: f64,
}

fn next_uses(objects: &[usize], n: usize) -> Vec<usize> {
    let mut next = vec![usize::MAX; objects.len()];
    let mut last = vec![usize::MAX; n];
    for (i, &o) in objects.iter().enumerate().rev() {
        next[i] = last[o];
        last[o] = i;
    }
    next
}

/// Clairvoyant replacement for unit-size objects: evict the resident whose
/// next request lies farthest ahead, and only admit a missed object if its
/// own next request comes before that.
pub fn belady(trace: &Trace, capacity: usize) -> Result<BeladyResult> {
    if trace.catalog().entries().iter().any(|e| e.size != 1) {
        return Err(Error::UnsupportedPolicy(
            "belady requires unit sizes, use knapsack_2d_bounds for variable sizes".into(),
        ));
    }
    let objects = trace.objects();
    let next = next_uses(&objects, trace.catalog().len());
    let mut resident_next = vec![usize::MAX; trace.catalog().len()];
    let mut cached = vec![false; trace.catalog().len()];
    // (next use, object)
    let mut by_next: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut hits = 0;
    for (i, &o) in objects.iter().enumerate() {
        if cached[o] {
            hits += 1;
            by_next.remove(&(resident_next[o], o));
        } else {
            if next[i] == usize::MAX || capacity == 0 {
                continue;
            }
            if by_next.len() >= capacity {
                let &(far, victim) = by_next.last().expect("cache is full");
                if next[i] >= far {
                    continue;
                }
                by_next.pop_last();
                cached[victim] = false;
            }
            cached[o] = true;
        }
        if next[i] == usize::MAX {
            cached[o] = false;
        } else {
            resident_next[o] = next[i];
            by_next.insert((next[i], o));
        }
    }
    let requests = objects.len() as u64;
    Ok(BeladyResult {
        hits,
        requests,
        hit_ratio: if requests == 0 {
            0.0
        } else {
            hits as f64 / requests as f64
        },
    })
}

/// Time between two consecutive references to one object, measured in
/// request indices. Caching the object over `[start, end)` turns the
/// request at `end` into a hit worth `value`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RequestInterval {
    pub object: usize,
    pub start: usize,
    pub end: usize,
    pub size: u64,
    pub value: f64,
}

impl RequestInterval {
    pub fn length(&self) -> usize {
        self.end - self.start
    }

    pub fn footprint(&self) -> f64 {
        self.length() as f64 * self.size as f64
    }

    pub fn score(&self) -> f64 {
        self.value / self.footprint()
    }

    /// Greedy order: higher value density first, then shorter, then
    /// earlier, then smaller object index.
    fn priority(&self, other: &Self) -> Ordering {
        let a = self.value * other.footprint();
        let b = other.value * self.footprint();
        b.total_cmp(&a)
            .then(self.length().cmp(&other.length()))
            .then(self.start.cmp(&other.start))
            .then(self.object.cmp(&other.object))
    }
}

/// Intervals between consecutive references. `values[n]`, when given,
/// replaces the catalog value of the hit at request `n`.
pub fn request_intervals(trace: &Trace, values: Option<&[f64]>) -> Result<Vec<RequestInterval>> {
    if let Some(v) = values {
        if v.len() != trace.len() {
            return Err(Error::invalid(format!(
                "{} interval values for a trace of {} requests",
                v.len(),
                trace.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("interval values must be finite and non-negative"));
        }
    }
    let catalog = trace.catalog();
    let mut last = vec![usize::MAX; catalog.len()];
    let mut out = Vec::new();
    for (n, req) in trace.requests().iter().enumerate() {
        let o = req.object;
        if last[o] != usize::MAX {
            let entry = catalog.entry(o);
            out.push(RequestInterval {
                object: o,
                start: last[o],
                end: n,
                size: entry.size,
                value: values.map_or(entry.value, |v| v[n]),
            });
        }
        last[o] = n;
    }
    Ok(out)
}

/// Per-interval values that drop to zero when the object's TTL, counted
/// from the reference opening the interval, has run out by the closing
/// reference. A request at the exact expiry instant finds the copy expired.
pub fn ttl_interval_values(trace: &Trace, ttl_per_object: &[f64]) -> Result<Vec<f64>> {
    let catalog = trace.catalog();
    if ttl_per_object.len() != catalog.len() {
        return Err(Error::invalid("one TTL per catalog object is required"));
    }
    if !trace.is_timed() {
        return Err(Error::invalid("TTL-aware values need request timestamps"));
    }
    let mut last: Vec<Option<f64>> = vec![None; catalog.len()];
    let mut out = Vec::with_capacity(trace.len());
    for req in trace.requests() {
        let t = req.time.expect("timed trace");
        let o = req.object;
        let fresh = last[o].is_some_and(|s| t - s < ttl_per_object[o]);
        out.push(if fresh { catalog.entry(o).value } else { 0.0 });
        last[o] = Some(t);
    }
    Ok(out)
}

/// Used bytes in each request slot.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OccupancyProfile {
    pub used: Vec<u64>,
    pub capacity: u64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundReport {
    pub v_lower: f64,
    pub v_upper: f64,
    /// Value of every request in the trace.
    pub v_total: f64,
    /// Value of the requests that close an interval, i.e. all that could
    /// ever hit.
    pub v_eligible: f64,
    pub vhr_lower: f64,
    pub vhr_upper: f64,
    pub placements: Vec<RequestInterval>,
    pub lower_profile: OccupancyProfile,
    pub upper_profile: OccupancyProfile,
}

/// Range-add, range-max segment tree over request slots.
struct MaxTree {
    size: usize,
    max: Vec<u64>,
    add: Vec<u64>,
}

impl MaxTree {
    fn new(n: usize) -> Self {
        let size = n.next_power_of_two().max(1);
        MaxTree {
            size,
            max: vec![0; 2 * size],
            add: vec![0; 2 * size],
        }
    }

    fn query(&self, range: Range<usize>) -> u64 {
        self.query_node(1, 0, self.size, &range)
    }

    fn query_node(&self, node: usize, lo: usize, hi: usize, range: &Range<usize>) -> u64 {
        if range.end <= lo || hi <= range.start {
            return 0;
        }
        if range.start <= lo && hi <= range.end {
            return self.max[node];
        }
        let mid = (lo + hi) / 2;
        self.add[node]
            + self
                .query_node(2 * node, lo, mid, range)
                .max(self.query_node(2 * node + 1, mid, hi, range))
    }

    fn add(&mut self, range: Range<usize>, delta: u64) {
        self.add_node(1, 0, self.size, &range, delta);
    }

    fn add_node(&mut self, node: usize, lo: usize, hi: usize, range: &Range<usize>, delta: u64) {
        if range.end <= lo || hi <= range.start {
            return;
        }
        if range.start <= lo && hi <= range.end {
            self.max[node] += delta;
            self.add[node] += delta;
            return;
        }
        let mid = (lo + hi) / 2;
        self.add_node(2 * node, lo, mid, range, delta);
        self.add_node(2 * node + 1, mid, hi, range, delta);
        self.max[node] = self.add[node] + self.max[2 * node].max(self.max[2 * node + 1]);
    }
}

fn find(next: &mut [usize], mut t: usize) -> usize {
    let mut root = t;
    while next[root] != root {
        root = next[root];
    }
    while next[t] != root {
        let up = next[t];
        next[t] = root;
        t = up;
    }
    root
}

/// Lower and upper bounds on the best value any cache of `capacity` bytes
/// could collect on `trace` with full knowledge of the future.
///
/// Each pair of consecutive references is a rectangle of `length × size` in
/// the request-index × bytes plane. The lower bound places whole
/// rectangles greedily by value density and is a feasible caching
/// schedule. The upper bound lets each rectangle take whatever slice of the
/// free area it overlaps, in the same order.
///
/// Intervals of objects larger than the cache are skipped. Head and tail
/// trimming is left to the caller.
pub fn knapsack_2d_bounds(trace: &Trace, capacity: u64, interval_values: Option<&[f64]>) -> Result<BoundReport> {
    let mut intervals = request_intervals(trace, interval_values)?;
    intervals.sort_by(|a, b| a.priority(b));
    let r = trace.len();

    let v_total: f64 = match interval_values {
        Some(v) => {
            // first references have no interval, charge them their catalog value
            let mut seen = vec![false; trace.catalog().len()];
            trace
                .requests()
                .iter()
                .zip(v)
                .map(|(req, &x)| {
                    if std::mem::replace(&mut seen[req.object], true) {
                        x
                    } else {
                        trace.catalog().entry(req.object).value
                    }
                })
                .sum()
        }
        None => trace
            .requests()
            .iter()
            .map(|req| trace.catalog().entry(req.object).value)
            .sum(),
    };
    let v_eligible: f64 = intervals.iter().map(|i| i.value).sum();

    let mut tree = MaxTree::new(r);
    let mut lower_used = vec![0u64; r];
    let mut placements = Vec::new();
    let mut v_lower = 0.0;

    let mut upper_used = vec![0u64; r];
    // next[t] is the first slot ≥ t that still has free bytes
    let mut next: Vec<usize> = (0..=r).collect();
    let mut v_upper = 0.0;

    for iv in &intervals {
        if iv.size > capacity || iv.value == 0.0 {
            continue;
        }
        let span = iv.start..iv.end;
        if tree.query(span.clone()) + iv.size <= capacity {
            tree.add(span.clone(), iv.size);
            for u in &mut lower_used[span.clone()] {
                *u += iv.size;
            }
            v_lower += iv.value;
            placements.push(iv.clone());
        }

        let mut claimed = 0u64;
        let mut t = find(&mut next, iv.start);
        while t < iv.end {
            let take = iv.size.min(capacity - upper_used[t]);
            upper_used[t] += take;
            claimed += take;
            if upper_used[t] == capacity {
                next[t] = t + 1;
            }
            t = find(&mut next, t + 1);
        }
        v_upper += iv.value * claimed as f64 / iv.footprint();
    }
    let ratio = |v: f64| {
        if v_total > 0.0 {
            (v / v_total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    };
    Ok(BoundReport {
        v_lower,
        v_upper,
        v_total,
        v_eligible,
        vhr_lower: ratio(v_lower),
        vhr_upper: ratio(v_upper),
        placements,
        lower_profile: OccupancyProfile {
            used: lower_used,
            capacity,
        },
        upper_profile: OccupancyProfile {
            used: upper_used,
            capacity,
        },
    })
}

/// Default request limit of [`exhaustive_offline_optimum`].
pub const EXHAUSTIVE_MAX_REQUESTS: usize = 20;
/// Default distinct-object limit of [`exhaustive_offline_optimum`].
pub const EXHAUSTIVE_MAX_OBJECTS: usize = 6;

/// Best total value over all subsets of intervals whose rectangles fit under
/// the capacity in every slot. Exponential, for tiny traces only.
pub fn exhaustive_offline_optimum(trace: &Trace, capacity: u64) -> Result<f64> {
    exhaustive_offline_optimum_with_limits(trace, capacity, EXHAUSTIVE_MAX_REQUESTS, EXHAUSTIVE_MAX_OBJECTS)
}

pub fn exhaustive_offline_optimum_with_limits(
    trace: &Trace,
    capacity: u64,
    max_requests: usize,
    max_objects: usize,
) -> Result<f64> {
    if trace.len() > max_requests || trace.distinct_objects() > max_objects {
        return Err(Error::limit(
            format!(
                "exhaustive search over {} requests and {} objects",
                trace.len(),
                trace.distinct_objects()
            ),
            format!("limit is {max_requests} requests and {max_objects} objects, use knapsack_2d_bounds"),
        ));
    }
    let mut intervals: Vec<RequestInterval> = request_intervals(trace, None)?
        .into_iter()
        .filter(|i| i.size <= capacity && i.value > 0.0)
        .collect();
    intervals.sort_by(|a, b| b.value.total_cmp(&a.value));
    let mut remaining = vec![0.0; intervals.len() + 1];
    for i in (0..intervals.len()).rev() {
        remaining[i] = remaining[i + 1] + intervals[i].value;
    }

    struct Search<'a> {
        intervals: &'a [RequestInterval],
        remaining: &'a [f64],
        used: Vec<u64>,
        capacity: u64,
        best: f64,
    }

    impl Search<'_> {
        fn run(&mut self, i: usize, value: f64) {
            if value + self.remaining[i] <= self.best {
                return;
            }
            let Some(iv) = self.intervals.get(i) else {
                self.best = value;
                return;
            };
            let span = iv.start..iv.end;
            if self.used[span.clone()].iter().all(|&u| u + iv.size <= self.capacity) {
                self.used[span.clone()].iter_mut().for_each(|u| *u += iv.size);
                self.run(i + 1, value + iv.value);
                self.used[span].iter_mut().for_each(|u| *u -= iv.size);
            }
            self.run(i + 1, value);
        }
    }

    let mut search = Search {
        intervals: &intervals,
        remaining: &remaining,
        used: vec![0; trace.len()],
        capacity,
        best: 0.0,
    };
    search.run(0, 0.0);
    Ok(search.best)
}
