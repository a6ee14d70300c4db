use super::{warmup_len, PolicyKind, SimReport, Tally};
use crate::catalog::Trace;
use crate::numeric::FenwickU64;
use crate::{Error, Result};

/// Hit-ratio curve of a stack policy over many capacities in one pass.
///
/// For every request the byte depth of the object in the policy's priority
/// stack is computed; the request hits at every capacity at least that
/// deep. For LRU this reproduces [`super::simulate`] exactly as long as no
/// requested object exceeds a capacity. The LFU stack orders objects by
/// request count over the full history; objects with equal counts are
/// ordered arbitrarily, so it tracks but does not replicate the admission
/// rules of the simulated LFU.
///
/// `capacities` must be sorted ascending; `u64::MAX` stands for an
/// unbounded cache.
pub fn hrc_sweep_stack(
    policy: &PolicyKind,
    trace: &Trace,
    capacities: &[u64],
    warmup_fraction: f64,
) -> Result<Vec<SimReport>> {
    if capacities.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("capacities must be sorted ascending"));
    }
    let depths = match policy {
        PolicyKind::Lru => lru_depths(trace),
        PolicyKind::Lfu => lfu_depths(trace),
        other => return Err(Error::UnsupportedPolicy(format!("{other} is not a stack policy"))),
    };
    let requests = trace.requests();
    let warmup = warmup_len(requests.len(), warmup_fraction)?;
    let width = capacities.len() + 1;
    let template = Tally::new(requests.len() - warmup);
    let batches = template.batch_hits.len();
    let mut hit_diff = vec![0i64; batches * width];
    let mut bypass_diff = vec![0i64; width];
    let mut byte_diff = vec![0.0f64; width];
    let mut value_diff = vec![0.0f64; width];
    let mut totals = (0.0, 0.0);
    let sizes = trace.catalog().sizes();
    let values = trace.catalog().values();
    let smallest = capacities.first().copied().unwrap_or(u64::MAX);
    for (i, (r, depth)) in requests.iter().zip(&depths).enumerate().skip(warmup) {
        let (size, value) = (sizes[r.object], values[r.object]);
        totals.0 += size as f64;
        totals.1 += value;
        if size > smallest {
            let cut = capacities.partition_point(|&c| c < size);
            bypass_diff[0] += 1;
            bypass_diff[cut] -= 1;
        }
        if let Some(d) = *depth {
            let first = capacities.partition_point(|&c| c < d);
            let b = template.batch_of(i - warmup);
            hit_diff[b * width + first] += 1;
            byte_diff[first] += size as f64;
            value_diff[first] += value;
        }
    }
    let name = policy.to_string();
    let mut running_hits = vec![0i64; batches];
    let (mut bypass, mut bytes, mut value) = (0i64, 0.0, 0.0);
    let mut out = Vec::with_capacity(capacities.len());
    for (ci, &capacity) in capacities.iter().enumerate() {
        let mut tally = template.clone();
        for b in 0..batches {
            running_hits[b] += hit_diff[b * width + ci];
            tally.batch_hits[b] = running_hits[b] as u64;
        }
        bypass += bypass_diff[ci];
        bytes += byte_diff[ci];
        value += value_diff[ci];
        tally.counted = (requests.len() - warmup) as u64;
        tally.hits = tally.batch_hits.iter().sum();
        tally.uploads = tally.counted - tally.hits - bypass as u64;
        tally.hit_bytes = bytes;
        tally.bytes = totals.0;
        tally.hit_value = value;
        tally.value = totals.1;
        out.push(tally.report(name.clone(), capacity, requests.len() as u64, None, 0.0));
    }
    Ok(out)
}

/// Bytes of all objects touched since the previous request to the same
/// object, itself included.
///
/// Each resident object owns one slot of a Fenwick tree, in access order.
/// When the slots run out, live objects are packed to the front, so the
/// tree stays proportional to the catalog instead of the trace.
fn lru_depths(trace: &Trace) -> Vec<Option<u64>> {
    let sizes = trace.catalog().sizes();
    let slots = (4 * sizes.len()).max(1024).min(trace.len().max(1));
    let mut slot_of = vec![usize::MAX; sizes.len()];
    let mut owner = vec![usize::MAX; slots];
    let mut tree = FenwickU64::new(slots);
    let mut total = 0u64;
    let mut next = 0;
    let mut out = Vec::with_capacity(trace.len());
    for r in trace.requests() {
        let k = r.object;
        let s = sizes[k];
        let prev = slot_of[k];
        if prev == usize::MAX {
            out.push(None);
        } else {
            let below = if prev == 0 { 0 } else { tree.prefix(prev - 1) };
            out.push(Some(total - below));
            tree.sub(prev, s);
            total -= s;
            owner[prev] = usize::MAX;
        }
        if next == slots {
            let live: Vec<usize> = owner.iter().copied().filter(|&o| o != usize::MAX).collect();
            owner.iter_mut().for_each(|o| *o = usize::MAX);
            for (i, &o) in live.iter().enumerate() {
                owner[i] = o;
                slot_of[o] = i;
            }
            let live_sizes: Vec<u64> = live.iter().map(|&o| sizes[o]).collect();
            tree = FenwickU64::from_prefix(&live_sizes, slots);
            next = live.len();
        }
        tree.add(next, s);
        total += s;
        owner[next] = k;
        slot_of[k] = next;
        next += 1;
    }
    out
}

/// Byte depth in a stack sorted by descending request count.
fn lfu_depths(trace: &Trace) -> Vec<Option<u64>> {
    let sizes = trace.catalog().sizes();
    let n = sizes.len();
    // order[pos] = object; all objects start in the count-0 class
    let mut order: Vec<usize> = (0..n).collect();
    let mut pos: Vec<usize> = (0..n).collect();
    let mut counts = vec![0usize; n];
    // start[c] = first position of the class with count c
    let mut start = vec![0usize];
    let mut members = vec![n];
    let mut tree = FenwickU64::new(n);
    for (p, &k) in order.iter().enumerate() {
        tree.add(p, sizes[k]);
    }
    let mut out = Vec::with_capacity(trace.len());
    for r in trace.requests() {
        let k = r.object;
        let c = counts[k];
        out.push((c > 0).then(|| tree.prefix(pos[k])));
        // swap k with the first member of its class, which then shrinks by one
        let f = start[c];
        let other = order[f];
        let pk = pos[k];
        if other != k {
            order.swap(f, pk);
            pos[other] = pk;
            pos[k] = f;
            tree.sub(f, sizes[other]);
            tree.add(f, sizes[k]);
            tree.sub(pk, sizes[k]);
            tree.add(pk, sizes[other]);
        }
        if start.len() == c + 1 {
            start.push(f);
            members.push(0);
        } else if members[c + 1] == 0 {
            start[c + 1] = f;
        }
        members[c] -= 1;
        members[c + 1] += 1;
        start[c] = f + 1;
        counts[k] = c + 1;
    }
    out
}
