//! Object catalogs, synthetic workloads and the trace CSV format.
//!
//! Objects are addressed by a dense index into their [`Catalog`]; the
//! opaque string id is kept for I/O. Popularity weights are normalized into
//! the catalog pmf on construction.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::numeric::Fenwick;
use crate::{Error, Result};

/// Creates the generator used by every seeded routine in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    /// Size in bytes, at least 1.
    pub size: u64,
    /// Caching value credited per hit.
    pub value: f64,
    /// Unnormalized popularity.
    pub weight: f64,
}

impl CatalogEntry {
    pub fn new(id: impl Into<String>, size: u64, value: f64, weight: f64) -> Self {
        CatalogEntry {
            id: id.into(),
            size,
            value,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: Vec<CatalogEntry>,
    pmf: Vec<f64>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (k, e) in entries.iter().enumerate() {
            if e.size == 0 {
                return Err(Error::invalid(format!("object {:?} has size 0", e.id)));
            }
            if !(e.value.is_finite() && e.value >= 0.0) {
                return Err(Error::invalid(format!(
                    "object {:?} has invalid value {}",
                    e.id, e.value
                )));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::invalid(format!(
                    "object {:?} has invalid weight {}",
                    e.id, e.weight
                )));
            }
            if index.insert(e.id.clone(), k).is_some() {
                return Err(Error::invalid(format!("duplicate object id {:?}", e.id)));
            }
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        let pmf = if total > 0.0 {
            entries.iter().map(|e| e.weight / total).collect()
        } else {
            vec![0.0; entries.len()]
        };
        Ok(Catalog { entries, pmf, index })
    }

    /// Catalog with ids `"1".."N"` from parallel vectors.
    pub fn from_parts(weights: &[f64], sizes: &[u64], values: &[f64]) -> Result<Self> {
        if weights.len() != sizes.len() || weights.len() != values.len() {
            return Err(Error::invalid("weights, sizes and values differ in length"));
        }
        let entries = (0..weights.len())
            .map(|k| CatalogEntry::new((k + 1).to_string(), sizes[k], values[k], weights[k]))
            .collect();
        Catalog::new(entries)
    }

    /// Unit sizes and values with the given popularity weights.
    pub fn unit(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        Catalog::from_parts(weights, &vec![1; n], &vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn entry(&self, k: usize) -> &CatalogEntry {
        &self.entries[k]
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn sizes(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.size).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn lookup(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn total_size(&self) -> u64 {
        self.entries.iter().map(|e| e.size).sum()
    }

    fn push(&mut self, entry: CatalogEntry) -> usize {
        let k = self.entries.len();
        self.index.insert(entry.id.clone(), k);
        self.entries.push(entry);
        self.pmf.push(0.0);
        k
    }

    fn renormalize(&mut self) {
        let total: f64 = self.entries.iter().map(|e| e.weight).sum();
        for (p, e) in self.pmf.iter_mut().zip(&self.entries) {
            *p = if total > 0.0 { e.weight / total } else { 0.0 };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Request {
    /// 0-based position in the trace.
    pub index: usize,
    /// Dense index into the trace catalog.
    pub object: usize,
    /// Request time in seconds, when known.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    catalog: Catalog,
    requests: Vec<Request>,
}

impl Trace {
    pub fn new(catalog: Catalog, requests: Vec<Request>) -> Result<Self> {
        let mut last_time: Option<f64> = None;
        for (i, r) in requests.iter().enumerate() {
            if r.index != i {
                return Err(Error::invalid(format!("request {i} carries index {}", r.index)));
            }
            if r.object >= catalog.len() {
                return Err(Error::invalid(format!(
                    "request {i} refers to unknown object {}",
                    r.object
                )));
            }
            if let Some(t) = r.time {
                if !(t.is_finite() && t >= 0.0) {
                    return Err(Error::invalid(format!("request {i} has invalid time {t}")));
                }
                if let Some(prev) = last_time {
                    if t < prev {
                        return Err(Error::invalid(format!("request {i} time {t} precedes {prev}")));
                    }
                }
                last_time = Some(t);
            }
        }
        Ok(Trace { catalog, requests })
    }

    /// Untimed trace from a sequence of object indices.
    pub fn from_objects(catalog: Catalog, objects: &[usize]) -> Result<Self> {
        let requests = objects
            .iter()
            .enumerate()
            .map(|(index, &object)| Request {
                index,
                object,
                time: None,
            })
            .collect();
        Trace::new(catalog, requests)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn objects(&self) -> Vec<usize> {
        self.requests.iter().map(|r| r.object).collect()
    }

    pub fn is_timed(&self) -> bool {
        !self.requests.is_empty() && self.requests.iter().all(|r| r.time.is_some())
    }

    pub fn distinct_objects(&self) -> usize {
        let mut seen = vec![false; self.catalog.len()];
        let mut n = 0;
        for r in &self.requests {
            if !seen[r.object] {
                seen[r.object] = true;
                n += 1;
            }
        }
        n
    }

    /// Requests `range`, re-indexed from 0, over the same catalog.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Trace {
        let requests = self.requests[range]
            .iter()
            .enumerate()
            .map(|(index, r)| Request { index, ..*r })
            .collect();
        Trace {
            catalog: self.catalog.clone(),
            requests,
        }
    }

    /// Drops `head` and `tail` fractions of the requests.
    pub fn trimmed(&self, head: f64, tail: f64) -> Result<Trace> {
        if !(0.0..1.0).contains(&head) || !(0.0..1.0).contains(&tail) || head + tail >= 1.0 {
            return Err(Error::invalid(format!("trim fractions {head}/{tail} out of range")));
        }
        let n = self.len();
        let start = (head * n as f64).floor() as usize;
        let end = n - (tail * n as f64).floor() as usize;
        Ok(self.slice(start..end.max(start)))
    }

    /// Per-request `(id, size, value, time)` tuples; equal for traces that
    /// serialize identically regardless of unrequested catalog entries.
    pub fn request_view(&self) -> Vec<(&str, u64, f64, Option<f64>)> {
        self.requests
            .iter()
            .map(|r| {
                let e = self.catalog.entry(r.object);
                (e.id.as_str(), e.size, e.value, r.time)
            })
            .collect()
    }
}

/// Zipf probabilities `p_k ∝ k^(-beta)` for ranks `1..=n`.
pub fn zipf_pmf(n: usize, beta: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("zipf catalog must contain at least one object"));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid(format!(
            "zipf exponent {beta} must be finite and non-negative"
        )));
    }
    let mut pmf: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-beta)).collect();
    // summing smallest terms first keeps the normalization accurate for large n
    let total: f64 = pmf.iter().rev().sum();
    for p in &mut pmf {
        *p /= total;
    }
    Ok(pmf)
}

/// Lognormal object sizes `round(exp(mu + sigma Z) * 1000)` bytes, at least 1.
pub fn lognormal_sizes(n: usize, mu: f64, sigma: f64, seed: u64) -> Result<Vec<u64>> {
    Ok(lognormal_values(n, mu, sigma, seed)?
        .into_iter()
        .map(|kb| ((kb * 1000.0).round() as u64).max(1))
        .collect())
}

/// Real-valued lognormal samples `exp(mu + sigma Z)`.
pub fn lognormal_values(n: usize, mu: f64, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!(
            "lognormal parameters mu={mu}, sigma={sigma} invalid"
        )));
    }
    let mut rng = seeded_rng(seed);
    Ok((0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (mu + sigma * z).exp()
        })
        .collect())
}

/// Draws `r` independent requests from the catalog pmf.
pub fn generate_irm_trace(catalog: &Catalog, r: usize, seed: u64) -> Result<Trace> {
    let objects = sample_irm(catalog.pmf(), r, seed)?;
    Trace::from_objects(catalog.clone(), &objects)
}

/// Independent draws from a pmf as raw object indices.
pub fn sample_irm(pmf: &[f64], r: usize, seed: u64) -> Result<Vec<usize>> {
    if pmf.is_empty() {
        return Err(Error::invalid("cannot sample from an empty catalog"));
    }
    if pmf.len() == 1 {
        return Ok(vec![0; r]);
    }
    let alias = WeightedAliasIndex::new(pmf.to_vec())
        .map_err(|e| Error::invalid(format!("catalog pmf cannot be sampled: {e}")))?;
    let mut rng = seeded_rng(seed);
    Ok((0..r).map(|_| alias.sample(&mut rng)).collect())
}

/// Poisson request streams with per-object rates over `[0, horizon)`.
pub fn generate_prm_trace(catalog: &Catalog, total_rate: f64, horizon: f64, seed: u64) -> Result<Trace> {
    if catalog.is_empty() {
        return Err(Error::invalid("cannot sample from an empty catalog"));
    }
    if !(total_rate > 0.0 && total_rate.is_finite()) || !(horizon >= 0.0) {
        return Err(Error::invalid("rate must be positive and horizon non-negative"));
    }
    let alias = if catalog.len() > 1 {
        Some(
            WeightedAliasIndex::new(catalog.pmf().to_vec())
                .map_err(|e| Error::invalid(format!("catalog pmf cannot be sampled: {e}")))?,
        )
    } else {
        None
    };
    let gap = Exp::new(total_rate).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seeded_rng(seed);
    let mut t = 0.0;
    let mut requests = Vec::new();
    loop {
        t += gap.sample(&mut rng);
        if t >= horizon {
            break;
        }
        let object = alias.as_ref().map_or(0, |a| a.sample(&mut rng));
        requests.push(Request {
            index: requests.len(),
            object,
            time: Some(t),
        });
    }
    Trace::new(catalog.clone(), requests)
}

/// Objects `1, 2, ..., n, 1, 2, ...` with unit sizes and values, length `r`.
pub fn loop_trace(n_objects: usize, r: usize) -> Result<Trace> {
    if n_objects == 0 {
        return Err(Error::invalid("loop trace needs at least one object"));
    }
    let catalog = Catalog::unit(&vec![1.0; n_objects])?;
    let objects: Vec<usize> = (0..r).map(|i| i % n_objects).collect();
    Trace::from_objects(catalog, &objects)
}

/// Per-hit delay value: source delay saved minus the lookup overhead.
///
/// Negative results mark objects whose caching costs more than it saves.
pub fn delay_value(d_source: f64, d_cache: f64, d_check: f64) -> f64 {
    (d_source - d_cache) - d_check
}

/// Distribution of the initial request probability of a new object.
pub trait InitialProbabilitySampler: std::fmt::Debug + Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
}

/// Every new object starts with the same probability.
#[derive(Debug, Clone, Copy)]
pub struct FixedInitialProbability(pub f64);

impl InitialProbabilitySampler for FixedInitialProbability {
    fn sample(&self, _rng: &mut dyn RngCore) -> f64 {
        self.0
    }
}

/// Draws a Zipf rank and starts the new object with that rank's probability.
#[derive(Debug, Clone)]
pub struct ZipfInitialProbability {
    pmf: Vec<f64>,
    alias: Arc<WeightedAliasIndex<f64>>,
}

impl ZipfInitialProbability {
    pub fn new(ranks: usize, beta: f64) -> Result<Self> {
        let pmf = zipf_pmf(ranks.max(2), beta)?;
        let alias = WeightedAliasIndex::new(pmf.clone()).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(ZipfInitialProbability {
            pmf,
            alias: Arc::new(alias),
        })
    }
}

impl InitialProbabilitySampler for ZipfInitialProbability {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let mut rng = rng;
        self.pmf[self.alias.sample(&mut rng)]
    }
}

/// Catalog with content churn: new objects enter with a sampled probability
/// while the existing probabilities fade by the complementary factor.
#[derive(Debug, Clone)]
pub struct ChurnModel {
    pub p_new: f64,
    pub initial_catalog: Catalog,
    pub new_weight_sampler: Arc<dyn InitialProbabilitySampler>,
    /// Size assigned to every new object.
    pub new_object_size: u64,
    /// Value assigned to every new object.
    pub new_object_value: f64,
}

impl ChurnModel {
    pub fn new(p_new: f64, initial_catalog: Catalog, sampler: Arc<dyn InitialProbabilitySampler>) -> Self {
        ChurnModel {
            p_new,
            initial_catalog,
            new_weight_sampler: sampler,
            new_object_size: 1,
            new_object_value: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChurnEvent {
    /// Request at which the object first appears.
    pub request_index: usize,
    pub object: usize,
    /// Probability of the object right after it entered.
    pub p_init: f64,
}

/// Append-only record of new-object events; reconstructs the pmf in force
/// at any request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnLog {
    pub p_new: f64,
    pub initial_pmf: Vec<f64>,
    pub events: Vec<ChurnEvent>,
    pub requests: usize,
}

impl ChurnLog {
    /// Probabilities over the objects known before request `r` is served.
    pub fn pmf_at(&self, r: usize) -> Vec<f64> {
        let mut pmf = self.initial_pmf.clone();
        for e in self.events.iter().take_while(|e| e.request_index < r) {
            for p in pmf.iter_mut() {
                *p *= 1.0 - e.p_init;
            }
            debug_assert_eq!(e.object, pmf.len());
            pmf.push(e.p_init);
        }
        pmf
    }

    /// Request ranges over which the pmf is constant, with that pmf.
    pub fn epochs(&self) -> Vec<(std::ops::Range<usize>, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.events.len() + 1);
        let mut pmf = self.initial_pmf.clone();
        let mut start = 0;
        for e in &self.events {
            // request `e.request_index` is still served under the old pmf
            let end = e.request_index + 1;
            out.push((start..end, pmf.clone()));
            for p in pmf.iter_mut() {
                *p *= 1.0 - e.p_init;
            }
            pmf.push(e.p_init);
            start = end;
        }
        if start < self.requests {
            out.push((start..self.requests, pmf));
        }
        out
    }
}

/// Generates a churn trace and the log needed to rebuild each request's pmf.
pub fn generate_churn_trace(model: &ChurnModel, r: usize, seed: u64) -> Result<(Trace, ChurnLog)> {
    if !(0.0..=1.0).contains(&model.p_new) {
        return Err(Error::invalid(format!("p_new = {} outside [0, 1]", model.p_new)));
    }
    if model.initial_catalog.is_empty() && model.p_new < 1.0 {
        return Err(Error::invalid("churn model needs a non-empty initial catalog"));
    }
    if model.new_object_size == 0 {
        return Err(Error::invalid("new objects need a positive size"));
    }
    let mut catalog = model.initial_catalog.clone();
    let initial_pmf = catalog.pmf().to_vec();
    let capacity = catalog.len() + (model.p_new * r as f64 * 2.0) as usize + 16;
    let mut weights = Fenwick::new(capacity);
    let mut raw: Vec<f64> = initial_pmf.clone();
    for (k, &p) in raw.iter().enumerate() {
        weights.add(k, p);
    }
    let mut scale = 1.0;
    let mut rng = seeded_rng(seed);
    let mut objects = Vec::with_capacity(r);
    let mut events = Vec::new();
    let mut total_raw: f64 = raw.iter().sum();
    for i in 0..r {
        let is_new = model.p_new > 0.0 && rng.random::<f64>() < model.p_new;
        if is_new {
            let p_init = model.new_weight_sampler.sample(&mut rng);
            if !(p_init > 0.0 && p_init < 1.0) {
                return Err(Error::invalid(format!(
                    "sampled initial probability {p_init} outside (0, 1)"
                )));
            }
            scale *= 1.0 - p_init;
            let k = catalog.push(CatalogEntry::new(
                format!("new-{}", events.len() + 1),
                model.new_object_size,
                model.new_object_value,
                p_init,
            ));
            let raw_k = p_init / scale;
            if k >= weights.len() {
                weights = grow(&weights, &raw, k + 1 + capacity);
            }
            raw.push(raw_k);
            weights.add(k, raw_k);
            total_raw += raw_k;
            if scale < 1e-100 {
                for w in raw.iter_mut() {
                    *w *= scale;
                }
                weights = grow(&Fenwick::new(0), &raw, weights.len());
                total_raw = raw.iter().sum();
                scale = 1.0;
            }
            events.push(ChurnEvent {
                request_index: i,
                object: k,
                p_init,
            });
            objects.push(k);
        } else {
            let u = rng.random::<f64>() * total_raw;
            let k = weights.find(u).min(raw.len() - 1);
            objects.push(k);
        }
    }
    catalog.renormalize();
    let trace = Trace::from_objects(catalog, &objects)?;
    let log = ChurnLog {
        p_new: model.p_new,
        initial_pmf,
        events,
        requests: r,
    };
    Ok((trace, log))
}

fn grow(_old: &Fenwick, raw: &[f64], len: usize) -> Fenwick {
    let mut f = Fenwick::new(len.max(raw.len()));
    for (k, &w) in raw.iter().enumerate() {
        f.add(k, w);
    }
    f
}

const CSV_HEADER: [&str; 4] = ["time", "object", "size", "value"];

/// Reads a trace in the `time,object,size,value` CSV format.
///
/// The catalog lists objects in order of first appearance with their
/// request counts as weights. `size` and `value` default to 1 and may be
/// left empty after an object's first row.
pub fn load_trace<R: Read>(reader: R) -> Result<Trace> {
    read_trace(reader, None)
}

/// Reads a trace whose sizes and values come from `catalog` when the file
/// omits them. Objects missing from the catalog are a schema error.
pub fn load_trace_with_catalog<R: Read>(reader: R, catalog: &Catalog) -> Result<Trace> {
    read_trace(reader, Some(catalog))
}

fn read_trace<R: Read>(reader: R, known: Option<&Catalog>) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let time_col = column("time").ok_or_else(|| Error::Schema("missing `time` column".into()))?;
    let object_col = column("object").ok_or_else(|| Error::Schema("missing `object` column".into()))?;
    let size_col = column("size");
    let value_col = column("value");

    let mut entries: Vec<CatalogEntry> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut requests = Vec::new();
    let mut last_time: Option<f64> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        let field = |col: Option<usize>| col.and_then(|c| record.get(c)).filter(|s| !s.is_empty());

        let time = match field(Some(time_col)) {
            None => None,
            Some(s) => {
                let t: f64 = s.parse().map_err(|_| parse_err(format!("invalid time {s:?}")))?;
                if !(t.is_finite() && t >= 0.0) {
                    return Err(parse_err(format!("time {t} must be a non-negative number")));
                }
                if let Some(prev) = last_time {
                    if t < prev {
                        return Err(parse_err(format!("time {t} decreases from {prev}")));
                    }
                }
                last_time = Some(t);
                Some(t)
            }
        };
        let id = field(Some(object_col)).ok_or_else(|| parse_err("missing object id".into()))?;
        let size = match field(size_col) {
            None => None,
            Some(s) => {
                let v: u64 = s.parse().map_err(|_| parse_err(format!("invalid size {s:?}")))?;
                if v == 0 {
                    return Err(parse_err("size must be positive".into()));
                }
                Some(v)
            }
        };
        let value = match field(value_col) {
            None => None,
            Some(s) => {
                let v: f64 = s.parse().map_err(|_| parse_err(format!("invalid value {s:?}")))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(parse_err(format!("value {v} must be non-negative")));
                }
                Some(v)
            }
        };
        let k = match index.get(id) {
            Some(&k) => {
                let e = &entries[k];
                if size.is_some_and(|s| s != e.size) || value.is_some_and(|v| v != e.value) {
                    return Err(parse_err(format!("object {id:?} changes size or value")));
                }
                k
            }
            None => {
                let from_catalog = known.and_then(|c| c.lookup(id).map(|k| c.entry(k)));
                let (size, value) = match (size_col, from_catalog) {
                    (None, None) => {
                        return Err(Error::Schema(format!(
                            "line {line}: object {id:?} has no size column and no catalog entry"
                        )))
                    }
                    (_, Some(e)) => (size.unwrap_or(e.size), value.unwrap_or(e.value)),
                    (Some(_), None) => {
                        if known.is_some() {
                            return Err(Error::Schema(format!("line {line}: object {id:?} not in catalog")));
                        }
                        (size.unwrap_or(1), value.unwrap_or(1.0))
                    }
                };
                entries.push(CatalogEntry::new(id, size, value, 0.0));
                index.insert(id.to_string(), entries.len() - 1);
                entries.len() - 1
            }
        };
        entries[k].weight += 1.0;
        requests.push(Request {
            index: requests.len(),
            object: k,
            time,
        });
    }
    let catalog = Catalog::new(entries)?;
    Trace::new(catalog, requests)
}

/// Writes a trace in the CSV format read by [`load_trace`].
pub fn save_trace<W: Write>(trace: &Trace, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    let mut seen = vec![false; trace.catalog().len()];
    for r in trace.requests() {
        let e = trace.catalog().entry(r.object);
        let time = r.time.map(|t| t.to_string()).unwrap_or_default();
        if seen[r.object] {
            w.write_record([time.as_str(), e.id.as_str(), "", ""]).map_err(io)?;
        } else {
            seen[r.object] = true;
            w.write_record([time, e.id.clone(), e.size.to_string(), e.value.to_string()])
                .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a catalog from CSV with `id,size,value,weight` columns in any
/// order. Weights are normalized into the pmf.
pub fn load_catalog<R: Read>(reader: R) -> Result<Catalog> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut entries = Vec::new();
    for (i, row) in rdr.deserialize::<CatalogEntry>().enumerate() {
        entries.push(row.map_err(|e| Error::Parse {
            line: e.position().map_or(i + 2, |p| p.line() as usize),
            message: e.to_string(),
        })?);
    }
    Catalog::new(entries)
}

/// Writes a catalog in the format read by [`load_catalog`].
pub fn save_catalog<W: Write>(catalog: &Catalog, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in catalog.entries() {
        w.serialize(e).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes a trace to CSV bytes.
pub fn save_trace_bytes(trace: &Trace) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    save_trace(trace, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zipf_small_cases() {
        assert_eq!(zipf_pmf(1, 1.0).unwrap(), vec![1.0]);
        let p = zipf_pmf(2, 1.0).unwrap();
        assert!(close(p[0], 2.0 / 3.0, 1e-15) && close(p[1], 1.0 / 3.0, 1e-15));
        for p in zipf_pmf(3, 0.0).unwrap() {
            assert!(close(p, 1.0 / 3.0, 1e-15));
        }
        assert!(matches!(zipf_pmf(0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(zipf_pmf(3, -1.0).is_err());
    }

    #[test]
    fn lognormal_degenerates_without_spread() {
        let sizes = lognormal_sizes(5, 3.5, 0.0, 99).unwrap();
        assert!(sizes.iter().all(|&s| s == (3.5f64.exp() * 1000.0).round() as u64));
        assert_eq!(sizes[0], 33115);
    }

    #[test]
    fn lognormal_is_deterministic_per_seed() {
        let a = lognormal_sizes(100, 3.5, 2.5, 7).unwrap();
        let b = lognormal_sizes(100, 3.5, 2.5, 7).unwrap();
        let c = lognormal_sizes(100, 3.5, 2.5, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&s| s >= 1));
    }

    #[test]
    fn irm_single_object() {
        let cat = Catalog::unit(&[1.0]).unwrap();
        let t = generate_irm_trace(&cat, 100, 1).unwrap();
        assert_eq!(t.len(), 100);
        assert!(t.requests().iter().all(|r| r.object == 0));
    }

    #[test]
    fn irm_empty_catalog_is_rejected() {
        let cat = Catalog::new(vec![]).unwrap();
        assert!(matches!(
            generate_irm_trace(&cat, 10, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn irm_is_deterministic() {
        let cat = Catalog::unit(&zipf_pmf(50, 0.8).unwrap()).unwrap();
        assert_eq!(
            generate_irm_trace(&cat, 1000, 3).unwrap(),
            generate_irm_trace(&cat, 1000, 3).unwrap()
        );
    }

    #[test]
    fn loop_trace_cycles() {
        assert_eq!(loop_trace(3, 7).unwrap().objects(), vec![0, 1, 2, 0, 1, 2, 0]);
        assert_eq!(loop_trace(1, 4).unwrap().objects(), vec![0, 0, 0, 0]);
        assert_eq!(loop_trace(5, 13).unwrap().len(), 13);
        assert!(loop_trace(0, 3).is_err());
    }

    #[test]
    fn delay_values() {
        assert_eq!(delay_value(0.1, 0.1, 0.0), 0.0);
        assert!(close(delay_value(0.2, 0.05, 0.01), 0.14, 1e-12));
        assert!(close(delay_value(0.05, 0.1, 0.01), -0.06, 1e-12));
    }

    #[test]
    fn csv_empty_body() {
        let t = load_trace("time,object,size,value\n".as_bytes()).unwrap();
        assert!(t.is_empty());
        assert!(t.catalog().is_empty());
    }

    #[test]
    fn csv_single_line() {
        let t = load_trace("time,object,size,value\n0.0,a,100,1.0\n".as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        let e = t.catalog().entry(0);
        assert_eq!((e.id.as_str(), e.size, e.value), ("a", 100, 1.0));
        assert_eq!(t.requests()[0].time, Some(0.0));
    }

    #[test]
    fn csv_defaults_and_omitted_fields() {
        let body = "time,object,size,value\n,a,,\n,b,5,2.5\n,a,,\n,b,,\n";
        let t = load_trace(body.as_bytes()).unwrap();
        assert_eq!(t.objects(), vec![0, 1, 0, 1]);
        assert_eq!(t.catalog().entry(0).size, 1);
        assert_eq!(t.catalog().entry(1).value, 2.5);
        assert!(!t.is_timed());
    }

    #[test]
    fn csv_reports_line_numbers() {
        let body = "time,object,size,value\n0,a,1,1\n1,b,x,1\n";
        match load_trace(body.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let body = "time,object,size,value\n2,a,1,1\n1,b,1,1\n";
        assert!(matches!(load_trace(body.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn csv_without_size_column_needs_catalog() {
        let body = "time,object\n0,a\n";
        assert!(matches!(load_trace(body.as_bytes()), Err(Error::Schema(_))));
        let cat = Catalog::new(vec![CatalogEntry::new("a", 7, 2.0, 1.0)]).unwrap();
        let t = load_trace_with_catalog(body.as_bytes(), &cat).unwrap();
        assert_eq!(t.catalog().entry(0).size, 7);
        let body = "time,object\n0,zz\n";
        assert!(matches!(
            load_trace_with_catalog(body.as_bytes(), &cat),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn catalog_csv_round_trip() {
        let cat = Catalog::from_parts(&[0.2, 0.3, 0.5], &[1, 2, 3], &[1.0, 0.5, 2.0]).unwrap();
        let mut buf = Vec::new();
        save_catalog(&cat, &mut buf).unwrap();
        assert_eq!(load_catalog(&buf[..]).unwrap(), cat);
        let shuffled = "weight,id,value,size\n1,a,1,4\n3,b,2,1\n";
        let c = load_catalog(shuffled.as_bytes()).unwrap();
        assert_eq!(c.pmf(), &[0.25, 0.75]);
        assert_eq!(c.sizes(), vec![4, 1]);
        assert!(matches!(
            load_catalog("id,size,value,weight\na,0,1,1\n".as_bytes()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            load_catalog("id,size\na,x\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn csv_round_trip_generated() {
        let sizes = lognormal_sizes(200, 1.0, 1.0, 5).unwrap();
        let values = lognormal_values(200, -0.5, 1.0, 6).unwrap();
        let cat = Catalog::from_parts(&zipf_pmf(200, 0.9).unwrap(), &sizes, &values).unwrap();
        let t = generate_prm_trace(&cat, 3.0, 3400.0, 11).unwrap();
        assert!(t.len() > 9000);
        let t = t.slice(0..10_000.min(t.len()));
        let loaded = load_trace(save_trace_bytes(&t).unwrap().as_slice()).unwrap();
        assert_eq!(loaded.request_view(), t.request_view());
        let again = load_trace(save_trace_bytes(&loaded).unwrap().as_slice()).unwrap();
        assert_eq!(again, loaded);
    }

    #[test]
    fn churn_without_new_objects_matches_irm() {
        let cat = Catalog::unit(&zipf_pmf(20, 1.0).unwrap()).unwrap();
        let model = ChurnModel::new(0.0, cat.clone(), Arc::new(FixedInitialProbability(0.1)));
        let (t, log) = generate_churn_trace(&model, 5000, 4).unwrap();
        assert!(log.events.is_empty());
        assert_eq!(t.catalog().len(), 20);
        assert_eq!(log.pmf_at(4999), cat.pmf().to_vec());
    }

    #[test]
    fn churn_pmf_snapshots_are_distributions() {
        let cat = Catalog::unit(&zipf_pmf(100, 0.8).unwrap()).unwrap();
        let model = ChurnModel::new(0.05, cat, Arc::new(ZipfInitialProbability::new(100, 0.8).unwrap()));
        let (t, log) = generate_churn_trace(&model, 4000, 9).unwrap();
        assert!(!log.events.is_empty());
        for r in (0..t.len()).step_by(97) {
            let s: f64 = log.pmf_at(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "sum {s} at {r}");
        }
        for (range, pmf) in log.epochs() {
            assert!(!range.is_empty());
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let new_requests: Vec<_> = log
            .events
            .iter()
            .map(|e| t.requests()[e.request_index].object)
            .collect();
        assert_eq!(new_requests, log.events.iter().map(|e| e.object).collect::<Vec<_>>());
    }

    #[test]
    fn churn_rejects_certain_initial_probability() {
        let cat = Catalog::unit(&[0.5, 0.5]).unwrap();
        let model = ChurnModel::new(1.0, cat, Arc::new(FixedInitialProbability(1.0)));
        assert!(matches!(
            generate_churn_trace(&model, 10, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn catalog_validation() {
        assert!(Catalog::new(vec![CatalogEntry::new("a", 0, 1.0, 1.0)]).is_err());
        assert!(Catalog::new(vec![CatalogEntry::new("a", 1, -1.0, 1.0)]).is_err());
        assert!(Catalog::new(vec![
            CatalogEntry::new("a", 1, 1.0, 1.0),
            CatalogEntry::new("a", 1, 1.0, 1.0)
        ])
        .is_err());
        let c = Catalog::new(vec![
            CatalogEntry::new("a", 1, 1.0, 3.0),
            CatalogEntry::new("b", 1, 1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(c.pmf(), &[0.75, 0.25]);
    }
}
