//! Exact steady-state hit ratios under independent requests.
//!
//! The product-form and LRU solvers never enumerate orderings: FIFO, RANDOM
//! and clock-per-request share a stationary law proportional to the product
//! of the cached objects' probabilities, evaluated here with an `O(MN)`
//! recursion over ratios of elementary symmetric sums; LRU stack
//! probabilities are summed with a dynamic program over subsets.
//! [`brute_force_chain`] builds the explicit Markov chain of a small cache
//! and serves as the reference for all of them.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::numeric::validate_pmf;
use crate::sim::LevelKind;
use crate::{Error, Result};

/// Default bound on the number of objects for the subset-based LRU solvers.
pub const DEFAULT_LRU_OBJECT_LIMIT: usize = 12;
/// Default bound on the multi-level occupancy grid `Π (l_i + 1)`.
pub const DEFAULT_LEVEL_GRID_LIMIT: usize = 1_000_000;
/// Default bound on reachable chain states.
pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

/// Object, byte and value hit ratios.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HitRatios {
    pub ohr: f64,
    pub bhr: f64,
    pub vhr: f64,
}

/// Hit ratio shared by FIFO, RANDOM and clock-per-request for unit sizes.
pub fn product_form_hit_ratio(pmf: &[f64], m: usize) -> Result<f64> {
    validate_pmf(pmf)?;
    if m > pmf.len() {
        return Err(Error::invalid(format!(
            "capacity {m} exceeds the {} objects",
            pmf.len()
        )));
    }
    Ok(product_form_weighted(pmf, pmf, m))
}

/// `Σ_{|S|=m} Π_{k∈S} w_k · Σ_{k∈S} p_k / Σ_{|S|=m} Π_{k∈S} w_k` where `w`
/// governs the content and `p` the requests.
fn product_form_weighted(content: &[f64], hits: &[f64], m: usize) -> f64 {
    let positive: Vec<usize> = (0..content.len()).filter(|&k| content[k] > 0.0).collect();
    if m == 0 {
        return 0.0;
    }
    if positive.len() <= m {
        return positive.iter().map(|&k| hits[k]).sum::<f64>().min(1.0);
    }
    if content == hits {
        // with Σp = 1 the hit ratio is 1 − (m+1)·e_{m+1}/e_m
        let r = symmetric_ratios(positive.iter().map(|&k| content[k]), m + 1);
        return (1.0 - (m as f64 + 1.0) * r[m + 1]).clamp(0.0, 1.0);
    }
    multilevel_weighted(content, hits, &[m]).unwrap_or(0.0)
}

/// Ratios `r_j = e_j / e_{j-1}` of elementary symmetric sums for
/// `j = 1..=depth`, index 0 unused.
fn symmetric_ratios(weights: impl Iterator<Item = f64>, depth: usize) -> Vec<f64> {
    let mut r = vec![0.0; depth + 1];
    r[0] = f64::INFINITY;
    for (n, w) in weights.enumerate() {
        let top = (n + 1).min(depth);
        for j in (1..=top).rev() {
            let below = if j == 1 { 0.0 } else { w / r[j - 1] };
            r[j] = (r[j] + w) / (1.0 + below);
        }
    }
    r
}

/// Exact LRU hit ratio for unit sizes.
pub fn lru_exact_hit_ratio(pmf: &[f64], m: usize) -> Result<f64> {
    lru_exact_hit_ratio_with_limit(pmf, m, DEFAULT_LRU_OBJECT_LIMIT)
}

pub fn lru_exact_hit_ratio_with_limit(pmf: &[f64], m: usize, max_objects: usize) -> Result<f64> {
    validate_pmf(pmf)?;
    if m > pmf.len() {
        return Err(Error::invalid(format!(
            "capacity {m} exceeds the {} objects",
            pmf.len()
        )));
    }
    guard_objects(pmf.len(), max_objects)?;
    Ok(lru_weighted(pmf, pmf, m))
}

fn guard_objects(n: usize, max_objects: usize) -> Result<()> {
    if n > max_objects || n > 30 {
        return Err(Error::limit(
            format!("{n} objects exceed the exact LRU limit of {}", max_objects.min(30)),
            "use the Che or Fagin approximation",
        ));
    }
    Ok(())
}

/// Probability that the top `|S|` stack positions hold exactly `S`, for
/// every subset of the objects with positive weight.
fn stack_set_probabilities(content: &[f64]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let objects: Vec<usize> = (0..content.len()).filter(|&k| content[k] > 0.0).collect();
    let total: f64 = objects.iter().map(|&k| content[k]).sum();
    let w: Vec<f64> = objects.iter().map(|&k| content[k] / total).collect();
    let n = objects.len();
    let mut mass = vec![0.0; 1 << n];
    for set in 1usize..(1 << n) {
        let low = set.trailing_zeros() as usize;
        mass[set] = mass[set & (set - 1)] + w[low];
    }
    let mut f = vec![0.0; 1 << n];
    f[0] = 1.0;
    for set in 1usize..(1 << n) {
        let mut acc = 0.0;
        let mut rest = set;
        while rest != 0 {
            let x = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let without = set & !(1 << x);
            let free = 1.0 - mass[without];
            if free > 0.0 {
                acc += f[without] * w[x] / free;
            }
        }
        f[set] = acc;
    }
    (objects, f, mass)
}

fn lru_weighted(content: &[f64], hits: &[f64], m: usize) -> f64 {
    let (objects, f, _) = stack_set_probabilities(content);
    if objects.len() <= m {
        return objects.iter().map(|&k| hits[k]).sum::<f64>().min(1.0);
    }
    let mut h = 0.0;
    for (set, &fs) in f.iter().enumerate() {
        if set.count_ones() as usize == m {
            let hit: f64 = (0..objects.len())
                .filter(|b| set >> b & 1 == 1)
                .map(|b| hits[objects[b]])
                .sum();
            h += fs * hit;
        }
    }
    h.clamp(0.0, 1.0)
}

/// Exact LRU object, byte and value hit ratios for objects of different
/// sizes and a byte capacity.
///
/// Objects larger than the cache are never admitted: their requests count
/// as misses and leave the stack untouched, so the stack evolves under the
/// request probabilities renormalized over the objects that fit.
pub fn lru_exact_variable_size(pmf: &[f64], sizes: &[u64], values: &[f64], capacity: u64) -> Result<HitRatios> {
    lru_exact_variable_size_with_limit(pmf, sizes, values, capacity, DEFAULT_LRU_OBJECT_LIMIT)
}

pub fn lru_exact_variable_size_with_limit(
    pmf: &[f64],
    sizes: &[u64],
    values: &[f64],
    capacity: u64,
    max_objects: usize,
) -> Result<HitRatios> {
    validate_pmf(pmf)?;
    if sizes.len() != pmf.len() || values.len() != pmf.len() {
        return Err(Error::invalid("pmf, sizes and values differ in length"));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("sizes must be positive"));
    }
    guard_objects(pmf.len(), max_objects)?;
    let content: Vec<f64> = pmf
        .iter()
        .zip(sizes)
        .map(|(&p, &s)| if s <= capacity { p } else { 0.0 })
        .collect();
    let (objects, f, mass) = stack_set_probabilities(&content);
    let n = objects.len();
    let size_of = |set: usize| -> u64 { (0..n).filter(|b| set >> b & 1 == 1).map(|b| sizes[objects[b]]).sum() };
    let set_sizes: Vec<u64> = (0..1usize << n).map(size_of).collect();
    let total: f64 = objects.iter().map(|&k| content[k]).sum();
    let (mut hits, mut bytes, mut value) = (0.0, 0.0, 0.0);
    for (b, &k) in objects.iter().enumerate() {
        let w = content[k] / total;
        let mut in_cache = 0.0;
        for set in 0usize..(1 << n) {
            if set >> b & 1 == 1 || set_sizes[set] + sizes[k] > capacity {
                continue;
            }
            // k directly follows the objects of `set` in the stack
            in_cache += f[set] * w / (1.0 - mass[set]);
        }
        hits += pmf[k] * in_cache;
        bytes += pmf[k] * sizes[k] as f64 * in_cache;
        value += pmf[k] * values[k] * in_cache;
    }
    Ok(normalize(pmf, sizes, values, hits, bytes, value))
}

fn normalize(pmf: &[f64], sizes: &[u64], values: &[f64], hits: f64, bytes: f64, value: f64) -> HitRatios {
    let byte_total: f64 = pmf.iter().zip(sizes).map(|(&p, &s)| p * s as f64).sum();
    let value_total: f64 = pmf.iter().zip(values).map(|(&p, &v)| p * v).sum();
    let ratio = |a: f64, b: f64| if b > 0.0 { (a / b).clamp(0.0, 1.0) } else { 0.0 };
    HitRatios {
        ohr: ratio(hits, 1.0),
        bhr: ratio(bytes, byte_total),
        vhr: ratio(value, value_total),
    }
}

/// Hit ratio of a stack of unit-size levels with the given slot counts,
/// from top to bottom, for any mix of FIFO, RANDOM and clock levels.
pub fn multilevel_product_form(pmf: &[f64], levels: &[usize]) -> Result<f64> {
    multilevel_product_form_with_limit(pmf, levels, DEFAULT_LEVEL_GRID_LIMIT)
}

pub fn multilevel_product_form_with_limit(pmf: &[f64], levels: &[usize], grid_limit: usize) -> Result<f64> {
    validate_pmf(pmf)?;
    check_levels(pmf.len(), levels, grid_limit)?;
    Ok(multilevel_weighted(pmf, pmf, levels).unwrap_or(0.0))
}

fn check_levels(n: usize, levels: &[usize], grid_limit: usize) -> Result<()> {
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::invalid("every level needs at least one slot"));
    }
    let m: usize = levels.iter().sum();
    if m > n {
        return Err(Error::invalid(format!("{m} slots exceed the {n} objects")));
    }
    let grid = levels
        .iter()
        .try_fold(1usize, |acc, &l| acc.checked_mul(l + 1))
        .filter(|&g| g <= grid_limit);
    if grid.is_none() {
        return Err(Error::limit(
            format!("level grid exceeds {grid_limit} cells"),
            "use fewer or smaller levels",
        ));
    }
    Ok(())
}

/// Log-weight and conditional hit sum of a group of partial assignments.
#[derive(Clone, Copy)]
struct Cell {
    ln_z: f64,
    h: f64,
}

impl Cell {
    const EMPTY: Cell = Cell {
        ln_z: f64::NEG_INFINITY,
        h: 0.0,
    };

    fn merge(&mut self, ln_z: f64, h: f64) {
        if ln_z == f64::NEG_INFINITY {
            return;
        }
        if self.ln_z == f64::NEG_INFINITY {
            *self = Cell { ln_z, h };
            return;
        }
        let (hi, lo) = if self.ln_z >= ln_z {
            (*self, Cell { ln_z, h })
        } else {
            (Cell { ln_z, h }, *self)
        };
        let t = (lo.ln_z - hi.ln_z).exp();
        self.ln_z = hi.ln_z + t.ln_1p();
        self.h = (hi.h + t * lo.h) / (1.0 + t);
    }
}

/// Stationary hit ratio when level `j` (0 = top) of a full cache contributes
/// `content_k^(K - j)` per resident. `None` when no full state exists.
fn multilevel_weighted(content: &[f64], hits: &[f64], levels: &[usize]) -> Option<f64> {
    let k_levels = levels.len();
    let positive = content.iter().filter(|&&w| w > 0.0).count();
    let m: usize = levels.iter().sum();
    if positive <= m {
        return Some(
            (0..content.len())
                .filter(|&k| content[k] > 0.0)
                .map(|k| hits[k])
                .sum::<f64>()
                .min(1.0),
        );
    }
    let mut stride = vec![1usize; k_levels];
    for j in 1..k_levels {
        stride[j] = stride[j - 1] * (levels[j - 1] + 1);
    }
    let cells = stride[k_levels - 1] * (levels[k_levels - 1] + 1);
    let mut dp = vec![Cell::EMPTY; cells];
    dp[0] = Cell { ln_z: 0.0, h: 0.0 };
    let mut next = dp.clone();
    for (k, &w) in content.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let ln_w = w.ln();
        next.copy_from_slice(&dp);
        for (idx, cell) in dp.iter().enumerate() {
            if cell.ln_z == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..k_levels {
                let filled = idx / stride[j] % (levels[j] + 1);
                if filled < levels[j] {
                    let exponent = (k_levels - j) as f64;
                    next[idx + stride[j]].merge(cell.ln_z + exponent * ln_w, cell.h + hits[k]);
                }
            }
        }
        std::mem::swap(&mut dp, &mut next);
    }
    let full = dp[cells - 1];
    (full.ln_z > f64::NEG_INFINITY).then(|| full.h.clamp(0.0, 1.0))
}

/// Content weights `γ_k = p_k q_k / Σ p_j q_j` of a cache that handles each
/// request to object `k` with probability `q_k`.
pub fn probabilistic_substitution(pmf: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    validate_pmf(pmf)?;
    if q.len() != pmf.len() {
        return Err(Error::invalid("pmf and admission probabilities differ in length"));
    }
    if let Some(bad) = q.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(Error::invalid(format!(
            "admission probability {bad} outside (0, 1]; drop never-cached objects instead"
        )));
    }
    let total: f64 = pmf.iter().zip(q).map(|(p, q)| p * q).sum();
    if total <= 0.0 {
        return Err(Error::invalid("no object is ever handled"));
    }
    Ok(pmf.iter().zip(q).map(|(p, q)| p * q / total).collect())
}

/// Replacement scheme whose stationary content is driven by `γ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ContentModel {
    Lru {
        capacity: usize,
    },
    /// FIFO, RANDOM or clock-per-request.
    ProductForm {
        capacity: usize,
    },
    MultiLevel {
        levels: Vec<usize>,
    },
}

/// Hit ratio of a probabilistic cache: content from the `γ` chain, hits
/// weighted with the original request probabilities.
pub fn probabilistic_hit_ratio(pmf: &[f64], q: &[f64], model: &ContentModel) -> Result<f64> {
    let gamma = probabilistic_substitution(pmf, q)?;
    match model {
        ContentModel::Lru { capacity } => {
            if *capacity > pmf.len() {
                return Err(Error::invalid("capacity exceeds the catalog"));
            }
            guard_objects(pmf.len(), DEFAULT_LRU_OBJECT_LIMIT)?;
            Ok(lru_weighted(&gamma, pmf, *capacity))
        }
        ContentModel::ProductForm { capacity } => {
            if *capacity > pmf.len() {
                return Err(Error::invalid("capacity exceeds the catalog"));
            }
            Ok(product_form_weighted(&gamma, pmf, *capacity))
        }
        ContentModel::MultiLevel { levels } => {
            check_levels(pmf.len(), levels, DEFAULT_LEVEL_GRID_LIMIT)?;
            Ok(multilevel_weighted(&gamma, pmf, levels).unwrap_or(0.0))
        }
    }
}

/// Replacement rule of an explicit chain.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainPolicy {
    Lru,
    Fifo,
    Clock,
    Random,
    /// Unit-size levels from top to bottom; the capacity must equal the
    /// total slot count.
    MultiLevel(Vec<(usize, LevelKind)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub policy: ChainPolicy,
    pub pmf: Vec<f64>,
    pub sizes: Vec<u64>,
    pub values: Vec<f64>,
    pub capacity: u64,
    /// Per-object probability that a request is handled at all.
    pub admit: Option<Vec<f64>>,
    pub state_limit: usize,
}

impl ChainSpec {
    /// Unit sizes and values with capacity in objects.
    pub fn unit(policy: ChainPolicy, pmf: &[f64], capacity: u64) -> Self {
        let n = pmf.len();
        ChainSpec {
            policy,
            pmf: pmf.to_vec(),
            sizes: vec![1; n],
            values: vec![1.0; n],
            capacity,
            admit: None,
            state_limit: DEFAULT_STATE_LIMIT,
        }
    }

    pub fn sized(policy: ChainPolicy, pmf: &[f64], sizes: &[u64], values: &[f64], capacity: u64) -> Self {
        ChainSpec {
            policy,
            pmf: pmf.to_vec(),
            sizes: sizes.to_vec(),
            values: values.to_vec(),
            capacity,
            admit: None,
            state_limit: DEFAULT_STATE_LIMIT,
        }
    }
}

/// Cache content per level (one level for single-list policies), in
/// policy order: most recent first for LRU, oldest first for FIFO, from
/// the hand for the clock, sorted for RANDOM levels.
pub type ChainState = Vec<Vec<usize>>;

#[derive(Debug, Clone)]
pub struct ChainSolution {
    /// States of the recurrent class with their stationary probabilities.
    pub states: Vec<(ChainState, f64)>,
    pub ratios: HitRatios,
    /// `‖πP − π‖_∞` on the recurrent class.
    pub residual: f64,
    /// Number of states reachable from the empty cache.
    pub reachable: usize,
}

/// Builds and solves the explicit Markov chain of a small cache.
pub fn brute_force_chain(spec: &ChainSpec) -> Result<ChainSolution> {
    validate_pmf(&spec.pmf)?;
    let n = spec.pmf.len();
    if spec.sizes.len() != n || spec.values.len() != n {
        return Err(Error::invalid("pmf, sizes and values differ in length"));
    }
    if spec.sizes.contains(&0) {
        return Err(Error::invalid("sizes must be positive"));
    }
    if let Some(q) = &spec.admit {
        if q.len() != n || q.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid(
                "admission probabilities must lie in [0, 1], one per object",
            ));
        }
    }
    if let ChainPolicy::MultiLevel(levels) = &spec.policy {
        if levels.is_empty() || levels.iter().any(|&(l, _)| l == 0) {
            return Err(Error::invalid("every level needs at least one slot"));
        }
        if spec.sizes.iter().any(|&s| s != 1) {
            return Err(Error::invalid("multi-level chains need unit sizes"));
        }
        let slots: usize = levels.iter().map(|&(l, _)| l).sum();
        if slots as u64 != spec.capacity {
            return Err(Error::invalid("level slots must add up to the capacity"));
        }
    }

    let start: ChainState = match &spec.policy {
        ChainPolicy::MultiLevel(levels) => vec![Vec::new(); levels.len()],
        _ => vec![Vec::new()],
    };
    let mut index: HashMap<ChainState, usize> = HashMap::new();
    let mut states = vec![start.clone()];
    index.insert(start, 0);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let state = states[i].clone();
        let mut row: HashMap<usize, f64> = HashMap::new();
        for k in 0..n {
            let p = spec.pmf[k];
            if p == 0.0 {
                continue;
            }
            let q = spec.admit.as_ref().map_or(1.0, |q| q[k]);
            if q < 1.0 {
                *row.entry(i).or_default() += p * (1.0 - q);
            }
            if q == 0.0 {
                continue;
            }
            for (w, next) in step(spec, &state, k) {
                let j = match index.get(&next) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= spec.state_limit {
                            return Err(Error::limit(
                                format!("more than {} reachable states", spec.state_limit),
                                "shrink the instance or raise the state limit",
                            ));
                        }
                        states.push(next.clone());
                        index.insert(next, states.len() - 1);
                        states.len() - 1
                    }
                };
                *row.entry(j).or_default() += p * q * w;
            }
        }
        let mut row: Vec<(usize, f64)> = row.into_iter().collect();
        row.sort_by_key(|&(j, _)| j);
        rows.push(row);
        i += 1;
    }

    let class = recurrent_class(&rows);
    let (pi, residual) = stationary(&rows, &class)?;
    let (mut hits, mut bytes, mut value) = (0.0, 0.0, 0.0);
    for (&s, &w) in class.iter().zip(&pi) {
        for &k in states[s].iter().flatten() {
            hits += w * spec.pmf[k];
            bytes += w * spec.pmf[k] * spec.sizes[k] as f64;
            value += w * spec.pmf[k] * spec.values[k];
        }
    }
    Ok(ChainSolution {
        states: class.iter().zip(&pi).map(|(&s, &w)| (states[s].clone(), w)).collect(),
        ratios: normalize(&spec.pmf, &spec.sizes, &spec.values, hits, bytes, value),
        residual,
        reachable: states.len(),
    })
}

/// Successor states with probabilities when object `k` is requested and
/// the request is handled.
fn step(spec: &ChainSpec, state: &ChainState, k: usize) -> Vec<(f64, ChainState)> {
    let size = |x: usize| spec.sizes[x];
    let cap = spec.capacity;
    if size(k) > cap {
        return vec![(1.0, state.clone())];
    }
    match &spec.policy {
        ChainPolicy::Lru | ChainPolicy::Fifo | ChainPolicy::Clock => {
            let mut list = state[0].clone();
            if let Some(pos) = list.iter().position(|&x| x == k) {
                match spec.policy {
                    ChainPolicy::Lru => {
                        list.remove(pos);
                        list.insert(0, k);
                    }
                    ChainPolicy::Clock => list.rotate_left(1),
                    _ => {}
                }
                return vec![(1.0, vec![list])];
            }
            let mut used: u64 = list.iter().map(|&x| size(x)).sum();
            while used + size(k) > cap {
                let victim = if spec.policy == ChainPolicy::Lru {
                    list.pop().expect("non-empty")
                } else {
                    list.remove(0)
                };
                used -= size(victim);
            }
            if spec.policy == ChainPolicy::Lru {
                list.insert(0, k);
            } else {
                list.push(k);
            }
            vec![(1.0, vec![list])]
        }
        ChainPolicy::Random => {
            let set = &state[0];
            if set.contains(&k) {
                return vec![(1.0, state.clone())];
            }
            let mut out = Vec::new();
            random_evictions(set.clone(), 1.0, &|x| size(x), size(k), cap, &mut out);
            out.into_iter()
                .map(|(w, mut s)| {
                    s.push(k);
                    s.sort_unstable();
                    (w, vec![s])
                })
                .collect()
        }
        ChainPolicy::MultiLevel(levels) => multilevel_step(levels, state, k),
    }
}

fn random_evictions(
    set: Vec<usize>,
    w: f64,
    size: &dyn Fn(usize) -> u64,
    need: u64,
    cap: u64,
    out: &mut Vec<(f64, Vec<usize>)>,
) {
    let used: u64 = set.iter().map(|&x| size(x)).sum();
    if used + need <= cap {
        out.push((w, set));
        return;
    }
    let share = w / set.len() as f64;
    for i in 0..set.len() {
        let mut rest = set.clone();
        rest.remove(i);
        random_evictions(rest, share, size, need, cap, out);
    }
}

fn canonical(kind: LevelKind, mut level: Vec<usize>) -> Vec<usize> {
    if kind == LevelKind::Random {
        level.sort_unstable();
    }
    level
}

/// Mirrors the simulator's multi-level rules: the promoted object becomes
/// the newest entry of the upper level and the demoted candidate takes its
/// slot below.
fn multilevel_step(levels: &[(usize, LevelKind)], state: &ChainState, k: usize) -> Vec<(f64, ChainState)> {
    let candidates = |j: usize, s: &ChainState| -> Vec<(f64, usize)> {
        let len = s[j].len();
        match levels[j].1 {
            LevelKind::Random => (0..len).map(|i| (1.0 / len as f64, i)).collect(),
            _ => vec![(1.0, 0)],
        }
    };
    let found = state
        .iter()
        .enumerate()
        .find_map(|(j, l)| l.iter().position(|&x| x == k).map(|p| (j, p)));
    let mut out = Vec::new();
    match found {
        Some((0, pos)) => {
            let mut s = state.clone();
            match levels[0].1 {
                LevelKind::Lru => {
                    s[0].remove(pos);
                    s[0].push(k);
                }
                LevelKind::Clock => s[0].rotate_left(1),
                LevelKind::Fifo | LevelKind::Random => {}
            }
            out.push((1.0, s));
        }
        Some((j, pos)) => {
            let up = j - 1;
            if state[up].len() < levels[up].0 {
                let mut s = state.clone();
                s[j].remove(pos);
                s[up].push(k);
                s[up] = canonical(levels[up].1, std::mem::take(&mut s[up]));
                s[j] = canonical(levels[j].1, std::mem::take(&mut s[j]));
                out.push((1.0, s));
            } else {
                for (w, ci) in candidates(up, state) {
                    let mut s = state.clone();
                    let c = s[up].remove(ci);
                    s[up].push(k);
                    s[j][pos] = c;
                    s[up] = canonical(levels[up].1, std::mem::take(&mut s[up]));
                    s[j] = canonical(levels[j].1, std::mem::take(&mut s[j]));
                    out.push((w, s));
                }
            }
        }
        None => {
            let bottom = levels.len() - 1;
            if state[bottom].len() < levels[bottom].0 {
                let mut s = state.clone();
                s[bottom].push(k);
                s[bottom] = canonical(levels[bottom].1, std::mem::take(&mut s[bottom]));
                out.push((1.0, s));
            } else {
                for (w, ci) in candidates(bottom, state) {
                    let mut s = state.clone();
                    s[bottom].remove(ci);
                    s[bottom].push(k);
                    s[bottom] = canonical(levels[bottom].1, std::mem::take(&mut s[bottom]));
                    out.push((w, s));
                }
            }
        }
    }
    out
}

/// States of the first closed communicating class, in discovery order.
fn recurrent_class(rows: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let comp = strongly_connected(rows);
    let count = comp.iter().copied().max().map_or(0, |c| c + 1);
    let mut closed = vec![true; count];
    for (i, row) in rows.iter().enumerate() {
        for &(j, w) in row {
            if w > 0.0 && comp[j] != comp[i] {
                closed[comp[i]] = false;
            }
        }
    }
    // states are numbered in breadth-first order from the empty cache, so
    // the first closed class met is the one that run reaches first
    let first = (0..rows.len())
        .find(|&i| closed[comp[i]])
        .expect("a finite chain has a closed class");
    (0..rows.len()).filter(|&i| comp[i] == comp[first]).collect()
}

/// Iterative Tarjan; returns a component id per state.
fn strongly_connected(rows: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = rows.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if let Some(&(w, _)) = rows[v].get(*edge) {
                *edge += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

/// Largest class solved with a dense LU factorization.
const DENSE_LIMIT: usize = 3000;

fn stationary(rows: &[Vec<(usize, f64)>], class: &[usize]) -> Result<(Vec<f64>, f64)> {
    let n = class.len();
    let mut local = vec![usize::MAX; rows.len()];
    for (i, &s) in class.iter().enumerate() {
        local[s] = i;
    }
    let sub: Vec<Vec<(usize, f64)>> = class
        .iter()
        .map(|&s| {
            rows[s]
                .iter()
                .filter(|&&(j, _)| local[j] != usize::MAX)
                .map(|&(j, w)| (local[j], w))
                .collect()
        })
        .collect();
    let mut pi = if n <= DENSE_LIMIT {
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (i, row) in sub.iter().enumerate() {
            for &(j, w) in row {
                a[(j, i)] += w;
            }
            a[(i, i)] -= 1.0;
        }
        for c in 0..n {
            a[(n - 1, c)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::invalid("stationary system is singular"))?;
        x.iter().copied().collect::<Vec<f64>>()
    } else {
        power_iteration(&sub)
    };
    for x in pi.iter_mut() {
        *x = x.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    for x in pi.iter_mut() {
        *x /= total;
    }
    Ok((pi.clone(), residual(&sub, &pi)))
}

fn apply(sub: &[Vec<(usize, f64)>], pi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pi.len()];
    for (i, row) in sub.iter().enumerate() {
        for &(j, w) in row {
            out[j] += pi[i] * w;
        }
    }
    out
}

fn residual(sub: &[Vec<(usize, f64)>], pi: &[f64]) -> f64 {
    apply(sub, pi)
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn power_iteration(sub: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let n = sub.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..200_000 {
        let next = apply(sub, &pi);
        // averaging with the previous iterate removes periodicity
        let lazy: Vec<f64> = next.iter().zip(&pi).map(|(a, b)| 0.5 * (a + b)).collect();
        let delta = lazy.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = lazy;
        if delta < 1e-15 {
            break;
        }
    }
    pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::zipf_pmf;
    use proptest::prelude::*;

    const P: [f64; 3] = [0.2, 0.3, 0.5];
    const S: [u64; 3] = [1, 2, 3];

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn product_form_small_cases() {
        let p = zipf_pmf(6, 0.9).unwrap();
        let sq: f64 = p.iter().map(|x| x * x).sum();
        assert!((product_form_hit_ratio(&p, 1).unwrap() - sq).abs() < 1e-15);
        assert_eq!(product_form_hit_ratio(&p, 6).unwrap(), 1.0);
        assert!(product_form_hit_ratio(&p, 7).is_err());
    }

    #[test]
    fn product_form_matches_fifo_chain() {
        let p = zipf_pmf(5, 1.0).unwrap();
        let chain = brute_force_chain(&ChainSpec::unit(ChainPolicy::Fifo, &p, 2)).unwrap();
        assert!((chain.ratios.ohr - product_form_hit_ratio(&p, 2).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn product_form_handles_large_catalogs() {
        let p = zipf_pmf(200_000, 0.8).unwrap();
        let h = product_form_hit_ratio(&p, 200).unwrap();
        assert!(h > 0.0 && h < 1.0);
    }

    #[test]
    fn zero_probabilities_are_ignored() {
        let p = [0.5, 0.0, 0.5];
        assert_eq!(product_form_hit_ratio(&p, 2).unwrap(), 1.0);
        assert_eq!(lru_exact_hit_ratio(&p, 2).unwrap(), 1.0);
        let q = [0.25, 0.0, 0.25, 0.5];
        let r = [0.25, 0.25, 0.5];
        assert!((product_form_hit_ratio(&q, 2).unwrap() - product_form_hit_ratio(&r, 2).unwrap()).abs() < 1e-15);
        assert!((lru_exact_hit_ratio(&q, 2).unwrap() - lru_exact_hit_ratio(&r, 2).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn lru_small_cases() {
        let p = zipf_pmf(7, 0.7).unwrap();
        let sq: f64 = p.iter().map(|x| x * x).sum();
        assert!((lru_exact_hit_ratio(&p, 1).unwrap() - sq).abs() < 1e-15);
        assert!((lru_exact_hit_ratio(&p, 7).unwrap() - 1.0).abs() < 1e-12);
        let chain = brute_force_chain(&ChainSpec::unit(ChainPolicy::Lru, &P, 2)).unwrap();
        assert!((chain.ratios.ohr - lru_exact_hit_ratio(&P, 2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn lru_guard() {
        let p = zipf_pmf(13, 1.0).unwrap();
        assert!(matches!(lru_exact_hit_ratio(&p, 3), Err(Error::ResourceLimit { .. })));
        assert!(lru_exact_hit_ratio_with_limit(&p, 3, 13).is_ok());
    }

    #[test]
    fn variable_size_lru_fractions() {
        let r = lru_exact_variable_size(&P, &S, &[1.0; 3], 4).unwrap();
        assert!(rel(r.ohr, 731.0 / 1400.0) < 1e-12);
        assert!(rel(r.bhr, 3527.0 / 6440.0) < 1e-12);
        assert!(rel(r.vhr, r.ohr) < 1e-12);
    }

    #[test]
    fn variable_size_reduces_to_unit() {
        let p = zipf_pmf(6, 0.8).unwrap();
        for m in 1..=6 {
            let r = lru_exact_variable_size(&p, &[1; 6], &[1.0; 6], m).unwrap();
            assert!((r.ohr - lru_exact_hit_ratio(&p, m as usize).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn oversized_objects_match_chain() {
        let p = [0.1, 0.4, 0.2, 0.3];
        let s = [1, 5, 2, 2];
        let v = [1.0, 2.0, 0.5, 3.0];
        let exact = lru_exact_variable_size(&p, &s, &v, 3).unwrap();
        let chain = brute_force_chain(&ChainSpec::sized(ChainPolicy::Lru, &p, &s, &v, 3)).unwrap();
        assert!((exact.ohr - chain.ratios.ohr).abs() < 1e-12);
        assert!((exact.bhr - chain.ratios.bhr).abs() < 1e-12);
        assert!((exact.vhr - chain.ratios.vhr).abs() < 1e-12);
    }

    #[test]
    fn three_object_instance_fractions() {
        let cases = [
            (ChainPolicy::Lru, 731.0 / 1400.0, 3527.0 / 6440.0),
            (ChainPolicy::Fifo, 131.0 / 248.0, 3139.0 / 5704.0),
            (ChainPolicy::Clock, 613.0 / 1160.0, 2937.0 / 5336.0),
            (ChainPolicy::Random, 529.0 / 1000.0, 2533.0 / 4600.0),
        ];
        for (policy, ohr, bhr) in cases {
            let sol = brute_force_chain(&ChainSpec::sized(policy.clone(), &P, &S, &[1.0; 3], 4)).unwrap();
            assert!(rel(sol.ratios.ohr, ohr) < 1e-12, "{policy:?}");
            assert!(rel(sol.ratios.bhr, bhr) < 1e-12, "{policy:?}");
            assert!(sol.residual < 1e-12);
            let mass: f64 = sol.states.iter().map(|(_, w)| w).sum();
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lone_smallest_object_is_transient() {
        let sol = brute_force_chain(&ChainSpec::sized(ChainPolicy::Fifo, &P, &S, &[1.0; 3], 4)).unwrap();
        assert!(sol.states.iter().all(|(s, _)| s[0] != vec![0]));
        assert!(sol.reachable > sol.states.len());
    }

    #[test]
    fn chain_state_limit() {
        let p = zipf_pmf(8, 1.0).unwrap();
        let mut spec = ChainSpec::unit(ChainPolicy::Lru, &p, 4);
        spec.state_limit = 100;
        assert!(matches!(brute_force_chain(&spec), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn single_level_matches_product_form() {
        let p = zipf_pmf(7, 1.1).unwrap();
        for m in 1..=5 {
            let a = multilevel_product_form(&p, &[m]).unwrap();
            let b = product_form_hit_ratio(&p, m).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn climb_matches_chain() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let levels = vec![(1, LevelKind::Fifo), (1, LevelKind::Fifo)];
        let chain = brute_force_chain(&ChainSpec::unit(ChainPolicy::MultiLevel(levels), &p, 2)).unwrap();
        assert!((chain.ratios.ohr - multilevel_product_form(&p, &[1, 1]).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn multilevel_mixed_kinds_match_chain() {
        let p = zipf_pmf(5, 0.9).unwrap();
        let kinds = [LevelKind::Fifo, LevelKind::Random, LevelKind::Clock];
        for &a in &kinds {
            for &b in &kinds {
                for sizes in [[2usize, 1], [1, 2], [2, 2]] {
                    let levels = vec![(sizes[0], a), (sizes[1], b)];
                    let m = (sizes[0] + sizes[1]) as u64;
                    let chain = brute_force_chain(&ChainSpec::unit(ChainPolicy::MultiLevel(levels), &p, m)).unwrap();
                    let exact = multilevel_product_form(&p, &sizes).unwrap();
                    assert!((chain.ratios.ohr - exact).abs() < 1e-10, "{a:?}/{b:?} {sizes:?}");
                }
            }
        }
    }

    #[test]
    fn multilevel_guard() {
        let p = zipf_pmf(50, 1.0).unwrap();
        assert!(matches!(
            multilevel_product_form_with_limit(&p, &[10, 10, 10], 100),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn substitution_arithmetic() {
        assert_eq!(probabilistic_substitution(&P, &[1.0; 3]).unwrap(), P.to_vec());
        let g = probabilistic_substitution(&[0.5, 0.3, 0.2], &[1.0, 0.5, 0.5]).unwrap();
        let want = [0.5 / 0.75, 0.15 / 0.75, 0.1 / 0.75];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(probabilistic_substitution(&P, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn gated_lru_matches_chain() {
        let p = [0.5, 0.3, 0.2];
        let q = [1.0, 0.5, 0.5];
        for m in 1..=2u64 {
            let mut spec = ChainSpec::unit(ChainPolicy::Lru, &p, m);
            spec.admit = Some(q.to_vec());
            let chain = brute_force_chain(&spec).unwrap();
            let model = ContentModel::Lru { capacity: m as usize };
            let exact = probabilistic_hit_ratio(&p, &q, &model).unwrap();
            assert!((chain.ratios.ohr - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn three_object_instance_breaks_lru_fifo_ordering() {
        let lru = lru_exact_variable_size(&P, &S, &[1.0; 3], 4).unwrap().ohr;
        let fifo = brute_force_chain(&ChainSpec::sized(ChainPolicy::Fifo, &P, &S, &[1.0; 3], 4))
            .unwrap()
            .ratios
            .ohr;
        assert!(lru < fifo);
    }

    #[test]
    fn variable_size_hit_ratio_can_zigzag() {
        // the drop appears when a large object starts to fit and flushes
        // the small ones
        let mut found = None;
        for sizes in (0..27).map(|i| [1 + i % 3, 1 + i / 3 % 3, 1 + i / 9]) {
            let curve: Vec<f64> = (1..=9)
                .map(|m| lru_exact_variable_size(&P, &sizes, &[1.0; 3], m).unwrap().ohr)
                .collect();
            if let Some(m) = (1..curve.len()).find(|&i| curve[i] + 1e-12 < curve[i - 1]) {
                found = Some((sizes, m));
            }
        }
        assert!(found.is_some());
    }

    #[test]
    fn variable_size_lru_is_monotone_once_everything_fits() {
        for sizes in (0..27).map(|i| [1 + i % 3, 1 + i / 3 % 3, 1 + i / 9]) {
            let mut prev = 0.0;
            for m in 3..=9 {
                let h = lru_exact_variable_size(&P, &sizes, &[1.0; 3], m).unwrap().ohr;
                assert!(h + 1e-12 >= prev);
                prev = h;
            }
        }
    }

    fn arb_pmf(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, 2..=max_n).prop_map(|w| {
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn solvers_are_monotone_in_capacity(p in arb_pmf(8)) {
            let mut last = (0.0, 0.0);
            for m in 1..=p.len() {
                let pf = product_form_hit_ratio(&p, m).unwrap();
                let lru = lru_exact_hit_ratio(&p, m).unwrap();
                prop_assert!((0.0..=1.0).contains(&pf) && (0.0..=1.0).contains(&lru));
                prop_assert!(pf >= last.0 - 1e-12 && lru >= last.1 - 1e-12);
                prop_assert!(lru >= pf - 1e-12);
                last = (pf, lru);
            }
        }

        #[test]
        fn product_form_equals_chains(p in arb_pmf(5), m in 1usize..4) {
            prop_assume!(m <= p.len());
            let exact = product_form_hit_ratio(&p, m).unwrap();
            for policy in [ChainPolicy::Fifo, ChainPolicy::Random, ChainPolicy::Clock] {
                let sol = brute_force_chain(&ChainSpec::unit(policy, &p, m as u64)).unwrap();
                prop_assert!((sol.ratios.ohr - exact).abs() < 1e-10);
                prop_assert!(sol.residual < 1e-12);
            }
        }

        #[test]
        fn product_form_matches_enumeration(p in arb_pmf(9), m in 1usize..6) {
            prop_assume!(m <= p.len());
            let n = p.len();
            let (mut z, mut y) = (0.0, 0.0);
            for set in 0usize..(1 << n) {
                if set.count_ones() as usize == m {
                    let w: f64 = (0..n).filter(|b| set >> b & 1 == 1).map(|b| p[b]).product();
                    let h: f64 = (0..n).filter(|b| set >> b & 1 == 1).map(|b| p[b]).sum();
                    z += w;
                    y += w * h;
                }
            }
            prop_assert!((product_form_hit_ratio(&p, m).unwrap() - y / z).abs() < 1e-12);
        }
    }
}
