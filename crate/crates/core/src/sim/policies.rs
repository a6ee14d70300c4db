use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use ordered_float::OrderedFloat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::list::{DList, Links, NIL};
use super::{AdmitRule, LevelKind, PolicyKind, ScoreSpec};
use crate::catalog::{seeded_rng, Catalog};
use crate::{Error, Result};

/// Result of presenting one request to a policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Access {
    Hit,
    Admitted,
    Rejected,
}

pub(crate) trait Policy {
    fn contains(&self, k: usize) -> bool;
    fn used(&self) -> u64;
    /// Handles a request for an object no larger than the capacity.
    fn access(&mut self, k: usize) -> Access;
    fn residents(&self) -> Vec<usize>;
}

#[derive(Debug, Clone)]
struct Objects {
    sizes: Arc<[u64]>,
    values: Arc<[f64]>,
    capacity: u64,
}

impl Objects {
    fn size(&self, k: usize) -> u64 {
        self.sizes[k]
    }
}

pub(crate) fn build(kind: &PolicyKind, seed: u64, catalog: &Catalog, capacity: u64) -> Result<Box<dyn Policy>> {
    let objects = Objects {
        sizes: catalog.sizes().into(),
        values: catalog.values().into(),
        capacity,
    };
    build_with(kind, seed, objects)
}

fn build_with(kind: &PolicyKind, seed: u64, o: Objects) -> Result<Box<dyn Policy>> {
    let n = o.sizes.len();
    Ok(match kind {
        PolicyKind::Lru => Box::new(Lru::new(o)),
        PolicyKind::Fifo => Box::new(Ring::new(o, false)),
        PolicyKind::ClockPerRequest => Box::new(Ring::new(o, true)),
        PolicyKind::Random => Box::new(RandomEvict::new(o, seed)),
        PolicyKind::Lfu => Box::new(Lfu::new(o, None)),
        PolicyKind::WindowLfu { window } => {
            if *window == 0 {
                return Err(Error::invalid("window LFU needs a window of at least one request"));
            }
            Box::new(Lfu::new(o, Some(*window)))
        }
        PolicyKind::ScoreGatedClock { score } => Box::new(ScoreGated::new(o, *score)),
        PolicyKind::GreedyDual { score } => Box::new(GreedyDual::new(o, *score)),
        PolicyKind::MultiLevel { levels } => Box::new(MultiLevel::new(o, levels, seed)?),
        PolicyKind::ProbAdmit { inner, rule } => {
            let q: Vec<f64> = match rule {
                AdmitRule::PerObject(q) => {
                    if q.len() != n {
                        return Err(Error::invalid(format!(
                            "{} admission probabilities for {n} objects",
                            q.len()
                        )));
                    }
                    q.clone()
                }
                AdmitRule::SizeValue { beta } => (0..n)
                    .map(|k| {
                        if o.values[k] > 0.0 {
                            (-beta * o.sizes[k] as f64 / o.values[k]).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            };
            if let AdmitRule::PerObject(_) = rule {
                if let Some(bad) = q.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
                    return Err(Error::invalid(format!("admission probability {bad} outside (0, 1]")));
                }
            }
            let inner = build_with(inner, seed, o)?;
            Box::new(ProbAdmit {
                inner,
                q,
                rng: seeded_rng(seed ^ GATE_STREAM),
            })
        }
    })
}

/// Separates the gating stream from the inner policy's stream.
const GATE_STREAM: u64 = 0x6a09_e667_f3bc_c908;

struct Lru {
    o: Objects,
    links: Links,
    list: DList,
    resident: Vec<bool>,
    used: u64,
}

impl Lru {
    fn new(o: Objects) -> Self {
        let n = o.sizes.len();
        Lru {
            o,
            links: Links::new(n),
            list: DList::new(),
            resident: vec![false; n],
            used: 0,
        }
    }
}

impl Policy for Lru {
    fn contains(&self, k: usize) -> bool {
        self.resident[k]
    }

    fn used(&self) -> u64 {
        self.used
    }

    fn access(&mut self, k: usize) -> Access {
        // list front is the least recently used object
        if self.resident[k] {
            self.list.move_to_back(&mut self.links, k);
            return Access::Hit;
        }
        let s = self.o.size(k);
        while self.used + s > self.o.capacity {
            let victim = self.list.pop_front(&mut self.links).expect("cache overfull");
            self.resident[victim] = false;
            self.used -= self.o.size(victim);
        }
        self.list.push_back(&mut self.links, k);
        self.resident[k] = true;
        self.used += s;
        Access::Admitted
    }

    fn residents(&self) -> Vec<usize> {
        self.list.iter(&self.links).collect()
    }
}

/// FIFO, or clock-per-request when `rotate` is set. The deque front is the
/// oldest object, which for the clock is the slot under the hand.
struct Ring {
    o: Objects,
    ring: VecDeque<usize>,
    resident: Vec<bool>,
    used: u64,
    rotate: bool,
}

impl Ring {
    fn new(o: Objects, rotate: bool) -> Self {
        let n = o.sizes.len();
        Ring {
            o,
            ring: VecDeque::new(),
            resident: vec![false; n],
            used: 0,
            rotate,
        }
    }
}

impl Policy for Ring {
    fn contains(&self, k: usize) -> bool {
        self.resident[k]
    }

    fn used(&self) -> u64 {
        self.used
    }

    fn access(&mut self, k: usize) -> Access {
        if self.resident[k] {
            if self.rotate {
                self.ring.rotate_left(1);
            }
            return Access::Hit;
        }
        let s = self.o.size(k);
        while self.used + s > self.o.capacity {
            let victim = self.ring.pop_front().expect("cache overfull");
            self.resident[victim] = false;
            self.used -= self.o.size(victim);
        }
        self.ring.push_back(k);
        self.resident[k] = true;
        self.used += s;
        Access::Admitted
    }

    fn residents(&self) -> Vec<usize> {
        self.ring.iter().copied().collect()
    }
}

struct RandomEvict {
    o: Objects,
    members: Vec<usize>,
    pos: Vec<usize>,
    used: u64,
    rng: ChaCha8Rng,
}

impl RandomEvict {
    fn new(o: Objects, seed: u64) -> Self {
        let n = o.sizes.len();
        RandomEvict {
            o,
            members: Vec::new(),
            pos: vec![NIL; n],
            used: 0,
            rng: seeded_rng(seed),
        }
    }
}

impl Policy for RandomEvict {
    fn contains(&self, k: usize) -> bool {
        self.pos[k] != NIL
    }

    fn used(&self) -> u64 {
        self.used
    }

    fn access(&mut self, k: usize) -> Access {
        if self.pos[k] != NIL {
            return Access::Hit;
        }
        let s = self.o.size(k);
        while self.used + s > self.o.capacity {
            let i = self.rng.random_range(0..self.members.len());
            let victim = self.members.swap_remove(i);
            if i < self.members.len() {
                self.pos[self.members[i]] = i;
            }
            self.pos[victim] = NIL;
            self.used -= self.o.size(victim);
        }
        self.pos[k] = self.members.len();
        self.members.push(k);
        self.used += s;
        Access::Admitted
    }

    fn residents(&self) -> Vec<usize> {
        self.members.clone()
    }
}

/// LFU over the full history or over a sliding window of requests.
struct Lfu {
    o: Objects,
    counts: Vec<u64>,
    /// Residents keyed by (count, insertion sequence, object).
    order: BTreeSet<(u64, u64, usize)>,
    seq: Vec<u64>,
    resident: Vec<bool>,
    next_seq: u64,
    used: u64,
    window: Option<(usize, VecDeque<usize>)>,
}

impl Lfu {
    fn new(o: Objects, window: Option<usize>) -> Self {
        let n = o.sizes.len();
        Lfu {
            o,
            counts: vec![0; n],
            order: BTreeSet::new(),
            seq: vec![0; n],
            resident: vec![false; n],
            next_seq: 0,
            used: 0,
            window: window.map(|w| (w, VecDeque::with_capacity(w + 1))),
        }
    }

    fn adjust(&mut self, k: usize, up: bool) {
        let old = self.counts[k];
        let new = if up { old + 1 } else { old - 1 };
        if self.resident[k] {
            self.order.remove(&(old, self.seq[k], k));
            self.order.insert((new, self.seq[k], k));
        }
        self.counts[k] = new;
    }
}

impl Policy for Lfu {
    fn contains(&self, k: usize) -> bool {
        self.resident[k]
    }

    fn used(&self) -> u64 {
        self.used
    }

    fn access(&mut self, k: usize) -> Access {
        self.adjust(k, true);
        if let Some((w, mut ring)) = self.window.take() {
            ring.push_back(k);
            if ring.len() > w {
                let old = ring.pop_front().expect("window non-empty");
                self.adjust(old, false);
            }
            self.window = Some((w, ring));
        }
        if self.resident[k] {
            return Access::Hit;
        }
        let s = self.o.size(k);
        if self.used + s > self.o.capacity {
            let need = self.used + s - self.o.capacity;
            let mut freed = 0;
            let mut victims = Vec::new();
            for &(c, _, v) in &self.order {
                if c >= self.counts[k] {
                    return Access::Rejected;
                }
                victims.push(v);
                freed += self.o.size(v);
                if freed >= need {
                    break;
                }
            }
            for v in victims {
                self.order.remove(&(self.counts[v], self.seq[v], v));
                self.resident[v] = false;
                self.used -= self.o.size(v);
            }
        }
        self.seq[k] = self.next_seq;
        self.next_seq += 1;
        self.order.insert((self.counts[k], self.seq[k], k));
        self.resident[k] = true;
        self.used += s;
        Access::Admitted
    }

    fn residents(&self) -> Vec<usize> {
        self.order.iter().map(|&(_, _, k)| k).collect()
    }
}

/// Clock-per-request eviction with score-based admission.
struct ScoreGated {
    o: Objects,
    score: ScoreSpec,
    counts: Vec<u64>,
    ring: VecDeque<usize>,
    resident: Vec<bool>,
    used: u64,
}

impl ScoreGated {
    fn new(o: Objects, score: ScoreSpec) -> Self {
        let n = o.sizes.len();
        ScoreGated {
            o,
            score,
            counts: vec![0; n],
            ring: VecDeque::new(),
            resident: vec![false; n],
            used: 0,
        }
    }

    fn score_of(&self, k: usize) -> f64 {
        self.score.eval(self.counts[k], self.o.values[k], self.o.sizes[k])
    }
}

impl Policy for ScoreGated {
    fn contains(&self, k: usize) -> bool {
        self.resident[k]
    }

    fn used(&self) -> u64 {
        self.used
    }

    fn access(&mut self, k: usize) -> Access {
        self.counts[k] += 1;
        if self.resident[k] {
            self.ring.rotate_left(1);
            return Access::Hit;
        }
        let s = self.o.size(k);
        if self.used + s > self.o.capacity {
            let need = self.used + s - self.o.capacity;
            let score = self.score_of(k);
            let mut freed = 0;
            let mut evict = 0;
            let mut admit = true;
            for &c in &self.ring {
                if score <= self.score_of(c) {
                    admit = false;
                    break;
                }
                evict += 1;
                freed += self.o.size(c);
                if freed >= need {
                    break;
                }
            }
            if !admit {
                self.ring.rotate_left(1);
                return Access::Rejected;
            }
            for _ in 0..evict {
                let v = self.ring.pop_front().expect("candidate present");
                self.resident[v] = false;
                self.used -= self.o.size(v);
            }
        }
        self.ring.push_back(k);
        self.resident[k] = true;
        self.used += s;
        Access::Admitted
    }

    fn residents(&self) -> Vec<usize> {
        self.ring.iter().copied().collect()
    }
}

struct GreedyDual {
    o: Objects,
    score: ScoreSpec,
    counts: Vec<u64>,
    priority: Vec<f64>,
    seq: Vec<u64>,
    order: BTreeSet<(OrderedFloat<f64>, u64, usize)>,
    resident: Vec<bool>,
    inflation: f64,
    next_seq: u64,
    used: u64,
}

impl GreedyDual {
    fn new(o: Objects, score: ScoreSpec) -> Self {
        let n = o.sizes.len();
        GreedyDual {
            o,
            score,
            counts: vec![0; n],
            priority: vec![0.0; n],
            seq: vec![0; n],
            order: BTreeSet::new(),
            resident: vec![false; n],
            inflation: 0.0,
            next_seq: 0,
            used: 0,
        }
    }

    fn place(&mut self, k: usize) {
        self.priority[k] = self.inflation + self.score.eval(self.counts[k], self.o.values[k], self.o.sizes[k]);
        self.seq[k] = self.next_seq;
        self.next_seq += 1;
        self.order.insert((OrderedFloat(self.priority[k]), self.seq[k], k));
    }
}

impl Policy for GreedyDual {
    fn contains(&self, k: usize) -> bool {
        self.resident[k]
    }

    fn used(&self) -> u64 {
        self.used
    }

    fn access(&mut self, k: usize) -> Access {
        self.counts[k] += 1;
        if self.resident[k] {
            self.order.remove(&(OrderedFloat(self.priority[k]), self.seq[k], k));
            self.place(k);
            return Access::Hit;
        }
        let s = self.o.size(k);
        while self.used + s > self.o.capacity {
            let (h, _, v) = self.order.pop_first().expect("cache overfull");
            self.inflation = self.inflation.max(h.0);
            self.resident[v] = false;
            self.used -= self.o.size(v);
        }
        self.place(k);
        self.resident[k] = true;
        self.used += s;
        Access::Admitted
    }

    fn residents(&self) -> Vec<usize> {
        self.order.iter().map(|&(_, _, k)| k).collect()
    }
}

struct Level {
    kind: LevelKind,
    slots: usize,
    list: DList,
    /// Unordered members with positions, for uniform candidate draws.
    members: Vec<usize>,
}

/// Stacked unit-size levels; level 0 is the top, misses enter the last one.
struct MultiLevel {
    levels: Vec<Level>,
    links: Links,
    level_of: Vec<usize>,
    member_pos: Vec<usize>,
    rng: ChaCha8Rng,
}

impl MultiLevel {
    fn new(o: Objects, spec: &[(usize, LevelKind)], seed: u64) -> Result<Self> {
        if spec.is_empty() || spec.iter().any(|&(l, _)| l == 0) {
            return Err(Error::invalid("multi-level cache needs levels of at least one slot"));
        }
        if o.sizes.iter().any(|&s| s != 1) {
            return Err(Error::invalid("multi-level caches support unit object sizes only"));
        }
        let total: usize = spec.iter().map(|&(l, _)| l).sum();
        if total as u64 != o.capacity {
            return Err(Error::invalid(format!(
                "level sizes sum to {total} but the capacity is {}",
                o.capacity
            )));
        }
        let n = o.sizes.len();
        Ok(MultiLevel {
            levels: spec
                .iter()
                .map(|&(slots, kind)| Level {
                    kind,
                    slots,
                    list: DList::new(),
                    members: Vec::new(),
                })
                .collect(),
            links: Links::new(n),
            level_of: vec![NIL; n],
            member_pos: vec![NIL; n],
            rng: seeded_rng(seed),
        })
    }

    fn candidate(&mut self, j: usize) -> usize {
        let level = &self.levels[j];
        match level.kind {
            LevelKind::Random => level.members[self.rng.random_range(0..level.members.len())],
            _ => level.list.front().expect("full level has a front"),
        }
    }

    fn detach(&mut self, j: usize, k: usize) {
        let level = &mut self.levels[j];
        level.list.remove(&mut self.links, k);
        self.detach_member(j, k);
    }

    fn detach_member(&mut self, j: usize, k: usize) {
        let level = &mut self.levels[j];
        let i = self.member_pos[k];
        level.members.swap_remove(i);
        if i < level.members.len() {
            self.member_pos[level.members[i]] = i;
        }
        self.member_pos[k] = NIL;
        self.level_of[k] = NIL;
    }

    fn attach(&mut self, j: usize, k: usize) {
        let level = &mut self.levels[j];
        level.list.push_back(&mut self.links, k);
        self.attach_member(j, k);
    }

    fn attach_member(&mut self, j: usize, k: usize) {
        let level = &mut self.levels[j];
        self.member_pos[k] = level.members.len();
        level.members.push(k);
        self.level_of[k] = j;
    }
}

impl Policy for MultiLevel {
    fn contains(&self, k: usize) -> bool {
        self.level_of[k] != NIL
    }

    fn used(&self) -> u64 {
        self.levels.iter().map(|l| l.list.len() as u64).sum()
    }

    fn access(&mut self, k: usize) -> Access {
        let j = self.level_of[k];
        if j == 0 {
            let level = &mut self.levels[0];
            match level.kind {
                LevelKind::Lru => level.list.move_to_back(&mut self.links, k),
                LevelKind::Clock => {
                    let front = level.list.pop_front(&mut self.links).expect("level non-empty");
                    level.list.push_back(&mut self.links, front);
                }
                LevelKind::Fifo | LevelKind::Random => {}
            }
            return Access::Hit;
        }
        if j != NIL {
            let up = j - 1;
            if self.levels[up].list.len() < self.levels[up].slots {
                self.detach(j, k);
                self.attach(up, k);
                return Access::Hit;
            }
            // the promoted object enters the upper level as its newest entry,
            // the demoted candidate takes over the promoted object's slot
            let c = self.candidate(up);
            self.detach(up, c);
            self.levels[j].list.replace(&mut self.links, k, c);
            self.detach_member(j, k);
            self.attach_member(j, c);
            self.attach(up, k);
            return Access::Hit;
        }
        let bottom = self.levels.len() - 1;
        if self.levels[bottom].list.len() >= self.levels[bottom].slots {
            let c = self.candidate(bottom);
            self.detach(bottom, c);
        }
        self.attach(bottom, k);
        Access::Admitted
    }

    fn residents(&self) -> Vec<usize> {
        self.levels.iter().flat_map(|l| l.list.iter(&self.links)).collect()
    }
}

/// Each request is handled by the inner policy with probability `q_k`;
/// otherwise the cache stays as it is.
struct ProbAdmit {
    inner: Box<dyn Policy>,
    q: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Policy for ProbAdmit {
    fn contains(&self, k: usize) -> bool {
        self.inner.contains(k)
    }

    fn used(&self) -> u64 {
        self.inner.used()
    }

    fn access(&mut self, k: usize) -> Access {
        let q = self.q[k];
        if q >= 1.0 || self.rng.random::<f64>() < q {
            self.inner.access(k)
        } else if self.inner.contains(k) {
            Access::Hit
        } else {
            Access::Rejected
        }
    }

    fn residents(&self) -> Vec<usize> {
        self.inner.residents()
    }
}
