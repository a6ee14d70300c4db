use std::time::Instant;

use cachelab::approx::{self, Approximation};
use cachelab::bounds;
use cachelab::catalog::{self, Trace};
use cachelab::markov::{self, ChainPolicy, ChainSpec, HitRatios};
use cachelab::sim::{self, AdmitRule, PolicyConfig, PolicyKind, SimOptions, SimReport};
use cachelab::ttl::{self, RateModel, ResetKind, TtlDiscipline, TtlTarget};
use cachelab::Error;
use rayon::prelude::*;

use crate::args::{ApproxArgs, BoundsArgs, Common, ExactArgs, GenArgs, TraceKind, TtlArgs};
use crate::output::{Row, STATUS_OK};
use crate::workload::{self, is_unit, parse_capacities, parse_list, parse_policies, Source};
use crate::Failure;

const BASIC_POLICIES: &str = "lru,fifo,cpr,random";

type Solver = fn(&[f64], usize) -> cachelab::Result<Approximation>;

/// Identity shared by the rows of one cell.
#[derive(Clone)]
struct Cell<'a> {
    experiment: &'a str,
    name: String,
    capacity: Option<u64>,
    param: Option<f64>,
    seed: u64,
    replication: usize,
}

impl Cell<'_> {
    fn row(&self, metric: &str, value: f64, stderr: Option<f64>, runtime: f64) -> Row {
        Row {
            experiment: self.experiment.to_string(),
            name: self.name.clone(),
            capacity: self.capacity,
            param: self.param,
            metric: metric.to_string(),
            value: Some(value),
            stderr,
            seed: self.seed,
            replication: self.replication,
            runtime,
            status: STATUS_OK.to_string(),
        }
    }

    fn skipped(&self, metric: &str, err: &Error) -> Row {
        let reason = match err {
            Error::ResourceLimit { .. } => "resource-limit",
            Error::UnsupportedPolicy(_) => "unsupported",
            Error::OutOfRange { .. } => "out-of-range",
            _ => "error",
        };
        let at = match (self.capacity, self.param) {
            (Some(m), _) => format!(" at capacity {m}"),
            (None, Some(p)) => format!(" at {p}"),
            (None, None) => String::new(),
        };
        eprintln!("warning: {} {}{at}: {err}", self.experiment, self.name);
        Row {
            value: None,
            stderr: None,
            status: format!("skipped: {reason}"),
            ..self.row(metric, 0.0, None, 0.0)
        }
    }

    /// Runs `f`, turning its result into rows or into one skipped row.
    fn run<T>(
        &self,
        metric: &str,
        f: impl FnOnce() -> cachelab::Result<T>,
        emit: impl FnOnce(&Self, T, f64) -> Vec<Row>,
    ) -> Vec<Row> {
        let t0 = Instant::now();
        match f() {
            Ok(v) => emit(self, v, t0.elapsed().as_secs_f64()),
            Err(e) => vec![self.skipped(metric, &e)],
        }
    }
}

fn experiment(c: &Common, default: &str) -> String {
    c.experiment.clone().unwrap_or_else(|| default.to_string())
}

fn replications(c: &Common) -> Result<usize, Failure> {
    if c.reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    Ok(c.reps)
}

fn rep_seed(c: &Common, rep: usize) -> u64 {
    c.seed.wrapping_add(rep as u64)
}

fn traces(c: &Common, source: &Source) -> Result<Vec<Trace>, Failure> {
    (0..replications(c)?)
        .into_par_iter()
        .map(|r| source.trace(c.requests, rep_seed(c, r)))
        .collect()
}

fn sim_rows(cell: &Cell, r: &SimReport, runtime: f64) -> Vec<Row> {
    let mut rows = vec![
        cell.row("ohr", r.ohr, Some(r.ohr_stderr), runtime),
        cell.row("bhr", r.bhr, None, runtime),
        cell.row("vhr", r.vhr, None, runtime),
    ];
    if let Ok(u) = sim::upload_ratio(r) {
        rows.push(cell.row("upload_ratio", u, None, runtime));
    }
    rows
}

fn ratio_rows(cell: &Cell, h: &HitRatios, runtime: f64) -> Vec<Row> {
    vec![
        cell.row("ohr", h.ohr, None, runtime),
        cell.row("bhr", h.bhr, None, runtime),
        cell.row("vhr", h.vhr, None, runtime),
    ]
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Hit fraction with a 32-batch-means standard error.
fn batch_hit_ratio(hits: &[bool]) -> (f64, Option<f64>) {
    const BATCHES: usize = 32;
    let mean = hits.iter().filter(|&&h| h).count() as f64 / hits.len().max(1) as f64;
    if hits.len() < BATCHES * 2 {
        return (mean, None);
    }
    let len = hits.len() / BATCHES;
    let means: Vec<f64> = hits
        .chunks(len)
        .take(BATCHES)
        .map(|b| b.iter().filter(|&&h| h).count() as f64 / b.len() as f64)
        .collect();
    (mean, Some(mean_stderr(&means).1))
}

pub fn gen(a: &GenArgs) -> Result<Trace, Failure> {
    let c = &a.common;
    let cat = workload::build_catalog(c)?;
    let trace = match a.kind {
        TraceKind::Irm => catalog::generate_irm_trace(&cat, c.requests, c.seed)?,
        TraceKind::Prm => catalog::generate_prm_trace(&cat, a.rate, a.horizon, c.seed)?,
        TraceKind::Loop => catalog::loop_trace(c.objects, c.requests)?,
    };
    Ok(trace)
}

pub fn sim(c: &Common) -> Result<Vec<Row>, Failure> {
    let exp = experiment(c, "sim");
    let caps = parse_capacities(&c.capacity)?;
    let policies = parse_policies(c.policy.as_deref(), BASIC_POLICIES)?;
    let source = Source::new(c)?;
    let traces = traces(c, &source)?;
    let caps = &caps;
    let cells: Vec<(usize, &PolicyKind, u64)> = (0..traces.len())
        .flat_map(|r| policies.iter().flat_map(move |p| caps.iter().map(move |&m| (r, p, m))))
        .collect();
    Ok(cells
        .par_iter()
        .flat_map_iter(|&(rep, policy, cap)| {
            let seed = rep_seed(c, rep);
            let cell = Cell {
                experiment: &exp,
                name: policy.to_string(),
                capacity: Some(cap),
                param: None,
                seed,
                replication: rep,
            };
            let config = PolicyConfig::with_seed(policy.clone(), seed);
            cell.run(
                "ohr",
                || sim::simulate(&config, &traces[rep], cap, c.warmup),
                |cell, r, t| sim_rows(cell, &r, t),
            )
        })
        .collect())
}

pub fn sweep(c: &Common) -> Result<Vec<Row>, Failure> {
    let exp = experiment(c, "sweep");
    let caps = parse_capacities(&c.capacity)?;
    let policies = parse_policies(c.policy.as_deref(), "lru,fifo,random,lfu")?;
    let source = Source::new(c)?;
    let traces = traces(c, &source)?;
    let cells: Vec<(usize, &PolicyKind)> = (0..traces.len())
        .flat_map(|r| policies.iter().map(move |p| (r, p)))
        .collect();
    let mut rows: Vec<Row> = cells
        .par_iter()
        .flat_map_iter(|&(rep, policy)| {
            let trace = &traces[rep];
            let seed = rep_seed(c, rep);
            let cell = |cap| Cell {
                experiment: &exp,
                name: policy.to_string(),
                capacity: Some(cap),
                param: None,
                seed,
                replication: rep,
            };
            let largest = trace
                .requests()
                .iter()
                .map(|r| trace.catalog().entry(r.object).size)
                .max();
            let fast = *policy == PolicyKind::Lru && largest.is_none_or(|s| s <= caps[0]);
            if fast {
                let t0 = Instant::now();
                match sim::hrc_sweep_stack(policy, trace, &caps, c.warmup) {
                    Ok(reports) => {
                        let t = t0.elapsed().as_secs_f64() / caps.len() as f64;
                        return reports
                            .iter()
                            .zip(&caps)
                            .flat_map(|(r, &m)| sim_rows(&cell(m), r, t))
                            .collect::<Vec<_>>();
                    }
                    Err(e) => return caps.iter().map(|&m| cell(m).skipped("ohr", &e)).collect(),
                }
            }
            let config = PolicyConfig::with_seed(policy.clone(), seed);
            caps.iter()
                .flat_map(|&m| {
                    cell(m).run(
                        "ohr",
                        || sim::simulate(&config, trace, m, c.warmup),
                        |cell, r, t| sim_rows(cell, &r, t),
                    )
                })
                .collect()
        })
        .collect();

    let cat = source.catalog();
    let (pmf, sizes, values) = (cat.pmf(), cat.sizes(), cat.values());
    let ones = vec![1.0; pmf.len()];
    let unit = is_unit(cat);
    let weighted = values.iter().any(|&v| v != 1.0);
    let analytic: Vec<Row> = caps
        .par_iter()
        .flat_map_iter(|&m| {
            let cell = |name: &str| Cell {
                experiment: &exp,
                name: name.to_string(),
                capacity: Some(m),
                param: None,
                seed: c.seed,
                replication: 0,
            };
            let bound_rows = |cell: &Cell, b: bounds::KnapsackBound, t| {
                vec![
                    cell.row("bound_lo", b.lower, None, t),
                    cell.row("bound_hi", b.upper, None, t),
                ]
            };
            let mut rows = cell("static_ohr").run(
                "bound_hi",
                || bounds::static_knapsack_bound(pmf, &sizes, &ones, m),
                bound_rows,
            );
            if weighted {
                rows.extend(cell("static_vhr").run(
                    "bound_hi",
                    || bounds::static_knapsack_bound(pmf, &sizes, &values, m),
                    bound_rows,
                ));
            }
            if unit && (m as usize) <= pmf.len() {
                let solvers: [(&str, Solver); 3] = [
                    ("che", approx::che_lru),
                    ("fagin", approx::fagin_lru),
                    ("fifo_approx", approx::fifo_approx),
                ];
                for (name, solve) in solvers {
                    rows.extend(cell(name).run(
                        "ohr",
                        || solve(pmf, m as usize),
                        |cell, a, t| vec![cell.row("ohr", a.hit_ratio, None, t)],
                    ));
                }
            }
            rows
        })
        .collect();
    rows.extend(analytic);
    Ok(rows)
}

fn chain_policy(
    kind: &PolicyKind,
    catalog: &cachelab::catalog::Catalog,
) -> Result<(ChainPolicy, Option<Vec<f64>>), Error> {
    Ok(match kind {
        PolicyKind::Lru => (ChainPolicy::Lru, None),
        PolicyKind::Fifo => (ChainPolicy::Fifo, None),
        PolicyKind::ClockPerRequest => (ChainPolicy::Clock, None),
        PolicyKind::Random => (ChainPolicy::Random, None),
        PolicyKind::MultiLevel { levels } => (ChainPolicy::MultiLevel(levels.clone()), None),
        PolicyKind::ProbAdmit { inner, rule } => {
            let (policy, _) = chain_policy(inner, catalog)?;
            let q = match rule {
                AdmitRule::PerObject(q) => q.clone(),
                AdmitRule::SizeValue { beta } => catalog
                    .entries()
                    .iter()
                    .map(|e| (-beta * e.size as f64 / e.value).exp())
                    .collect(),
            };
            (policy, Some(q))
        }
        other => return Err(Error::UnsupportedPolicy(format!("{other} has no explicit chain"))),
    })
}

pub fn exact(a: &ExactArgs) -> Result<Vec<Row>, Failure> {
    let c = &a.common;
    let exp = experiment(c, "exact");
    let caps = parse_capacities(&c.capacity)?;
    let policies = parse_policies(c.policy.as_deref(), BASIC_POLICIES)?;
    let cat = workload::build_catalog(c)?;
    let (pmf, sizes, values) = (cat.pmf(), cat.sizes(), cat.values());
    let unit = is_unit(&cat);
    // None stands for the exact LRU solver, Some for a chain
    let cells: Vec<(Option<&PolicyKind>, u64)> = caps
        .iter()
        .flat_map(|&m| std::iter::once((None, m)).chain(policies.iter().map(move |p| (Some(p), m))))
        .collect();
    Ok(cells
        .par_iter()
        .flat_map_iter(|&(policy, m)| {
            let cell = |name: String| Cell {
                experiment: &exp,
                name,
                capacity: Some(m),
                param: None,
                seed: c.seed,
                replication: 0,
            };
            match policy {
                None => {
                    let mut rows = cell("lru_exact".into()).run(
                        "ohr",
                        || markov::lru_exact_variable_size(pmf, &sizes, &values, m),
                        |cell, h, t| ratio_rows(cell, &h, t),
                    );
                    if unit {
                        rows.extend(cell("product_form".into()).run(
                            "ohr",
                            || markov::product_form_hit_ratio(pmf, m as usize),
                            |cell, h, t| vec![cell.row("ohr", h, None, t)],
                        ));
                    }
                    rows
                }
                Some(p) => cell(format!("chain:{p}")).run(
                    "ohr",
                    || {
                        let (policy, admit) = chain_policy(p, &cat)?;
                        let mut spec = ChainSpec::sized(policy, pmf, &sizes, &values, m);
                        spec.admit = admit;
                        spec.state_limit = a.state_limit;
                        markov::brute_force_chain(&spec)
                    },
                    |cell, s, t| {
                        let mut rows = ratio_rows(cell, &s.ratios, t);
                        rows.push(cell.row("residual", s.residual, None, t));
                        rows
                    },
                ),
            }
        })
        .collect())
}

pub fn approx(a: &ApproxArgs) -> Result<Vec<Row>, Failure> {
    let c = &a.common;
    let exp = experiment(c, "approx");
    let caps = parse_capacities(&c.capacity)?;
    let source = Source::new(c)?;
    let pmf = source.catalog().pmf();
    Ok(caps
        .par_iter()
        .flat_map_iter(|&cap| {
            let m = cap as usize;
            let cell = |name: &str| Cell {
                experiment: &exp,
                name: name.to_string(),
                capacity: Some(cap),
                param: None,
                seed: c.seed,
                replication: 0,
            };
            let hit = |cell: &Cell, h: f64, t| vec![cell.row("ohr", h, None, t)];
            let mut rows = Vec::new();
            rows.extend(cell("che").run("ohr", || approx::che_lru(pmf, m), |cl, x, t| hit(cl, x.hit_ratio, t)));
            rows.extend(cell("fagin").run("ohr", || approx::fagin_lru(pmf, m), |cl, x, t| hit(cl, x.hit_ratio, t)));
            rows.extend(cell("fifo_approx").run(
                "ohr",
                || approx::fifo_approx(pmf, m),
                |cl, x, t| hit(cl, x.hit_ratio, t),
            ));
            rows.extend(cell("product_form").run("ohr", || markov::product_form_hit_ratio(pmf, m), hit));
            if pmf.len() <= markov::DEFAULT_LRU_OBJECT_LIMIT {
                rows.extend(cell("lru_exact").run("ohr", || markov::lru_exact_hit_ratio(pmf, m), hit));
            }
            rows.extend(cell("characteristic_time").run(
                "t_che",
                || approx::characteristic_times(pmf, m),
                |cl, ct, t| vec![cl.row("t_che", ct.t_che, None, t), cl.row("ct", ct.ct_fagin, None, t)],
            ));
            if a.fill_reps > 0 {
                rows.extend(cell("fill_sim").run(
                    "ct",
                    || approx::simulate_fill_times(pmf, m, a.fill_reps, c.seed),
                    |cl, times, t| {
                        let xs: Vec<f64> = times.iter().map(|&x| x as f64).collect();
                        let (mean, se) = mean_stderr(&xs);
                        vec![cl.row("ct", mean, Some(se), t)]
                    },
                ));
            }
            rows
        })
        .collect())
}

pub fn bounds(a: &BoundsArgs) -> Result<Vec<Row>, Failure> {
    let c = &a.common;
    let exp = experiment(c, "bounds");
    let caps = parse_capacities(&c.capacity)?;
    let source = Source::new(c)?;
    let trimmed: Vec<Trace> = traces(c, &source)?
        .iter()
        .map(|t| t.trimmed(a.trim, a.trim))
        .collect::<Result<_, _>>()
        .map_err(Failure::from_usage)?;
    let unit = is_unit(source.catalog());
    let cells: Vec<(usize, u64)> = (0..trimmed.len())
        .flat_map(|r| caps.iter().map(move |&m| (r, m)))
        .collect();
    let mut rows: Vec<Row> = cells
        .par_iter()
        .flat_map_iter(|&(rep, m)| {
            let trace = &trimmed[rep];
            let cell = |name: &str| Cell {
                experiment: &exp,
                name: name.to_string(),
                capacity: Some(m),
                param: None,
                seed: rep_seed(c, rep),
                replication: rep,
            };
            let mut rows = cell("knapsack_2d").run(
                "bound_lo",
                || bounds::knapsack_2d_bounds(trace, m, None),
                |cl, b, t| {
                    vec![
                        cl.row("bound_lo", b.vhr_lower, None, t),
                        cl.row("bound_hi", b.vhr_upper, None, t),
                        cl.row("v_lower", b.v_lower, None, t),
                        cl.row("v_upper", b.v_upper, None, t),
                        cl.row("v_total", b.v_total, None, t),
                    ]
                },
            );
            if unit {
                rows.extend(cell("belady").run(
                    "ohr",
                    || bounds::belady(trace, m as usize),
                    |cl, b, t| {
                        vec![
                            cl.row("ohr", b.hit_ratio, None, t),
                            cl.row("hits", b.hits as f64, None, t),
                        ]
                    },
                ));
            }
            if a.exhaustive {
                rows.extend(cell("exhaustive").run(
                    "v_max",
                    || bounds::exhaustive_offline_optimum(trace, m),
                    |cl, v, t| vec![cl.row("v_max", v, None, t)],
                ));
            }
            rows
        })
        .collect();
    if source.is_generated() {
        let cat = source.catalog();
        let (pmf, sizes, values) = (cat.pmf(), cat.sizes(), cat.values());
        rows.extend(caps.iter().flat_map(|&m| {
            let cell = Cell {
                experiment: &exp,
                name: "static".into(),
                capacity: Some(m),
                param: None,
                seed: c.seed,
                replication: 0,
            };
            cell.run(
                "bound_hi",
                || bounds::static_knapsack_bound(pmf, &sizes, &values, m),
                |cl, b, t| {
                    vec![
                        cl.row("bound_lo", b.lower, None, t),
                        cl.row("bound_hi", b.upper, None, t),
                    ]
                },
            )
        }));
    }
    Ok(rows)
}

pub fn ttl(a: &TtlArgs) -> Result<Vec<Row>, Failure> {
    let c = &a.common;
    let exp = experiment(c, "ttl");
    let ttls: Vec<f64> = parse_list(&a.ttl, "ttl")?;
    if ttls.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Failure::usage("ttl values must be finite and non-negative"));
    }
    let kinds: Vec<ResetKind> = parse_list(&a.reset, "reset rule")?;
    let source = Source::new(c)?;
    let model = match &source {
        Source::File(t) => RateModel::from_trace(t).map_err(|e| Failure::data(format!("trace rates: {e}")))?,
        Source::Generated(cat) => RateModel::from_pmf(cat.pmf(), a.rate).map_err(Failure::from_usage)?,
    };
    let reps = replications(c)?;
    let sim_traces: Vec<Trace> = match (&source, a.horizon) {
        (Source::Generated(cat), Some(h)) => (0..reps)
            .into_par_iter()
            .map(|r| catalog::generate_prm_trace(cat, a.rate, h, rep_seed(c, r)))
            .collect::<Result<_, _>>()
            .map_err(Failure::from_usage)?,
        (Source::File(t), _) => vec![t.clone()],
        _ => Vec::new(),
    };
    let cells: Vec<(ResetKind, f64)> = kinds.iter().flat_map(|&k| ttls.iter().map(move |&d| (k, d))).collect();
    let mut rows: Vec<Row> = cells
        .par_iter()
        .flat_map_iter(|&(kind, delta)| {
            let disc = TtlDiscipline::global(kind, delta);
            let cell = |name: String, rep: usize| Cell {
                experiment: &exp,
                name,
                capacity: None,
                param: Some(delta),
                seed: rep_seed(c, rep),
                replication: rep,
            };
            let mut rows = cell(kind.to_string(), 0).run(
                "ohr",
                || ttl::prm_hit_ratio(&model, &disc),
                |cl, h, t| vec![cl.row("ohr", h.aggregate, None, t)],
            );
            rows.extend(cell(kind.to_string(), 0).run(
                "occupancy",
                || ttl::ttl_occupancy(&model, &disc),
                |cl, n, t| vec![cl.row("occupancy", n, None, t)],
            ));
            let label = if source.is_generated() { "sim" } else { "trace" };
            for (rep, trace) in sim_traces.iter().enumerate() {
                rows.extend(cell(format!("{label}:{kind}"), rep).run(
                    "ohr",
                    || ttl::simulate_ttl(trace, &disc, 0.0),
                    |cl, hits, t| {
                        let (h, se) = batch_hit_ratio(&hits);
                        vec![cl.row("ohr", h, se, t)]
                    },
                ));
            }
            if let (ResetKind::Periodic, Source::File(trace)) = (kind, &source) {
                rows.extend(cell("windows:periodic".into(), 0).run(
                    "ohr",
                    || ttl::periodic_reset_hit_ratio(&ttl::trace_interval_stats(trace, &disc.timers, 0.0)?),
                    |cl, p, t| vec![cl.row("ohr", p.aggregate, None, t)],
                ));
            }
            rows
        })
        .collect();
    if let Some(target) = a.target_hit {
        for &kind in &kinds {
            let cell = Cell {
                experiment: &exp,
                name: kind.to_string(),
                capacity: None,
                param: Some(target),
                seed: c.seed,
                replication: 0,
            };
            rows.extend(cell.run(
                "ttl",
                || ttl::ttl_adapt(&model, TtlTarget::HitRatio(target), kind),
                |cl, d, t| vec![cl.row("ttl", d, None, t)],
            ));
        }
    }
    Ok(rows)
}

/// Expected throughput order, fastest first. Violations only warn.
const BENCH_ORDER: [&str; 4] = ["fifo", "sgc", "lru", "lfu"];
const BENCH_MIN_RUNS: usize = 5;

pub fn bench(c: &Common) -> Result<Vec<Row>, Failure> {
    let exp = experiment(c, "bench");
    if cfg!(debug_assertions) {
        eprintln!("warning: debug build; throughput figures are not representative, build with --release");
    }
    let caps = parse_capacities(&c.capacity)?;
    let policies = parse_policies(c.policy.as_deref(), "fifo,sgc,lru,lfu")?;
    let source = Source::new(c)?;
    let trace = source.trace(c.requests, c.seed)?;
    let runs = c.reps.max(BENCH_MIN_RUNS);
    let options = SimOptions {
        warmup_fraction: 0.0,
        ..SimOptions::default()
    };
    let mut rows = Vec::new();
    // sequential on purpose: concurrent runs would disturb the timings
    for &m in &caps {
        let mut medians: Vec<(String, f64)> = Vec::new();
        for policy in &policies {
            let cell = Cell {
                experiment: &exp,
                name: policy.to_string(),
                capacity: Some(m),
                param: None,
                seed: c.seed,
                replication: 0,
            };
            let config = PolicyConfig::with_seed(policy.clone(), c.seed);
            let measured = cell.run(
                "throughput",
                || {
                    (0..runs)
                        .map(|_| {
                            let t0 = Instant::now();
                            sim::simulate_with(&config, &trace, m, &options)?;
                            Ok(trace.len() as f64 / t0.elapsed().as_secs_f64().max(1e-12))
                        })
                        .collect::<cachelab::Result<Vec<f64>>>()
                },
                |cl, mut speeds, t| {
                    speeds.sort_by(f64::total_cmp);
                    let median = speeds[speeds.len() / 2];
                    vec![cl.row("throughput", median, None, t)]
                },
            );
            if let Some(v) = measured[0].value {
                medians.push((cell.name.clone(), v));
            }
            rows.extend(measured);
        }
        let ranked: Vec<&(String, f64)> = BENCH_ORDER
            .iter()
            .filter_map(|n| medians.iter().find(|(name, _)| name.split(':').next() == Some(*n)))
            .collect();
        for w in ranked.windows(2) {
            if w[0].1 < w[1].1 {
                eprintln!(
                    "warning: capacity {m}: {} ({:.0} req/s) slower than {} ({:.0} req/s)",
                    w[0].0, w[0].1, w[1].0, w[1].1
                );
            }
        }
    }
    Ok(rows)
}
