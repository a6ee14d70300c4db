//! Browser bindings: each exported function takes plain numbers and returns
//! a JSON document ready for plotting. The computations live in ordinary
//! functions so they can be tested natively.

use cachelab::approx;
use cachelab::bounds;
use cachelab::catalog::{self, Catalog};
use cachelab::sim::{self, PolicyConfig, PolicyKind, ScoreSpec};
use cachelab::ttl::{self, RateModel, ResetKind, TtlDiscipline};
use cachelab::{Error, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest catalog the page accepts.
pub const MAX_OBJECTS: usize = 100_000;
/// Largest trace the page accepts.
pub const MAX_REQUESTS: usize = 2_000_000;
const WARMUP: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Curves {
    pub x: Vec<f64>,
    pub series: Vec<Series>,
}

fn check(objects: usize, requests: usize) -> Result<()> {
    if objects == 0 || objects > MAX_OBJECTS {
        return Err(Error::InvalidArgument(format!(
            "catalog size must be in 1..={MAX_OBJECTS}"
        )));
    }
    if requests > MAX_REQUESTS {
        return Err(Error::InvalidArgument(format!("at most {MAX_REQUESTS} requests")));
    }
    Ok(())
}

/// `points` integers spread logarithmically over `lo..=hi`, deduplicated.
fn log_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let (a, b) = ((lo.max(1) as f64).ln(), (hi.max(lo).max(1) as f64).ln());
    let mut out: Vec<u64> = (0..points.max(2))
        .map(|i| (a + (b - a) * i as f64 / (points.max(2) - 1) as f64).exp().round() as u64)
        .collect();
    out.dedup();
    out
}

/// Object hit-ratio curves of LRU, FIFO, RANDOM and LFU on a Zipf IRM
/// trace, next to the Che approximation and the static upper bound.
pub fn hit_ratio_curves_data(objects: usize, beta: f64, requests: usize, points: usize, seed: u64) -> Result<Curves> {
    check(objects, requests)?;
    let pmf = catalog::zipf_pmf(objects, beta)?;
    let cat = Catalog::unit(&pmf)?;
    let trace = catalog::generate_irm_trace(&cat, requests, seed)?;
    let caps = log_grid(1, objects as u64, points);
    let mut series = Vec::new();
    let lru = sim::hrc_sweep_stack(&PolicyKind::Lru, &trace, &caps, WARMUP)?;
    series.push(Series {
        name: "LRU".into(),
        values: lru.iter().map(|r| r.ohr).collect(),
    });
    for (name, kind) in [
        ("FIFO", PolicyKind::Fifo),
        ("RANDOM", PolicyKind::Random),
        ("LFU", PolicyKind::Lfu),
    ] {
        let config = PolicyConfig::with_seed(kind, seed);
        let values = caps
            .iter()
            .map(|&m| sim::simulate(&config, &trace, m, WARMUP).map(|r| r.ohr))
            .collect::<Result<_>>()?;
        series.push(Series {
            name: name.into(),
            values,
        });
    }
    let che = caps
        .iter()
        .map(|&m| approx::che_lru(&pmf, m as usize).map(|a| a.hit_ratio))
        .collect::<Result<_>>()?;
    series.push(Series {
        name: "Che".into(),
        values: che,
    });
    let ones = vec![1.0; objects];
    let sizes = vec![1; objects];
    let bound = caps
        .iter()
        .map(|&m| bounds::static_knapsack_bound(&pmf, &sizes, &ones, m).map(|b| b.upper))
        .collect::<Result<_>>()?;
    series.push(Series {
        name: "static bound".into(),
        values: bound,
    });
    Ok(Curves {
        x: caps.iter().map(|&m| m as f64).collect(),
        series,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TtlCurves {
    pub hit_ratio: Curves,
    pub occupancy: Curves,
}

/// Aggregate hit ratio and occupancy of the three TTL reset rules for
/// Poisson requests with Zipf rates, over a logarithmic TTL grid ending at
/// `max_ttl`.
pub fn ttl_curves_data(objects: usize, beta: f64, rate: f64, max_ttl: f64, points: usize) -> Result<TtlCurves> {
    check(objects, 0)?;
    if !(max_ttl > 0.0 && max_ttl.is_finite()) {
        return Err(Error::InvalidArgument("the largest TTL must be positive".into()));
    }
    let model = RateModel::from_pmf(&catalog::zipf_pmf(objects, beta)?, rate)?;
    let n = points.max(2);
    let ttls: Vec<f64> = (0..n)
        .map(|i| max_ttl * 1e-3f64.powf(1.0 - i as f64 / (n - 1) as f64))
        .collect();
    let mut hit = Vec::new();
    let mut occ = Vec::new();
    let kinds = [
        ("reset on miss", ResetKind::PerMiss),
        ("reset on every request", ResetKind::PerRequest),
        ("periodic reset", ResetKind::Periodic),
    ];
    for (name, kind) in kinds {
        let mut h = Vec::with_capacity(n);
        let mut o = Vec::with_capacity(n);
        for &d in &ttls {
            let disc = TtlDiscipline::global(kind, d);
            h.push(ttl::prm_hit_ratio(&model, &disc)?.aggregate);
            o.push(ttl::ttl_occupancy(&model, &disc)?);
        }
        hit.push(Series {
            name: name.into(),
            values: h,
        });
        occ.push(Series {
            name: name.into(),
            values: o,
        });
    }
    Ok(TtlCurves {
        hit_ratio: Curves {
            x: ttls.clone(),
            series: hit,
        },
        occupancy: Curves { x: ttls, series: occ },
    })
}

/// Offline lower and upper bounds on the object hit ratio of a trace with
/// lognormal sizes, next to LRU and GreedyDual with score `c/s`.
pub fn knapsack_bounds_data(
    objects: usize,
    beta: f64,
    requests: usize,
    size_sigma: f64,
    points: usize,
    seed: u64,
) -> Result<Curves> {
    check(objects, requests)?;
    let pmf = catalog::zipf_pmf(objects, beta)?;
    let sizes = catalog::lognormal_sizes(objects, 2.0, size_sigma, seed)?;
    let cat = Catalog::from_parts(&pmf, &sizes, &vec![1.0; objects])?;
    let trace = catalog::generate_irm_trace(&cat, requests, seed)?;
    let smallest = sizes.iter().copied().min().unwrap_or(1);
    let caps = log_grid(smallest, cat.total_size(), points);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &m in &caps {
        let b = bounds::knapsack_2d_bounds(&trace, m, None)?;
        lower.push(b.vhr_lower);
        upper.push(b.vhr_upper);
    }
    let mut series = vec![
        Series {
            name: "bound (lower)".into(),
            values: lower,
        },
        Series {
            name: "bound (upper)".into(),
            values: upper,
        },
    ];
    let policies = [
        ("LRU", PolicyKind::Lru),
        (
            "GreedyDual c/s",
            PolicyKind::GreedyDual {
                score: ScoreSpec::COUNT_PER_SIZE,
            },
        ),
    ];
    for (name, kind) in policies {
        let config = PolicyConfig::with_seed(kind, seed);
        // no warmup, so the policies and the bounds count the same requests
        let values = caps
            .iter()
            .map(|&m| sim::simulate(&config, &trace, m, 0.0).map(|r| r.ohr))
            .collect::<Result<_>>()?;
        series.push(Series {
            name: name.into(),
            values,
        });
    }
    Ok(Curves {
        x: caps.iter().map(|&m| m as f64).collect(),
        series,
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn hit_ratio_curves(
    objects: usize,
    beta: f64,
    requests: usize,
    points: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(hit_ratio_curves_data(objects, beta, requests, points, seed as u64))
}

#[wasm_bindgen]
pub fn ttl_curves(
    objects: usize,
    beta: f64,
    rate: f64,
    max_ttl: f64,
    points: usize,
) -> std::result::Result<String, JsError> {
    to_js(ttl_curves_data(objects, beta, rate, max_ttl, points))
}

#[wasm_bindgen]
pub fn knapsack_bounds(
    objects: usize,
    beta: f64,
    requests: usize,
    size_sigma: f64,
    points: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    to_js(knapsack_bounds_data(
        objects,
        beta,
        requests,
        size_sigma,
        points,
        seed as u64,
    ))
}
