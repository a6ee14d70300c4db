//! End-to-end checks that combine several modules through the public API.

use std::fs::File;
use std::path::PathBuf;

use cachelab::approx::{che_lru, fifo_approx};
use cachelab::bounds::{belady, knapsack_2d_bounds, static_knapsack_bound};
use cachelab::catalog::{
    generate_irm_trace, generate_prm_trace, load_trace, lognormal_sizes, save_trace_bytes, zipf_pmf, Catalog,
};
use cachelab::markov::product_form_hit_ratio;
use cachelab::sim::{simulate, PolicyConfig, PolicyKind};
use cachelab::ttl::{prm_hit_ratio, simulate_ttl, RateModel, ResetKind, TtlDiscipline};

fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "fixtures", name].iter().collect()
}

fn ohr(kind: PolicyKind, trace: &cachelab::catalog::Trace, capacity: u64) -> f64 {
    simulate(&PolicyConfig::with_seed(kind, 3), trace, capacity, 0.1)
        .unwrap()
        .ohr
}

#[test]
fn saved_trace_reloads_to_identical_simulations() {
    let n = 400;
    let pmf = zipf_pmf(n, 0.9).unwrap();
    let sizes = lognormal_sizes(n, 3.0, 1.0, 8).unwrap();
    let cat = Catalog::from_parts(&pmf, &sizes, &vec![1.0; n]).unwrap();
    let trace = generate_irm_trace(&cat, 30_000, 8).unwrap();
    let reloaded = load_trace(save_trace_bytes(&trace).unwrap().as_slice()).unwrap();
    assert_eq!(trace.request_view(), reloaded.request_view());
    for kind in [PolicyKind::Lru, PolicyKind::Fifo, "gd:c/s".parse().unwrap()] {
        let a = simulate(&PolicyConfig::new(kind.clone()), &trace, 2_000, 0.1).unwrap();
        let b = simulate(&PolicyConfig::new(kind), &reloaded, 2_000, 0.1).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn loop_fixture_defeats_recency_but_not_the_offline_optimum() {
    let trace = load_trace(File::open(fixture("loop5.csv")).unwrap()).unwrap();
    assert_eq!(trace.len(), 60);
    assert_eq!(ohr(PolicyKind::Lru, &trace, 4), 0.0);
    assert_eq!(ohr(PolicyKind::Fifo, &trace, 4), 0.0);
    let opt = belady(&trace, 4).unwrap();
    // after five cold misses the optimum hits 3 of every 4 requests
    assert!(opt.hits >= 40, "belady hits {}", opt.hits);
    let b = knapsack_2d_bounds(&trace, 4, None).unwrap();
    assert!(b.v_lower <= opt.hits as f64 && opt.hits as f64 <= b.v_upper);
}

#[test]
fn approximations_track_simulation_on_zipf_traces() {
    let n = 1_000;
    let pmf = zipf_pmf(n, 0.8).unwrap();
    let cat = Catalog::unit(&pmf).unwrap();
    let trace = generate_irm_trace(&cat, 400_000, 21).unwrap();
    for m in [10u64, 100, 400] {
        let che = che_lru(&pmf, m as usize).unwrap().hit_ratio;
        let lru = ohr(PolicyKind::Lru, &trace, m);
        assert!((che - lru).abs() < 0.01, "M={m}: che {che} vs lru {lru}");
        let fifo = ohr(PolicyKind::Fifo, &trace, m);
        let pf = product_form_hit_ratio(&pmf, m as usize).unwrap();
        assert!((pf - fifo).abs() < 0.01, "M={m}: product form {pf} vs fifo {fifo}");
        assert!((fifo_approx(&pmf, m as usize).unwrap().hit_ratio - pf).abs() < 0.01);
        let bound = static_knapsack_bound(&pmf, &vec![1; n], &vec![1.0; n], m)
            .unwrap()
            .upper;
        assert!(ohr(PolicyKind::Lfu, &trace, m) <= bound + 0.01);
    }
}

#[test]
fn ttl_trace_simulation_agrees_with_the_rate_model() {
    let pmf = zipf_pmf(50, 0.7).unwrap();
    let cat = Catalog::unit(&pmf).unwrap();
    let rate = 20.0;
    let trace = generate_prm_trace(&cat, rate, 5_000.0, 4).unwrap();
    let model = RateModel::from_pmf(&pmf, rate).unwrap();
    for kind in [ResetKind::PerMiss, ResetKind::PerRequest, ResetKind::Periodic] {
        let disc = TtlDiscipline::global(kind, 2.0);
        let hits = simulate_ttl(&trace, &disc, 0.0).unwrap();
        let simulated = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
        let model = prm_hit_ratio(&model, &disc).unwrap().aggregate;
        assert!((simulated - model).abs() < 0.01, "{kind}: {simulated} vs {model}");
    }
}
