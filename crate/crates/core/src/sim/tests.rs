use proptest::prelude::*;

use super::*;
use crate::catalog::{generate_irm_trace, loop_trace, zipf_pmf, Catalog, Request};

fn unit_trace(n: usize, objects: &[usize]) -> Trace {
    Trace::from_objects(Catalog::unit(&vec![1.0; n]).unwrap(), objects).unwrap()
}

fn sized_trace(sizes: &[u64], objects: &[usize]) -> Trace {
    let n = sizes.len();
    let cat = Catalog::from_parts(&vec![1.0; n], sizes, &vec![1.0; n]).unwrap();
    Trace::from_objects(cat, objects).unwrap()
}

fn all_kinds() -> Vec<PolicyKind> {
    vec![
        PolicyKind::Lru,
        PolicyKind::Fifo,
        PolicyKind::ClockPerRequest,
        PolicyKind::Random,
        PolicyKind::Lfu,
        PolicyKind::WindowLfu { window: 7 },
        PolicyKind::ScoreGatedClock {
            score: ScoreSpec::COUNT_PER_SIZE,
        },
        PolicyKind::GreedyDual {
            score: ScoreSpec::default(),
        },
        PolicyKind::ProbAdmit {
            inner: Box::new(PolicyKind::Lru),
            rule: AdmitRule::SizeValue { beta: 0.3 },
        },
    ]
}

#[test]
fn fifo_on_loop_never_hits() {
    for m in 1..6u64 {
        let t = loop_trace(m as usize + 1, 1000).unwrap();
        let r = simulate(&PolicyConfig::new(PolicyKind::Fifo), &t, m, 0.0).unwrap();
        assert_eq!(r.hits, 0);
        let r = simulate(&PolicyConfig::new(PolicyKind::Lru), &t, m, 0.0).unwrap();
        assert_eq!(r.hits, 0);
    }
}

#[test]
fn random_on_loop_hit_ratio() {
    // after each miss the evicted object lies uniformly 1..=M requests ahead
    for m in [1u64, 2, 4, 7] {
        let t = loop_trace(m as usize + 1, 200_000).unwrap();
        let r = simulate(&PolicyConfig::with_seed(PolicyKind::Random, 3), &t, m, 0.1).unwrap();
        let expected = (m as f64 - 1.0) / (m as f64 + 1.0);
        assert!(
            (r.ohr - expected).abs() < 4.0 * r.ohr_stderr.max(1e-3),
            "M={m}: {} ± {}",
            r.ohr,
            r.ohr_stderr
        );
    }
}

#[test]
fn large_cache_only_has_compulsory_misses() {
    let cat = Catalog::unit(&zipf_pmf(50, 0.9).unwrap()).unwrap();
    let t = generate_irm_trace(&cat, 5000, 1).unwrap();
    for kind in all_kinds() {
        let r = simulate(&PolicyConfig::new(kind.clone()), &t, 50, 0.0).unwrap();
        if matches!(kind, PolicyKind::ProbAdmit { .. }) {
            continue;
        }
        assert_eq!(r.misses as usize, t.distinct_objects(), "{kind}");
        assert_eq!(upload_ratio(&r).unwrap(), t.distinct_objects() as f64 / 5000.0);
    }
}

#[test]
fn zero_capacity_misses_everything() {
    let t = loop_trace(3, 30).unwrap();
    for kind in all_kinds() {
        let r = simulate(&PolicyConfig::new(kind), &t, 0, 0.0).unwrap();
        assert_eq!((r.hits, r.misses, r.uploads), (0, 30, 0));
    }
}

#[test]
fn oversized_objects_are_bypassed() {
    let t = sized_trace(&[5, 1], &[0, 1, 0, 1, 0]);
    let r = simulate(&PolicyConfig::new(PolicyKind::Lru), &t, 3, 0.0).unwrap();
    assert_eq!((r.hits, r.misses, r.uploads), (1, 4, 1));
}

#[test]
fn fifo_upload_ratio_equals_miss_ratio() {
    let cat = Catalog::unit(&zipf_pmf(200, 0.8).unwrap()).unwrap();
    let t = generate_irm_trace(&cat, 20_000, 2).unwrap();
    let r = simulate(&PolicyConfig::new(PolicyKind::Fifo), &t, 20, 0.1).unwrap();
    assert_eq!(upload_ratio(&r).unwrap(), r.misses as f64 / r.counted() as f64);
}

#[test]
fn greedy_dual_uploads_every_miss() {
    let sizes: Vec<u64> = (0..40).map(|k| 1 + k % 7).collect();
    let cat = Catalog::from_parts(&zipf_pmf(40, 0.7).unwrap(), &sizes, &vec![1.0; 40]).unwrap();
    let t = generate_irm_trace(&cat, 10_000, 5).unwrap();
    let r = simulate(
        &PolicyConfig::new(PolicyKind::GreedyDual {
            score: ScoreSpec::default(),
        }),
        &t,
        30,
        0.1,
    )
    .unwrap();
    assert_eq!(r.uploads, r.misses);
}

#[test]
fn score_gate_suppresses_one_timers() {
    // objects 0 and 1 are cached with counts 2; object 2 arrives once
    let t = unit_trace(3, &[0, 1, 0, 1, 2]);
    let p = PolicyConfig::new(PolicyKind::ScoreGatedClock {
        score: ScoreSpec::COUNT_PER_SIZE,
    });
    let r = simulate(&p, &t, 2, 0.0).unwrap();
    assert_eq!((r.hits, r.misses, r.uploads), (2, 3, 2));
    let states = trace_residents(&p, &t, 2).unwrap();
    let mut last = states.last().unwrap().1.clone();
    last.sort();
    assert_eq!(last, vec![0, 1]);
}

#[test]
fn score_gate_uploads_less_than_it_misses() {
    let cat = Catalog::unit(&zipf_pmf(2000, 0.8).unwrap()).unwrap();
    let t = generate_irm_trace(&cat, 100_000, 8).unwrap();
    let p = PolicyConfig::new(PolicyKind::ScoreGatedClock {
        score: ScoreSpec::default(),
    });
    let r = simulate(&p, &t, 200, 0.1).unwrap();
    assert!(r.uploads * 4 < r.misses, "uploads {} misses {}", r.uploads, r.misses);
}

#[test]
fn certain_admission_matches_inner_policy() {
    let cat = Catalog::unit(&zipf_pmf(60, 1.0).unwrap()).unwrap();
    let t = generate_irm_trace(&cat, 5000, 4).unwrap();
    for inner in [PolicyKind::Random, PolicyKind::Lru, PolicyKind::ClockPerRequest] {
        let gated = PolicyKind::ProbAdmit {
            inner: Box::new(inner.clone()),
            rule: AdmitRule::PerObject(vec![1.0; 60]),
        };
        let a = simulate(&PolicyConfig::with_seed(inner, 9), &t, 10, 0.1).unwrap();
        let b = simulate(&PolicyConfig::with_seed(gated, 9), &t, 10, 0.1).unwrap();
        assert_eq!((a.hits, a.uploads), (b.hits, b.uploads));
    }
}

#[test]
fn wide_window_lfu_equals_lfu() {
    let cat = Catalog::unit(&zipf_pmf(100, 0.9).unwrap()).unwrap();
    let t = generate_irm_trace(&cat, 3000, 6).unwrap();
    let a = simulate(&PolicyConfig::new(PolicyKind::Lfu), &t, 10, 0.0).unwrap();
    let b = simulate(&PolicyConfig::new(PolicyKind::WindowLfu { window: 3000 }), &t, 10, 0.0).unwrap();
    assert_eq!((a.hits, a.uploads), (b.hits, b.uploads));
}

#[test]
fn single_fifo_level_equals_fifo() {
    let cat = Catalog::unit(&zipf_pmf(30, 0.9).unwrap()).unwrap();
    let t = generate_irm_trace(&cat, 4000, 7).unwrap();
    for (level, plain) in [
        (LevelKind::Fifo, PolicyKind::Fifo),
        (LevelKind::Clock, PolicyKind::ClockPerRequest),
        (LevelKind::Lru, PolicyKind::Lru),
    ] {
        let ml = PolicyKind::MultiLevel {
            levels: vec![(5, level)],
        };
        let a = simulate(&PolicyConfig::new(ml), &t, 5, 0.0).unwrap();
        let b = simulate(&PolicyConfig::new(plain), &t, 5, 0.0).unwrap();
        assert_eq!((a.hits, a.uploads), (b.hits, b.uploads));
    }
}

#[test]
fn multi_level_rejects_mismatched_capacity() {
    let t = loop_trace(4, 10).unwrap();
    let ml = PolicyKind::MultiLevel {
        levels: vec![(1, LevelKind::Fifo), (1, LevelKind::Random)],
    };
    assert!(simulate(&PolicyConfig::new(ml), &t, 3, 0.0).is_err());
}

#[test]
fn ttl_invalidation() {
    let cat = Catalog::unit(&[1.0]).unwrap();
    let requests = (0..5)
        .map(|i| Request {
            index: i,
            object: 0,
            time: Some(i as f64),
        })
        .collect();
    let t = Trace::new(cat, requests).unwrap();
    let opts = |ttl| SimOptions {
        warmup_fraction: 0.0,
        ttl: Some(ttl),
        series_window: None,
    };
    let p = PolicyConfig::new(PolicyKind::Lru);
    // loads at t=0, expires at t=2 (request at the expiry instant misses), reloads, expires at t=4
    let r = simulate_with(&p, &t, 1, &opts(2.0)).unwrap();
    assert_eq!((r.hits, r.misses, r.uploads), (2, 3, 3));
    let r = simulate_with(&p, &t, 1, &opts(100.0)).unwrap();
    assert_eq!(r.hits, 4);
    assert!(simulate_with(&p, &loop_trace(2, 4).unwrap(), 1, &opts(1.0)).is_err());
}

#[test]
fn hit_series_windows() {
    let t = unit_trace(1, &[0; 10]);
    let o = SimOptions {
        warmup_fraction: 0.0,
        ttl: None,
        series_window: Some(5),
    };
    let r = simulate_with(&PolicyConfig::new(PolicyKind::Fifo), &t, 1, &o).unwrap();
    assert_eq!(r.hit_series, Some(vec![0.8, 1.0]));
}

#[test]
fn sweep_rejects_non_stack_policy() {
    let t = loop_trace(3, 9).unwrap();
    assert!(matches!(
        hrc_sweep_stack(&PolicyKind::Fifo, &t, &[1, 2], 0.0),
        Err(Error::UnsupportedPolicy(_))
    ));
    assert!(hrc_sweep_stack(&PolicyKind::Lru, &t, &[2, 1], 0.0).is_err());
}

#[test]
fn sweep_unbounded_capacity() {
    let cat = Catalog::unit(&zipf_pmf(100, 1.0).unwrap()).unwrap();
    let t = generate_irm_trace(&cat, 2000, 3).unwrap();
    for kind in [PolicyKind::Lru, PolicyKind::Lfu] {
        let r = &hrc_sweep_stack(&kind, &t, &[u64::MAX], 0.0).unwrap()[0];
        assert_eq!(r.ohr, 1.0 - t.distinct_objects() as f64 / 2000.0);
    }
}

#[test]
fn lfu_sweep_tracks_simulated_lfu() {
    let cat = Catalog::unit(&zipf_pmf(300, 0.9).unwrap()).unwrap();
    let t = generate_irm_trace(&cat, 50_000, 13).unwrap();
    let caps = [5, 20, 60];
    let sweep = hrc_sweep_stack(&PolicyKind::Lfu, &t, &caps, 0.1).unwrap();
    for (c, s) in caps.iter().zip(&sweep) {
        let r = simulate(&PolicyConfig::new(PolicyKind::Lfu), &t, *c, 0.1).unwrap();
        assert!((r.ohr - s.ohr).abs() < 0.01, "cap {c}: {} vs {}", r.ohr, s.ohr);
    }
}

#[test]
fn policy_names_round_trip() {
    for kind in all_kinds().into_iter().chain([PolicyKind::MultiLevel {
        levels: vec![(2, LevelKind::Fifo), (3, LevelKind::Random)],
    }]) {
        assert_eq!(kind.to_string().parse::<PolicyKind>().unwrap(), kind);
    }
    assert!("bogus".parse::<PolicyKind>().is_err());
    assert_eq!("1/s".parse::<ScoreSpec>().unwrap().eval(5, 3.0, 4), 0.25);
    assert!("c/v".parse::<ScoreSpec>().is_err());
}

fn arb_sized_trace() -> impl Strategy<Value = (Vec<u64>, Vec<usize>)> {
    (1usize..9).prop_flat_map(|n| (prop::collection::vec(1u64..5, n), prop::collection::vec(0..n, 0..120)))
}

proptest! {
    #[test]
    fn occupancy_never_exceeds_capacity((sizes, objects) in arb_sized_trace(), cap in 0u64..12, seed in 0u64..4) {
        let t = sized_trace(&sizes, &objects);
        for kind in all_kinds() {
            let states = trace_residents(&PolicyConfig::with_seed(kind, seed), &t, cap).unwrap();
            for (used, residents) in states {
                prop_assert!(used <= cap);
                let mut sorted = residents.clone();
                sorted.sort();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), residents.len());
                prop_assert_eq!(residents.iter().map(|&k| sizes[k]).sum::<u64>(), used);
            }
        }
    }

    #[test]
    fn reports_are_consistent((sizes, objects) in arb_sized_trace(), cap in 0u64..12, warmup in 0.0f64..0.5) {
        let t = sized_trace(&sizes, &objects);
        for kind in all_kinds() {
            let p = PolicyConfig::with_seed(kind, 1);
            let r = simulate(&p, &t, cap, warmup).unwrap();
            prop_assert_eq!(r.hits + r.misses, r.requests - r.warmup_excluded);
            prop_assert!(r.uploads <= r.misses);
            for x in [r.ohr, r.bhr, r.vhr] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            prop_assert_eq!(&r, &simulate(&p, &t, cap, warmup).unwrap());
        }
    }

    #[test]
    fn lru_sweep_matches_simulation((sizes, objects) in arb_sized_trace(), warmup in 0.0f64..0.3) {
        let t = sized_trace(&sizes, &objects);
        let max = *sizes.iter().max().unwrap();
        let caps: Vec<u64> = (max..max + 15).collect();
        let sweep = hrc_sweep_stack(&PolicyKind::Lru, &t, &caps, warmup).unwrap();
        for (c, s) in caps.iter().zip(&sweep) {
            let r = simulate(&PolicyConfig::new(PolicyKind::Lru), &t, *c, warmup).unwrap();
            prop_assert_eq!(&r.policy, &s.policy);
            prop_assert_eq!((r.hits, r.misses, r.uploads), (s.hits, s.misses, s.uploads));
            prop_assert_eq!((r.ohr, r.bhr, r.vhr, r.ohr_stderr), (s.ohr, s.bhr, s.vhr, s.ohr_stderr));
        }
    }

    #[test]
    fn lru_sweep_unit_sizes_all_capacities(objects in prop::collection::vec(0usize..10, 0..150)) {
        let t = unit_trace(10, &objects);
        let caps: Vec<u64> = (0..12).collect();
        let sweep = hrc_sweep_stack(&PolicyKind::Lru, &t, &caps, 0.1).unwrap();
        for (c, s) in caps.iter().zip(&sweep) {
            let r = simulate(&PolicyConfig::new(PolicyKind::Lru), &t, *c, 0.1).unwrap();
            prop_assert_eq!(&r, s);
        }
    }
}
