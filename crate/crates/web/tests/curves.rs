use cachelab_web::{hit_ratio_curves_data, knapsack_bounds_data, ttl_curves_data, Curves};

fn series(c: &Curves, name: &str) -> Vec<f64> {
    c.series
        .iter()
        .find(|s| s.name == name)
        .unwrap_or_else(|| panic!("missing series {name}"))
        .values
        .clone()
}

#[test]
fn hit_ratio_curves_respect_the_static_bound() {
    let c = hit_ratio_curves_data(500, 0.9, 40_000, 8, 3).unwrap();
    assert_eq!(c.x.first(), Some(&1.0));
    assert_eq!(c.x.last(), Some(&500.0));
    let bound = series(&c, "static bound");
    for name in ["LRU", "FIFO", "RANDOM", "LFU", "Che"] {
        let v = series(&c, name);
        assert_eq!(v.len(), c.x.len());
        for (h, b) in v.iter().zip(&bound) {
            assert!((0.0..=1.0).contains(h));
            assert!(*h <= b + 0.02, "{name}: {h} above bound {b}");
        }
    }
    // the whole catalog fits at the last point, only first requests miss
    assert_eq!(*bound.last().unwrap(), 1.0);
    let che = series(&c, "Che");
    let lru = series(&c, "LRU");
    for (a, b) in che.iter().zip(&lru).take(c.x.len() - 1) {
        assert!((a - b).abs() < 0.03, "che {a} vs lru {b}");
    }
}

#[test]
fn ttl_curves_are_monotone_and_ordered() {
    let t = ttl_curves_data(200, 0.8, 2.0, 500.0, 12).unwrap();
    let miss = series(&t.hit_ratio, "reset on miss");
    let request = series(&t.hit_ratio, "reset on every request");
    let periodic = series(&t.hit_ratio, "periodic reset");
    for v in [&miss, &request, &periodic] {
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }
    for i in 0..miss.len() {
        assert!(periodic[i] <= miss[i] && miss[i] <= request[i]);
    }
    let occ = series(&t.occupancy, "reset on miss");
    assert!(occ.iter().all(|&n| (0.0..=200.0).contains(&n)));
    assert!((t.hit_ratio.x.last().unwrap() - 500.0).abs() < 1e-9);
}

#[test]
fn knapsack_bounds_enclose_online_policies() {
    let c = knapsack_bounds_data(300, 0.8, 20_000, 1.0, 6, 9).unwrap();
    let lo = series(&c, "bound (lower)");
    let hi = series(&c, "bound (upper)");
    let lru = series(&c, "LRU");
    let gd = series(&c, "GreedyDual c/s");
    for i in 0..c.x.len() {
        assert!(lo[i] <= hi[i] + 1e-12);
        assert!(lru[i] <= hi[i] + 1e-12);
        assert!(gd[i] <= hi[i] + 1e-12);
    }
}

#[test]
fn invalid_parameters_are_errors() {
    assert!(hit_ratio_curves_data(0, 1.0, 10, 4, 1).is_err());
    assert!(ttl_curves_data(10, 1.0, 1.0, 0.0, 4).is_err());
    assert!(knapsack_bounds_data(10, 1.0, 3_000_000, 1.0, 4, 1).is_err());
}
