//! Approximations for LRU and FIFO hit ratios and for the filling phase of
//! an initially empty cache.

use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::catalog::seeded_rng;
use crate::numeric::{solve_increasing, validate_pmf};
use crate::{Error, Result};

/// Per-object hit probabilities, the aggregate hit ratio and the root of
/// the defining equation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Approximation {
    pub per_object: Vec<f64>,
    pub hit_ratio: f64,
    /// Characteristic time, mean fill time or FIFO sojourn, in requests.
    /// Infinite when the whole catalog fits.
    pub root: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CharacteristicTime {
    /// Root of `M = Σ (1 − e^{−p_j T})`.
    pub t_che: f64,
    /// Root of `M = Σ (1 − (1 − p_k)^CT)`.
    pub ct_fagin: f64,
}

pub fn characteristic_times(pmf: &[f64], m: usize) -> Result<CharacteristicTime> {
    Ok(CharacteristicTime {
        t_che: che_lru(pmf, m)?.root,
        ct_fagin: fagin_lru(pmf, m)?.root,
    })
}

/// Shared driver: solves `Σ occupancy(p_k, x) = m` and reports
/// `h_k = occupancy(p_k, x)`.
fn solve<F>(pmf: &[f64], m: usize, occupancy: F, hint: f64) -> Result<Approximation>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    validate_pmf(pmf)?;
    let n = pmf.len();
    if m > n {
        return Err(Error::invalid(format!("capacity {m} exceeds the {n} objects")));
    }
    let positive = pmf.iter().filter(|&&p| p > 0.0).count();
    if m >= positive {
        let per_object = pmf.iter().map(|&p| if p > 0.0 { 1.0 } else { 0.0 }).collect();
        return Ok(Approximation {
            per_object,
            hit_ratio: 1.0,
            root: f64::INFINITY,
        });
    }
    if m == 0 {
        return Ok(Approximation {
            per_object: vec![0.0; n],
            hit_ratio: 0.0,
            root: 0.0,
        });
    }
    let total = |x: f64| {
        pmf.iter().fold((0.0, 0.0), |(f, df), &p| {
            let (o, d) = occupancy(p, x);
            (f + o, df + d)
        })
    };
    let root = solve_increasing(total, m as f64, 0.0, hint)?;
    let per_object: Vec<f64> = pmf.iter().map(|&p| occupancy(p, root).0).collect();
    let hit_ratio = pmf
        .iter()
        .zip(&per_object)
        .map(|(p, h)| p * h)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(Approximation {
        per_object,
        hit_ratio,
        root,
    })
}

/// Che's approximation: `h_j = 1 − e^{−p_j T}` with `T` the characteristic
/// time, all objects included in the defining sum.
pub fn che_lru(pmf: &[f64], m: usize) -> Result<Approximation> {
    solve(
        pmf,
        m,
        |p, t| {
            let e = (-p * t).exp();
            (-(-p * t).exp_m1(), p * e)
        },
        m as f64,
    )
}

/// Fagin's approximation through the expected working-set size, with the
/// power `(1 − p)^CT` extended to real `CT`.
pub fn fagin_lru(pmf: &[f64], m: usize) -> Result<Approximation> {
    solve(
        pmf,
        m,
        |p, ct| {
            if p >= 1.0 {
                return (if ct > 0.0 { 1.0 } else { 0.0 }, 0.0);
            }
            let l = (-p).ln_1p();
            let stay = (ct * l).exp();
            (-(ct * l).exp_m1(), -l * stay)
        },
        m as f64,
    )
}

/// FIFO approximation through the mean sojourn `Δ` in requests:
/// `h_j = p_j Δ / (p_j Δ + 1)`.
pub fn fifo_approx(pmf: &[f64], m: usize) -> Result<Approximation> {
    solve(
        pmf,
        m,
        |p, d| {
            let x = p * d;
            (x / (x + 1.0), p / ((x + 1.0) * (x + 1.0)))
        },
        m as f64,
    )
}

/// Hit probability of request `r` (0-based) in an empty cache that never
/// evicts: `Σ p_k (1 − (1 − p_k)^r)`. Bounds any cache during its filling
/// phase.
pub fn filling_phase_hit_bound(pmf: &[f64], r: u64) -> Result<f64> {
    validate_pmf(pmf)?;
    Ok(pmf
        .iter()
        .map(|&p| {
            if p >= 1.0 {
                if r > 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                -p * (r as f64 * (-p).ln_1p()).exp_m1()
            }
        })
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// Largest catalog for the exact convergence-time distribution.
pub const CONVERGENCE_MAX_OBJECTS: usize = 10;
/// Largest capacity for the exact convergence-time distribution.
pub const CONVERGENCE_MAX_CAPACITY: usize = 5;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConvergenceTime {
    /// `probabilities[i]` is `P(CT = m + i)` for `m + i ≤ r_max`.
    pub first: u64,
    pub probabilities: Vec<f64>,
    /// Exact mean, not truncated at `r_max`.
    pub mean: f64,
    /// `P(CT > r_max)`.
    pub tail_mass: f64,
}

/// Distribution of the number of requests until `m` distinct objects have
/// been referenced.
///
/// Only the set of objects seen so far matters, so the recursion runs over
/// subsets of fewer than `m` objects.
pub fn convergence_time_distribution(pmf: &[f64], m: usize, r_max: u64) -> Result<ConvergenceTime> {
    validate_pmf(pmf)?;
    let n = pmf.len();
    if n > CONVERGENCE_MAX_OBJECTS || m > CONVERGENCE_MAX_CAPACITY {
        return Err(Error::limit(
            format!("exact convergence time limited to N ≤ {CONVERGENCE_MAX_OBJECTS}, M ≤ {CONVERGENCE_MAX_CAPACITY}"),
            "use the mean from fagin_lru",
        ));
    }
    if m == 0 {
        return Err(Error::invalid("capacity must be at least one object"));
    }
    if pmf.iter().filter(|&&p| p > 0.0).count() < m {
        return Err(Error::invalid("fewer than M objects are ever requested"));
    }
    let sets: Vec<usize> = (0usize..1 << n).filter(|s| (s.count_ones() as usize) < m).collect();
    let mut slot = vec![usize::MAX; 1 << n];
    for (i, &s) in sets.iter().enumerate() {
        slot[s] = i;
    }
    let mass: Vec<f64> = sets
        .iter()
        .map(|&s| (0..n).filter(|b| s >> b & 1 == 1).map(|b| pmf[b]).sum())
        .collect();

    // mean: expected sojourn in each transient set is visit / (1 − p(S))
    let mut visit = vec![0.0; sets.len()];
    visit[0] = 1.0;
    let mut mean = 0.0;
    for (i, &s) in sets.iter().enumerate() {
        let leave = 1.0 - mass[i];
        mean += visit[i] / leave;
        for b in 0..n {
            let t = s | 1 << b;
            if t != s && slot[t] != usize::MAX {
                visit[slot[t]] += visit[i] * pmf[b] / leave;
            }
        }
    }

    let mut dist = vec![0.0; sets.len()];
    dist[0] = 1.0;
    let mut next = vec![0.0; sets.len()];
    let mut probabilities = Vec::new();
    let mut survive = 1.0;
    for r in 1..=r_max {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut done = 0.0;
        for (i, &s) in sets.iter().enumerate() {
            let w = dist[i];
            if w == 0.0 {
                continue;
            }
            next[i] += w * mass[i];
            for b in 0..n {
                if s >> b & 1 == 0 {
                    let t = s | 1 << b;
                    if slot[t] == usize::MAX {
                        done += w * pmf[b];
                    } else {
                        next[slot[t]] += w * pmf[b];
                    }
                }
            }
        }
        std::mem::swap(&mut dist, &mut next);
        survive = dist.iter().sum();
        if r >= m as u64 {
            probabilities.push(done);
        }
        if survive < 1e-300 {
            break;
        }
    }
    Ok(ConvergenceTime {
        first: m as u64,
        probabilities,
        mean,
        tail_mass: survive.max(0.0),
    })
}

/// Monte Carlo fill times: for each replication, the number of independent
/// requests until `m` distinct objects have been seen.
pub fn simulate_fill_times(pmf: &[f64], m: usize, replications: usize, seed: u64) -> Result<Vec<u64>> {
    validate_pmf(pmf)?;
    if m == 0 || pmf.iter().filter(|&&p| p > 0.0).count() < m {
        return Err(Error::invalid(
            "capacity must be between 1 and the number of requested objects",
        ));
    }
    let alias = WeightedAliasIndex::new(pmf.to_vec()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seeded_rng(seed);
    let mut seen = vec![u32::MAX; pmf.len()];
    let mut out = Vec::with_capacity(replications);
    for rep in 0..replications as u32 {
        let mut distinct = 0;
        let mut requests = 0u64;
        while distinct < m {
            let k = alias.sample(&mut rng);
            requests += 1;
            if seen[k] != rep {
                seen[k] = rep;
                distinct += 1;
            }
        }
        out.push(requests);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{generate_irm_trace, zipf_pmf, Catalog};
    use crate::markov::{lru_exact_hit_ratio, product_form_hit_ratio};
    use crate::sim::{simulate_with, PolicyConfig, PolicyKind, SimOptions};
    use proptest::prelude::*;

    #[test]
    fn full_cache_hits_everything() {
        let p = zipf_pmf(8, 1.0).unwrap();
        for f in [che_lru, fagin_lru, fifo_approx] {
            let a = f(&p, 8).unwrap();
            assert_eq!(a.hit_ratio, 1.0);
            assert!(a.root.is_infinite());
        }
    }

    #[test]
    fn uniform_pmf_gives_m_over_n() {
        let p = vec![0.1; 10];
        for m in 1..10 {
            for f in [che_lru, fagin_lru, fifo_approx] {
                assert!((f(&p, m).unwrap().hit_ratio - m as f64 / 10.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn che_small_cache_error_is_bounded() {
        let p = zipf_pmf(10, 1.0).unwrap();
        let che = che_lru(&p, 1).unwrap().hit_ratio;
        let exact = lru_exact_hit_ratio(&p, 1).unwrap();
        assert!((che - exact).abs() <= 0.0825);
    }

    #[test]
    fn fagin_exact_at_one_slot() {
        let p = zipf_pmf(8, 0.6).unwrap();
        let a = fagin_lru(&p, 1).unwrap();
        assert!((a.root - 1.0).abs() < 1e-12);
        assert!((a.hit_ratio - p.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn fifo_approx_near_product_form() {
        let p = zipf_pmf(12, 0.8).unwrap();
        let a = fifo_approx(&p, 6).unwrap().hit_ratio;
        assert!((a - product_form_hit_ratio(&p, 6).unwrap()).abs() < 0.03);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(che_lru(&[0.5, 0.6], 1).is_err());
        assert!(fagin_lru(&[0.5, 0.5], 3).is_err());
    }

    #[test]
    fn filling_bound_small_cases() {
        let p = zipf_pmf(20, 1.0).unwrap();
        assert_eq!(filling_phase_hit_bound(&p, 0).unwrap(), 0.0);
        let sq: f64 = p.iter().map(|x| x * x).sum();
        assert!((filling_phase_hit_bound(&p, 1).unwrap() - sq).abs() < 1e-15);
    }

    #[test]
    fn filling_bound_matches_unbounded_lru() {
        let pmf = zipf_pmf(1000, 1.0).unwrap();
        let cat = Catalog::unit(&pmf).unwrap();
        let ct = fagin_lru(&pmf, 100).unwrap().root.ceil() as usize;
        let runs = 1000;
        let mut hits = vec![0u32; ct];
        let options = SimOptions {
            warmup_fraction: 0.0,
            ttl: None,
            series_window: Some(1),
        };
        for run in 0..runs {
            let t = generate_irm_trace(&cat, ct, 1000 + run).unwrap();
            let r = simulate_with(&PolicyConfig::new(PolicyKind::Lru), &t, u64::MAX, &options).unwrap();
            for (h, x) in hits.iter_mut().zip(r.hit_series.unwrap()) {
                *h += x as u32;
            }
        }
        let mut deviation = 0.0;
        for (r, &h) in hits.iter().enumerate() {
            let bound = filling_phase_hit_bound(&pmf, r as u64).unwrap();
            let empirical = h as f64 / runs as f64;
            let sigma = (bound * (1.0 - bound) / runs as f64).sqrt().max(1e-3);
            assert!((empirical - bound).abs() < 5.0 * sigma, "r={r}: {empirical} vs {bound}");
            deviation += empirical - bound;
        }
        assert!((deviation / ct as f64).abs() < 0.01);
    }

    #[test]
    fn convergence_single_slot() {
        let c = convergence_time_distribution(&zipf_pmf(5, 1.0).unwrap(), 1, 10).unwrap();
        assert_eq!(c.probabilities[0], 1.0);
        assert_eq!(c.mean, 1.0);
    }

    #[test]
    fn convergence_two_coupons() {
        let c = convergence_time_distribution(&[0.5, 0.5], 2, 60).unwrap();
        for (i, &p) in c.probabilities.iter().enumerate() {
            let j = i as i32 + 2;
            assert!((p - 0.5f64.powi(j - 1)).abs() < 1e-15);
        }
        assert!((c.mean - 3.0).abs() < 1e-12);
        assert!(c.tail_mass < 1e-15);
    }

    #[test]
    fn convergence_mean_close_to_working_set_root() {
        let p = zipf_pmf(10, 1.0).unwrap();
        let c = convergence_time_distribution(&p, 3, 2000).unwrap();
        let total: f64 = c.probabilities.iter().sum();
        assert!((total + c.tail_mass - 1.0).abs() < 1e-9);
        assert!(c.tail_mass < 1e-9);
        let truncated: f64 = c
            .probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64 + 3.0) * p)
            .sum();
        assert!((truncated - c.mean).abs() < 1e-6);
        let root = fagin_lru(&p, 3).unwrap().root;
        assert!(((c.mean - root) / c.mean).abs() < 0.05, "{} vs {}", c.mean, root);
    }

    #[test]
    fn convergence_matches_monte_carlo() {
        let p = zipf_pmf(8, 0.8).unwrap();
        let c = convergence_time_distribution(&p, 4, 500).unwrap();
        let times = simulate_fill_times(&p, 4, 20_000, 5).unwrap();
        let mc = times.iter().sum::<u64>() as f64 / times.len() as f64;
        let var = times.iter().map(|&t| (t as f64 - mc).powi(2)).sum::<f64>() / times.len() as f64;
        assert!((mc - c.mean).abs() < 4.0 * (var / times.len() as f64).sqrt());
    }

    #[test]
    fn convergence_guard() {
        let p = zipf_pmf(11, 1.0).unwrap();
        assert!(matches!(
            convergence_time_distribution(&p, 3, 10),
            Err(Error::ResourceLimit { .. })
        ));
    }

    fn arb_pmf() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, 2..40).prop_map(|w| {
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).collect()
        })
    }

    proptest! {
        #[test]
        fn roots_solve_their_equations(p in arb_pmf(), frac in 0.05f64..0.95) {
            let m = ((p.len() as f64 * frac) as usize).max(1);
            prop_assume!(m < p.len());
            let che = che_lru(&p, m).unwrap();
            let fagin = fagin_lru(&p, m).unwrap();
            let fifo = fifo_approx(&p, m).unwrap();
            for a in [&che, &fagin, &fifo] {
                let occupancy: f64 = a.per_object.iter().sum();
                prop_assert!((occupancy - m as f64).abs() < 1e-9);
                prop_assert!(a.root > 0.0);
            }
        }

        #[test]
        fn approximations_increase_with_capacity(p in arb_pmf()) {
            let mut last = [0.0; 3];
            for m in 1..=p.len() {
                let now = [
                    che_lru(&p, m).unwrap().hit_ratio,
                    fagin_lru(&p, m).unwrap().hit_ratio,
                    fifo_approx(&p, m).unwrap().hit_ratio,
                ];
                for i in 0..3 {
                    prop_assert!((0.0..=1.0).contains(&now[i]));
                    prop_assert!(now[i] >= last[i] - 1e-12);
                }
                last = now;
            }
        }

        #[test]
        fn fagin_one_slot_is_exact(p in arb_pmf()) {
            let a = fagin_lru(&p, 1).unwrap();
            prop_assert!((a.hit_ratio - p.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-12);
        }
    }
}
