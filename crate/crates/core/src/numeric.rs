//! Small numerical helpers shared by the solvers.

use crate::{Error, Result};

/// Tolerance on `Σ p = 1` accepted by the solvers.
pub(crate) const PMF_TOLERANCE: f64 = 1e-9;

pub(crate) fn validate_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() {
        return Err(Error::invalid("probability vector is empty"));
    }
    let mut total = 0.0;
    for (k, &p) in pmf.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::invalid(format!(
                "probability p[{k}] = {p} is not a finite non-negative number"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::invalid(format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

/// Finds `x >= lo` with `f(x) = target` for a continuous non-decreasing `f`.
///
/// `f` returns the value and its derivative. The bracket is grown from
/// `hi_hint` by doubling, then refined with Newton steps that fall back to
/// bisection whenever they leave the bracket.
pub(crate) fn solve_increasing<F>(f: F, target: f64, lo: f64, hi_hint: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let mut lo = lo;
    let mut hi = hi_hint.max(lo + f64::EPSILON).max(1e-300);
    let (f_lo, _) = f(lo);
    if f_lo >= target {
        return Ok(lo);
    }
    let mut grow = 0;
    while f(hi).0 < target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 2000 || !hi.is_finite() {
            return Err(Error::invalid(format!("no root bracket found for target {target}")));
        }
    }
    let tolerance = 1e-13 * target.abs().max(1.0);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..500 {
        let (fx, dfx) = f(x);
        let residual = fx - target;
        if residual.abs() <= tolerance {
            return Ok(x);
        }
        if residual < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            return Ok(x);
        }
        let newton = if dfx > 0.0 { x - residual / dfx } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

/// Binary indexed tree over `f64` weights with prefix sums and
/// weighted sampling by descent.
#[derive(Debug, Clone)]
pub(crate) struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    pub(crate) fn new(len: usize) -> Self {
        Fenwick {
            tree: vec![0.0; len + 1],
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub(crate) fn add(&mut self, index: usize, delta: f64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of entries `0..=index`.
    #[cfg(test)]
    pub(crate) fn prefix(&self, index: usize) -> f64 {
        let mut i = index + 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    pub(crate) fn find(&self, mut u: f64) -> usize {
        let n = self.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n.saturating_sub(1))
    }
}

/// Integer Fenwick tree used for byte-depth queries.
#[derive(Debug, Clone)]
pub(crate) struct FenwickU64 {
    tree: Vec<u64>,
}

impl FenwickU64 {
    pub(crate) fn new(len: usize) -> Self {
        FenwickU64 { tree: vec![0; len + 1] }
    }

    /// Tree of length `len` holding `values` at the front, built in linear
    /// time.
    pub(crate) fn from_prefix(values: &[u64], len: usize) -> Self {
        let mut tree = vec![0; len + 1];
        tree[1..=values.len()].copy_from_slice(values);
        for i in 1..=len {
            let parent = i + (i & i.wrapping_neg());
            if parent <= len {
                tree[parent] += tree[i];
            }
        }
        FenwickU64 { tree }
    }

    pub(crate) fn add(&mut self, index: usize, delta: u64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    pub(crate) fn sub(&mut self, index: usize, delta: u64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] -= delta;
            i += i & i.wrapping_neg();
        }
    }

    pub(crate) fn prefix(&self, index: usize) -> u64 {
        let mut i = index + 1;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    #[cfg(test)]
    pub(crate) fn total(&self) -> u64 {
        self.prefix(self.tree.len() - 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_build_matches_incremental() {
        let values = [3u64, 0, 7, 1, 1, 9, 2];
        let built = FenwickU64::from_prefix(&values, 13);
        let mut incremental = FenwickU64::new(13);
        for (i, &v) in values.iter().enumerate() {
            incremental.add(i, v);
        }
        for i in 0..13 {
            assert_eq!(built.prefix(i), incremental.prefix(i));
        }
        assert_eq!(built.total(), 23);
    }

    #[test]
    fn solve_increasing_finds_square_root() {
        let x = solve_increasing(|x| (x * x, 2.0 * x), 2.0, 0.0, 1.0).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn solve_increasing_expands_bracket() {
        let x = solve_increasing(|x| (x, 1.0), 1e6, 0.0, 1.0).unwrap();
        assert!((x - 1e6).abs() < 1e-6);
    }

    #[test]
    fn fenwick_find_respects_weights() {
        let mut f = Fenwick::new(4);
        for (i, w) in [1.0, 0.0, 2.0, 1.0].iter().enumerate() {
            f.add(i, *w);
        }
        assert_eq!(f.find(0.5), 0);
        assert_eq!(f.find(1.0), 2);
        assert_eq!(f.find(2.99), 2);
        assert_eq!(f.find(3.5), 3);
        assert!((f.prefix(3) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn validate_pmf_rejects_bad_input() {
        assert!(validate_pmf(&[]).is_err());
        assert!(validate_pmf(&[0.5, 0.6]).is_err());
        assert!(validate_pmf(&[-0.1, 1.1]).is_err());
        assert!(validate_pmf(&[0.25; 4]).is_ok());
    }
}
