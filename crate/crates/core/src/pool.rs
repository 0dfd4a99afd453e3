//! Finite pools of ordered pairs and the exact error, regret and distance
//! computations over them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::oracle::LabelOracle;

/// An ordered pair of distinct items.
pub type Pair = (usize, usize);

/// Items `0..n`; the instances are the `n(n-1)` ordered pairs of distinct
/// items under the uniform measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pool {
    n: usize,
}

impl Pool {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", format!("a pool needs at least 2 items, got {n}")));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `N = n(n-1)`, the number of ordered pairs.
    #[inline]
    pub fn pair_count(&self) -> u64 {
        (self.n as u64) * (self.n as u64 - 1)
    }

    /// `n(n-1)/2`.
    #[inline]
    pub fn unordered_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn check_item(&self, item: usize) -> Result<()> {
        if item >= self.n {
            return Err(Error::ItemOutOfPool { item, n: self.n });
        }
        Ok(())
    }

    pub fn check_pair(&self, u: usize, v: usize) -> Result<()> {
        self.check_item(u)?;
        self.check_item(v)?;
        if u == v {
            return Err(Error::SelfPair(u));
        }
        Ok(())
    }

    pub fn check_same(&self, other: &Pool) -> Result<()> {
        if self.n != other.n {
            return Err(Error::PoolMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Dense index of the unordered pair `{u, v}` in `0..n(n-1)/2`.
    #[inline]
    pub fn unordered_index(&self, u: usize, v: usize) -> usize {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        debug_assert!(a != b && b < self.n);
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    /// Dense index of the ordered pair `(u, v)` in `0..n(n-1)`, row by row.
    #[inline]
    pub fn ordered_index(&self, u: usize, v: usize) -> usize {
        debug_assert!(u != v && u < self.n && v < self.n);
        u * (self.n - 1) + if v < u { v } else { v - 1 }
    }

    /// All ordered pairs, row by row.
    pub fn ordered_pairs(&self) -> impl Iterator<Item = Pair> + '_ {
        let n = self.n;
        (0..n).flat_map(move |u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
    }
}

/// A hypothesis over the pairs of a pool, `h(u, v) ∈ {0, 1}`.
pub trait PairHypothesis: Clone + Send + Sync {
    fn pool(&self) -> Pool;

    /// `h(u, v)`.
    fn relates(&self, u: usize, v: usize) -> bool;

    /// Flat description used for trajectory snapshots.
    fn snapshot(&self) -> Vec<usize>;
}

/// Number of ordered pairs on which two hypotheses disagree.
pub fn disagreement_count<H: PairHypothesis>(h1: &H, h2: &H) -> Result<u64> {
    let pool = h1.pool();
    pool.check_same(&h2.pool())?;
    Ok(pool
        .ordered_pairs()
        .filter(|&(u, v)| h1.relates(u, v) != h2.relates(u, v))
        .count() as u64)
}

/// `dist(h1, h2)`: the fraction of ordered pairs where they disagree.
pub fn distance<H: PairHypothesis>(h1: &H, h2: &H) -> Result<f64> {
    let count = disagreement_count(h1, h2)?;
    Ok(count as f64 / h1.pool().pair_count() as f64)
}

/// Number of ordered pairs `h` labels differently from the oracle. Reads the
/// full label table, which is charged to the verification counter.
pub fn error_count<H: PairHypothesis>(h: &H, oracle: &LabelOracle) -> Result<u64> {
    let pool = h.pool();
    pool.check_same(&oracle.pool())?;
    let labels = oracle.reveal_all()?;
    Ok(pool
        .ordered_pairs()
        .filter(|&(u, v)| h.relates(u, v) != labels.label(u, v))
        .count() as u64)
}

/// `err(h)` under the uniform measure on ordered pairs.
pub fn true_error<H: PairHypothesis>(h: &H, oracle: &LabelOracle) -> Result<f64> {
    let count = error_count(h, oracle)?;
    Ok(count as f64 / h.pool().pair_count() as f64)
}

/// `reg_pivot(h) = err(h) - err(pivot)`.
pub fn relative_regret<H: PairHypothesis>(h: &H, pivot: &H, oracle: &LabelOracle) -> Result<f64> {
    let diff = error_count(h, oracle)? as i64 - error_count(pivot, oracle)? as i64;
    Ok(diff as f64 / h.pool().pair_count() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_rejects_tiny() {
        assert!(Pool::new(1).is_err());
        assert_eq!(Pool::new(3).unwrap().pair_count(), 6);
    }

    #[test]
    fn unordered_index_is_dense_bijection() {
        let pool = Pool::new(9).unwrap();
        let mut seen = vec![false; pool.unordered_count()];
        for u in 0..9 {
            for v in u + 1..9 {
                let i = pool.unordered_index(u, v);
                assert_eq!(i, pool.unordered_index(v, u));
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn pair_checks() {
        let pool = Pool::new(4).unwrap();
        assert!(matches!(pool.check_pair(2, 2), Err(Error::SelfPair(2))));
        assert!(matches!(
            pool.check_pair(0, 4),
            Err(Error::ItemOutOfPool { item: 4, n: 4 })
        ));
        assert!(pool.check_pair(0, 3).is_ok());
        assert_eq!(pool.ordered_pairs().count(), 12);
        for (i, (u, v)) in pool.ordered_pairs().enumerate() {
            assert_eq!(pool.ordered_index(u, v), i);
        }
    }
}
