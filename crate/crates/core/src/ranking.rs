//! Learning to rank from pairwise preferences: permutations, Kendall and
//! footrule distances, the distance-band regret estimator and minimizers.

use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::estimator::{PairCosts, PairEstimator, PlannedSample, SingleItemMove};
use crate::oracle::{LabelOracle, PairTask};
use crate::par;
use crate::pool::{Pair, PairHypothesis, Pool};
use crate::rng;

/// A total order over items `0..n`. Position 0 is the most preferred.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    rank: Vec<usize>,
    order: Vec<usize>,
}

impl Permutation {
    /// From items listed best first.
    pub fn from_order(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n < 2 {
            return Err(invalid("order", format!("need at least 2 items, got {n}")));
        }
        let mut rank = vec![usize::MAX; n];
        for (pos, &item) in order.iter().enumerate() {
            if item >= n {
                return Err(Error::ItemOutOfPool { item, n });
            }
            if rank[item] != usize::MAX {
                return Err(invalid("order", format!("item {item} appears twice")));
            }
            rank[item] = pos;
        }
        Ok(Self { rank, order })
    }

    /// From the position of each item.
    pub fn from_ranks(rank: Vec<usize>) -> Result<Self> {
        let n = rank.len();
        let mut order = vec![usize::MAX; n];
        for (item, &pos) in rank.iter().enumerate() {
            if pos >= n || order[pos] != usize::MAX {
                return Err(invalid("rank", format!("not a bijection at item {item}")));
            }
            order[pos] = item;
        }
        Self::from_order(order)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_order((0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self::from_order(order)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Position of `item` (0-based).
    #[inline]
    pub fn rank(&self, item: usize) -> usize {
        self.rank[item]
    }

    pub fn ranks(&self) -> &[usize] {
        &self.rank
    }

    /// Items best first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn reversed(&self) -> Self {
        let mut order = self.order.clone();
        order.reverse();
        Self::from_order(order).expect("reversal of a permutation")
    }

    /// Moves `item` so that it ends up at position `to`.
    pub fn with_insertion(&self, item: usize, to: usize) -> Self {
        let mut out = self.clone();
        out.insert_in_place(item, to);
        out
    }

    fn insert_in_place(&mut self, item: usize, to: usize) {
        let from = self.rank[item];
        if from == to {
            return;
        }
        self.order.remove(from);
        self.order.insert(to, item);
        let (lo, hi) = (from.min(to), from.max(to));
        for pos in lo..=hi {
            self.rank[self.order[pos]] = pos;
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let line = text
            .lines()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .ok_or_else(|| Error::Parse(format!("{}: empty permutation file", path.display())))?;
        let order = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("{}: `{t}`: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_order(order)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let row: Vec<String> = self.order.iter().map(ToString::to_string).collect();
        std::fs::write(path, row.join(",") + "\n")?;
        Ok(())
    }
}

impl PairHypothesis for Permutation {
    fn pool(&self) -> Pool {
        Pool::new(self.n()).expect("permutations have at least 2 items")
    }

    #[inline]
    fn relates(&self, u: usize, v: usize) -> bool {
        self.rank[u] < self.rank[v]
    }

    fn snapshot(&self) -> Vec<usize> {
        self.order.clone()
    }
}

/// All permutations of `0..n` in lexicographic order of their item order.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    loop {
        out.push(Permutation::from_order(order.clone()).expect("valid permutation"));
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| order[i] < order[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| order[j] > order[i]).expect("successor exists");
        order.swap(i, j);
        order[i + 1..].reverse();
    }
    out
}

/// Number of unordered pairs ordered differently by `p1` and `p2`, by merge
/// sort in `O(n log n)`.
pub fn inversions(p1: &Permutation, p2: &Permutation) -> Result<u64> {
    p1.pool().check_same(&p2.pool())?;
    let mut seq: Vec<usize> = p1.order.iter().map(|&item| p2.rank[item]).collect();
    let mut buf = vec![0usize; seq.len()];
    Ok(merge_count(&mut seq, &mut buf))
}

fn merge_count(seq: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = seq.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(left, bl) + merge_count(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if seq[i] <= seq[j] {
            buf[k] = seq[i];
            i += 1;
        } else {
            buf[k] = seq[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&seq[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&seq[j..n]);
    seq.copy_from_slice(&buf[..n]);
    count
}

/// Normalized Kendall distance `2·inversions / N`, equal to `dist(p1, p2)`.
pub fn kendall(p1: &Permutation, p2: &Permutation) -> Result<f64> {
    let inv = inversions(p1, p2)?;
    Ok(2.0 * inv as f64 / p1.pool().pair_count() as f64)
}

/// Spearman footrule `Σ_u |p1(u) − p2(u)|`.
pub fn footrule(p1: &Permutation, p2: &Permutation) -> Result<u64> {
    p1.pool().check_same(&p2.pool())?;
    Ok(p1
        .rank
        .iter()
        .zip(&p2.rank)
        .map(|(a, b)| a.abs_diff(*b) as u64)
        .sum())
}

pub(crate) fn ceil_log2(n: usize) -> u32 {
    debug_assert!(n >= 1);
    usize::BITS - (n - 1).leading_zeros()
}

/// Ceiling robust to the last-bit noise of a floating product.
pub(crate) fn ceil_count(x: f64) -> usize {
    (x - x.abs() * 1e-12).ceil().max(0.0) as usize
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 0.2) {
        return Err(invalid(
            "epsilon",
            format!("must lie in (0, 1/5], got {epsilon}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_constant(name: &'static str, c: f64) -> Result<()> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(invalid(name, format!("must be a finite non-negative number, got {c}")));
    }
    Ok(())
}

/// Per-band sample size `p = max(1, ⌈c1 · ε⁻³ · (log₂ n)³⌉)`.
pub fn sample_size_p(n: usize, epsilon: f64, c1: f64) -> Result<usize> {
    if n < 2 {
        return Err(invalid("n", format!("need n >= 2, got {n}")));
    }
    check_epsilon(epsilon)?;
    check_constant("c1", c1)?;
    let inv = 1.0 / epsilon;
    let log = (n as f64).log2();
    Ok(ceil_count(c1 * inv * inv * inv * log * log * log).max(1))
}

/// Distance bands around each position of a pivot permutation.
///
/// For an item at position `a`, the near set holds positions `b ≠ a` with
/// `|a − b| < p`, and band `i` holds positions with
/// `2^i·p ≤ |a − b| < 2^(i+1)·p`, for `i = 0..=⌈log₂ n⌉`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BandPlan {
    n: usize,
    p: usize,
}

impl BandPlan {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", format!("need n >= 2, got {n}")));
        }
        if p == 0 {
            return Err(invalid("p", "must be positive"));
        }
        Ok(Self { n, p })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of band indices, `⌈log₂ n⌉ + 1`.
    pub fn band_count(&self) -> usize {
        ceil_log2(self.n) as usize + 1
    }

    /// True when the near set of every position is everything else.
    pub fn is_exhaustive(&self) -> bool {
        self.p >= self.n
    }

    fn gap_ranges(&self, pos: usize, lo: usize, hi: usize) -> [Range<usize>; 2] {
        // positions b with lo <= |pos - b| < hi
        let n = self.n;
        let below = pos.saturating_sub(hi.saturating_sub(1))..(pos + 1).saturating_sub(lo);
        let below = if lo > pos { 0..0 } else { below };
        let above_start = pos.saturating_add(lo).min(n);
        let above_end = pos.saturating_add(hi).min(n);
        [below, above_start..above_end.max(above_start)]
    }

    /// Positions in the near set of `pos`.
    pub fn near_positions(&self, pos: usize) -> [Range<usize>; 2] {
        self.gap_ranges(pos, 1, self.p)
    }

    /// Positions in band `i` of `pos`.
    pub fn band_positions(&self, pos: usize, i: usize) -> [Range<usize>; 2] {
        let lo = self.p.saturating_mul(1usize.checked_shl(i as u32).unwrap_or(usize::MAX));
        let hi = lo.saturating_mul(2);
        self.gap_ranges(pos, lo, hi)
    }

    /// Sample plan for one item of the pivot.
    fn plan_item<R: Rng>(
        &self,
        pivot: &Permutation,
        u: usize,
        mut rng_for_band: impl FnMut(usize) -> R,
    ) -> Vec<PlannedSample<Pair>> {
        let p = self.p as u64;
        let pos = pivot.rank(u);
        let mut out = Vec::new();
        for r in self.near_positions(pos) {
            out.extend(r.map(|b| PlannedSample {
                key: (u, pivot.order()[b]),
                weight: p,
            }));
        }
        for i in 0..self.band_count() {
            let [r0, r1] = self.band_positions(pos, i);
            let len = r0.len() + r1.len();
            if len == 0 {
                continue;
            }
            if len <= self.p {
                out.extend(r0.chain(r1).map(|b| PlannedSample {
                    key: (u, pivot.order()[b]),
                    weight: p,
                }));
            } else {
                let mut rng = rng_for_band(i);
                for _ in 0..self.p {
                    let t = rng.random_range(0..len);
                    let b = if t < r0.len() {
                        r0.start + t
                    } else {
                        r1.start + (t - r0.len())
                    };
                    out.push(PlannedSample {
                        key: (u, pivot.order()[b]),
                        weight: len as u64,
                    });
                }
            }
        }
        out
    }
}

/// Builds distance-band regret estimators for ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LrppBuilder {
    pub p: usize,
}

impl LrppBuilder {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(invalid("p", "must be positive"));
        }
        Ok(Self { p })
    }

    pub fn from_params(n: usize, epsilon: f64, c1: f64) -> Result<Self> {
        Self::new(sample_size_p(n, epsilon, c1)?)
    }

    /// The random sample plan for `pivot`; the weights share denominator `p`.
    pub fn plan(&self, pivot: &Permutation, seed: u64) -> Result<Vec<PlannedSample<Pair>>> {
        let bands = BandPlan::new(pivot.n(), self.p)?;
        let per_item = par::map_range(pivot.n(), |u| {
            bands.plan_item(pivot, u, |i| {
                rng::stream(seed, &[rng::TAG_RANK_BANDS, u as u64, i as u64])
            })
        });
        Ok(per_item.into_iter().flatten().collect())
    }

    /// Plans, labels and indexes an estimator of `reg_pivot`.
    pub fn build(
        &self,
        pivot: &Permutation,
        oracle: &LabelOracle,
        seed: u64,
    ) -> Result<PairEstimator> {
        let plan = self.plan(pivot, seed)?;
        PairEstimator::from_plan(self.p as u64, &plan, pivot, oracle)
    }

    /// Worst-case distinct pairs a build can label: `n·(2p + p·(⌈log₂ n⌉+1))`
    /// capped at `n(n−1)/2`.
    pub fn query_cap(&self, n: usize) -> u64 {
        let per_item = 2 * self.p as u64 + self.p as u64 * (u64::from(ceil_log2(n)) + 1);
        (n as u64 * per_item).min((n * (n - 1) / 2) as u64)
    }
}

/// Moves one item to a new position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Insertion {
    pub item: usize,
    pub to: usize,
}

impl SingleItemMove<Permutation> for Insertion {
    fn item(&self) -> usize {
        self.item
    }

    fn validate(&self, h: &Permutation) -> Result<()> {
        h.pool().check_item(self.item)?;
        if self.to >= h.n() {
            return Err(Error::ItemOutOfPool {
                item: self.to,
                n: h.n(),
            });
        }
        Ok(())
    }

    fn relates_after(&self, h: &Permutation, u: usize, v: usize) -> bool {
        let from = h.rank(self.item);
        // Position of another item once the moved one is taken out.
        let compact = |y: usize| {
            let r = h.rank(y);
            if r > from {
                r - 1
            } else {
                r
            }
        };
        if u == self.item {
            self.to <= compact(v)
        } else if v == self.item {
            self.to > compact(u)
        } else {
            h.relates(u, v)
        }
    }
}

/// Largest `n` accepted by [`erm_exact_ranking`].
pub const EXACT_RANKING_MAX_N: usize = 10;

/// Global minimizer of the estimator over all permutations, by dynamic
/// programming over the set of already placed items. Ties go to the
/// lexicographically smallest rank array.
pub fn erm_exact_ranking(est: &PairEstimator) -> Result<Permutation> {
    let n = est.pool().n();
    if n > EXACT_RANKING_MAX_N {
        return Err(Error::TooLarge {
            what: "exact ranking ERM",
            got: n,
            max: EXACT_RANKING_MAX_N,
        });
    }
    let before = est.pair_costs(PairTask::Ranking).dense_related();
    let full = (1usize << n) - 1;
    // place[mask][x]: cost of putting x right after the items of mask.
    let mut place = vec![0i64; (full + 1) * n];
    for mask in 0..=full {
        for x in (0..n).filter(|x| mask >> x & 1 == 0) {
            place[mask * n + x] = (0..n)
                .filter(|&y| y != x && mask >> y & 1 == 0)
                .map(|y| before[x][y])
                .sum();
        }
    }
    // best[mask]: optimal cost of ordering the items outside mask.
    let mut best = vec![i64::MAX; full + 1];
    best[full] = 0;
    for mask in (0..full).rev() {
        best[mask] = (0..n)
            .filter(|x| mask >> x & 1 == 0)
            .map(|x| place[mask * n + x] + best[mask | 1 << x])
            .min()
            .expect("mask is not full");
    }
    let tight = |mask: usize, x: usize| place[mask * n + x] + best[mask | 1 << x] == best[mask];

    // Fix rank[0], rank[1], ... to their smallest feasible values.
    let mut fixed: Vec<Option<usize>> = vec![None; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut reach = vec![false; full + 1];
    let mut feasible = |fixed: &[Option<usize>], owner: &[Option<usize>]| {
        reach.iter_mut().for_each(|b| *b = false);
        reach[0] = true;
        for mask in 0..full {
            if !reach[mask] {
                continue;
            }
            let slot = mask.count_ones() as usize;
            for x in (0..n).filter(|x| mask >> x & 1 == 0) {
                let allowed = match (fixed[x], owner[slot]) {
                    (Some(r), _) => r == slot,
                    (None, Some(_)) => false,
                    (None, None) => true,
                };
                if allowed && tight(mask, x) {
                    reach[mask | 1 << x] = true;
                }
            }
        }
        reach[full]
    };
    for item in 0..n {
        let mut placed = false;
        for r in 0..n {
            if owner[r].is_some() {
                continue;
            }
            fixed[item] = Some(r);
            owner[r] = Some(item);
            if feasible(&fixed, &owner) {
                placed = true;
                break;
            }
            fixed[item] = None;
            owner[r] = None;
        }
        if !placed {
            return Err(Error::Minimizer(
                "no optimal ordering satisfies the tie-break constraints".into(),
            ));
        }
    }
    Permutation::from_ranks(fixed.into_iter().map(|r| r.expect("all fixed")).collect())
}

/// Local search over single-item insertions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalSearch {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for LocalSearch {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 0,
        }
    }
}

/// Runs first-improvement insertion descent from `start` and from
/// `restarts − 1` seeded random permutations; returns the best result. The
/// returned value never exceeds `f(start)`.
pub fn erm_local_search_ranking(
    est: &PairEstimator,
    start: &Permutation,
    search: LocalSearch,
) -> Result<Permutation> {
    let n = start.n();
    est.pool().check_same(&start.pool())?;
    let costs = est.pair_costs(PairTask::Ranking);
    if costs.is_flat() {
        return Ok(start.clone());
    }
    let restarts = search.restarts.max(1);
    let results = par::map_range(restarts, |r| {
        let init = if r == 0 {
            start.clone()
        } else {
            let mut rng = rng::stream(search.seed, &[rng::TAG_RESTART, r as u64]);
            Permutation::random(n, &mut rng).expect("n >= 2")
        };
        descend_insertions(&costs, init)
    });
    let (best, _) = results
        .into_iter()
        .min_by_key(|(_, total)| *total)
        .expect("at least one restart");
    Ok(best)
}

/// Applies improving insertions until none is left. For each item the best
/// target position is found in `O(n + deg)` from suffix sums.
pub fn descend_insertions(costs: &PairCosts, mut perm: Permutation) -> (Permutation, i128) {
    let n = perm.n();
    let mut total = costs.total(&perm);
    let mut gain_at = vec![0i64; n + 1];
    loop {
        let mut improved = false;
        for x in 0..n {
            let nbrs = costs.neighbors(x);
            if nbrs.is_empty() {
                continue;
            }
            let from = perm.rank(x);
            gain_at.iter_mut().for_each(|g| *g = 0);
            let mut base = 0i64;
            for &(y, c1, c0) in nbrs {
                let r = perm.rank(y);
                let compact = if r > from { r - 1 } else { r };
                // x precedes y for every target j <= compact.
                base += c0;
                gain_at[compact] += c1 - c0;
            }
            // cost(j) = base + Σ_{p >= j} gain_at[p]
            let mut suffix = 0i64;
            let mut best = (i64::MAX, from);
            let mut current = 0i64;
            for j in (0..n).rev() {
                suffix += gain_at[j];
                let c = base + suffix;
                if j == from {
                    current = c;
                }
                if c <= best.0 {
                    best = (c, j);
                }
            }
            if best.0 < current {
                perm.insert_in_place(x, best.1);
                total += (best.0 - current) as i128;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    (perm, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::NoiseSpec;
    use crate::pool::distance;

    fn brute_inversions(p1: &Permutation, p2: &Permutation) -> u64 {
        let n = p1.n();
        let mut c = 0;
        for u in 0..n {
            for v in u + 1..n {
                if p1.relates(u, v) != p2.relates(u, v) {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn kendall_and_footrule_examples() {
        let id = Permutation::identity(4).unwrap();
        assert_eq!(kendall(&id, &id).unwrap(), 0.0);
        assert_eq!(footrule(&id, &id).unwrap(), 0);
        let swap = Permutation::from_order(vec![0, 2, 1, 3]).unwrap();
        assert_eq!(kendall(&id, &swap).unwrap(), 2.0 / 12.0);
        assert_eq!(footrule(&id, &swap).unwrap(), 2);
        let id3 = Permutation::identity(3).unwrap();
        let swap3 = Permutation::from_order(vec![1, 0, 2]).unwrap();
        assert!((distance(&id3, &swap3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let p = Permutation::from_order(vec![3, 1, 4, 0, 2]).unwrap();
        assert_eq!(kendall(&p, &p.reversed()).unwrap(), 1.0);
    }

    #[test]
    fn merge_count_matches_quadratic_oracle() {
        let mut rng = rng::stream(3, &[]);
        for _ in 0..200 {
            let n = rng.random_range(2..=10);
            let a = Permutation::random(n, &mut rng).unwrap();
            let b = Permutation::random(n, &mut rng).unwrap();
            assert_eq!(inversions(&a, &b).unwrap(), brute_inversions(&a, &b));
            let d = distance(&a, &b).unwrap();
            assert!((kendall(&a, &b).unwrap() - d).abs() < 1e-15);
        }
    }

    #[test]
    fn from_order_rejects_non_bijections() {
        assert!(Permutation::from_order(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_order(vec![0, 3, 1]).is_err());
        assert!(Permutation::from_ranks(vec![2, 2, 0]).is_err());
        let p = Permutation::from_order(vec![2, 0, 1]).unwrap();
        assert_eq!(Permutation::from_ranks(p.ranks().to_vec()).unwrap(), p);
    }

    #[test]
    fn all_permutations_counts() {
        assert_eq!(all_permutations(3).len(), 6);
        let all = all_permutations(5);
        assert_eq!(all.len(), 120);
        let mut dedup = all.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 120);
    }

    #[test]
    fn sample_size_p_examples() {
        assert_eq!(sample_size_p(1024, 0.2, 1.0).unwrap(), 125_000);
        assert_eq!(sample_size_p(1024, 0.2, 1e-3).unwrap(), 125);
        assert_eq!(sample_size_p(2, 0.1, 0.0).unwrap(), 1);
        // c1 large enough saturates p beyond n.
        assert!(sample_size_p(16, 0.1, 1.0).unwrap() >= 16);
        assert!(sample_size_p(1024, 0.25, 1.0).is_err());
        assert!(sample_size_p(1024, 0.0, 1.0).is_err());
        assert!(sample_size_p(1, 0.1, 1.0).is_err());
        assert!(sample_size_p(10, 0.1, -1.0).is_err());
    }

    #[test]
    fn band_plan_example() {
        // n = 10, p = 3, pivot position 5 (1-based) = index 4.
        let plan = BandPlan::new(10, 3).unwrap();
        let collect = |rs: [Range<usize>; 2]| {
            let mut v: Vec<usize> = rs.into_iter().flatten().map(|b| b + 1).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(collect(plan.near_positions(4)), vec![3, 4, 6, 7]);
        assert_eq!(collect(plan.band_positions(4, 0)), vec![1, 2, 8, 9, 10]);
        assert!(collect(plan.band_positions(4, 1)).is_empty());
        assert_eq!(plan.band_count(), 5);
    }

    #[test]
    fn bands_partition_every_position() {
        for n in [2usize, 3, 7, 10, 33, 100, 257] {
            for p in [1usize, 2, 3, 5, 16, 300] {
                let plan = BandPlan::new(n, p).unwrap();
                for pos in 0..n {
                    let mut hit = vec![0u8; n];
                    let near = plan.near_positions(pos);
                    let bands = (0..plan.band_count()).flat_map(|i| plan.band_positions(pos, i));
                    for b in near.into_iter().chain(bands).flatten() {
                        hit[b] += 1;
                    }
                    for (b, &h) in hit.iter().enumerate() {
                        assert_eq!(h, u8::from(b != pos), "n={n} p={p} pos={pos} b={b}");
                    }
                }
            }
        }
    }

    #[test]
    fn exhaustive_p_gives_exact_estimator() {
        let truth = Permutation::from_order(vec![2, 4, 0, 1, 3]).unwrap();
        let oracle = LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.2, 4)).unwrap();
        let pivot = Permutation::from_order(vec![1, 0, 3, 4, 2]).unwrap();
        let est = LrppBuilder::new(5).unwrap().build(&pivot, &oracle, 1).unwrap();
        for s in all_permutations(5) {
            let reg = crate::pool::relative_regret(&s, &pivot, &oracle).unwrap();
            assert_eq!(est.evaluate(&s), reg);
        }
        assert_eq!(est.evaluate(&pivot), 0.0);
    }

    #[test]
    fn query_count_within_cap() {
        let mut rng = rng::stream(5, &[]);
        let truth = Permutation::random(150, &mut rng).unwrap();
        let oracle = LabelOracle::ranking(&truth, &NoiseSpec::none()).unwrap();
        let pivot = Permutation::random(150, &mut rng).unwrap();
        let b = LrppBuilder::new(4).unwrap();
        let est = b.build(&pivot, &oracle, 9).unwrap();
        let distinct = oracle.counters().distinct_labeled;
        assert_eq!(distinct as usize, est.distinct_pairs());
        assert!(distinct <= b.query_cap(150));
    }

    #[test]
    fn insertion_relates_after_matches_applied_move() {
        let mut rng = rng::stream(8, &[]);
        for _ in 0..100 {
            let n = rng.random_range(2..9);
            let p = Permutation::random(n, &mut rng).unwrap();
            let mv = Insertion {
                item: rng.random_range(0..n),
                to: rng.random_range(0..n),
            };
            let moved = p.with_insertion(mv.item, mv.to);
            assert_eq!(moved.rank(mv.item), mv.to);
            for y in (0..n).filter(|&y| y != mv.item) {
                assert_eq!(mv.relates_after(&p, mv.item, y), moved.relates(mv.item, y));
                assert_eq!(mv.relates_after(&p, y, mv.item), moved.relates(y, mv.item));
            }
        }
    }

    #[test]
    fn exact_erm_matches_enumeration_with_lex_tie_break() {
        let mut rng = rng::stream(12, &[]);
        for trial in 0..30 {
            let n = rng.random_range(2..=6);
            let truth = Permutation::random(n, &mut rng).unwrap();
            let oracle =
                LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.3, trial)).unwrap();
            let pivot = Permutation::random(n, &mut rng).unwrap();
            // Small p produces ties and uneven weights.
            let est = LrppBuilder::new(1).unwrap().build(&pivot, &oracle, trial).unwrap();
            let got = erm_exact_ranking(&est).unwrap();
            let mut all = all_permutations(n);
            all.sort_by(|a, b| a.ranks().cmp(b.ranks()));
            let best = all
                .iter()
                .min_by_key(|s| est.numerator(*s))
                .unwrap();
            assert_eq!(&got, best, "trial {trial}");
        }
    }

    #[test]
    fn exact_erm_refuses_large_n() {
        let truth = Permutation::identity(11).unwrap();
        let oracle = LabelOracle::ranking(&truth, &NoiseSpec::none()).unwrap();
        let est = LrppBuilder::new(2).unwrap().build(&truth, &oracle, 0).unwrap();
        assert!(matches!(erm_exact_ranking(&est), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn local_search_never_worse_than_start() {
        let mut rng = rng::stream(21, &[]);
        let truth = Permutation::random(40, &mut rng).unwrap();
        let oracle = LabelOracle::ranking(&truth, &NoiseSpec::uniform(0.2, 1)).unwrap();
        let start = Permutation::random(40, &mut rng).unwrap();
        let est = LrppBuilder::new(3).unwrap().build(&start, &oracle, 2).unwrap();
        let out = erm_local_search_ranking(
            &est,
            &start,
            LocalSearch {
                restarts: 3,
                seed: 4,
            },
        )
        .unwrap();
        assert!(est.evaluate(&out) <= est.evaluate(&start));
        let costs = est.pair_costs(PairTask::Ranking);
        let (p, total) = descend_insertions(&costs, start.clone());
        assert_eq!(total, costs.total(&p));
    }

    #[test]
    fn permutation_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.csv");
        let p = Permutation::from_order(vec![3, 0, 2, 1]).unwrap();
        p.write_csv(&path).unwrap();
        assert_eq!(Permutation::read_csv(&path).unwrap(), p);
        std::fs::write(&path, "0,1,x\n").unwrap();
        assert!(Permutation::read_csv(&path).is_err());
    }
}
