//! Semi-supervised k-clustering: partitions, the cluster-size-biased regret
//! estimator and minimizers.

use std::path::Path;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::estimator::{PairCosts, PairEstimator, PlannedSample, SingleItemMove};
use crate::oracle::{LabelOracle, PairTask};
use crate::par;
use crate::pool::{Pair, PairHypothesis, Pool};
use crate::ranking::{ceil_count, check_constant, check_epsilon};
use crate::rng;

/// A partition of `0..n` into at most `k` clusters, some possibly empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clustering {
    assign: Vec<usize>,
    k: usize,
}

impl Clustering {
    pub fn new(assign: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if assign.len() < 2 {
            return Err(invalid("assign", format!("need at least 2 items, got {}", assign.len())));
        }
        if let Some((item, &c)) = assign.iter().enumerate().find(|(_, &c)| c >= k) {
            return Err(invalid("assign", format!("item {item} has cluster {c} >= k = {k}")));
        }
        Ok(Self { assign, k })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| rng.random_range(0..k.max(1))).collect(), k)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.assign.len()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn cluster_of(&self, item: usize) -> usize {
        self.assign[item]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assign {
            sizes[c] += 1;
        }
        sizes
    }

    /// Cluster ids by decreasing size, ties by id.
    pub fn size_order(&self) -> Vec<usize> {
        let sizes = self.sizes();
        let mut ids: Vec<usize> = (0..self.k).collect();
        ids.sort_by_key(|&c| (std::cmp::Reverse(sizes[c]), c));
        ids
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.k];
        for (item, &c) in self.assign.iter().enumerate() {
            m[c].push(item);
        }
        m
    }

    /// Clusters renumbered by first occurrence; equal partitions compare equal.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let assign = self
            .assign
            .iter()
            .map(|&c| {
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect();
        Self { assign, k: self.k }
    }

    pub fn with_reassignment(&self, item: usize, to: usize) -> Self {
        let mut out = self.clone();
        out.assign[item] = to;
        out
    }

    /// Reads `item,cluster` rows; `k` is one more than the largest id unless
    /// given.
    pub fn read_csv(path: &Path, k: Option<usize>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if line == 0 && record.get(0) == Some("item") {
                continue;
            }
            let field = |i: usize| -> Result<usize> {
                record
                    .get(i)
                    .ok_or_else(|| Error::Parse(format!("row {}: missing field {}", line + 1, i + 1)))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))
            };
            rows.push((field(0)?, field(1)?));
        }
        let n = rows.len();
        let mut assign = vec![usize::MAX; n];
        for (item, c) in rows {
            if item >= n {
                return Err(Error::ItemOutOfPool { item, n });
            }
            if assign[item] != usize::MAX {
                return Err(Error::Parse(format!("item {item} listed twice")));
            }
            assign[item] = c;
        }
        let k = k.unwrap_or_else(|| assign.iter().max().map_or(1, |m| m + 1));
        Self::new(assign, k)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["item", "cluster"])?;
        for (item, c) in self.assign.iter().enumerate() {
            w.write_record([item.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl PairHypothesis for Clustering {
    fn pool(&self) -> Pool {
        Pool::new(self.n()).expect("clusterings have at least 2 items")
    }

    #[inline]
    fn relates(&self, u: usize, v: usize) -> bool {
        self.assign[u] == self.assign[v]
    }

    fn snapshot(&self) -> Vec<usize> {
        self.assign.clone()
    }
}

/// Every partition of `0..n` into at most `k` non-empty blocks, as canonical
/// assignments in lexicographic order.
pub fn all_clusterings(n: usize, k: usize) -> Vec<Clustering> {
    let mut out = Vec::new();
    let mut assign = vec![0usize; n];
    fn rec(i: usize, used: usize, k: usize, assign: &mut Vec<usize>, out: &mut Vec<Clustering>) {
        if i == assign.len() {
            out.push(Clustering {
                assign: assign.clone(),
                k,
            });
            return;
        }
        for b in 0..=used.min(k - 1) {
            assign[i] = b;
            rec(i + 1, used.max(b + 1), k, assign, out);
        }
    }
    if n >= 1 && k >= 1 {
        rec(1, 1, k, &mut assign, &mut out);
    }
    out
}

/// Ordered-pair disagreement count between two clusterings, computed from
/// the intersection table `V_ij = V_i ∩ V'_j`.
pub fn disagreement_by_intersections(h: &Clustering, h2: &Clustering) -> Result<u64> {
    h.pool().check_same(&h2.pool())?;
    let mut table = vec![vec![0u64; h2.k()]; h.k()];
    for item in 0..h.n() {
        table[h.cluster_of(item)][h2.cluster_of(item)] += 1;
    }
    let sizes = h.sizes();
    let mut split = 0u64;
    for (i, row) in table.iter().enumerate() {
        for &vij in row {
            split += vij * (sizes[i] as u64 - vij);
        }
    }
    let mut merged = 0u64;
    for j in 0..h2.k() {
        for i in 0..h.k() {
            for i2 in i + 1..h.k() {
                merged += table[i][j] * table[i2][j];
            }
        }
    }
    Ok(split + 2 * merged)
}

/// `q = max(1, ⌈c2 · max(ε⁻²k², ε⁻³k) · log₂ n⌉)`.
pub fn sample_size_q(n: usize, k: usize, epsilon: f64, c2: f64) -> Result<usize> {
    if n < 2 {
        return Err(invalid("n", format!("need n >= 2, got {n}")));
    }
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    check_epsilon(epsilon)?;
    check_constant("c2", c2)?;
    let inv = 1.0 / epsilon;
    let k = k as f64;
    let factor = (inv * inv * k * k).max(inv * inv * inv * k);
    Ok(ceil_count(c2 * factor * (n as f64).log2()).max(1))
}

/// Builds cluster-size-biased regret estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClusteringBuilder {
    pub q: usize,
}

impl ClusteringBuilder {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(invalid("q", "must be positive"));
        }
        Ok(Self { q })
    }

    pub fn from_params(n: usize, k: usize, epsilon: f64, c2: f64) -> Result<Self> {
        Self::new(sample_size_q(n, k, epsilon, c2)?)
    }

    /// For `u` in cluster `V_i` (size order): `q` draws from `V_i ∖ {u}` with
    /// weight `(|V_i|−1)/q`, and `q` draws from every later non-empty `V_j`
    /// with weight `2|V_j|/q`. Sources of at most `q` items are taken whole
    /// with weights 1 and 2. Weights share denominator `q`.
    pub fn plan(&self, pivot: &Clustering, seed: u64) -> Vec<PlannedSample<Pair>> {
        let q = self.q as u64;
        let members = pivot.members();
        let order = pivot.size_order();
        let mut position = vec![0usize; pivot.k()];
        for (pos, &c) in order.iter().enumerate() {
            position[c] = pos;
        }
        let per_item = par::map_range(pivot.n(), |u| {
            let mut out = Vec::new();
            let own = pivot.cluster_of(u);
            let peers = &members[own];
            let source = peers.len() - 1;
            if source > 0 {
                if source <= self.q {
                    out.extend(peers.iter().filter(|&&v| v != u).map(|&v| PlannedSample {
                        key: (u, v),
                        weight: q,
                    }));
                } else {
                    let mut rng = rng::stream(seed, &[rng::TAG_CLUSTER, u as u64, own as u64]);
                    let skip = peers.binary_search(&u).expect("u is in its own cluster");
                    for _ in 0..self.q {
                        let t = rng.random_range(0..source);
                        let v = peers[if t >= skip { t + 1 } else { t }];
                        out.push(PlannedSample {
                            key: (u, v),
                            weight: source as u64,
                        });
                    }
                }
            }
            for &other in &order[position[own] + 1..] {
                let target = &members[other];
                if target.is_empty() {
                    continue;
                }
                if target.len() <= self.q {
                    out.extend(target.iter().map(|&v| PlannedSample {
                        key: (u, v),
                        weight: 2 * q,
                    }));
                } else {
                    let mut rng =
                        rng::stream(seed, &[rng::TAG_CLUSTER, u as u64, other as u64]);
                    for _ in 0..self.q {
                        let v = target[rng.random_range(0..target.len())];
                        out.push(PlannedSample {
                            key: (u, v),
                            weight: 2 * target.len() as u64,
                        });
                    }
                }
            }
            out
        });
        per_item.into_iter().flatten().collect()
    }

    pub fn build(
        &self,
        pivot: &Clustering,
        oracle: &LabelOracle,
        seed: u64,
    ) -> Result<PairEstimator> {
        let plan = self.plan(pivot, seed);
        PairEstimator::from_plan(self.q as u64, &plan, pivot, oracle)
    }
}

/// Moves one item to another cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Reassignment {
    pub item: usize,
    pub to: usize,
}

impl SingleItemMove<Clustering> for Reassignment {
    fn item(&self) -> usize {
        self.item
    }

    fn validate(&self, h: &Clustering) -> Result<()> {
        h.pool().check_item(self.item)?;
        if self.to >= h.k() {
            return Err(invalid("to", format!("cluster {} >= k = {}", self.to, h.k())));
        }
        Ok(())
    }

    fn relates_after(&self, h: &Clustering, u: usize, v: usize) -> bool {
        let c = |x: usize| {
            if x == self.item {
                self.to
            } else {
                h.cluster_of(x)
            }
        };
        c(u) == c(v)
    }
}

pub const EXACT_CLUSTERING_MAX_N: usize = 12;
pub const EXACT_CLUSTERING_MAX_K: usize = 4;

/// Global minimizer over all partitions into at most `k` clusters. Ties go
/// to the lexicographically smallest canonical assignment.
pub fn erm_exact_clustering(est: &PairEstimator, k: usize) -> Result<Clustering> {
    let n = est.pool().n();
    if n > EXACT_CLUSTERING_MAX_N {
        return Err(Error::TooLarge {
            what: "exact clustering ERM (items)",
            got: n,
            max: EXACT_CLUSTERING_MAX_N,
        });
    }
    if k > EXACT_CLUSTERING_MAX_K {
        return Err(Error::TooLarge {
            what: "exact clustering ERM (clusters)",
            got: k,
            max: EXACT_CLUSTERING_MAX_K,
        });
    }
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    let costs = est.pair_costs(PairTask::Clustering);
    let together = costs.dense_related();
    let apart = costs.dense_unrelated();

    struct Search<'a> {
        together: &'a [Vec<i64>],
        apart: &'a [Vec<i64>],
        k: usize,
        assign: Vec<usize>,
        best: Option<(i64, Vec<usize>)>,
    }
    impl Search<'_> {
        fn rec(&mut self, i: usize, used: usize, cost: i64) {
            let n = self.assign.len();
            if i == n {
                if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    self.best = Some((cost, self.assign.clone()));
                }
                return;
            }
            for b in 0..=used.min(self.k - 1) {
                let add: i64 = (0..i)
                    .map(|j| {
                        if self.assign[j] == b {
                            self.together[i][j]
                        } else {
                            self.apart[i][j]
                        }
                    })
                    .sum();
                self.assign[i] = b;
                self.rec(i + 1, used.max(b + 1), cost + add);
            }
        }
    }
    let mut search = Search {
        together: &together,
        apart: &apart,
        k,
        assign: vec![0; n],
        best: None,
    };
    search.rec(1, 1, 0);
    let (_, assign) = search.best.expect("at least one partition");
    Clustering::new(assign, k)
}

/// Local search over single-item reassignments and two-item swaps, best of
/// `restarts` seeded starts (the first is `start`).
pub fn erm_local_search_clustering(
    est: &PairEstimator,
    start: &Clustering,
    search: crate::ranking::LocalSearch,
) -> Result<Clustering> {
    est.pool().check_same(&start.pool())?;
    let costs = est.pair_costs(PairTask::Clustering);
    if costs.is_flat() {
        return Ok(start.clone());
    }
    let (n, k) = (start.n(), start.k());
    let restarts = search.restarts.max(1);
    let results = par::map_range(restarts, |r| {
        let init = if r == 0 {
            start.clone()
        } else {
            let mut rng = rng::stream(search.seed, &[rng::TAG_RESTART, r as u64]);
            Clustering::random(n, k, &mut rng).expect("valid sizes")
        };
        descend_reassignments(&costs, init)
    });
    let (best, _) = results
        .into_iter()
        .min_by_key(|(_, total)| *total)
        .expect("at least one restart");
    Ok(best)
}

/// Fills `by_cluster[c]` with the cost of `x`'s sampled pairs if `x` sat in
/// cluster `c`, up to a shared constant.
fn move_cost(costs: &PairCosts, assign: &[usize], x: usize, by_cluster: &mut [i64]) {
    by_cluster.iter_mut().for_each(|c| *c = 0);
    for &(y, c1, c0) in costs.neighbors(x) {
        by_cluster[assign[y]] += c1 - c0;
    }
}

/// Descends to a local optimum; returns the clustering and its total cost.
pub fn descend_reassignments(costs: &PairCosts, mut h: Clustering) -> (Clustering, i128) {
    let (n, k) = (h.n(), h.k());
    let mut total = costs.total(&h);
    let mut by_cluster = vec![0i64; k];
    loop {
        let mut improved = false;
        for x in 0..n {
            if costs.neighbors(x).is_empty() {
                continue;
            }
            move_cost(costs, &h.assign, x, &mut by_cluster);
            let current = by_cluster[h.assign[x]];
            let (best_c, best) = by_cluster
                .iter()
                .enumerate()
                .min_by_key(|&(c, &v)| (v, c))
                .map(|(c, &v)| (c, v))
                .expect("k >= 1");
            if best < current {
                h.assign[x] = best_c;
                total += (best - current) as i128;
                improved = true;
            }
        }
        if improved {
            continue;
        }
        // Swaps between non-adjacent items decompose into two independent
        // single moves, so only sampled pairs need checking.
        for x in 0..n {
            for &(y, _, _) in costs.neighbors(x) {
                let (cx, cy) = (h.assign[x], h.assign[y]);
                if y < x || cx == cy {
                    continue;
                }
                move_cost(costs, &h.assign, x, &mut by_cluster);
                let d1 = by_cluster[cy] - by_cluster[cx];
                h.assign[x] = cy;
                move_cost(costs, &h.assign, y, &mut by_cluster);
                let d2 = by_cluster[cx] - by_cluster[cy];
                if d1 + d2 < 0 {
                    h.assign[y] = cx;
                    total += (d1 + d2) as i128;
                    improved = true;
                } else {
                    h.assign[x] = cx;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (h, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::NoiseSpec;
    use crate::pool::{disagreement_count, relative_regret};

    #[test]
    fn sample_size_q_examples() {
        assert_eq!(sample_size_q(256, 3, 0.2, 1.0).unwrap(), 3000);
        // k = 1: the cubic branch dominates.
        assert_eq!(sample_size_q(256, 1, 0.1, 1.0).unwrap(), 8000);
        assert!(sample_size_q(256, 0, 0.1, 1.0).is_err());
        assert!(sample_size_q(256, 2, 0.3, 1.0).is_err());
    }

    #[test]
    fn q_branches_tie_at_crossover() {
        // eps = 1/5, k = 5: both branches give 625; log2(16) = 4.
        assert_eq!(sample_size_q(16, 5, 0.2, 1.0).unwrap(), 2500);
        // k = 4: the cubic branch wins, 125 * 4 * 4.
        assert_eq!(sample_size_q(16, 4, 0.2, 1.0).unwrap(), 2000);
        // k = 6: the quadratic branch wins, 25 * 36 * 4.
        assert_eq!(sample_size_q(16, 6, 0.2, 1.0).unwrap(), 3600);
    }

    #[test]
    fn canonical_relabeling() {
        let a = Clustering::new(vec![2, 2, 0, 1, 0], 3).unwrap();
        let b = Clustering::new(vec![1, 1, 2, 0, 2], 3).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.canonical().assignment(), &[0, 0, 1, 2, 1]);
        assert_eq!(disagreement_count(&a, &b).unwrap(), 0);
    }

    #[test]
    fn size_order_ties_by_id() {
        let h = Clustering::new(vec![1, 1, 0, 0, 2, 3], 5).unwrap();
        assert_eq!(h.size_order(), vec![0, 1, 2, 3, 4]);
        let h = Clustering::new(vec![2, 1, 1, 0, 2, 2], 3).unwrap();
        assert_eq!(h.size_order(), vec![2, 1, 0]);
    }

    #[test]
    fn partition_counts() {
        // Stirling numbers: S(8,1)+S(8,2)+S(8,3) = 1 + 127 + 966.
        assert_eq!(all_clusterings(8, 3).len(), 1094);
        assert_eq!(all_clusterings(4, 4).len(), 15);
        assert_eq!(all_clusterings(5, 1).len(), 1);
        let all = all_clusterings(6, 3);
        assert!(all.windows(2).all(|w| w[0].assignment() < w[1].assignment()));
    }

    #[test]
    fn intersection_distance_matches_pair_count() {
        let mut rng = rng::stream(17, &[]);
        for _ in 0..200 {
            let n = rng.random_range(2..15);
            let a = Clustering::random(n, rng.random_range(1..5), &mut rng).unwrap();
            let b = Clustering::random(n, rng.random_range(1..5), &mut rng).unwrap();
            assert_eq!(
                disagreement_by_intersections(&a, &b).unwrap(),
                disagreement_count(&a, &b).unwrap()
            );
        }
    }

    #[test]
    fn singleton_cluster_has_no_within_samples() {
        let pivot = Clustering::new(vec![0, 0, 0, 1], 2).unwrap();
        let plan = ClusteringBuilder::new(2).unwrap().plan(&pivot, 3);
        // Item 3 is alone and its cluster is last in size order.
        assert!(plan.iter().all(|s| s.key.0 != 3));
        assert!(plan.iter().filter(|s| s.key.1 == 3).count() > 0);
    }

    #[test]
    fn exhaustive_q_is_exact_over_all_partitions() {
        let truth = Clustering::new(vec![0, 1, 0, 2, 1, 0], 3).unwrap();
        let oracle = LabelOracle::clustering(&truth, &NoiseSpec::uniform(0.25, 6)).unwrap();
        let pivot = Clustering::new(vec![1, 1, 0, 0, 2, 2], 3).unwrap();
        let est = ClusteringBuilder::new(6).unwrap().build(&pivot, &oracle, 1).unwrap();
        for h in all_clusterings(6, 3) {
            assert_eq!(est.evaluate(&h), relative_regret(&h, &pivot, &oracle).unwrap());
        }
    }

    #[test]
    fn exact_erm_recovers_noiseless_truth() {
        let truth = Clustering::new(vec![2, 0, 2, 1, 0, 1, 2], 3).unwrap();
        let oracle = LabelOracle::clustering(&truth, &NoiseSpec::none()).unwrap();
        let pivot = Clustering::new(vec![0; 7], 3).unwrap();
        let est = ClusteringBuilder::new(7).unwrap().build(&pivot, &oracle, 0).unwrap();
        let got = erm_exact_clustering(&est, 3).unwrap();
        assert_eq!(got.canonical(), truth.canonical());
        let only = erm_exact_clustering(&est, 1).unwrap();
        assert_eq!(only.assignment(), &[0; 7]);
    }

    #[test]
    fn exact_erm_matches_enumeration() {
        let mut rng = rng::stream(23, &[]);
        for trial in 0..20 {
            let n = rng.random_range(2..=7);
            let truth = Clustering::random(n, 3, &mut rng).unwrap();
            let oracle =
                LabelOracle::clustering(&truth, &NoiseSpec::uniform(0.3, trial)).unwrap();
            let pivot = Clustering::random(n, 3, &mut rng).unwrap();
            let est = ClusteringBuilder::new(1).unwrap().build(&pivot, &oracle, trial).unwrap();
            let got = erm_exact_clustering(&est, 3).unwrap();
            let best = all_clusterings(n, 3)
                .into_iter()
                .min_by_key(|h| est.numerator(h))
                .unwrap();
            assert_eq!(got, best);
        }
    }

    #[test]
    fn exact_erm_size_limits() {
        let truth = Clustering::new(vec![0; 13], 2).unwrap();
        let oracle = LabelOracle::clustering(&truth, &NoiseSpec::none()).unwrap();
        let est = ClusteringBuilder::new(2).unwrap().build(&truth, &oracle, 0).unwrap();
        assert!(matches!(erm_exact_clustering(&est, 2), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn reassignment_relates_after() {
        let h = Clustering::new(vec![0, 1, 1, 2], 3).unwrap();
        let mv = Reassignment { item: 0, to: 1 };
        let moved = h.with_reassignment(0, 1);
        for y in 1..4 {
            assert_eq!(mv.relates_after(&h, 0, y), moved.relates(0, y));
            assert_eq!(mv.relates_after(&h, y, 0), moved.relates(y, 0));
        }
        assert!(mv.validate(&h).is_ok());
        assert!(Reassignment { item: 0, to: 3 }.validate(&h).is_err());
        assert!(Reassignment { item: 4, to: 0 }.validate(&h).is_err());
    }

    #[test]
    fn local_search_total_is_consistent() {
        let mut rng = rng::stream(31, &[]);
        let truth = Clustering::random(40, 3, &mut rng).unwrap();
        let oracle = LabelOracle::clustering(&truth, &NoiseSpec::uniform(0.1, 1)).unwrap();
        let start = Clustering::random(40, 3, &mut rng).unwrap();
        let est = ClusteringBuilder::new(5).unwrap().build(&start, &oracle, 2).unwrap();
        let costs = est.pair_costs(PairTask::Clustering);
        let (h, total) = descend_reassignments(&costs, start.clone());
        assert_eq!(total, costs.total(&h));
        assert!(est.evaluate(&h) <= est.evaluate(&start));
    }

    #[test]
    fn clustering_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let h = Clustering::new(vec![1, 0, 2, 1], 3).unwrap();
        h.write_csv(&path).unwrap();
        assert_eq!(Clustering::read_csv(&path, Some(3)).unwrap(), h);
        std::fs::write(&path, "0,1\n0,2\n").unwrap();
        assert!(Clustering::read_csv(&path, None).is_err());
    }
}
