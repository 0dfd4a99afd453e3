//! Weighted-sample regret estimators.
//!
//! An estimator holds labeled samples of instances, each with a positive
//! weight, and evaluates
//!
//! ```text
//! f(h') = Σ_s weight_s · (cost_s(h') − cost_s(pivot))
//! ```
//!
//! where `cost_s(h) = 1[h(x_s) ≠ y_s] / N`. Weights are stored as integer
//! numerators over one shared denominator, so every evaluation is an exact
//! integer sum converted to `f64` once. `f(pivot) = 0` holds exactly and
//! results are independent of summation order.

use crate::bits::Bits;
use crate::error::Result;
use crate::oracle::{LabelOracle, LabelTable, PairTask};
use crate::pool::{Pair, PairHypothesis, Pool};

/// A hypothesis that labels instances of type `K`.
pub trait Classifier<K> {
    fn predict(&self, key: K) -> bool;
}

impl<H: PairHypothesis> Classifier<Pair> for H {
    #[inline]
    fn predict(&self, (u, v): Pair) -> bool {
        self.relates(u, v)
    }
}

impl Classifier<usize> for Bits {
    #[inline]
    fn predict(&self, x: usize) -> bool {
        self.get(x)
    }
}

/// One labeled sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sample<K> {
    pub key: K,
    /// Weight numerator over the estimator's denominator.
    pub weight: u64,
    pub label: bool,
    pub pivot_wrong: bool,
}

/// A planned sample before its label is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannedSample<K> {
    pub key: K,
    pub weight: u64,
}

/// Positions of the samples touching each item (CSR layout).
#[derive(Clone, Debug)]
pub struct ItemIndex {
    offsets: Vec<usize>,
    positions: Vec<u32>,
}

impl ItemIndex {
    fn build(n: usize, samples: &[Sample<Pair>]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for s in samples {
            counts[s.key.0 + 1] += 1;
            counts[s.key.1 + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut positions = vec![0u32; 2 * samples.len()];
        for (i, s) in samples.iter().enumerate() {
            for item in [s.key.0, s.key.1] {
                positions[cursor[item]] = i as u32;
                cursor[item] += 1;
            }
        }
        Self { offsets, positions }
    }

    /// Sample positions touching `item`.
    pub fn touching(&self, item: usize) -> &[u32] {
        &self.positions[self.offsets[item]..self.offsets[item + 1]]
    }

    pub fn total_entries(&self) -> usize {
        self.positions.len()
    }
}

/// Built regret estimator relative to a fixed pivot.
#[derive(Clone, Debug)]
pub struct RegretEstimator<K> {
    denom: u64,
    scale: u64,
    samples: Vec<Sample<K>>,
    index: Option<ItemIndex>,
    pool: Option<Pool>,
}

pub type PairEstimator = RegretEstimator<Pair>;

impl<K: Copy + Send + Sync> RegretEstimator<K> {
    /// `scale` is the instance count `N` of the pool; `denom` the common
    /// denominator of the weights.
    pub fn from_samples(denom: u64, scale: u64, samples: Vec<Sample<K>>) -> Self {
        debug_assert!(denom > 0 && scale > 0);
        Self {
            denom,
            scale,
            samples,
            index: None,
            pool: None,
        }
    }

    pub fn samples(&self) -> &[Sample<K>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn denominator(&self) -> u64 {
        self.denom
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// Sample weight as a real number.
    pub fn weight_of(&self, s: &Sample<K>) -> f64 {
        s.weight as f64 / self.denom as f64
    }

    /// Converts an integer numerator into the estimator's units.
    #[inline]
    pub fn to_value(&self, numerator: i128) -> f64 {
        numerator as f64 / (self.denom as f64 * self.scale as f64)
    }

    /// Exact numerator of `f(h)`.
    pub fn numerator<H: Classifier<K>>(&self, h: &H) -> i128 {
        self.samples
            .iter()
            .map(|s| {
                let wrong = h.predict(s.key) != s.label;
                (i64::from(wrong) - i64::from(s.pivot_wrong)) as i128 * s.weight as i128
            })
            .sum()
    }

    /// `f(h)`.
    pub fn evaluate<H: Classifier<K>>(&self, h: &H) -> f64 {
        self.to_value(self.numerator(h))
    }

    /// Labels a plan through `label` and records the pivot's costs.
    pub fn label_plan<H, F>(
        denom: u64,
        scale: u64,
        plan: &[PlannedSample<K>],
        pivot: &H,
        mut label: F,
    ) -> Result<Self>
    where
        H: Classifier<K>,
        F: FnMut(K) -> Result<bool>,
    {
        let mut samples = Vec::with_capacity(plan.len());
        for p in plan {
            let y = label(p.key)?;
            samples.push(Sample {
                key: p.key,
                weight: p.weight,
                label: y,
                pivot_wrong: pivot.predict(p.key) != y,
            });
        }
        Ok(Self::from_samples(denom, scale, samples))
    }
}

impl RegretEstimator<Pair> {
    /// Queries the oracle for every planned pair, in plan order.
    pub fn from_plan<H: PairHypothesis>(
        denom: u64,
        plan: &[PlannedSample<Pair>],
        pivot: &H,
        oracle: &LabelOracle,
    ) -> Result<Self> {
        let pool = pivot.pool();
        pool.check_same(&oracle.pool())?;
        let est = Self::label_plan(denom, pool.pair_count(), plan, pivot, |(u, v)| {
            oracle.query(u, v)
        })?;
        Ok(est.with_index(pool))
    }

    /// Every ordered pair once with unit weight, labels read from a full
    /// table: `f ≡ reg_pivot` exactly.
    pub fn exhaustive<H: PairHypothesis>(table: &LabelTable, pivot: &H) -> Result<Self> {
        let pool = pivot.pool();
        pool.check_same(&table.pool())?;
        let plan: Vec<_> = pool
            .ordered_pairs()
            .map(|key| PlannedSample { key, weight: 1 })
            .collect();
        let est = Self::label_plan(1, pool.pair_count(), &plan, pivot, |(u, v)| {
            Ok(table.label(u, v))
        })?;
        Ok(est.with_index(pool))
    }

    fn with_index(mut self, pool: Pool) -> Self {
        self.index = Some(ItemIndex::build(pool.n(), &self.samples));
        self.pool = Some(pool);
        self
    }

    pub fn pool(&self) -> Pool {
        self.pool.expect("pair estimators always carry their pool")
    }

    pub fn item_index(&self) -> &ItemIndex {
        self.index
            .as_ref()
            .expect("pair estimators always carry an item index")
    }

    /// Distinct unordered pairs among the samples.
    pub fn distinct_pairs(&self) -> usize {
        let mut keys: Vec<(usize, usize)> = self
            .samples
            .iter()
            .map(|s| (s.key.0.min(s.key.1), s.key.0.max(s.key.1)))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }

    /// Exact numerator change when the relation on pairs touching `item`
    /// switches from `before` to `after`. Only the item's samples are read.
    pub fn item_delta_numerator(
        &self,
        item: usize,
        before: impl Fn(usize, usize) -> bool,
        after: impl Fn(usize, usize) -> bool,
    ) -> i128 {
        self.item_index()
            .touching(item)
            .iter()
            .map(|&i| {
                let s = &self.samples[i as usize];
                let (u, v) = s.key;
                let was = i64::from(before(u, v) != s.label);
                let now = i64::from(after(u, v) != s.label);
                (now - was) as i128 * s.weight as i128
            })
            .sum()
    }

    /// `f(h after mv) − f(h)`, reading only the samples touching the moved
    /// item.
    pub fn evaluate_delta<H, M>(&self, h: &H, mv: &M) -> Result<f64>
    where
        H: PairHypothesis,
        M: SingleItemMove<H>,
    {
        self.pool().check_same(&h.pool())?;
        mv.validate(h)?;
        let num = self.item_delta_numerator(
            mv.item(),
            |u, v| h.relates(u, v),
            |u, v| mv.relates_after(h, u, v),
        );
        Ok(self.to_value(num))
    }

    /// Per-pair cost aggregation used by the minimizers.
    pub fn pair_costs(&self, task: PairTask) -> PairCosts {
        PairCosts::from_estimator(self, task)
    }
}

/// A move that changes a hypothesis only on pairs touching one item.
pub trait SingleItemMove<H: PairHypothesis> {
    fn item(&self) -> usize;

    fn validate(&self, h: &H) -> Result<()>;

    /// The moved hypothesis on a pair touching `item()`.
    fn relates_after(&self, h: &H, u: usize, v: usize) -> bool;
}

/// Estimator samples folded into per-pair costs.
///
/// `neighbors(x)` lists `(y, c1, c0)`: the summed weight of wrong samples on
/// `{x, y}` when `h(x, y) = 1` and when `h(x, y) = 0`. For a ranking task
/// `h(x, y) = 1` means `x` precedes `y`.
#[derive(Clone, Debug)]
pub struct PairCosts {
    n: usize,
    task: PairTask,
    adj: Vec<Vec<(usize, i64, i64)>>,
    pivot_numerator: i128,
    denom: u64,
    scale: u64,
}

impl PairCosts {
    fn from_estimator(est: &PairEstimator, task: PairTask) -> Self {
        let n = est.pool().n();
        let mut entries: Vec<(usize, usize, i64, i64)> = est
            .samples
            .iter()
            .map(|s| {
                let (u, v) = s.key;
                let (a, b) = (u.min(v), u.max(v));
                // Orientation of h(a, b) relative to h(u, v).
                let flipped = task == PairTask::Ranking && u > v;
                let wrong_when_true = s.label == flipped;
                let w = s.weight as i64;
                if wrong_when_true {
                    (a, b, w, 0)
                } else {
                    (a, b, 0, w)
                }
            })
            .collect();
        entries.sort_unstable_by_key(|e| (e.0, e.1));
        let mut adj: Vec<Vec<(usize, i64, i64)>> = vec![Vec::new(); n];
        let mut iter = entries.into_iter().peekable();
        while let Some((a, b, mut c1, mut c0)) = iter.next() {
            while let Some(&(a2, b2, d1, d0)) = iter.peek() {
                if (a2, b2) != (a, b) {
                    break;
                }
                c1 += d1;
                c0 += d0;
                iter.next();
            }
            adj[a].push((b, c1, c0));
            match task {
                PairTask::Ranking => adj[b].push((a, c0, c1)),
                PairTask::Clustering => adj[b].push((a, c1, c0)),
            }
        }
        let pivot_numerator = est
            .samples
            .iter()
            .map(|s| i128::from(s.pivot_wrong) * s.weight as i128)
            .sum();
        Self {
            n,
            task,
            adj,
            pivot_numerator,
            denom: est.denom,
            scale: est.scale,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn task(&self) -> PairTask {
        self.task
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, i64, i64)] {
        &self.adj[x]
    }

    /// Weighted wrong count of `h` over all sampled pairs.
    pub fn total<H: PairHypothesis>(&self, h: &H) -> i128 {
        (0..self.n)
            .flat_map(|a| self.adj[a].iter().map(move |e| (a, e)))
            .filter(|(a, e)| e.0 > *a)
            .map(|(a, &(b, c1, c0))| if h.relates(a, b) { c1 } else { c0 } as i128)
            .sum()
    }

    /// Converts a total into the estimator value `f`.
    pub fn value(&self, total: i128) -> f64 {
        (total - self.pivot_numerator) as f64 / (self.denom as f64 * self.scale as f64)
    }

    /// Dense `n × n` matrix: entry `[x][y]` is the cost when `h(x, y) = 1`.
    pub fn dense_related(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0i64; self.n]; self.n];
        for x in 0..self.n {
            for &(y, c1, _) in &self.adj[x] {
                m[x][y] = c1;
            }
        }
        m
    }

    /// Dense `n × n` matrix: entry `[x][y]` is the cost when `h(x, y) = 0`.
    pub fn dense_unrelated(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0i64; self.n]; self.n];
        for x in 0..self.n {
            for &(y, _, c0) in &self.adj[x] {
                m[x][y] = c0;
            }
        }
        m
    }

    /// True when no sample carries weight.
    pub fn is_flat(&self) -> bool {
        self.adj.iter().flatten().all(|&(_, c1, c0)| c1 == c0)
    }
}
