//! Explicit finite concept classes over a uniform pool of instances: balls,
//! disagreement regions, the disagreement coefficient, VC dimension, and the
//! annulus-sampling regret estimator.

use std::path::Path;

use rand::Rng;

use crate::bits::Bits;
use crate::error::{invalid, Error, Result};
use crate::estimator::{PlannedSample, RegretEstimator};
use crate::oracle::InstanceOracle;
use crate::par;
use crate::pool::{PairHypothesis, Pool};
use crate::ranking::{ceil_count, check_constant, check_epsilon};
use crate::rng;

/// Distinct hypotheses stored as label vectors over instances `0..pool_size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteClass {
    pool_size: usize,
    hyps: Vec<Bits>,
}

impl FiniteClass {
    pub fn new(pool_size: usize, hyps: Vec<Bits>) -> Result<Self> {
        if pool_size == 0 {
            return Err(invalid("pool_size", "must be positive"));
        }
        if hyps.is_empty() {
            return Err(invalid("hypotheses", "class is empty"));
        }
        if let Some(i) = hyps.iter().position(|h| h.len() != pool_size) {
            return Err(invalid(
                "hypotheses",
                format!("hypothesis {i} has {} labels, pool has {pool_size}", hyps[i].len()),
            ));
        }
        let mut sorted: Vec<&Bits> = hyps.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("hypotheses", "duplicate hypotheses"));
        }
        Ok(Self { pool_size, hyps })
    }

    /// Thresholds `1[x ≥ t]` for `t = 0..=pool_size`.
    pub fn thresholds(pool_size: usize) -> Result<Self> {
        if pool_size < 2 {
            return Err(invalid("pool_size", "need at least 2 instances"));
        }
        let hyps = (0..=pool_size)
            .map(|t| Bits::from_fn(pool_size, |x| x >= t))
            .collect();
        Self::new(pool_size, hyps)
    }

    /// Intervals `1[a ≤ x ≤ b]` plus the empty hypothesis.
    pub fn intervals(pool_size: usize) -> Result<Self> {
        if pool_size < 2 {
            return Err(invalid("pool_size", "need at least 2 instances"));
        }
        let mut hyps = vec![Bits::zeros(pool_size)];
        for a in 0..pool_size {
            for b in a..pool_size {
                hyps.push(Bits::from_fn(pool_size, |x| a <= x && x <= b));
            }
        }
        Self::new(pool_size, hyps)
    }

    /// Pair hypotheses as label vectors over the ordered pairs of their pool.
    pub fn from_pair_hypotheses<H: PairHypothesis>(hyps: &[H]) -> Result<Self> {
        let first = hyps
            .first()
            .ok_or_else(|| invalid("hypotheses", "class is empty"))?;
        let pool = first.pool();
        let vectors = hyps
            .iter()
            .map(|h| {
                pool.check_same(&h.pool())?;
                Ok(pair_labels(h))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pool.pair_count() as usize, vectors)
    }

    /// Reads a 0/1 matrix, one hypothesis per row.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut hyps = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let bits = record
                .iter()
                .map(|f| match f {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::Parse(format!("row {}: `{other}` is not 0/1", line + 1))),
                })
                .collect::<Result<Vec<_>>>()?;
            hyps.push(Bits::from_fn(bits.len(), |x| bits[x]));
        }
        let pool_size = hyps.first().map_or(0, Bits::len);
        Self::new(pool_size, hyps)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for h in &self.hyps {
            w.write_record((0..self.pool_size).map(|x| if h.get(x) { "1" } else { "0" }))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn len(&self) -> usize {
        self.hyps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyps.is_empty()
    }

    pub fn hypothesis(&self, i: usize) -> &Bits {
        &self.hyps[i]
    }

    pub fn hypotheses(&self) -> &[Bits] {
        &self.hyps
    }

    pub fn index_of(&self, h: &Bits) -> Option<usize> {
        self.hyps.iter().position(|g| g == h)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.hyps.len() {
            return Err(Error::NotInClass);
        }
        Ok(())
    }

    /// Measure of an instance subset under the uniform distribution.
    pub fn measure(&self, region: &Bits) -> f64 {
        region.count_ones() as f64 / self.pool_size as f64
    }

    /// `dist(h_i, h_j)` as a disagreement count.
    pub fn distance_count(&self, i: usize, j: usize) -> usize {
        self.hyps[i].xor_count(&self.hyps[j])
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance_count(i, j) as f64 / self.pool_size as f64
    }

    /// Largest disagreement count within radius `r`.
    fn radius_count(&self, r: f64) -> usize {
        ceil_count((r * self.pool_size as f64).max(0.0) + 1.0).saturating_sub(1)
    }

    /// `B(h, r)`: indices of hypotheses within distance `r` of `h`.
    pub fn ball(&self, center: usize, r: f64) -> Result<Vec<usize>> {
        self.check_index(center)?;
        if r < 0.0 {
            return Err(invalid("r", format!("radius must be non-negative, got {r}")));
        }
        let max = self.radius_count(r);
        Ok((0..self.hyps.len())
            .filter(|&j| self.distance_count(center, j) <= max)
            .collect())
    }

    /// `dis(V)`: instances on which the hypotheses in `subset` are not
    /// unanimous.
    pub fn disagreement_region(&self, subset: &[usize]) -> Bits {
        let Some((&first, rest)) = subset.split_first() else {
            return Bits::zeros(self.pool_size);
        };
        let mut any = self.hyps[first].clone();
        let mut all = self.hyps[first].clone();
        for &j in rest {
            any.or_assign(&self.hyps[j]);
            all.and_assign(&self.hyps[j]);
        }
        any.xor(&all)
    }

    /// Hypotheses sorted by distance from `center`, grouped by distance.
    fn shells(&self, center: usize) -> Vec<(usize, Vec<usize>)> {
        let mut by_dist: Vec<(usize, usize)> = (0..self.hyps.len())
            .map(|j| (self.distance_count(center, j), j))
            .collect();
        by_dist.sort_unstable();
        let mut shells: Vec<(usize, Vec<usize>)> = Vec::new();
        for (d, j) in by_dist {
            match shells.last_mut() {
                Some((last, members)) if *last == d => members.push(j),
                _ => shells.push((d, vec![j])),
            }
        }
        shells
    }

    /// `θ_h = sup_{r ≥ r_floor, r > 0} P[dis(B(h, r))] / r`, evaluated at the
    /// realized distances (where the supremum of a finite class is attained)
    /// and at `r_floor` itself.
    pub fn disagreement_coefficient(&self, center: usize, r_floor: f64) -> Result<f64> {
        self.check_index(center)?;
        if r_floor < 0.0 {
            return Err(invalid("r_floor", "must be non-negative"));
        }
        let pool = self.pool_size as f64;
        let mut any = Bits::zeros(self.pool_size);
        let mut all = Bits::ones(self.pool_size);
        let mut best = 0.0f64;
        let mut floor_done = r_floor == 0.0;
        let mut prev_measure = 0.0;
        for (d, members) in self.shells(center) {
            let r = d as f64 / pool;
            if !floor_done && r > r_floor {
                // ball at r_floor equals the ball at the previous shell
                best = best.max(prev_measure / r_floor);
                floor_done = true;
            }
            for j in members {
                any.or_assign(&self.hyps[j]);
                all.and_assign(&self.hyps[j]);
            }
            let measure = self.measure(&any.xor(&all));
            prev_measure = measure;
            if d > 0 && r >= r_floor {
                best = best.max(measure / r);
                floor_done = true;
            }
        }
        if !floor_done {
            best = best.max(prev_measure / r_floor);
        }
        Ok(best)
    }

    /// `θ = max_h θ_h`.
    pub fn uniform_disagreement_coefficient(&self, r_floor: f64) -> Result<f64> {
        let per = par::map_range(self.hyps.len(), |i| self.disagreement_coefficient(i, r_floor));
        per.into_iter()
            .try_fold(0.0f64, |acc, t| Ok(acc.max(t?)))
    }

    /// VC dimension of the class by exhaustive shattering search, up to `cap`.
    pub fn vc_dimension(&self, cap: usize) -> Result<usize> {
        shattering_dimension(self.pool_size, &self.hyps, cap)
    }

    /// VC dimension of the range space of level sets `{x: h(x)=0}`,
    /// `{x: h(x)=1}`, up to `cap`.
    pub fn range_space_vc_dimension(&self, cap: usize) -> Result<usize> {
        let mut ranges = self.hyps.clone();
        ranges.extend(self.hyps.iter().map(|h| h.xor(&Bits::ones(self.pool_size))));
        shattering_dimension(self.pool_size, &ranges, cap)
    }

    /// Range-space VC dimension when the exhaustive search is affordable,
    /// otherwise the bound `⌊log₂ 2|C|⌋`.
    pub fn vc_dimension_estimate(&self) -> usize {
        if self.pool_size <= SHATTER_MAX_POOL {
            if let Ok(d) = self.range_space_vc_dimension(SHATTER_MAX_DIM) {
                return d.max(1);
            }
        }
        ((2 * self.hyps.len()) as f64).log2().floor().max(1.0) as usize
    }
}

/// Label vector of a pair hypothesis over ordered pairs.
pub fn pair_labels<H: PairHypothesis>(h: &H) -> Bits {
    let pool = h.pool();
    let mut bits = Bits::zeros(pool.pair_count() as usize);
    for (u, v) in pool.ordered_pairs() {
        if h.relates(u, v) {
            bits.set(pool.ordered_index(u, v), true);
        }
    }
    bits
}

/// Instance subset of ordered pairs as `(u, v)` tuples.
pub fn pairs_of(pool: Pool, region: &Bits) -> Vec<(usize, usize)> {
    let n = pool.n();
    region
        .ones_iter()
        .map(|i| {
            let u = i / (n - 1);
            let r = i % (n - 1);
            (u, if r < u { r } else { r + 1 })
        })
        .collect()
}

pub const SHATTER_MAX_POOL: usize = 40;
pub const SHATTER_MAX_DIM: usize = 4;

fn shattering_dimension(pool_size: usize, ranges: &[Bits], cap: usize) -> Result<usize> {
    if pool_size > SHATTER_MAX_POOL {
        return Err(Error::TooLarge {
            what: "shattering search (pool size)",
            got: pool_size,
            max: SHATTER_MAX_POOL,
        });
    }
    let mut dim = 0;
    let mut subset = Vec::new();
    for size in 1..=cap.min(pool_size) {
        subset.clear();
        if !any_shattered(pool_size, ranges, size, 0, &mut subset) {
            break;
        }
        dim = size;
    }
    Ok(dim)
}

fn any_shattered(
    pool_size: usize,
    ranges: &[Bits],
    size: usize,
    start: usize,
    subset: &mut Vec<usize>,
) -> bool {
    if subset.len() == size {
        let need = 1usize << size;
        let mut seen = vec![false; need];
        let mut count = 0;
        for h in ranges {
            let pattern = subset
                .iter()
                .enumerate()
                .fold(0usize, |acc, (b, &x)| acc | (usize::from(h.get(x)) << b));
            if !seen[pattern] {
                seen[pattern] = true;
                count += 1;
                if count == need {
                    return true;
                }
            }
        }
        return false;
    }
    for x in start..pool_size {
        subset.push(x);
        let hit = any_shattered(pool_size, ranges, size, x + 1, subset);
        subset.pop();
        if hit {
            return true;
        }
    }
    false
}

/// `m = max(1, ⌈c3·ε⁻²·θ·(d·log₂ max(θ,2) + log₂(δ⁻¹·log₂ max(1/μ, 2)))⌉)`.
pub fn sample_size_m(
    theta: f64,
    d: usize,
    epsilon: f64,
    mu: f64,
    delta: f64,
    c3: f64,
) -> Result<usize> {
    if !(theta >= 1.0 && theta.is_finite()) {
        return Err(invalid("theta", format!("must be >= 1, got {theta}")));
    }
    if d == 0 {
        return Err(invalid("d", "must be >= 1"));
    }
    check_epsilon(epsilon)?;
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(invalid("mu", format!("must lie in (0, 1], got {mu}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    check_constant("c3", c3)?;
    let inv = 1.0 / epsilon;
    let inner = d as f64 * theta.max(2.0).log2() + ((1.0 / mu).max(2.0).log2() / delta).log2();
    Ok(ceil_count(c3 * inv * inv * theta * inner).max(1))
}

/// The disjoint annuli `X_0 = dis(B(h, μ))`,
/// `X_i = dis(B(h, μ2^i)) ∖ dis(B(h, μ2^(i−1)))` for `i = 1..=L`,
/// `L = ⌈log₂(1/μ)⌉`.
#[derive(Clone, Debug)]
pub struct AnnulusPlan {
    regions: Vec<Bits>,
    pool_size: usize,
}

impl AnnulusPlan {
    pub fn new(class: &FiniteClass, pivot: usize, mu: f64) -> Result<Self> {
        class.check_index(pivot)?;
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(invalid("mu", format!("must lie in (0, 1], got {mu}")));
        }
        let levels = (1.0 / mu).log2().ceil().max(0.0) as u32;
        let mut regions = Vec::with_capacity(levels as usize + 1);
        let mut covered = Bits::zeros(class.pool_size());
        for i in 0..=levels {
            let r = mu * f64::from(2u32.pow(i));
            let dis = class.disagreement_region(&class.ball(pivot, r)?);
            regions.push(dis.difference(&covered));
            covered = dis;
        }
        Ok(Self {
            regions,
            pool_size: class.pool_size(),
        })
    }

    pub fn levels(&self) -> usize {
        self.regions.len() - 1
    }

    pub fn regions(&self) -> &[Bits] {
        &self.regions
    }

    /// `η_i`, the measure of `X_i`.
    pub fn eta(&self, i: usize) -> f64 {
        self.regions[i].count_ones() as f64 / self.pool_size as f64
    }

    pub fn union(&self) -> Bits {
        let mut all = Bits::zeros(self.pool_size);
        for r in &self.regions {
            all.or_assign(r);
        }
        all
    }

    /// Labels one build would request: `Σ_i min(m, |X_i|)` (an upper bound
    /// on distinct instances when draws repeat).
    pub fn planned_queries(&self, m: usize) -> usize {
        self.regions.iter().map(|r| r.count_ones().min(m)).sum()
    }
}

/// Builds annulus-sampling regret estimators over a finite class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenericBuilder {
    pub m: usize,
    pub mu: f64,
}

impl GenericBuilder {
    pub fn new(m: usize, mu: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "must be positive"));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(invalid("mu", format!("must lie in (0, 1], got {mu}")));
        }
        Ok(Self { m, mu })
    }

    /// `m` draws from each non-empty annulus with weight `η_i/m`, or the whole
    /// annulus with weight `1/|pool|` when it has at most `m` instances.
    pub fn plan(
        &self,
        annuli: &AnnulusPlan,
        seed: u64,
    ) -> Vec<PlannedSample<usize>> {
        let m = self.m as u64;
        let per = par::map_slice(
            &annuli.regions.iter().enumerate().collect::<Vec<_>>(),
            |&(i, region)| {
                let members: Vec<usize> = region.ones_iter().collect();
                if members.is_empty() {
                    return Vec::new();
                }
                if members.len() <= self.m {
                    return members
                        .into_iter()
                        .map(|key| PlannedSample { key, weight: m })
                        .collect();
                }
                let mut rng = rng::stream(seed, &[rng::TAG_ANNULUS, i as u64]);
                (0..self.m)
                    .map(|_| PlannedSample {
                        key: members[rng.random_range(0..members.len())],
                        weight: members.len() as u64,
                    })
                    .collect()
            },
        );
        per.into_iter().flatten().collect()
    }

    pub fn build(
        &self,
        class: &FiniteClass,
        pivot: usize,
        oracle: &InstanceOracle,
        seed: u64,
    ) -> Result<RegretEstimator<usize>> {
        if oracle.size() != class.pool_size() {
            return Err(Error::PoolMismatch {
                left: class.pool_size(),
                right: oracle.size(),
            });
        }
        self.build_with(class, pivot, seed, |x| oracle.query(x))
    }

    /// Same as [`GenericBuilder::build`], labeling instances through `label`.
    pub fn build_with(
        &self,
        class: &FiniteClass,
        pivot: usize,
        seed: u64,
        label: impl FnMut(usize) -> Result<bool>,
    ) -> Result<RegretEstimator<usize>> {
        let annuli = AnnulusPlan::new(class, pivot, self.mu)?;
        let plan = self.plan(&annuli, seed);
        RegretEstimator::label_plan(
            self.m as u64,
            class.pool_size() as u64,
            &plan,
            class.hypothesis(pivot),
            label,
        )
    }
}

/// Index of the class member minimizing the estimator; ties to the lowest
/// index.
pub fn erm_class(est: &RegretEstimator<usize>, class: &FiniteClass) -> usize {
    let values = par::map_slice(class.hypotheses(), |h| est.numerator(h));
    values
        .iter()
        .enumerate()
        .min_by_key(|&(i, v)| (*v, i))
        .map(|(i, _)| i)
        .expect("class is non-empty")
}

/// Largest violation `|f(h') − reg(h')| − ε(dist(h, h') + μ)` over the class;
/// the estimator is an (ε, μ)-SRRA exactly when this is `<= 0`.
pub fn srra_slack(
    est: &RegretEstimator<usize>,
    class: &FiniteClass,
    pivot: usize,
    labels: &Bits,
    epsilon: f64,
    mu: f64,
) -> f64 {
    let pool = class.pool_size() as f64;
    let pivot_err = class.hypothesis(pivot).xor_count(labels) as i64;
    class
        .hypotheses()
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let reg = (h.xor_count(labels) as i64 - pivot_err) as f64 / pool;
            (est.evaluate(h) - reg).abs() - epsilon * (class.distance(pivot, j) + mu)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
