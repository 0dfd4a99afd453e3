//! Rankings induced by linear scoring of feature vectors, with exact
//! enumeration of every induced order in the plane.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::estimator::PairEstimator;
use crate::generic::FiniteClass;
use crate::par;
use crate::pool::PairHypothesis;
use crate::ranking::Permutation;
use crate::rng;

const JITTER: f64 = 1e-9;
/// Relative tolerance below which two critical angles count as coincident.
const ANGLE_TOL: f64 = 1e-12;

/// One feature vector per item.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    d: usize,
    coords: Vec<f64>,
}

impl FeatureSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = vectors.len();
        if n < 2 {
            return Err(invalid("features", format!("need at least 2 items, got {n}")));
        }
        let d = vectors[0].len();
        if d == 0 {
            return Err(invalid("features", "dimension must be at least 1"));
        }
        let mut coords = Vec::with_capacity(n * d);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != d {
                return Err(invalid(
                    "features",
                    format!("item {i} has dimension {}, expected {d}", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(invalid("features", format!("item {i} has a non-finite coordinate")));
            }
            coords.extend_from_slice(v);
        }
        let set = Self { d, coords };
        for u in 0..n {
            for v in u + 1..n {
                if set.vector(u) == set.vector(v) {
                    return Err(Error::Degenerate(format!("items {u} and {v} share a feature vector")));
                }
            }
        }
        Ok(set)
    }

    /// Coordinates drawn uniformly from `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect(),
        )
    }

    /// Adds a deterministic perturbation of magnitude at most `1e-9` to every
    /// coordinate to break ties.
    pub fn jittered(&self, seed: u64) -> Result<Self> {
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let h = rng::derive(seed, &[rng::TAG_JITTER, i as u64]);
                x + JITTER * (2.0 * rng::unit_interval(h) - 1.0)
            })
            .collect::<Vec<_>>();
        Self::new(coords.chunks(self.d).map(<[f64]>::to_vec).collect())
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn vector(&self, item: usize) -> &[f64] {
        &self.coords[item * self.d..(item + 1) * self.d]
    }

    fn score(&self, w: &[f64], item: usize) -> f64 {
        dot(w, self.vector(item))
    }

    /// `⟨w, u − v⟩`.
    pub fn margin(&self, w: &[f64], u: usize, v: usize) -> f64 {
        self.vector(u)
            .iter()
            .zip(self.vector(v))
            .zip(w)
            .map(|((a, b), c)| (a - b) * c)
            .sum()
    }

    /// Reads `item,x1,…,xd` rows; items must be exactly `0..n`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows: Vec<Option<Vec<f64>>> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let mut fields = record.iter();
            let item: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {}: bad item id", line + 1)))?;
            let coords = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {}: `{f}` is not a number", line + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            if item >= rows.len() {
                rows.resize(item + 1, None);
            }
            if rows[item].replace(coords).is_some() {
                return Err(Error::Parse(format!("item {item} listed twice")));
            }
        }
        let vectors = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::Parse(format!("item {i} missing"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vectors)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["item".to_string()];
        header.extend((1..=self.d).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for item in 0..self.n() {
            let mut row = vec![item.to_string()];
            row.extend(self.vector(item).iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The order with `u` before `v` iff `⟨w, u − v⟩ > 0`.
pub fn induced_permutation(w: &[f64], features: &FeatureSet) -> Result<Permutation> {
    if w.len() != features.d() {
        return Err(invalid(
            "w",
            format!("dimension {} does not match features ({})", w.len(), features.d()),
        ));
    }
    let n = features.n();
    let scores: Vec<f64> = (0..n).map(|i| features.score(w, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    for win in order.windows(2) {
        if features.margin(w, win[0], win[1]) <= 0.0 {
            return Err(Error::Degenerate(format!(
                "direction is orthogonal to the difference of items {} and {}",
                win[0], win[1]
            )));
        }
    }
    Permutation::from_order(order)
}

/// An order realized by the open cell containing `witness_angle`.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedOrder {
    pub perm: Permutation,
    pub witness_angle: f64,
}

impl InducedOrder {
    pub fn witness(&self) -> [f64; 2] {
        [self.witness_angle.cos(), self.witness_angle.sin()]
    }
}

/// All orders induced by directions in the plane, sorted by witness angle.
pub fn enumerate_orders_2d(features: &FeatureSet) -> Result<Vec<InducedOrder>> {
    if features.d() != 2 {
        return Err(invalid("features", format!("exact enumeration needs d = 2, got {}", features.d())));
    }
    let n = features.n();
    // Each unordered pair's sign flips where w is orthogonal to u − v.
    let mut crossings: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1));
    for u in 0..n {
        for v in u + 1..n {
            let (a, b) = (features.vector(u), features.vector(v));
            let phi = (a[1] - b[1]).atan2(a[0] - b[0]);
            crossings.push(((phi + PI / 2.0).rem_euclid(TAU), u, v));
            crossings.push(((phi - PI / 2.0).rem_euclid(TAU), u, v));
        }
    }
    crossings.sort_by(|x, y| x.0.total_cmp(&y.0));
    let m = crossings.len();
    for j in 0..m {
        let (t0, u0, v0) = crossings[j];
        let (t1, u1, v1) = crossings[(j + 1) % m];
        let gap = if j + 1 == m { t1 + TAU - t0 } else { t1 - t0 };
        if gap <= ANGLE_TOL {
            return Err(Error::Degenerate(format!(
                "pairs ({u0},{v0}) and ({u1},{v1}) have coincident hyperplanes"
            )));
        }
    }
    let witness_of = |j: usize| {
        let t0 = crossings[j].0;
        let t1 = if j + 1 == m { crossings[0].0 + TAU } else { crossings[j + 1].0 };
        (0.5 * (t0 + t1)).rem_euclid(TAU)
    };
    let w0 = witness_of(0);
    let start = induced_permutation(&[w0.cos(), w0.sin()], features)?;
    let mut order = start.order().to_vec();
    let mut pos = start.ranks().to_vec();
    let mut out = Vec::with_capacity(m);
    out.push(InducedOrder { perm: start, witness_angle: w0 });
    for j in 1..m {
        let (_, u, v) = crossings[j];
        let (pu, pv) = (pos[u], pos[v]);
        if pu.abs_diff(pv) != 1 {
            return Err(Error::Degenerate(format!(
                "pair ({u},{v}) is not adjacent when its hyperplane is crossed"
            )));
        }
        order.swap(pu, pv);
        pos.swap(u, v);
        out.push(InducedOrder {
            perm: Permutation::from_order(order.clone())?,
            witness_angle: witness_of(j),
        });
    }
    out.sort_by(|a, b| a.witness_angle.total_cmp(&b.witness_angle));
    let mut seen: Vec<&[usize]> = out.iter().map(|o| o.perm.order()).collect();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Degenerate("an order is realized by two cells".into()));
    }
    Ok(out)
}

/// Disagreement measure of a ball around the pivot at one radius.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RadiusCheck {
    pub r: f64,
    pub ball_size: usize,
    pub measure: f64,
    /// `measure / r`, zero at `r = 0`.
    pub ratio: f64,
    /// `8·r·n`.
    pub bound: f64,
    pub holds: bool,
}

/// Checks `P[dis(B(π, r))] ≤ 8rn` within the enumerated planar class.
pub fn verify_disagreement_bound(
    features: &FeatureSet,
    pivot: &Permutation,
    radii: &[f64],
) -> Result<Vec<RadiusCheck>> {
    let orders = enumerate_orders_2d(features)?;
    let perms: Vec<Permutation> = orders.into_iter().map(|o| o.perm).collect();
    let center = perms.iter().position(|p| p == pivot).ok_or(Error::NotInClass)?;
    let class = FiniteClass::from_pair_hypotheses(&perms)?;
    let n = features.n() as f64;
    radii
        .iter()
        .map(|&r| {
            let ball = class.ball(center, r)?;
            let measure = class.measure(&class.disagreement_region(&ball));
            let bound = 8.0 * r * n;
            Ok(RadiusCheck {
                r,
                ball_size: ball.len(),
                measure,
                ratio: if r > 0.0 { measure / r } else { 0.0 },
                bound,
                holds: measure <= bound + 1e-12,
            })
        })
        .collect()
}

/// Index of the minimizer of `est` among `orders`, ties to the first.
pub fn best_order(est: &PairEstimator, orders: &[InducedOrder]) -> Result<usize> {
    let Some(first) = orders.first() else {
        return Err(Error::Minimizer("empty candidate list".into()));
    };
    est.pool().check_same(&first.perm.pool())?;
    let values = par::map_slice(orders, |o| est.numerator(&o.perm));
    Ok(values
        .iter()
        .enumerate()
        .min_by_key(|&(i, v)| (*v, i))
        .map(|(i, _)| i)
        .expect("non-empty"))
}

/// Exact minimizer of `est` over the planar induced orders; ties go to the
/// smallest witness angle.
pub fn geometric_erm_2d(est: &PairEstimator, features: &FeatureSet) -> Result<InducedOrder> {
    let orders = enumerate_orders_2d(features)?;
    let i = best_order(est, &orders)?;
    Ok(orders.into_iter().nth(i).expect("index from the same list"))
}

/// Heuristic minimizer for any dimension: the best order among `count`
/// random directions.
pub fn erm_sampled_directions(
    est: &PairEstimator,
    features: &FeatureSet,
    count: usize,
    seed: u64,
) -> Result<Permutation> {
    if count == 0 {
        return Err(invalid("count", "need at least one direction"));
    }
    let d = features.d();
    let candidates = par::map_range(count, |i| {
        let mut rng = rng::stream(seed, &[rng::TAG_DIRECTION, i as u64]);
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        induced_permutation(&w, features)
            .ok()
            .map(|p| (est.numerator(&p), i, p))
    });
    candidates
        .into_iter()
        .flatten()
        .min_by_key(|(v, i, _)| (*v, *i))
        .map(|(_, _, p)| p)
        .ok_or_else(|| Error::Minimizer("every sampled direction was degenerate".into()))
}
