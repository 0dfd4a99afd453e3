//! Label oracles: frozen ground-truth labels with noise, query accounting,
//! label budgets and on-disk persistence.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::clustering::Clustering;
use crate::error::{invalid, Error, Result};
use crate::pool::{PairHypothesis, Pool};
use crate::ranking::Permutation;
use crate::rng;

/// How labels relate under swapping the pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairTask {
    /// Preferences: `Y(u,v) = 1 - Y(v,u)`.
    Ranking,
    /// Same-cluster constraints: `Y(u,v) = Y(v,u)`.
    Clustering,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    UniformFlip { eta: f64 },
    DistanceDecay { rho: f64, scale: f64 },
    AdversarialFile { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            seed: 0,
        }
    }

    pub fn uniform(eta: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::UniformFlip { eta },
            seed,
        }
    }

    pub fn distance_decay(rho: f64, scale: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::DistanceDecay { rho, scale },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            NoiseKind::None | NoiseKind::AdversarialFile { .. } => Ok(()),
            NoiseKind::UniformFlip { eta } => {
                if !(0.0..0.5).contains(eta) {
                    return Err(invalid("eta", format!("must lie in [0, 1/2), got {eta}")));
                }
                Ok(())
            }
            NoiseKind::DistanceDecay { rho, scale } => {
                if !(*rho > 0.0) {
                    return Err(invalid("rho", format!("must be positive, got {rho}")));
                }
                if !(*scale >= 0.0) {
                    return Err(invalid("scale", format!("must be non-negative, got {scale}")));
                }
                Ok(())
            }
        }
    }

    /// Frozen flip decision for the unordered pair `{a, b}`, `a < b`, whose
    /// ground-truth rank gap is `gap`.
    fn flips(&self, a: usize, b: usize, gap: usize) -> bool {
        let prob = match self.kind {
            NoiseKind::None | NoiseKind::AdversarialFile { .. } => return false,
            NoiseKind::UniformFlip { eta } => eta,
            NoiseKind::DistanceDecay { rho, scale } => {
                (scale * (gap as f64).powf(-rho)).min(1.0)
            }
        };
        let h = rng::derive(self.seed, &[rng::TAG_NOISE, a as u64, b as u64]);
        rng::unit_interval(h) < prob
    }
}

/// The complete label function over the pairs of a pool, one bit per
/// unordered pair holding `Y(min, max)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTable {
    pool: Pool,
    task: PairTask,
    bits: Bits,
}

impl LabelTable {
    pub fn from_fn(pool: Pool, task: PairTask, f: impl Fn(usize, usize) -> bool) -> Self {
        let n = pool.n();
        let mut bits = Bits::zeros(pool.unordered_count());
        for a in 0..n {
            for b in a + 1..n {
                if f(a, b) {
                    bits.set(pool.unordered_index(a, b), true);
                }
            }
        }
        Self { pool, task, bits }
    }

    pub fn pool(&self) -> Pool {
        self.pool
    }

    pub fn task(&self) -> PairTask {
        self.task
    }

    /// `Y(u, v)`.
    #[inline]
    pub fn label(&self, u: usize, v: usize) -> bool {
        let stored = self.bits.get(self.pool.unordered_index(u, v));
        match self.task {
            PairTask::Ranking if u > v => !stored,
            _ => stored,
        }
    }

    /// Fraction of ordered pairs where `h` disagrees with the table.
    pub fn error_of<H: PairHypothesis>(&self, h: &H) -> f64 {
        let wrong = self
            .pool
            .ordered_pairs()
            .filter(|&(u, v)| h.relates(u, v) != self.label(u, v))
            .count();
        wrong as f64 / self.pool.pair_count() as f64
    }

    /// Reads `u,v,label` rows. Every unordered pair must be covered; rows
    /// given in both orientations must respect the task's symmetry.
    pub fn read_csv(path: &Path, pool: Pool, task: PairTask) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut stored: Vec<Option<bool>> = vec![None; pool.unordered_count()];
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if line == 0 && record.get(0) == Some("u") {
                continue;
            }
            if record.len() != 3 {
                return Err(Error::LabelTable(format!(
                    "row {}: expected `u,v,label`, got {} fields",
                    line + 1,
                    record.len()
                )));
            }
            let parse = |i: usize| -> Result<usize> {
                record[i].parse::<usize>().map_err(|e| {
                    Error::LabelTable(format!("row {}: field {}: {e}", line + 1, i + 1))
                })
            };
            let (u, v, label) = (parse(0)?, parse(1)?, parse(2)?);
            pool.check_pair(u, v)?;
            if label > 1 {
                return Err(Error::LabelTable(format!(
                    "row {}: label must be 0 or 1, got {label}",
                    line + 1
                )));
            }
            let mut canonical = label == 1;
            if task == PairTask::Ranking && u > v {
                canonical = !canonical;
            }
            let slot = &mut stored[pool.unordered_index(u, v)];
            match *slot {
                Some(existing) if existing != canonical => {
                    let rule = match task {
                        PairTask::Ranking => "skew-symmetry",
                        PairTask::Clustering => "symmetry",
                    };
                    return Err(Error::LabelTable(format!("pair ({u}, {v}) violates {rule}")));
                }
                _ => *slot = Some(canonical),
            }
        }
        let n = pool.n();
        for a in 0..n {
            for b in a + 1..n {
                if stored[pool.unordered_index(a, b)].is_none() {
                    return Err(Error::LabelTable(format!("pair ({a}, {b}) has no label")));
                }
            }
        }
        Ok(Self::from_fn(pool, task, |a, b| {
            stored[pool.unordered_index(a, b)].unwrap_or(false)
        }))
    }

    /// Writes one `u,v,label` row per unordered pair, `u < v`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["u", "v", "label"])?;
        let n = self.pool.n();
        for a in 0..n {
            for b in a + 1..n {
                w.write_record([
                    a.to_string(),
                    b.to_string(),
                    u8::from(self.label(a, b)).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Query counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Distinct instances ever labeled; repeat queries are free.
    pub distinct_labeled: u64,
    /// Every successful query call.
    pub raw_calls: u64,
    /// Labels read by verification routines outside the active-learning loop.
    pub verification_reads: u64,
}

/// Cache bookkeeping shared by the pair and instance oracles.
#[derive(Debug)]
struct QueryLedger {
    seen: Vec<AtomicU64>,
    distinct: AtomicU64,
    raw: AtomicU64,
    verification: AtomicU64,
    budget: Option<u64>,
}

impl QueryLedger {
    fn new(slots: usize, budget: Option<u64>) -> Self {
        Self {
            seen: (0..slots.div_ceil(64)).map(|_| AtomicU64::new(0)).collect(),
            distinct: AtomicU64::new(0),
            raw: AtomicU64::new(0),
            verification: AtomicU64::new(0),
            budget,
        }
    }

    fn touch(&self, slot: usize) -> Result<()> {
        let word = &self.seen[slot / 64];
        let mask = 1u64 << (slot % 64);
        if word.load(Ordering::Acquire) & mask == 0 {
            // Reserve a unit of budget before publishing the bit.
            let reserved = self
                .distinct
                .fetch_update(Ordering::AcqRel, Ordering::Acquire, |d| match self.budget {
                    Some(b) if d >= b => None,
                    _ => Some(d + 1),
                });
            if let Err(labeled) = reserved {
                return Err(Error::BudgetExhausted {
                    budget: self.budget.unwrap_or(0),
                    labeled,
                });
            }
            if word.fetch_or(mask, Ordering::AcqRel) & mask != 0 {
                // Another thread labeled it first.
                self.distinct.fetch_sub(1, Ordering::AcqRel);
            }
        }
        self.raw.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    fn counters(&self) -> Counters {
        Counters {
            distinct_labeled: self.distinct.load(Ordering::Acquire),
            raw_calls: self.raw.load(Ordering::Acquire),
            verification_reads: self.verification.load(Ordering::Acquire),
        }
    }

    fn charge_verification(&self, reads: u64) -> Result<()> {
        if self.budget.is_some() {
            return Err(Error::BudgetedVerification);
        }
        self.verification.fetch_add(reads, Ordering::Relaxed);
        Ok(())
    }
}

/// Ground truth an oracle was generated from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    /// Items listed best first.
    Ranking { order: Vec<usize> },
    /// Cluster id of each item.
    Clustering { assign: Vec<usize> },
}

/// Everything needed to regenerate an oracle, persisted next to its label CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSidecar {
    pub task: PairTask,
    pub n: usize,
    pub ground_truth: GroundTruth,
    pub noise: NoiseSpec,
    /// Error of the ground truth against the frozen labels.
    pub measured_noise: f64,
}

/// A pairwise label oracle with a query cache.
#[derive(Debug)]
pub struct LabelOracle {
    table: LabelTable,
    ground_truth: GroundTruth,
    noise: NoiseSpec,
    ledger: QueryLedger,
}

impl LabelOracle {
    /// `Y(u,v) = 1[u ≺ v] XOR flip(u,v)`, flips frozen per unordered pair.
    pub fn ranking(truth: &Permutation, noise: &NoiseSpec) -> Result<Self> {
        noise.validate()?;
        let pool = truth.pool();
        let table = match &noise.kind {
            NoiseKind::AdversarialFile { path } => {
                LabelTable::read_csv(Path::new(path), pool, PairTask::Ranking)?
            }
            _ => LabelTable::from_fn(pool, PairTask::Ranking, |a, b| {
                let gap = truth.rank(a).abs_diff(truth.rank(b));
                truth.relates(a, b) ^ noise.flips(a, b, gap)
            }),
        };
        Ok(Self::from_parts(
            table,
            GroundTruth::Ranking {
                order: truth.order().to_vec(),
            },
            noise.clone(),
        ))
    }

    /// `Y(u,v) = 1[same cluster] XOR flip(u,v)`.
    pub fn clustering(truth: &Clustering, noise: &NoiseSpec) -> Result<Self> {
        noise.validate()?;
        let pool = truth.pool();
        let table = match &noise.kind {
            NoiseKind::AdversarialFile { path } => {
                LabelTable::read_csv(Path::new(path), pool, PairTask::Clustering)?
            }
            NoiseKind::DistanceDecay { .. } => {
                return Err(invalid(
                    "noise",
                    "distance_decay needs a rank gap and only applies to ranking oracles",
                ))
            }
            _ => LabelTable::from_fn(pool, PairTask::Clustering, |a, b| {
                truth.relates(a, b) ^ noise.flips(a, b, 0)
            }),
        };
        Ok(Self::from_parts(
            table,
            GroundTruth::Clustering {
                assign: truth.assignment().to_vec(),
            },
            noise.clone(),
        ))
    }

    fn from_parts(table: LabelTable, ground_truth: GroundTruth, noise: NoiseSpec) -> Self {
        let slots = table.pool().unordered_count();
        Self {
            table,
            ground_truth,
            noise,
            ledger: QueryLedger::new(slots, None),
        }
    }

    /// Caps the number of distinct pairs that may be labeled. Resets counters.
    pub fn with_budget(self, budget: u64) -> Self {
        let slots = self.table.pool().unordered_count();
        Self {
            ledger: QueryLedger::new(slots, Some(budget)),
            ..self
        }
    }

    /// Fresh copy with zeroed counters and the same budget.
    pub fn fresh(&self) -> Self {
        let slots = self.table.pool().unordered_count();
        Self {
            table: self.table.clone(),
            ground_truth: self.ground_truth.clone(),
            noise: self.noise.clone(),
            ledger: QueryLedger::new(slots, self.ledger.budget),
        }
    }

    pub fn pool(&self) -> Pool {
        self.table.pool()
    }

    pub fn task(&self) -> PairTask {
        self.table.task()
    }

    pub fn budget(&self) -> Option<u64> {
        self.ledger.budget
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.ground_truth
    }

    /// Active query for `Y(u, v)`.
    pub fn query(&self, u: usize, v: usize) -> Result<bool> {
        let pool = self.table.pool();
        pool.check_pair(u, v)?;
        self.ledger.touch(pool.unordered_index(u, v))?;
        Ok(self.table.label(u, v))
    }

    pub fn counters(&self) -> Counters {
        self.ledger.counters()
    }

    /// Unrestricted access to every label for verification, charging all
    /// `N` ordered pairs to the verification counter. Refused when budgeted.
    pub fn reveal_all(&self) -> Result<&LabelTable> {
        self.ledger.charge_verification(self.pool().pair_count())?;
        Ok(&self.table)
    }

    /// Error of the ground truth the oracle was built from.
    pub fn measured_noise(&self) -> f64 {
        let pool = self.pool();
        match &self.ground_truth {
            GroundTruth::Ranking { order } => match Permutation::from_order(order.clone()) {
                Ok(p) => self.table.error_of(&p),
                Err(_) => f64::NAN,
            },
            GroundTruth::Clustering { assign } => {
                let k = assign.iter().max().map_or(1, |m| m + 1);
                match Clustering::new(assign.clone(), k) {
                    Ok(c) if c.pool() == pool => self.table.error_of(&c),
                    _ => f64::NAN,
                }
            }
        }
    }

    pub fn sidecar(&self) -> OracleSidecar {
        OracleSidecar {
            task: self.task(),
            n: self.pool().n(),
            ground_truth: self.ground_truth.clone(),
            noise: self.noise.clone(),
            measured_noise: self.measured_noise(),
        }
    }

    /// Writes the label CSV and its JSON sidecar.
    pub fn save(&self, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
        self.table.write_csv(csv_path)?;
        let w = BufWriter::new(File::create(sidecar_path)?);
        serde_json::to_writer_pretty(w, &self.sidecar())?;
        Ok(())
    }

    /// Loads a persisted oracle; labels come from the CSV, provenance from the
    /// sidecar.
    pub fn load(csv_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let sidecar: OracleSidecar =
            serde_json::from_reader(BufReader::new(File::open(sidecar_path)?))?;
        let pool = Pool::new(sidecar.n)?;
        let table = LabelTable::read_csv(csv_path, pool, sidecar.task)?;
        Ok(Self::from_parts(table, sidecar.ground_truth, sidecar.noise))
    }
}

/// Label oracle over a finite pool of single instances `0..size`.
#[derive(Debug)]
pub struct InstanceOracle {
    labels: Bits,
    ledger: QueryLedger,
}

impl InstanceOracle {
    pub fn new(labels: Bits) -> Self {
        let slots = labels.len();
        Self {
            labels,
            ledger: QueryLedger::new(slots, None),
        }
    }

    /// Labels of `truth` with each instance flipped independently with
    /// probability `eta`, frozen by `seed`.
    pub fn with_uniform_noise(truth: &Bits, eta: f64, seed: u64) -> Result<Self> {
        NoiseSpec::uniform(eta, seed).validate()?;
        let labels = Bits::from_fn(truth.len(), |x| {
            let h = rng::derive(seed, &[rng::TAG_NOISE, x as u64]);
            truth.get(x) ^ (rng::unit_interval(h) < eta)
        });
        Ok(Self::new(labels))
    }

    pub fn with_budget(self, budget: u64) -> Self {
        let slots = self.labels.len();
        Self {
            labels: self.labels,
            ledger: QueryLedger::new(slots, Some(budget)),
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn query(&self, x: usize) -> Result<bool> {
        if x >= self.labels.len() {
            return Err(Error::ItemOutOfPool {
                item: x,
                n: self.labels.len(),
            });
        }
        self.ledger.touch(x)?;
        Ok(self.labels.get(x))
    }

    pub fn counters(&self) -> Counters {
        self.ledger.counters()
    }

    pub fn reveal_all(&self) -> Result<&Bits> {
        self.ledger.charge_verification(self.labels.len() as u64)?;
        Ok(&self.labels)
    }
}
