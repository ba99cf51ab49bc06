//! Shared numeric and dataset types.
//!
//! Class indices are 0-based everywhere; ranks are 1-based (rank 1 is the
//! most probable class).

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on `Σ p_k = 1` accepted by [`ProbVector::new`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Raw classifier output `z(x)`, one finite log-odds value per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "logit {} is not finite ({})",
                i, values[i]
            )));
        }
        Ok(LogitVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    /// Index of the largest logit (lowest index on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Unchecked constructor for values known to be finite by construction.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        LogitVector(values)
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if values.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(ProbVector(values))
    }

    /// The uniform distribution over `k` classes.
    pub fn uniform(k: usize) -> Self {
        ProbVector(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// Class indices ordered by descending probability, ties by ascending index.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        // sort_by is stable, so equal probabilities keep ascending index order
        order.sort_by(|&a, &b| self.0[b].partial_cmp(&self.0[a]).unwrap_or(Ordering::Equal));
        order
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Max-subtracted softmax of a slice of finite reals.
pub(crate) fn softmax_slice(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Softmax of a logit vector.
///
/// Computed after subtracting the maximum logit, so it never overflows and
/// is invariant to constant shifts of `z` up to rounding.
pub fn softmax(z: &LogitVector) -> ProbVector {
    ProbVector(softmax_slice(z.as_slice()))
}

/// 1-based rank of class `y` in `p` under a stable descending sort.
///
/// Ties go to the lower class index: with `p = (0.4, 0.4, 0.2)` class 0 has
/// rank 1 and class 1 has rank 2.
pub fn rank_of_label(p: &ProbVector, y: usize) -> usize {
    let v = p.as_slice();
    let py = v[y];
    let ahead = v
        .iter()
        .enumerate()
        .filter(|&(j, &pj)| pj > py || (pj == py && j < y))
        .count();
    ahead + 1
}

/// One calibration unit: logits, true label and the example's uniform randomizer.
///
/// `u` is drawn once per example and shared by every candidate label, every
/// temperature and every miscoverage level evaluated on that example.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub logits: LogitVector,
    pub label: usize,
    pub u: f64,
}

/// Alias used where an example is consumed by a conformity score.
pub type ScoredExample = LabeledExample;

impl LabeledExample {
    pub fn new(logits: LogitVector, label: usize, u: f64) -> Result<Self> {
        if label >= logits.num_classes() {
            return Err(Error::InvalidInput(format!(
                "label {label} out of range for {} classes",
                logits.num_classes()
            )));
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidInput(format!("u = {u} outside [0, 1]")));
        }
        Ok(LabeledExample { logits, label, u })
    }

    pub fn num_classes(&self) -> usize {
        self.logits.num_classes()
    }
}

/// Disjoint train / score-calibration / temperature-validation index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreeWaySplit {
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    pub i3: Vec<usize>,
}

impl ThreeWaySplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.i1.len(), self.i2.len(), self.i3.len())
    }
}

/// Randomly partitions `0..n` into parts of sizes `⌊n·f_j⌋`, the last part
/// taking the remainder. Parts are returned sorted. Parts may be empty.
pub fn random_partition(n: usize, fractions: &[f64], rng: &RandomSource) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() || fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::Config(format!("invalid split fractions {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} sum to {total}, not 1"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng.rng());

    let mut parts = Vec::with_capacity(fractions.len());
    let mut start = 0;
    for (j, f) in fractions.iter().enumerate() {
        let end = if j + 1 == fractions.len() {
            n
        } else {
            // small slack so that e.g. 10 * 0.3 floors to 3
            (start + (n as f64 * f + 1e-9).floor() as usize).min(n)
        };
        let mut part = idx[start..end].to_vec();
        part.sort_unstable();
        parts.push(part);
        start = end;
    }
    Ok(parts)
}

/// Uniformly random three-way split of `0..n` with sizes
/// `(⌊n·f1⌋, ⌊n·f2⌋, remainder)`; every part must be nonempty.
pub fn three_way_split(n: usize, fractions: (f64, f64, f64), rng: &RandomSource) -> Result<ThreeWaySplit> {
    let fr = [fractions.0, fractions.1, fractions.2];
    let mut parts = random_partition(n, &fr, rng)?;
    if n < 3 || parts.iter().any(Vec::is_empty) {
        return Err(Error::Split {
            n,
            parts: 3,
            fractions: fr.to_vec(),
        });
    }
    let i3 = parts.pop().unwrap_or_default();
    let i2 = parts.pop().unwrap_or_default();
    let i1 = parts.pop().unwrap_or_default();
    Ok(ThreeWaySplit { i1, i2, i3 })
}

/// A conformal prediction set: sorted, duplicate-free class indices. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredictionSet {
    members: Vec<usize>,
}

impl PredictionSet {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        PredictionSet { members }
    }

    pub fn full(k: usize) -> Self {
        PredictionSet {
            members: (0..k).collect(),
        }
    }

    pub fn contains(&self, class: usize) -> bool {
        self.members.binary_search(&class).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn is_subset(&self, other: &PredictionSet) -> bool {
        self.members.iter().all(|c| other.contains(*c))
    }
}

/// Purpose tags for [`RandomSource::derive`].
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const RANDOMIZER: u64 = 2;
    pub const DATA: u64 = 3;
    pub const TRIAL: u64 = 4;
}

/// Seeded, splittable randomness.
///
/// A source is a `(seed, stream)` pair; each call to [`RandomSource::rng`]
/// restarts the same ChaCha8 sequence. Independent sub-streams are obtained
/// with [`RandomSource::derive`] rather than by sharing a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        RandomSource { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Sub-source for `(purpose, index)`, e.g. `(stream::SPLIT, trial)`.
    pub fn derive(&self, purpose: u64, index: u64) -> RandomSource {
        let mixed = splitmix64(splitmix64(self.stream ^ splitmix64(purpose)) ^ index);
        RandomSource {
            seed: self.seed,
            stream: mixed,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
