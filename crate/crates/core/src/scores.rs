//! Baseline conformity scores.
//!
//! Every score maps `(p, y, u)` to a real number where lower means "more
//! conforming"; a label enters the prediction set when its score is at most
//! the calibrated threshold. Ranks are 1-based and ties are broken towards the
//! lower class index (see [`ProbVector::descending_order`]).

use std::fmt;

use crate::error::{Error, Result};
use crate::types::{rank_of_label, ProbVector};

/// Default RAPS penalty.
pub const RAPS_DEFAULT_LAMBDA: f64 = 0.01;
/// Default RAPS rank threshold.
pub const RAPS_DEFAULT_K_REG: usize = 1;
/// Default SAPS rank penalty.
pub const SAPS_DEFAULT_LAMBDA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreKind {
    /// `1 - p_y`.
    Thr,
    /// Cumulative sorted probability mass, randomized at the label's rank.
    Aps,
    /// APS plus `lambda` for every head position beyond `k_reg`.
    Raps { lambda: f64, k_reg: usize },
    /// Top probability plus a constant `lambda` per extra rank.
    Saps { lambda: f64 },
    /// `rank(y) / K`.
    Rank,
}

/// A conformity score together with its randomization mode.
///
/// With `randomized = false` the per-example uniform is replaced by 1, which
/// gives the deterministic, conservative form of APS/RAPS/SAPS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSpec {
    pub kind: ScoreKind,
    pub randomized: bool,
}

impl ScoreSpec {
    pub const fn new(kind: ScoreKind) -> Self {
        ScoreSpec {
            kind,
            randomized: true,
        }
    }

    pub const fn thr() -> Self {
        Self::new(ScoreKind::Thr)
    }

    pub const fn aps() -> Self {
        Self::new(ScoreKind::Aps)
    }

    pub const fn raps(lambda: f64, k_reg: usize) -> Self {
        Self::new(ScoreKind::Raps { lambda, k_reg })
    }

    pub const fn saps(lambda: f64) -> Self {
        Self::new(ScoreKind::Saps { lambda })
    }

    pub const fn rank() -> Self {
        Self::new(ScoreKind::Rank)
    }

    pub fn deterministic(mut self) -> Self {
        self.randomized = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ScoreKind::Raps { lambda, .. } if !(lambda.is_finite() && lambda >= 0.0) => {
                Err(Error::Config(format!("RAPS lambda must be >= 0, got {lambda}")))
            }
            ScoreKind::Saps { lambda } if !(lambda.is_finite() && lambda > 0.0) => {
                Err(Error::Config(format!("SAPS lambda must be > 0, got {lambda}")))
            }
            _ => Ok(()),
        }
    }

    /// Short lowercase name used in reports (`thr`, `aps`, `raps`, `saps`, `rank`).
    pub fn name(&self) -> &'static str {
        match self.kind {
            ScoreKind::Thr => "thr",
            ScoreKind::Aps => "aps",
            ScoreKind::Raps { .. } => "raps",
            ScoreKind::Saps { .. } => "saps",
            ScoreKind::Rank => "rank",
        }
    }

    fn effective_u(&self, u: f64) -> f64 {
        if self.randomized {
            u
        } else {
            1.0
        }
    }

    /// Score of label `y`.
    pub fn score(&self, p: &ProbVector, y: usize, u: f64) -> f64 {
        let u = self.effective_u(u);
        match self.kind {
            ScoreKind::Thr => thr_score(p, y),
            ScoreKind::Aps => aps_score(p, y, u),
            ScoreKind::Raps { lambda, k_reg } => raps_score(p, y, u, lambda, k_reg),
            ScoreKind::Saps { lambda } => saps_score(p, y, u, lambda),
            ScoreKind::Rank => rank_score(p, y),
        }
    }
}

impl Default for ScoreSpec {
    fn default() -> Self {
        Self::aps()
    }
}

impl fmt::Display for ScoreSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ScoreKind::Raps { lambda, k_reg } => write!(f, "raps(lambda={lambda},k_reg={k_reg})"),
            ScoreKind::Saps { lambda } => write!(f, "saps(lambda={lambda})"),
            _ => f.write_str(self.name()),
        }?;
        if !self.randomized {
            f.write_str("[u=1]")?;
        }
        Ok(())
    }
}

pub fn thr_score(p: &ProbVector, y: usize) -> f64 {
    1.0 - p.as_slice()[y]
}

/// Sum of the probabilities ranked strictly above `y`, plus `u·p_y`.
pub fn aps_score(p: &ProbVector, y: usize, u: f64) -> f64 {
    let v = p.as_slice();
    let r = rank_of_label(p, y);
    let order = p.descending_order();
    let mut head = 0.0;
    for &c in &order[..r - 1] {
        head += v[c];
    }
    head + u * v[y]
}

/// APS with an extra `lambda` for each head position `i > k_reg`.
///
/// The randomized `u·p_y` term carries no penalty. With `lambda = 0` this
/// performs exactly the same floating-point operations as [`aps_score`].
pub fn raps_score(p: &ProbVector, y: usize, u: f64, lambda: f64, k_reg: usize) -> f64 {
    let v = p.as_slice();
    let r = rank_of_label(p, y);
    let order = p.descending_order();
    let mut head = 0.0;
    for (pos, &c) in order[..r - 1].iter().enumerate() {
        head += v[c];
        if pos + 1 > k_reg {
            head += lambda;
        }
    }
    head + u * v[y]
}

/// `u·p_(1)` for the top label, otherwise `p_(1) + (rank - 2 + u)·lambda`.
pub fn saps_score(p: &ProbVector, y: usize, u: f64, lambda: f64) -> f64 {
    let top = p.as_slice()[p.argmax()];
    let r = rank_of_label(p, y);
    if r == 1 {
        u * top
    } else {
        top + (r as f64 - 2.0 + u) * lambda
    }
}

pub fn rank_score(p: &ProbVector, y: usize) -> f64 {
    rank_of_label(p, y) as f64 / p.num_classes() as f64
}

/// Scores of every label with a shared `u`, in one pass over the sorted order.
///
/// Entry `y` is bit-identical to `spec.score(p, y, u)`.
pub fn score_all_labels(p: &ProbVector, u: f64, spec: &ScoreSpec) -> Vec<f64> {
    let u = spec.effective_u(u);
    let v = p.as_slice();
    let k = v.len();
    let order = p.descending_order();
    let top = v[order[0]];
    let mut out = vec![0.0; k];
    let mut head = 0.0;
    for (pos, &c) in order.iter().enumerate() {
        let rank = pos + 1;
        out[c] = match spec.kind {
            ScoreKind::Thr => 1.0 - v[c],
            ScoreKind::Aps | ScoreKind::Raps { .. } => head + u * v[c],
            ScoreKind::Saps { lambda } => {
                if rank == 1 {
                    u * top
                } else {
                    top + (rank as f64 - 2.0 + u) * lambda
                }
            }
            ScoreKind::Rank => rank as f64 / k as f64,
        };
        match spec.kind {
            ScoreKind::Aps => head += v[c],
            ScoreKind::Raps { lambda, k_reg } => {
                head += v[c];
                if rank > k_reg {
                    head += lambda;
                }
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{softmax, LogitVector};
    use proptest::prelude::*;

    fn p532() -> ProbVector {
        ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap()
    }

    const EPS: f64 = 1e-12;

    #[test]
    fn thr_examples() {
        let one_hot = ProbVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(thr_score(&one_hot, 1), 0.0);
        assert!((thr_score(&p532(), 0) - 0.5).abs() < EPS);
        let uni = ProbVector::uniform(4);
        for y in 0..4 {
            assert!((thr_score(&uni, y) - 0.75).abs() < EPS);
        }
    }

    #[test]
    fn aps_examples() {
        let p = p532();
        assert!((aps_score(&p, 1, 0.5) - 0.65).abs() < EPS);
        assert_eq!(aps_score(&p, 0, 0.0), 0.0);
        assert!((aps_score(&p, 2, 1.0) - 1.0).abs() < EPS);
    }

    #[test]
    fn raps_examples() {
        let p = p532();
        assert!((raps_score(&p, 2, 0.0, 0.1, 1) - 0.9).abs() < EPS);
        assert!((raps_score(&p, 1, 0.5, 0.1, 1) - 0.65).abs() < EPS);
        for y in 0..3 {
            assert_eq!(
                raps_score(&p, y, 0.37, 0.0, 0).to_bits(),
                aps_score(&p, y, 0.37).to_bits()
            );
        }
    }

    #[test]
    fn saps_examples() {
        let p = p532();
        assert_eq!(saps_score(&p, 0, 0.0, 0.2), 0.0);
        assert!((saps_score(&p, 1, 0.0, 0.2) - 0.5).abs() < EPS);
        assert!((saps_score(&p, 2, 1.0, 0.2) - 0.9).abs() < EPS);
    }

    #[test]
    fn rank_examples() {
        let p4 = ProbVector::new(vec![0.1, 0.6, 0.2, 0.1]).unwrap();
        assert_eq!(rank_score(&p4, 1), 0.25);
        assert_eq!(rank_score(&p4, 3), 1.0);
        assert!((rank_score(&p532(), 1) - 2.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn score_all_examples() {
        let s = score_all_labels(&p532(), 1.0, &ScoreSpec::aps());
        let want = [0.5, 0.8, 1.0];
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < EPS);
        }
        let uni = score_all_labels(&ProbVector::uniform(5), 0.3, &ScoreSpec::thr());
        assert!(uni.iter().all(|v| *v == uni[0]));
    }

    #[test]
    fn deterministic_mode_uses_u_one() {
        let spec = ScoreSpec::aps().deterministic();
        assert!((spec.score(&p532(), 1, 0.0) - 0.8).abs() < EPS);
        assert_eq!(spec.to_string(), "aps[u=1]");
    }

    #[test]
    fn validate_rejects_bad_lambdas() {
        assert!(ScoreSpec::raps(-0.1, 1).validate().is_err());
        assert!(ScoreSpec::saps(0.0).validate().is_err());
        assert!(ScoreSpec::raps(0.0, 3).validate().is_ok());
    }

    fn all_specs() -> Vec<ScoreSpec> {
        vec![
            ScoreSpec::thr(),
            ScoreSpec::aps(),
            ScoreSpec::raps(0.05, 2),
            ScoreSpec::saps(0.2),
            ScoreSpec::rank(),
            ScoreSpec::aps().deterministic(),
        ]
    }

    fn arb_prob() -> impl Strategy<Value = ProbVector> {
        prop::collection::vec(-6.0f64..6.0, 2..12)
            .prop_map(|z| softmax(&LogitVector::new(z).unwrap()))
    }

    proptest! {
        #[test]
        fn score_all_matches_single_label(p in arb_prob(), u in 0.0f64..=1.0) {
            for spec in all_specs() {
                let all = score_all_labels(&p, u, &spec);
                for (y, s) in all.iter().enumerate() {
                    prop_assert_eq!(s.to_bits(), spec.score(&p, y, u).to_bits());
                }
            }
        }

        #[test]
        fn scores_non_decreasing_in_rank(p in arb_prob(), u in 0.0f64..=1.0) {
            for spec in all_specs() {
                let all = score_all_labels(&p, u, &spec);
                let order = p.descending_order();
                for w in order.windows(2) {
                    prop_assert!(all[w[0]] <= all[w[1]], "{} at {:?}", spec, all);
                }
                prop_assert!(all[p.argmax()] <= all.iter().copied().fold(f64::INFINITY, f64::min));
            }
        }

        #[test]
        fn scores_in_range(p in arb_prob(), u in 0.0f64..=1.0, y_seed in 0usize..100) {
            let k = p.num_classes();
            let y = y_seed % k;
            for spec in [ScoreSpec::thr(), ScoreSpec::aps(), ScoreSpec::rank()] {
                let s = spec.score(&p, y, u);
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
            }
            let (lambda, k_reg) = (0.05, 2);
            let raps = raps_score(&p, y, u, lambda, k_reg);
            let bound = 1.0 + lambda * (k as f64 - 1.0 - k_reg as f64).max(0.0);
            prop_assert!(raps <= bound + 1e-12);
            let saps = saps_score(&p, y, u, 0.2);
            prop_assert!(saps <= p.as_slice()[p.argmax()] + (k as f64 - 1.0) * 0.2 + 1e-12);
        }

        #[test]
        fn scores_are_shift_invariant(z in prop::collection::vec(-6.0f64..6.0, 2..8), c in -50.0f64..50.0, u in 0.0f64..=1.0) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let p = softmax(&LogitVector::new(z).unwrap());
            let q = softmax(&LogitVector::new(shifted).unwrap());
            for spec in all_specs() {
                let a = score_all_labels(&p, u, &spec);
                let b = score_all_labels(&q, u, &spec);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }
}
