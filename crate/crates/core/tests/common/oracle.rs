//! Brute-force reference implementations.
//!
//! Nothing here calls into the library. Everything is written out longhand
//! over plain slices so a bug in the engine cannot hide behind a shared
//! helper.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Softmax by the textbook formula, shifted by the max for overflow safety.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let mut max = z[0];
    for &v in z {
        if v > max {
            max = v;
        }
    }
    let mut exps = Vec::new();
    let mut total = 0.0;
    for &v in z {
        let e = (v - max).exp();
        exps.push(e);
        total += e;
    }
    let mut p = Vec::new();
    for e in exps {
        p.push(e / total);
    }
    p
}

/// Shannon entropy in nats, `0 · ln 0` taken as 0.
pub fn entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &v in p {
        if v > 0.0 {
            h -= v * v.ln();
        }
    }
    h
}

/// `1 − p_y`.
pub fn thr(p: &[f64], y: usize) -> f64 {
    1.0 - p[y]
}

/// Cumulative mass of the labels ranked above `y`, plus `u · p_y`.
///
/// Label `j` ranks above `y` when `p_j > p_y`, or when they are equal and
/// `j < y`. Summed in descending order to match the usual definition.
pub fn aps(p: &[f64], y: usize, u: f64) -> f64 {
    // selection sort by (prob desc, index asc)
    let mut order: Vec<usize> = (0..p.len()).collect();
    for i in 0..order.len() {
        let mut best = i;
        for j in (i + 1)..order.len() {
            let (a, b) = (order[j], order[best]);
            if p[a] > p[b] || (p[a] == p[b] && a < b) {
                best = j;
            }
        }
        order.swap(i, best);
    }
    let mut head = 0.0;
    for &j in &order {
        if j == y {
            break;
        }
        head += p[j];
    }
    head + u * p[y]
}

/// Smallest integer `k` with `k ≥ (1 − α)(n + 1)`, found by counting up.
pub fn n_alpha(n: usize, alpha: f64) -> usize {
    let target = (1.0 - alpha) * (n as f64 + 1.0);
    let mut k = 1;
    while (k as f64) < target - 1e-9 {
        k += 1;
    }
    k
}

/// Labels whose score is ranked within the `n_α` smallest of
/// `{A_1, …, A_n, a}`, counting ties in the candidate's favour.
///
/// Label `y` is kept when fewer than `n_α` calibration scores are strictly
/// below its test score. With `Q = A_(n_α)` (`+∞` when `n_α > n`) this is
/// exactly `a ≤ Q`, but it is evaluated here by direct counting.
pub fn brute_force_set(cal_scores: &[f64], test_scores: &[f64], alpha: f64) -> Vec<usize> {
    let k = n_alpha(cal_scores.len(), alpha);
    let mut set = Vec::new();
    for (y, &a) in test_scores.iter().enumerate() {
        let mut below = 0;
        for &s in cal_scores {
            if s < a {
                below += 1;
            }
        }
        if below < k {
            set.push(y);
        }
    }
    set
}

/// The count rule `Σ_n 1(A_n ≤ a) ≤ n_α` read literally.
///
/// It admits one more calibration score at or below `a` than the quantile
/// rule does, so it always returns a superset of [`brute_force_set`].
pub fn literal_count_set(cal_scores: &[f64], test_scores: &[f64], alpha: f64) -> Vec<usize> {
    let k = n_alpha(cal_scores.len(), alpha);
    let mut set = Vec::new();
    for (y, &a) in test_scores.iter().enumerate() {
        let mut at_or_below = 0;
        for &s in cal_scores {
            if s <= a {
                at_or_below += 1;
            }
        }
        if at_or_below <= k {
            set.push(y);
        }
    }
    set
}

/// Coverage of the split conformal rule for i.i.d. Uniform(0, 1) scores.
///
/// For each trial, draws `n_cal` calibration scores, takes the `n_α`-th
/// smallest as `Q`, and records the exact conditional coverage
/// `P(U ≤ Q) = Q` (or 1 when `n_α > n_cal`). Returns one value per trial.
pub fn exact_coverage_distribution(n_cal: usize, alpha: f64, trials: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n_alpha(n_cal, alpha);
    let mut out = Vec::new();
    for _ in 0..trials {
        let mut scores: Vec<f64> = Vec::new();
        for _ in 0..n_cal {
            scores.push(rng.random::<f64>());
        }
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let coverage = if k > n_cal { 1.0 } else { scores[k - 1] };
        out.push(coverage);
    }
    out
}

pub fn mean(values: &[f64]) -> f64 {
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    total / values.len() as f64
}

/// Mean cross-entropy of a softmax regression, `weights[c][j]` and `bias[c]`.
pub fn softmax_regression_loss(
    weights: &[Vec<f64>],
    bias: &[f64],
    features: &[Vec<f64>],
    labels: &[usize],
) -> f64 {
    let mut total = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let mut z = Vec::new();
        for c in 0..bias.len() {
            let mut s = bias[c];
            for j in 0..x.len() {
                s += weights[c][j] * x[j];
            }
            z.push(s);
        }
        let p = softmax(&z);
        total -= p[y].ln();
    }
    total / features.len() as f64
}
