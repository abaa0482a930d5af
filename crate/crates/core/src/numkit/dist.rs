//! Categorical and diagonal-Gaussian helpers used by the policy heads.

use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// `−Σ p log p`, treating `0 log 0` as 0.
pub fn categorical_entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave acc marginally below 1.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log-density of a diagonal Gaussian and its analytic entropy.
pub fn gaussian_logprob_entropy(mean: &[f64], log_std: &[f64], action: &[f64]) -> (f64, f64) {
    debug_assert_eq!(mean.len(), log_std.len());
    debug_assert_eq!(mean.len(), action.len());
    let mut logp = 0.0;
    let mut entropy = 0.0;
    for ((m, ls), a) in mean.iter().zip(log_std).zip(action) {
        let z = (a - m) * (-ls).exp();
        logp += -0.5 * z * z - ls - HALF_LN_2PI;
        entropy += ls + 0.5 * (2.0 * PI * std::f64::consts::E).ln();
    }
    (logp, entropy)
}

pub fn sample_gaussian<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let n: f64 = rng.sample(StandardNormal);
            m + ls.exp() * n
        })
        .collect()
}
