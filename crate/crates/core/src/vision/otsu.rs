use num_bigint::{BigInt, BigUint};

use super::VisionError;
use crate::model::GrayImage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    pub counts: [u64; 256],
}

impl Default for Histogram256 {
    fn default() -> Self {
        Histogram256 { counts: [0; 256] }
    }
}

impl Histogram256 {
    pub fn from_counts(counts: [u64; 256]) -> Self {
        Histogram256 { counts }
    }

    pub fn from_gray(g: &GrayImage) -> Self {
        let mut h = Histogram256::default();
        for &v in &g.data {
            h.counts[v as usize] += 1;
        }
        h
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Otsu's threshold: the `t` maximizing ω₀ω₁(μ₀−μ₁)² where class 0 holds
/// intensities `<= t`. Ties go to the smallest `t`.
///
/// The criterion equals `(N·S₀ − n₀·S)² / (N²·n₀·n₁)`; candidates are
/// compared by exact integer cross-multiplication so ties are detected
/// exactly rather than up to rounding.
pub fn otsu_threshold(h: &Histogram256) -> Result<u8, VisionError> {
    let n_total: u128 = h.counts.iter().map(|&c| c as u128).sum();
    let s_total: u128 = h.counts.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
    let n_big = BigInt::from(n_total);
    let s_big = BigInt::from(s_total);

    let mut best: Option<(u8, BigUint, u128, u128)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for t in 0..255usize {
        n0 += h.counts[t] as u128;
        s0 += t as u128 * h.counts[t] as u128;
        let n1 = n_total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = &n_big * BigInt::from(s0) - BigInt::from(n0) * &s_big;
        let num = diff.magnitude().pow(2);
        let better = match &best {
            None => true,
            Some((_, bnum, bn0, bn1)) => {
                // num/(n0 n1) > bnum/(bn0 bn1)
                &num * BigUint::from(*bn0) * BigUint::from(*bn1) > bnum * BigUint::from(n0) * BigUint::from(n1)
            }
        };
        if better {
            best = Some((t as u8, num, n0, n1));
        }
    }
    best.map(|(t, ..)| t).ok_or(VisionError::DegenerateHistogram)
}
