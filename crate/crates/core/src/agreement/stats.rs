//! Why consensus works: collision probability of wrong solutions agreeing on
//! k tests, and the expected score ratio of correct versus incorrect clusters.

use num_traits::pow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_count, Scalar};

/// p^k.
pub fn collision_probability<T: Scalar>(p: T, k: u32) -> T {
    pow(p, k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScoreRatio<T> {
    Finite(T),
    Unbounded,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("m = {m} must satisfy 1 <= m <= k = {k}")]
    Counts { m: usize, k: usize },
    #[error("delta must lie in (0, 1]")]
    Delta,
}

/// m / ((k - m)(1 - delta)); unbounded when either factor vanishes.
pub fn expected_score_ratio<T: Scalar>(m: usize, k: usize, delta: T) -> Result<ScoreRatio<T>, DomainError> {
    if m == 0 || m > k {
        return Err(DomainError::Counts { m, k });
    }
    if delta <= T::zero() || delta > T::one() {
        return Err(DomainError::Delta);
    }
    let miss = T::one() - delta;
    if m == k || miss == T::zero() {
        return Ok(ScoreRatio::Unbounded);
    }
    Ok(ScoreRatio::Finite(from_count::<T>(m) / (from_count::<T>(k - m) * miss)))
}

/// Fraction of `trials` in which all `k` independent Bernoulli(p) draws
/// succeed.
pub fn monte_carlo_collision<T: Scalar>(p: T, k: u32, trials: u64, seed: u64) -> T {
    assert!(trials >= 1, "trials must be positive");
    let pf = p.to_f64().unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..trials)
        .filter(|_| (0..k).all(|_| rng.gen::<f64>() < pf))
        .count();
    from_count::<T>(hits) / T::from_u64(trials).expect("trial count representable")
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
