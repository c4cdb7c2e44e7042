use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of random reshuffles used when exact enumeration is too large.
pub const DEFAULT_PERMUTATIONS: usize = 10_000;

/// Above this many differing pairs the test samples instead of enumerating.
pub const EXACT_LIMIT: usize = 20;

/// Arithmetic mean and population standard deviation.
pub fn average_over_seeds(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::invalid("average_over_seeds", "no values"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Two-sided paired approximate randomization test on per-item scores.
///
/// The statistic is `|Σ (a_i - b_i)|`. Each permutation swaps every pair
/// independently with probability ½. When at most [`EXACT_LIMIT`] pairs
/// differ, all `2^k` swap patterns are enumerated and the exact p-value is
/// returned; otherwise `permutations` random patterns are drawn and
/// `p = (hits + 1) / (permutations + 1)`.
pub fn significance_test(a: &[f64], b: &[f64], permutations: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(
            "significance_test",
            format!("paired samples differ in length: {} vs {}", a.len(), b.len()),
        ));
    }
    if a.is_empty() {
        return Err(Error::invalid("significance_test", "empty samples"));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }
    let observed: f64 = diffs.iter().sum::<f64>().abs();
    // tolerance for summation-order rounding
    let threshold = observed - 1e-9 * observed.max(1.0);

    if diffs.len() <= EXACT_LIMIT {
        let k = diffs.len();
        let mut hits: u64 = 0;
        for mask in 0u64..(1 << k) {
            let s: f64 = diffs
                .iter()
                .enumerate()
                .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
                .sum();
            if s.abs() >= threshold {
                hits += 1;
            }
        }
        return Ok(hits as f64 / (1u64 << k) as f64);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..permutations {
        let s: f64 = diffs
            .iter()
            .map(|d| if rng.random::<bool>() { -d } else { *d })
            .sum();
        if s.abs() >= threshold {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (permutations + 1) as f64)
}
