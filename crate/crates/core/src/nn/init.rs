use rand::Rng;

use crate::nn::tensor::Tensor;

/// `[rows, cols]` matrix drawn uniformly from `±sqrt(6 / (rows + cols))`.
pub fn uniform_xavier<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(vec![rows, cols], values).expect("shape matches value count")
}

pub fn zeros(n: usize) -> Tensor {
    Tensor::zeros(vec![n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn xavier_bounds_and_determinism() {
        let a = uniform_xavier(4, 8, &mut ChaCha8Rng::seed_from_u64(7));
        let b = uniform_xavier(4, 8, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
        let bound = (6.0f64 / 12.0).sqrt();
        assert!(a.values().iter().all(|v| v.abs() <= bound));
    }
}
