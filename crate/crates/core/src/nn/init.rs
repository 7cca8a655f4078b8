use rand::Rng;

use crate::Scalar;

/// He-uniform bound `√(6/fan_in)`.
pub fn he_uniform_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

/// Weights drawn from `U(−b, b)` with `b = √(6/fan_in)`.
pub fn he_uniform<T: Scalar, R: Rng + ?Sized>(len: usize, fan_in: usize, rng: &mut R) -> Vec<T> {
    let b = he_uniform_bound(fan_in);
    (0..len).map(|_| T::lit(rng.random_range(-b..b))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_bound_and_range() {
        let b = he_uniform_bound(100);
        assert!((b - 0.244_948_974_278_317_8).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w: Vec<f32> = he_uniform(1000, 100, &mut rng);
        assert!(w.iter().all(|&v| (v as f64) > -b && (v as f64) < b));
    }

    #[test]
    fn same_seed_same_bits() {
        let a: Vec<f32> = he_uniform(500, 27, &mut ChaCha8Rng::seed_from_u64(42));
        let b: Vec<f32> = he_uniform(500, 27, &mut ChaCha8Rng::seed_from_u64(42));
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn empirical_variance_matches_uniform_moment() {
        let b = he_uniform_bound(100);
        let w: Vec<f64> = he_uniform(100_000, 100, &mut ChaCha8Rng::seed_from_u64(7));
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        let expected = b * b / 3.0;
        assert!((var - expected).abs() / expected < 0.05);
    }
}
