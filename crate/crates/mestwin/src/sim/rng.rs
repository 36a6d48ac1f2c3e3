//! Per-subsystem RNG streams and the few distributions the engine draws from.
//!
//! Each subsystem gets its own ChaCha8 stream seeded by hashing the master
//! seed with the subsystem name, so adding a subsystem never perturbs the
//! draws of another and determinism tests stay stable.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic stream for one named subsystem of a run.
pub fn stream(master_seed: u64, subsystem: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update(subsystem.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

pub fn uniform_f64(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    let u: f64 = rng.random();
    low + u * (high - low)
}

/// Inclusive integer range draw.
pub fn uniform_u32(rng: &mut ChaCha8Rng, low: u32, high: u32) -> u32 {
    if low >= high {
        return low;
    }
    rng.random_range(low..=high)
}

/// Knuth multiplication method; adequate for the order-volume scale of these
/// templates (lambda well below 30).
pub fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = (-lambda).exp();
    let mut k: u32 = 0;
    let mut p: f64 = 1.0;
    loop {
        p *= rng.random::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

/// Index draw proportional to non-negative weights.
pub fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        target -= w;
        if target <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Symmetric triangular draw on (-1, 1), peaked at zero.
pub fn triangular_unit(rng: &mut ChaCha8Rng) -> f64 {
    let a: f64 = rng.random();
    let b: f64 = rng.random();
    a + b - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic_and_independent() {
        let mut a1 = stream(42, "orders");
        let mut a2 = stream(42, "orders");
        let mut b = stream(42, "downtime");
        let xs: Vec<f64> = (0..8).map(|_| a1.random()).collect();
        let ys: Vec<f64> = (0..8).map(|_| a2.random()).collect();
        let zs: Vec<f64> = (0..8).map(|_| b.random()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn poisson_mean_is_close_to_lambda() {
        let mut rng = stream(7, "poisson-test");
        let n = 20_000;
        let total: u64 = (0..n).map(|_| u64::from(poisson(&mut rng, 8.0))).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 8.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn poisson_zero_lambda_is_zero() {
        let mut rng = stream(7, "poisson-zero");
        assert_eq!(poisson(&mut rng, 0.0), 0);
    }

    #[test]
    fn weighted_index_respects_weights() {
        let mut rng = stream(9, "weights");
        let weights = [0.0, 1.0, 0.0];
        for _ in 0..32 {
            assert_eq!(weighted_index(&mut rng, &weights), 1);
        }
    }

    #[test]
    fn triangular_is_bounded() {
        let mut rng = stream(11, "tri");
        for _ in 0..1000 {
            let v = triangular_unit(&mut rng);
            assert!((-1.0..=1.0).contains(&v));
        }
    }
}
