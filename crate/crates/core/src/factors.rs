use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Latent factors for one worker (or for the whole tensor when unsplit).
///
/// `a` holds only the rows this worker owns; `b`, `c` are full-size local
/// copies and `c0` is the time anchor preceding `C_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub c0: Vec<f64>,
}

impl FactorSet {
    pub fn rank(&self) -> usize {
        self.c0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite()
            && self.b.is_finite()
            && self.c.is_finite()
            && self.c0.iter().all(|v| v.is_finite())
    }

    pub fn zeros(rows_local: usize, j: usize, k: usize, rank: usize) -> Self {
        Self {
            a: Matrix::zeros(rows_local, rank),
            b: Matrix::zeros(j, rank),
            c: Matrix::zeros(k, rank),
            c0: vec![0.0; rank],
        }
    }
}

/// Draws every factor entry i.i.d. from `N(0, scale²)`, deterministically in `seed`.
pub fn init_factors(
    rows_local: usize,
    j: usize,
    k: usize,
    rank: usize,
    seed: u64,
    scale: f64,
) -> Result<FactorSet> {
    if rows_local == 0 || j == 0 || k == 0 || rank == 0 {
        return Err(Error::InvalidDimension(format!(
            "factor shapes must be positive (rows={rows_local}, J={j}, K={k}, R={rank})"
        )));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "init scale must be positive, got {scale}"
        )));
    }
    let normal = Normal::new(0.0, scale).expect("scale checked above");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |rows: usize| {
        let data = (0..rows * rank).map(|_| normal.sample(&mut rng)).collect();
        Matrix::from_vec(rows, rank, data)
    };
    let a = draw(rows_local);
    let b = draw(j);
    let c = draw(k);
    let c0 = draw(1).as_slice().to_vec();
    Ok(FactorSet { a, b, c, c0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let x = init_factors(5, 4, 3, 2, 7, 0.1).unwrap();
        let y = init_factors(5, 4, 3, 2, 7, 0.1).unwrap();
        assert_eq!(x, y);
        let z = init_factors(5, 4, 3, 2, 8, 0.1).unwrap();
        assert_ne!(x, z);
    }

    #[test]
    fn shapes_for_rank_twenty() {
        let f = init_factors(7, 5, 3, 20, 0, 0.1).unwrap();
        assert_eq!(f.a.shape(), (7, 20));
        assert_eq!(f.b.shape(), (5, 20));
        assert_eq!(f.c.shape(), (3, 20));
        assert_eq!(f.c0.len(), 20);
    }

    #[test]
    fn sample_std_tracks_scale() {
        let f = init_factors(200, 1, 1, 50, 3, 0.1).unwrap();
        let n = f.a.as_slice().len() as f64;
        let mean = f.a.as_slice().iter().sum::<f64>() / n;
        let var = f.a.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!((var.sqrt() - 0.1).abs() < 0.005, "std {}", var.sqrt());
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(init_factors(0, 1, 1, 1, 0, 0.1).is_err());
        assert!(init_factors(1, 1, 1, 0, 0, 0.1).is_err());
        assert!(init_factors(1, 1, 1, 1, 0, 0.0).is_err());
    }
}
