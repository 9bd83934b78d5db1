#![allow(dead_code)]

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use temporal_tensor::objective::DualPair;
use temporal_tensor::{Dims, Entry, FactorSet, Matrix, SparseTemporalTensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-half_width..half_width)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// `n` distinct cells of an `I×J×K` grid with values uniform in `[-bound, bound)`.
pub fn random_tensor(rng: &mut ChaCha8Rng, dims: Dims, n: usize, bound: f64) -> SparseTemporalTensor {
    let total = dims.i * dims.j * dims.k;
    let entries = sample(rng, total, n.min(total))
        .into_iter()
        .map(|cell| {
            let jk = dims.j * dims.k;
            let (i, rem) = (cell / jk, cell % jk);
            Entry::new(i, rem / dims.k, rem % dims.k, rng.random_range(-bound..bound))
        })
        .collect();
    SparseTemporalTensor::new(dims, entries).unwrap()
}

pub fn random_factors(rng: &mut ChaCha8Rng, rows: usize, j: usize, k: usize, r: usize, half_width: f64) -> FactorSet {
    FactorSet {
        a: uniform_matrix(rng, rows, r, half_width),
        b: uniform_matrix(rng, j, r, half_width),
        c: uniform_matrix(rng, k, r, half_width),
        c0: (0..r).map(|_| rng.random_range(-half_width..half_width)).collect(),
    }
}

pub fn random_duals(rng: &mut ChaCha8Rng, j: usize, k: usize, r: usize, half_width: f64) -> DualPair {
    DualPair {
        theta_b: uniform_matrix(rng, j, r, half_width),
        theta_c: uniform_matrix(rng, k, r, half_width),
    }
}

/// Adds `direction * scale` to every factor matrix (not `c0`).
pub fn shifted(f: &FactorSet, direction: &FactorSet, scale: f64) -> FactorSet {
    let mut out = f.clone();
    out.a.axpy(scale, &direction.a);
    out.b.axpy(scale, &direction.b);
    out.c.axpy(scale, &direction.c);
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Max elementwise relative error with a floor on the scale.
pub fn matrix_rel_err(got: &Matrix, want: &Matrix) -> f64 {
    let scale = want.max_abs().max(1e-12);
    got.as_slice()
        .iter()
        .zip(want.as_slice())
        .map(|(g, w)| (g - w).abs() / scale)
        .fold(0.0, f64::max)
}

/// Central difference of `f` along every coordinate of the matrix picked by `field`.
pub fn central_difference<F>(
    factors: &FactorSet,
    field: fn(&mut FactorSet) -> &mut Matrix,
    step: f64,
    f: F,
) -> Matrix
where
    F: Fn(&FactorSet) -> f64,
{
    let mut probe = factors.clone();
    let (rows, cols) = field(&mut probe).shape();
    let mut out = Matrix::zeros(rows, cols);
    for idx in 0..rows * cols {
        let orig = field(&mut probe).as_slice()[idx];
        field(&mut probe).as_mut_slice()[idx] = orig + step;
        let plus = f(&probe);
        field(&mut probe).as_mut_slice()[idx] = orig - step;
        let minus = f(&probe);
        field(&mut probe).as_mut_slice()[idx] = orig;
        out.as_mut_slice()[idx] = (plus - minus) / (2.0 * step);
    }
    out
}

pub fn field_a(f: &mut FactorSet) -> &mut Matrix {
    &mut f.a
}
pub fn field_b(f: &mut FactorSet) -> &mut Matrix {
    &mut f.b
}
pub fn field_c(f: &mut FactorSet) -> &mut Matrix {
    &mut f.c
}

/// Relative error of a gradient against a finite-difference estimate, measured
/// in the Frobenius norm.
pub fn gradient_rel_err(analytic: &Matrix, numeric: &Matrix) -> f64 {
    let diff = analytic.dist_sq(numeric).sqrt();
    diff / analytic.frobenius_sq().sqrt().max(numeric.frobenius_sq().sqrt()).max(1e-12)
}
