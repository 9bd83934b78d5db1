//! Symmetric tridiagonal systems for the batch time-factor step.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Symmetric tridiagonal matrix stored as its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[n]` couples rows `n` and `n + 1`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &d) in self.diag.iter().enumerate() {
            m.set(i, i, d);
        }
        for (i, &o) in self.off.iter().enumerate() {
            m.set(i, i + 1, o);
            m.set(i + 1, i, o);
        }
        m
    }

    /// Solves `self · X = rhs` for every column of `rhs` at once, in place.
    ///
    /// Thomas elimination without pivoting; the callers only build strictly
    /// diagonally dominant systems.
    pub fn solve_in_place(&self, rhs: &mut Matrix) -> Result<()> {
        let n = self.len();
        if rhs.rows() != n {
            return Err(crate::error::shape_err(
                "tridiagonal solve",
                format!("{n} rows"),
                rhs.rows(),
            ));
        }
        if n == 0 {
            return Ok(());
        }
        let scale = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(1.0);
        let tiny = scale * f64::EPSILON * 16.0;
        let mut c_prime = vec![0.0; n];
        let mut pivot = self.diag[0];
        for row in 0..n {
            if row > 0 {
                pivot = self.diag[row] - self.off[row - 1] * c_prime[row - 1];
            }
            if pivot.abs() <= tiny || !pivot.is_finite() {
                return Err(Error::SingularSystem { row });
            }
            if row + 1 < n {
                c_prime[row] = self.off[row] / pivot;
            }
            let inv = 1.0 / pivot;
            let cols = rhs.cols();
            if row == 0 {
                rhs.row_mut(0).iter_mut().for_each(|x| *x *= inv);
            } else {
                let sub = self.off[row - 1];
                let (done, rest) = rhs.as_mut_slice().split_at_mut(row * cols);
                let prev = &done[(row - 1) * cols..];
                for (x, p) in rest[..cols].iter_mut().zip(prev) {
                    *x = (*x - sub * p) * inv;
                }
            }
        }
        for row in (0..n - 1).rev() {
            let cp = c_prime[row];
            let cols = rhs.cols();
            let (head, tail) = rhs.as_mut_slice().split_at_mut((row + 1) * cols);
            let next = &tail[..cols];
            for (x, nx) in head[row * cols..].iter_mut().zip(next) {
                *x -= cp * nx;
            }
        }
        Ok(())
    }

    /// Single right-hand side convenience wrapper.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut m = Matrix::from_vec(rhs.len(), 1, rhs.to_vec());
        self.solve_in_place(&mut m)?;
        Ok(m.as_slice().to_vec())
    }
}

/// Time-chain coupling matrix `S` (K×K): diagonal 2 except the last entry 1,
/// off-diagonals −1.
pub fn build_s(k: usize) -> Result<SymTridiagonal> {
    if k == 0 {
        return Err(Error::InvalidDimension("S needs K >= 1".into()));
    }
    let mut diag = vec![2.0; k];
    diag[k - 1] = 1.0;
    Ok(SymTridiagonal {
        diag,
        off: vec![-1.0; k - 1],
    })
}

/// `Q = (1/τ + ρ_C)·I + λ_C·S`.
pub fn build_q(k: usize, tau: f64, rho_c: f64, lambda_c: f64) -> Result<SymTridiagonal> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let s = build_s(k)?;
    let shift = 1.0 / tau + rho_c;
    Ok(SymTridiagonal {
        diag: s.diag.iter().map(|d| shift + lambda_c * d).collect(),
        off: s.off.iter().map(|o| lambda_c * o).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s_examples() {
        let s3 = build_s(3).unwrap().to_dense();
        assert_eq!(
            s3,
            Matrix::from_rows(&[
                vec![2.0, -1.0, 0.0],
                vec![-1.0, 2.0, -1.0],
                vec![0.0, -1.0, 1.0]
            ])
        );
        assert_eq!(build_s(1).unwrap().to_dense(), Matrix::from_rows(&[vec![1.0]]));
        assert_eq!(
            build_s(2).unwrap().to_dense(),
            Matrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 1.0]])
        );
        assert!(build_s(0).is_err());
    }

    #[test]
    fn q_for_two_slices() {
        let q = build_q(2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(q.to_dense(), Matrix::from_rows(&[vec![4.0, -1.0], vec![-1.0, 3.0]]));
        let x = q.solve(&[11.0, 11.0]).unwrap();
        assert!((x[0] - 4.0).abs() < 1e-14 && (x[1] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_reported() {
        let m = SymTridiagonal {
            diag: vec![1.0, 1.0],
            off: vec![1.0],
        };
        assert!(matches!(m.solve(&[1.0, 1.0]), Err(Error::SingularSystem { row: 1 })));
    }

    #[test]
    fn multi_column_matches_column_by_column() {
        let q = build_q(5, 0.5, 0.3, 2.0).unwrap();
        let rhs = Matrix::from_vec(5, 2, (0..10).map(|v| v as f64 - 3.0).collect());
        let mut all = rhs.clone();
        q.solve_in_place(&mut all).unwrap();
        for col in 0..2 {
            let b: Vec<f64> = (0..5).map(|r| rhs.get(r, col)).collect();
            let x = q.solve(&b).unwrap();
            for (r, v) in x.iter().enumerate() {
                assert!((v - all.get(r, col)).abs() < 1e-14);
            }
        }
    }
}
