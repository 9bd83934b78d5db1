//! Scalar objectives and gradients of the temporal factorization model.
//!
//! For a worker `p` holding sub-tensor `Ω^p`:
//!
//! ```text
//! f   = ½ Σ_{Ω^p} (x_ijk − <A_i, B_j, C_k>)²
//! g   = λ_A/2‖A‖² + λ_B/2‖B‖² + λ_C/2 Σ_{k=1..K} ‖C_k − C_{k−1}‖² + λ_0/2‖C_0 − μ_C‖²
//! l   = tr(Θ_Bᵀ(B − B̄)) + ρ_B/2‖B − B̄‖² + tr(Θ_Cᵀ(C − C̄)) + ρ_C/2‖C − C̄‖²
//! L^p = f + g + l
//! ```
//!
//! `H^p` replaces `f` by its linearization at the current iterate plus a
//! proximal term `1/(2τ)‖· − current‖²`, which makes it a convex majorizer of
//! `L^p` for small enough `τ`.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::factors::FactorSet;
use crate::matrix::Matrix;
use crate::tensor::SparseTemporalTensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_c: f64,
    pub lambda_0: f64,
    pub rho_b: f64,
    pub rho_c: f64,
    /// Prior mean of `C_0` (length `rank`).
    pub mu_c: Vec<f64>,
    pub tau0: f64,
    pub beta: f64,
    pub alpha: f64,
    pub rank: usize,
    pub rmse_threshold: f64,
}

impl HyperParams {
    /// λ's at 0.01, ρ's at 0.5, τ schedule 5e-4 → ×0.9 → floor 1e-4.
    pub fn with_rank(rank: usize) -> Self {
        Self {
            lambda_a: 0.01,
            lambda_b: 0.01,
            lambda_c: 0.01,
            lambda_0: 0.01,
            rho_b: 0.5,
            rho_c: 0.5,
            mu_c: vec![0.0; rank],
            tau0: 5e-4,
            beta: 0.9,
            alpha: 1e-4,
            rank,
            rmse_threshold: 1e-4,
        }
    }

    /// Sets all four regularizers at once.
    pub fn lambdas(mut self, a: f64, b: f64, c: f64, zero: f64) -> Self {
        self.lambda_a = a;
        self.lambda_b = b;
        self.lambda_c = c;
        self.lambda_0 = zero;
        self
    }

    pub fn rhos(mut self, b: f64, c: f64) -> Self {
        self.rho_b = b;
        self.rho_c = c;
        self
    }

    pub fn tau_schedule(mut self, tau0: f64, beta: f64, alpha: f64) -> Self {
        self.tau0 = tau0;
        self.beta = beta;
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if self.mu_c.len() != self.rank {
            return bad(format!(
                "mu_c has length {}, expected rank {}",
                self.mu_c.len(),
                self.rank
            ));
        }
        for (name, v) in [
            ("lambda_a", self.lambda_a),
            ("lambda_b", self.lambda_b),
            ("lambda_c", self.lambda_c),
            ("lambda_0", self.lambda_0),
            ("rho_b", self.rho_b),
            ("rho_c", self.rho_c),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.tau0 > 0.0 && self.alpha > 0.0) {
            return bad("tau0 and alpha must be positive".into());
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        if self.alpha > self.tau0 {
            return bad(format!(
                "alpha ({}) must not exceed tau0 ({})",
                self.alpha, self.tau0
            ));
        }
        if !(self.rmse_threshold > 0.0) {
            return bad("rmse_threshold must be positive".into());
        }
        Ok(())
    }
}

/// Lagrange multipliers `Θ_B^p`, `Θ_C^p` for one worker.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPair {
    pub theta_b: Matrix,
    pub theta_c: Matrix,
}

impl DualPair {
    pub fn zeros(j: usize, k: usize, rank: usize) -> Self {
        Self {
            theta_b: Matrix::zeros(j, rank),
            theta_c: Matrix::zeros(k, rank),
        }
    }
}

/// `∇_A f`, `∇_B f`, `∇_C f`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub da: Matrix,
    pub db: Matrix,
    pub dc: Matrix,
}

/// `<a, b, c> = Σ_r a_r b_r c_r`.
pub fn predict(a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() != c.len() {
        return Err(shape_err(
            "predict",
            a.len(),
            format!("{}, {}", b.len(), c.len()),
        ));
    }
    Ok(triple(a, b, c))
}

#[inline]
pub(crate) fn triple(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| x * y * z)
        .sum()
}

fn check_factor_shapes(
    context: &'static str,
    tensor: &SparseTemporalTensor,
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
) -> Result<()> {
    let d = tensor.dims();
    let r = a.cols();
    let expected = (d.i, d.j, d.k, r);
    let found = (a.rows(), b.rows(), c.rows(), r);
    if expected != found || b.cols() != r || c.cols() != r {
        return Err(shape_err(
            context,
            format!("A {}x{r}, B {}x{r}, C {}x{r}", d.i, d.j, d.k),
            format!(
                "A {:?}, B {:?}, C {:?}",
                a.shape(),
                b.shape(),
                c.shape()
            ),
        ));
    }
    Ok(())
}

fn check_same_shape(context: &'static str, x: &Matrix, y: &Matrix) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(shape_err(
            context,
            format!("{:?}", x.shape()),
            format!("{:?}", y.shape()),
        ));
    }
    Ok(())
}

/// `½ Σ (x − <A_i, B_j, C_k>)²` over the stored entries.
pub fn loss_f(tensor: &SparseTemporalTensor, factors: &FactorSet) -> Result<f64> {
    check_factor_shapes("loss_f", tensor, &factors.a, &factors.b, &factors.c)?;
    let (sse, _) = sse_unchecked(tensor, &factors.a, &factors.b, &factors.c);
    Ok(0.5 * sse)
}

/// Regularizer `g`, taking `C_0` from `factors`.
pub fn loss_g(factors: &FactorSet, hp: &HyperParams) -> Result<f64> {
    let r = factors.c0.len();
    if factors.a.cols() != r
        || factors.b.cols() != r
        || factors.c.cols() != r
        || hp.mu_c.len() != r
    {
        return Err(shape_err(
            "loss_g",
            format!("rank {r} everywhere"),
            format!(
                "A/B/C cols {}/{}/{}, mu_c {}",
                factors.a.cols(),
                factors.b.cols(),
                factors.c.cols(),
                hp.mu_c.len()
            ),
        ));
    }
    let mut chain = 0.0;
    let mut prev = factors.c0.as_slice();
    for row in factors.c.iter_rows() {
        chain += row
            .iter()
            .zip(prev)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>();
        prev = row;
    }
    let anchor: f64 = factors
        .c0
        .iter()
        .zip(&hp.mu_c)
        .map(|(x, m)| (x - m) * (x - m))
        .sum();
    Ok(0.5 * hp.lambda_a * factors.a.frobenius_sq()
        + 0.5 * hp.lambda_b * factors.b.frobenius_sq()
        + 0.5 * hp.lambda_c * chain
        + 0.5 * hp.lambda_0 * anchor)
}

/// Augmented-Lagrangian coupling term `l`.
pub fn loss_l(
    b_local: &Matrix,
    c_local: &Matrix,
    duals: &DualPair,
    b_bar: &Matrix,
    c_bar: &Matrix,
    hp: &HyperParams,
) -> Result<f64> {
    check_same_shape("loss_l (B vs B̄)", b_local, b_bar)?;
    check_same_shape("loss_l (Θ_B)", b_local, &duals.theta_b)?;
    check_same_shape("loss_l (C vs C̄)", c_local, c_bar)?;
    check_same_shape("loss_l (Θ_C)", c_local, &duals.theta_c)?;
    let part = |x: &Matrix, bar: &Matrix, theta: &Matrix, rho: f64| {
        let mut tr = 0.0;
        let mut sq = 0.0;
        for ((v, m), t) in x.as_slice().iter().zip(bar.as_slice()).zip(theta.as_slice()) {
            let d = v - m;
            tr += t * d;
            sq += d * d;
        }
        tr + 0.5 * rho * sq
    };
    Ok(part(b_local, b_bar, &duals.theta_b, hp.rho_b)
        + part(c_local, c_bar, &duals.theta_c, hp.rho_c))
}

/// Local augmented Lagrangian `L^p = f + g + l`.
pub fn local_lagrangian(
    tensor: &SparseTemporalTensor,
    factors: &FactorSet,
    duals: &DualPair,
    b_bar: &Matrix,
    c_bar: &Matrix,
    hp: &HyperParams,
) -> Result<f64> {
    let f = loss_f(tensor, factors)?;
    let g = loss_g(factors, hp)?;
    let l = loss_l(&factors.b, &factors.c, duals, b_bar, c_bar, hp)?;
    Ok(f + g + l)
}

/// Gradient of `f` with respect to `A`, `B`, `C`.
pub fn grad_f(tensor: &SparseTemporalTensor, factors: &FactorSet) -> Result<GradientSet> {
    check_factor_shapes("grad_f", tensor, &factors.a, &factors.b, &factors.c)?;
    let r = factors.rank();
    let mut g = GradientSet {
        da: Matrix::zeros(factors.a.rows(), r),
        db: Matrix::zeros(factors.b.rows(), r),
        dc: Matrix::zeros(factors.c.rows(), r),
    };
    for e in tensor.entries() {
        let (i, j, k) = (e.i as usize, e.j as usize, e.k as usize);
        let (a, b, c) = (factors.a.row(i), factors.b.row(j), factors.c.row(k));
        let eps = e.value - triple(a, b, c);
        for (n, d) in g.da.row_mut(i).iter_mut().enumerate() {
            *d -= eps * b[n] * c[n];
        }
        for (n, d) in g.db.row_mut(j).iter_mut().enumerate() {
            *d -= eps * a[n] * c[n];
        }
        for (n, d) in g.dc.row_mut(k).iter_mut().enumerate() {
            *d -= eps * a[n] * b[n];
        }
    }
    Ok(g)
}

/// Surrogate `H^p(candidate | current)`.
///
/// `c0` is the anchor used inside `g`; `candidate.c0` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_h(
    candidate: &FactorSet,
    current: &FactorSet,
    tensor: &SparseTemporalTensor,
    c0: &[f64],
    duals: &DualPair,
    b_bar: &Matrix,
    c_bar: &Matrix,
    tau: f64,
    hp: &HyperParams,
) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    check_same_shape("surrogate_h (A)", &candidate.a, &current.a)?;
    check_same_shape("surrogate_h (B)", &candidate.b, &current.b)?;
    check_same_shape("surrogate_h (C)", &candidate.c, &current.c)?;
    let f_t = loss_f(tensor, current)?;
    let grad = grad_f(tensor, current)?;
    let lin = |g: &Matrix, x: &Matrix, x_t: &Matrix| {
        g.as_slice()
            .iter()
            .zip(x.as_slice())
            .zip(x_t.as_slice())
            .map(|((g, x), y)| g * (x - y))
            .sum::<f64>()
    };
    let h = f_t
        + lin(&grad.da, &candidate.a, &current.a)
        + lin(&grad.db, &candidate.b, &current.b)
        + lin(&grad.dc, &candidate.c, &current.c)
        + (candidate.a.dist_sq(&current.a)
            + candidate.b.dist_sq(&current.b)
            + candidate.c.dist_sq(&current.c))
            / (2.0 * tau);
    let anchored = FactorSet {
        a: candidate.a.clone(),
        b: candidate.b.clone(),
        c: candidate.c.clone(),
        c0: c0.to_vec(),
    };
    let g = loss_g(&anchored, hp)?;
    let l = loss_l(&candidate.b, &candidate.c, duals, b_bar, c_bar, hp)?;
    Ok(h + g + l)
}

pub(crate) fn sse_unchecked(
    tensor: &SparseTemporalTensor,
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
) -> (f64, usize) {
    let sse = tensor
        .entries()
        .iter()
        .map(|e| {
            let r = e.value - triple(a.row(e.i as usize), b.row(e.j as usize), c.row(e.k as usize));
            r * r
        })
        .sum();
    (sse, tensor.len())
}

/// Sum of squared residuals and entry count; shapes are checked.
pub fn sum_squared_residuals(
    tensor: &SparseTemporalTensor,
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
) -> Result<(f64, usize)> {
    check_factor_shapes("sum_squared_residuals", tensor, a, b, c)?;
    Ok(sse_unchecked(tensor, a, b, c))
}

/// Root mean squared error of `<A_i, B_j, C_k>` against the stored values.
pub fn rmse(tensor: &SparseTemporalTensor, a: &Matrix, b: &Matrix, c: &Matrix) -> Result<f64> {
    if tensor.is_empty() {
        return Err(Error::EmptyDataset("rmse over an empty entry set".into()));
    }
    let (sse, n) = sum_squared_residuals(tensor, a, b, c)?;
    Ok((sse / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Dims, Entry};

    fn unit_factors(a: f64, b: f64, c: f64) -> FactorSet {
        FactorSet {
            a: Matrix::from_rows(&[vec![a]]),
            b: Matrix::from_rows(&[vec![b]]),
            c: Matrix::from_rows(&[vec![c]]),
            c0: vec![0.0],
        }
    }

    fn zero_hp(rank: usize) -> HyperParams {
        HyperParams::with_rank(rank).lambdas(0.0, 0.0, 0.0, 0.0).rhos(0.0, 0.0)
    }

    #[test]
    fn predict_examples() {
        assert_eq!(predict(&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]).unwrap(), 63.0);
        assert_eq!(predict(&[7.0, -2.0], &[0.0, 0.0], &[5.0, 6.0]).unwrap(), 0.0);
        assert_eq!(predict(&[1.0], &[1.0], &[1.0]).unwrap(), 1.0);
        assert!(predict(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn loss_f_examples() {
        let f = FactorSet {
            a: Matrix::from_rows(&[vec![1.0, 2.0]]),
            b: Matrix::from_rows(&[vec![3.0, 4.0]]),
            c: Matrix::from_rows(&[vec![5.0, 6.0]]),
            c0: vec![0.0, 0.0],
        };
        let d = Dims::new(1, 1, 1);
        let t63 = SparseTemporalTensor::new(d, vec![Entry::new(0, 0, 0, 63.0)]).unwrap();
        let t65 = SparseTemporalTensor::new(d, vec![Entry::new(0, 0, 0, 65.0)]).unwrap();
        assert_eq!(loss_f(&t63, &f).unwrap(), 0.0);
        assert_eq!(loss_f(&t65, &f).unwrap(), 2.0);
        assert_eq!(loss_f(&SparseTemporalTensor::empty(d), &f).unwrap(), 0.0);
        let wrong = SparseTemporalTensor::empty(Dims::new(2, 1, 1));
        assert!(loss_f(&wrong, &f).is_err());
    }

    #[test]
    fn loss_g_examples() {
        let hp = zero_hp(1);
        assert_eq!(loss_g(&unit_factors(0.0, 0.0, 0.0), &hp).unwrap(), 0.0);

        let mut hp_c = zero_hp(1);
        hp_c.lambda_c = 1.0;
        assert_eq!(loss_g(&unit_factors(0.0, 0.0, 2.0), &hp_c).unwrap(), 2.0);

        let mut hp_0 = zero_hp(1);
        hp_0.lambda_0 = 2.0;
        hp_0.mu_c = vec![1.0];
        let mut f = unit_factors(0.0, 0.0, 0.0);
        f.c0 = vec![3.0];
        assert_eq!(loss_g(&f, &hp_0).unwrap(), 4.0);
    }

    #[test]
    fn loss_l_examples() {
        let m = |v: f64| Matrix::from_rows(&[vec![v]]);
        let duals = DualPair {
            theta_b: m(5.0),
            theta_c: m(-3.0),
        };
        let hp = zero_hp(1).rhos(1.0, 1.0);
        assert_eq!(loss_l(&m(2.0), &m(4.0), &duals, &m(2.0), &m(4.0), &hp).unwrap(), 0.0);

        let duals = DualPair {
            theta_b: m(1.0),
            theta_c: m(0.0),
        };
        let hp = zero_hp(1).rhos(0.5, 0.0);
        assert_eq!(loss_l(&m(3.0), &m(0.0), &duals, &m(1.0), &m(0.0), &hp).unwrap(), 3.0);

        let duals = DualPair {
            theta_b: m(0.0),
            theta_c: m(0.0),
        };
        let hp = zero_hp(1).rhos(2.0, 2.0);
        assert_eq!(loss_l(&m(1.0), &m(1.0), &duals, &m(0.0), &m(0.0), &hp).unwrap(), 2.0);
    }

    #[test]
    fn grad_single_entry() {
        let t = SparseTemporalTensor::new(Dims::new(1, 1, 1), vec![Entry::new(0, 0, 0, 0.0)]).unwrap();
        let g = grad_f(&t, &unit_factors(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(g.da.as_slice(), &[1.0]);
        assert_eq!(g.db.as_slice(), &[1.0]);
        assert_eq!(g.dc.as_slice(), &[1.0]);

        let t = SparseTemporalTensor::new(Dims::new(1, 1, 1), vec![Entry::new(0, 0, 0, 6.0)]).unwrap();
        let g = grad_f(&t, &unit_factors(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(g.da.max_abs() + g.db.max_abs() + g.dc.max_abs(), 0.0);
    }

    #[test]
    fn rmse_examples() {
        let d = Dims::new(1, 2, 1);
        let f = FactorSet {
            a: Matrix::from_rows(&[vec![1.0]]),
            b: Matrix::from_rows(&[vec![1.0], vec![1.0]]),
            c: Matrix::from_rows(&[vec![1.0]]),
            c0: vec![0.0],
        };
        let perfect = SparseTemporalTensor::new(d, vec![Entry::new(0, 0, 0, 1.0)]).unwrap();
        assert_eq!(rmse(&perfect, &f.a, &f.b, &f.c).unwrap(), 0.0);
        let one = SparseTemporalTensor::new(d, vec![Entry::new(0, 0, 0, 3.0)]).unwrap();
        assert_eq!(rmse(&one, &f.a, &f.b, &f.c).unwrap(), 2.0);
        let two = SparseTemporalTensor::new(
            d,
            vec![Entry::new(0, 0, 0, 1.0), Entry::new(0, 1, 0, 3.0)],
        )
        .unwrap();
        assert!((rmse(&two, &f.a, &f.b, &f.c).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&SparseTemporalTensor::empty(d), &f.a, &f.b, &f.c).is_err());
    }

    #[test]
    fn surrogate_rejects_non_positive_tau() {
        let f = unit_factors(1.0, 1.0, 1.0);
        let t = SparseTemporalTensor::empty(Dims::new(1, 1, 1));
        let d = DualPair::zeros(1, 1, 1);
        let hp = zero_hp(1);
        assert!(surrogate_h(&f, &f, &t, &[0.0], &d, &f.b, &f.c, 0.0, &hp).is_err());
    }

    #[test]
    fn hyperparams_validation() {
        assert!(HyperParams::with_rank(20).validate().is_ok());
        let mut hp = HyperParams::with_rank(2);
        hp.beta = 1.0;
        assert!(hp.validate().is_err());
        let mut hp = HyperParams::with_rank(2);
        hp.alpha = 1.0;
        assert!(hp.validate().is_err());
        let mut hp = HyperParams::with_rank(2);
        hp.mu_c = vec![0.0];
        assert!(hp.validate().is_err());
    }
}
