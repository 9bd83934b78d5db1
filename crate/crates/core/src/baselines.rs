//! Sequential SGD comparators: plain CP and temporal (chained) factorization.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::admm::{converged, stream_seed, update_c0};
use crate::error::{Error, Result};
use crate::factors::{init_factors, FactorSet};
use crate::objective::{grad_f, loss_f, loss_g, sse_unchecked, triple, GradientSet, HyperParams};
use crate::report::{IterationRecord, TrainReport};
use crate::tensor::{Entry, SparseTemporalTensor};

/// SGD settings shared by both baselines.
///
/// The CP model uses `lambda_c` as a plain ridge weight on `C`; the temporal
/// model uses it as the weight of the `‖C_k − C_{k−1}‖²` chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdParams {
    pub eta: f64,
    /// Per-epoch learning-rate decay: `η_t = η·decay^t`.
    pub eta_decay: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_c: f64,
    pub lambda_0: f64,
    /// Prior mean of `C_0`; empty means zero.
    pub mu_c: Vec<f64>,
    pub max_iter: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub rmse_threshold: f64,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self {
            eta: 0.01,
            eta_decay: 0.99,
            lambda_a: 0.01,
            lambda_b: 0.01,
            lambda_c: 0.01,
            lambda_0: 0.01,
            mu_c: Vec::new(),
            max_iter: 100,
            seed: 0,
            init_scale: 0.1,
            rmse_threshold: 1e-4,
        }
    }
}

impl SgdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.eta_decay > 0.0 && self.eta_decay <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta_decay must lie in (0, 1], got {}",
                self.eta_decay
            )));
        }
        for (name, v) in [
            ("lambda_a", self.lambda_a),
            ("lambda_b", self.lambda_b),
            ("lambda_c", self.lambda_c),
            ("lambda_0", self.lambda_0),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    fn hyper_params(&self, rank: usize) -> HyperParams {
        let mut hp = HyperParams::with_rank(rank).lambdas(self.lambda_a, self.lambda_b, self.lambda_c, self.lambda_0);
        if self.mu_c.len() == rank {
            hp.mu_c = self.mu_c.clone();
        }
        hp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    Cp,
    Temporal,
}

/// One CP-SGD step on a single entry (Jacobi: all rows use pre-update values).
pub fn cp_sgd_step(e: &Entry, f: &mut FactorSet, eta: f64, p: &SgdParams) -> f64 {
    let mut scratch = vec![0.0; 3 * f.rank()];
    sgd_step(Model::Cp, e, f, eta, p, &mut scratch)
}

/// One temporal-SGD step on a single entry.
pub fn pttf_sgd_step(e: &Entry, f: &mut FactorSet, eta: f64, p: &SgdParams) -> f64 {
    let mut scratch = vec![0.0; 3 * f.rank()];
    sgd_step(Model::Temporal, e, f, eta, p, &mut scratch)
}

#[inline]
fn sgd_step(model: Model, e: &Entry, f: &mut FactorSet, eta: f64, p: &SgdParams, scratch: &mut [f64]) -> f64 {
    let r = f.c0.len();
    let (i, j, k) = (e.i as usize, e.j as usize, e.k as usize);
    let (a_old, rest) = scratch.split_at_mut(r);
    let (b_old, c_old) = rest.split_at_mut(r);
    a_old.copy_from_slice(f.a.row(i));
    b_old.copy_from_slice(f.b.row(j));
    c_old.copy_from_slice(f.c.row(k));
    let eps = e.value - triple(a_old, b_old, c_old);

    for (n, a) in f.a.row_mut(i).iter_mut().enumerate() {
        *a += eta * (eps * b_old[n] * c_old[n] - p.lambda_a * a_old[n]);
    }
    for (n, b) in f.b.row_mut(j).iter_mut().enumerate() {
        *b += eta * (eps * a_old[n] * c_old[n] - p.lambda_b * b_old[n]);
    }
    let last = f.c.rows() - 1;
    for n in 0..r {
        let penalty = match model {
            Model::Cp => c_old[n],
            Model::Temporal => {
                let prev = if k == 0 { f.c0[n] } else { f.c.get(k - 1, n) };
                let mut d = c_old[n] - prev;
                if k < last {
                    d += c_old[n] - f.c.get(k + 1, n);
                }
                d
            }
        };
        let v = c_old[n] + eta * (eps * a_old[n] * b_old[n] - p.lambda_c * penalty);
        f.c.set(k, n, v);
    }
    eps
}

/// `½Σε² + λ_A/2‖A‖² + λ_B/2‖B‖² + λ_C/2‖C‖²`.
pub fn cp_objective(tensor: &SparseTemporalTensor, f: &FactorSet, p: &SgdParams) -> Result<f64> {
    Ok(loss_f(tensor, f)?
        + 0.5 * (p.lambda_a * f.a.frobenius_sq() + p.lambda_b * f.b.frobenius_sq() + p.lambda_c * f.c.frobenius_sq()))
}

pub fn cp_gradient(tensor: &SparseTemporalTensor, f: &FactorSet, p: &SgdParams) -> Result<GradientSet> {
    let mut g = grad_f(tensor, f)?;
    g.da.axpy(p.lambda_a, &f.a);
    g.db.axpy(p.lambda_b, &f.b);
    g.dc.axpy(p.lambda_c, &f.c);
    Ok(g)
}

/// `f + g` on unsplit factors (the sequential temporal objective).
pub fn pttf_objective(tensor: &SparseTemporalTensor, f: &FactorSet, p: &SgdParams) -> Result<f64> {
    let hp = p.hyper_params(f.rank());
    Ok(loss_f(tensor, f)? + loss_g(f, &hp)?)
}

/// Full gradient of [`pttf_objective`]; the second value is `∂/∂C_0`.
pub fn pttf_gradient(tensor: &SparseTemporalTensor, f: &FactorSet, p: &SgdParams) -> Result<(GradientSet, Vec<f64>)> {
    let hp = p.hyper_params(f.rank());
    let mut g = grad_f(tensor, f)?;
    g.da.axpy(p.lambda_a, &f.a);
    g.db.axpy(p.lambda_b, &f.b);
    let kk = f.c.rows();
    for k in 0..kk {
        for n in 0..f.rank() {
            let prev = if k == 0 { f.c0[n] } else { f.c.get(k - 1, n) };
            let mut d = f.c.get(k, n) - prev;
            if k + 1 < kk {
                d -= f.c.get(k + 1, n) - f.c.get(k, n);
            }
            g.dc.set(k, n, g.dc.get(k, n) + p.lambda_c * d);
        }
    }
    let dc0 = (0..f.rank())
        .map(|n| -p.lambda_c * (f.c.get(0, n) - f.c0[n]) + p.lambda_0 * (f.c0[n] - hp.mu_c[n]))
        .collect();
    Ok((g, dc0))
}

fn sgd_train(
    model: Model,
    train: &SparseTemporalTensor,
    test: Option<&SparseTemporalTensor>,
    rank: usize,
    params: &SgdParams,
) -> Result<TrainReport> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training tensor has no entries".into()));
    }
    let dims = train.dims();
    if let Some(t) = test {
        if t.dims() != dims {
            return Err(crate::error::shape_err("test tensor dims", dims, t.dims()));
        }
    }
    let hp = params.hyper_params(rank);
    let mut f = init_factors(dims.i, dims.j, dims.k, rank, params.seed, params.init_scale)?;
    let mut order: Vec<Entry> = train.entries().to_vec();
    let mut scratch = vec![0.0; 3 * rank];
    let refresh_c0 = model == Model::Temporal && params.lambda_0 + params.lambda_c > 0.0;

    let mut records = Vec::new();
    let mut history = Vec::new();
    let mut clock = Duration::ZERO;
    let mut done = false;
    let mut eta = params.eta;
    for epoch in 0..params.max_iter {
        let started = Instant::now();
        if refresh_c0 {
            f.c0 = update_c0(f.c.row(0), &hp)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(params.seed, 0, epoch as u64));
        order.shuffle(&mut rng);
        for e in &order {
            sgd_step(model, e, &mut f, eta, params, &mut scratch);
        }
        let (sse, n) = sse_unchecked(train, &f.a, &f.b, &f.c);
        let test_rmse = test
            .filter(|t| !t.is_empty())
            .map(|t| {
                let (s, n) = sse_unchecked(t, &f.a, &f.b, &f.c);
                (s / n as f64).sqrt()
            });
        let objective = match model {
            Model::Cp => cp_objective(train, &f, params)?,
            Model::Temporal => pttf_objective(train, &f, params)?,
        };
        let elapsed = started.elapsed();
        clock += elapsed;
        let train_rmse = (sse / n as f64).sqrt();
        if !objective.is_finite() || !train_rmse.is_finite() {
            return Err(Error::Divergence { iteration: epoch + 1 });
        }
        records.push(IterationRecord {
            iter: epoch + 1,
            train_rmse,
            test_rmse,
            objective,
            tau: eta,
            seconds: clock.as_secs_f64(),
            epoch_seconds: elapsed.as_secs_f64(),
            local_objective_before: None,
            local_objective_after: None,
        });
        history.push(train_rmse);
        if converged(&history, params.rmse_threshold) {
            done = true;
            break;
        }
        eta *= params.eta_decay;
    }
    let method = match model {
        Model::Cp => "cp",
        Model::Temporal => "pttf",
    };
    Ok(TrainReport {
        config: json!({ "method": method, "rank": rank, "sgd": params }),
        iterations: records,
        converged: done,
        a: f.a,
        b: f.b,
        c: f.c,
    })
}

/// Sequential SGD for the plain CP model.
pub fn cp_sgd_train(
    train: &SparseTemporalTensor,
    test: Option<&SparseTemporalTensor>,
    rank: usize,
    params: &SgdParams,
) -> Result<TrainReport> {
    sgd_train(Model::Cp, train, test, rank, params)
}

/// Sequential SGD for the temporal model; `C_0` is refreshed once per epoch.
pub fn pttf_sgd_train(
    train: &SparseTemporalTensor,
    test: Option<&SparseTemporalTensor>,
    rank: usize,
    params: &SgdParams,
) -> Result<TrainReport> {
    sgd_train(Model::Temporal, train, test, rank, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn scalar_factors(a: f64, b: f64, c: f64) -> FactorSet {
        FactorSet {
            a: Matrix::from_rows(&[vec![a]]),
            b: Matrix::from_rows(&[vec![b]]),
            c: Matrix::from_rows(&[vec![c]]),
            c0: vec![0.0],
        }
    }

    fn no_reg() -> SgdParams {
        SgdParams {
            lambda_a: 0.0,
            lambda_b: 0.0,
            lambda_c: 0.0,
            lambda_0: 0.0,
            ..SgdParams::default()
        }
    }

    #[test]
    fn zero_residual_changes_nothing() {
        let mut f = scalar_factors(1.0, 2.0, 3.0);
        let before = f.clone();
        cp_sgd_step(&Entry::new(0, 0, 0, 6.0), &mut f, 0.1, &no_reg());
        assert_eq!(f, before);
    }

    #[test]
    fn jacobi_arithmetic() {
        let mut f = scalar_factors(2.0, 1.0, 1.0);
        cp_sgd_step(&Entry::new(0, 0, 0, 3.0), &mut f, 0.1, &no_reg());
        assert!((f.a.get(0, 0) - 2.1).abs() < 1e-15);
        assert!((f.b.get(0, 0) - 1.2).abs() < 1e-15);
        assert!((f.c.get(0, 0) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn temporal_step_without_chain_matches_cp() {
        let p = SgdParams {
            lambda_c: 0.0,
            lambda_0: 0.0,
            ..SgdParams::default()
        };
        let mut x = scalar_factors(0.3, -0.7, 1.1);
        let mut y = x.clone();
        cp_sgd_step(&Entry::new(0, 0, 0, 2.0), &mut x, 0.05, &p);
        pttf_sgd_step(&Entry::new(0, 0, 0, 2.0), &mut y, 0.05, &p);
        assert_eq!(x, y);
    }

    #[test]
    fn flat_chain_with_zero_residual_is_fixed() {
        let p = SgdParams {
            lambda_c: 0.5,
            ..no_reg()
        };
        let mut f = FactorSet {
            a: Matrix::from_rows(&[vec![1.0]]),
            b: Matrix::from_rows(&[vec![2.0]]),
            c: Matrix::from_rows(&[vec![1.5], vec![1.5], vec![1.5]]),
            c0: vec![1.5],
        };
        let before = f.clone();
        pttf_sgd_step(&Entry::new(0, 0, 1, 3.0), &mut f, 0.1, &p);
        assert_eq!(f, before);
    }

    #[test]
    fn rejects_bad_rate() {
        let p = SgdParams {
            eta: 0.0,
            ..SgdParams::default()
        };
        assert!(p.validate().is_err());
    }
}
