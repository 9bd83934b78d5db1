//! Consensus-ADMM training with surrogate-based local updates.
//!
//! Each iteration runs three bulk-synchronous phases:
//!
//! 1. **local** (parallel): every worker refreshes `C_0^p`, then either makes
//!    one shuffled pass of per-entry proximal updates over its slab
//!    (stochastic mode) or takes one closed-form surrogate step (batch mode);
//! 2. **consensus** (single-threaded): `B̄`, `C̄` become the worker averages;
//! 3. **dual + metrics** (parallel): `Θ^p += ρ(local − global)`, and each
//!    worker reports its squared residuals and `L^p`.
//!
//! `τ` is held fixed within an iteration and decayed after the convergence
//! check. Workers never share mutable state; the consensus matrices are
//! read-only while workers run.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{shape_err, Error, Result};
use crate::factors::{init_factors, FactorSet};
use crate::matrix::Matrix;
use crate::objective::{grad_f, local_lagrangian, sse_unchecked, triple, DualPair, HyperParams};
use crate::report::{IterationRecord, TrainReport};
use crate::tensor::{split_tensor, Entry, SparseTemporalTensor};
use crate::tridiag::build_q;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    Stochastic,
    Batch,
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateMode::Stochastic => "stochastic",
            UpdateMode::Batch => "batch",
        })
    }
}

impl FromStr for UpdateMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "stochastic" => Ok(UpdateMode::Stochastic),
            "batch" => Ok(UpdateMode::Batch),
            other => Err(format!("unknown mode {other:?} (expected stochastic|batch)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub workers: usize,
    pub mode: UpdateMode,
    pub max_iter: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian factor initialization.
    pub init_scale: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            mode: UpdateMode::Stochastic,
            max_iter: 100,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

/// Global matrices `B̄`, `C̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub b_bar: Matrix,
    pub c_bar: Matrix,
}

/// Everything worker `p` owns exclusively.
#[derive(Debug, Clone)]
pub struct WorkerState {
    pub index: usize,
    pub row_offset: usize,
    pub block: SparseTemporalTensor,
    pub test_block: SparseTemporalTensor,
    pub factors: FactorSet,
    pub duals: DualPair,
}

impl WorkerState {
    /// Starts a worker with zero duals, checking factor shapes against `block`.
    pub fn new(index: usize, row_offset: usize, block: SparseTemporalTensor, factors: FactorSet) -> Result<Self> {
        let d = block.dims();
        let r = factors.rank();
        if factors.a.shape() != (d.i, r) || factors.b.shape() != (d.j, r) || factors.c.shape() != (d.k, r) {
            return Err(shape_err(
                "worker factors",
                format!("A {}x{r}, B {}x{r}, C {}x{r}", d.i, d.j, d.k),
                format!("{:?} {:?} {:?}", factors.a.shape(), factors.b.shape(), factors.c.shape()),
            ));
        }
        Ok(Self {
            index,
            row_offset,
            test_block: SparseTemporalTensor::empty(d),
            duals: DualPair::zeros(d.j, d.k, r),
            block,
            factors,
        })
    }
}

/// `C_0 ← (λ_C·C_1 + λ_0·μ_C) / (λ_0 + λ_C)`, the exact minimizer of `L^p` in `C_0`.
pub fn update_c0(c1: &[f64], hp: &HyperParams) -> Result<Vec<f64>> {
    let denom = hp.lambda_0 + hp.lambda_c;
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter(
            "C0 update needs lambda_0 + lambda_c > 0".into(),
        ));
    }
    if c1.len() != hp.mu_c.len() {
        return Err(shape_err("update_c0", hp.mu_c.len(), c1.len()));
    }
    Ok(c1
        .iter()
        .zip(&hp.mu_c)
        .map(|(c, m)| (hp.lambda_c * c + hp.lambda_0 * m) / denom)
        .collect())
}

/// Elementwise means of the local `(B^p, C^p)` pairs.
pub fn consensus_average<'a, I>(locals: I) -> Result<ConsensusState>
where
    I: IntoIterator<Item = (&'a Matrix, &'a Matrix)>,
{
    let mut it = locals.into_iter();
    let (b0, c0) = it
        .next()
        .ok_or_else(|| Error::InvalidParameter("consensus over zero workers".into()))?;
    let mut b_bar = b0.clone();
    let mut c_bar = c0.clone();
    let mut count = 1usize;
    for (b, c) in it {
        if b.shape() != b_bar.shape() || c.shape() != c_bar.shape() {
            return Err(shape_err(
                "consensus_average",
                format!("{:?}/{:?}", b_bar.shape(), c_bar.shape()),
                format!("{:?}/{:?}", b.shape(), c.shape()),
            ));
        }
        b_bar.axpy(1.0, b);
        c_bar.axpy(1.0, c);
        count += 1;
    }
    let inv = 1.0 / count as f64;
    b_bar.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
    c_bar.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
    Ok(ConsensusState { b_bar, c_bar })
}

fn ascend(duals: &mut DualPair, b: &Matrix, c: &Matrix, consensus: &ConsensusState, hp: &HyperParams) -> Result<()> {
    if b.shape() != consensus.b_bar.shape()
        || c.shape() != consensus.c_bar.shape()
        || duals.theta_b.shape() != b.shape()
        || duals.theta_c.shape() != c.shape()
    {
        return Err(shape_err(
            "dual_update",
            format!("{:?}/{:?}", consensus.b_bar.shape(), consensus.c_bar.shape()),
            format!("{:?}/{:?}", b.shape(), c.shape()),
        ));
    }
    let step = |theta: &mut Matrix, local: &Matrix, global: &Matrix, rho: f64| {
        for ((t, l), g) in theta
            .as_mut_slice()
            .iter_mut()
            .zip(local.as_slice())
            .zip(global.as_slice())
        {
            *t += rho * (l - g);
        }
    };
    step(&mut duals.theta_b, b, &consensus.b_bar, hp.rho_b);
    step(&mut duals.theta_c, c, &consensus.c_bar, hp.rho_c);
    Ok(())
}

/// Dual ascent: `Θ_B += ρ_B(B^p − B̄)`, `Θ_C += ρ_C(C^p − C̄)`.
pub fn dual_update(
    factors: &FactorSet,
    duals: &DualPair,
    consensus: &ConsensusState,
    hp: &HyperParams,
) -> Result<DualPair> {
    let mut next = duals.clone();
    ascend(&mut next, &factors.b, &factors.c, consensus, hp)?;
    Ok(next)
}

/// Per-iteration constants of the stochastic rule.
#[derive(Debug, Clone, Copy)]
struct EntryCoefficients {
    tau: f64,
    inv_tau: f64,
    shrink_a: f64,
    denom_b: f64,
    denom_c_inner: f64,
    denom_c_last: f64,
    rho_b: f64,
    rho_c: f64,
    lambda_c: f64,
}

impl EntryCoefficients {
    fn new(tau: f64, hp: &HyperParams) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        let inv_tau = 1.0 / tau;
        Ok(Self {
            tau,
            inv_tau,
            shrink_a: 1.0 / (1.0 + hp.lambda_a * tau),
            denom_b: inv_tau + hp.lambda_b + hp.rho_b,
            denom_c_inner: inv_tau + 2.0 * hp.lambda_c + hp.rho_c,
            denom_c_last: inv_tau + hp.lambda_c + hp.rho_c,
            rho_b: hp.rho_b,
            rho_c: hp.rho_c,
            lambda_c: hp.lambda_c,
        })
    }
}

/// Jacobi update of `A_i`, `B_j`, `C_k` from one entry; returns the residual.
#[inline]
fn update_entry(
    e: &Entry,
    f: &mut FactorSet,
    duals: &DualPair,
    consensus: &ConsensusState,
    k_coef: &EntryCoefficients,
    scratch: &mut [f64],
) -> f64 {
    let r = f.c0.len();
    let (i, j, k) = (e.i as usize, e.j as usize, e.k as usize);
    let (a_old, rest) = scratch.split_at_mut(r);
    let (b_old, c_old) = rest.split_at_mut(r);
    a_old.copy_from_slice(f.a.row(i));
    b_old.copy_from_slice(f.b.row(j));
    c_old.copy_from_slice(f.c.row(k));
    let eps = e.value - triple(a_old, b_old, c_old);

    let c = k_coef;
    for (n, a) in f.a.row_mut(i).iter_mut().enumerate() {
        *a = (a_old[n] + c.tau * eps * b_old[n] * c_old[n]) * c.shrink_a;
    }

    let b_bar = consensus.b_bar.row(j);
    let th_b = duals.theta_b.row(j);
    for (n, b) in f.b.row_mut(j).iter_mut().enumerate() {
        *b = (b_old[n] * c.inv_tau + c.rho_b * b_bar[n] - th_b[n] + eps * a_old[n] * c_old[n]) / c.denom_b;
    }

    let last = f.c.rows() - 1;
    let c_bar = consensus.c_bar.row(k);
    let th_c = duals.theta_c.row(k);
    let denom = if k == last { c.denom_c_last } else { c.denom_c_inner };
    for n in 0..r {
        let prev = if k == 0 { f.c0[n] } else { f.c.get(k - 1, n) };
        let next = if k == last { 0.0 } else { f.c.get(k + 1, n) };
        let v = (c_old[n] * c.inv_tau + c.rho_c * c_bar[n] + c.lambda_c * (prev + next) - th_c[n]
            + eps * a_old[n] * b_old[n])
            / denom;
        f.c.set(k, n, v);
    }
    eps
}

/// Applies the per-entry proximal update for one observation.
///
/// All three rows are computed from their pre-update values. At `k = K` the
/// missing right neighbour drops out and the chain weight in the denominator
/// is `λ_C` rather than `2λ_C`; at `k = 1` the left neighbour is `C_0`.
pub fn stochastic_update_entry(
    entry: &Entry,
    factors: &mut FactorSet,
    duals: &DualPair,
    consensus: &ConsensusState,
    tau: f64,
    hp: &HyperParams,
) -> Result<f64> {
    let coef = EntryCoefficients::new(tau, hp)?;
    let (i, j, k) = (entry.i as usize, entry.j as usize, entry.k as usize);
    if i >= factors.a.rows() || j >= factors.b.rows() || k >= factors.c.rows() {
        return Err(shape_err(
            "stochastic_update_entry",
            format!("indices within {}x{}x{}", factors.a.rows(), factors.b.rows(), factors.c.rows()),
            format!("({i}, {j}, {k})"),
        ));
    }
    let mut scratch = vec![0.0; 3 * factors.rank()];
    Ok(update_entry(entry, factors, duals, consensus, &coef, &mut scratch))
}

/// Closed-form minimizer of the surrogate `H^p` around `factors`.
///
/// `A` and `B` are row-wise scalings; `C` solves `Q·C = RHS` with
/// `Q = (1/τ + ρ_C)I + λ_C·S` by tridiagonal elimination. `factors.c0` is
/// used as the chain anchor and carried through unchanged.
pub fn batch_update_factors(
    block: &SparseTemporalTensor,
    factors: &FactorSet,
    duals: &DualPair,
    consensus: &ConsensusState,
    tau: f64,
    hp: &HyperParams,
) -> Result<FactorSet> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let grad = grad_f(block, factors)?;
    if consensus.b_bar.shape() != factors.b.shape() || consensus.c_bar.shape() != factors.c.shape() {
        return Err(shape_err(
            "batch_update_factors",
            format!("{:?}/{:?}", factors.b.shape(), factors.c.shape()),
            format!("{:?}/{:?}", consensus.b_bar.shape(), consensus.c_bar.shape()),
        ));
    }
    let inv_tau = 1.0 / tau;

    let mut a = factors.a.clone();
    let shrink = 1.0 / (1.0 + hp.lambda_a * tau);
    for (x, g) in a.as_mut_slice().iter_mut().zip(grad.da.as_slice()) {
        *x = (*x - tau * g) * shrink;
    }

    let mut b = factors.b.clone();
    let denom_b = inv_tau + hp.lambda_b + hp.rho_b;
    for (((x, bar), th), g) in b
        .as_mut_slice()
        .iter_mut()
        .zip(consensus.b_bar.as_slice())
        .zip(duals.theta_b.as_slice())
        .zip(grad.db.as_slice())
    {
        *x = (*x * inv_tau + hp.rho_b * bar - th - g) / denom_b;
    }

    let mut c = factors.c.clone();
    for (((x, bar), th), g) in c
        .as_mut_slice()
        .iter_mut()
        .zip(consensus.c_bar.as_slice())
        .zip(duals.theta_c.as_slice())
        .zip(grad.dc.as_slice())
    {
        *x = *x * inv_tau + hp.rho_c * bar - th - g;
    }
    for (x, anchor) in c.row_mut(0).iter_mut().zip(&factors.c0) {
        *x += hp.lambda_c * anchor;
    }
    build_q(c.rows(), tau, hp.rho_c, hp.lambda_c)?.solve_in_place(&mut c)?;

    Ok(FactorSet {
        a,
        b,
        c,
        c0: factors.c0.clone(),
    })
}

/// Geometric decay `τ·β`, floored at `α`; once at or below `α`, `τ` is frozen.
pub fn tau_next(tau: f64, hp: &HyperParams) -> f64 {
    if tau <= hp.alpha {
        tau
    } else {
        (tau * hp.beta).max(hp.alpha)
    }
}

/// True once the last two train RMSEs differ by less than `threshold`.
pub fn converged(history: &[f64], threshold: f64) -> bool {
    match history {
        [.., prev, last] => (last - prev).abs() < threshold,
        _ => false,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent RNG stream per (run seed, worker, iteration).
pub(crate) fn stream_seed(seed: u64, worker: u64, iteration: u64) -> u64 {
    splitmix64(seed ^ splitmix64(worker.wrapping_mul(0x1000_0000_01B3) ^ splitmix64(iteration)))
}

/// Runs `f` on every worker, one OS thread per worker when `P > 1`.
fn for_each_worker<T, F>(workers: &mut [WorkerState], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut WorkerState) -> Result<T> + Sync,
{
    if workers.len() == 1 {
        return workers.iter_mut().map(&f).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = workers
            .iter_mut()
            .map(|w| {
                let f = &f;
                s.spawn(move || f(w))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Objective values around one batch local step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalStepOutcome {
    pub objective_before: Option<f64>,
    pub objective_after: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct WorkerMetrics {
    train_sse: f64,
    train_n: usize,
    test_sse: f64,
    test_n: usize,
    lagrangian: f64,
}

/// Stateful trainer exposing each phase of an iteration.
#[derive(Debug, Clone)]
pub struct Engine {
    hp: HyperParams,
    config: EngineConfig,
    workers: Vec<WorkerState>,
    consensus: ConsensusState,
    tau: f64,
    iteration: usize,
    clock: Duration,
    has_test: bool,
}

impl Engine {
    /// Splits the data, initializes factors, zeroes the duals and forms the
    /// initial consensus.
    ///
    /// Factors are drawn once for the whole tensor and then sliced, so every
    /// worker starts from the same `B`, `C`, `C_0` regardless of `P`.
    pub fn new(
        train: &SparseTemporalTensor,
        test: Option<&SparseTemporalTensor>,
        hp: HyperParams,
        config: EngineConfig,
    ) -> Result<Self> {
        hp.validate()?;
        if config.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if train.is_empty() {
            return Err(Error::EmptyDataset("training tensor has no entries".into()));
        }
        let dims = train.dims();
        if let Some(t) = test {
            if t.dims() != dims {
                return Err(shape_err("test tensor dims", dims, t.dims()));
            }
        }
        let partition = split_tensor(train, config.workers)?;
        let test_blocks = match test {
            Some(t) => split_tensor(t, config.workers)?
                .blocks
                .into_iter()
                .map(|b| b.subtensor)
                .collect(),
            None => partition
                .blocks
                .iter()
                .map(|b| SparseTemporalTensor::empty(b.subtensor.dims()))
                .collect::<Vec<_>>(),
        };
        let global = init_factors(dims.i, dims.j, dims.k, hp.rank, config.seed, config.init_scale)?;
        let mut workers = Vec::with_capacity(config.workers);
        for (p, (block, test_block)) in partition.blocks.into_iter().zip(test_blocks).enumerate() {
            let factors = FactorSet {
                a: global.a.slice_rows(block.row_offset, block.rows()),
                b: global.b.clone(),
                c: global.c.clone(),
                c0: global.c0.clone(),
            };
            let mut w = WorkerState::new(p, block.row_offset, block.subtensor, factors)?;
            w.test_block = test_block;
            workers.push(w);
        }
        let consensus = consensus_average(workers.iter().map(|w| (&w.factors.b, &w.factors.c)))?;
        Ok(Self {
            tau: hp.tau0,
            hp,
            config,
            workers,
            consensus,
            iteration: 0,
            clock: Duration::ZERO,
            has_test: test.is_some_and(|t| !t.is_empty()),
        })
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    pub fn consensus(&self) -> &ConsensusState {
        &self.consensus
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// `A = [A¹; A²; …; A^P]`.
    pub fn stacked_a(&self) -> Matrix {
        Matrix::vstack(self.workers.iter().map(|w| &w.factors.a))
    }

    /// `(Σ_p Θ_B^p, Σ_p Θ_C^p)`.
    pub fn dual_sums(&self) -> (Matrix, Matrix) {
        let first = &self.workers[0].duals;
        let mut sb = Matrix::zeros(first.theta_b.rows(), first.theta_b.cols());
        let mut sc = Matrix::zeros(first.theta_c.rows(), first.theta_c.cols());
        for w in &self.workers {
            sb.axpy(1.0, &w.duals.theta_b);
            sc.axpy(1.0, &w.duals.theta_c);
        }
        (sb, sc)
    }

    /// Global objective `L = Σ_p L^p` at the current state.
    pub fn global_objective(&self) -> Result<f64> {
        self.workers
            .iter()
            .map(|w| {
                local_lagrangian(
                    &w.block,
                    &w.factors,
                    &w.duals,
                    &self.consensus.b_bar,
                    &self.consensus.c_bar,
                    &self.hp,
                )
            })
            .sum()
    }

    /// Phase 1: `C_0` refresh plus one local factor update on every worker.
    pub fn local_phase(&mut self) -> Result<LocalStepOutcome> {
        let hp = &self.hp;
        let consensus = &self.consensus;
        let tau = self.tau;
        let mode = self.config.mode;
        let seed = self.config.seed;
        let iteration = self.iteration as u64;
        let coef = EntryCoefficients::new(tau, hp)?;
        let refresh_c0 = hp.lambda_0 + hp.lambda_c > 0.0;

        let outcomes = for_each_worker(&mut self.workers, |w| {
            let before = if mode == UpdateMode::Batch {
                Some(local_lagrangian(&w.block, &w.factors, &w.duals, &consensus.b_bar, &consensus.c_bar, hp)?)
            } else {
                None
            };
            if refresh_c0 {
                w.factors.c0 = update_c0(w.factors.c.row(0), hp)?;
            }
            match mode {
                UpdateMode::Stochastic => {
                    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, w.index as u64, iteration));
                    w.block.entries_mut().shuffle(&mut rng);
                    let mut scratch = vec![0.0; 3 * hp.rank];
                    for e in w.block.entries() {
                        update_entry(e, &mut w.factors, &w.duals, consensus, &coef, &mut scratch);
                    }
                    Ok((None, None))
                }
                UpdateMode::Batch => {
                    w.factors = batch_update_factors(&w.block, &w.factors, &w.duals, consensus, tau, hp)?;
                    let after =
                        local_lagrangian(&w.block, &w.factors, &w.duals, &consensus.b_bar, &consensus.c_bar, hp)?;
                    Ok((before, Some(after)))
                }
            }
        })?;
        Ok(LocalStepOutcome {
            objective_before: outcomes.iter().map(|o| o.0).sum(),
            objective_after: outcomes.iter().map(|o| o.1).sum(),
        })
    }

    /// Phase 2: `B̄ ← mean(B^p)`, `C̄ ← mean(C^p)`.
    pub fn consensus_phase(&mut self) -> Result<()> {
        self.consensus = consensus_average(self.workers.iter().map(|w| (&w.factors.b, &w.factors.c)))?;
        Ok(())
    }

    /// Phase 3 without metrics.
    pub fn dual_phase(&mut self) -> Result<()> {
        self.dual_phase_with_metrics().map(|_| ())
    }

    fn dual_phase_with_metrics(&mut self) -> Result<WorkerMetrics> {
        let hp = &self.hp;
        let consensus = &self.consensus;
        let per_worker = for_each_worker(&mut self.workers, |w| {
            ascend(&mut w.duals, &w.factors.b, &w.factors.c, consensus, hp)?;
            let (train_sse, train_n) = sse_unchecked(&w.block, &w.factors.a, &consensus.b_bar, &consensus.c_bar);
            let (test_sse, test_n) = sse_unchecked(&w.test_block, &w.factors.a, &consensus.b_bar, &consensus.c_bar);
            let lagrangian =
                local_lagrangian(&w.block, &w.factors, &w.duals, &consensus.b_bar, &consensus.c_bar, hp)?;
            Ok(WorkerMetrics {
                train_sse,
                train_n,
                test_sse,
                test_n,
                lagrangian,
            })
        })?;
        Ok(per_worker.into_iter().fold(WorkerMetrics::default(), |acc, m| WorkerMetrics {
            train_sse: acc.train_sse + m.train_sse,
            train_n: acc.train_n + m.train_n,
            test_sse: acc.test_sse + m.test_sse,
            test_n: acc.test_n + m.test_n,
            lagrangian: acc.lagrangian + m.lagrangian,
        }))
    }

    /// One full iteration (local, consensus, dual); `τ` is not decayed here.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let started = Instant::now();
        self.iteration += 1;
        let local = self.local_phase()?;
        self.consensus_phase()?;
        let m = self.dual_phase_with_metrics()?;
        let elapsed = started.elapsed();
        self.clock += elapsed;

        let train_rmse = (m.train_sse / m.train_n as f64).sqrt();
        let test_rmse = (self.has_test && m.test_n > 0).then(|| (m.test_sse / m.test_n as f64).sqrt());
        if !m.lagrangian.is_finite() || !train_rmse.is_finite() {
            return Err(Error::Divergence {
                iteration: self.iteration,
            });
        }
        Ok(IterationRecord {
            iter: self.iteration,
            train_rmse,
            test_rmse,
            objective: m.lagrangian,
            tau: self.tau,
            seconds: self.clock.as_secs_f64(),
            epoch_seconds: elapsed.as_secs_f64(),
            local_objective_before: local.objective_before,
            local_objective_after: local.objective_after,
        })
    }

    /// Decays `τ` once, as at the end of an iteration.
    pub fn advance_tau(&mut self) {
        self.tau = tau_next(self.tau, &self.hp);
    }

    pub fn report_config(&self) -> serde_json::Value {
        json!({
            "method": "p2t2f",
            "mode": self.config.mode,
            "workers": self.config.workers,
            "max_iter": self.config.max_iter,
            "seed": self.config.seed,
            "init_scale": self.config.init_scale,
            "hyper_params": self.hp,
        })
    }

    /// Iterates until the train-RMSE convergence test passes or `max_iter` is hit.
    pub fn run(mut self) -> Result<TrainReport> {
        let mut records = Vec::new();
        let mut history = Vec::new();
        let mut done = false;
        for _ in 0..self.config.max_iter {
            let rec = self.step()?;
            history.push(rec.train_rmse);
            records.push(rec);
            if converged(&history, self.hp.rmse_threshold) {
                done = true;
                break;
            }
            self.advance_tau();
        }
        Ok(TrainReport {
            config: self.report_config(),
            iterations: records,
            converged: done,
            a: self.stacked_a(),
            b: self.consensus.b_bar,
            c: self.consensus.c_bar,
        })
    }
}

/// Trains the parallel model end to end.
pub fn train(
    train: &SparseTemporalTensor,
    test: Option<&SparseTemporalTensor>,
    hp: HyperParams,
    config: EngineConfig,
) -> Result<TrainReport> {
    Engine::new(train, test, hp, config)?.run()
}
