//! Synthetic fixtures and the benchmark harness (box-plot samples across
//! seeds, speedup across worker counts, per-epoch timing).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::admm::{Engine, EngineConfig};
use crate::baselines::{cp_sgd_train, pttf_sgd_train, SgdParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::objective::{triple, HyperParams};
use crate::report::TrainReport;
use crate::tensor::{Dims, Entry, SparseTemporalTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    P2t2f,
    Pttf,
    Cp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::P2t2f, Method::Pttf, Method::Cp];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::P2t2f => "p2t2f",
            Method::Pttf => "pttf",
            Method::Cp => "cp",
        })
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "p2t2f" => Ok(Method::P2t2f),
            "pttf" => Ok(Method::Pttf),
            "cp" => Ok(Method::Cp),
            other => Err(format!("unknown method {other:?} (expected p2t2f|pttf|cp)")),
        }
    }
}

/// Ground-truth generator: Gaussian `A`, `B`; `C` a Gaussian random walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub rank: usize,
    /// Fraction of the `I·J·K` cells observed, in `(0, 1]`.
    pub density: f64,
    pub noise_sigma: f64,
    /// Step standard deviation of the `C` random walk.
    pub time_smoothness: f64,
    /// Standard deviation of `A`, `B` and of `C_1`.
    pub factor_std: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            i: 50,
            j: 40,
            k: 12,
            rank: 3,
            density: 0.2,
            noise_sigma: 0.0,
            time_smoothness: 0.1,
            factor_std: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub tensor: SparseTemporalTensor,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

fn gaussian(std: f64) -> Option<Normal<f64>> {
    (std > 0.0).then(|| Normal::new(0.0, std).expect("positive finite std"))
}

pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.i == 0 || cfg.j == 0 || cfg.k == 0 || cfg.rank == 0 {
        return Err(Error::InvalidDimension(format!(
            "synthetic sizes must be positive (I={}, J={}, K={}, R={})",
            cfg.i, cfg.j, cfg.k, cfg.rank
        )));
    }
    if !(cfg.density > 0.0 && cfg.density <= 1.0) {
        return Err(Error::InvalidParameter(format!("density must lie in (0, 1], got {}", cfg.density)));
    }
    for (name, v) in [
        ("noise_sigma", cfg.noise_sigma),
        ("time_smoothness", cfg.time_smoothness),
        ("factor_std", cfg.factor_std),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
        }
    }
    let total = cfg.i * cfg.j * cfg.k;
    let n_obs = (cfg.density * total as f64).round() as usize;
    if n_obs == 0 {
        return Err(Error::InvalidParameter(format!(
            "density {} over {total} cells observes nothing",
            cfg.density
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let factor = gaussian(cfg.factor_std);
    let draw = |rows: usize, rng: &mut ChaCha8Rng| {
        let data = (0..rows * cfg.rank)
            .map(|_| factor.map_or(0.0, |d| d.sample(rng)))
            .collect();
        Matrix::from_vec(rows, cfg.rank, data)
    };
    let a = draw(cfg.i, &mut rng);
    let b = draw(cfg.j, &mut rng);
    let mut c = draw(cfg.k, &mut rng);
    let step = gaussian(cfg.time_smoothness);
    for k in 1..cfg.k {
        for n in 0..cfg.rank {
            let prev = c.get(k - 1, n);
            c.set(k, n, prev + step.map_or(0.0, |d| d.sample(&mut rng)));
        }
    }

    let noise = gaussian(cfg.noise_sigma);
    let mut cells = rand::seq::index::sample(&mut rng, total, n_obs).into_vec();
    cells.sort_unstable();
    let jk = cfg.j * cfg.k;
    let entries = cells
        .into_iter()
        .map(|cell| {
            let (i, rem) = (cell / jk, cell % jk);
            let (j, k) = (rem / cfg.k, rem % cfg.k);
            let clean = triple(a.row(i), b.row(j), c.row(k));
            Entry::new(i, j, k, clean + noise.map_or(0.0, |d| d.sample(&mut rng)))
        })
        .collect();
    Ok(SyntheticData {
        tensor: SparseTemporalTensor::new(Dims::new(cfg.i, cfg.j, cfg.k), entries)?,
        a,
        b,
        c,
    })
}

/// Runs one method on a train/test pair.
pub fn run_method(
    method: Method,
    train: &SparseTemporalTensor,
    test: Option<&SparseTemporalTensor>,
    hp: &HyperParams,
    engine: &EngineConfig,
    sgd: &SgdParams,
) -> Result<TrainReport> {
    match method {
        Method::P2t2f => Engine::new(train, test, hp.clone(), engine.clone())?.run(),
        Method::Pttf => pttf_sgd_train(train, test, hp.rank, sgd),
        Method::Cp => cp_sgd_train(train, test, hp.rank, sgd),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotRow {
    pub method: Method,
    pub seed: u64,
    pub test_rmse: f64,
}

/// Final test RMSE of every method for `n_seeds` initializations
/// (`base_seed`, `base_seed + 1`, …) on a fixed split.
pub fn boxplot_data(
    train: &SparseTemporalTensor,
    test: &SparseTemporalTensor,
    hp: &HyperParams,
    engine: &EngineConfig,
    sgd: &SgdParams,
    n_seeds: usize,
    base_seed: u64,
) -> Result<Vec<BoxplotRow>> {
    if n_seeds < 2 {
        return Err(Error::InvalidParameter("box-plot data needs at least 2 seeds".into()));
    }
    if test.is_empty() {
        return Err(Error::EmptyDataset("box-plot data needs a non-empty test set".into()));
    }
    let mut rows = Vec::with_capacity(3 * n_seeds);
    for method in Method::ALL {
        for s in 0..n_seeds as u64 {
            let seed = base_seed + s;
            let engine = EngineConfig { seed, ..engine.clone() };
            let sgd = SgdParams { seed, ..sgd.clone() };
            let report = run_method(method, train, Some(test), hp, &engine, &sgd)?;
            rows.push(BoxplotRow {
                method,
                seed,
                test_rmse: report.final_test_rmse().expect("test set is non-empty"),
            });
        }
    }
    Ok(rows)
}

pub fn write_boxplot_csv<W: Write>(mut w: W, rows: &[BoxplotRow]) -> Result<()> {
    writeln!(w, "method,seed,test_rmse")?;
    for r in rows {
        writeln!(w, "{},{},{:.17e}", r.method, r.seed, r.test_rmse)?;
    }
    Ok(())
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub fn method_samples(rows: &[BoxplotRow], method: Method) -> Vec<f64> {
    rows.iter().filter(|r| r.method == method).map(|r| r.test_rmse).collect()
}

/// `time(P=1) / time(P)`.
pub fn speedup(t1: f64, tp: f64) -> f64 {
    t1 / tp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingMode {
    /// Wall time until train RMSE first reaches the target.
    TargetRmse,
    /// Median per-epoch wall time over a fixed number of epochs.
    EpochTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRecord {
    pub workers: usize,
    pub seconds: f64,
    pub median_epoch_seconds: f64,
    pub iterations: usize,
    pub reached_target: bool,
    pub final_train_rmse: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub target_rmse: Option<f64>,
    pub timing: TimingMode,
    /// True when a target was requested but some run never reached it.
    pub target_unreached: bool,
    pub records: Vec<SpeedupRecord>,
}

/// Epoch wall times of `epochs` engine iterations, without early stopping.
pub fn epoch_times(
    train: &SparseTemporalTensor,
    hp: &HyperParams,
    config: &EngineConfig,
    epochs: usize,
) -> Result<Vec<f64>> {
    let mut engine = Engine::new(train, None, hp.clone(), config.clone())?;
    let mut out = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        out.push(engine.step()?.epoch_seconds);
        engine.advance_tau();
    }
    Ok(out)
}

/// Trains once per worker count with identical seeds and reports speedups.
///
/// With a target, each run stops once train RMSE ≤ target and is timed to
/// that point; if any run misses it within `max_iter`, every run is compared
/// on median epoch time instead and `target_unreached` is set.
pub fn bench_speedup(
    train: &SparseTemporalTensor,
    hp: &HyperParams,
    base: &EngineConfig,
    worker_counts: &[usize],
    target_rmse: Option<f64>,
) -> Result<SpeedupReport> {
    if worker_counts.is_empty() || !worker_counts.contains(&1) {
        return Err(Error::InvalidParameter("worker list must be non-empty and contain 1".into()));
    }
    let mut records = Vec::with_capacity(worker_counts.len());
    for &workers in worker_counts {
        let config = EngineConfig { workers, ..base.clone() };
        let mut engine = Engine::new(train, None, hp.clone(), config)?;
        let mut epochs = Vec::new();
        let mut reached = false;
        let mut seconds = 0.0;
        let mut last_rmse = f64::NAN;
        for _ in 0..base.max_iter {
            let rec = engine.step()?;
            epochs.push(rec.epoch_seconds);
            seconds = rec.seconds;
            last_rmse = rec.train_rmse;
            if target_rmse.is_some_and(|t| rec.train_rmse <= t) {
                reached = true;
                break;
            }
            engine.advance_tau();
        }
        records.push(SpeedupRecord {
            workers,
            seconds,
            median_epoch_seconds: median(&epochs),
            iterations: epochs.len(),
            reached_target: reached,
            final_train_rmse: last_rmse,
            speedup: f64::NAN,
        });
    }
    let target_unreached = target_rmse.is_some() && records.iter().any(|r| !r.reached_target);
    let timing = if target_rmse.is_some() && !target_unreached {
        TimingMode::TargetRmse
    } else {
        TimingMode::EpochTime
    };
    let metric = |r: &SpeedupRecord| match timing {
        TimingMode::TargetRmse => r.seconds,
        TimingMode::EpochTime => r.median_epoch_seconds,
    };
    let base_time = records
        .iter()
        .find(|r| r.workers == 1)
        .map(metric)
        .expect("worker list contains 1");
    for r in &mut records {
        r.speedup = if r.workers == 1 { 1.0 } else { speedup(base_time, metric(r)) };
    }
    Ok(SpeedupReport {
        target_rmse,
        timing,
        target_unreached,
        records,
    })
}
