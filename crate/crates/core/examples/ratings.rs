//! Loads a MovieLens-style `userId,movieId,rating,timestamp` file into a
//! (user, item, month) tensor and trains on it.
//!
//! `cargo run --release --example ratings -- path/to/ratings.csv`
//!
//! Without an argument a small simulated ratings file is written to the
//! system temp directory and used instead.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use temporal_tensor::data::{dataset_summary, load_ratings, train_test_split, RatingsConfig};
use temporal_tensor::{train, EngineConfig, HyperParams};

fn simulated_ratings() -> std::io::Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (users, items, rank) = (300, 400, 3);
    let taste: Vec<f64> = (0..users * rank).map(|_| rng.random_range(-0.6..0.6)).collect();
    let genre: Vec<f64> = (0..items * rank).map(|_| rng.random_range(-0.6..0.6)).collect();
    let start = 1_262_304_000i64; // 2010-01-01
    let mut csv = String::from("userId,movieId,rating,timestamp\n");
    for u in 0..users {
        let count = rng.random_range(20..80);
        for m in rand::seq::index::sample(&mut rng, items, count) {
            let ts = start + rng.random_range(0..3 * 365 * 86_400);
            let drift = 1.0 + 0.3 * ((ts - start) as f64 / 3e7).sin();
            let affinity: f64 = (0..rank).map(|r| taste[u * rank + r] * genre[m * rank + r]).sum();
            let raw = 3.5 + 4.0 * drift * affinity + rng.random_range(-0.5..0.5);
            let stars = (raw * 2.0).round().clamp(1.0, 10.0) / 2.0;
            writeln!(csv, "{u},{m},{stars},{ts}").unwrap();
        }
    }
    let path = std::env::temp_dir().join("ttf-simulated-ratings.csv");
    std::fs::write(&path, csv)?;
    Ok(path)
}

fn main() -> temporal_tensor::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => simulated_ratings()?,
    };
    let cfg = RatingsConfig::default();
    let loaded = load_ratings(&path, &cfg)?;
    let (train_set, test_set) = train_test_split(&loaded.tensor, &cfg)?;
    let summary = dataset_summary(&train_set, &test_set)?;
    println!(
        "{}: {} users x {} items x {} months, {} train / {} test",
        path.display(),
        summary.i,
        summary.j,
        summary.k,
        summary.train_count,
        summary.test_count
    );
    println!(
        "months {} .. {}",
        loaded.months.id_of(0).unwrap_or("?"),
        loaded.months.id_of(loaded.months.len() - 1).unwrap_or("?")
    );

    let mut hp = HyperParams::with_rank(10).lambdas(0.05, 0.05, 3.0, 0.05).tau_schedule(0.01, 0.99, 0.002);
    hp.rmse_threshold = 1e-4;
    let engine = EngineConfig { workers: 4, max_iter: 500, init_scale: 0.5, ..Default::default() };
    let report = train(&train_set, Some(&test_set), hp, engine)?;
    println!(
        "{} iterations, converged {}, train RMSE {:.4}, test RMSE {:.4}",
        report.iterations.len(),
        report.converged,
        report.final_train_rmse(),
        report.final_test_rmse().unwrap_or(f64::NAN)
    );
    Ok(())
}
