//! Test RMSE of every method across 12 initialization seeds, as CSV on stdout.

use temporal_tensor::baselines::SgdParams;
use temporal_tensor::bench::{boxplot_data, gen_synthetic, median, method_samples, write_boxplot_csv, Method, SyntheticConfig};
use temporal_tensor::data::{train_test_split, RatingsConfig};
use temporal_tensor::{EngineConfig, HyperParams};

fn main() -> temporal_tensor::Result<()> {
    let data = gen_synthetic(&SyntheticConfig { i: 30, j: 20, k: 24, rank: 3, density: 0.15, noise_sigma: 0.1, ..Default::default() })?;
    let (train, test) = train_test_split(&data.tensor, &RatingsConfig { test_fraction: 0.2, ..Default::default() })?;

    let mut hp = HyperParams::with_rank(3).lambdas(0.01, 0.01, 1.0, 0.01).tau_schedule(0.1, 0.99, 0.05);
    hp.rmse_threshold = 1e-6;
    let engine = EngineConfig { max_iter: 150, init_scale: 0.5, ..Default::default() };
    let sgd = SgdParams { eta: 0.03, lambda_c: 1.0, max_iter: 150, init_scale: 0.5, rmse_threshold: 1e-6, ..Default::default() };

    let rows = boxplot_data(&train, &test, &hp, &engine, &sgd, 12, 0)?;
    write_boxplot_csv(std::io::stdout().lock(), &rows)?;
    for m in Method::ALL {
        eprintln!("{m}: median test RMSE {:.4}", median(&method_samples(&rows, m)));
    }
    Ok(())
}
