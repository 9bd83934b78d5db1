//! Recovers a planted low-rank temporal tensor with the parallel ADMM trainer
//! and writes the report and factors to `target/example-train/`.

use temporal_tensor::bench::{gen_synthetic, SyntheticConfig};
use temporal_tensor::{train, EngineConfig, HyperParams, UpdateMode};

fn main() -> temporal_tensor::Result<()> {
    let data = gen_synthetic(&SyntheticConfig {
        i: 40,
        j: 30,
        k: 12,
        rank: 3,
        density: 0.3,
        noise_sigma: 0.0,
        seed: 1,
        ..Default::default()
    })?;

    let mut hp = HyperParams::with_rank(3).lambdas(1e-3, 1e-3, 1e-3, 1e-3).tau_schedule(0.03, 0.99, 0.02);
    hp.rmse_threshold = 1e-6;
    let cfg = EngineConfig { workers: 4, mode: UpdateMode::Stochastic, max_iter: 300, seed: 0, init_scale: 0.5 };
    let report = train(&data.tensor, None, hp, cfg)?;

    for rec in report.iterations.iter().step_by(20) {
        println!("iter {:>3}  train RMSE {:.5}  tau {:.4}", rec.iter, rec.train_rmse, rec.tau);
    }
    println!(
        "stopped after {} iterations (converged: {}), train RMSE {:.5}",
        report.iterations.len(),
        report.converged,
        report.final_train_rmse()
    );

    let out = std::path::Path::new("target/example-train");
    std::fs::create_dir_all(out)?;
    report.write_json(out.join("report.json"))?;
    report.write_factors(out)?;
    println!("wrote {}", out.display());
    Ok(())
}
