//! Compares the ADMM trainer against serial CP and temporal (PTTF) SGD on a
//! long, sparse, smoothly drifting tensor.

use temporal_tensor::baselines::SgdParams;
use temporal_tensor::bench::{gen_synthetic, run_method, Method, SyntheticConfig};
use temporal_tensor::data::{train_test_split, RatingsConfig};
use temporal_tensor::{EngineConfig, HyperParams, UpdateMode};

fn main() -> temporal_tensor::Result<()> {
    let data = gen_synthetic(&SyntheticConfig {
        i: 10,
        j: 10,
        k: 100,
        rank: 3,
        density: 0.05,
        noise_sigma: 0.1,
        seed: 7,
        ..Default::default()
    })?;
    let (train, test) =
        train_test_split(&data.tensor, &RatingsConfig { test_fraction: 0.2, split_seed: 7, ..Default::default() })?;

    let mut hp = HyperParams::with_rank(3).lambdas(0.01, 0.01, 1.0, 0.01).tau_schedule(0.3, 0.99, 0.15);
    hp.rmse_threshold = 1e-6;
    let engine = EngineConfig { workers: 1, mode: UpdateMode::Stochastic, max_iter: 300, seed: 0, init_scale: 0.5 };
    let temporal = SgdParams {
        eta: 0.1,
        lambda_a: 0.01,
        lambda_b: 0.01,
        lambda_c: 1.0,
        lambda_0: 0.01,
        max_iter: 300,
        init_scale: 0.5,
        rmse_threshold: 1e-6,
        ..SgdParams::default()
    };
    // CP has no chain; its lambda_c is a plain ridge on C.
    let cp = SgdParams { eta: 0.01, lambda_c: 0.01, ..temporal.clone() };

    for (method, sgd) in [(Method::P2t2f, &temporal), (Method::Pttf, &temporal), (Method::Cp, &cp)] {
        let report = run_method(method, &train, Some(&test), &hp, &engine, sgd)?;
        println!(
            "{method:>6}: train RMSE {:.4}  test RMSE {:.4}  ({} iterations)",
            report.final_train_rmse(),
            report.final_test_rmse().unwrap(),
            report.iterations.len()
        );
    }
    Ok(())
}
