//! Wall-clock speedup of 2 and 4 workers over 1 on a generated tensor.
//! Run with `--release`; results depend on the number of available cores.

use temporal_tensor::bench::{bench_speedup, gen_synthetic, SyntheticConfig};
use temporal_tensor::{EngineConfig, HyperParams};

fn main() -> temporal_tensor::Result<()> {
    let data = gen_synthetic(&SyntheticConfig { i: 2000, j: 1000, k: 24, rank: 5, density: 0.01, noise_sigma: 0.1, seed: 5, ..Default::default() })?;
    println!(
        "{} entries, {} core(s) available",
        data.tensor.len(),
        std::thread::available_parallelism().map_or(1, |n| n.get())
    );

    let base = EngineConfig { max_iter: 5, ..Default::default() };
    let report = bench_speedup(&data.tensor, &HyperParams::with_rank(10), &base, &[1, 2, 4], None)?;
    println!("workers,median_epoch_seconds,speedup");
    for r in &report.records {
        println!("{},{:.4},{:.2}", r.workers, r.median_epoch_seconds, r.speedup);
    }
    Ok(())
}
