//! Partitions a tensor by user rows and shows what each worker owns.
//!
//! `cargo run --example split_tensor -- 4`

use temporal_tensor::bench::{gen_synthetic, SyntheticConfig};
use temporal_tensor::split_tensor;

fn main() -> temporal_tensor::Result<()> {
    let workers: usize = std::env::args().nth(1).map_or(4, |s| s.parse().expect("worker count"));
    let data = gen_synthetic(&SyntheticConfig { i: 23, j: 10, k: 6, density: 0.3, ..Default::default() })?;
    let part = split_tensor(&data.tensor, workers)?;

    println!("{} entries over {} users, {} workers", data.tensor.len(), data.tensor.dims().i, part.workers());
    for (p, block) in part.blocks.iter().enumerate() {
        let (first, last) = block.row_range();
        println!("worker {p}: rows {first}..={last} ({} rows, {} entries)", block.rows(), block.subtensor.len());
    }
    assert_eq!(part.merge().len(), data.tensor.len());
    Ok(())
}
