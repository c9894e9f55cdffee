//! Epoch time of a worker-pool loader with and without LogicMix.
//!
//! cargo run --release --example loader_throughput

use logicmix::bench::{run_bench_grid, BenchConfig};

fn main() -> logicmix::Result<()> {
    let config = BenchConfig {
        samples_per_epoch: 512,
        repetitions: 2,
        ..BenchConfig::default()
    };
    let table = run_bench_grid(&config, &[1, 2, 4], &[2, 4])?;
    print!("{}", table.to_text());
    Ok(())
}
