//! Trains a linear classifier on a synthetic partially labeled task with
//! each augmentation variant and prints mean ± sd mAP over a few seeds.
//!
//! cargo run --release --example compare_variants -- [seeds]

use logicmix::trainer::{comparison_grid, run_comparison, ComparisonData, SyntheticSpec};
use logicmix::variants::Variant;

fn main() -> logicmix::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let data = ComparisonData::synthetic(&SyntheticSpec::default())?;
    let seeds: Vec<u64> = (0..seeds).collect();
    let report = run_comparison(&comparison_grid(&Variant::ALL, &seeds), &data)?;
    print!("{}", report.to_table());
    Ok(())
}
