//! Simulates a known-label proportion, saves the result as JSONL and
//! compares label counts before and after augmentation.
//!
//! cargo run --example partial_labels

use logicmix::dataset::{
    compute_label_stats, drop_labels, estimate_augmented_stats, read_labels_jsonl, write_labels_jsonl,
};
use logicmix::pipeline::LogicMixConfig;
use logicmix::trainer::make_synthetic_dataset;

fn main() -> logicmix::Result<()> {
    let full = make_synthetic_dataset(2000, 20, 16, 1)?.dataset;
    let partial = drop_labels(&full, 0.3, 2)?;

    let dir = std::env::temp_dir().join("logicmix-partial-labels");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("labels.jsonl");
    write_labels_jsonl(&partial, &path)?;
    let reloaded = read_labels_jsonl(&path)?;
    println!("wrote and reread {} samples at {}", reloaded.len(), path.display());

    let before = compute_label_stats(&reloaded)?;
    let after = estimate_augmented_stats(&reloaded, &LogicMixConfig::coco(), 100_000, 3)?;
    println!("                   positives  negatives  unknowns");
    for (name, s) in [("original", before), ("augmented K=2..3", after)] {
        println!(
            "{name:<18} {:>9.3}  {:>9.3}  {:>8.3}",
            s.mean_positives_per_sample, s.mean_negatives_per_sample, s.mean_unknowns_per_sample
        );
    }
    Ok(())
}
