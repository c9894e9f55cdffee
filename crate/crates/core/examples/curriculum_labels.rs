//! Pseudo-labels from confident logits, visible for exactly one epoch.
//!
//! cargo run --example curriculum_labels

use logicmix::curriculum::{compose_epoch_view, generate_pseudo_labels, CurriculumConfig};
use logicmix::dataset::{CategoryTable, DatasetEntry, PartialDataset};
use logicmix::labels::{LabelVector, TernaryLabel::*};
use logicmix::matrix::Matrix;

fn main() -> logicmix::Result<()> {
    let dataset = PartialDataset::new(
        CategoryTable::new(vec!["person".into(), "car".into(), "dog".into()])?,
        vec![
            DatasetEntry { id: "x".into(), image: None, labels: LabelVector::new(vec![Unknown, Positive, Unknown]) },
            DatasetEntry { id: "y".into(), image: None, labels: LabelVector::new(vec![Negative, Unknown, Unknown]) },
        ],
    )?;
    let logits = Matrix::from_rows(&[vec![3.1, -4.0, 0.3], vec![2.5, -2.7, 1.9]])?;
    let set = generate_pseudo_labels(&logits, &dataset, &CurriculumConfig::coco(), 4)?;
    println!("{} pseudo-labels generated after epoch 4", set.len());
    for epoch in 4..=6 {
        let view = compose_epoch_view(&dataset, Some(&set), epoch);
        println!("epoch {epoch}: x = {}  y = {}", view.labels(0), view.labels(1));
    }
    Ok(())
}
