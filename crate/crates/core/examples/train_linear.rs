//! Trains one linear model with LogicMix and curriculum labeling on a
//! synthetic task with half of the labels hidden.
//!
//! cargo run --release --example train_linear

use logicmix::curriculum::CurriculumConfig;
use logicmix::trainer::{evaluate, train, ComparisonData, SyntheticSpec, TrainConfig};
use logicmix::variants::Variant;

fn main() -> logicmix::Result<()> {
    let data = ComparisonData::synthetic(&SyntheticSpec::default())?;
    for curriculum in [None, Some(CurriculumConfig::coco())] {
        let config = TrainConfig {
            curriculum,
            ..TrainConfig::desk(Variant::LogicMix, 0)
        };
        let model = train(&config, &data.train_samples, &data.train)?;
        let metrics = evaluate(&model, &data.test_features, &data.test_truth)?;
        println!(
            "curriculum {:<5} mAP {:.2}%",
            curriculum.is_some(),
            100.0 * metrics.mean_ap
        );
    }
    Ok(())
}
