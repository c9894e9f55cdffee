//! Applies the LogicMix pipeline to a toy dataset and shows which samples
//! were mixed.
//!
//! cargo run --example logicmix_pipeline

use logicmix::labels::{LabelVector, TernaryLabel::*};
use logicmix::mixer::{ImageTensor, Sample};
use logicmix::pipeline::{LogicMix, LogicMixConfig};

fn main() -> logicmix::Result<()> {
    let labels = [
        vec![Positive, Unknown, Negative],
        vec![Negative, Positive, Unknown],
        vec![Unknown, Negative, Positive],
        vec![Negative, Negative, Negative],
        vec![Positive, Positive, Unknown],
    ];
    let samples: Vec<Sample> = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            let image = ImageTensor::filled(2, 2, 3, i as f32 / 4.0)?;
            Ok(Sample::new(format!("img{i}"), image, LabelVector::new(l)))
        })
        .collect::<logicmix::Result<_>>()?;

    let pipeline = LogicMix::new(LogicMixConfig::new(0.5, 2, 3, 7)?)?;
    for epoch in 0..2 {
        println!("epoch {epoch}");
        for (i, s) in samples.iter().enumerate() {
            let mut rng = pipeline.stream(epoch, i);
            let out = pipeline.apply(s.clone(), i, samples.as_slice(), &mut rng)?;
            println!("  {:<16} {}  pixel {:.3}", out.id, out.labels, out.image.data()[0]);
        }
    }
    Ok(())
}
