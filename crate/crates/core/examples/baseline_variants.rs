//! The Mixup baselines on one pair of partially labeled samples.
//!
//! cargo run --example baseline_variants

use logicmix::labels::{LabelVector, TernaryLabel::*};
use logicmix::mixer::{ImageTensor, Sample};
use logicmix::rng::RngStream;
use logicmix::variants::{
    ml_mixup, mixup_an, mixup_pme, wang_mix, SoftLabel, SoftLabelVector, MIXUP_ALPHA, PME_ALPHA,
};

fn show(v: &SoftLabelVector) -> String {
    v.as_slice()
        .iter()
        .map(|l| match l {
            SoftLabel::Value(x) => format!("{x:.2}"),
            SoftLabel::Unknown => "?".into(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> logicmix::Result<()> {
    let a = Sample::new("a", ImageTensor::filled(1, 1, 1, 1.0)?, LabelVector::new(vec![Positive, Unknown, Negative]));
    let b = Sample::new("b", ImageTensor::filled(1, 1, 1, 0.0)?, LabelVector::new(vec![Unknown, Positive, Negative]));
    let mut rng = RngStream::new(3, 0);

    let (_, an) = mixup_an(&a, &b, MIXUP_ALPHA, &mut rng)?;
    println!("mixup-an   {}", show(&an));
    println!("wang even  {}", wang_mix(&a, &b, 0)?.labels);
    println!("wang odd   {}", wang_mix(&a, &b, 1)?.labels);
    println!("ml-mixup   {}", ml_mixup(&a, &b, &mut rng)?.labels);
    let (_, pme) = mixup_pme(&a, &b, PME_ALPHA, &mut rng)?;
    println!("pme        {}", show(&pme));
    Ok(())
}
