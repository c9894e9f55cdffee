//! Three-valued OR over partial labels.
//!
//! cargo run --example label_algebra

use logicmix::labels::{enumerate_completions, mix_label_vectors, LabelVector, TernaryLabel};

fn main() -> logicmix::Result<()> {
    println!("OR truth table (1 present, 0 absent, ? unknown):");
    for a in TernaryLabel::ALL {
        for b in TernaryLabel::ALL {
            println!("  {a} | {b} = {}", a.or(b));
        }
    }

    let cat = LabelVector::from_iter([TernaryLabel::Positive, TernaryLabel::Negative, TernaryLabel::Unknown]);
    let dog = LabelVector::from_iter([TernaryLabel::Negative, TernaryLabel::Negative, TernaryLabel::Positive]);
    let mixed = mix_label_vectors([&cat, &dog])?;
    println!("\n{cat} mixed with {dog} -> {mixed}");

    // every full labeling consistent with the inputs agrees with the known outputs
    for bits in enumerate_completions(&cat)? {
        println!("  completion of the first vector: {bits:?}");
    }
    println!("serialized: {}", serde_json::to_string(&mixed)?);
    Ok(())
}
