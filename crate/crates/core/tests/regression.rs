//! Values measured once and pinned so behaviour changes show up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use logicmix::dataset::{compute_label_stats, drop_labels, CategoryTable, DatasetEntry, PartialDataset};
use logicmix::labels::TernaryLabel;
use logicmix::pipeline::{draw_plan, LogicMixConfig, MixPlan};
use logicmix::rng::RngStream;
use logicmix::trainer::{run_comparison, ComparisonData, SyntheticSpec, TrainConfig};
use logicmix::variants::Variant;

const MAP_NONE: f64 = 0.996586733839;
const MAP_MIXUP_AN: f64 = 0.996033713534;
const MAP_LOGICMIX: f64 = 0.996633415504;
const MAP_FULLY_LABELED: f64 = 0.996884097242;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn comparison_means_are_pinned() {
    let data = ComparisonData::synthetic(&SyntheticSpec::default()).unwrap();
    let seeds = [0, 1, 2, 3, 4];
    let configs: Vec<TrainConfig> = [Variant::NoAugment, Variant::MixupAn, Variant::LogicMix]
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| TrainConfig::desk(v, s)))
        .collect();
    let report = run_comparison(&configs, &data).unwrap();
    let mean = |v| report.summary_for(v).unwrap().mean_map;
    assert!(close(mean(Variant::NoAugment), MAP_NONE), "{}", mean(Variant::NoAugment));
    assert!(close(mean(Variant::MixupAn), MAP_MIXUP_AN), "{}", mean(Variant::MixupAn));
    assert!(close(mean(Variant::LogicMix), MAP_LOGICMIX), "{}", mean(Variant::LogicMix));
}

#[test]
fn fully_labeled_linear_model_is_accurate() {
    let data = ComparisonData::synthetic(&SyntheticSpec {
        known_proportion: 1.0,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let a = run_comparison(&[TrainConfig::desk(Variant::NoAugment, 0)], &data).unwrap();
    let b = run_comparison(&[TrainConfig::desk(Variant::NoAugment, 0)], &data).unwrap();
    assert_eq!(a, b);
    assert!(a.runs[0].map > 0.9);
    assert!(close(a.runs[0].map, MAP_FULLY_LABELED), "{}", a.runs[0].map);
}

#[test]
fn logicmix_with_s_zero_matches_no_augmentation() {
    let data = ComparisonData::synthetic(&SyntheticSpec {
        n_train: 300,
        n_test: 200,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let mut off = TrainConfig::desk(Variant::LogicMix, 2);
    off.logicmix = Some(LogicMixConfig::new(0.0, 2, 3, 2).unwrap());
    off.epochs = 5;
    let mut none = TrainConfig::desk(Variant::NoAugment, 2);
    none.epochs = 5;
    let r = run_comparison(&[off, none], &data).unwrap();
    assert_eq!(r.runs[0].map, r.runs[1].map);
    assert_eq!(r.runs[0].per_category_ap, r.runs[1].per_category_ap);
}

#[test]
fn plan_counts_are_pinned() {
    let config = LogicMixConfig::new(0.5, 2, 3, 21).unwrap();
    let (mut augmented, mut k2) = (0, 0);
    for t in 0..100_000usize {
        let mut rng = RngStream::for_sample(21, 0, t);
        if let MixPlan::Mix { k, .. } = draw_plan(&config, 100, t % 100, &mut rng).unwrap() {
            augmented += 1;
            k2 += usize::from(k == 2);
        }
    }
    assert_eq!((augmented, k2), (49_888, 25_084));
}

#[test]
fn drop_keeps_the_requested_share() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (n, c) = (1000, 80);
    let entries = (0..n)
        .map(|i| DatasetEntry {
            id: i.to_string(),
            image: None,
            labels: (0..c).map(|_| TernaryLabel::from_bool(rng.random_bool(0.05))).collect(),
        })
        .collect();
    let full = PartialDataset::new(CategoryTable::numbered(c), entries).unwrap();
    for p in [0.1, 0.3, 0.9] {
        let kept = compute_label_stats(&drop_labels(&full, p, 4).unwrap()).unwrap().known_fraction;
        let sd = (p * (1.0 - p) / (n * c) as f64).sqrt();
        assert!((kept - p).abs() < 4.0 * sd, "p={p} kept {kept}");
    }
}
