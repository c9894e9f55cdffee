//! Curriculum labeling: confident logits on unknown labels become
//! pseudo-labels for exactly one following epoch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::PartialDataset;
use crate::error::{Error, Result};
use crate::labels::{LabelVector, TernaryLabel};
use crate::matrix::Matrix;

/// Pre-sigmoid scores, one row per sample and one column per category.
pub type LogitMatrix = Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    pub theta_plus: f64,
    pub theta_minus: f64,
}

impl CurriculumConfig {
    pub fn new(theta_plus: f64, theta_minus: f64) -> Result<Self> {
        let c = CurriculumConfig {
            theta_plus,
            theta_minus,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn coco() -> Self {
        CurriculumConfig {
            theta_plus: 2.0,
            theta_minus: -2.0,
        }
    }

    pub fn vg200() -> Self {
        CurriculumConfig {
            theta_plus: 2.0,
            theta_minus: -1.0,
        }
    }

    pub fn voc() -> Self {
        CurriculumConfig {
            theta_plus: 2.5,
            theta_minus: -1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_plus.is_nan() || self.theta_minus.is_nan() {
            return Err(Error::contract("curriculum thresholds must not be NaN"));
        }
        if self.theta_minus >= self.theta_plus {
            return Err(Error::contract(format!(
                "need theta_minus < theta_plus, got {} >= {}",
                self.theta_minus, self.theta_plus
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabelSet {
    entries: BTreeMap<(usize, usize), bool>,
    generated_epoch: usize,
}

impl PseudoLabelSet {
    pub fn generated_epoch(&self) -> usize {
        self.generated_epoch
    }

    pub fn get(&self, sample: usize, category: usize) -> Option<bool> {
        self.entries.get(&(sample, category)).copied()
    }

    /// `((sample, category), label)` in sample-major order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), bool)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, label: bool) -> usize {
        self.entries.values().filter(|&&v| v == label).count()
    }
}

/// Pseudo-labels for the unknown positions whose logit is strictly above
/// `theta_plus` (positive) or strictly below `theta_minus` (negative).
pub fn generate_pseudo_labels(
    logits: &LogitMatrix,
    dataset: &PartialDataset,
    config: &CurriculumConfig,
    epoch: usize,
) -> Result<PseudoLabelSet> {
    config.validate()?;
    if logits.rows() != dataset.len() || logits.cols() != dataset.num_categories() {
        return Err(Error::contract(format!(
            "logits are {}x{}, dataset is {}x{}",
            logits.rows(),
            logits.cols(),
            dataset.len(),
            dataset.num_categories()
        )));
    }
    if logits.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("logits must be finite"));
    }
    let mut entries = BTreeMap::new();
    for (i, entry) in dataset.entries().iter().enumerate() {
        for (c, label) in entry.labels.iter().enumerate() {
            if label.is_known() {
                continue;
            }
            let p = logits.get(i, c);
            if p > config.theta_plus {
                entries.insert((i, c), true);
            } else if p < config.theta_minus {
                entries.insert((i, c), false);
            }
        }
    }
    Ok(PseudoLabelSet {
        entries,
        generated_epoch: epoch,
    })
}

/// Labels as seen during one epoch: the dataset's own labels, with the
/// pseudo-labels of the previous epoch filled in.
#[derive(Debug, Clone, Copy)]
pub struct EpochView<'a> {
    dataset: &'a PartialDataset,
    pseudo: Option<&'a PseudoLabelSet>,
}

impl<'a> EpochView<'a> {
    pub fn label(&self, sample: usize, category: usize) -> TernaryLabel {
        let own = self.dataset.labels(sample).as_slice()[category];
        self.pseudo
            .and_then(|p| p.get(sample, category))
            .map_or(own, TernaryLabel::from_bool)
    }

    pub fn labels(&self, sample: usize) -> LabelVector {
        let own = self.dataset.labels(sample);
        match self.pseudo {
            None => own.clone(),
            Some(_) => (0..own.len()).map(|c| self.label(sample, c)).collect(),
        }
    }

    pub fn has_pseudo_labels(&self) -> bool {
        self.pseudo.is_some()
    }
}

/// Pseudo-labels are visible only when `current_epoch` is the epoch right
/// after the one they were generated in.
pub fn compose_epoch_view<'a>(
    dataset: &'a PartialDataset,
    pseudo: Option<&'a PseudoLabelSet>,
    current_epoch: usize,
) -> EpochView<'a> {
    let pseudo = pseudo.filter(|p| current_epoch == p.generated_epoch + 1);
    EpochView { dataset, pseudo }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CategoryTable, DatasetEntry};
    use crate::labels::TernaryLabel::{Negative as N, Positive as P, Unknown as U};

    fn data() -> PartialDataset {
        PartialDataset::new(
            CategoryTable::numbered(4),
            vec![DatasetEntry {
                id: "x".into(),
                image: None,
                labels: LabelVector::new(vec![U, U, U, P]),
            }],
        )
        .unwrap()
    }

    fn logits(values: &[f64]) -> LogitMatrix {
        Matrix::from_vec(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn thresholds() {
        let d = data();
        let set =
            generate_pseudo_labels(&logits(&[2.5, -3.0, 0.0, 5.0]), &d, &CurriculumConfig::coco(), 5)
                .unwrap();
        assert_eq!(set.get(0, 0), Some(true));
        assert_eq!(set.get(0, 1), Some(false));
        assert_eq!(set.get(0, 2), None);
        assert_eq!(set.get(0, 3), None);
        assert_eq!(set.len(), 2);

        // ties at either threshold generate nothing
        let ties =
            generate_pseudo_labels(&logits(&[2.0, -2.0, 0.0, 0.0]), &d, &CurriculumConfig::coco(), 0)
                .unwrap();
        assert!(ties.is_empty());
    }

    #[test]
    fn errors() {
        assert!(CurriculumConfig::new(-1.0, 1.0).is_err());
        assert!(CurriculumConfig::new(1.0, 1.0).is_err());
        let d = data();
        assert!(generate_pseudo_labels(&logits(&[0.0; 3]), &d, &CurriculumConfig::coco(), 0).is_err());
        assert!(
            generate_pseudo_labels(&logits(&[f64::NAN, 0.0, 0.0, 0.0]), &d, &CurriculumConfig::coco(), 0)
                .is_err()
        );
    }

    #[test]
    fn lifecycle() {
        let d = data();
        let set =
            generate_pseudo_labels(&logits(&[2.5, -3.0, 0.0, 5.0]), &d, &CurriculumConfig::coco(), 5)
                .unwrap();
        let next = compose_epoch_view(&d, Some(&set), 6);
        assert_eq!(next.labels(0), LabelVector::new(vec![P, N, U, P]));
        let later = compose_epoch_view(&d, Some(&set), 7);
        assert_eq!(later.labels(0), LabelVector::new(vec![U, U, U, P]));
        let same = compose_epoch_view(&d, Some(&set), 5);
        assert_eq!(same.label(0, 0), U);
        let none = compose_epoch_view(&d, None, 6);
        assert_eq!(none.labels(0), *d.labels(0));
    }
}
