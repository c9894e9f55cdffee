//! Two-sample Mixup baselines for partially labeled data.
//!
//! Mixup, Wang et al. and Multi-label Mixup first replace unknown labels
//! with negatives ([`assume_negative`]); Mixup-PME keeps unknowns and maps
//! them to 0.5 inside the interpolation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{mix_label_vectors, LabelVector, TernaryLabel};
use crate::mixer::{mix_images, ImageTensor, MixWeights, Sample, ID_SEPARATOR};
use crate::rng::RngStream;

/// Mixup's Beta parameter.
pub const MIXUP_ALPHA: f64 = 0.2;
/// Lower bound of Mixup-PME's uniform λ.
pub const PME_ALPHA: f64 = 0.75;

/// A soft target in `[0, 1]`, or an unknown that the loss masks out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoftLabel {
    Value(f64),
    Unknown,
}

impl SoftLabel {
    pub fn value(self) -> Option<f64> {
        match self {
            SoftLabel::Value(v) => Some(v),
            SoftLabel::Unknown => None,
        }
    }
}

impl From<TernaryLabel> for SoftLabel {
    fn from(l: TernaryLabel) -> Self {
        match l {
            TernaryLabel::Positive => SoftLabel::Value(1.0),
            TernaryLabel::Negative => SoftLabel::Value(0.0),
            TernaryLabel::Unknown => SoftLabel::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelVector(Vec<SoftLabel>);

impl SoftLabelVector {
    pub fn new(values: Vec<SoftLabel>) -> Result<Self> {
        if let Some(v) = values
            .iter()
            .filter_map(|l| l.value())
            .find(|v| !(0.0..=1.0).contains(v))
        {
            return Err(Error::contract(format!("soft label {v} outside [0, 1]")));
        }
        Ok(SoftLabelVector(values))
    }

    pub fn as_slice(&self) -> &[SoftLabel] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&LabelVector> for SoftLabelVector {
    fn from(v: &LabelVector) -> Self {
        SoftLabelVector(v.iter().map(SoftLabel::from).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "mixup-an")]
    MixupAn,
    #[serde(rename = "wang")]
    WangAn,
    #[serde(rename = "ml-mixup")]
    MlMixupAn,
    #[serde(rename = "pme")]
    MixupPme,
    #[serde(rename = "logicmix")]
    LogicMix,
    #[serde(rename = "none")]
    NoAugment,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::NoAugment,
        Variant::MixupAn,
        Variant::WangAn,
        Variant::MlMixupAn,
        Variant::MixupPme,
        Variant::LogicMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::MixupAn => "mixup-an",
            Variant::WangAn => "wang",
            Variant::MlMixupAn => "ml-mixup",
            Variant::MixupPme => "pme",
            Variant::LogicMix => "logicmix",
            Variant::NoAugment => "none",
        }
    }

    /// The α each variant ships with; unused variants get 0.
    pub fn default_alpha(self) -> f64 {
        match self {
            Variant::MixupAn => MIXUP_ALPHA,
            Variant::MixupPme => PME_ALPHA,
            _ => 0.0,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub variant: Variant,
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

impl VariantConfig {
    pub fn new(variant: Variant, alpha: f64, seed: u64) -> Result<Self> {
        let c = VariantConfig {
            variant,
            alpha,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_defaults(variant: Variant, seed: u64) -> Self {
        VariantConfig {
            variant,
            alpha: variant.default_alpha(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.variant {
            Variant::MixupAn if !(self.alpha > 0.0 && self.alpha.is_finite()) => Err(
                Error::contract(format!("Mixup needs alpha > 0, got {}", self.alpha)),
            ),
            Variant::MixupPme if !(0.0..1.0).contains(&self.alpha) => Err(Error::contract(
                format!("Mixup-PME needs 0 <= alpha < 1, got {}", self.alpha),
            )),
            _ => Ok(()),
        }
    }
}

/// Unknown becomes negative; known labels are kept.
pub fn assume_negative(vector: &LabelVector) -> LabelVector {
    vector
        .iter()
        .map(|l| match l {
            TernaryLabel::Unknown => TernaryLabel::Negative,
            known => known,
        })
        .collect()
}

/// Unknown becomes 0.5 (the PME label map).
fn half_for_unknown(l: TernaryLabel) -> f64 {
    match l {
        TernaryLabel::Positive => 1.0,
        TernaryLabel::Negative => 0.0,
        TernaryLabel::Unknown => 0.5,
    }
}

/// `Beta(α, α)` as `X / (X + Y)` with `X, Y ~ Gamma(α, 1)`.
pub fn sample_beta(alpha: f64, rng: &mut RngStream) -> Result<f64> {
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::contract(format!("Beta({alpha}, {alpha}): {e}")))?;
    loop {
        let x = gamma.sample(rng);
        let y = gamma.sample(rng);
        let total = x + y;
        // both draws can underflow to zero for small alpha
        if total > 0.0 {
            return Ok(x / total);
        }
    }
}

fn check_pair(a: &Sample, b: &Sample) -> Result<()> {
    if a.image.shape() != b.image.shape() {
        return Err(Error::dimension(format!(
            "image shapes {:?} and {:?} differ",
            a.image.shape(),
            b.image.shape()
        )));
    }
    if a.labels.len() != b.labels.len() {
        return Err(Error::dimension(format!(
            "label lengths {} and {} differ",
            a.labels.len(),
            b.labels.len()
        )));
    }
    Ok(())
}

fn lerp_images(a: &Sample, b: &Sample, lambda: f64) -> Result<ImageTensor> {
    mix_images(&[&a.image, &b.image], &MixWeights::pair(lambda)?)
}

fn pair_id(a: &Sample, b: &Sample) -> String {
    format!("{}{ID_SEPARATOR}{}", a.id, b.id)
}

fn hard_or_assume_negative(a: &LabelVector, b: &LabelVector) -> Result<LabelVector> {
    mix_label_vectors([&assume_negative(a), &assume_negative(b)])
}

/// Mixup with assume-negative labels at a given `λ`.
pub fn mixup_an_with_lambda(
    a: &Sample,
    b: &Sample,
    lambda: f64,
) -> Result<(ImageTensor, SoftLabelVector)> {
    check_pair(a, b)?;
    let image = lerp_images(a, b, lambda)?;
    let labels = assume_negative(&a.labels)
        .iter()
        .zip(assume_negative(&b.labels).iter())
        .map(|(x, y)| {
            let x = f64::from(u8::from(x == TernaryLabel::Positive));
            let y = f64::from(u8::from(y == TernaryLabel::Positive));
            SoftLabel::Value((lambda * x + (1.0 - lambda) * y).clamp(0.0, 1.0))
        })
        .collect();
    Ok((image, SoftLabelVector::new(labels)?))
}

/// Mixup (AN) with `λ ~ Beta(α, α)`.
pub fn mixup_an(
    a: &Sample,
    b: &Sample,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<(ImageTensor, SoftLabelVector)> {
    check_pair(a, b)?;
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::contract(format!("Mixup needs alpha > 0, got {alpha}")));
    }
    let lambda = sample_beta(alpha, rng)?;
    mixup_an_with_lambda(a, b, lambda)
}

/// Wang et al. mixes on even epochs only.
pub fn wang_enabled(epoch: usize) -> bool {
    epoch.is_multiple_of(2)
}

/// Wang et al. (AN): `λ = 0.5`, hard OR labels, alternating per epoch.
pub fn wang_mix(a: &Sample, b: &Sample, epoch: usize) -> Result<Sample> {
    check_pair(a, b)?;
    if !wang_enabled(epoch) {
        return Ok(a.clone());
    }
    Ok(Sample {
        id: pair_id(a, b),
        image: lerp_images(a, b, 0.5)?,
        labels: hard_or_assume_negative(&a.labels, &b.labels)?,
    })
}

pub fn ml_mixup_with_lambda(a: &Sample, b: &Sample, lambda: f64) -> Result<Sample> {
    check_pair(a, b)?;
    Ok(Sample {
        id: pair_id(a, b),
        image: lerp_images(a, b, lambda)?,
        labels: hard_or_assume_negative(&a.labels, &b.labels)?,
    })
}

/// Multi-label Mixup (AN): `λ ~ U[0, 1]`, hard OR labels.
pub fn ml_mixup(a: &Sample, b: &Sample, rng: &mut RngStream) -> Result<Sample> {
    let lambda: f64 = rng.random_range(0.0..=1.0);
    ml_mixup_with_lambda(a, b, lambda)
}

/// Mixup-PME at a given `λ`. Unknown in `a` stays unknown; otherwise the
/// 0.5-for-unknown interpolation.
pub fn mixup_pme_with_lambda(
    a: &Sample,
    b: &Sample,
    lambda: f64,
) -> Result<(ImageTensor, SoftLabelVector)> {
    check_pair(a, b)?;
    let image = lerp_images(a, b, lambda)?;
    let labels = a
        .labels
        .iter()
        .zip(b.labels.iter())
        .map(|(x, y)| match x {
            TernaryLabel::Unknown => SoftLabel::Unknown,
            _ => SoftLabel::Value(
                (lambda * half_for_unknown(x) + (1.0 - lambda) * half_for_unknown(y))
                    .clamp(0.0, 1.0),
            ),
        })
        .collect();
    Ok((image, SoftLabelVector::new(labels)?))
}

/// Mixup-PME with `λ ~ U[α, 1]`.
pub fn mixup_pme(
    a: &Sample,
    b: &Sample,
    alpha: f64,
    rng: &mut RngStream,
) -> Result<(ImageTensor, SoftLabelVector)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::contract(format!(
            "Mixup-PME needs 0 <= alpha < 1, got {alpha}"
        )));
    }
    let lambda: f64 = rng.random_range(alpha..=1.0);
    mixup_pme_with_lambda(a, b, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::TernaryLabel::{Negative as N, Positive as P, Unknown as U};

    fn sample(id: &str, pixel: f32, labels: Vec<TernaryLabel>) -> Sample {
        Sample::new(
            id,
            ImageTensor::filled(1, 2, 1, pixel).unwrap(),
            LabelVector::new(labels),
        )
    }

    fn values(v: &SoftLabelVector) -> Vec<Option<f64>> {
        v.as_slice().iter().map(|l| l.value()).collect()
    }

    #[test]
    fn assume_negative_examples() {
        let v = LabelVector::new(vec![P, U, N]);
        assert_eq!(assume_negative(&v), LabelVector::new(vec![P, N, N]));
        assert_eq!(
            assume_negative(&LabelVector::filled(3, U)),
            LabelVector::filled(3, N)
        );
        let full = LabelVector::new(vec![P, N, P]);
        assert_eq!(assume_negative(&full), full);
        assert_eq!(assume_negative(&assume_negative(&v)), assume_negative(&v));
    }

    #[test]
    fn mixup_an_forced_lambda() {
        let a = sample("a", 0.0, vec![P, N]);
        let b = sample("b", 1.0, vec![N, P]);
        let (img, labels) = mixup_an_with_lambda(&a, &b, 0.25).unwrap();
        assert_eq!(values(&labels), vec![Some(0.25), Some(0.75)]);
        assert!(img.data().iter().all(|&v| (v - 0.75).abs() < 1e-6));
        // λ weights the first sample: pixels 0 and 1 at λ = 0.25 on a=1.0
        let (img, _) = mixup_an_with_lambda(&b, &a, 0.25).unwrap();
        assert!(img.data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn wang_alternates() {
        let a = sample("a", 0.2, vec![P, U]);
        let b = sample("b", 0.8, vec![N, N]);
        let on = wang_mix(&a, &b, 0).unwrap();
        assert_eq!(on.labels, LabelVector::new(vec![P, N]));
        assert!(on.image.data().iter().all(|&v| (v - 0.5).abs() < 1e-6));
        assert_eq!(wang_mix(&a, &b, 1).unwrap(), a);
        assert!(wang_mix(&a, &b, 2).unwrap().id == "a+b");
    }

    #[test]
    fn ml_mixup_forced_lambda() {
        let a = sample("a", 1.0, vec![U, P]);
        let b = sample("b", 0.0, vec![N, N]);
        let m = ml_mixup_with_lambda(&a, &b, 0.7).unwrap();
        assert!(m.image.data().iter().all(|&v| (v - 0.7).abs() < 1e-6));
        assert_eq!(m.labels, LabelVector::new(vec![N, P]));
    }

    #[test]
    fn pme_gating_and_half_map() {
        let a = sample("a", 0.0, vec![U, P]);
        for other in [P, N, U] {
            let b = sample("b", 1.0, vec![other, U]);
            let (_, labels) = mixup_pme_with_lambda(&a, &b, 0.8).unwrap();
            assert_eq!(labels.as_slice()[0], SoftLabel::Unknown);
            let v = labels.as_slice()[1].value().unwrap();
            assert!((v - 0.9).abs() < 1e-12);
        }
        // swapping the pair changes which positions are unknown
        let x = sample("x", 0.0, vec![U]);
        let y = sample("y", 0.0, vec![P]);
        let (_, xy) = mixup_pme_with_lambda(&x, &y, 0.8).unwrap();
        let (_, yx) = mixup_pme_with_lambda(&y, &x, 0.8).unwrap();
        assert_eq!(xy.as_slice()[0], SoftLabel::Unknown);
        assert!((yx.as_slice()[0].value().unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = sample("a", 0.0, vec![P]);
        let b = Sample::new("b", ImageTensor::filled(2, 2, 1, 0.0).unwrap(), LabelVector::new(vec![P]));
        let mut rng = RngStream::new(0, 0);
        assert!(matches!(mixup_an(&a, &b, 0.2, &mut rng), Err(Error::Dimension(_))));
        assert!(matches!(wang_mix(&a, &b, 1), Err(Error::Dimension(_))));
        assert!(matches!(ml_mixup(&a, &b, &mut rng), Err(Error::Dimension(_))));
        assert!(matches!(mixup_pme(&a, &b, 0.75, &mut rng), Err(Error::Dimension(_))));
    }

    #[test]
    fn variant_config_validation() {
        assert!(VariantConfig::new(Variant::MixupAn, 0.0, 0).is_err());
        assert!(VariantConfig::new(Variant::MixupPme, 1.0, 0).is_err());
        assert!(VariantConfig::new(Variant::MixupPme, 0.75, 0).is_ok());
        assert!(VariantConfig::new(Variant::LogicMix, 0.0, 0).is_ok());
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("frob".parse::<Variant>().is_err());
    }

    #[test]
    fn lambda_draws() {
        let n = 100_000;
        let mut rng = RngStream::new(2024, 0);
        let mean_beta = (0..n).map(|_| sample_beta(0.2, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean_beta - 0.5).abs() < 0.01, "{mean_beta}");

        let a = sample("a", 0.0, vec![P]);
        let b = sample("b", 1.0, vec![N]);
        let mut sum = 0.0;
        for _ in 0..n {
            // pixel of λ·0 + (1 − λ)·1 recovers 1 − λ
            let m = ml_mixup(&a, &b, &mut rng).unwrap();
            sum += 1.0 - f64::from(m.image.data()[0]);
        }
        let mean_uniform = sum / n as f64;
        assert!((mean_uniform - 0.5).abs() < 0.005, "{mean_uniform}");
    }
}
