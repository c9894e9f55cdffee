//! A desk-scale multi-label trainer used to compare augmentation variants.
//!
//! The model is a linear layer over flattened image intensities trained by
//! minibatch SGD on a masked asymmetric loss. Evaluation is mean average
//! precision on a fully labeled held-out split.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curriculum::{compose_epoch_view, generate_pseudo_labels, CurriculumConfig, LogitMatrix};
use crate::dataset::{drop_labels, image_paths, load_image, read_labels_jsonl, CategoryTable, DatasetEntry, PartialDataset};
use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::matrix::Matrix;
use crate::mixer::{ImageTensor, Sample};
use crate::pipeline::{LogicMix, LogicMixConfig};
use crate::rng::RngStream;
use crate::variants::{
    assume_negative, mixup_an, mixup_pme, ml_mixup, wang_mix, SoftLabel, SoftLabelVector, Variant, VariantConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `D × C`
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(dim: usize, classes: usize) -> Self {
        LinearModel {
            weights: Matrix::zeros(dim, classes),
            biases: vec![0.0; classes],
        }
    }

    /// Weights from `N(0, scale²)`, zero biases.
    pub fn random(dim: usize, classes: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = LinearModel::zeros(dim, classes);
        for w in m.weights.as_mut_slice() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = scale * z;
        }
        m
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.weights.cols()
    }
}

/// `features · weights + biases`.
pub fn forward(model: &LinearModel, features: &Matrix) -> Result<LogitMatrix> {
    if features.cols() != model.input_dim() {
        return Err(Error::dimension(format!(
            "features have {} columns, model expects {}",
            features.cols(),
            model.input_dim()
        )));
    }
    let (n, d, c) = (features.rows(), model.input_dim(), model.num_classes());
    let mut out = Matrix::zeros(n, c);
    for r in 0..n {
        let x = features.row(r);
        let o = out.row_mut(r);
        o.copy_from_slice(&model.biases);
        for (k, &xk) in x.iter().enumerate().take(d) {
            if xk == 0.0 {
                continue;
            }
            for (oc, &w) in o.iter_mut().zip(model.weights.row(k)) {
                *oc += xk * w;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub margin: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma_plus: 4.0,
            gamma_minus: 0.0,
            margin: 0.05,
        }
    }
}

impl LossConfig {
    pub fn bce() -> Self {
        LossConfig {
            gamma_plus: 0.0,
            gamma_minus: 0.0,
            margin: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_plus >= 0.0 && self.gamma_minus >= 0.0) {
            return Err(Error::contract("focusing parameters must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.margin) {
            return Err(Error::contract(format!("margin {} not in [0, 1)", self.margin)));
        }
        Ok(())
    }
}

/// Targets per `(sample, category)`: soft values in `[0, 1]` or unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    rows: usize,
    cols: usize,
    values: Vec<SoftLabel>,
}

impl TargetMatrix {
    pub fn from_rows(rows: &[SoftLabelVector]) -> Result<Self> {
        let cols = rows.first().map_or(0, SoftLabelVector::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dimension("target rows differ in length"));
        }
        Ok(TargetMatrix {
            rows: rows.len(),
            cols,
            values: rows.iter().flat_map(|r| r.as_slice().iter().copied()).collect(),
        })
    }

    pub fn from_labels(rows: &[LabelVector]) -> Result<Self> {
        let soft: Vec<SoftLabelVector> = rows.iter().map(SoftLabelVector::from).collect();
        TargetMatrix::from_rows(&soft)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> SoftLabel {
        self.values[r * self.cols + c]
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Positive term `-(1-p)^γ⁺ ln p` and its derivative in the logit.
fn positive_term(z: f64, gamma: f64) -> (f64, f64) {
    let p = sigmoid(z);
    let q = sigmoid(-z);
    let log_p = -softplus(-z);
    let focus = q.powf(gamma);
    let loss = -focus * log_p;
    let grad = gamma * focus * p * log_p - focus * q;
    (loss, grad)
}

/// Negative term `-(p_m)^γ⁻ ln(1 - p_m)` with `p_m = max(p - m, 0)`.
fn negative_term(z: f64, gamma: f64, margin: f64) -> (f64, f64) {
    let p = sigmoid(z);
    if margin == 0.0 {
        let log_q = -softplus(z);
        let focus = p.powf(gamma);
        let loss = -focus * log_q;
        let mut grad = focus * p;
        if gamma != 0.0 {
            grad -= gamma * focus * (1.0 - p) * log_q;
        }
        return (loss, grad);
    }
    let pm = p - margin;
    if pm <= 0.0 {
        return (0.0, 0.0);
    }
    let log_q = (1.0 - pm).ln();
    let focus = pm.powf(gamma);
    let loss = -focus * log_q;
    let mut d_pm = focus / (1.0 - pm);
    if gamma != 0.0 {
        d_pm -= gamma * pm.powf(gamma - 1.0) * log_q;
    }
    (loss, d_pm * p * (1.0 - p))
}

/// Mean asymmetric loss over the known targets and its gradient with
/// respect to the logits. Unknown targets contribute nothing. A soft
/// target `t` weights the positive term by `t` and the negative by `1 - t`.
pub fn masked_asymmetric_loss(
    logits: &LogitMatrix,
    targets: &TargetMatrix,
    config: &LossConfig,
) -> Result<(f64, Matrix)> {
    config.validate()?;
    if logits.rows() != targets.rows() || logits.cols() != targets.cols() {
        return Err(Error::dimension(format!(
            "logits {}x{} vs targets {}x{}",
            logits.rows(),
            logits.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    if logits.as_slice().iter().any(|z| !z.is_finite()) {
        return Err(Error::contract("logits must be finite"));
    }
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    let mut known = 0usize;
    for r in 0..logits.rows() {
        for c in 0..logits.cols() {
            let SoftLabel::Value(t) = targets.get(r, c) else {
                continue;
            };
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::contract(format!("soft target {t} outside [0, 1]")));
            }
            let z = logits.get(r, c);
            let (mut l, mut g) = (0.0, 0.0);
            if t > 0.0 {
                let (lp, gp) = positive_term(z, config.gamma_plus);
                l += t * lp;
                g += t * gp;
            }
            if t < 1.0 {
                let (ln, gn) = negative_term(z, config.gamma_minus, config.margin);
                l += (1.0 - t) * ln;
                g += (1.0 - t) * gn;
            }
            total += l;
            grad.set(r, c, g);
            known += 1;
        }
    }
    if known == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / known as f64;
    for g in grad.as_mut_slice() {
        *g *= scale;
    }
    Ok((total * scale, grad))
}

/// Average precision: the mean, over positive items ranked by descending
/// score, of the precision at each positive's rank. Equal scores keep
/// their original index order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dimension("scores and labels differ in length"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::contract("average precision needs at least one positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` for categories without a positive in the evaluation set.
    pub per_category_ap: Vec<Option<f64>>,
    pub mean_ap: f64,
}

/// Per-category AP and their mean over categories with at least one positive.
pub fn mean_ap(scores: &Matrix, labels: &[Vec<bool>]) -> Result<Metrics> {
    if labels.len() != scores.rows() || labels.iter().any(|l| l.len() != scores.cols()) {
        return Err(Error::dimension("score matrix and label matrix differ in shape"));
    }
    let mut per_category_ap = Vec::with_capacity(scores.cols());
    for c in 0..scores.cols() {
        let column: Vec<bool> = labels.iter().map(|row| row[c]).collect();
        per_category_ap.push(if column.contains(&true) {
            Some(average_precision(&scores.column(c), &column)?)
        } else {
            None
        });
    }
    let present: Vec<f64> = per_category_ap.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(Error::contract("no category has a positive label"));
    }
    let mean_ap = present.iter().sum::<f64>() / present.len() as f64;
    Ok(Metrics {
        per_category_ap,
        mean_ap,
    })
}

/// Random unit prototypes, one per category, for generating separable
/// multi-label data.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    prototypes: Matrix,
}

/// Per-dimension feature noise.
pub const SYNTHETIC_NOISE: f64 = 0.1;

impl SyntheticTask {
    pub fn new(categories: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prototypes = Matrix::zeros(categories, dim);
        for c in 0..categories {
            let row = prototypes.row_mut(c);
            for v in row.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            normalize(row);
        }
        SyntheticTask { prototypes }
    }

    pub fn categories(&self) -> usize {
        self.prototypes.rows()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.cols()
    }

    /// `n` samples: each category active with probability `2 / C` (at least
    /// one active), feature = normalized prototype sum plus `N(0, 0.1²)`
    /// noise, stored as intensities `clamp((x + 1) / 2, 0, 1)`.
    pub fn generate(&self, n: usize, seed: u64) -> (Matrix, Vec<Vec<bool>>) {
        let (c, d) = (self.categories(), self.dim());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, SYNTHETIC_NOISE).expect("valid sigma");
        let p_active = (2.0 / c as f64).min(1.0);
        let mut features = Matrix::zeros(n, d);
        let mut truth = Vec::with_capacity(n);
        for i in 0..n {
            let mut active: Vec<bool> = (0..c).map(|_| rng.random_bool(p_active)).collect();
            if !active.contains(&true) {
                active[rng.random_range(0..c)] = true;
            }
            let mut x = vec![0.0; d];
            for (k, _) in active.iter().enumerate().filter(|(_, a)| **a) {
                for (xj, pj) in x.iter_mut().zip(self.prototypes.row(k)) {
                    *xj += pj;
                }
            }
            normalize(&mut x);
            for (out, xj) in features.row_mut(i).iter_mut().zip(&x) {
                let v = xj + noise.sample(&mut rng);
                *out = f64::from((0.5 * (v + 1.0)).clamp(0.0, 1.0) as f32);
            }
            truth.push(active);
        }
        (features, truth)
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Features as `1 × D × 1` images.
pub fn feature_samples(features: &Matrix, dataset: &PartialDataset) -> Result<Vec<Sample>> {
    if features.rows() != dataset.len() {
        return Err(Error::dimension("feature rows differ from dataset size"));
    }
    (0..features.rows())
        .map(|i| {
            let data = features.row(i).iter().map(|&v| v as f32).collect();
            let image = ImageTensor::new(1, features.cols(), 1, data)?;
            let e = &dataset.entries()[i];
            Ok(Sample::new(e.id.clone(), image, e.labels.clone()))
        })
        .collect()
}

fn sample_features(sample: &Sample) -> Vec<f64> {
    sample.image.data().iter().map(|&v| f64::from(v)).collect()
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub features: Matrix,
    pub dataset: PartialDataset,
}

impl SyntheticData {
    pub fn samples(&self) -> Result<Vec<Sample>> {
        feature_samples(&self.features, &self.dataset)
    }
}

/// Fully labeled synthetic data; ground truth is attached to the dataset.
pub fn make_synthetic_dataset(n: usize, c: usize, d: usize, seed: u64) -> Result<SyntheticData> {
    if n == 0 || c == 0 || d == 0 {
        return Err(Error::contract("synthetic dataset sizes must be positive"));
    }
    let task = SyntheticTask::new(c, d, seed);
    let (features, truth) = task.generate(n, seed.wrapping_add(1));
    let entries = truth
        .iter()
        .enumerate()
        .map(|(i, t)| DatasetEntry {
            id: format!("syn{i}"),
            image: None,
            labels: LabelVector::from_bools(t),
        })
        .collect();
    let dataset = PartialDataset::new(CategoryTable::numbered(c), entries)?.with_ground_truth(truth)?;
    Ok(SyntheticData { features, dataset })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    pub seed: u64,
    pub variant: VariantConfig,
    #[serde(default)]
    pub logicmix: Option<LogicMixConfig>,
    #[serde(default)]
    pub curriculum: Option<CurriculumConfig>,
    #[serde(default)]
    pub loss: LossConfig,
}

impl TrainConfig {
    /// Defaults used by the comparison: 30 epochs of batch-32 SGD with
    /// momentum, LogicMix at the MS-COCO setting.
    pub fn desk(variant: Variant, seed: u64) -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.5,
            momentum: 0.9,
            seed,
            variant: VariantConfig::with_defaults(variant, seed),
            logicmix: (variant == Variant::LogicMix).then(|| LogicMixConfig {
                seed,
                ..LogicMixConfig::coco()
            }),
            curriculum: None,
            loss: LossConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::contract("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::contract("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::contract("momentum must be in [0, 1)"));
        }
        self.variant.validate()?;
        if let Some(l) = &self.logicmix {
            l.validate()?;
        }
        if let Some(c) = &self.curriculum {
            c.validate()?;
        }
        self.loss.validate()
    }

    fn logicmix_config(&self) -> LogicMixConfig {
        self.logicmix.unwrap_or(LogicMixConfig {
            seed: self.seed,
            ..LogicMixConfig::coco()
        })
    }
}

/// Training and evaluation data shared by every run of a comparison.
#[derive(Debug, Clone)]
pub struct ComparisonData {
    pub train_samples: Vec<Sample>,
    pub train: PartialDataset,
    pub test_features: Matrix,
    pub test_truth: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub categories: usize,
    pub dim: usize,
    pub known_proportion: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_train: 2000,
            n_test: 1000,
            categories: 10,
            dim: 32,
            known_proportion: 0.5,
            seed: 0,
        }
    }
}

impl ComparisonData {
    pub fn synthetic(spec: &SyntheticSpec) -> Result<Self> {
        let full = make_synthetic_dataset(spec.n_train, spec.categories, spec.dim, spec.seed)?;
        let task = SyntheticTask::new(spec.categories, spec.dim, spec.seed);
        let (test_features, test_truth) = task.generate(spec.n_test, spec.seed.wrapping_add(2));
        let train = drop_labels(&full.dataset, spec.known_proportion, spec.seed.wrapping_add(3))?;
        let train_samples = feature_samples(&full.features, &train)?;
        Ok(ComparisonData {
            train_samples,
            train,
            test_features,
            test_truth,
        })
    }

    /// Train split from a partial JSONL file, test split from a fully
    /// labeled one; images resolved under `image_root` and flattened.
    pub fn from_files(train_labels: &Path, test_labels: &Path, image_root: &Path) -> Result<Self> {
        let train = read_labels_jsonl(train_labels)?;
        let test = read_labels_jsonl(test_labels)?;
        let test_truth = test.full_labels().ok_or_else(|| {
            Error::contract("evaluation labels must be fully known")
        })?;
        let load = |d: &PartialDataset| -> Result<Vec<ImageTensor>> {
            image_paths(d, image_root).iter().map(load_image).collect()
        };
        let train_images = load(&train)?;
        let train_samples = train
            .entries()
            .iter()
            .zip(train_images)
            .map(|(e, im)| Sample::new(e.id.clone(), im, e.labels.clone()))
            .collect();
        let rows: Vec<Vec<f64>> = load(&test)?
            .iter()
            .map(|im| im.data().iter().map(|&v| f64::from(v)).collect())
            .collect();
        Ok(ComparisonData {
            train_samples,
            train,
            test_features: Matrix::from_rows(&rows)?,
            test_truth,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.test_features.cols()
    }
}

fn partner(i: usize, n: usize, rng: &mut RngStream) -> usize {
    let j = rng.next_below(n as u64 - 1) as usize;
    if j >= i {
        j + 1
    } else {
        j
    }
}

/// Trains a linear model on `samples`, whose labels are taken from
/// `dataset` through the curriculum view of each epoch.
pub fn train(config: &TrainConfig, samples: &[Sample], dataset: &PartialDataset) -> Result<LinearModel> {
    config.validate()?;
    let n = samples.len();
    if n != dataset.len() {
        return Err(Error::dimension("samples and dataset differ in length"));
    }
    if n < 2 && config.variant.variant != Variant::NoAugment {
        return Err(Error::InsufficientDataset { size: n, required: 2 });
    }
    let dim = samples.first().map_or(0, |s| s.image.data().len());
    let classes = dataset.num_categories();
    let mut model = LinearModel::random(dim, classes, 0.01, config.seed);
    let mut vel_w = Matrix::zeros(dim, classes);
    let mut vel_b = vec![0.0; classes];
    let pipeline = LogicMix::new(config.logicmix_config())?;
    let features = Matrix::from_rows(&samples.iter().map(sample_features).collect::<Vec<_>>())?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pseudo = None;

    for epoch in 0..config.epochs {
        let view = compose_epoch_view(dataset, pseudo.as_ref(), epoch);
        let epoch_samples: Vec<Sample> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| Sample {
                labels: view.labels(i),
                ..s.clone()
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);

        for batch in order.chunks(config.batch_size) {
            let mut rows = Vec::with_capacity(batch.len());
            let mut targets = Vec::with_capacity(batch.len());
            for &i in batch {
                let (x, t) = augment(config, &pipeline, &epoch_samples, i, epoch)?;
                rows.push(x);
                targets.push(t);
            }
            let x = Matrix::from_rows(&rows)?;
            let logits = forward(&model, &x)?;
            let (_, grad) = masked_asymmetric_loss(&logits, &TargetMatrix::from_rows(&targets)?, &config.loss)?;
            sgd_step(&mut model, &mut vel_w, &mut vel_b, &x, &grad, config);
        }

        if let Some(cl) = &config.curriculum {
            let logits = forward(&model, &features)?;
            pseudo = Some(generate_pseudo_labels(&logits, dataset, cl, epoch)?);
        }
    }
    Ok(model)
}

fn augment(
    config: &TrainConfig,
    pipeline: &LogicMix,
    samples: &[Sample],
    i: usize,
    epoch: usize,
) -> Result<(Vec<f64>, SoftLabelVector)> {
    let n = samples.len();
    let mut rng = RngStream::for_sample(config.seed, epoch as u64, i);
    let a = &samples[i];
    let hard = |s: &Sample| (sample_features(s), SoftLabelVector::from(&s.labels));
    let soft = |(im, labels): (ImageTensor, SoftLabelVector)| {
        (im.data().iter().map(|&v| f64::from(v)).collect(), labels)
    };
    Ok(match config.variant.variant {
        Variant::NoAugment => hard(a),
        Variant::LogicMix => hard(&pipeline.apply(a.clone(), i, samples, &mut rng)?),
        Variant::MixupAn => {
            let b = &samples[partner(i, n, &mut rng)];
            soft(mixup_an(a, b, config.variant.alpha, &mut rng)?)
        }
        Variant::WangAn => {
            let b = &samples[partner(i, n, &mut rng)];
            let mut out = wang_mix(a, b, epoch)?;
            // unmixed epochs still train on assume-negative labels
            out.labels = assume_negative(&out.labels);
            hard(&out)
        }
        Variant::MlMixupAn => {
            let b = &samples[partner(i, n, &mut rng)];
            hard(&ml_mixup(a, b, &mut rng)?)
        }
        Variant::MixupPme => {
            let b = &samples[partner(i, n, &mut rng)];
            soft(mixup_pme(a, b, config.variant.alpha, &mut rng)?)
        }
    })
}

fn sgd_step(
    model: &mut LinearModel,
    vel_w: &mut Matrix,
    vel_b: &mut [f64],
    x: &Matrix,
    grad: &Matrix,
    config: &TrainConfig,
) {
    let (lr, mu) = (config.learning_rate, config.momentum);
    let classes = model.num_classes();
    let mut gw = Matrix::zeros(model.input_dim(), classes);
    let mut gb = vec![0.0; classes];
    for r in 0..x.rows() {
        let g = grad.row(r);
        for (k, &xk) in x.row(r).iter().enumerate() {
            for (acc, &gc) in gw.row_mut(k).iter_mut().zip(g) {
                *acc += xk * gc;
            }
        }
        for (acc, &gc) in gb.iter_mut().zip(g) {
            *acc += gc;
        }
    }
    for ((w, v), g) in model
        .weights
        .as_mut_slice()
        .iter_mut()
        .zip(vel_w.as_mut_slice())
        .zip(gw.as_slice())
    {
        *v = mu * *v + g;
        *w -= lr * *v;
    }
    for ((b, v), g) in model.biases.iter_mut().zip(vel_b.iter_mut()).zip(&gb) {
        *v = mu * *v + g;
        *b -= lr * *v;
    }
}

pub fn evaluate(model: &LinearModel, features: &Matrix, truth: &[Vec<bool>]) -> Result<Metrics> {
    mean_ap(&forward(model, features)?, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    pub map: f64,
    pub per_category_ap: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub mean_map: f64,
    pub sd_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub runs: Vec<RunResult>,
    pub summary: Vec<VariantSummary>,
}

impl ComparisonReport {
    pub fn summary_for(&self, variant: Variant) -> Option<&VariantSummary> {
        self.summary.iter().find(|s| s.variant == variant)
    }

    /// Aligned text table of mean ± sd mAP (in %) per variant.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>5} {:>16}", "variant", "runs", "mAP (%)");
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{:<10} {:>5} {:>9.2} ± {:<5.2}",
                s.variant.name(),
                s.runs,
                100.0 * s.mean_map,
                100.0 * s.sd_map
            );
        }
        out
    }
}

/// One training run per config, each evaluated on the held-out split.
/// Summaries group runs by variant in first-seen order; `sd` is the sample
/// standard deviation (0 for a single run).
pub fn run_comparison(configs: &[TrainConfig], data: &ComparisonData) -> Result<ComparisonReport> {
    let mut runs = Vec::with_capacity(configs.len());
    for config in configs {
        let model = train(config, &data.train_samples, &data.train)?;
        let metrics = evaluate(&model, &data.test_features, &data.test_truth)?;
        runs.push(RunResult {
            variant: config.variant.variant,
            seed: config.seed,
            map: metrics.mean_ap,
            per_category_ap: metrics.per_category_ap,
        });
    }
    let mut order: Vec<Variant> = Vec::new();
    for r in &runs {
        if !order.contains(&r.variant) {
            order.push(r.variant);
        }
    }
    let summary = order
        .into_iter()
        .map(|variant| {
            let maps: Vec<f64> = runs.iter().filter(|r| r.variant == variant).map(|r| r.map).collect();
            let mean = maps.iter().sum::<f64>() / maps.len() as f64;
            let sd = if maps.len() > 1 {
                (maps.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (maps.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            VariantSummary {
                variant,
                runs: maps.len(),
                mean_map: mean,
                sd_map: sd,
            }
        })
        .collect();
    Ok(ComparisonReport { runs, summary })
}

/// `desk` configs for every `(variant, seed)` pair.
pub fn comparison_grid(variants: &[Variant], seeds: &[u64]) -> Vec<TrainConfig> {
    variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| TrainConfig::desk(v, s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::TernaryLabel::{Negative as N, Positive as P, Unknown as U};

    #[test]
    fn forward_examples() {
        let m = LinearModel::zeros(3, 2);
        let x = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!(forward(&m, &x).unwrap().as_slice().iter().all(|&v| v == 0.0));

        let m = LinearModel {
            weights: Matrix::from_vec(1, 1, vec![2.0]).unwrap(),
            biases: vec![1.0],
        };
        let x = Matrix::from_vec(1, 1, vec![3.0]).unwrap();
        assert_eq!(forward(&m, &x).unwrap().get(0, 0), 7.0);
        let bad = Matrix::zeros(1, 2);
        assert!(matches!(forward(&m, &bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn all_unknown_targets_give_zero() {
        let logits = Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.3, 4.0]).unwrap();
        let t = TargetMatrix::from_labels(&[LabelVector::filled(2, U), LabelVector::filled(2, U)]).unwrap();
        let (loss, grad) = masked_asymmetric_loss(&logits, &t, &LossConfig::default()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_rejects_bad_input() {
        let t = TargetMatrix::from_labels(&[LabelVector::new(vec![P])]).unwrap();
        let nan = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        assert!(masked_asymmetric_loss(&nan, &t, &LossConfig::default()).is_err());
        let wide = Matrix::zeros(1, 2);
        assert!(masked_asymmetric_loss(&wide, &t, &LossConfig::default()).is_err());
    }

    #[test]
    fn loss_vanishes_on_confident_correct_logits() {
        let t = TargetMatrix::from_labels(&[LabelVector::new(vec![P, N])]).unwrap();
        let logits = Matrix::from_vec(1, 2, vec![40.0, -40.0]).unwrap();
        let (loss, _) = masked_asymmetric_loss(&logits, &t, &LossConfig::default()).unwrap();
        assert!(loss < 1e-12);
        let wrong = Matrix::from_vec(1, 2, vec![-5.0, 5.0]).unwrap();
        assert!(masked_asymmetric_loss(&wrong, &t, &LossConfig::default()).unwrap().0 > 0.1);
    }

    #[test]
    fn margin_zeroes_easy_negatives() {
        // p = sigmoid(-4) ≈ 0.018 < 0.05
        let t = TargetMatrix::from_labels(&[LabelVector::new(vec![N])]).unwrap();
        let logits = Matrix::from_vec(1, 1, vec![-4.0]).unwrap();
        let (loss, grad) = masked_asymmetric_loss(&logits, &t, &LossConfig::default()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.get(0, 0), 0.0);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(average_precision(&[0.9, 0.1], &[false, true]).unwrap(), 0.5);
        // ties keep index order: the positive at index 1 ranks second
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
        assert!(average_precision(&[0.1], &[false]).is_err());
        assert!(average_precision(&[], &[]).is_err());
    }

    #[test]
    fn map_skips_categories_without_positives() {
        let scores = Matrix::from_vec(2, 2, vec![0.9, 0.2, 0.1, 0.3]).unwrap();
        let labels = vec![vec![true, false], vec![false, false]];
        let m = mean_ap(&scores, &labels).unwrap();
        assert_eq!(m.per_category_ap, vec![Some(1.0), None]);
        assert_eq!(m.mean_ap, 1.0);
        assert!(mean_ap(&scores, &[vec![false; 2], vec![false; 2]]).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_nonempty() {
        let a = make_synthetic_dataset(100, 10, 8, 5).unwrap();
        let b = make_synthetic_dataset(100, 10, 8, 5).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.dataset, b.dataset);
        assert!(a.dataset.label_vectors().iter().all(|v| v.count(P) >= 1));
        assert!(a.features.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        let c = make_synthetic_dataset(100, 10, 8, 6).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn weight_gradient_matches_finite_differences() {
        let data = make_synthetic_dataset(6, 3, 4, 1).unwrap();
        let model = LinearModel::random(4, 3, 0.5, 2);
        let targets = TargetMatrix::from_labels(&data.dataset.label_vectors()).unwrap();
        let cfg = LossConfig::default();
        let loss_of = |m: &LinearModel| {
            masked_asymmetric_loss(&forward(m, &data.features).unwrap(), &targets, &cfg).unwrap().0
        };
        let (_, grad) = masked_asymmetric_loss(&forward(&model, &data.features).unwrap(), &targets, &cfg).unwrap();
        let config = TrainConfig {
            learning_rate: 1.0,
            momentum: 0.0,
            ..TrainConfig::desk(Variant::NoAugment, 0)
        };
        // one plain SGD step with lr = 1 moves the weights by minus the gradient
        let mut stepped = model.clone();
        sgd_step(&mut stepped, &mut Matrix::zeros(4, 3), &mut [0.0; 3], &data.features, &grad, &config);
        let h = 1e-6;
        for k in 0..4 {
            for c in 0..3 {
                let mut plus = model.clone();
                let mut minus = model.clone();
                plus.weights.set(k, c, model.weights.get(k, c) + h);
                minus.weights.set(k, c, model.weights.get(k, c) - h);
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let analytic = model.weights.get(k, c) - stepped.weights.get(k, c);
                assert!((fd - analytic).abs() < 1e-6, "{fd} vs {analytic}");
            }
        }
    }

    #[test]
    fn logicmix_with_s_zero_matches_no_augment() {
        let data = ComparisonData::synthetic(&SyntheticSpec {
            n_train: 120,
            n_test: 60,
            categories: 4,
            dim: 6,
            known_proportion: 0.5,
            seed: 3,
        })
        .unwrap();
        let base = TrainConfig {
            epochs: 3,
            ..TrainConfig::desk(Variant::NoAugment, 9)
        };
        let off = TrainConfig {
            variant: VariantConfig::with_defaults(Variant::LogicMix, 9),
            logicmix: Some(LogicMixConfig::new(0.0, 2, 3, 9).unwrap()),
            ..base.clone()
        };
        let a = train(&base, &data.train_samples, &data.train).unwrap();
        let b = train(&off, &data.train_samples, &data.train).unwrap();
        assert_eq!(a, b);
        let again = train(&base, &data.train_samples, &data.train).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn every_variant_trains() {
        let data = ComparisonData::synthetic(&SyntheticSpec {
            n_train: 80,
            n_test: 40,
            categories: 3,
            dim: 5,
            known_proportion: 0.6,
            seed: 1,
        })
        .unwrap();
        let mut configs = comparison_grid(&Variant::ALL, &[1]);
        for c in &mut configs {
            c.epochs = 2;
            c.curriculum = Some(CurriculumConfig::coco());
        }
        let report = run_comparison(&configs, &data).unwrap();
        assert_eq!(report.runs.len(), Variant::ALL.len());
        for r in &report.runs {
            assert!((0.0..=1.0).contains(&r.map), "{r:?}");
        }
        assert!(report.to_table().contains("logicmix"));
    }
}
