//! The LogicMix augmentation pipeline.
//!
//! Each input sample is augmented with probability `s`. An augmented sample
//! mixes the input with `K - 1` companions, `K ~ U{k_min, k_max}`, drawn
//! uniformly without replacement from the rest of the dataset. Otherwise the
//! input passes through untouched.
//!
//! Every call consumes exactly `1 + 1 + (k_max - 1)` 64-bit draws from its
//! [`RngStream`] whichever branch is taken, so results depend only on the
//! stream key and never on how calls are scheduled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{mix_label_vectors, LabelVector};
use crate::mixer::{mix_samples, Sample};
use crate::rng::{below_from_bits, unit_from_bits, RngStream};
use rand::RngCore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogicMixConfig {
    pub s: f64,
    pub k_min: usize,
    pub k_max: usize,
    #[serde(default)]
    pub seed: u64,
}

impl LogicMixConfig {
    pub fn new(s: f64, k_min: usize, k_max: usize, seed: u64) -> Result<Self> {
        let config = LogicMixConfig {
            s,
            k_min,
            k_max,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// MS-COCO and VG-200 setting: `s = 0.5`, `K ∈ {2, 3}`.
    pub fn coco() -> Self {
        LogicMixConfig {
            s: 0.5,
            k_min: 2,
            k_max: 3,
            seed: 0,
        }
    }

    /// Pascal VOC 2007 setting: `s = 0.5`, `K ∈ {3, 4}`.
    pub fn voc() -> Self {
        LogicMixConfig {
            s: 0.5,
            k_min: 3,
            k_max: 4,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::contract(format!("s = {} is not in [0, 1]", self.s)));
        }
        if self.k_min < 1 || self.k_max < self.k_min {
            return Err(Error::contract(format!(
                "need 1 <= k_min <= k_max, got k_min = {}, k_max = {}",
                self.k_min, self.k_max
            )));
        }
        Ok(())
    }

    /// Smallest dataset that can supply companions for every draw.
    pub fn required_dataset_size(&self) -> usize {
        if self.s > 0.0 && self.k_max >= 2 {
            self.k_max
        } else {
            1
        }
    }

    pub fn draws_per_call(&self) -> usize {
        1 + self.k_max
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MixPlan {
    Passthrough,
    Mix { k: usize, companions: Vec<usize> },
}

impl MixPlan {
    pub fn is_augmented(&self) -> bool {
        matches!(self, MixPlan::Mix { .. })
    }
}

pub fn draw_plan(
    config: &LogicMixConfig,
    dataset_size: usize,
    input_index: usize,
    rng: &mut RngStream,
) -> Result<MixPlan> {
    config.validate()?;
    if input_index >= dataset_size {
        return Err(Error::contract(format!(
            "input index {input_index} out of range for {dataset_size} samples"
        )));
    }
    let required = config.required_dataset_size();
    if dataset_size < required {
        return Err(Error::InsufficientDataset {
            size: dataset_size,
            required,
        });
    }

    let coin = unit_from_bits(rng.next_u64());
    let span = (config.k_max - config.k_min + 1) as u64;
    let k = config.k_min + below_from_bits(rng.next_u64(), span) as usize;
    let index_bits: Vec<u64> = (1..config.k_max).map(|_| rng.next_u64()).collect();

    if coin >= config.s {
        return Ok(MixPlan::Passthrough);
    }

    // Partial Fisher-Yates over the n - 1 indices other than the input,
    // tracking only the swapped slots.
    let pool = (dataset_size - 1) as u64;
    let mut swapped: Vec<(u64, u64)> = Vec::with_capacity(k);
    let slot = |swapped: &[(u64, u64)], pos: u64| {
        swapped
            .iter()
            .rev()
            .find(|(p, _)| *p == pos)
            .map_or(pos, |(_, v)| *v)
    };
    let mut companions = Vec::with_capacity(k - 1);
    for (j, &bits) in index_bits.iter().take(k - 1).enumerate() {
        let j = j as u64;
        let r = j + below_from_bits(bits, pool - j);
        let picked = slot(&swapped, r);
        let displaced = slot(&swapped, j);
        swapped.push((r, displaced));
        swapped.push((j, picked));
        let picked = picked as usize;
        companions.push(if picked >= input_index { picked + 1 } else { picked });
    }
    Ok(MixPlan::Mix { k, companions })
}

/// Random access to the samples a pipeline can draw companions from.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn sample(&self, index: usize) -> Result<Sample>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleSource for [Sample] {
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }

    fn sample(&self, index: usize) -> Result<Sample> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::contract(format!("sample index {index} out of range")))
    }
}

impl SampleSource for Vec<Sample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn sample(&self, index: usize) -> Result<Sample> {
        self.as_slice().sample(index)
    }
}

pub type PreTransform = dyn Fn(Sample) -> Sample + Send + Sync;

/// A configured LogicMix pipeline with an optional per-participant hook
/// applied before mixing (for example a photometric augmentation).
pub struct LogicMix {
    config: LogicMixConfig,
    pre_transform: Option<Box<PreTransform>>,
}

impl std::fmt::Debug for LogicMix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogicMix")
            .field("config", &self.config)
            .field("pre_transform", &self.pre_transform.is_some())
            .finish()
    }
}

impl LogicMix {
    pub fn new(config: LogicMixConfig) -> Result<Self> {
        config.validate()?;
        Ok(LogicMix {
            config,
            pre_transform: None,
        })
    }

    pub fn with_pre_transform<F>(mut self, hook: F) -> Self
    where
        F: Fn(Sample) -> Sample + Send + Sync + 'static,
    {
        self.pre_transform = Some(Box::new(hook));
        self
    }

    pub fn config(&self) -> &LogicMixConfig {
        &self.config
    }

    /// Stream for `index` in `epoch`, keyed by the configured seed.
    pub fn stream(&self, epoch: u64, index: usize) -> RngStream {
        RngStream::for_sample(self.config.seed, epoch, index)
    }

    /// Runs the pipeline on `input`, which sits at `input_index` in `source`.
    pub fn apply<S: SampleSource + ?Sized>(
        &self,
        input: Sample,
        input_index: usize,
        source: &S,
        rng: &mut RngStream,
    ) -> Result<Sample> {
        let plan = draw_plan(&self.config, source.len(), input_index, rng)?;
        let MixPlan::Mix { companions, .. } = plan else {
            return Ok(input);
        };
        let mut participants = Vec::with_capacity(companions.len() + 1);
        participants.push(input);
        for &c in &companions {
            participants.push(source.sample(c)?);
        }
        if let Some(hook) = &self.pre_transform {
            participants = participants.into_iter().map(hook).collect();
        }
        let refs: Vec<&Sample> = participants.iter().collect();
        mix_samples(&refs)
    }

    /// Label half of [`LogicMix::apply`], for statistics that never touch
    /// images. Consumes the stream identically.
    pub fn apply_labels(
        &self,
        input_index: usize,
        labels: &[LabelVector],
        rng: &mut RngStream,
    ) -> Result<LabelVector> {
        let plan = draw_plan(&self.config, labels.len(), input_index, rng)?;
        match plan {
            MixPlan::Passthrough => Ok(labels[input_index].clone()),
            MixPlan::Mix { companions, .. } => mix_label_vectors(
                std::iter::once(&labels[input_index]).chain(companions.iter().map(|&c| &labels[c])),
            ),
        }
    }
}
