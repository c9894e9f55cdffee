//! Loader throughput harness.
//!
//! A pool of preprocessing workers feeds a bounded queue drained by one
//! consumer that stands in for the training step. With too few workers the
//! extra sample loads of LogicMix stall the consumer; with enough workers
//! the cost hides behind the step time.
//!
//! Each produced sample is fingerprinted so runs with different worker
//! counts can be checked for identical output streams.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{image_paths, load_image, read_labels_jsonl, write_labels_jsonl, CategoryTable, DatasetEntry, PartialDataset};
use crate::error::{Error, Result};
use crate::labels::{LabelVector, TernaryLabel};
use crate::mixer::{ImageTensor, Sample};
use crate::pipeline::{LogicMix, LogicMixConfig, SampleSource};
use crate::rng::RngStream;

/// How the consumer spends its per-batch step time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    /// Sleep, leaving the CPU to the workers (like waiting on an accelerator).
    Sleep,
    /// Spin on the clock, occupying one core.
    BusyWait,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corpus {
    /// Images generated in memory from the seed.
    Synthetic { size: usize, categories: usize },
    /// `labels.jsonl` plus the LMT1 files it references.
    Disk { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub workers: usize,
    /// Mix exactly `k` samples (`k_min = k_max = k`).
    pub k: usize,
    pub s: f64,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub image_shape: (usize, usize, usize),
    pub repetitions: usize,
    pub seed: u64,
    /// Consumer time per batch.
    pub step_time: Duration,
    pub step_mode: StepMode,
    /// Simulated storage latency per sample read (synthetic corpus only).
    pub load_latency: Duration,
    pub corpus: Corpus,
    /// Queue capacity in samples; defaults to two batches.
    pub queue_depth: Option<usize>,
    /// Longest the consumer waits for a sample before giving up.
    pub timeout: Duration,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            workers: 4,
            k: 4,
            s: 1.0,
            samples_per_epoch: 1024,
            batch_size: 32,
            image_shape: (32, 32, 3),
            repetitions: 3,
            seed: 0,
            step_time: Duration::from_millis(25),
            step_mode: StepMode::Sleep,
            load_latency: Duration::from_micros(500),
            corpus: Corpus::Synthetic {
                size: 256,
                categories: 20,
            },
            queue_depth: None,
            timeout: Duration::from_secs(30),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0
            || self.k == 0
            || self.samples_per_epoch == 0
            || self.batch_size == 0
            || self.repetitions == 0
        {
            return Err(Error::contract("bench counts must be positive"));
        }
        if self.queue_depth == Some(0) {
            return Err(Error::contract("queue depth must be positive"));
        }
        if self.image_shape.0 * self.image_shape.1 * self.image_shape.2 == 0 {
            return Err(Error::contract("image shape must be nonempty"));
        }
        Ok(())
    }

    pub fn logicmix(&self) -> Result<LogicMixConfig> {
        LogicMixConfig::new(self.s, self.k, self.k, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub workers: usize,
    pub k: usize,
    pub s: f64,
    pub baseline: bool,
    pub epoch_seconds: Vec<f64>,
    pub mean_seconds: f64,
    pub sd_seconds: f64,
    pub samples_per_second: f64,
    /// Percent slower than the matching no-augment run, when compared.
    pub overhead_pct: Option<f64>,
    /// One fingerprint of the produced sample stream per repetition.
    pub stream_digests: Vec<u64>,
}

impl ThroughputReport {
    pub fn overhead_vs(&self, baseline: &ThroughputReport) -> f64 {
        100.0 * (self.mean_seconds - baseline.mean_seconds) / baseline.mean_seconds
    }
}

/// In-memory or on-disk samples with an optional per-read delay.
pub struct BenchCorpus {
    samples: Vec<Sample>,
    paths: Option<Vec<PathBuf>>,
    latency: Duration,
}

impl BenchCorpus {
    pub fn synthetic(
        size: usize,
        categories: usize,
        shape: (usize, usize, usize),
        latency: Duration,
        seed: u64,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::contract("corpus must not be empty"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w, c) = shape;
        let samples = (0..size)
            .map(|i| {
                let data = (0..h * w * c).map(|_| rng.random::<f32>()).collect();
                let labels: LabelVector = (0..categories)
                    .map(|_| match rng.random_range(0..10) {
                        0 => TernaryLabel::Positive,
                        1..=2 => TernaryLabel::Negative,
                        _ => TernaryLabel::Unknown,
                    })
                    .collect();
                Ok(Sample::new(format!("img{i}"), ImageTensor::new(h, w, c, data)?, labels))
            })
            .collect::<Result<_>>()?;
        Ok(BenchCorpus {
            samples,
            paths: None,
            latency,
        })
    }

    /// Loads labels eagerly; images are read from disk on every access.
    pub fn disk(dir: &Path) -> Result<Self> {
        let dataset = read_labels_jsonl(dir.join("labels.jsonl"))?;
        let paths = image_paths(&dataset, dir);
        let samples = dataset
            .entries()
            .iter()
            .map(|e| {
                Ok(Sample::new(
                    e.id.clone(),
                    ImageTensor::filled(1, 1, 1, 0.0)?,
                    e.labels.clone(),
                ))
            })
            .collect::<Result<_>>()?;
        Ok(BenchCorpus {
            samples,
            paths: Some(paths),
            latency: Duration::ZERO,
        })
    }

    pub fn from_config(config: &BenchConfig) -> Result<Self> {
        match &config.corpus {
            Corpus::Synthetic { size, categories } => BenchCorpus::synthetic(
                *size,
                *categories,
                config.image_shape,
                config.load_latency,
                config.seed,
            ),
            Corpus::Disk { dir } => BenchCorpus::disk(dir),
        }
    }

    /// Writes a synthetic corpus as `labels.jsonl` plus `imgN.lmt` files.
    pub fn write_to_disk(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let c = self.samples.first().map_or(0, |s| s.labels.len());
        let mut entries = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            let sample = self.sample(i)?;
            let name = format!("{}.lmt", s.id);
            sample.image.save(dir.join(&name))?;
            entries.push(DatasetEntry {
                id: s.id.clone(),
                image: Some(name),
                labels: s.labels.clone(),
            });
        }
        let dataset = PartialDataset::new(CategoryTable::numbered(c), entries)?;
        write_labels_jsonl(&dataset, dir.join("labels.jsonl"))
    }
}

impl SampleSource for BenchCorpus {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn sample(&self, index: usize) -> Result<Sample> {
        let s = self
            .samples
            .get(index)
            .ok_or_else(|| Error::contract(format!("corpus index {index} out of range")))?;
        match &self.paths {
            Some(paths) => Ok(Sample {
                image: load_image(&paths[index])?,
                ..s.clone()
            }),
            None => {
                if !self.latency.is_zero() {
                    thread::sleep(self.latency);
                }
                Ok(s.clone())
            }
        }
    }
}

fn fingerprint(sample: &Sample) -> u64 {
    let mut h = DefaultHasher::new();
    sample.id.hash(&mut h);
    sample.labels.hash(&mut h);
    for v in sample.image.data() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

fn simulate_step(duration: Duration, mode: StepMode) {
    match mode {
        StepMode::Sleep => thread::sleep(duration),
        StepMode::BusyWait => {
            let start = Instant::now();
            while start.elapsed() < duration {
                std::hint::spin_loop();
            }
        }
    }
}

/// One timed epoch; returns wall seconds and the stream digest.
fn run_epoch(
    config: &BenchConfig,
    corpus: &BenchCorpus,
    pipeline: Option<&LogicMix>,
    epoch: u64,
) -> Result<(f64, u64)> {
    let n = config.samples_per_epoch;
    let workers = config.workers;
    let depth = config.queue_depth.unwrap_or(2 * config.batch_size);
    let start = Instant::now();
    let mut prints: Vec<(usize, u64)> = Vec::with_capacity(n);

    thread::scope(|scope| -> Result<()> {
        let (tx, rx) = sync_channel::<Result<(usize, Sample)>>(depth);
        for w in 0..workers {
            let tx = tx.clone();
            scope.spawn(move || {
                for i in (w..n).step_by(workers) {
                    let index = i % corpus.len();
                    let produced = corpus.sample(index).and_then(|input| match pipeline {
                        None => Ok(input),
                        Some(p) => {
                            let mut rng = RngStream::for_sample(config.seed, epoch, i);
                            p.apply(input, index, corpus, &mut rng)
                        }
                    });
                    let failed = produced.is_err();
                    if tx.send(produced.map(|s| (i, s))).is_err() || failed {
                        return;
                    }
                }
            });
        }
        drop(tx);

        let mut in_batch = 0;
        while prints.len() < n {
            match rx.recv_timeout(config.timeout) {
                Ok(Ok((i, sample))) => {
                    prints.push((i, fingerprint(&sample)));
                    in_batch += 1;
                    if in_batch == config.batch_size || prints.len() == n {
                        simulate_step(config.step_time, config.step_mode);
                        in_batch = 0;
                    }
                }
                Ok(Err(e)) => return Err(e),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Harness(format!(
                        "no sample within {:?} after {} of {n}",
                        config.timeout,
                        prints.len()
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Harness(format!(
                        "workers stopped after {} of {n} samples",
                        prints.len()
                    )))
                }
            }
        }
        Ok(())
    })?;

    let elapsed = start.elapsed().as_secs_f64();
    prints.sort_unstable();
    let mut h = DefaultHasher::new();
    prints.hash(&mut h);
    Ok((elapsed, h.finish()))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

pub fn run_throughput_bench(config: &BenchConfig, baseline: bool) -> Result<ThroughputReport> {
    let corpus = BenchCorpus::from_config(config)?;
    run_throughput_bench_on(config, &corpus, baseline)
}

/// Like [`run_throughput_bench`] but reuses an already built corpus.
pub fn run_throughput_bench_on(
    config: &BenchConfig,
    corpus: &BenchCorpus,
    baseline: bool,
) -> Result<ThroughputReport> {
    config.validate()?;
    let pipeline = if baseline {
        None
    } else {
        let p = LogicMix::new(config.logicmix()?)?;
        if corpus.len() < p.config().required_dataset_size() {
            return Err(Error::InsufficientDataset {
                size: corpus.len(),
                required: p.config().required_dataset_size(),
            });
        }
        Some(p)
    };
    let mut epoch_seconds = Vec::with_capacity(config.repetitions);
    let mut stream_digests = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let (secs, digest) = run_epoch(config, corpus, pipeline.as_ref(), rep as u64)?;
        epoch_seconds.push(secs);
        stream_digests.push(digest);
    }
    let (mean_seconds, sd_seconds) = mean_sd(&epoch_seconds);
    Ok(ThroughputReport {
        workers: config.workers,
        k: config.k,
        s: config.s,
        baseline,
        samples_per_second: config.samples_per_epoch as f64 / mean_seconds,
        epoch_seconds,
        mean_seconds,
        sd_seconds,
        overhead_pct: None,
        stream_digests,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub config: String,
    pub mean_seconds: f64,
    pub sd_seconds: f64,
    pub samples_per_second: f64,
    pub overhead_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub workers: usize,
    pub cells: Vec<BenchCell>,
}

/// Rows are worker counts; columns are the no-augment baseline followed by
/// LogicMix at each `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub columns: Vec<String>,
    pub rows: Vec<BenchRow>,
    pub s: f64,
    pub repetitions: usize,
    pub samples_per_epoch: usize,
    pub step_ms: f64,
}

impl BenchTable {
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = write!(out, "{:>8}", "workers");
        for c in &self.columns {
            let _ = write!(out, " {c:>24}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:>8}", row.workers);
            for cell in &row.cells {
                let text = match cell.overhead_pct {
                    Some(o) => format!("{:.3}±{:.3}s ({o:+.1}%)", cell.mean_seconds, cell.sd_seconds),
                    None => format!("{:.3}±{:.3}s", cell.mean_seconds, cell.sd_seconds),
                };
                let _ = write!(out, " {text:>24}");
            }
            out.push('\n');
        }
        out
    }
}

fn cell(name: String, r: &ThroughputReport) -> BenchCell {
    BenchCell {
        config: name,
        mean_seconds: r.mean_seconds,
        sd_seconds: r.sd_seconds,
        samples_per_second: r.samples_per_second,
        overhead_pct: r.overhead_pct,
    }
}

/// Runs the baseline and every `k` for every worker count.
pub fn run_bench_grid(base: &BenchConfig, workers: &[usize], ks: &[usize]) -> Result<BenchTable> {
    let corpus = BenchCorpus::from_config(base)?;
    let mut rows = Vec::with_capacity(workers.len());
    for &w in workers {
        let cfg = BenchConfig {
            workers: w,
            ..base.clone()
        };
        let baseline = run_throughput_bench_on(&cfg, &corpus, true)?;
        let mut cells = vec![cell("no-augment".into(), &baseline)];
        for &k in ks {
            let mut r = run_throughput_bench_on(&BenchConfig { k, ..cfg.clone() }, &corpus, false)?;
            r.overhead_pct = Some(r.overhead_vs(&baseline));
            cells.push(cell(format!("logicmix-k{k}"), &r));
        }
        rows.push(BenchRow { workers: w, cells });
    }
    let mut columns = vec!["no-augment".to_string()];
    columns.extend(ks.iter().map(|k| format!("logicmix-k{k}")));
    Ok(BenchTable {
        columns,
        rows,
        s: base.s,
        repetitions: base.repetitions,
        samples_per_epoch: base.samples_per_epoch,
        step_ms: base.step_time.as_secs_f64() * 1e3,
    })
}
