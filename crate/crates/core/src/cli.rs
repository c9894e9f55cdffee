//! The `logicmix` command line.
//!
//! Every subcommand takes `--config <file.toml>`. Keys in the file use the
//! flag names with underscores (`--theta-plus` is `theta_plus`) and may sit
//! at the top level or in a table named after the subcommand. Flags given
//! on the command line win over file values.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::bench::{run_bench_grid, BenchConfig, Corpus};
use crate::curriculum::{generate_pseudo_labels, CurriculumConfig, LogitMatrix};
use crate::dataset::{
    compute_label_stats, drop_labels, estimate_augmented_stats, image_paths, ingest_coco, load_image,
    read_labels_jsonl, write_labels_jsonl, DatasetEntry, LabelStats, PartialDataset,
};
use crate::error::Error;
use crate::matrix::Matrix;
use crate::mixer::Sample;
use crate::pipeline::{LogicMix, LogicMixConfig};
use crate::trainer::{
    evaluate, run_comparison, train, ComparisonData, LossConfig, RunResult, SyntheticSpec, TrainConfig,
};
use crate::variants::{Variant, VariantConfig};

#[derive(Debug, Parser)]
#[command(name = "logicmix", version, about = "Logical-OR Mixup for partially labeled multi-label data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Augment a labeled image set and write LMT1 tensors plus JSONL labels.
    Mix(MixArgs),
    /// Hide a random share of the known labels.
    Drop(DropArgs),
    /// Label statistics of a dataset, optionally after augmentation.
    Stats(StatsArgs),
    /// Pseudo-labels from a logit matrix.
    Pseudo(PseudoArgs),
    /// Train and evaluate one model.
    Train(TrainArgs),
    /// Compare augmentation variants over several seeds.
    Compare(CompareArgs),
    /// Loader throughput with and without LogicMix.
    Bench(BenchArgs),
    /// mAP over a grid of (k_min, k_max, s) and known-label proportions.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize, Deserialize, Default)]
struct MixArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Input labels (JSONL).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Directory the label file's image references resolve against.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    kmin: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epoch: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Deserialize, Default)]
struct DropArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Probability that each known label is kept.
    #[arg(long)]
    proportion: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Deserialize, Default)]
struct StatsArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Labels (JSONL).
    #[arg(long, conflicts_with = "coco")]
    labels: Option<PathBuf>,
    /// COCO instances annotation file instead of JSONL.
    #[arg(long)]
    coco: Option<PathBuf>,
    /// Drop labels first, keeping this proportion.
    #[arg(long)]
    proportion: Option<f64>,
    /// Report statistics of augmented samples.
    #[arg(long)]
    augmented: bool,
    #[arg(long)]
    kmin: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args, Serialize, Deserialize, Default)]
struct PseudoArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Logits as CSV, one row per sample; a leading non-numeric row is a header.
    #[arg(long)]
    logits: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    theta_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta_minus: Option<f64>,
    #[arg(long)]
    epoch: Option<usize>,
    /// Output JSONL; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Training data: a synthetic task, or a partial train file plus a fully
/// labeled test file.
#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
struct DataArgs {
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    categories: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Share of training labels kept.
    #[arg(long)]
    known: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long, requires = "test_labels")]
    train_labels: Option<PathBuf>,
    #[arg(long, requires = "train_labels")]
    test_labels: Option<PathBuf>,
    #[arg(long)]
    image_root: Option<PathBuf>,
}

impl DataArgs {
    fn synthetic_spec(&self) -> SyntheticSpec {
        let d = SyntheticSpec::default();
        SyntheticSpec {
            n_train: self.n_train.unwrap_or(d.n_train),
            n_test: self.n_test.unwrap_or(d.n_test),
            categories: self.categories.unwrap_or(d.categories),
            dim: self.dim.unwrap_or(d.dim),
            known_proportion: self.known.unwrap_or(d.known_proportion),
            seed: self.data_seed.unwrap_or(d.seed),
        }
    }

    fn load(&self) -> crate::Result<ComparisonData> {
        match (&self.train_labels, &self.test_labels) {
            (Some(train), Some(test)) => {
                let root = self
                    .image_root
                    .clone()
                    .unwrap_or_else(|| parent_dir(train));
                ComparisonData::from_files(train, test, &root)
            }
            _ => ComparisonData::synthetic(&self.synthetic_spec()),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct LogicMixSection {
    s: Option<f64>,
    k_min: Option<usize>,
    k_max: Option<usize>,
}

#[derive(Debug, Args, Serialize, Deserialize, Default)]
struct TrainArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the run result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(skip)]
    logicmix: Option<LogicMixSection>,
    #[arg(skip)]
    curriculum: Option<CurriculumConfig>,
    #[arg(skip)]
    loss: Option<LossConfig>,
    #[command(flatten)]
    #[serde(default)]
    data: DataArgs,
}

impl TrainArgs {
    fn train_config(&self, variant: Variant, seed: u64) -> crate::Result<TrainConfig> {
        let mut c = TrainConfig::desk(variant, seed);
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.momentum {
            c.momentum = v;
        }
        if let Some(alpha) = self.alpha {
            c.variant = VariantConfig::new(variant, alpha, seed)?;
        }
        if let Some(l) = &self.logicmix {
            let d = LogicMixConfig::coco();
            c.logicmix = Some(LogicMixConfig::new(
                l.s.unwrap_or(d.s),
                l.k_min.unwrap_or(d.k_min),
                l.k_max.unwrap_or(d.k_max),
                seed,
            )?);
        }
        c.curriculum = self.curriculum;
        if let Some(l) = self.loss {
            c.loss = l;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args, Serialize, Deserialize, Default)]
struct CompareArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Variants to compare (comma separated); all when omitted.
    #[arg(long, value_delimiter = ',')]
    variant: Option<Vec<Variant>>,
    /// Training seeds (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args, Serialize, Deserialize, Default)]
struct BenchArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    workers: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Consumer time per batch in milliseconds.
    #[arg(long)]
    step_ms: Option<f64>,
    /// Simulated read latency per sample in microseconds.
    #[arg(long)]
    latency_us: Option<u64>,
    /// Spin instead of sleeping during the consumer step.
    #[arg(long)]
    busy_wait: bool,
    /// Queue capacity in samples (default: two batches).
    #[arg(long)]
    queue_depth: Option<usize>,
    #[arg(long)]
    corpus_size: Option<usize>,
    /// Read the corpus from a directory written by `BenchCorpus::write_to_disk`.
    #[arg(long)]
    disk: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Deserialize, Default)]
struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    kmin: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    kmax: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<f64>>,
    /// Known-label proportions, one column each.
    #[arg(long, value_delimiter = ',')]
    proportions: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli.command, &mut out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Mix(a) => mix(resolve(a, "mix")?, out),
        Command::Drop(a) => drop_cmd(resolve(a, "drop")?, out),
        Command::Stats(a) => stats(resolve(a, "stats")?, out),
        Command::Pseudo(a) => pseudo(resolve(a, "pseudo")?, out),
        Command::Train(a) => train_cmd(resolve(a, "train")?, out),
        Command::Compare(a) => compare(resolve(a, "compare")?, out),
        Command::Bench(a) => bench(resolve(a, "bench")?, out),
        Command::Sweep(a) => sweep(resolve(a, "sweep")?, out),
    }
}

trait HasConfig {
    fn config_path(&self) -> Option<PathBuf>;
}

macro_rules! has_config {
    ($($t:ty),*) => {$(
        impl HasConfig for $t {
            fn config_path(&self) -> Option<PathBuf> {
                self.config.clone()
            }
        }
    )*};
}

has_config!(MixArgs, DropArgs, StatsArgs, PseudoArgs, TrainArgs, CompareArgs, BenchArgs, SweepArgs);

/// Drops unset flags so they do not mask file values.
fn strip_unset(v: &mut Value) {
    if let Value::Object(map) = v {
        map.retain(|_, x| !matches!(x, Value::Null | Value::Bool(false)));
        map.values_mut().for_each(strip_unset);
    }
}

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Object(b)), Value::Object(t)) => overlay(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn resolve<T>(flags: T, section: &str) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + HasConfig,
{
    let Some(path) = flags.config_path() else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
    let mut file = serde_json::to_value(table).map_err(|e| Failure::Runtime(e.into()))?;
    if let Some(Value::Object(sec)) = file.get(section).cloned() {
        file = Value::Object(sec);
    }
    let Value::Object(mut merged) = file else {
        return Err(usage("config file must be a table"));
    };
    let mut given = serde_json::to_value(&flags).map_err(|e| Failure::Runtime(e.into()))?;
    strip_unset(&mut given);
    if let Value::Object(given) = given {
        overlay(&mut merged, given);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone().ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn mix(a: MixArgs, out: &mut dyn Write) -> CliResult {
    let labels = required(&a.labels, "labels")?;
    let dir = required(&a.out, "out")?;
    let d = LogicMixConfig::coco();
    let config = LogicMixConfig::new(
        a.s.unwrap_or(1.0),
        a.kmin.unwrap_or(d.k_min),
        a.kmax.unwrap_or(d.k_max),
        a.seed.unwrap_or(0),
    )?;
    let dataset = read_labels_jsonl(&labels)?;
    let root = a.images.clone().unwrap_or_else(|| parent_dir(&labels));
    let samples = dataset
        .entries()
        .iter()
        .zip(image_paths(&dataset, &root))
        .map(|(e, p)| Ok(Sample::new(e.id.clone(), load_image(p)?, e.labels.clone())))
        .collect::<crate::Result<Vec<_>>>()?;
    let pipeline = LogicMix::new(config)?;
    let epoch = a.epoch.unwrap_or(0);
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    let mut entries = Vec::with_capacity(samples.len());
    let mut mixed = 0;
    for (i, input) in samples.iter().enumerate() {
        let mut rng = pipeline.stream(epoch, i);
        let result = pipeline.apply(input.clone(), i, samples.as_slice(), &mut rng)?;
        if result.id != input.id {
            mixed += 1;
        }
        let name = format!("aug{i:06}.lmt");
        result.image.save(dir.join(&name))?;
        entries.push(DatasetEntry {
            id: result.id,
            image: Some(name),
            labels: result.labels,
        });
    }
    let augmented = PartialDataset::new(dataset.categories().clone(), entries)?;
    write_labels_jsonl(&augmented, dir.join("labels.jsonl"))?;
    writeln!(out, "wrote {} samples ({mixed} mixed) to {}", samples.len(), dir.display()).map_err(Error::from)?;
    Ok(())
}

fn drop_cmd(a: DropArgs, out: &mut dyn Write) -> CliResult {
    let labels = required(&a.labels, "labels")?;
    let proportion = required(&a.proportion, "proportion")?;
    let path = required(&a.out, "out")?;
    let dataset = read_labels_jsonl(&labels)?;
    let dropped = drop_labels(&dataset, proportion, a.seed.unwrap_or(0))?;
    write_labels_jsonl(&dropped, &path)?;
    write_stats(out, dropped.len(), dropped.num_categories(), &compute_label_stats(&dropped)?)?;
    Ok(())
}

fn write_stats(out: &mut dyn Write, samples: usize, categories: usize, s: &LabelStats) -> crate::Result<()> {
    writeln!(out, "samples           {samples}")?;
    writeln!(out, "categories        {categories}")?;
    writeln!(out, "positives/sample  {:.4}", s.mean_positives_per_sample)?;
    writeln!(out, "negatives/sample  {:.4}", s.mean_negatives_per_sample)?;
    writeln!(out, "unknowns/sample   {:.4}", s.mean_unknowns_per_sample)?;
    writeln!(out, "known fraction    {:.4}", s.known_fraction)?;
    Ok(())
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> CliResult {
    let mut dataset = match (&a.labels, &a.coco) {
        (Some(p), None) => read_labels_jsonl(p)?,
        (None, Some(p)) => ingest_coco(p)?,
        _ => return Err(usage("give exactly one of --labels or --coco")),
    };
    let seed = a.seed.unwrap_or(0);
    if let Some(p) = a.proportion {
        dataset = drop_labels(&dataset, p, seed)?;
    }
    let s = if a.augmented {
        let d = LogicMixConfig::coco();
        let config = LogicMixConfig::new(1.0, a.kmin.unwrap_or(d.k_min), a.kmax.unwrap_or(d.k_max), seed)?;
        let draws = a.draws.unwrap_or(100_000);
        estimate_augmented_stats(&dataset, &config, draws, seed)?
    } else {
        compute_label_stats(&dataset)?
    };
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &s).map_err(Error::from)?;
        writeln!(out).map_err(Error::from)?;
    } else {
        write_stats(out, dataset.len(), dataset.num_categories(), &s)?;
    }
    Ok(())
}

fn read_logits(path: &Path) -> crate::Result<LogitMatrix> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(n + 1, e.to_string()))?;
        let row: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match row {
            Ok(r) => rows.push(r),
            Err(_) if n == 0 => continue,
            Err(e) => return Err(parse_err(n + 1, e.to_string())),
        }
    }
    Matrix::from_rows(&rows)
}

#[derive(Serialize)]
struct PseudoLine<'a> {
    sample: usize,
    id: &'a str,
    category: &'a str,
    label: u8,
    epoch: usize,
}

fn pseudo(a: PseudoArgs, out: &mut dyn Write) -> CliResult {
    let logits = read_logits(&required(&a.logits, "logits")?)?;
    let dataset = read_labels_jsonl(required(&a.labels, "labels")?)?;
    let d = CurriculumConfig::coco();
    let config = CurriculumConfig::new(a.theta_plus.unwrap_or(d.theta_plus), a.theta_minus.unwrap_or(d.theta_minus))?;
    let epoch = a.epoch.unwrap_or(0);
    let set = generate_pseudo_labels(&logits, &dataset, &config, epoch)?;
    let mut sink: Box<dyn Write + '_> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(Error::from)?)),
        None => Box::new(&mut *out),
    };
    let names = dataset.categories().names();
    for ((i, c), label) in set.iter() {
        let line = PseudoLine {
            sample: i,
            id: &dataset.entries()[i].id,
            category: &names[c],
            label: u8::from(label),
            epoch,
        };
        serde_json::to_writer(&mut sink, &line).map_err(Error::from)?;
        writeln!(sink).map_err(Error::from)?;
    }
    sink.flush().map_err(Error::from)?;
    drop(sink);
    if a.out.is_some() {
        writeln!(
            out,
            "{} pseudo-labels ({} positive, {} negative)",
            set.len(),
            set.count(true),
            set.count(false)
        )
        .map_err(Error::from)?;
    }
    Ok(())
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> CliResult {
    let variant = a.variant.unwrap_or(Variant::LogicMix);
    let seed = a.seed.unwrap_or(0);
    let config = a.train_config(variant, seed)?;
    let data = a.data.load()?;
    let model = train(&config, &data.train_samples, &data.train)?;
    let metrics = evaluate(&model, &data.test_features, &data.test_truth)?;
    let result = RunResult {
        variant,
        seed,
        map: metrics.mean_ap,
        per_category_ap: metrics.per_category_ap,
    };
    writeln!(out, "{} seed {seed}: mAP {:.2}%", variant, 100.0 * result.map).map_err(Error::from)?;
    if let Some(p) = &a.out {
        write_json(p, &result)?;
    }
    Ok(())
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn compare(a: CompareArgs, out: &mut dyn Write) -> CliResult {
    let variants = a.variant.clone().unwrap_or_else(|| Variant::ALL.to_vec());
    let seeds = a.seeds.clone().unwrap_or_else(default_seeds);
    if variants.is_empty() || seeds.is_empty() {
        return Err(usage("need at least one variant and one seed"));
    }
    let configs = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .map(|(v, s)| {
            let mut c = TrainConfig::desk(v, s);
            if let Some(e) = a.epochs {
                c.epochs = e;
            }
            c
        })
        .collect::<Vec<_>>();
    let data = a.data.load()?;
    let report = run_comparison(&configs, &data)?;
    write!(out, "{}", report.to_table()).map_err(Error::from)?;
    if let Some(p) = &a.out {
        write_json(p, &report)?;
    }
    Ok(())
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> CliResult {
    let d = BenchConfig::default();
    let corpus = match &a.disk {
        Some(dir) => Corpus::Disk { dir: dir.clone() },
        None => Corpus::Synthetic {
            size: a.corpus_size.unwrap_or(256),
            categories: 20,
        },
    };
    let config = BenchConfig {
        s: a.s.unwrap_or(1.0),
        samples_per_epoch: a.samples.unwrap_or(d.samples_per_epoch),
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        repetitions: a.reps.unwrap_or(d.repetitions),
        seed: a.seed.unwrap_or(0),
        step_time: a
            .step_ms
            .map_or(d.step_time, |ms| Duration::from_secs_f64(ms.max(0.0) / 1e3)),
        step_mode: if a.busy_wait {
            crate::bench::StepMode::BusyWait
        } else {
            crate::bench::StepMode::Sleep
        },
        load_latency: a.latency_us.map_or(d.load_latency, Duration::from_micros),
        corpus,
        queue_depth: a.queue_depth,
        ..d
    };
    let workers = a.workers.clone().unwrap_or_else(|| vec![1, 2, 4, 8]);
    let ks = a.k.clone().unwrap_or_else(|| vec![2, 4, 8]);
    let table = run_bench_grid(&config, &workers, &ks)?;
    write!(out, "{}", table.to_text()).map_err(Error::from)?;
    if let Some(p) = &a.out {
        write_json(p, &table)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k_min: usize,
    pub k_max: usize,
    pub s: f64,
    /// Mean mAP per known-label proportion, in column order.
    pub map: Vec<f64>,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub proportions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = write!(s, "{:>5} {:>5} {:>5}", "k_min", "k_max", "s");
        for p in &self.proportions {
            let _ = write!(s, " {:>7}", format!("{:.0}%", 100.0 * p));
        }
        let _ = writeln!(s, " {:>7}", "avg");
        for r in &self.rows {
            let _ = write!(s, "{:>5} {:>5} {:>5.2}", r.k_min, r.k_max, r.s);
            for m in &r.map {
                let _ = write!(s, " {:>7.2}", 100.0 * m);
            }
            let _ = writeln!(s, " {:>7.2}", 100.0 * r.average);
        }
        s
    }
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> CliResult {
    let kmins = a.kmin.clone().unwrap_or_else(|| vec![1, 2]);
    let kmaxs = a.kmax.clone().unwrap_or_else(|| vec![2, 3, 4]);
    let ss = a.s.clone().unwrap_or_else(|| vec![0.5, 1.0]);
    let proportions = a.proportions.clone().unwrap_or_else(|| vec![0.1, 0.5, 0.9]);
    let seeds = a.seeds.clone().unwrap_or_else(|| vec![0]);
    if a.data.train_labels.is_some() {
        return Err(usage("sweep runs on synthetic data only"));
    }
    let grid: Vec<(usize, usize, f64)> = kmins
        .iter()
        .flat_map(|&lo| kmaxs.iter().filter(move |&&hi| hi >= lo).map(move |&hi| (lo, hi)))
        .flat_map(|(lo, hi)| ss.iter().map(move |&s| (lo, hi, s)))
        .collect();
    if grid.is_empty() || proportions.is_empty() || seeds.is_empty() {
        return Err(usage("empty sweep grid"));
    }
    let mut maps = vec![Vec::with_capacity(proportions.len()); grid.len()];
    for &p in &proportions {
        let spec = SyntheticSpec {
            known_proportion: p,
            ..a.data.synthetic_spec()
        };
        let data = ComparisonData::synthetic(&spec)?;
        for (g, &(lo, hi, s)) in grid.iter().enumerate() {
            let configs = seeds
                .iter()
                .map(|&seed| {
                    let mut c = TrainConfig::desk(Variant::LogicMix, seed);
                    c.logicmix = Some(LogicMixConfig::new(s, lo, hi, seed)?);
                    if let Some(e) = a.epochs {
                        c.epochs = e;
                    }
                    Ok(c)
                })
                .collect::<crate::Result<Vec<_>>>()?;
            let report = run_comparison(&configs, &data)?;
            maps[g].push(report.summary[0].mean_map);
        }
    }
    let rows = grid
        .into_iter()
        .zip(maps)
        .map(|((k_min, k_max, s), map)| SweepRow {
            k_min,
            k_max,
            s,
            average: map.iter().sum::<f64>() / map.len() as f64,
            map,
        })
        .collect();
    let table = SweepTable {
        proportions,
        seeds,
        rows,
    };
    write!(out, "{}", table.to_text()).map_err(Error::from)?;
    if let Some(p) = &a.out {
        write_json(p, &table)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        for argv in [
            vec!["logicmix", "mix", "--labels", "l.jsonl", "--out", "o"],
            vec!["logicmix", "drop", "--labels", "l", "--proportion", "0.3", "--out", "o"],
            vec!["logicmix", "stats", "--labels", "l", "--augmented", "--kmin", "2"],
            vec!["logicmix", "pseudo", "--logits", "x.csv", "--labels", "l", "--theta-minus", "-2"],
            vec!["logicmix", "train", "--variant", "pme", "--epochs", "3"],
            vec!["logicmix", "compare", "--variant", "none,logicmix", "--seeds", "0,1"],
            vec!["logicmix", "bench", "--workers", "1,2", "--k", "2,4", "--reps", "2"],
            vec!["logicmix", "sweep", "--kmin", "1", "--kmax", "2,3", "--s", "0.5"],
        ] {
            Cli::try_parse_from(&argv).unwrap_or_else(|e| panic!("{argv:?}: {e}"));
        }
        assert!(Cli::try_parse_from(["logicmix", "frobnicate"]).is_err());
        assert!(Cli::try_parse_from(["logicmix", "compare", "--variant", "cutmix"]).is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[drop]\nlabels = \"a.jsonl\"\nproportion = 0.3\nseed = 7\n").unwrap();
        let Command::Drop(a) = Cli::try_parse_from([
            "logicmix",
            "drop",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
        ])
        .unwrap()
        .command
        else {
            unreachable!()
        };
        let Ok(r) = resolve(a, "drop") else { panic!() };
        assert_eq!(r.labels, Some(PathBuf::from("a.jsonl")));
        assert_eq!(r.proportion, Some(0.3));
        assert_eq!(r.seed, Some(9));
    }

    #[test]
    fn top_level_keys_and_nested_tables() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.toml");
        std::fs::write(
            &path,
            "variant = \"logicmix\"\nepochs = 4\n[logicmix]\ns = 0.5\nk_min = 2\nk_max = 4\n[data]\nn_train = 50\n",
        )
        .unwrap();
        let Command::Train(a) =
            Cli::try_parse_from(["logicmix", "train", "--config", path.to_str().unwrap(), "--n-test", "20"])
                .unwrap()
                .command
        else {
            unreachable!()
        };
        let Ok(r) = resolve(a, "train") else { panic!() };
        assert_eq!(r.epochs, Some(4));
        assert_eq!(r.data.n_train, Some(50));
        assert_eq!(r.data.n_test, Some(20));
        let c = r.train_config(Variant::LogicMix, 3).unwrap();
        assert_eq!((c.logicmix.unwrap().k_max, c.logicmix.unwrap().seed), (4, 3));
    }

    #[test]
    fn logits_csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        std::fs::write(&path, "a,b\n1.5, -2\n0,3\n").unwrap();
        let m = read_logits(&path).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 2));
        assert_eq!(m.get(0, 1), -2.0);
        std::fs::write(&path, "1,2\nx,3\n").unwrap();
        assert!(matches!(read_logits(&path), Err(Error::Parse { line: 2, .. })));
    }
}
