//! Partially labeled datasets: the JSONL label codec, COCO ingestion,
//! known-label-proportion simulation and label-count statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelVector, TernaryLabel};
use crate::mixer::ImageTensor;
use crate::pipeline::{LogicMix, LogicMixConfig};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTable {
    names: Vec<String>,
    source_ids: Option<Vec<i64>>,
}

impl CategoryTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::contract(format!("duplicate category name '{dup}'")));
        }
        Ok(CategoryTable {
            names,
            source_ids: None,
        })
    }

    pub fn with_source_ids(names: Vec<String>, ids: Vec<i64>) -> Result<Self> {
        if names.len() != ids.len() {
            return Err(Error::dimension("category names and ids differ in length"));
        }
        let mut table = CategoryTable::new(names)?;
        table.source_ids = Some(ids);
        Ok(table)
    }

    /// `category_0 … category_{n-1}`.
    pub fn numbered(n: usize) -> Self {
        CategoryTable {
            names: (0..n).map(|i| format!("category_{i}")).collect(),
            source_ids: None,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn source_ids(&self) -> Option<&[i64]> {
        self.source_ids.as_deref()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub id: String,
    pub image: Option<String>,
    pub labels: LabelVector,
}

/// Samples with ternary labels over a shared category table. When
/// `ground_truth` is present every known label agrees with it.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialDataset {
    categories: CategoryTable,
    entries: Vec<DatasetEntry>,
    ground_truth: Option<Vec<Vec<bool>>>,
}

impl PartialDataset {
    pub fn new(categories: CategoryTable, entries: Vec<DatasetEntry>) -> Result<Self> {
        let c = categories.len();
        if let Some((i, e)) = entries.iter().enumerate().find(|(_, e)| e.labels.len() != c) {
            return Err(Error::dimension(format!(
                "sample {i} ('{}') has {} labels, dataset has {c} categories",
                e.id,
                e.labels.len()
            )));
        }
        Ok(PartialDataset {
            categories,
            entries,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(mut self, truth: Vec<Vec<bool>>) -> Result<Self> {
        if truth.len() != self.entries.len() {
            return Err(Error::dimension("ground truth row count differs from sample count"));
        }
        for (i, (e, t)) in self.entries.iter().zip(&truth).enumerate() {
            if !e.labels.is_consistent_with(t) {
                return Err(Error::contract(format!(
                    "sample {i} ('{}') disagrees with its ground truth",
                    e.id
                )));
            }
        }
        self.ground_truth = Some(truth);
        Ok(self)
    }

    pub fn categories(&self) -> &CategoryTable {
        &self.categories
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self, index: usize) -> &LabelVector {
        &self.entries[index].labels
    }

    pub fn label_vectors(&self) -> Vec<LabelVector> {
        self.entries.iter().map(|e| e.labels.clone()).collect()
    }

    pub fn ground_truth(&self) -> Option<&[Vec<bool>]> {
        self.ground_truth.as_deref()
    }

    /// Binary labels if the dataset is fully known.
    pub fn full_labels(&self) -> Option<Vec<Vec<bool>>> {
        self.entries
            .iter()
            .map(|e| e.labels.iter().map(TernaryLabel::as_bool).collect())
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    categories: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    image: Option<String>,
    labels: LabelVector,
}

/// Reads the JSONL label format: a `{"categories": [...]}` header line
/// followed by one `{"id", "image", "labels"}` object per sample.
pub fn read_labels_jsonl(path: impl AsRef<Path>) -> Result<PartialDataset> {
    let path = path.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut header: Option<CategoryTable> = None;
    let mut entries = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match &header {
            None => {
                let h: Header =
                    serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
                header = Some(
                    CategoryTable::new(h.categories)
                        .map_err(|e| parse_err(line_no, e.to_string()))?,
                );
            }
            Some(table) => {
                let l: Line =
                    serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
                if l.labels.len() != table.len() {
                    return Err(parse_err(
                        line_no,
                        format!(
                            "expected {} labels, found {}",
                            table.len(),
                            l.labels.len()
                        ),
                    ));
                }
                entries.push(DatasetEntry {
                    id: l.id,
                    image: l.image,
                    labels: l.labels,
                });
            }
        }
    }
    let categories = header.ok_or_else(|| parse_err(1, "missing categories header".into()))?;
    PartialDataset::new(categories, entries)
}

pub fn write_labels_jsonl(dataset: &PartialDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_labels_to(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_labels_to<W: Write>(dataset: &PartialDataset, mut w: W) -> Result<()> {
    let header = Header {
        categories: dataset.categories.names.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for e in &dataset.entries {
        let line = Line {
            id: e.id.clone(),
            image: e.image.clone(),
            labels: e.labels.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: i64,
    file_name: String,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    image_id: i64,
    category_id: i64,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: i64,
    name: String,
}

/// Builds a fully labeled dataset from a COCO `instances_*.json` file.
///
/// Categories are ordered by ascending COCO id. A label is positive iff
/// at least one annotation of that category references the image.
pub fn ingest_coco(path: impl AsRef<Path>) -> Result<PartialDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_coco(&text)
}

pub fn parse_coco(json: &str) -> Result<PartialDataset> {
    let coco: CocoFile =
        serde_json::from_str(json).map_err(|e| Error::Ingest(format!("not a COCO file: {e}")))?;

    let mut cats: Vec<&CocoCategory> = coco.categories.iter().collect();
    cats.sort_by_key(|c| c.id);
    let cat_index: HashMap<i64, usize> = cats.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    if cat_index.len() != cats.len() {
        return Err(Error::Ingest("duplicate category id".into()));
    }
    let categories = CategoryTable::with_source_ids(
        cats.iter().map(|c| c.name.clone()).collect(),
        cats.iter().map(|c| c.id).collect(),
    )
    .map_err(|e| Error::Ingest(e.to_string()))?;

    let image_index: HashMap<i64, usize> = coco
        .images
        .iter()
        .enumerate()
        .map(|(i, im)| (im.id, i))
        .collect();
    if image_index.len() != coco.images.len() {
        return Err(Error::Ingest("duplicate image id".into()));
    }

    let c = categories.len();
    let mut present = vec![vec![false; c]; coco.images.len()];
    for ann in &coco.annotations {
        let row = image_index.get(&ann.image_id).ok_or_else(|| {
            Error::Ingest(format!("annotation references unknown image {}", ann.image_id))
        })?;
        let col = cat_index.get(&ann.category_id).ok_or_else(|| {
            Error::Ingest(format!(
                "annotation references unknown category {}",
                ann.category_id
            ))
        })?;
        present[*row][*col] = true;
    }

    let entries = coco
        .images
        .iter()
        .zip(&present)
        .map(|(im, bits)| DatasetEntry {
            id: im.id.to_string(),
            image: Some(im.file_name.clone()),
            labels: LabelVector::from_bools(bits),
        })
        .collect();
    PartialDataset::new(categories, entries)?.with_ground_truth(present)
}

/// Keeps each known label with probability `proportion`, turning the rest
/// unknown. The input's full labels become the result's ground truth.
pub fn drop_labels(dataset: &PartialDataset, proportion: f64, seed: u64) -> Result<PartialDataset> {
    if !(proportion > 0.0 && proportion <= 1.0) {
        return Err(Error::contract(format!(
            "known label proportion {proportion} is not in (0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = dataset
        .entries
        .iter()
        .map(|e| DatasetEntry {
            id: e.id.clone(),
            image: e.image.clone(),
            labels: e
                .labels
                .iter()
                .map(|l| {
                    if l.is_known() && rng.random::<f64>() >= proportion {
                        TernaryLabel::Unknown
                    } else {
                        l
                    }
                })
                .collect(),
        })
        .collect();
    let truth = dataset
        .ground_truth
        .clone()
        .or_else(|| dataset.full_labels());
    let out = PartialDataset::new(dataset.categories.clone(), entries)?;
    match truth {
        Some(t) => out.with_ground_truth(t),
        None => Ok(out),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub mean_positives_per_sample: f64,
    pub mean_negatives_per_sample: f64,
    pub mean_unknowns_per_sample: f64,
    pub known_fraction: f64,
}

impl LabelStats {
    fn from_counts(pos: u64, neg: u64, unk: u64, samples: u64, categories: usize) -> Self {
        let n = samples as f64;
        let stats = LabelStats {
            mean_positives_per_sample: pos as f64 / n,
            mean_negatives_per_sample: neg as f64 / n,
            mean_unknowns_per_sample: unk as f64 / n,
            known_fraction: (pos + neg) as f64 / (n * categories as f64),
        };
        debug_assert!(
            (stats.mean_positives_per_sample
                + stats.mean_negatives_per_sample
                + stats.mean_unknowns_per_sample
                - categories as f64)
                .abs()
                < 1e-9
        );
        stats
    }
}

#[derive(Default)]
struct Counts {
    pos: u64,
    neg: u64,
    unk: u64,
    samples: u64,
}

impl Counts {
    fn add(&mut self, v: &LabelVector) {
        for l in v.iter() {
            match l {
                TernaryLabel::Positive => self.pos += 1,
                TernaryLabel::Negative => self.neg += 1,
                TernaryLabel::Unknown => self.unk += 1,
            }
        }
        self.samples += 1;
    }

    fn stats(&self, categories: usize) -> LabelStats {
        LabelStats::from_counts(self.pos, self.neg, self.unk, self.samples, categories)
    }
}

pub fn compute_label_stats(dataset: &PartialDataset) -> Result<LabelStats> {
    if dataset.is_empty() {
        return Err(Error::contract("label statistics of an empty dataset"));
    }
    let mut counts = Counts::default();
    for e in &dataset.entries {
        counts.add(&e.labels);
    }
    Ok(counts.stats(dataset.num_categories()))
}

/// Monte Carlo label counts of pipeline outputs with every sample augmented.
///
/// `config.s` is ignored (treated as 1). Draw `t` uses sample `t mod N` as
/// the input and its own stream `(seed, 0, t)`, so a multiple of `N` draws
/// is exact when `K = 1` or when every plan is forced.
pub fn estimate_augmented_stats(
    dataset: &PartialDataset,
    config: &LogicMixConfig,
    n_draws: usize,
    seed: u64,
) -> Result<LabelStats> {
    if n_draws == 0 {
        return Err(Error::contract("n_draws must be at least 1"));
    }
    if dataset.is_empty() {
        return Err(Error::contract("augmented statistics of an empty dataset"));
    }
    let pipeline = LogicMix::new(LogicMixConfig {
        s: 1.0,
        seed,
        ..*config
    })?;
    let labels = dataset.label_vectors();
    let mut counts = Counts::default();
    for t in 0..n_draws {
        let mut rng = RngStream::for_sample(seed, 0, t);
        counts.add(&pipeline.apply_labels(t % labels.len(), &labels, &mut rng)?);
    }
    Ok(counts.stats(dataset.num_categories()))
}

/// Loads an image referenced by a dataset: `.lmt` files as LMT1 tensors,
/// anything else through the PNG/JPEG decoder as RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("lmt")) {
        return ImageTensor::load(path);
    }
    let rgb = image::open(path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|b| f32::from(b) / 255.0).collect();
    ImageTensor::new(h as usize, w as usize, 3, data)
}

/// Resolves each entry's image reference against `root`. Entries without a
/// reference fall back to `<id>.lmt`.
pub fn image_paths(dataset: &PartialDataset, root: &Path) -> Vec<PathBuf> {
    dataset
        .entries
        .iter()
        .map(|e| match &e.image {
            Some(r) => root.join(r),
            None => root.join(format!("{}.lmt", e.id)),
        })
        .collect()
}

/// Per-category positive counts, handy for summaries.
pub fn positives_per_category(dataset: &PartialDataset) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> =
        dataset.categories.names.iter().map(|n| (n.clone(), 0)).collect();
    for e in &dataset.entries {
        for (name, l) in dataset.categories.names.iter().zip(e.labels.iter()) {
            if l == TernaryLabel::Positive {
                *out.get_mut(name).expect("category present") += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::TernaryLabel::{Negative as N, Positive as P, Unknown as U};

    pub(crate) fn two_sample() -> PartialDataset {
        PartialDataset::new(
            CategoryTable::numbered(3),
            vec![
                DatasetEntry {
                    id: "a".into(),
                    image: Some("a.png".into()),
                    labels: LabelVector::new(vec![P, N, U]),
                },
                DatasetEntry {
                    id: "b".into(),
                    image: None,
                    labels: LabelVector::new(vec![P, P, N]),
                },
            ],
        )
        .unwrap()
    }

    fn random_full(n: usize, c: usize, seed: u64) -> PartialDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..n)
            .map(|i| DatasetEntry {
                id: i.to_string(),
                image: None,
                labels: (0..c).map(|_| TernaryLabel::from_bool(rng.random_bool(0.2))).collect(),
            })
            .collect();
        PartialDataset::new(CategoryTable::numbered(c), entries).unwrap()
    }

    #[test]
    fn stats_hand_count() {
        let s = compute_label_stats(&two_sample()).unwrap();
        assert_eq!(s.mean_positives_per_sample, 1.5);
        assert_eq!(s.mean_negatives_per_sample, 1.0);
        assert_eq!(s.mean_unknowns_per_sample, 0.5);
        assert!((s.known_fraction - 5.0 / 6.0).abs() < 1e-12);
        let full = compute_label_stats(&random_full(10, 4, 1)).unwrap();
        assert_eq!(full.mean_unknowns_per_sample, 0.0);
        let empty = PartialDataset::new(CategoryTable::numbered(2), vec![]).unwrap();
        assert!(compute_label_stats(&empty).is_err());
    }

    #[test]
    fn jsonl_round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let d = two_sample();
        write_labels_jsonl(&d, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"categories":["category_0","category_1","category_2"]}"#);
        assert_eq!(lines[1], r#"{"id":"a","image":"a.png","labels":[1,0,null]}"#);
        assert_eq!(lines[2], r#"{"id":"b","image":null,"labels":[1,1,0]}"#);
        assert_eq!(read_labels_jsonl(&path).unwrap(), d);
    }

    #[test]
    fn jsonl_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let cases = [
            "{\"categories\":[\"x\",\"y\"]}\n{\"id\":\"a\",\"image\":null,\"labels\":[1,0]}\n{\"id\":\"b\",\"image\":null,\"labels\":[2,0]}\n",
            "{\"categories\":[\"x\",\"y\"]}\n{\"id\":\"a\",\"image\":null,\"labels\":[1,0]}\n{\"id\":\"b\",\"image\":null,\"labels\":[1]}\n",
            "{\"categories\":[\"x\",\"y\"]}\n{\"id\":\"a\",\"image\":null,\"labels\":[1,0]}\n{\"id\":\"b\",\"image\":null,\"labels\":[1,0],\"x\":1}\n",
            "{\"categories\":[\"x\",\"y\"]}\n{\"id\":\"a\",\"image\":null,\"labels\":[1,0]}\nnot json\n",
        ];
        for text in cases {
            std::fs::write(&path, text).unwrap();
            match read_labels_jsonl(&path) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 3, "{text}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn coco_presence_rule() {
        let json = r#"{
            "info": {}, "licenses": [],
            "images": [
                {"id": 10, "file_name": "a.jpg", "width": 4, "height": 4},
                {"id": 7, "file_name": "b.jpg", "width": 4, "height": 4}
            ],
            "annotations": [
                {"id": 1, "image_id": 10, "category_id": 1, "bbox": [0,0,1,1]},
                {"id": 2, "image_id": 10, "category_id": 1, "bbox": [0,0,1,1]},
                {"id": 3, "image_id": 10, "category_id": 3, "bbox": [0,0,1,1]}
            ],
            "categories": [
                {"id": 3, "name": "car", "supercategory": "vehicle"},
                {"id": 1, "name": "person", "supercategory": "person"},
                {"id": 2, "name": "bicycle", "supercategory": "vehicle"}
            ]
        }"#;
        let d = parse_coco(json).unwrap();
        assert_eq!(d.categories().names(), ["person", "bicycle", "car"]);
        assert_eq!(d.categories().source_ids(), Some(&[1, 2, 3][..]));
        assert_eq!(d.labels(0), &LabelVector::new(vec![P, N, P]));
        assert_eq!(d.labels(1), &LabelVector::filled(3, N));
        assert_eq!(d.entries()[0].image.as_deref(), Some("a.jpg"));
        assert!(d.label_vectors().iter().all(|v| v.is_fully_known()));

        assert!(matches!(parse_coco(r#"{"images": []}"#), Err(Error::Ingest(_))));
        let dangling = json.replace("\"image_id\": 10, \"category_id\": 3", "\"image_id\": 99, \"category_id\": 3");
        assert!(matches!(parse_coco(&dangling), Err(Error::Ingest(_))));
    }

    #[test]
    fn drop_labels_behaviour() {
        let full = random_full(200, 8, 3);
        assert!(drop_labels(&full, 0.0, 1).is_err());
        assert!(drop_labels(&full, 1.5, 1).is_err());

        let same = drop_labels(&full, 1.0, 9).unwrap();
        assert_eq!(same.label_vectors(), full.label_vectors());

        let a = drop_labels(&full, 0.4, 5).unwrap();
        let b = drop_labels(&full, 0.4, 5).unwrap();
        assert_eq!(a, b);
        let truth = a.ground_truth().unwrap();
        for (e, t) in a.entries().iter().zip(truth) {
            assert!(e.labels.is_consistent_with(t));
        }
        // dropping twice keeps the original truth
        let twice = drop_labels(&a, 0.5, 6).unwrap();
        assert_eq!(twice.ground_truth(), a.ground_truth());
        let frac = compute_label_stats(&twice).unwrap().known_fraction;
        assert!((frac - 0.2).abs() < 0.05, "{frac}");
    }

    #[test]
    fn augmented_stats_exact_cases() {
        // Two samples, K = 2: every draw mixes a with b.
        let d = two_sample();
        let cfg = LogicMixConfig::new(1.0, 2, 2, 0).unwrap();
        let s = estimate_augmented_stats(&d, &cfg, 10, 4).unwrap();
        // [1,0,?] ∨ [1,1,0] = [1,1,?]
        assert_eq!(s.mean_positives_per_sample, 2.0);
        assert_eq!(s.mean_negatives_per_sample, 0.0);
        assert_eq!(s.mean_unknowns_per_sample, 1.0);

        // K = 1 reproduces the plain statistics exactly over whole passes.
        let full = drop_labels(&random_full(50, 6, 8), 0.5, 2).unwrap();
        let k1 = LogicMixConfig::new(1.0, 1, 1, 0).unwrap();
        let est = estimate_augmented_stats(&full, &k1, 150, 3).unwrap();
        let plain = compute_label_stats(&full).unwrap();
        assert!((est.mean_positives_per_sample - plain.mean_positives_per_sample).abs() < 1e-12);
        assert!((est.mean_negatives_per_sample - plain.mean_negatives_per_sample).abs() < 1e-12);
    }
}
