//! Image tensors, samples, and weighted mixing of both.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::labels::{mix_label_vectors, LabelVector};

/// Magic bytes opening an LMT1 tensor file.
pub const LMT_MAGIC: &[u8; 4] = b"LMT1";

/// Separator joining the ids of mixed samples.
pub const ID_SEPARATOR: &str = "+";

/// Row-major `height × width × channels` intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let expected = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::dimension("tensor shape overflows"))?;
        if data.len() != expected {
            return Err(Error::dimension(format!(
                "{height}x{width}x{channels} tensor needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::contract(format!(
                "intensity {} at offset {pos} is outside [0, 1]",
                data[pos]
            )));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        ImageTensor::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Writes the LMT1 container: magic, three little-endian `u32` dims,
    /// then little-endian `f32` intensities.
    pub fn write_lmt<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(LMT_MAGIC)?;
        for dim in [self.height, self.width, self.channels] {
            let dim = u32::try_from(dim)
                .map_err(|_| Error::Format(format!("dimension {dim} does not fit in u32")))?;
            w.write_all(&dim.to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_lmt<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != LMT_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf)?;
            *d = u32::from_le_bytes(buf) as usize;
        }
        let len = dims[0] * dims[1] * dims[2];
        let mut bytes = vec![0u8; len * 4];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::Format(format!("truncated tensor payload: {e}")))?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        ImageTensor::new(dims[0], dims[1], dims[2], data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_lmt(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ImageTensor::read_lmt(BufReader::new(File::open(path)?))
    }
}

/// Nonnegative mixing weights, at least one strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MixWeights(Vec<f64>);

impl MixWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::contract("mix weights must be finite and nonnegative"));
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::contract("at least one mix weight must be positive"));
        }
        Ok(MixWeights(weights))
    }

    pub fn equal(k: usize) -> Result<Self> {
        MixWeights::new(vec![1.0; k])
    }

    /// `(λ, 1 − λ)` for two-sample Mixup variants.
    pub fn pair(lambda: f64) -> Result<Self> {
        MixWeights::new(vec![lambda, 1.0 - lambda])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weight-normalized per-pixel combination `Σ λ_k x_k / Σ λ_k`.
pub fn mix_images(images: &[&ImageTensor], weights: &MixWeights) -> Result<ImageTensor> {
    let first = images
        .first()
        .ok_or_else(|| Error::contract("mix_images needs at least one image"))?;
    if weights.len() != images.len() {
        return Err(Error::dimension(format!(
            "{} weights for {} images",
            weights.len(),
            images.len()
        )));
    }
    let shape = first.shape();
    if let Some(bad) = images.iter().find(|im| im.shape() != shape) {
        return Err(Error::dimension(format!(
            "image shape {:?} differs from {:?}",
            bad.shape(),
            shape
        )));
    }
    let total: f64 = weights.as_slice().iter().sum();
    let mut acc = vec![0f64; first.data.len()];
    for (im, &w) in images.iter().zip(weights.as_slice()) {
        if w == 0.0 {
            continue;
        }
        for (a, &v) in acc.iter_mut().zip(&im.data) {
            *a += w * f64::from(v);
        }
    }
    let data = acc
        .into_iter()
        .map(|a| ((a / total) as f32).clamp(0.0, 1.0))
        .collect();
    Ok(ImageTensor {
        height: shape.0,
        width: shape.1,
        channels: shape.2,
        data,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: ImageTensor,
    pub labels: LabelVector,
}

impl Sample {
    pub fn new(id: impl Into<String>, image: ImageTensor, labels: LabelVector) -> Self {
        Sample {
            id: id.into(),
            image,
            labels,
        }
    }
}

/// Equal-weight image mean plus OR-mixed labels; ids joined with `+`.
pub fn mix_samples(samples: &[&Sample]) -> Result<Sample> {
    if samples.len() == 1 {
        return Ok(samples[0].clone());
    }
    let images: Vec<&ImageTensor> = samples.iter().map(|s| &s.image).collect();
    let image = mix_images(&images, &MixWeights::equal(samples.len())?)?;
    let labels = mix_label_vectors(samples.iter().map(|s| &s.labels))?;
    let id = samples
        .iter()
        .map(|s| s.id.as_str())
        .collect::<Vec<_>>()
        .join(ID_SEPARATOR);
    Ok(Sample { id, image, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::TernaryLabel::{Negative as N, Positive as P, Unknown as U};
    use proptest::prelude::*;

    fn px(v: f32) -> ImageTensor {
        ImageTensor::filled(2, 2, 1, v).unwrap()
    }

    fn close(a: f32, b: f32) -> bool {
        (a - b).abs() < 1e-6
    }

    #[test]
    fn mix_images_examples() {
        let out = mix_images(&[&px(0.2), &px(0.6)], &MixWeights::equal(2).unwrap()).unwrap();
        assert!(out.data().iter().all(|&v| close(v, 0.4)));

        let one = mix_images(&[&px(0.37)], &MixWeights::new(vec![3.5]).unwrap()).unwrap();
        assert_eq!(one, px(0.37));

        let out = mix_images(
            &[&px(0.0), &px(0.3), &px(0.9)],
            &MixWeights::equal(3).unwrap(),
        )
        .unwrap();
        assert!(out.data().iter().all(|&v| close(v, 0.4)));

        let out = mix_images(&[&px(0.3), &px(0.9)], &MixWeights::new(vec![2.0, 1.0]).unwrap())
            .unwrap();
        assert!(out.data().iter().all(|&v| close(v, 0.5)));
    }

    #[test]
    fn mix_images_errors() {
        let other = ImageTensor::filled(2, 3, 1, 0.1).unwrap();
        assert!(matches!(
            mix_images(&[&px(0.1), &other], &MixWeights::equal(2).unwrap()),
            Err(Error::Dimension(_))
        ));
        assert!(MixWeights::new(vec![0.0, 0.0]).is_err());
        assert!(MixWeights::new(vec![1.0, -0.1]).is_err());
        assert!(matches!(
            mix_images(&[&px(0.1)], &MixWeights::equal(2).unwrap()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn tensor_validation() {
        assert!(ImageTensor::new(1, 1, 1, vec![1.5]).is_err());
        assert!(ImageTensor::new(1, 1, 1, vec![f32::NAN]).is_err());
        assert!(ImageTensor::new(1, 2, 1, vec![0.5]).is_err());
    }

    #[test]
    fn mix_samples_examples() {
        let a = Sample::new("A", px(0.2), LabelVector::new(vec![P, U]));
        let b = Sample::new("B", px(0.6), LabelVector::new(vec![U, N]));
        let m = mix_samples(&[&a, &b]).unwrap();
        assert_eq!(m.id, "A+B");
        assert_eq!(m.labels, LabelVector::new(vec![P, U]));
        assert!(m.image.data().iter().all(|&v| close(v, 0.4)));

        assert_eq!(mix_samples(&[&a]).unwrap(), a);

        let negs: Vec<Sample> = (0..3)
            .map(|i| Sample::new(i.to_string(), px(0.1 * i as f32), LabelVector::filled(4, N)))
            .collect();
        let m = mix_samples(&negs.iter().collect::<Vec<_>>()).unwrap();
        assert_eq!(m.labels, LabelVector::filled(4, N));
        assert_eq!(m.id, "0+1+2");
    }

    #[test]
    fn lmt_layout_is_exact() {
        let t = ImageTensor::new(1, 2, 1, vec![0.25, 1.0]).unwrap();
        let mut buf = Vec::new();
        t.write_lmt(&mut buf).unwrap();
        let mut expected = b"LMT1".to_vec();
        for d in [1u32, 2, 1] {
            expected.extend(d.to_le_bytes());
        }
        expected.extend(0.25f32.to_le_bytes());
        expected.extend(1.0f32.to_le_bytes());
        assert_eq!(buf, expected);
        assert_eq!(ImageTensor::read_lmt(&buf[..]).unwrap(), t);
        assert!(matches!(
            ImageTensor::read_lmt(&b"LMT2\0\0\0\0"[..]),
            Err(Error::Format(_))
        ));
        assert!(ImageTensor::read_lmt(&buf[..buf.len() - 1]).is_err());
    }

    fn tensor(len: usize) -> impl Strategy<Value = ImageTensor> {
        prop::collection::vec(0f32..=1.0, len)
            .prop_map(move |d| ImageTensor::new(1, len, 1, d).unwrap())
    }

    proptest! {
        #[test]
        fn mixing_stays_in_unit_range(
            images in prop::collection::vec(tensor(6), 1..6),
            raw in prop::collection::vec(0f64..10.0, 6),
        ) {
            let mut w = raw[..images.len()].to_vec();
            w[0] += 1e-3;
            let refs: Vec<&ImageTensor> = images.iter().collect();
            let out = mix_images(&refs, &MixWeights::new(w).unwrap()).unwrap();
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn equal_weight_mix_ignores_order(
            images in prop::collection::vec(tensor(5), 2..6),
            labels in prop::collection::vec(prop::collection::vec(0u8..3, 3), 6),
        ) {
            let samples: Vec<Sample> = images.into_iter().enumerate().map(|(i, im)| {
                let l = labels[i].iter().map(|&c| [N, P, U][c as usize]).collect();
                Sample::new(i.to_string(), im, l)
            }).collect();
            let fwd: Vec<&Sample> = samples.iter().collect();
            let rev: Vec<&Sample> = samples.iter().rev().collect();
            let a = mix_samples(&fwd).unwrap();
            let b = mix_samples(&rev).unwrap();
            prop_assert_eq!(a.labels, b.labels);
            for (x, y) in a.image.data().iter().zip(b.image.data()) {
                prop_assert!((x - y).abs() <= f32::EPSILON);
            }
        }

        #[test]
        fn mixing_duplicates_is_identity(image in tensor(16), k in 1usize..9) {
            let s = Sample::new("x", image, LabelVector::new(vec![P, U, N]));
            let copies: Vec<&Sample> = std::iter::repeat_n(&s, k).collect();
            let m = mix_samples(&copies).unwrap();
            prop_assert_eq!(&m.labels, &s.labels);
            for (x, y) in m.image.data().iter().zip(s.image.data()) {
                // within one ulp
                prop_assert!((x - y).abs() <= y.abs() * f32::EPSILON + f32::MIN_POSITIVE);
            }
        }
    }
}
