//! Three-valued labels and the logical-OR algebra used to mix them.
//!
//! A partially labeled sample carries, per category, either a known
//! presence (`Positive`), a known absence (`Negative`) or nothing at all
//! (`Unknown`). Mixing OR-reduces these: one known positive dominates
//! everything, known negatives are the identity, and any remaining unknown
//! keeps the result unknown.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest number of unknown entries [`enumerate_completions`] will expand.
pub const MAX_ENUMERATED_UNKNOWNS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TernaryLabel {
    Negative,
    Positive,
    Unknown,
}

impl TernaryLabel {
    pub const ALL: [TernaryLabel; 3] = [
        TernaryLabel::Negative,
        TernaryLabel::Positive,
        TernaryLabel::Unknown,
    ];

    pub fn from_bool(present: bool) -> Self {
        if present {
            TernaryLabel::Positive
        } else {
            TernaryLabel::Negative
        }
    }

    pub fn is_known(self) -> bool {
        self != TernaryLabel::Unknown
    }

    /// `Some(true)` for positive, `Some(false)` for negative.
    pub fn as_bool(self) -> Option<bool> {
        match self {
            TernaryLabel::Negative => Some(false),
            TernaryLabel::Positive => Some(true),
            TernaryLabel::Unknown => None,
        }
    }

    /// Binary OR extended to unknowns: `q ∨ 1 = 1`, `q ∨ 0 = q`.
    pub fn or(self, other: TernaryLabel) -> TernaryLabel {
        use TernaryLabel::*;
        match (self, other) {
            (Positive, _) | (_, Positive) => Positive,
            (Negative, Negative) => Negative,
            _ => Unknown,
        }
    }

    /// Compact code: 1, 0, -1.
    pub fn to_code(self) -> i8 {
        match self {
            TernaryLabel::Positive => 1,
            TernaryLabel::Negative => 0,
            TernaryLabel::Unknown => -1,
        }
    }

    pub fn from_code(code: i8) -> Option<Self> {
        match code {
            1 => Some(TernaryLabel::Positive),
            0 => Some(TernaryLabel::Negative),
            -1 => Some(TernaryLabel::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for TernaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TernaryLabel::Negative => "0",
            TernaryLabel::Positive => "1",
            TernaryLabel::Unknown => "?",
        })
    }
}

// JSON form: 1, 0, null.
impl Serialize for TernaryLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TernaryLabel::Positive => serializer.serialize_u8(1),
            TernaryLabel::Negative => serializer.serialize_u8(0),
            TernaryLabel::Unknown => serializer.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for TernaryLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match Option::<i64>::deserialize(deserializer)? {
            None => Ok(TernaryLabel::Unknown),
            Some(1) => Ok(TernaryLabel::Positive),
            Some(0) => Ok(TernaryLabel::Negative),
            Some(other) => Err(serde::de::Error::custom(format!(
                "invalid label value {other}, expected 1, 0 or null"
            ))),
        }
    }
}

/// OR over `K >= 1` labels.
pub fn or_reduce(labels: &[TernaryLabel]) -> Result<TernaryLabel> {
    let (first, rest) = labels
        .split_first()
        .ok_or_else(|| Error::contract("or_reduce needs at least one label"))?;
    Ok(rest.iter().fold(*first, |acc, &l| acc.or(l)))
}

/// Fixed-length label vector over the `C` categories of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(Box<[TernaryLabel]>);

impl LabelVector {
    pub fn new(labels: Vec<TernaryLabel>) -> Self {
        LabelVector(labels.into_boxed_slice())
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        bits.iter().copied().map(TernaryLabel::from_bool).collect()
    }

    pub fn filled(len: usize, label: TernaryLabel) -> Self {
        LabelVector::new(vec![label; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, category: usize) -> Option<TernaryLabel> {
        self.0.get(category).copied()
    }

    pub fn as_slice(&self) -> &[TernaryLabel] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = TernaryLabel> + '_ {
        self.0.iter().copied()
    }

    pub fn count(&self, label: TernaryLabel) -> usize {
        self.0.iter().filter(|&&l| l == label).count()
    }

    pub fn is_fully_known(&self) -> bool {
        self.0.iter().all(|l| l.is_known())
    }

    /// True if every known entry agrees with `truth`.
    pub fn is_consistent_with(&self, truth: &[bool]) -> bool {
        self.len() == truth.len()
            && self
                .iter()
                .zip(truth)
                .all(|(l, &t)| l.as_bool().is_none_or(|b| b == t))
    }

    pub fn to_codes(&self) -> Vec<i8> {
        self.iter().map(TernaryLabel::to_code).collect()
    }
}

impl FromIterator<TernaryLabel> for LabelVector {
    fn from_iter<I: IntoIterator<Item = TernaryLabel>>(iter: I) -> Self {
        LabelVector::new(iter.into_iter().collect())
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, l) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("]")
    }
}

/// Element-wise [`or_reduce`] over one or more equal-length vectors.
pub fn mix_label_vectors<'a, I>(vectors: I) -> Result<LabelVector>
where
    I: IntoIterator<Item = &'a LabelVector>,
{
    let mut iter = vectors.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::contract("mix_label_vectors needs at least one vector"))?;
    let mut acc: Vec<TernaryLabel> = first.as_slice().to_vec();
    for v in iter {
        if v.len() != acc.len() {
            return Err(Error::dimension(format!(
                "label vector of length {} mixed with length {}",
                v.len(),
                acc.len()
            )));
        }
        for (a, l) in acc.iter_mut().zip(v.iter()) {
            *a = a.or(l);
        }
    }
    Ok(LabelVector::new(acc))
}

/// Every binary vector obtained by filling the unknowns of `vector` with 0 or 1.
///
/// Test oracle: expands `2^u` completions, so `u` is capped at
/// [`MAX_ENUMERATED_UNKNOWNS`].
pub fn enumerate_completions(vector: &LabelVector) -> Result<BTreeSet<Vec<bool>>> {
    let unknown_at: Vec<usize> = vector
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_known())
        .map(|(i, _)| i)
        .collect();
    if unknown_at.len() > MAX_ENUMERATED_UNKNOWNS {
        return Err(Error::EnumerationTooLarge {
            unknowns: unknown_at.len(),
            limit: MAX_ENUMERATED_UNKNOWNS,
        });
    }
    let base: Vec<bool> = vector.iter().map(|l| l == TernaryLabel::Positive).collect();
    let mut out = BTreeSet::new();
    for mask in 0u32..(1u32 << unknown_at.len()) {
        let mut bits = base.clone();
        for (bit, &pos) in unknown_at.iter().enumerate() {
            bits[pos] = mask >> bit & 1 == 1;
        }
        out.insert(bits);
    }
    Ok(out)
}
