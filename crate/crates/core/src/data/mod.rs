//! Datasets of frame-level features, sparse frame sampling, N-way K-shot
//! episodes and the synthetic benchmark generator.

mod episode;
mod frames;
mod synthetic;

pub use episode::{sample_episode, Episode, EpisodeItem};
pub use frames::{sample_frame_indices, sample_frames, segment_ranges};
pub use synthetic::{generate_synthetic, Synthetic, SyntheticSpec};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Matrix, Result};

/// Which class-disjoint partition a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Split {
    MetaTrain,
    MetaVal,
    MetaTest,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::MetaTrain => 0,
            Split::MetaVal => 1,
            Split::MetaTest => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Split> {
        match tag {
            0 => Some(Split::MetaTrain),
            1 => Some(Split::MetaVal),
            2 => Some(Split::MetaTest),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::MetaTrain => "meta-train",
            Split::MetaVal => "meta-val",
            Split::MetaTest => "meta-test",
        }
    }

    pub fn from_name(name: &str) -> Option<Split> {
        [Split::MetaTrain, Split::MetaVal, Split::MetaTest]
            .into_iter()
            .find(|s| s.name() == name)
    }
}

/// One video after backbone extraction: a `frames x d_raw` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub id: u64,
    pub label: u32,
    pub frames: Matrix,
}

/// Immutable collection of videos from one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<VideoSample>,
    classes: Vec<String>,
    split: Split,
    d_raw: usize,
    by_class: Vec<Vec<usize>>,
}

impl Dataset {
    /// Validates labels, frame shapes, finiteness and id uniqueness.
    ///
    /// `d_raw` is only consulted when `samples` is empty.
    pub fn new(
        classes: Vec<String>,
        split: Split,
        d_raw: usize,
        samples: Vec<VideoSample>,
    ) -> Result<Self> {
        let d_raw = samples.first().map_or(d_raw, |s| s.frames.cols());
        let mut by_class = vec![Vec::new(); classes.len()];
        let mut ids = BTreeSet::new();
        let distinct: BTreeSet<&String> = classes.iter().collect();
        if distinct.len() != classes.len() {
            return Err(Error::Precondition("duplicate class names".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            let label = s.label as usize;
            if label >= classes.len() {
                return Err(Error::Precondition(format!(
                    "sample {} has label {label} but only {} classes",
                    s.id,
                    classes.len()
                )));
            }
            if s.frames.rows() == 0 {
                return Err(Error::Precondition(format!("sample {} has no frames", s.id)));
            }
            if s.frames.cols() != d_raw {
                return Err(Error::shape("Dataset::new", (s.frames.rows(), d_raw), s.frames.shape()));
            }
            if !s.frames.is_finite() {
                return Err(Error::Precondition(format!("sample {} has non-finite frames", s.id)));
            }
            if !ids.insert(s.id) {
                return Err(Error::Precondition(format!("duplicate sample id {}", s.id)));
            }
            by_class[label].push(i);
        }
        Ok(Dataset {
            samples,
            classes,
            split,
            d_raw,
            by_class,
        })
    }

    pub fn samples(&self) -> &[VideoSample] {
        &self.samples
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn d_raw(&self) -> usize {
        self.d_raw
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Indices into [`Dataset::samples`] of every sample with label `class`.
    pub fn class_members(&self, class: usize) -> &[usize] {
        &self.by_class[class]
    }
}

/// Reject datasets whose class-name sets overlap.
pub fn check_disjoint_splits(sets: &[&Dataset]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if a.split == b.split {
                return Err(Error::Precondition(format!(
                    "two datasets share split {}",
                    a.split.name()
                )));
            }
            let names: BTreeSet<&String> = a.classes.iter().collect();
            if let Some(c) = b.classes.iter().find(|c| names.contains(c)) {
                return Err(Error::Precondition(format!(
                    "class {c} appears in both {} and {}",
                    a.split.name(),
                    b.split.name()
                )));
            }
        }
    }
    Ok(())
}

/// Meta-train / meta-val / meta-test triple with class-disjointness checked
/// on construction.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn new(train: Dataset, val: Dataset, test: Dataset) -> Result<Self> {
        for (ds, want) in [(&train, Split::MetaTrain), (&val, Split::MetaVal), (&test, Split::MetaTest)] {
            if ds.split != want {
                return Err(Error::Precondition(format!(
                    "expected a {} dataset, got {}",
                    want.name(),
                    ds.split.name()
                )));
            }
        }
        check_disjoint_splits(&[&train, &val, &test])?;
        Ok(Splits { train, val, test })
    }
}
