//! Labelled image datasets: the MSTF binary format, a synthetic multispectral
//! generator for desk-scale runs, stratified splitting, and per-channel
//! standardization.

mod mstf;
mod split;
mod synth;

pub use mstf::{decode_tensor_file, encode_tensor_file, read_tensor_file, write_tensor_file, MAGIC, VERSION};
pub use split::{split_dataset, split_indices, standardize, Standardization, STD_FLOOR};
pub use synth::{nearest_centroid_accuracy, synth_dataset, synth_dataset_with_stats, SynthConfig, SynthStats};

use thiserror::Error;

use crate::nn::Tensor4;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad magic {0:?}, expected \"MSTF\"")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("file truncated: needed {needed} bytes, have {available}")]
    Truncated { needed: u64, available: u64 },

    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error("label {label} at index {index} does not fit in 16 bits")]
    LabelTooLarge { index: usize, label: usize },

    #[error("metadata is not valid UTF-8")]
    Metadata,

    #[error("invalid dataset: {0}")]
    Invalid(String),

    #[error("class {class} has {count} samples, need at least 2 to split")]
    ClassTooSmall { class: usize, count: usize },

    #[error("invalid synthetic config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Images in NCHW layout with one label per image.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    images: Tensor4<f32>,
    labels: Vec<usize>,
    num_classes: usize,
    class_names: Vec<String>,
}

impl Dataset {
    /// `num_classes` must exceed every label. `class_names` is either empty
    /// or has one entry per class.
    pub fn new(
        images: Tensor4<f32>,
        labels: Vec<usize>,
        num_classes: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != images.n() {
            return Err(DataError::Invalid(format!(
                "{} labels for {} images",
                labels.len(),
                images.n()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(DataError::Invalid(format!(
                "label {l} at index {i} outside 0..{num_classes}"
            )));
        }
        if !class_names.is_empty() && class_names.len() != num_classes {
            return Err(DataError::Invalid(format!(
                "{} class names for {num_classes} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            images,
            labels,
            num_classes,
            class_names,
        })
    }

    /// Infers the class count from the larger of the name list and the
    /// largest label.
    pub fn from_parts(images: Tensor4<f32>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let from_labels = labels.iter().max().map_or(0, |&m| m + 1);
        let num_classes = from_labels.max(class_names.len());
        Self::new(images, labels, num_classes, class_names)
    }

    pub fn images(&self) -> &Tensor4<f32> {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[c, h, w]` of one image.
    pub fn sample_shape(&self) -> [usize; 3] {
        let [_, c, h, w] = self.images.shape();
        [c, h, w]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Samples at `indices`, in that order. Class metadata is kept.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            images: self.images.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            class_names: self.class_names.clone(),
        }
    }

    pub(crate) fn images_mut(&mut self) -> &mut Tensor4<f32> {
        &mut self.images
    }
}
