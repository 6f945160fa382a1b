//! Binary capture records: one model forward pass over one prompt.
//!
//! A record carries `L + 1` hidden-state tensors (embedding output at index 0,
//! then one per transformer layer) of shape `[S, N]`, and `L` attention tensors
//! of shape `[H, S, S]` holding post-softmax probabilities. On disk every value
//! is a little-endian `f32`; see [`format`] for the container layout.

mod format;
mod manifest;
mod model;
mod synth;
mod validate;

use std::fmt;

use thiserror::Error;

pub use format::{
    read_header, read_record, read_record_unchecked, scan_payload, write_record, CaptureHeader,
    TensorEntry, TensorKind, CAPTURE_EXTENSION, FORMAT_VERSION, MAGIC, TENSOR_ALIGNMENT,
};
pub use manifest::{ManifestEntry, RunManifest, MANIFEST_FILE};
pub use model::{reference_models, Architecture, ModelSpec};
pub use synth::{gen_synthetic, AttentionKind, HiddenKind};
pub use validate::{
    check_attention_rows, check_finite, check_shapes, validate_record, ValidationConfig,
    ValidationReport, Violation, ViolationClass,
};

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("corrupt capture: {0}")]
    Corruption(String),
    #[error("invalid record: {0}")]
    Validation(ValidationReport),
    #[error("tensor shape {shape:?} needs {expected} elements, got {actual}")]
    ShapeMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
}

pub type Result<T, E = CaptureError> = std::result::Result<T, E>;

/// Dense row-major `f32` tensor.
///
/// Equality is bitwise on the element data, so two tensors compare equal
/// exactly when they would serialize to the same bytes.
#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected = shape.iter().product::<usize>();
        if expected != data.len() {
            return Err(CaptureError::ShapeMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Vec<usize>, value: f32) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Length of the innermost dimension (1 for a scalar).
    pub fn row_len(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * 4
    }
}

impl PartialEq for Tensor {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for Tensor {}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("numel", &self.data.len())
            .finish()
    }
}

/// One model x prompt forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureRecord {
    pub model: ModelSpec,
    pub category: String,
    pub prompt_id: String,
    pub prompt_text: String,
    pub seq_len: usize,
    /// `L + 1` tensors `[S, N]`; index 0 is the embedding output.
    pub hidden: Vec<Tensor>,
    /// `L` tensors `[H, S, S]`.
    pub attention: Vec<Tensor>,
}

impl CaptureRecord {
    /// Name of a hidden-state tensor in the container header.
    pub fn hidden_name(index: usize) -> String {
        format!("hidden.{index}")
    }

    pub fn attention_name(index: usize) -> String {
        format!("attn.{index}")
    }

    /// Iterates `(name, tensor)` in container order: all hidden tensors, then all attention.
    pub fn named_tensors(&self) -> impl Iterator<Item = (String, &Tensor)> {
        self.hidden
            .iter()
            .enumerate()
            .map(|(i, t)| (Self::hidden_name(i), t))
            .chain(
                self.attention
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (Self::attention_name(i), t)),
            )
    }

    pub fn payload_bytes(&self) -> usize {
        self.hidden
            .iter()
            .chain(&self.attention)
            .map(Tensor::byte_len)
            .sum()
    }
}
