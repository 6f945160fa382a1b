//! Per-record activation metrics.
//!
//! * final activation: mean of every entry of the last hidden tensor
//!   (all `S x N` values);
//! * attention entropy: `-a ln a` summed over every `(query, key)` pair of a
//!   head, averaged over all `L x H` heads. No per-row normalization, so the
//!   value grows with sequence length; uniform attention gives `S ln S`;
//! * max sparsity: the largest per-layer fraction of hidden entries with
//!   `|h| < epsilon`.
//!
//! All reductions run in `f64` over the stored `f32` values. Non-positive
//! attention values contribute nothing to the entropy.

mod accum;
mod stream;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{
    validate_record, Architecture, CaptureError, CaptureRecord, ValidationConfig, ValidationReport,
};

pub use accum::MetricAccumulator;
pub use stream::{scan_capture, scan_file, ScanOutcome};

pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid record: {0}")]
    InvalidRecord(ValidationReport),
    #[error("layer index {index} out of range 0..={max}")]
    LayerOutOfRange { index: usize, max: usize },
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
    #[error("record has no {0} tensors")]
    Empty(&'static str),
    #[error(transparent)]
    Capture(#[from] CaptureError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityLayerSet {
    /// `hidden.0 ..= hidden.L`, embedding output included.
    #[default]
    AllHiddenIncludingEmbedding,
    /// `hidden.1 ..= hidden.L`.
    TransformerLayersOnly,
}

impl SparsityLayerSet {
    /// First hidden index scanned for sparsity.
    pub fn first_layer(self) -> usize {
        match self {
            SparsityLayerSet::AllHiddenIncludingEmbedding => 0,
            SparsityLayerSet::TransformerLayersOnly => 1,
        }
    }
}

impl FromStr for SparsityLayerSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(SparsityLayerSet::AllHiddenIncludingEmbedding),
            "transformer" => Ok(SparsityLayerSet::TransformerLayersOnly),
            other => Err(format!(
                "unknown layer set {other:?} (expected all|transformer)"
            )),
        }
    }
}

impl fmt::Display for SparsityLayerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SparsityLayerSet::AllHiddenIncludingEmbedding => "all",
            SparsityLayerSet::TransformerLayersOnly => "transformer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    epsilon: f64,
    sparsity_layer_set: SparsityLayerSet,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            sparsity_layer_set: SparsityLayerSet::default(),
        }
    }
}

impl MetricConfig {
    pub fn new(epsilon: f64, sparsity_layer_set: SparsityLayerSet) -> Result<Self, MetricsError> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(MetricsError::InvalidConfig(format!(
                "epsilon must be a positive finite number, got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            sparsity_layer_set,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sparsity_layer_set(&self) -> SparsityLayerSet {
        self.sparsity_layer_set
    }
}

/// The three metrics for one capture record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model_name: String,
    pub architecture: Architecture,
    pub param_count: u64,
    pub category: String,
    pub prompt_id: String,
    pub final_activation: f64,
    /// Nats.
    pub attention_entropy: f64,
    pub max_sparsity: f64,
    /// Sparsity of each hidden tensor in the configured layer set, in layer order.
    pub per_layer_sparsity: Option<Vec<f64>>,
    /// Mean head entropy of each attention layer.
    pub per_layer_entropy: Option<Vec<f64>>,
}

fn require_valid(record: &CaptureRecord) -> Result<(), MetricsError> {
    let report = validate_record(record, &ValidationConfig::default());
    if report.is_empty() {
        Ok(())
    } else {
        Err(MetricsError::InvalidRecord(report))
    }
}

/// Mean of all `S x N` entries of the last hidden tensor.
pub fn final_activation(
    record: &CaptureRecord,
    _config: &MetricConfig,
) -> Result<f64, MetricsError> {
    let last = record.hidden.last().ok_or(MetricsError::Empty("hidden"))?;
    let mut sum = 0.0;
    accum::add_values(&mut sum, last.data());
    Ok(sum / last.numel() as f64)
}

/// Head-averaged attention entropy in nats.
pub fn attention_entropy(
    record: &CaptureRecord,
    _config: &MetricConfig,
) -> Result<f64, MetricsError> {
    if record.attention.is_empty() {
        return Err(MetricsError::Empty("attention"));
    }
    let mut total = 0.0;
    let mut heads = 0usize;
    for t in &record.attention {
        accum::add_entropy(&mut total, t.data());
        heads += t.shape().first().copied().unwrap_or(1);
    }
    Ok(total / heads as f64)
}

/// Fraction of `hidden.layer_index` entries with `|h| < epsilon`.
pub fn layer_sparsity(
    record: &CaptureRecord,
    layer_index: usize,
    config: &MetricConfig,
) -> Result<f64, MetricsError> {
    let t = record
        .hidden
        .get(layer_index)
        .ok_or(MetricsError::LayerOutOfRange {
            index: layer_index,
            max: record.hidden.len().saturating_sub(1),
        })?;
    Ok(accum::count_below(t.data(), config.epsilon) as f64 / t.numel() as f64)
}

/// Largest layer sparsity over the configured layer set.
pub fn max_sparsity(record: &CaptureRecord, config: &MetricConfig) -> Result<f64, MetricsError> {
    let first = config.sparsity_layer_set.first_layer();
    if record.hidden.len() <= first {
        return Err(MetricsError::Empty("hidden"));
    }
    (first..record.hidden.len())
        .map(|l| layer_sparsity(record, l, config))
        .try_fold(0.0f64, |acc, s| Ok(acc.max(s?)))
}

/// All three metrics plus per-layer breakdowns. Rejects invalid records.
pub fn compute_record_metrics(
    record: &CaptureRecord,
    config: &MetricConfig,
) -> Result<MetricRow, MetricsError> {
    require_valid(record)?;
    let mut acc = MetricAccumulator::new(*config, record.hidden.len(), record.attention.len());
    for (i, t) in record.hidden.iter().enumerate() {
        acc.hidden_values(i, t.data());
    }
    for (i, t) in record.attention.iter().enumerate() {
        acc.attention_values(i, t.shape()[0], t.data());
    }
    acc.finish(&record.model, &record.category, &record.prompt_id)
}
