//! Activation profiling toolkit for transformer language models.
//!
//! The pipeline is file-mediated:
//!
//! ```text
//! capture files (.nact) + manifest.json
//!     -> metrics CSV (one row per model x prompt)
//!     -> report tables (CSV / Markdown / SVG)
//! ```
//!
//! Capture files hold every hidden state (embedding output plus one per
//! transformer layer) and every post-softmax attention map for a single
//! forward pass. [`metrics`] reduces a capture to three scalars: mean final
//! activation, attention entropy and peak layer sparsity. [`aggregate`] and
//! [`report`] turn the per-record rows into the comparison tables.

pub mod aggregate;
pub mod capture;
pub mod cli;
pub mod corpus;
pub mod metrics;
pub mod report;

pub use capture::{
    gen_synthetic, read_record, validate_record, write_record, Architecture, AttentionKind,
    CaptureRecord, HiddenKind, ModelSpec, Tensor, ValidationConfig, ValidationReport,
};

pub use corpus::{load_canonical, load_corpus, PromptItem};
pub use metrics::{compute_record_metrics, MetricConfig, MetricRow, SparsityLayerSet};
