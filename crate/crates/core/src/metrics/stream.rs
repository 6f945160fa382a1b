use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::capture::{
    check_attention_rows, check_finite, read_header, scan_payload, CaptureHeader, TensorKind,
    ValidationConfig, ValidationReport,
};

use super::{MetricAccumulator, MetricConfig, MetricRow, MetricsError};

/// Result of a single streaming pass over a capture.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub header: CaptureHeader,
    /// Present only when `report` is empty.
    pub metrics: Option<MetricRow>,
    pub report: ValidationReport,
}

/// Validates and reduces a capture in one pass without materializing tensors.
///
/// Memory use is bounded by one decode chunk regardless of capture size.
/// Container-level problems (bad magic, truncation) are errors; record
/// invariant violations are returned in [`ScanOutcome::report`].
pub fn scan_capture<R: Read>(
    source: &mut R,
    metric_config: &MetricConfig,
    validation: &ValidationConfig,
) -> Result<ScanOutcome, MetricsError> {
    let header = read_header(source)?;
    let mut report = header.shape_report();
    let (hidden, attention) = header.shapes();
    let mut acc = MetricAccumulator::new(*metric_config, hidden.len(), attention.len());
    scan_payload(source, &header, |kind, entry, first, values| match kind {
        TensorKind::Hidden(i) => {
            check_finite(&entry.name, first, values, &mut report);
            acc.hidden_values(i, values);
        }
        TensorKind::Attention(i) => {
            check_finite(&entry.name, first, values, &mut report);
            let row_len = entry.row_len().max(1);
            check_attention_rows(
                &entry.name,
                &entry.shape,
                first / row_len,
                values,
                validation,
                &mut report,
            );
            acc.attention_values(i, entry.shape.first().copied().unwrap_or(1), values);
        }
    })?;
    let metrics = if report.is_empty() {
        Some(acc.finish(&header.model, &header.category, &header.prompt_id)?)
    } else {
        None
    };
    Ok(ScanOutcome {
        header,
        metrics,
        report,
    })
}

pub fn scan_file(
    path: &Path,
    metric_config: &MetricConfig,
    validation: &ValidationConfig,
) -> Result<ScanOutcome, MetricsError> {
    let mut reader = BufReader::with_capacity(
        1 << 16,
        File::open(path).map_err(crate::capture::CaptureError::from)?,
    );
    scan_capture(&mut reader, metric_config, validation)
}
