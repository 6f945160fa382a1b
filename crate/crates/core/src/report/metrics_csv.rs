use std::io::{Read, Write};

use crate::capture::Architecture;
use crate::metrics::MetricRow;

use super::ReportError;

/// Column order of the per-record metrics CSV.
///
/// Metric values are written in shortest round-trip form so a reread row is
/// bit-identical; per-layer lists are `;`-separated and empty when absent.
pub const METRICS_CSV_HEADER: [&str; 10] = [
    "model",
    "architecture",
    "param_count",
    "category",
    "prompt_id",
    "final_activation",
    "attention_entropy",
    "max_sparsity",
    "per_layer_sparsity",
    "per_layer_entropy",
];

fn join(values: &Option<Vec<f64>>) -> String {
    values
        .as_ref()
        .map(|v| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
        .unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], sink: W) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record(METRICS_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.model_name.clone(),
            r.architecture.as_str().to_string(),
            r.param_count.to_string(),
            r.category.clone(),
            r.prompt_id.clone(),
            r.final_activation.to_string(),
            r.attention_entropy.to_string(),
            r.max_sparsity.to_string(),
            join(&r.per_layer_sparsity),
            join(&r.per_layer_entropy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a metrics CSV. The two per-layer columns are optional.
pub fn read_metrics_csv<R: Read>(source: R) -> Result<Vec<MetricRow>, ReportError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(&METRICS_CSV_HEADER[..8]) {
        *slot = column(name).ok_or_else(|| ReportError::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })?;
    }
    let sparsity_col = column("per_layer_sparsity");
    let entropy_col = column("per_layer_entropy");

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| ReportError::Parse { line, message };
        let field = |i: usize| record.get(i).unwrap_or("");
        let number = |slot: usize| -> Result<f64, ReportError> {
            field(idx[slot])
                .parse::<f64>()
                .map_err(|e| err(format!("{}: {e}", METRICS_CSV_HEADER[slot])))
        };
        let list = |col: Option<usize>| -> Result<Option<Vec<f64>>, ReportError> {
            match col.map(&field) {
                None | Some("") => Ok(None),
                Some(s) => s
                    .split(';')
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|e| err(format!("per-layer value {v:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map(Some),
            }
        };
        let architecture: Architecture = field(idx[1]).parse().map_err(err)?;
        let param_count = field(idx[2])
            .parse::<u64>()
            .map_err(|e| err(format!("param_count: {e}")))?;
        rows.push(MetricRow {
            model_name: field(idx[0]).to_string(),
            architecture,
            param_count,
            category: field(idx[3]).to_string(),
            prompt_id: field(idx[4]).to_string(),
            final_activation: number(5)?,
            attention_entropy: number(6)?,
            max_sparsity: number(7)?,
            per_layer_sparsity: list(sparsity_col)?,
            per_layer_entropy: list(entropy_col)?,
        });
    }
    Ok(rows)
}
