use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CaptureRecord, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Attention values may fall outside `[0, 1]` by at most this much.
    pub range_tolerance: f64,
    /// Allowed `|row_sum - 1|` for every attention row.
    pub row_sum_tolerance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            range_tolerance: 1e-4,
            row_sum_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationClass {
    Shape,
    Range,
    RowSum,
    Finiteness,
}

impl ViolationClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationClass::Shape => "shape",
            ViolationClass::Range => "range",
            ViolationClass::RowSum => "row_sum",
            ViolationClass::Finiteness => "finiteness",
        }
    }
}

impl fmt::Display for ViolationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub class: ViolationClass,
    /// Tensor name (`hidden.2`, `attn.0`) or record field (`model.num_heads`).
    pub target: String,
    /// Position inside the target, empty for whole-field violations.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.class, self.target)?;
        if !self.location.is_empty() {
            write!(f, " {}", self.location)?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Every invariant a record violates. Empty iff the record is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn classes(&self) -> BTreeSet<ViolationClass> {
        self.violations.iter().map(|v| v.class).collect()
    }

    pub fn has_class(&self, class: ViolationClass) -> bool {
        self.violations.iter().any(|v| v.class == class)
    }

    fn add(
        &mut self,
        class: ViolationClass,
        target: &str,
        location: String,
        message: impl Into<String>,
    ) {
        self.violations.push(Violation {
            class,
            target: target.to_string(),
            location,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 3;
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().take(SHOWN).enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        if self.violations.len() > SHOWN {
            write!(f, "; and {} more", self.violations.len() - SHOWN)?;
        }
        Ok(())
    }
}

/// Structural checks: model dimensions, tensor counts and tensor shapes.
pub fn check_shapes(
    model: &ModelSpec,
    seq_len: usize,
    hidden_shapes: &[&[usize]],
    attention_shapes: &[&[usize]],
    report: &mut ValidationReport,
) {
    for problem in model.problems() {
        let target = problem
            .split_whitespace()
            .next()
            .unwrap_or("model")
            .to_string();
        report.add(ViolationClass::Shape, &target, String::new(), problem);
    }
    if seq_len == 0 {
        report.add(
            ViolationClass::Shape,
            "seq_len",
            String::new(),
            "seq_len must be >= 1",
        );
    }
    let layers = model.num_layers;
    if hidden_shapes.len() != layers + 1 {
        report.add(
            ViolationClass::Shape,
            "hidden",
            String::new(),
            format!(
                "expected {} hidden tensors (num_layers + 1), found {}",
                layers + 1,
                hidden_shapes.len()
            ),
        );
    }
    if attention_shapes.len() != layers {
        report.add(
            ViolationClass::Shape,
            "attn",
            String::new(),
            format!(
                "expected {} attention tensors, found {}",
                layers,
                attention_shapes.len()
            ),
        );
    }
    let hidden_expected = [seq_len, model.hidden_dim];
    for (i, shape) in hidden_shapes.iter().enumerate() {
        if *shape != hidden_expected {
            report.add(
                ViolationClass::Shape,
                &CaptureRecord::hidden_name(i),
                String::new(),
                format!("shape {shape:?}, expected {hidden_expected:?}"),
            );
        }
    }
    let attn_expected = [model.num_heads, seq_len, seq_len];
    for (i, shape) in attention_shapes.iter().enumerate() {
        if *shape != attn_expected {
            report.add(
                ViolationClass::Shape,
                &CaptureRecord::attention_name(i),
                String::new(),
                format!("shape {shape:?}, expected {attn_expected:?}"),
            );
        }
    }
}

/// Flags every NaN or infinity in `values`, which start at flat index `offset`.
pub fn check_finite(name: &str, offset: usize, values: &[f32], report: &mut ValidationReport) {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            report.add(
                ViolationClass::Finiteness,
                name,
                format!("[flat {}]", offset + i),
                format!("non-finite value {v}"),
            );
        }
    }
}

/// Range and row-sum checks over whole attention rows.
///
/// `first_row` is the global row index of `rows[..row_len]` inside a tensor of
/// shape `[H, S, S]`; rows containing a non-finite value are left to
/// [`check_finite`].
pub fn check_attention_rows(
    name: &str,
    shape: &[usize],
    first_row: usize,
    rows: &[f32],
    config: &ValidationConfig,
    report: &mut ValidationReport,
) {
    let row_len = shape.last().copied().unwrap_or(1).max(1);
    let rows_per_head = if shape.len() >= 2 {
        shape[shape.len() - 2].max(1)
    } else {
        1
    };
    let lo = -config.range_tolerance;
    let hi = 1.0 + config.range_tolerance;
    for (r, row) in rows.chunks(row_len).enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let global = first_row + r;
        let (head, query) = (global / rows_per_head, global % rows_per_head);
        let mut sum = 0.0f64;
        for (j, &v) in row.iter().enumerate() {
            let v = v as f64;
            if v < lo || v > hi {
                report.add(
                    ViolationClass::Range,
                    name,
                    format!(
                        "[head {head}, row {query}, col {j}] [flat {}]",
                        global * row_len + j
                    ),
                    format!("value {v} outside [0, 1]"),
                );
            }
            sum += v;
        }
        if (sum - 1.0).abs() > config.row_sum_tolerance {
            report.add(
                ViolationClass::RowSum,
                name,
                format!("[head {head}, row {query}]"),
                format!(
                    "row sums to {sum:.6}, expected 1 within {}",
                    config.row_sum_tolerance
                ),
            );
        }
    }
}

/// Checks every record invariant; never fails, violations are returned as data.
pub fn validate_record(record: &CaptureRecord, config: &ValidationConfig) -> ValidationReport {
    let mut report = ValidationReport::new();
    let hidden: Vec<&[usize]> = record.hidden.iter().map(|t| t.shape()).collect();
    let attention: Vec<&[usize]> = record.attention.iter().map(|t| t.shape()).collect();
    check_shapes(
        &record.model,
        record.seq_len,
        &hidden,
        &attention,
        &mut report,
    );
    for (i, t) in record.hidden.iter().enumerate() {
        check_finite(&CaptureRecord::hidden_name(i), 0, t.data(), &mut report);
    }
    for (i, t) in record.attention.iter().enumerate() {
        let name = CaptureRecord::attention_name(i);
        check_finite(&name, 0, t.data(), &mut report);
        check_attention_rows(&name, t.shape(), 0, t.data(), config, &mut report);
    }
    report
}
