//! Byte-stable report tables.
//!
//! Each table id has a fixed column layout. CSV cells and Markdown cells are
//! produced from the same formatted strings: final activation and sparsity
//! with 4 decimals, entropy with 2, rounded half-to-even on the exact binary
//! value. Parameter counts are raw integers in CSV and humanized (`109.5M`) in
//! Markdown.

mod diff;
mod metrics_csv;
mod svg;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{
    architecture_comparison, category_performance, model_summary, scale_table, top_k,
    AggregateError, Direction, GroupProfile, LeaderboardEntry, Metric,
};
use crate::metrics::MetricRow;

pub use diff::{diff_tables, CellDiff, DiffMode, DiffOutcome};
pub use metrics_csv::{read_metrics_csv, write_metrics_csv, METRICS_CSV_HEADER};
pub use svg::{render_svg_bar, render_table_svg};
pub use table::{fmt_fixed, fmt_metric, humanize_params, render_csv, render_markdown};

/// Entries in every leaderboard table.
pub const LEADERBOARD_K: usize = 10;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to render")]
    EmptyView,
    #[error("unknown table id {0:?}")]
    UnknownTable(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    Architecture,
    CategoryPerformance,
    TopFinalActivation,
    Scale,
    ModelSummary,
    TopEntropy,
    LowestSparsity,
}

impl TableId {
    pub const ALL: [TableId; 7] = [
        TableId::Architecture,
        TableId::CategoryPerformance,
        TableId::TopFinalActivation,
        TableId::Scale,
        TableId::ModelSummary,
        TableId::TopEntropy,
        TableId::LowestSparsity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TableId::Architecture => "architecture",
            TableId::CategoryPerformance => "category_performance",
            TableId::TopFinalActivation => "top_final_activation",
            TableId::Scale => "scale",
            TableId::ModelSummary => "model_summary",
            TableId::TopEntropy => "top_entropy",
            TableId::LowestSparsity => "lowest_sparsity",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TableId::Architecture => "Architecture Comparison",
            TableId::CategoryPerformance => "Category Performance Across All Models",
            TableId::TopFinalActivation => "Top Performers by Final Activation",
            TableId::Scale => "Parameter Scale Analysis",
            TableId::ModelSummary => "Complete Model Summary Statistics",
            TableId::TopEntropy => "Top 10 Models by Attention Entropy",
            TableId::LowestSparsity => "Top 10 Models by Lowest Sparsity (Highest Density)",
        }
    }

    /// Metric and direction of leaderboard tables.
    pub fn leaderboard(self) -> Option<(Metric, Direction)> {
        match self {
            TableId::TopFinalActivation => Some((Metric::FinalActivation, Direction::Highest)),
            TableId::TopEntropy => Some((Metric::AttentionEntropy, Direction::Highest)),
            TableId::LowestSparsity => Some((Metric::MaxSparsity, Direction::Lowest)),
            _ => None,
        }
    }

    /// Parses a comma-separated list, keeping first-seen order and dropping repeats.
    pub fn parse_list(list: &str) -> Result<Vec<TableId>, ReportError> {
        let mut out = Vec::new();
        for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let id: TableId = part.parse()?;
            if !out.contains(&id) {
                out.push(id);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TableId {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TableId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ReportError::UnknownTable(s.to_string()))
    }
}

/// Aggregated data behind one table.
#[derive(Debug, Clone, PartialEq)]
pub enum View {
    Profiles(Vec<GroupProfile>),
    Leaderboard(Vec<LeaderboardEntry>),
}

impl View {
    pub fn is_empty(&self) -> bool {
        match self {
            View::Profiles(p) => p.is_empty(),
            View::Leaderboard(l) => l.is_empty(),
        }
    }
}

pub fn build_view(table: TableId, rows: &[MetricRow]) -> Result<View, ReportError> {
    if let Some((metric, direction)) = table.leaderboard() {
        return Ok(View::Leaderboard(top_k(
            rows,
            metric,
            LEADERBOARD_K,
            direction,
        )?));
    }
    Ok(View::Profiles(match table {
        TableId::Architecture => architecture_comparison(rows),
        TableId::CategoryPerformance => category_performance(rows),
        TableId::Scale => scale_table(rows)?,
        TableId::ModelSummary => model_summary(rows)?,
        _ => unreachable!("leaderboards handled above"),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Markdown,
    Svg,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
            ReportFormat::Svg => "svg",
        }
    }
}

/// Rendered tables of one format, keyed by table id.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub format: ReportFormat,
    pub tables: BTreeMap<TableId, Vec<u8>>,
}

pub fn render(view: &View, table: TableId, format: ReportFormat) -> Result<Vec<u8>, ReportError> {
    match format {
        ReportFormat::Csv => render_csv(view, table),
        ReportFormat::Markdown => Ok(render_markdown(view, table)),
        ReportFormat::Svg => render_table_svg(view, table),
    }
}

pub fn build_bundle(
    rows: &[MetricRow],
    tables: &[TableId],
    format: ReportFormat,
) -> Result<ReportBundle, ReportError> {
    let mut out = BTreeMap::new();
    for &table in tables {
        let view = build_view(table, rows)?;
        out.insert(table, render(&view, table, format)?);
    }
    Ok(ReportBundle {
        format,
        tables: out,
    })
}

/// Writes `<id>.csv` and `<id>.md` (plus `<id>.svg` with `charts`) for every
/// requested table, and an `index.md` linking them. Returns the file names
/// written, in write order.
pub fn write_report(
    dir: &Path,
    rows: &[MetricRow],
    tables: &[TableId],
    charts: bool,
) -> Result<Vec<String>, ReportError> {
    fs::create_dir_all(dir)?;
    let mut formats = vec![ReportFormat::Csv, ReportFormat::Markdown];
    if charts {
        formats.push(ReportFormat::Svg);
    }
    let mut written = Vec::new();
    let mut index = String::from("# Activation report\n\n");
    for &table in tables {
        let view = build_view(table, rows)?;
        let mut links = Vec::new();
        for &format in &formats {
            // empty views have no bars to draw
            if format == ReportFormat::Svg && view.is_empty() {
                continue;
            }
            let name = format!("{table}.{}", format.extension());
            fs::write(dir.join(&name), render(&view, table, format)?)?;
            links.push(format!("[{}]({name})", format.extension()));
            written.push(name);
        }
        index.push_str(&format!("- {}: {}\n", table.title(), links.join(" ")));
    }
    fs::write(dir.join("index.md"), &index)?;
    written.push("index.md".to_string());
    Ok(written)
}
