use crate::aggregate::{GroupProfile, LeaderboardEntry, Metric};
use crate::corpus::display_name;

use super::{ReportError, TableId, View};

/// Fixed-point formatting, half-to-even on the exact binary value, with
/// negative zero printed unsigned.
pub fn fmt_fixed(value: f64, decimals: usize) -> String {
    let s = format!("{value:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

pub fn metric_decimals(metric: Metric) -> usize {
    match metric {
        Metric::FinalActivation | Metric::MaxSparsity => 4,
        Metric::AttentionEntropy => 2,
    }
}

pub fn fmt_metric(metric: Metric, value: f64) -> String {
    fmt_fixed(value, metric_decimals(metric))
}

/// `109500000 -> "109.5M"`, `1400000000 -> "1.4B"`.
pub fn humanize_params(count: u64) -> String {
    let c = count as f64;
    if count >= 1_000_000_000 {
        format!("{:.1}B", c / 1e9)
    } else if count >= 1_000_000 {
        format!("{:.1}M", c / 1e6)
    } else if count >= 1_000 {
        format!("{:.1}K", c / 1e3)
    } else {
        count.to_string()
    }
}

fn category_label(id: &str) -> String {
    display_name(id).unwrap_or(id).to_string()
}

struct Layout {
    csv_header: Vec<String>,
    csv_rows: Vec<Vec<String>>,
    md_header: Vec<String>,
    md_rows: Vec<Vec<String>>,
    /// Right-align flags for Markdown columns.
    md_numeric: Vec<bool>,
}

impl Layout {
    fn new(csv_header: &[&str], md_header: &[&str], md_numeric: &[bool]) -> Self {
        Self {
            csv_header: csv_header.iter().map(|s| s.to_string()).collect(),
            csv_rows: Vec::new(),
            md_header: md_header.iter().map(|s| s.to_string()).collect(),
            md_rows: Vec::new(),
            md_numeric: md_numeric.to_vec(),
        }
    }

    fn same_header(header: &[&str]) -> Self {
        let numeric: Vec<bool> = (0..header.len()).map(|i| i > 0).collect();
        Self::new(header, header, &numeric)
    }
}

fn means(p: &GroupProfile) -> [String; 3] {
    Metric::ALL.map(|m| fmt_metric(m, p.stat(m).mean))
}

fn profile_layout(table: TableId, profiles: &[GroupProfile]) -> Layout {
    match table {
        TableId::Architecture => {
            let mut l = Layout::same_header(&[
                "Architecture",
                "Final Act.",
                "Att. Entropy",
                "Max Sparsity",
                "Samples",
            ]);
            for p in profiles {
                let label = p
                    .architecture
                    .map(|a| a.label().to_string())
                    .unwrap_or_else(|| p.group_key.clone());
                let [fa, ent, sp] = means(p);
                let row = vec![label, fa, ent, sp, p.count().to_string()];
                l.csv_rows.push(row.clone());
                l.md_rows.push(row);
            }
            l
        }
        TableId::CategoryPerformance => {
            let mut l = Layout::new(
                &[
                    "Category",
                    "Final Act. Mean",
                    "Final Act. Std",
                    "Att. Entropy Mean",
                    "Att. Entropy Std",
                    "Sparsity Mean",
                    "Sparsity Std",
                    "Samples",
                ],
                &[
                    "Category",
                    "Final Act. Mean ± Std",
                    "Att. Entropy Mean ± Std",
                    "Sparsity Mean ± Std",
                    "Samples",
                ],
                &[false, true, true, true, true],
            );
            for p in profiles {
                let pair = |m: Metric| {
                    let s = p.stat(m);
                    (fmt_metric(m, s.mean), fmt_metric(m, s.std))
                };
                let [fa, ent, sp] = Metric::ALL.map(pair);
                let count = p.count().to_string();
                l.csv_rows.push(vec![
                    p.group_key.clone(),
                    fa.0.clone(),
                    fa.1.clone(),
                    ent.0.clone(),
                    ent.1.clone(),
                    sp.0.clone(),
                    sp.1.clone(),
                    count.clone(),
                ]);
                l.md_rows.push(vec![
                    category_label(&p.group_key),
                    format!("{} ± {}", fa.0, fa.1),
                    format!("{} ± {}", ent.0, ent.1),
                    format!("{} ± {}", sp.0, sp.1),
                    count,
                ]);
            }
            l
        }
        TableId::Scale => {
            let mut l = Layout::new(
                &[
                    "Model",
                    "Parameters",
                    "Final Act.",
                    "Att. Entropy",
                    "Sparsity",
                ],
                &["Parameters", "Final Act.", "Att. Entropy", "Sparsity"],
                &[false, true, true, true],
            );
            for p in profiles {
                let params = p.param_count.unwrap_or(0);
                let [fa, ent, sp] = means(p);
                l.csv_rows.push(vec![
                    p.group_key.clone(),
                    params.to_string(),
                    fa.clone(),
                    ent.clone(),
                    sp.clone(),
                ]);
                l.md_rows.push(vec![
                    format!("{} ({})", humanize_params(params), p.group_key),
                    fa,
                    ent,
                    sp,
                ]);
            }
            l
        }
        TableId::ModelSummary => {
            let header = [
                "Model",
                "Arch.",
                "Params",
                "Final Act.",
                "Att. Ent.",
                "Sparsity",
            ];
            let mut l = Layout::new(&header, &header, &[false, false, true, true, true, true]);
            for p in profiles {
                let arch = p.architecture.map(|a| a.label()).unwrap_or("").to_string();
                let params = p.param_count.unwrap_or(0);
                let [fa, ent, sp] = means(p);
                l.csv_rows.push(vec![
                    p.group_key.clone(),
                    arch.clone(),
                    params.to_string(),
                    fa.clone(),
                    ent.clone(),
                    sp.clone(),
                ]);
                l.md_rows.push(vec![
                    p.group_key.clone(),
                    arch,
                    humanize_params(params),
                    fa,
                    ent,
                    sp,
                ]);
            }
            l
        }
        _ => {
            let mut l = Layout::same_header(&[
                "Group",
                "Final Act.",
                "Att. Entropy",
                "Sparsity",
                "Samples",
            ]);
            for p in profiles {
                let [fa, ent, sp] = means(p);
                let row = vec![p.group_key.clone(), fa, ent, sp, p.count().to_string()];
                l.csv_rows.push(row.clone());
                l.md_rows.push(row);
            }
            l
        }
    }
}

fn leaderboard_layout(table: TableId, entries: &[LeaderboardEntry]) -> Layout {
    let metric = table
        .leaderboard()
        .map(|(m, _)| m)
        .unwrap_or(Metric::FinalActivation);
    let value_header = match metric {
        Metric::FinalActivation => "Final Activation",
        Metric::AttentionEntropy => "Attention Entropy",
        Metric::MaxSparsity => "Max Sparsity",
    };
    let header = ["Model", "Category", value_header];
    let mut l = Layout::new(&header, &header, &[false, false, true]);
    for e in entries {
        let value = fmt_metric(metric, e.value);
        l.csv_rows.push(vec![
            e.model_name.clone(),
            e.category.clone(),
            value.clone(),
        ]);
        l.md_rows.push(vec![
            e.model_name.clone(),
            category_label(&e.category),
            value,
        ]);
    }
    l
}

fn layout(view: &View, table: TableId) -> Layout {
    match view {
        View::Profiles(p) => profile_layout(table, p),
        View::Leaderboard(e) => leaderboard_layout(table, e),
    }
}

/// UTF-8 CSV with LF line endings and a fixed column order per table.
pub fn render_csv(view: &View, table: TableId) -> Result<Vec<u8>, ReportError> {
    let l = layout(view, table);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&l.csv_header)?;
    for row in &l.csv_rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| ReportError::Io(e.into_error()))
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Pipe table preceded by a `Table: <title>` caption line.
pub fn render_markdown(view: &View, table: TableId) -> Vec<u8> {
    let l = layout(view, table);
    let mut out = format!("Table: {}\n\n", table.title());
    let line = |cells: &[String]| -> String {
        let cells: Vec<String> = cells.iter().map(|c| md_cell(c)).collect();
        format!("| {} |\n", cells.join(" | "))
    };
    out.push_str(&line(&l.md_header));
    let align: Vec<String> = l
        .md_numeric
        .iter()
        .map(|&n| {
            if n {
                "---:".to_string()
            } else {
                "---".to_string()
            }
        })
        .collect();
    out.push_str(&format!("|{}|\n", align.join("|")));
    for row in &l.md_rows {
        out.push_str(&line(row));
    }
    if table == TableId::CategoryPerformance {
        out.push_str(
            "\nStd is the sample standard deviation (n - 1) over all rows of the category.\n",
        );
    }
    out.into_bytes()
}
