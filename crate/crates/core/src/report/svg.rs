use std::fmt::Write;

use crate::aggregate::{AggregateRow, Metric};

use super::table::fmt_metric;
use super::{ReportError, TableId, View};

const PLOT_HEIGHT: f64 = 200.0;
const BAR_WIDTH: f64 = 40.0;
const BAR_GAP: f64 = 20.0;
const MARGIN_LEFT: f64 = 40.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 120.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Panel {
    width: f64,
    height: f64,
    body: String,
}

fn bar_panel(bars: &[(&str, f64)], metric: Metric, title: &str) -> Panel {
    let max_pos = bars.iter().map(|b| b.1).fold(0.0f64, f64::max);
    let max_neg = bars.iter().map(|b| -b.1).fold(0.0f64, f64::max);
    let span = max_pos + max_neg;
    let scale = if span > 0.0 { PLOT_HEIGHT / span } else { 0.0 };
    let baseline = MARGIN_TOP + max_pos * scale;
    let width = MARGIN_LEFT * 2.0 + bars.len() as f64 * (BAR_WIDTH + BAR_GAP);
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;

    let mut body = String::new();
    let _ = writeln!(
        body,
        r#"<text x="{:.2}" y="20.00" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    let _ = writeln!(
        body,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{baseline:.2}" x2="{:.2}" y2="{baseline:.2}" stroke="black"/>"#,
        width - MARGIN_LEFT
    );
    for (i, (label, value)) in bars.iter().enumerate() {
        let x = MARGIN_LEFT + BAR_GAP / 2.0 + i as f64 * (BAR_WIDTH + BAR_GAP);
        let h = value.abs() * scale;
        let y = if *value >= 0.0 {
            baseline - h
        } else {
            baseline
        };
        let cx = x + BAR_WIDTH / 2.0;
        let _ = writeln!(
            body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{BAR_WIDTH:.2}" height="{h:.2}" fill="steelblue"><title>{}: {}</title></rect>"#,
            escape(label),
            fmt_metric(metric, *value)
        );
        let label_y = MARGIN_TOP + PLOT_HEIGHT + 12.0;
        let _ = writeln!(
            body,
            r#"<text x="{cx:.2}" y="{label_y:.2}" font-size="10" text-anchor="end" transform="rotate(-45 {cx:.2} {label_y:.2})">{}</text>"#,
            escape(label)
        );
    }
    Panel {
        width,
        height,
        body,
    }
}

fn wrap(width: f64, height: f64, inner: &str) -> Vec<u8> {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.2}\" height=\"{height:.2}\" viewBox=\"0 0 {width:.2} {height:.2}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{inner}</svg>\n"
    )
    .into_bytes()
}

/// Standalone bar chart of the group means for `metric`.
///
/// Bar height is proportional to `|mean|`; negative means hang below the
/// baseline. Rows for other metrics are ignored.
pub fn render_svg_bar(view: &[AggregateRow], metric: Metric) -> Result<Vec<u8>, ReportError> {
    let bars: Vec<(&str, f64)> = view
        .iter()
        .filter(|r| r.metric == metric)
        .map(|r| (r.group_key.as_str(), r.mean))
        .collect();
    if bars.is_empty() {
        return Err(ReportError::EmptyView);
    }
    let panel = bar_panel(&bars, metric, metric.as_str());
    Ok(wrap(panel.width, panel.height, &panel.body))
}

/// Chart for a whole table: one panel per metric for grouped tables, a single
/// panel for leaderboards.
pub fn render_table_svg(view: &View, table: TableId) -> Result<Vec<u8>, ReportError> {
    if view.is_empty() {
        return Err(ReportError::EmptyView);
    }
    let panels: Vec<Panel> = match view {
        View::Profiles(profiles) => Metric::ALL
            .iter()
            .map(|&m| {
                let bars: Vec<(&str, f64)> = profiles
                    .iter()
                    .map(|p| (p.group_key.as_str(), p.stat(m).mean))
                    .collect();
                bar_panel(&bars, m, &format!("{}: {}", table.title(), m.as_str()))
            })
            .collect(),
        View::Leaderboard(entries) => {
            let metric = table
                .leaderboard()
                .map(|(m, _)| m)
                .unwrap_or(Metric::FinalActivation);
            let labels: Vec<String> = entries
                .iter()
                .map(|e| format!("{} / {}", e.model_name, e.category))
                .collect();
            let bars: Vec<(&str, f64)> = labels
                .iter()
                .zip(entries)
                .map(|(l, e)| (l.as_str(), e.value))
                .collect();
            vec![bar_panel(&bars, metric, table.title())]
        }
    };
    let width = panels.iter().map(|p| p.width).fold(0.0, f64::max);
    let mut y = 0.0;
    let mut inner = String::new();
    for p in &panels {
        let _ = writeln!(
            inner,
            r#"<svg x="0.00" y="{y:.2}" width="{:.2}" height="{:.2}">"#,
            p.width, p.height
        );
        inner.push_str(&p.body);
        inner.push_str("</svg>\n");
        y += p.height;
    }
    Ok(wrap(width, y, &inner))
}
