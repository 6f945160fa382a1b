//! Cell-by-cell comparison of two table CSVs.
//!
//! Columns are matched by header name. A column is a key column when any of
//! its cells in the first file is not a number; rows are matched on the
//! values of the key columns (repeated keys pair up in order of appearance).
//! Every other shared column is compared numerically.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::ReportError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffMode {
    /// `|a - b| <= tolerance`
    Abs,
    /// `|a - b| <= tolerance * |a|`, with the first file as reference.
    Rel,
}

impl FromStr for DiffMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abs" => Ok(DiffMode::Abs),
            "rel" => Ok(DiffMode::Rel),
            other => Err(format!("unknown diff mode {other:?} (expected abs|rel)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDiff {
    pub row: String,
    pub column: String,
    pub a: String,
    pub b: String,
    /// Absolute or relative difference per mode; infinite when `b` is not numeric.
    pub difference: f64,
}

impl fmt::Display for CellDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "row [{}] column [{}]: {} vs {} (difference {})",
            self.row, self.column, self.a, self.b, self.difference
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiffOutcome {
    pub compared_cells: usize,
    pub violations: Vec<CellDiff>,
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
    pub ignored_columns: Vec<String>,
    /// Cells in rows present in both files that lie within tolerance.
    pub passing: Vec<CellDiff>,
}

impl DiffOutcome {
    /// True when no cell exceeds tolerance and, if either file has rows, at
    /// least one row pair was compared.
    pub fn passed(&self) -> bool {
        let had_rows =
            self.compared_cells > 0 || !self.only_in_a.is_empty() || !self.only_in_b.is_empty();
        self.violations.is_empty() && (!had_rows || self.compared_cells > 0)
    }
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse(text: &str) -> Result<Table, ReportError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Table { headers, rows })
}

fn is_number(s: &str) -> bool {
    s.trim().parse::<f64>().is_ok()
}

fn keyed(table: &Table, key_cols: &[usize]) -> Vec<(String, usize)> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let base = key_cols
                .iter()
                .map(|&c| row.get(c).map(String::as_str).unwrap_or(""))
                .collect::<Vec<_>>()
                .join(" / ");
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            let key = if *n == 1 {
                base
            } else {
                format!("{base} #{n}")
            };
            (key, i)
        })
        .collect()
}

pub fn diff_tables(
    a: &str,
    b: &str,
    tolerance: f64,
    mode: DiffMode,
) -> Result<DiffOutcome, ReportError> {
    let ta = parse(a)?;
    let tb = parse(b)?;
    let mut outcome = DiffOutcome::default();

    let shared: Vec<(usize, usize, &str)> = ta
        .headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            tb.headers
                .iter()
                .position(|x| x == h)
                .map(|j| (i, j, h.as_str()))
        })
        .collect();
    for h in ta.headers.iter().chain(&tb.headers) {
        if !shared.iter().any(|s| s.2 == h) && !outcome.ignored_columns.contains(h) {
            outcome.ignored_columns.push(h.clone());
        }
    }
    let textual = |i: usize| {
        ta.rows
            .iter()
            .any(|r| r.get(i).is_some_and(|c| !is_number(c)))
    };
    let (keys, values): (Vec<(usize, usize, &str)>, Vec<_>) =
        shared.iter().partition(|(i, _, _)| textual(*i));
    let key_a: Vec<usize> = keys.iter().map(|k| k.0).collect();
    let key_b: Vec<usize> = keys.iter().map(|k| k.1).collect();

    let rows_a = keyed(&ta, &key_a);
    let rows_b: BTreeMap<String, usize> = keyed(&tb, &key_b).into_iter().collect();
    let mut matched_b = Vec::new();
    for (key, ia) in &rows_a {
        let Some(&ib) = rows_b.get(key) else {
            outcome.only_in_a.push(key.clone());
            continue;
        };
        matched_b.push(key.clone());
        for &(ca, cb, name) in &values {
            let va = ta.rows[*ia].get(ca).cloned().unwrap_or_default();
            let vb = tb.rows[ib].get(cb).cloned().unwrap_or_default();
            let difference = match (va.trim().parse::<f64>(), vb.trim().parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    let abs = (x - y).abs();
                    match mode {
                        DiffMode::Abs => abs,
                        DiffMode::Rel if abs == 0.0 => 0.0,
                        DiffMode::Rel => abs / x.abs(),
                    }
                }
                _ => f64::INFINITY,
            };
            outcome.compared_cells += 1;
            let cell = CellDiff {
                row: key.clone(),
                column: name.to_string(),
                a: va,
                b: vb,
                difference,
            };
            // NaN differences fail as well
            if difference <= tolerance {
                outcome.passing.push(cell);
            } else {
                outcome.violations.push(cell);
            }
        }
    }
    for key in rows_b.keys() {
        if !matched_b.contains(key) {
            outcome.only_in_b.push(key.clone());
        }
    }
    Ok(outcome)
}
