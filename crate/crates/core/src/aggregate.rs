//! Grouped statistics over metric rows.
//!
//! Values inside every group are sorted before they are summed, so results
//! are bit-identical for any permutation of the input rows.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{reference_models, Architecture};
use crate::metrics::MetricRow;

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("no rows to aggregate")]
    EmptyInput,
    #[error("model {0:?} appears with different architecture or parameter count")]
    InconsistentModel(String),
    #[error("k must be >= 1")]
    ZeroK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    FinalActivation,
    AttentionEntropy,
    MaxSparsity,
}

impl Metric {
    pub const ALL: [Metric; 3] = [
        Metric::FinalActivation,
        Metric::AttentionEntropy,
        Metric::MaxSparsity,
    ];

    pub fn value(self, row: &MetricRow) -> f64 {
        match self {
            Metric::FinalActivation => row.final_activation,
            Metric::AttentionEntropy => row.attention_entropy,
            Metric::MaxSparsity => row.max_sparsity,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::FinalActivation => "final_activation",
            Metric::AttentionEntropy => "attention_entropy",
            Metric::MaxSparsity => "max_sparsity",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Highest,
    Lowest,
}

/// Mean, sample standard deviation (`n - 1`) and count of one metric in one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub group_key: String,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl AggregateRow {
    fn from_values(group_key: &str, metric: Metric, values: &mut [f64]) -> Self {
        let (mean, std) = mean_and_std(values);
        Self {
            group_key: group_key.to_string(),
            metric,
            mean,
            std,
            count: values.len(),
        }
    }
}

/// Sorts `values` and returns `(mean, sample std)`; std is 0 for a single value.
fn mean_and_std(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// One statistic per distinct key, sorted by descending mean (ties by key).
pub fn group_stats<F>(
    rows: &[MetricRow],
    key: F,
    metric: Metric,
) -> Result<Vec<AggregateRow>, AggregateError>
where
    F: Fn(&MetricRow) -> String,
{
    if rows.is_empty() {
        return Err(AggregateError::EmptyInput);
    }
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for row in rows {
        groups.entry(key(row)).or_default().push(metric.value(row));
    }
    let mut out: Vec<AggregateRow> = groups
        .iter_mut()
        .map(|(k, values)| AggregateRow::from_values(k, metric, values))
        .collect();
    out.sort_by(|a, b| {
        b.mean
            .total_cmp(&a.mean)
            .then_with(|| a.group_key.cmp(&b.group_key))
    });
    Ok(out)
}

/// All three metric statistics for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProfile {
    pub group_key: String,
    /// Set for architecture and per-model groups.
    pub architecture: Option<Architecture>,
    /// Set for per-model groups.
    pub param_count: Option<u64>,
    pub stats: [AggregateRow; 3],
}

impl GroupProfile {
    pub fn stat(&self, metric: Metric) -> &AggregateRow {
        &self.stats[metric.index()]
    }

    pub fn count(&self) -> usize {
        self.stats[0].count
    }
}

fn profiles<F>(rows: &[MetricRow], key: F) -> Vec<GroupProfile>
where
    F: Fn(&MetricRow) -> String,
{
    let mut groups: BTreeMap<String, Vec<&MetricRow>> = BTreeMap::new();
    for row in rows {
        groups.entry(key(row)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|(k, members)| {
            let stats = Metric::ALL.map(|m| {
                let mut values: Vec<f64> = members.iter().map(|r| m.value(r)).collect();
                AggregateRow::from_values(&k, m, &mut values)
            });
            GroupProfile {
                group_key: k,
                architecture: None,
                param_count: None,
                stats,
            }
        })
        .collect()
}

/// Per-architecture means and sample counts, `decoder` before `encoder`.
pub fn architecture_comparison(rows: &[MetricRow]) -> Vec<GroupProfile> {
    let mut out = profiles(rows, |r| r.architecture.as_str().to_string());
    for p in &mut out {
        p.architecture = p.group_key.parse().ok();
    }
    out
}

/// Per-category statistics ordered by descending mean attention entropy.
pub fn category_performance(rows: &[MetricRow]) -> Vec<GroupProfile> {
    let mut out = profiles(rows, |r| r.category.clone());
    let entropy = |p: &GroupProfile| p.stat(Metric::AttentionEntropy).mean;
    out.sort_by(|a, b| {
        entropy(b)
            .total_cmp(&entropy(a))
            .then_with(|| a.group_key.cmp(&b.group_key))
    });
    out
}

fn model_profiles(rows: &[MetricRow]) -> Result<Vec<GroupProfile>, AggregateError> {
    let mut identity: BTreeMap<&str, (Architecture, u64)> = BTreeMap::new();
    for row in rows {
        let id = (row.architecture, row.param_count);
        if *identity.entry(&row.model_name).or_insert(id) != id {
            return Err(AggregateError::InconsistentModel(row.model_name.clone()));
        }
    }
    let mut out = profiles(rows, |r| r.model_name.clone());
    for p in &mut out {
        let (arch, params) = identity[p.group_key.as_str()];
        p.architecture = Some(arch);
        p.param_count = Some(params);
    }
    Ok(out)
}

/// Per-model means ordered by ascending parameter count (ties by name).
pub fn scale_table(rows: &[MetricRow]) -> Result<Vec<GroupProfile>, AggregateError> {
    let mut out = model_profiles(rows)?;
    out.sort_by(|a, b| {
        a.param_count
            .cmp(&b.param_count)
            .then_with(|| a.group_key.cmp(&b.group_key))
    });
    Ok(out)
}

/// Per-model means with architecture and parameter count.
///
/// Models of the reference registry come first in registry order, any other
/// models follow sorted by name.
pub fn model_summary(rows: &[MetricRow]) -> Result<Vec<GroupProfile>, AggregateError> {
    let registry: Vec<String> = reference_models().into_iter().map(|m| m.name).collect();
    let rank = |name: &str| {
        registry
            .iter()
            .position(|r| r == name)
            .unwrap_or(registry.len())
    };
    let mut out = model_profiles(rows)?;
    out.sort_by(|a, b| {
        rank(&a.group_key)
            .cmp(&rank(&b.group_key))
            .then_with(|| a.group_key.cmp(&b.group_key))
    });
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub model_name: String,
    pub category: String,
    pub value: f64,
}

/// Ranks `(model, category)` pairs by their prompt-averaged metric.
///
/// Ties are broken by `(model_name, category)` ascending. Returns every pair
/// when `k` exceeds the number of pairs.
pub fn top_k(
    rows: &[MetricRow],
    metric: Metric,
    k: usize,
    direction: Direction,
) -> Result<Vec<LeaderboardEntry>, AggregateError> {
    if k == 0 {
        return Err(AggregateError::ZeroK);
    }
    let mut pairs: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for row in rows {
        pairs
            .entry((&row.model_name, &row.category))
            .or_default()
            .push(metric.value(row));
    }
    let mut ranked: Vec<((&str, &str), f64)> = pairs
        .into_iter()
        .map(|(pair, mut values)| (pair, mean_and_std(&mut values).0))
        .collect();
    ranked.sort_by(|(ka, a), (kb, b)| {
        let by_value = match direction {
            Direction::Highest => b.total_cmp(a),
            Direction::Lowest => a.total_cmp(b),
        };
        by_value.then_with(|| ka.cmp(kb))
    });
    Ok(ranked
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, ((model, category), value))| LeaderboardEntry {
            rank: i + 1,
            model_name: model.to_string(),
            category: category.to_string(),
            value,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        model: &str,
        arch: Architecture,
        params: u64,
        category: &str,
        prompt: u32,
        v: f64,
    ) -> MetricRow {
        MetricRow {
            model_name: model.into(),
            architecture: arch,
            param_count: params,
            category: category.into(),
            prompt_id: format!("{category}.{prompt}"),
            final_activation: v,
            attention_entropy: 10.0 * v,
            max_sparsity: v / 10.0,
            per_layer_sparsity: None,
            per_layer_entropy: None,
        }
    }

    fn dec(model: &str, category: &str, prompt: u32, v: f64) -> MetricRow {
        row(model, Architecture::Decoder, 100, category, prompt, v)
    }

    #[test]
    fn single_row_has_zero_std() {
        let rows = [dec("m", "c", 1, 0.25)];
        let out = group_stats(&rows, |r| r.category.clone(), Metric::FinalActivation).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].mean, out[0].std, out[0].count), (0.25, 0.0, 1));
    }

    #[test]
    fn sample_std_of_one_two_three() {
        let rows = [
            dec("m", "c", 1, 1.0),
            dec("m", "c", 2, 2.0),
            dec("m", "c", 3, 3.0),
        ];
        let out = group_stats(&rows, |r| r.category.clone(), Metric::FinalActivation).unwrap();
        assert_eq!((out[0].mean, out[0].std, out[0].count), (2.0, 1.0, 3));
    }

    #[test]
    fn groups_sorted_by_descending_mean() {
        let rows = [
            dec("m", "a", 1, 1.0),
            dec("m", "b", 1, 3.0),
            dec("m", "c", 1, 2.0),
            dec("m", "d", 1, 3.0),
        ];
        let out = group_stats(&rows, |r| r.category.clone(), Metric::FinalActivation).unwrap();
        let keys: Vec<_> = out.iter().map(|r| r.group_key.as_str()).collect();
        assert_eq!(keys, ["b", "d", "c", "a"]);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(
            group_stats(&[], |r| r.category.clone(), Metric::MaxSparsity),
            Err(AggregateError::EmptyInput)
        );
    }

    #[test]
    fn architecture_means_of_single_rows() {
        let rows = [
            row("bert", Architecture::Encoder, 1, "c", 1, 0.5),
            row("gpt", Architecture::Decoder, 2, "c", 1, -0.25),
        ];
        let out = architecture_comparison(&rows);
        assert_eq!(out[0].group_key, "decoder");
        assert_eq!(out[0].stat(Metric::FinalActivation).mean, -0.25);
        assert_eq!(out[1].group_key, "encoder");
        assert_eq!(out[1].stat(Metric::AttentionEntropy).mean, 5.0);
        assert_eq!(out[1].architecture, Some(Architecture::Encoder));
        assert_eq!(out[1].count(), 1);
    }

    #[test]
    fn scale_table_orders_reference_models_by_size() {
        let rows: Vec<MetricRow> = reference_models()
            .iter()
            .map(|m| row(&m.name, m.architecture, m.param_count, "c", 1, 1.0))
            .collect();
        let order: Vec<u64> = scale_table(&rows)
            .unwrap()
            .iter()
            .map(|p| p.param_count.unwrap())
            .collect();
        assert_eq!(
            order,
            [
                109_500_000,
                124_400_000,
                464_000_000,
                559_200_000,
                1_400_000_000,
                3_600_000_000
            ]
        );
        let summary: Vec<_> = model_summary(&rows)
            .unwrap()
            .into_iter()
            .map(|p| p.group_key)
            .collect();
        assert_eq!(
            summary,
            [
                "BERT-Base",
                "GPT2-117M",
                "Qwen-1.5-0.5B",
                "Phi-1",
                "BLOOM-560M",
                "StableLM-3B"
            ]
        );
    }

    #[test]
    fn unknown_models_follow_registry_models() {
        let rows = [
            dec("zeta", "c", 1, 1.0),
            dec("alpha", "c", 1, 1.0),
            row("GPT2-117M", Architecture::Decoder, 124_400_000, "c", 1, 1.0),
        ];
        let summary: Vec<_> = model_summary(&rows)
            .unwrap()
            .into_iter()
            .map(|p| p.group_key)
            .collect();
        assert_eq!(summary, ["GPT2-117M", "alpha", "zeta"]);
    }

    #[test]
    fn identical_rows_give_common_mean() {
        let rows = [dec("m", "c", 1, 0.3), dec("m", "d", 1, 0.3)];
        let out = scale_table(&rows).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].stat(Metric::FinalActivation).mean, 0.3);
        assert_eq!(out[0].stat(Metric::FinalActivation).std, 0.0);
    }

    #[test]
    fn inconsistent_model_identity_is_rejected() {
        let rows = [
            dec("m", "c", 1, 0.3),
            row("m", Architecture::Encoder, 100, "c", 2, 0.3),
        ];
        assert_eq!(
            model_summary(&rows),
            Err(AggregateError::InconsistentModel("m".into()))
        );
    }

    #[test]
    fn top_k_planted_maximum_and_tie_break() {
        let mut rows: Vec<MetricRow> = (0..5)
            .flat_map(|m| {
                (0..3).map(move |c| {
                    dec(
                        &format!("m{m}"),
                        &format!("c{c}"),
                        1,
                        (m * 3 + c) as f64 / 100.0,
                    )
                })
            })
            .collect();
        rows.push(dec("m2", "c1", 2, 5.0));
        let top = top_k(&rows, Metric::AttentionEntropy, 1, Direction::Highest).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(
            (
                top[0].model_name.as_str(),
                top[0].category.as_str(),
                top[0].rank
            ),
            ("m2", "c1", 1)
        );

        let tied = [
            dec("b", "x", 1, 1.0),
            dec("a", "y", 1, 1.0),
            dec("a", "x", 1, 1.0),
        ];
        let order: Vec<_> = top_k(&tied, Metric::FinalActivation, 3, Direction::Highest)
            .unwrap()
            .into_iter()
            .map(|e| (e.model_name, e.category))
            .collect();
        assert_eq!(
            order,
            [
                ("a".into(), "x".into()),
                ("a".into(), "y".into()),
                ("b".into(), "x".into())
            ]
        );
    }

    #[test]
    fn top_k_averages_prompts_and_clamps_k() {
        let rows = [
            dec("m", "c", 1, 1.0),
            dec("m", "c", 2, 2.0),
            dec("n", "c", 1, 1.25),
        ];
        let top = top_k(&rows, Metric::FinalActivation, 10, Direction::Lowest).unwrap();
        assert_eq!(top.len(), 2);
        assert_eq!((top[0].model_name.as_str(), top[0].value), ("n", 1.25));
        assert_eq!((top[1].model_name.as_str(), top[1].value), ("m", 1.5));
        assert_eq!(
            top_k(&rows, Metric::FinalActivation, 0, Direction::Lowest),
            Err(AggregateError::ZeroK)
        );
    }
}
