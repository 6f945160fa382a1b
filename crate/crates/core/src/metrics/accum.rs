use crate::capture::ModelSpec;

use super::{MetricConfig, MetricRow, MetricsError};

pub(crate) fn add_values(acc: &mut f64, values: &[f32]) {
    for &v in values {
        *acc += v as f64;
    }
}

pub(crate) fn add_entropy(acc: &mut f64, values: &[f32]) {
    for &a in values {
        // a == 1 contributes 0 as well; skipping the ln is only a shortcut
        if a > 0.0 && a != 1.0 {
            let a = a as f64;
            *acc -= a * a.ln();
        }
    }
}

pub(crate) fn count_below(values: &[f32], epsilon: f64) -> usize {
    values
        .iter()
        .filter(|&&v| (v as f64).abs() < epsilon)
        .count()
}

/// Incremental metric state fed tensor chunks in any tensor order.
///
/// Chunks of one tensor must arrive in element order; sums are sequential so
/// the streaming and in-memory paths produce bit-identical results.
#[derive(Debug, Clone)]
pub struct MetricAccumulator {
    config: MetricConfig,
    hidden_sum: Vec<f64>,
    hidden_below: Vec<usize>,
    hidden_seen: Vec<usize>,
    attention_sum: Vec<f64>,
    attention_heads: Vec<usize>,
}

impl MetricAccumulator {
    pub fn new(config: MetricConfig, hidden_tensors: usize, attention_tensors: usize) -> Self {
        Self {
            config,
            hidden_sum: vec![0.0; hidden_tensors],
            hidden_below: vec![0; hidden_tensors],
            hidden_seen: vec![0; hidden_tensors],
            attention_sum: vec![0.0; attention_tensors],
            attention_heads: vec![0; attention_tensors],
        }
    }

    pub fn hidden_values(&mut self, layer: usize, values: &[f32]) {
        add_values(&mut self.hidden_sum[layer], values);
        self.hidden_below[layer] += count_below(values, self.config.epsilon);
        self.hidden_seen[layer] += values.len();
    }

    pub fn attention_values(&mut self, layer: usize, heads: usize, values: &[f32]) {
        add_entropy(&mut self.attention_sum[layer], values);
        self.attention_heads[layer] = heads;
    }

    pub fn finish(
        &self,
        model: &ModelSpec,
        category: &str,
        prompt_id: &str,
    ) -> Result<MetricRow, MetricsError> {
        let last = self
            .hidden_sum
            .len()
            .checked_sub(1)
            .ok_or(MetricsError::Empty("hidden"))?;
        if self.attention_sum.is_empty() {
            return Err(MetricsError::Empty("attention"));
        }
        let final_activation = self.hidden_sum[last] / self.hidden_seen[last] as f64;

        let first = self.config.sparsity_layer_set().first_layer();
        if first > last {
            return Err(MetricsError::Empty("hidden"));
        }
        let per_layer_sparsity: Vec<f64> = (first..=last)
            .map(|l| self.hidden_below[l] as f64 / self.hidden_seen[l] as f64)
            .collect();
        let max_sparsity = per_layer_sparsity.iter().copied().fold(0.0, f64::max);

        let per_layer_entropy: Vec<f64> = self
            .attention_sum
            .iter()
            .zip(&self.attention_heads)
            .map(|(&s, &h)| s / h as f64)
            .collect();
        let total: f64 = self.attention_sum.iter().sum();
        let heads: usize = self.attention_heads.iter().sum();
        let attention_entropy = total / heads as f64;

        Ok(MetricRow {
            model_name: model.name.clone(),
            architecture: model.architecture,
            param_count: model.param_count,
            category: category.to_string(),
            prompt_id: prompt_id.to_string(),
            final_activation,
            attention_entropy,
            max_sparsity,
            per_layer_sparsity: Some(per_layer_sparsity),
            per_layer_entropy: Some(per_layer_entropy),
        })
    }
}
