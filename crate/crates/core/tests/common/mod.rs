//! Shared fixtures and independent reference implementations for the
//! integration tests. Nothing here calls into the library's metric or
//! aggregation code.

#![allow(dead_code)]

use nact::aggregate::{Direction, Metric};
use nact::capture::{
    gen_synthetic, Architecture, AttentionKind, CaptureRecord, HiddenKind, ModelSpec,
};
use nact::metrics::MetricRow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 0.01;

/// Naive metrics straight from the definitions, indexed element by element.
#[derive(Debug, Clone, Copy)]
pub struct OracleMetrics {
    pub final_activation: f64,
    pub attention_entropy: f64,
    pub max_sparsity: f64,
}

pub fn oracle_metrics(record: &CaptureRecord, epsilon: f64, first_layer: usize) -> OracleMetrics {
    let s = record.seq_len;
    let n = record.model.hidden_dim;
    let l = record.model.num_layers;
    let h = record.model.num_heads;

    let last = record.hidden[l].data();
    let mut sum = 0.0f64;
    for i in 0..s {
        for k in 0..n {
            sum += last[i * n + k] as f64;
        }
    }
    let final_activation = sum / (s * n) as f64;

    let mut ent = 0.0f64;
    for layer in 0..l {
        let a = record.attention[layer].data();
        for head in 0..h {
            for i in 0..s {
                for j in 0..s {
                    let p = a[(head * s + i) * s + j] as f64;
                    if p > 0.0 {
                        ent -= p * p.ln();
                    }
                }
            }
        }
    }
    let attention_entropy = ent / (l * h) as f64;

    let mut max_sparsity = 0.0f64;
    for layer in first_layer..=l {
        let data = record.hidden[layer].data();
        let mut below = 0usize;
        for i in 0..s {
            for k in 0..n {
                if (data[i * n + k] as f64).abs() < epsilon {
                    below += 1;
                }
            }
        }
        max_sparsity = max_sparsity.max(below as f64 / (s * n) as f64);
    }
    OracleMetrics {
        final_activation,
        attention_entropy,
        max_sparsity,
    }
}

pub fn metric_value(row: &MetricRow, metric: Metric) -> f64 {
    match metric {
        Metric::FinalActivation => row.final_activation,
        Metric::AttentionEntropy => row.attention_entropy,
        Metric::MaxSparsity => row.max_sparsity,
    }
}

/// Plain two-pass mean and sample standard deviation over unsorted values.
pub fn oracle_mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    let mean = total / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let mut ss = 0.0;
    for v in values {
        ss += (v - mean).powi(2);
    }
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Brute-force group statistics: scans every row once per candidate key.
pub fn oracle_group(
    rows: &[MetricRow],
    key: impl Fn(&MetricRow) -> String,
    metric: Metric,
) -> Vec<(String, f64, f64, usize)> {
    let mut keys: Vec<String> = Vec::new();
    for r in rows {
        let k = key(r);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| key(r) == k)
                .map(|r| metric_value(r, metric))
                .collect();
            let (mean, std) = oracle_mean_std(&values);
            (k, mean, std, values.len())
        })
        .collect()
}

/// Every (model, category) pair with its prompt mean, fully sorted.
pub fn oracle_top_k(
    rows: &[MetricRow],
    metric: Metric,
    k: usize,
    direction: Direction,
) -> Vec<(String, String, f64)> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for r in rows {
        let p = (r.model_name.clone(), r.category.clone());
        if !pairs.contains(&p) {
            pairs.push(p);
        }
    }
    let mut scored: Vec<(String, String, f64)> = pairs
        .into_iter()
        .map(|(m, c)| {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.model_name == m && r.category == c)
                .map(|r| metric_value(r, metric))
                .collect();
            let mean = oracle_mean_std(&values).0;
            (m, c, mean)
        })
        .collect();
    scored.sort_by(|a, b| {
        let ord = a.2.partial_cmp(&b.2).unwrap();
        let ord = if direction == Direction::Highest {
            ord.reverse()
        } else {
            ord
        };
        ord.then_with(|| (&a.0, &a.1).cmp(&(&b.0, &b.1)))
    });
    scored.truncate(k);
    scored
}

/// A small random model shape within the given bounds.
pub fn random_spec(rng: &mut ChaCha8Rng, max_l: usize, max_h: usize, max_n: usize) -> ModelSpec {
    let arch = if rng.random_bool(0.5) {
        Architecture::Encoder
    } else {
        Architecture::Decoder
    };
    ModelSpec::new(
        format!("rand-{}", rng.random_range(0..1000u32)),
        arch,
        rng.random_range(1..10_000_000u64),
        rng.random_range(1..=max_l),
        rng.random_range(1..=max_h),
        rng.random_range(1..=max_n),
    )
}

/// A valid random record; hidden values mix Gaussian noise, exact zeros and
/// values straddling the default threshold so sparsity is non-trivial.
pub fn random_record(
    seed: u64,
    max_l: usize,
    max_h: usize,
    max_s: usize,
    max_n: usize,
) -> CaptureRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_spec(&mut rng, max_l, max_h, max_n);
    let s = rng.random_range(1..=max_s);
    let attention = match rng.random_range(0..4u8) {
        0 => AttentionKind::Uniform,
        1 => AttentionKind::OneHot,
        _ => AttentionKind::DirichletRandom,
    };
    let std = [0.005, 0.05, 1.0, 3.0][rng.random_range(0..4usize)];
    let mut record = gen_synthetic(
        &spec,
        s,
        rng.random(),
        attention,
        HiddenKind::Gaussian { std },
    );
    for t in &mut record.hidden {
        let zero_rate: f64 = rng.random_range(0.0..0.5);
        for v in t.data_mut() {
            let u: f64 = rng.random();
            if u < zero_rate {
                *v = 0.0;
            } else if u < zero_rate + 0.05 {
                *v = if rng.random_bool(0.5) { 0.01 } else { -0.0099 };
            }
        }
    }
    record.category = "factual_questions".into();
    record.prompt_id = format!("factual_questions.{}", seed + 1);
    record
}

const SYNTH_MODELS: [(&str, Architecture, u64); 6] = [
    ("enc-a", Architecture::Encoder, 110_000_000),
    ("dec-a", Architecture::Decoder, 124_000_000),
    ("dec-b", Architecture::Decoder, 464_000_000),
    ("dec-c", Architecture::Decoder, 1_400_000_000),
    ("dec-d", Architecture::Decoder, 559_000_000),
    ("dec-e", Architecture::Decoder, 3_600_000_000),
];

/// 6 models (1 encoder) x 12 categories x 2 prompts of random metric values.
pub fn synthetic_rows(seed: u64) -> Vec<MetricRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (name, arch, params) in SYNTH_MODELS {
        for (category, _) in nact::corpus::CATEGORIES {
            for p in 1..=2 {
                rows.push(MetricRow {
                    model_name: name.to_string(),
                    architecture: arch,
                    param_count: params,
                    category: category.to_string(),
                    prompt_id: format!("{category}.{p}"),
                    final_activation: rng.random_range(-2.0..2.0),
                    attention_entropy: rng.random_range(10.0..250.0),
                    max_sparsity: rng.random_range(0.0..1.0),
                    per_layer_sparsity: None,
                    per_layer_entropy: None,
                });
            }
        }
    }
    rows
}

pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    use rand::seq::SliceRandom;
    let mut out = items.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

/// Runs the library CLI in-process and returns (exit code, stdout, stderr).
pub fn nact<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut argv: Vec<std::ffi::OsString> = vec!["nact".into()];
    argv.extend(args.into_iter().map(Into::into));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = nact::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// A compact model list (small dimensions) for CLI synth runs.
pub fn small_models_json(count: usize) -> String {
    let specs: Vec<ModelSpec> = SYNTH_MODELS
        .iter()
        .take(count)
        .enumerate()
        .map(|(i, (name, arch, params))| {
            ModelSpec::new(*name, *arch, *params, 2 + i % 3, 2 + i % 2, 8 + 4 * i)
        })
        .collect();
    serde_json::to_string_pretty(&specs).unwrap()
}

pub fn encode(record: &CaptureRecord) -> Vec<u8> {
    let mut out = Vec::new();
    nact::capture::write_record(record, &mut out).unwrap();
    out
}

fn header_span(bytes: &[u8]) -> (usize, serde_json::Value) {
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    (
        16 + len,
        serde_json::from_slice(&bytes[16..16 + len]).unwrap(),
    )
}

/// Absolute file position of element `elem` of tensor `name`.
pub fn element_pos(bytes: &[u8], name: &str, elem: usize) -> usize {
    let (payload, json) = header_span(bytes);
    let entry = json["tensors"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == name)
        .unwrap_or_else(|| panic!("no tensor {name}"));
    payload + entry["offset"].as_u64().unwrap() as usize + 4 * elem
}

pub fn put_f32(bytes: &mut [u8], pos: usize, value: f32) {
    bytes[pos..pos + 4].copy_from_slice(&value.to_le_bytes());
}

/// Re-encodes the JSON header after `edit`, keeping the payload bytes.
pub fn reheader(bytes: &[u8], edit: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
    let (payload, mut json) = header_span(bytes);
    edit(&mut json);
    let new = serde_json::to_vec(&json).unwrap();
    let mut out = bytes[..8].to_vec();
    out.extend_from_slice(&(new.len() as u64).to_le_bytes());
    out.extend_from_slice(&new);
    out.extend_from_slice(&bytes[payload..]);
    out
}

/// The four seeded corruption classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    Magic,
    Shape,
    RowSum,
    Nan,
}

/// A valid record (S != N so a transposed shape keeps the byte length) and
/// a corrupted encoding of it.
pub fn corrupted(kind: Corruption, seed: u64) -> Vec<u8> {
    let spec = ModelSpec::new("c", Architecture::Decoder, 10, 2, 2, 6);
    let rec = gen_synthetic(
        &spec,
        4,
        seed,
        AttentionKind::DirichletRandom,
        HiddenKind::Gaussian { std: 1.0 },
    );
    let mut bytes = encode(&rec);
    match kind {
        Corruption::Magic => bytes[0..4].copy_from_slice(b"NACX"),
        Corruption::Shape => {
            bytes = reheader(&bytes, |json| {
                for t in json["tensors"].as_array_mut().unwrap() {
                    if t["name"] == "hidden.1" {
                        t["shape"] = serde_json::json!([6, 4]);
                    }
                }
            })
        }
        Corruption::RowSum => {
            let pos = element_pos(&bytes, "attn.1", 5);
            let v = f32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
            put_f32(&mut bytes, pos, v + 0.01);
        }
        Corruption::Nan => {
            let pos = element_pos(&bytes, "hidden.2", 3);
            put_f32(&mut bytes, pos, f32::NAN);
        }
    }
    bytes
}
