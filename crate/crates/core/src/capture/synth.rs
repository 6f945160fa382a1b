use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CaptureRecord, ModelSpec, Tensor};

/// Attention rows of dirichlet records are integer multiples of this grid,
/// which keeps every value exact in f32 and every row sum exactly 1.
const DIRICHLET_GRID: u32 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    /// Every entry `1/S`.
    Uniform,
    /// Row `i` puts all mass on position `min(i, S-1)`.
    OneHot,
    /// Rows drawn from a flat Dirichlet.
    DirichletRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenKind {
    Zeros,
    Constant(f32),
    Gaussian { std: f64 },
}

/// Builds a valid record for `spec` with analytically known structure.
///
/// Pure in `(spec, seq_len, seed, attention, hidden)`. Metadata fields are set
/// to placeholders (`synthetic`, `synthetic.1`) for the caller to overwrite.
///
/// # Panics
///
/// If `seq_len` is zero.
pub fn gen_synthetic(
    spec: &ModelSpec,
    seq_len: usize,
    seed: u64,
    attention: AttentionKind,
    hidden: HiddenKind,
) -> CaptureRecord {
    assert!(seq_len >= 1, "seq_len must be >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = seq_len;
    let n = spec.hidden_dim;
    let hidden_tensors = (0..=spec.num_layers)
        .map(|_| match hidden {
            HiddenKind::Zeros => Tensor::zeros(vec![s, n]),
            HiddenKind::Constant(c) => Tensor::filled(vec![s, n], c),
            HiddenKind::Gaussian { std } => {
                let data = (0..s * n)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        (z * std) as f32
                    })
                    .collect();
                Tensor::new(vec![s, n], data).expect("sized by construction")
            }
        })
        .collect();
    let attention_tensors = (0..spec.num_layers)
        .map(|_| {
            let shape = vec![spec.num_heads, s, s];
            match attention {
                AttentionKind::Uniform => Tensor::filled(shape, 1.0 / s as f32),
                AttentionKind::OneHot => {
                    let mut t = Tensor::zeros(shape);
                    for (r, row) in t.data_mut().chunks_mut(s).enumerate() {
                        let i = r % s;
                        row[i.min(s - 1)] = 1.0;
                    }
                    t
                }
                AttentionKind::DirichletRandom => {
                    let mut t = Tensor::zeros(shape);
                    let mut draws = vec![0.0f64; s];
                    for row in t.data_mut().chunks_mut(s) {
                        dirichlet_row(&mut rng, &mut draws, row);
                    }
                    t
                }
            }
        })
        .collect();
    CaptureRecord {
        model: spec.clone(),
        category: "synthetic".to_string(),
        prompt_id: "synthetic.1".to_string(),
        prompt_text: String::new(),
        seq_len,
        hidden: hidden_tensors,
        attention: attention_tensors,
    }
}

/// Flat Dirichlet sample apportioned onto the `1/2^24` grid by largest remainder.
fn dirichlet_row<R: Rng>(rng: &mut R, draws: &mut [f64], row: &mut [f32]) {
    for d in draws.iter_mut() {
        *d = rng.sample(Exp1);
    }
    let total: f64 = draws.iter().sum();
    let grid = DIRICHLET_GRID as f64;
    let mut assigned = 0u64;
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(draws.len());
    let mut counts = vec![0u32; draws.len()];
    for (i, d) in draws.iter().enumerate() {
        let exact = d / total * grid;
        let floor = exact.floor().min(grid);
        counts[i] = floor as u32;
        assigned += counts[i] as u64;
        remainders.push((exact - floor, i));
    }
    let mut missing = (DIRICHLET_GRID as u64).saturating_sub(assigned) as usize;
    if missing > 0 {
        remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in remainders.iter().cycle() {
            if missing == 0 {
                break;
            }
            counts[i] += 1;
            missing -= 1;
        }
    }
    for (v, c) in row.iter_mut().zip(counts) {
        *v = (c as f64 / grid) as f32;
    }
}
