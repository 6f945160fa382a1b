use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Encoder,
    Decoder,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Encoder => "encoder",
            Architecture::Decoder => "decoder",
        }
    }

    /// Capitalized label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Architecture::Encoder => "Encoder",
            Architecture::Decoder => "Decoder",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "encoder" => Ok(Architecture::Encoder),
            "decoder" => Ok(Architecture::Decoder),
            other => Err(format!("unknown architecture {other:?}")),
        }
    }
}

/// Model identity and the dimensions a capture must agree with.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub architecture: Architecture,
    pub param_count: u64,
    pub num_layers: usize,
    pub num_heads: usize,
    pub hidden_dim: usize,
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        architecture: Architecture,
        param_count: u64,
        num_layers: usize,
        num_heads: usize,
        hidden_dim: usize,
    ) -> Self {
        Self {
            name: name.into(),
            architecture,
            param_count,
            num_layers,
            num_heads,
            hidden_dim,
        }
    }

    /// Lists every zero-valued field; empty when the spec is well formed.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.name.is_empty() {
            out.push("model.name is empty".to_string());
        }
        for (field, v) in [
            ("param_count", self.param_count as usize),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("hidden_dim", self.hidden_dim),
        ] {
            if v == 0 {
                out.push(format!("model.{field} must be > 0"));
            }
        }
        out
    }
}

/// The six models of the reference study, in its summary-table order.
///
/// Parameter counts are the rounded figures the study reports; layer, head and
/// width values are the published checkpoint dimensions.
pub fn reference_models() -> Vec<ModelSpec> {
    use Architecture::{Decoder, Encoder};
    vec![
        ModelSpec::new("BERT-Base", Encoder, 109_500_000, 12, 12, 768),
        ModelSpec::new("GPT2-117M", Decoder, 124_400_000, 12, 12, 768),
        ModelSpec::new("Qwen-1.5-0.5B", Decoder, 464_000_000, 24, 16, 1024),
        ModelSpec::new("Phi-1", Decoder, 1_400_000_000, 24, 32, 2048),
        ModelSpec::new("BLOOM-560M", Decoder, 559_200_000, 24, 16, 1024),
        ModelSpec::new("StableLM-3B", Decoder, 3_600_000_000, 32, 32, 2560),
    ]
}
