use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::MemoryError;
use crate::protocol::{ApproxTokenizer, Tokenizer};

/// Environment variable holding the bearer token for remote embedders.
pub const EMBEDDINGS_KEY_ENV: &str = "AGORA_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    DeterministicHash { dim: usize },
    RemoteService { endpoint: String, model_name: String, dim: usize },
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::DeterministicHash { dim: 256 }
    }
}

impl EmbedderSpec {
    pub fn dim(&self) -> usize {
        match self {
            EmbedderSpec::DeterministicHash { dim } | EmbedderSpec::RemoteService { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.dim() == 0 {
            return Err(MemoryError::InvalidEmbedder("dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn embed(&self, text: &str) -> Result<Vec<f32>, MemoryError> {
        embed(self, text)
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Map `text` to a unit vector.
pub fn embed(spec: &EmbedderSpec, text: &str) -> Result<Vec<f32>, MemoryError> {
    if text.trim().is_empty() {
        return Err(MemoryError::EmptyText);
    }
    spec.validate()?;
    let raw = match spec {
        EmbedderSpec::DeterministicHash { dim } => hash_embed(text, *dim),
        EmbedderSpec::RemoteService { endpoint, model_name, dim } => {
            let v = remote_embed(endpoint, model_name, text)?;
            if v.len() != *dim {
                return Err(MemoryError::DimensionMismatch { expected: *dim, got: v.len() });
            }
            v
        }
    };
    normalize(raw)
}

/// Signed feature hashing of lower-cased unigrams and bigrams.
fn hash_embed(text: &str, dim: usize) -> Vec<f64> {
    let words: Vec<String> = ApproxTokenizer
        .tokenize(text)
        .into_iter()
        .map(|r| text[r].to_lowercase())
        .collect();
    let mut v = vec![0.0f64; dim];
    let mut add = |h: u64, w: f64| {
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % dim as u64) as usize] += sign * w;
    };
    for w in &words {
        add(fnv1a(w.bytes()), 1.0);
    }
    for pair in words.windows(2) {
        add(fnv1a(pair[0].bytes().chain([0x1f]).chain(pair[1].bytes())), 0.5);
    }
    if v.iter().all(|x| *x == 0.0) {
        v[(fnv1a(text.bytes()) % dim as u64) as usize] = 1.0;
    }
    v
}

fn normalize(v: Vec<f64>) -> Result<Vec<f32>, MemoryError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(MemoryError::ServiceUnavailable("embedding has zero norm".into()));
    }
    Ok(v.into_iter().map(|x| (x / norm) as f32).collect())
}

/// POST `{model, input: [text]}`; read `data[0].embedding`.
fn remote_embed(endpoint: &str, model: &str, text: &str) -> Result<Vec<f64>, MemoryError> {
    let agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .http_status_as_error(false)
        .build()
        .new_agent();
    let mut req = agent.post(endpoint);
    if let Ok(key) = std::env::var(EMBEDDINGS_KEY_ENV) {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req
        .send_json(json!({ "model": model, "input": [text] }))
        .map_err(|e| MemoryError::ServiceUnavailable(e.to_string()))?;
    if !resp.status().is_success() {
        return Err(MemoryError::ServiceUnavailable(format!("status {}", resp.status())));
    }
    let body: Value = resp.body_mut().read_json().map_err(|e| MemoryError::ServiceUnavailable(e.to_string()))?;
    body["data"][0]["embedding"]
        .as_array()
        .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
        .ok_or_else(|| MemoryError::ServiceUnavailable("response lacks data[0].embedding".into()))
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const H: EmbedderSpec = EmbedderSpec::DeterministicHash { dim: 64 };

    #[test]
    fn deterministic() {
        assert_eq!(embed(&H, "we both cooperate").unwrap(), embed(&H, "we both cooperate").unwrap());
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(embed(&H, "  "), Err(MemoryError::EmptyText)));
    }

    #[test]
    fn zero_dim_rejected() {
        assert!(embed(&EmbedderSpec::DeterministicHash { dim: 0 }, "x").is_err());
    }

    #[test]
    fn related_texts_are_closer() {
        let a = embed(&H, "opponent defected in iteration three").unwrap();
        let b = embed(&H, "the opponent defected again").unwrap();
        let c = embed(&H, "sunny weather tomorrow").unwrap();
        assert!(cosine(&a, &b) > cosine(&a, &c));
    }

    proptest! {
        #[test]
        fn unit_norm_and_self_similarity(text in "[a-zA-Z .,!?]{1,60}".prop_filter("nonblank", |t| !t.trim().is_empty())) {
            let v = embed(&H, &text).unwrap();
            let n: f64 = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-6);
            prop_assert!((cosine(&v, &v) - 1.0).abs() < 1e-6);
        }
    }
}
