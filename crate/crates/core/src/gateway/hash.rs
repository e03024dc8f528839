use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::request::{ChatRequest, Part};

/// Content summary of a request: everything that determines the response,
/// with text and image bytes reduced to digests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestDigest {
    pub model_id: String,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub max_output_tokens: u32,
    pub parts: Vec<String>,
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn request_digest(req: &ChatRequest) -> RequestDigest {
    RequestDigest {
        model_id: req.model_id.clone(),
        temperature: req.temperature,
        seed: req.seed,
        max_output_tokens: req.max_output_tokens,
        parts: req
            .parts
            .iter()
            .map(|p| match p {
                Part::Text { text, .. } => format!("text:{}", sha256_hex(text.as_bytes())),
                Part::Image(img) => format!("image:{}", sha256_hex(&img.bytes)),
            })
            .collect(),
    }
}

/// Stable cache key for a request.
///
/// Covers the model, the ordered part contents (image bytes, not paths or
/// frame ids), temperature, seed and output limit. Routing metadata is
/// excluded.
pub fn hash_request(req: &ChatRequest) -> String {
    let digest = request_digest(req);
    let canonical = serde_json::to_vec(&digest).expect("digest serializes");
    sha256_hex(&canonical)
}
