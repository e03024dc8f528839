use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hash::sha256_hex;
use super::request::estimate_text_tokens;
use super::GatewayError;
use crate::frames::FramePayload;
use crate::similarity::Embedding;

#[derive(Debug, Clone, PartialEq)]
pub enum EmbedItem {
    Text(String),
    Image(FramePayload),
}

impl EmbedItem {
    /// Digest of the item's content; frame ids do not contribute.
    pub fn content_key(&self) -> String {
        match self {
            EmbedItem::Text(t) => format!("text:{}", sha256_hex(t.as_bytes())),
            EmbedItem::Image(img) => format!("image:{}", sha256_hex(&img.bytes)),
        }
    }
}

pub trait EmbeddingBackend: Send + Sync {
    /// Longest accepted text, in estimated tokens.
    fn max_text_tokens(&self) -> Option<usize> {
        None
    }

    fn embed_batch(&self, items: &[EmbedItem]) -> Result<Vec<Embedding<f64>>, GatewayError>;
}

/// Embeds `items` into unit vectors, one per item.
pub fn embed(
    items: &[EmbedItem],
    backend: &dyn EmbeddingBackend,
) -> Result<Vec<Embedding<f64>>, GatewayError> {
    if items.is_empty() {
        return Err(GatewayError::BadRequest("nothing to embed".into()));
    }
    if let Some(limit) = backend.max_text_tokens() {
        for (index, item) in items.iter().enumerate() {
            if let EmbedItem::Text(t) = item {
                let tokens = estimate_text_tokens(t.chars().count()) as usize;
                if tokens > limit {
                    return Err(GatewayError::ItemTooLong {
                        index,
                        tokens,
                        limit,
                    });
                }
            }
        }
    }
    let out = backend.embed_batch(items)?;
    if out.len() != items.len() {
        return Err(GatewayError::BadResponse(format!(
            "{} embeddings for {} items",
            out.len(),
            items.len()
        )));
    }
    Ok(out)
}

/// Deterministic embeddings: a seeded pseudo-random unit vector per content
/// digest. Specific contents can be pinned to chosen vectors.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
    seed: u64,
    max_text_tokens: Option<usize>,
    pins: HashMap<String, Vec<f64>>,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim: dim.max(1),
            seed,
            max_text_tokens: None,
            pins: HashMap::new(),
        }
    }

    pub fn with_max_text_tokens(mut self, limit: usize) -> Self {
        self.max_text_tokens = Some(limit);
        self
    }

    pub fn pin(&mut self, item: &EmbedItem, vector: Vec<f64>) {
        self.pins.insert(item.content_key(), vector);
    }

    /// Makes `item` embed to the same vector as `like`.
    pub fn alias(&mut self, item: &EmbedItem, like: &EmbedItem) {
        let v = self.raw(&like.content_key());
        self.pin(item, v);
    }

    fn raw(&self, key: &str) -> Vec<f64> {
        if let Some(v) = self.pins.get(key) {
            return v.clone();
        }
        let digest = sha256_hex(key.as_bytes());
        let prefix = u64::from_str_radix(&digest[..16], 16).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(prefix ^ self.seed);
        (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }
}

impl EmbeddingBackend for MockEmbedder {
    fn max_text_tokens(&self) -> Option<usize> {
        self.max_text_tokens
    }

    fn embed_batch(&self, items: &[EmbedItem]) -> Result<Vec<Embedding<f64>>, GatewayError> {
        items
            .iter()
            .map(|it| {
                Embedding::normalized(self.raw(&it.content_key()))
                    .ok_or_else(|| GatewayError::BadResponse("degenerate mock embedding".into()))
            })
            .collect()
    }
}
