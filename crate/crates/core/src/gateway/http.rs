//! OpenAI-compatible `/chat/completions` and `/embeddings` clients.

use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use super::embed::{EmbedItem, EmbeddingBackend};
use super::request::{ChatRequest, ChatResponse, Part, Usage};
use super::{ChatBackend, GatewayError};
use crate::similarity::Embedding;

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    /// Name of the environment variable holding the API key, if any.
    pub api_key_env: Option<String>,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key_env: None,
            timeout: Duration::from_secs(120),
        }
    }
}

struct Client {
    base_url: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl Client {
    fn new(cfg: &HttpConfig) -> Result<Self, GatewayError> {
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                GatewayError::Auth(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(Self {
            base_url: cfg.base_url.trim_end_matches('/').to_string(),
            api_key,
            http,
        })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, GatewayError> {
        let mut rb = self
            .http
            .post(format!("{}{path}", self.base_url))
            .json(body);
        if let Some(key) = &self.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = rb.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout(e.to_string())
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let text = resp
            .text()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(classify_status(status, text));
        }
        serde_json::from_str(&text).map_err(|e| GatewayError::BadResponse(format!("{e}: {text}")))
    }
}

/// Maps an HTTP error status (and body) onto the gateway's error classes.
pub fn classify_status(status: u16, body: String) -> GatewayError {
    let lower = body.to_ascii_lowercase();
    match status {
        401 | 403 => GatewayError::Auth(body),
        413 => GatewayError::PayloadTooLarge(body),
        400 if lower.contains("context_length")
            || lower.contains("maximum context")
            || lower.contains("too large") =>
        {
            GatewayError::PayloadTooLarge(body)
        }
        408 => GatewayError::Timeout(body),
        429 => GatewayError::RateLimited(body),
        500..=599 => GatewayError::Server { status, body },
        _ => GatewayError::Client { status, body },
    }
}

fn media_type(bytes: &[u8]) -> &'static str {
    match bytes {
        [0x89, b'P', b'N', b'G', ..] => "image/png",
        [b'R', b'I', b'F', b'F', _, _, _, _, b'W', b'E', b'B', b'P', ..] => "image/webp",
        _ => "image/jpeg",
    }
}

/// The JSON body sent to `/chat/completions`.
pub fn chat_body(req: &ChatRequest) -> Value {
    let content: Vec<Value> = req
        .parts
        .iter()
        .map(|p| match p {
            Part::Text { text, .. } => json!({ "type": "text", "text": text }),
            Part::Image(img) => json!({
                "type": "image_url",
                "image_url": {
                    "url": format!("data:{};base64,{}", media_type(&img.bytes), STANDARD.encode(&img.bytes))
                }
            }),
        })
        .collect();
    let mut body = json!({
        "model": req.model_id,
        "messages": [{ "role": "user", "content": content }],
        "temperature": req.temperature,
        "max_tokens": req.max_output_tokens,
    });
    if let Some(seed) = req.seed {
        body["seed"] = json!(seed);
    }
    body
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

fn message_text(content: &Value) -> Option<String> {
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        Value::Null => Some(String::new()),
        _ => None,
    }
}

/// Parses a `/chat/completions` response body.
pub fn parse_chat_response(body: &Value) -> Result<ChatResponse, GatewayError> {
    let content = body.pointer("/choices/0/message/content").ok_or_else(|| {
        GatewayError::BadResponse(format!("no choices[0].message.content in {body}"))
    })?;
    let text = message_text(content)
        .ok_or_else(|| GatewayError::BadResponse(format!("unexpected content {content}")))?;
    let usage = body
        .get("usage")
        .and_then(|u| serde_json::from_value::<WireUsage>(u.clone()).ok())
        .map(|u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
        })
        .unwrap_or_default();
    Ok(ChatResponse {
        text,
        usage,
        backend_latency_ms: 0,
    })
}

pub struct HttpChatBackend {
    client: Client,
}

impl HttpChatBackend {
    pub fn new(cfg: &HttpConfig) -> Result<Self, GatewayError> {
        Ok(Self {
            client: Client::new(cfg)?,
        })
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let start = Instant::now();
        let body = self.client.post("/chat/completions", &chat_body(req))?;
        let mut resp = parse_chat_response(&body)?;
        resp.backend_latency_ms = start.elapsed().as_millis() as u64;
        Ok(resp)
    }
}

/// Text embeddings over `/embeddings`. Image items are rejected: the
/// OpenAI dialect has no image embedding input.
pub struct HttpEmbeddingBackend {
    client: Client,
    model_id: String,
    max_text_tokens: Option<usize>,
}

impl HttpEmbeddingBackend {
    pub fn new(
        cfg: &HttpConfig,
        model_id: impl Into<String>,
        max_text_tokens: Option<usize>,
    ) -> Result<Self, GatewayError> {
        Ok(Self {
            client: Client::new(cfg)?,
            model_id: model_id.into(),
            max_text_tokens,
        })
    }
}

impl EmbeddingBackend for HttpEmbeddingBackend {
    fn max_text_tokens(&self) -> Option<usize> {
        self.max_text_tokens
    }

    fn embed_batch(&self, items: &[EmbedItem]) -> Result<Vec<Embedding<f64>>, GatewayError> {
        let inputs = items
            .iter()
            .map(|it| match it {
                EmbedItem::Text(t) => Ok(t.clone()),
                EmbedItem::Image(_) => Err(GatewayError::Unsupported(
                    "image embeddings are not available over the OpenAI-compatible API".into(),
                )),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let body = self.client.post(
            "/embeddings",
            &json!({ "model": self.model_id, "input": inputs }),
        )?;
        let data = body
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::BadResponse(format!("no data array in {body}")))?;
        if data.len() != items.len() {
            return Err(GatewayError::BadResponse(format!(
                "{} embeddings for {} inputs",
                data.len(),
                items.len()
            )));
        }
        data.iter()
            .map(|d| {
                let values: Vec<f64> = d
                    .get("embedding")
                    .and_then(|e| serde_json::from_value(e.clone()).ok())
                    .ok_or_else(|| {
                        GatewayError::BadResponse("embedding is not a number array".into())
                    })?;
                Embedding::normalized(values)
                    .ok_or_else(|| GatewayError::BadResponse("zero-length embedding".into()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::FramePayload;
    use crate::gateway::CallRole;

    #[test]
    fn body_shape() {
        let req = ChatRequest::new(
            "gpt-4o-mini",
            CallRole::Answer,
            vec![
                Part::text("Frames: "),
                Part::Image(FramePayload {
                    frame_id: 4,
                    bytes: vec![0xFF, 0xD8, 0xFF].into(),
                }),
            ],
        )
        .with_seed(3);
        let body = chat_body(&req);
        assert_eq!(body["model"], "gpt-4o-mini");
        assert_eq!(body["seed"], 3);
        assert_eq!(body["messages"][0]["content"][0]["text"], "Frames: ");
        assert_eq!(
            body["messages"][0]["content"][1]["image_url"]["url"],
            "data:image/jpeg;base64,/9j/"
        );
    }

    #[test]
    fn response_parsing() {
        let body = json!({"choices": [{"message": {"content": "Final Answer: (1)"}}],
                          "usage": {"prompt_tokens": 31000, "completion_tokens": 40}});
        let r = parse_chat_response(&body).unwrap();
        assert_eq!(r.text, "Final Answer: (1)");
        assert_eq!(r.usage.prompt_tokens, Some(31000));
        assert!(parse_chat_response(&json!({"choices": []})).is_err());
    }

    #[test]
    fn status_classes() {
        assert!(matches!(
            classify_status(401, String::new()),
            GatewayError::Auth(_)
        ));
        assert!(matches!(
            classify_status(413, String::new()),
            GatewayError::PayloadTooLarge(_)
        ));
        assert!(matches!(
            classify_status(400, "context_length_exceeded".into()),
            GatewayError::PayloadTooLarge(_)
        ));
        assert!(matches!(
            classify_status(429, String::new()),
            GatewayError::RateLimited(_)
        ));
        assert!(matches!(
            classify_status(503, String::new()),
            GatewayError::Server { .. }
        ));
        assert!(matches!(
            classify_status(404, String::new()),
            GatewayError::Client { .. }
        ));
    }
}
