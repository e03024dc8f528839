use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::AppError;
use crate::gateway::{
    ChatBackend, EmbeddingBackend, Gateway, HttpChatBackend, HttpConfig, HttpEmbeddingBackend,
    MockBackend, MockEmbedder, MockScript, ResponseCache, RetryPolicy,
};
use crate::strategies::{Strategy, StrategyConfig};

fn default_api_key_env() -> String {
    "TCOT_API_KEY".to_string()
}

fn default_timeout_secs() -> u64 {
    120
}

/// The chat backend of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Mock {
        model_id: String,
        mock_script: PathBuf,
    },
    Http {
        model_id: String,
        base_url: String,
        /// Environment variable holding the API key; keys never live in
        /// config files.
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate_limit_per_minute: Option<usize>,
    },
}

impl BackendSpec {
    pub fn model_id(&self) -> &str {
        match self {
            BackendSpec::Mock { model_id, .. } | BackendSpec::Http { model_id, .. } => model_id,
        }
    }
}

/// Embedding backend for the similarity strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSpec {
    Mock {
        #[serde(default = "default_embedding_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Http {
        model_id: String,
        base_url: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_text_tokens: Option<usize>,
    },
}

fn default_embedding_dim() -> usize {
    64
}

/// LLM-as-judge scoring for open-ended questions, sent through the run's
/// chat backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSpec {
    pub model_id: String,
    /// Template file with `{question}`, `{answer}` and `{prediction}`;
    /// the built-in template when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<PathBuf>,
}

fn default_parallelism() -> usize {
    4
}

fn default_max_failure_fraction() -> f64 {
    0.05
}

/// One experiment: a dataset, a strategy and a backend. Relative paths are
/// resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// SHA-256 of the dataset file; filled in when the config is resolved
    /// and checked when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
    pub frames_root: PathBuf,
    pub strategy: String,
    #[serde(default)]
    pub strategy_config: StrategyConfig,
    pub backend: BackendSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge: Option<JudgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Questions processed concurrently.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Seeds every random choice of the run; overrides
    /// `strategy_config.rng_seed`.
    #[serde(default)]
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    /// Share of failed questions above which the run exits with status 3.
    #[serde(default = "default_max_failure_fraction")]
    pub max_failure_fraction: f64,
}

fn absolutize(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn must_exist(what: &str, p: &Path) -> Result<(), AppError> {
    if p.exists() {
        Ok(())
    } else {
        Err(AppError::Config(format!(
            "{what} {} does not exist",
            p.display()
        )))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    /// Makes every relative path absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        absolutize(&base, &mut self.dataset);
        absolutize(&base, &mut self.frames_root);
        absolutize(&base, &mut self.output_dir);
        if let Some(c) = &mut self.cache_dir {
            absolutize(&base, c);
        }
        if let BackendSpec::Mock { mock_script, .. } = &mut self.backend {
            absolutize(&base, mock_script);
        }
        if let Some(JudgeSpec {
            template: Some(t), ..
        }) = &mut self.judge
        {
            absolutize(&base, t);
        }
    }

    pub fn strategy(&self) -> Result<Strategy, AppError> {
        self.strategy
            .parse()
            .map_err(|e: crate::strategies::StrategyError| AppError::Config(e.to_string()))
    }

    /// The strategy knobs with the run seed applied.
    pub fn effective_strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            rng_seed: self.rng_seed,
            ..self.strategy_config.clone()
        }
    }

    /// Checks names, knobs and referenced paths.
    pub fn validate(&self) -> Result<Strategy, AppError> {
        let strategy = self.strategy()?;
        self.effective_strategy_config()
            .validate()
            .map_err(|e| AppError::Config(e.to_string()))?;
        must_exist("dataset", &self.dataset)?;
        must_exist("frames_root", &self.frames_root)?;
        if let BackendSpec::Mock { mock_script, .. } = &self.backend {
            must_exist("mock_script", mock_script)?;
        }
        if let Some(JudgeSpec {
            template: Some(t), ..
        }) = &self.judge
        {
            must_exist("judge template", t)?;
        }
        if strategy.needs_embedder() && self.embedding.is_none() {
            return Err(AppError::Config(format!(
                "strategy {strategy} needs an \"embedding\" backend"
            )));
        }
        if self.parallelism == 0 {
            return Err(AppError::Config("parallelism must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(AppError::Config(
                "max_failure_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(strategy)
    }

    /// Identity of the experiment. Output location, cache location and
    /// worker count do not affect results and are left out; input files
    /// enter through their content digests.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(map) = &mut v {
            for volatile in [
                "output_dir",
                "cache_dir",
                "parallelism",
                "dataset",
                "frames_root",
            ] {
                map.remove(volatile);
            }
            if let Some(Value::Object(backend)) = map.get_mut("backend") {
                if let Some(Value::String(script)) = backend.remove("mock_script") {
                    let digest = std::fs::read(&script)
                        .map(|b| crate::gateway::sha256_hex(&b))
                        .unwrap_or(script);
                    backend.insert("mock_script_sha256".into(), Value::String(digest));
                }
            }
            if let Some(Value::Object(judge)) = map.get_mut("judge") {
                if let Some(Value::String(tpl)) = judge.remove("template") {
                    let digest = std::fs::read(&tpl)
                        .map(|b| crate::gateway::sha256_hex(&b))
                        .unwrap_or(tpl);
                    judge.insert("template_sha256".into(), Value::String(digest));
                }
            }
        }
        // serde_json maps are ordered by key, so this is canonical.
        let canonical = serde_json::to_string(&v).expect("value serializes");
        crate::gateway::sha256_hex(canonical.as_bytes())[..16].to_string()
    }

    pub fn build_gateway(&self) -> Result<Gateway, AppError> {
        let backend: Arc<dyn ChatBackend> = match &self.backend {
            BackendSpec::Mock { mock_script, .. } => {
                let script =
                    MockScript::load(mock_script).map_err(|e| AppError::Config(e.to_string()))?;
                Arc::new(MockBackend::new(script))
            }
            BackendSpec::Http {
                base_url,
                api_key_env,
                timeout_secs,
                ..
            } => Arc::new(
                HttpChatBackend::new(&HttpConfig {
                    base_url: base_url.clone(),
                    api_key_env: Some(api_key_env.clone()),
                    timeout: Duration::from_secs(*timeout_secs),
                })
                .map_err(|e| AppError::Backend(e.to_string()))?,
            ),
        };
        let mut gateway = Gateway::new(backend).with_retry(self.retry.clone());
        if let Some(dir) = &self.cache_dir {
            gateway = gateway.with_cache(ResponseCache::on_disk(dir));
        }
        if let BackendSpec::Http {
            rate_limit_per_minute: Some(n),
            ..
        } = &self.backend
        {
            gateway = gateway.with_rate_limit(*n);
        }
        Ok(gateway)
    }

    pub fn build_embedder(&self) -> Result<Option<Box<dyn EmbeddingBackend>>, AppError> {
        Ok(match &self.embedding {
            None => None,
            Some(EmbeddingSpec::Mock { dim, seed }) => {
                Some(Box::new(MockEmbedder::new(*dim, *seed)))
            }
            Some(EmbeddingSpec::Http {
                model_id,
                base_url,
                api_key_env,
                timeout_secs,
                max_text_tokens,
            }) => Some(Box::new(
                HttpEmbeddingBackend::new(
                    &HttpConfig {
                        base_url: base_url.clone(),
                        api_key_env: Some(api_key_env.clone()),
                        timeout: Duration::from_secs(*timeout_secs),
                    },
                    model_id.clone(),
                    *max_text_tokens,
                )
                .map_err(|e| AppError::Backend(e.to_string()))?,
            )),
        })
    }

    pub fn judge_template(&self) -> Result<Option<(String, String)>, AppError> {
        let Some(judge) = &self.judge else {
            return Ok(None);
        };
        let text = match &judge.template {
            Some(path) => std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?,
            None => crate::prompting::template::JUDGE.to_string(),
        };
        crate::eval::validate_judge_template(&text).map_err(|e| AppError::Config(e.to_string()))?;
        Ok(Some((judge.model_id.clone(), text)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        serde_json::from_str(
            r#"{
                "dataset": "data.jsonl",
                "frames_root": "frames",
                "strategy": "dynamic-segment",
                "backend": {"kind": "mock", "model_id": "mock-vlm", "mock_script": "script.json"},
                "output_dir": "runs/a"
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut cfg = sample();
        cfg.resolve_paths(Path::new("/data/exp"));
        assert_eq!(cfg.dataset, PathBuf::from("/data/exp/data.jsonl"));
        assert_eq!(cfg.output_dir, PathBuf::from("/data/exp/runs/a"));
        let BackendSpec::Mock { mock_script, .. } = &cfg.backend else {
            panic!()
        };
        assert_eq!(mock_script, &PathBuf::from("/data/exp/script.json"));
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = sample();
        let mut b = sample();
        b.output_dir = PathBuf::from("elsewhere");
        b.parallelism = 16;
        assert_eq!(a.config_hash(), b.config_hash());
        b.strategy_config.uniform_frames = 32;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn unknown_strategy_names_valid_set() {
        let mut cfg = sample();
        cfg.strategy = "tcot-magic".into();
        let err = cfg.strategy().unwrap_err().to_string();
        assert!(
            err.contains("tcot-magic") && err.contains("single-step") && err.contains("baseline")
        );
    }
}
