use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::hash::RequestDigest;
use super::request::ChatResponse;
use super::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub request: RequestDigest,
    pub response: ChatResponse,
}

/// Content-addressed response store: an in-memory layer, optionally backed by
/// `<dir>/<first two key chars>/<key>.json`.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, ChatResponse>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            memory: Mutex::default(),
        }
    }

    pub fn entry_path(dir: &Path, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        dir.join(shard).join(format!("{key}.json"))
    }

    pub fn load(&self, key: &str) -> Result<Option<ChatResponse>, GatewayError> {
        if let Some(hit) = self.memory.lock().unwrap().get(key) {
            return Ok(Some(hit.clone()));
        }
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = Self::entry_path(dir, key);
        if !path.is_file() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        let entry: CacheEntry = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        if entry.key != key {
            return Err(GatewayError::Cache(format!(
                "{} holds key {}",
                path.display(),
                entry.key
            )));
        }
        self.memory
            .lock()
            .unwrap()
            .insert(key.to_string(), entry.response.clone());
        Ok(Some(entry.response))
    }

    pub fn store(
        &self,
        key: &str,
        request: RequestDigest,
        response: &ChatResponse,
    ) -> Result<(), GatewayError> {
        self.memory
            .lock()
            .unwrap()
            .insert(key.to_string(), response.clone());
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = Self::entry_path(dir, key);
        let parent = path.parent().expect("entry path has a shard directory");
        fs::create_dir_all(parent)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", parent.display())))?;
        let entry = CacheEntry {
            key: key.to_string(),
            request,
            response: response.clone(),
        };
        let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
        let text = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
        fs::write(&tmp, text)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", tmp.display())))?;
        fs::rename(&tmp, &path)
            .map_err(|e| GatewayError::Cache(format!("{}: {e}", path.display())))?;
        Ok(())
    }
}
