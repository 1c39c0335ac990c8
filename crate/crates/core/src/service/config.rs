use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::store::{KvStore, MemoryStore, RedbStore};
use super::ServiceError;

pub const ENV_PORT: &str = "MTBENCH_PORT";
pub const ENV_STORAGE_PATH: &str = "MTBENCH_STORAGE_PATH";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// redb file; `None` keeps everything in memory.
    pub storage_path: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            storage_path: None,
        }
    }
}

impl ServiceConfig {
    /// Applies overrides from a variable lookup (normally `std::env::var`).
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ServiceError> {
        if let Some(port) = lookup(ENV_PORT) {
            self.port = port
                .trim()
                .parse()
                .map_err(|_| ServiceError::Validation(format!("{ENV_PORT}={port:?} is not a port number")))?;
        }
        if let Some(path) = lookup(ENV_STORAGE_PATH) {
            self.storage_path = Some(PathBuf::from(path));
        }
        Ok(())
    }

    pub fn with_env(mut self) -> Result<Self, ServiceError> {
        self.apply_overrides(|k| std::env::var(k).ok())?;
        Ok(self)
    }

    pub fn open_store(&self) -> Result<Arc<dyn KvStore>, ServiceError> {
        Ok(match &self.storage_path {
            Some(path) => Arc::new(RedbStore::open(path)?),
            None => Arc::new(MemoryStore::new()),
        })
    }
}
