//! On-disk session store with an in-memory cache of replayed sessions.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use elicit_core::elicitation::{Session, SessionConfig};
use elicit_core::store::{LogHeader, LogWriter, SessionLog, StoreError};

use crate::error::ApiError;

pub struct SessionEntry {
    pub id: String,
    pub session: Session,
    pub writer: LogWriter,
}

pub type SharedEntry = Arc<Mutex<SessionEntry>>;

/// All sessions under one data directory, one `<id>.jsonl` log each.
pub struct Registry {
    dir: PathBuf,
    cache: Mutex<HashMap<String, SharedEntry>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Registry {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Registry { dir, cache: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    /// Validates `config`, writes the log header and caches the new session.
    pub fn create(&self, config: SessionConfig) -> Result<(String, SharedEntry), ApiError> {
        let session = Session::new(config)?;
        for _ in 0..8 {
            let id = format!("{:016x}", rand::random::<u64>());
            let path = self.log_path(&id);
            let header = LogHeader::new(id.clone(), now_millis(), session.config().clone());
            let writer = match LogWriter::create(&path, &header) {
                Ok(w) => w,
                Err(StoreError::Io(e)) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e.into()),
            };
            let entry = Arc::new(Mutex::new(SessionEntry { id: id.clone(), session: session.clone(), writer }));
            self.cache.lock().expect("cache lock").insert(id.clone(), entry.clone());
            return Ok((id, entry));
        }
        Err(ApiError::internal("could not allocate a session id"))
    }

    /// Cached session, or the one rebuilt from its log.
    pub fn get(&self, id: &str) -> Result<SharedEntry, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::not_found(id));
        }
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(e) = cache.get(id) {
            return Ok(e.clone());
        }
        let path = self.log_path(id);
        if !path.exists() {
            return Err(ApiError::not_found(id));
        }
        let log = SessionLog::read(&path)?;
        let session = log.replay()?;
        let writer = LogWriter::open(&path)?;
        let entry = Arc::new(Mutex::new(SessionEntry { id: id.to_string(), session, writer }));
        cache.insert(id.to_string(), entry.clone());
        tracing::info!(session = id, answered = log.records.len(), "restored session from log");
        Ok(entry)
    }

    /// Drops a cached session so the next access replays it from disk.
    pub fn evict(&self, id: &str) {
        self.cache.lock().expect("cache lock").remove(id);
    }
}
