//! Line-delimited session logs.
//!
//! A log file holds one header line (format tag, session id, config) followed
//! by one judgement record per line. The log is the source of truth: a
//! session is restored by replaying it.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elicitation::{ElicitError, JudgementRecord, Session, SessionConfig};

pub const LOG_FORMAT: &str = "elicit-session/1";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported log format {0:?}")]
    Format(String),
    #[error(transparent)]
    Replay(#[from] ElicitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub session_id: String,
    pub created_at: u64,
    pub config: SessionConfig,
}

impl LogHeader {
    pub fn new(session_id: impl Into<String>, created_at: u64, config: SessionConfig) -> Self {
        LogHeader { format: LOG_FORMAT.to_string(), session_id: session_id.into(), created_at, config }
    }
}

/// Header and records of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub records: Vec<JudgementRecord>,
}

impl SessionLog {
    pub fn from_session(session_id: impl Into<String>, created_at: u64, session: &Session) -> Self {
        SessionLog {
            header: LogHeader::new(session_id, created_at, session.config().clone()),
            records: session.records(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = header_line(&self.header);
        for r in &self.records {
            out.push_str(&record_line(r));
        }
        out
    }

    /// Parses a log. A final line without a trailing newline that fails to
    /// parse is treated as an interrupted write and dropped.
    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let first = lines.first().ok_or(StoreError::Parse { line: 1, message: "empty log".into() })?;
        let header: LogHeader =
            serde_json::from_str(first).map_err(|e| StoreError::Parse { line: 1, message: e.to_string() })?;
        if header.format != LOG_FORMAT {
            return Err(StoreError::Format(header.format));
        }
        let mut records = Vec::with_capacity(lines.len().saturating_sub(1));
        for (i, line) in lines.iter().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<JudgementRecord>(line) {
                Ok(r) => records.push(r),
                Err(_) if !complete && i == lines.len() - 1 => break,
                Err(e) => return Err(StoreError::Parse { line: i + 1, message: e.to_string() }),
            }
        }
        Ok(SessionLog { header, records })
    }

    pub fn read(path: &Path) -> Result<Self, StoreError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), StoreError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn replay(&self) -> Result<Session, StoreError> {
        Ok(Session::replay(self.header.config.clone(), &self.records)?)
    }
}

fn header_line(h: &LogHeader) -> String {
    let mut s = serde_json::to_string(h).expect("header serialises");
    s.push('\n');
    s
}

fn record_line(r: &JudgementRecord) -> String {
    let mut s = serde_json::to_string(r).expect("record serialises");
    s.push('\n');
    s
}

/// Append handle on a session log file.
#[derive(Debug)]
pub struct LogWriter {
    file: File,
}

impl LogWriter {
    /// Creates a new log; fails if the file exists.
    pub fn create(path: &Path, header: &LogHeader) -> Result<Self, StoreError> {
        let mut file = OpenOptions::new().write(true).create_new(true).open(path)?;
        file.write_all(header_line(header).as_bytes())?;
        file.sync_data()?;
        Ok(LogWriter { file })
    }

    pub fn open(path: &Path) -> Result<Self, StoreError> {
        Ok(LogWriter { file: OpenOptions::new().append(true).open(path)? })
    }

    /// Appends one record and syncs it to disk.
    pub fn append(&mut self, record: &JudgementRecord) -> Result<(), StoreError> {
        self.file.write_all(record_line(record).as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}
