//! Session persistence: `<id>.jsonl` step logs plus `<id>.meta.json`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use huegrip_core::session::{write_step_line, SessionLog, SessionSummary, StepRecord};
use huegrip_core::teleop::ScenarioConfig;

use crate::error::{GatewayError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub status: SessionStatus,
    pub config: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SessionSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportReport {
    pub log_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: SessionSummary,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

/// Ids are generated as UUIDs; anything else could escape the store dir.
fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Drops a trailing line that has not been fully written yet.
fn complete_lines(bytes: &[u8]) -> &[u8] {
    match bytes.iter().rposition(|b| *b == b'\n') {
        Some(i) => &bytes[..=i],
        None => &[],
    }
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| GatewayError::File {
            path: dir.clone(),
            source,
        })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.meta.json"))
    }

    pub fn create(&self, config: &ScenarioConfig) -> Result<SessionWriter> {
        let id = uuid::Uuid::new_v4().to_string();
        let meta = SessionMeta {
            session_id: id.clone(),
            status: SessionStatus::InProgress,
            config: config.clone(),
            summary: None,
        };
        write_json(&self.meta_path(&id), &meta)?;
        let file = File::create(self.log_path(&id))?;
        log::info!("session {id} logging to {}", self.log_path(&id).display());
        Ok(SessionWriter {
            store: self.clone(),
            meta,
            out: BufWriter::new(file),
        })
    }

    pub fn meta(&self, id: &str) -> Result<SessionMeta> {
        if !valid_id(id) {
            return Err(GatewayError::NotFound(format!("session {id:?}")));
        }
        let path = self.meta_path(id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(GatewayError::NotFound(format!("session {id}")))
            }
            Err(source) => return Err(GatewayError::File { path, source }),
        };
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Persisted log bytes, up to the last complete line.
    pub fn raw_log(&self, id: &str) -> Result<Vec<u8>> {
        self.meta(id)?;
        let bytes = fs::read(self.log_path(id))?;
        Ok(complete_lines(&bytes).to_vec())
    }

    pub fn load(&self, id: &str) -> Result<SessionLog> {
        Ok(SessionLog::read_jsonl(self.raw_log(id)?.as_slice())?)
    }

    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let name = entry?.file_name();
            if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(".meta.json")) {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Copies the log verbatim to `<out>/<id>.jsonl` and writes
    /// `<out>/<id>.summary.csv`. Sessions still running export the steps
    /// logged so far and are flagged partial.
    pub fn export(&self, id: &str, out_dir: &Path) -> Result<ExportReport> {
        let meta = self.meta(id)?;
        let bytes = self.raw_log(id)?;
        let log = SessionLog::read_jsonl(bytes.as_slice())?;
        let summary = log.summary(meta.status == SessionStatus::InProgress);
        fs::create_dir_all(out_dir)?;
        let log_path = out_dir.join(format!("{id}.jsonl"));
        let summary_path = out_dir.join(format!("{id}.summary.csv"));
        fs::write(&log_path, &bytes)?;
        summary.write_csv(File::create(&summary_path)?)?;
        Ok(ExportReport {
            log_path,
            summary_path,
            summary,
        })
    }
}

/// Appends steps of one live session; each step is flushed as written.
pub struct SessionWriter {
    store: SessionStore,
    meta: SessionMeta,
    out: BufWriter<File>,
}

impl SessionWriter {
    pub fn id(&self) -> &str {
        &self.meta.session_id
    }

    pub fn append(&mut self, step: &StepRecord) -> Result<()> {
        write_step_line(&mut self.out, step)?;
        self.out.flush()?;
        Ok(())
    }

    /// Marks the session completed and records its summary.
    pub fn finish(mut self) -> Result<SessionSummary> {
        self.out.flush()?;
        let id = self.meta.session_id.clone();
        let log = SessionLog::read_jsonl(BufReader::new(File::open(self.store.log_path(&id))?))?;
        let summary = log.summary(false);
        self.meta.status = SessionStatus::Completed;
        self.meta.summary = Some(summary);
        write_json(&self.store.meta_path(&id), &self.meta)?;
        log::info!("session {id} completed: {}", summary.outcome.as_str());
        Ok(summary)
    }
}
