//! Filesystem persistence: content-addressed blobs, job records with their
//! state-change logs, and the survey response log.
//!
//! Layout under the data dir: `blobs/xx/<sha256>`, `jobs/<id>.json`,
//! `jobs/<id>.log`, `survey/responses.jsonl`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use laylens_core::survey::SurveyResponse;
use laylens_core::{AnalysisJob, JobId, JobState, Sha256Digest, Timestamp};
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;
use thiserror::Error;

pub const MAX_BLOB_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("integrity error: blob {key} reads back as {actual}")]
    Integrity { key: Sha256Digest, actual: Sha256Digest },
    #[error("blob of {0} bytes exceeds the 64 MiB limit")]
    TooLarge(usize),
    #[error("terminal immutable: job {0} is already in a terminal state")]
    TerminalImmutable(JobId),
    #[error("corrupt record {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// One line of `jobs/<id>.log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub ts: Timestamp,
    pub from: Option<JobState>,
    pub to: JobState,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    survey: Mutex<Option<u64>>,
    logs: Mutex<()>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["blobs", "jobs", "survey"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root, survey: Mutex::new(None), logs: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn blob_path(&self, key: &Sha256Digest) -> PathBuf {
        let hex = key.to_hex();
        self.root.join("blobs").join(&hex[..2]).join(hex)
    }

    fn job_path(&self, id: &JobId) -> PathBuf {
        self.root.join("jobs").join(format!("{}.json", id.as_str()))
    }

    fn log_path(&self, id: &JobId) -> PathBuf {
        self.root.join("jobs").join(format!("{}.log", id.as_str()))
    }

    fn survey_path(&self) -> PathBuf {
        self.root.join("survey").join("responses.jsonl")
    }

    /// Writes via a sibling temp file and a rename, so readers see either
    /// the old content or the new, never a prefix.
    fn publish(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let dir = path.parent().expect("store paths have parents");
        fs::create_dir_all(dir)?;
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn put_blob(&self, bytes: &[u8]) -> Result<Sha256Digest, StoreError> {
        if bytes.len() > MAX_BLOB_BYTES {
            return Err(StoreError::TooLarge(bytes.len()));
        }
        let key = Sha256Digest::of(bytes);
        let path = self.blob_path(&key);
        if matches!(fs::read(&path), Ok(existing) if Sha256Digest::of(&existing) == key) {
            return Ok(key);
        }
        Self::publish(&path, bytes)?;
        Ok(key)
    }

    pub fn get_blob(&self, key: &Sha256Digest) -> Result<Vec<u8>, StoreError> {
        let bytes = match fs::read(self.blob_path(key)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(key.to_hex())),
            Err(e) => return Err(e.into()),
        };
        let actual = Sha256Digest::of(&bytes);
        if actual != *key {
            return Err(StoreError::Integrity { key: *key, actual });
        }
        Ok(bytes)
    }

    pub fn has_blob(&self, key: &Sha256Digest) -> bool {
        self.blob_path(key).is_file()
    }

    /// Re-hashes every blob; returns the keys whose content no longer matches.
    pub fn scrub(&self) -> Result<Vec<Sha256Digest>, StoreError> {
        let mut bad = Vec::new();
        for shard in fs::read_dir(self.root.join("blobs"))? {
            let shard = shard?;
            if !shard.file_type()?.is_dir() {
                continue;
            }
            for entry in fs::read_dir(shard.path())? {
                let entry = entry?;
                let Some(key) = entry.file_name().to_str().and_then(|n| n.parse::<Sha256Digest>().ok()) else {
                    continue;
                };
                if Sha256Digest::of(&fs::read(entry.path())?) != key {
                    bad.push(key);
                }
            }
        }
        bad.sort();
        Ok(bad)
    }

    /// Rewrites the job record. Once a terminal state is on disk the record
    /// can only be rewritten with identical content.
    pub fn put_job(&self, job: &AnalysisJob) -> Result<(), StoreError> {
        let path = self.job_path(job.job_id());
        match self.read_job(&path) {
            Ok(existing) if existing.is_terminal() && existing != *job => {
                return Err(StoreError::TerminalImmutable(job.job_id().clone()));
            }
            Ok(_) | Err(StoreError::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
        let bytes = serde_json::to_vec_pretty(job).expect("jobs serialize");
        Self::publish(&path, &bytes)
    }

    fn read_job(&self, path: &Path) -> Result<AnalysisJob, StoreError> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(path.display().to_string()));
            }
            Err(e) => return Err(e.into()),
        };
        serde_json::from_slice(&bytes)
            .map_err(|e| StoreError::Corrupt { path: path.to_path_buf(), detail: e.to_string() })
    }

    pub fn get_job(&self, id: &JobId) -> Result<AnalysisJob, StoreError> {
        self.read_job(&self.job_path(id)).map_err(|e| match e {
            StoreError::NotFound(_) => StoreError::NotFound(id.to_string()),
            other => other,
        })
    }

    /// Every stored job, newest first (ties broken by id).
    pub fn all_jobs(&self) -> Result<Vec<AnalysisJob>, StoreError> {
        let mut jobs = Vec::new();
        for entry in fs::read_dir(self.root.join("jobs"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                jobs.push(self.read_job(&path)?);
            }
        }
        jobs.sort_by(|a, b| {
            b.created_at().cmp(&a.created_at()).then_with(|| a.job_id().as_str().cmp(b.job_id().as_str()))
        });
        Ok(jobs)
    }

    /// `page` counts from 1.
    pub fn list_jobs(&self, page: usize, page_size: usize) -> Result<Vec<AnalysisJob>, StoreError> {
        if page == 0 || page_size == 0 {
            return Ok(Vec::new());
        }
        let skip = (page - 1).saturating_mul(page_size);
        Ok(self.all_jobs()?.into_iter().skip(skip).take(page_size).collect())
    }

    pub fn append_log(&self, id: &JobId, entry: &LogEntry) -> Result<(), StoreError> {
        let _guard = self.logs.lock().unwrap();
        let mut line = serde_json::to_vec(entry).expect("log entries serialize");
        line.push(b'\n');
        let mut file = OpenOptions::new().create(true).append(true).open(self.log_path(id))?;
        file.write_all(&line)?;
        Ok(())
    }

    pub fn read_log(&self, id: &JobId) -> Result<Vec<LogEntry>, StoreError> {
        let path = self.log_path(id);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        read_jsonl(&path, file)
    }

    /// Appends one response and returns its 1-based line number.
    pub fn append_survey_response(&self, resp: &SurveyResponse) -> Result<u64, StoreError> {
        let mut count = self.survey.lock().unwrap();
        let path = self.survey_path();
        let current = match *count {
            Some(n) => n,
            None => count_lines(&path)?,
        };
        let mut line = serde_json::to_vec(resp).expect("responses serialize");
        line.push(b'\n');
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        file.write_all(&line)?;
        file.sync_data()?;
        *count = Some(current + 1);
        Ok(current + 1)
    }

    pub fn survey_responses(&self) -> Result<Vec<SurveyResponse>, StoreError> {
        let _guard = self.survey.lock().unwrap();
        let path = self.survey_path();
        match File::open(&path) {
            Ok(f) => read_jsonl(&path, f),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }
}

fn count_lines(path: &Path) -> Result<u64, StoreError> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f).lines().filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty())).count() as u64),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(e.into()),
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, file: File) -> Result<Vec<T>, StoreError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            detail: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}
