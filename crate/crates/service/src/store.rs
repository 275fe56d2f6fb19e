//! Content-addressed files under a data directory plus one session index.
//!
//! Layout: `programs/<sha256>.tact`, `versions/<id>.json`, `demos/<id>.json`,
//! `traces/<run>.json`, `feedback/<id>.json`, `index.json`. Content files are
//! written before the index, so a crash can orphan a file but never leaves
//! the index pointing at nothing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use tacticforge_core::domain::{DemonstrationTrace, ExecutionTrace};
use tacticforge_core::grounding::GroundedTranscript;
use tacticforge_core::synth::{FeedbackSession, Provenance};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no {kind} {id}")]
    NotFound { kind: &'static str, id: String },
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store file: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn short_id(prefix: &str, bytes: &[u8]) -> String {
    format!("{prefix}{}", &sha256_hex(bytes)[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub registry: String,
    pub scenario: String,
    pub demos: Vec<String>,
    /// Program versions, oldest first; only ever appended to.
    pub versions: Vec<String>,
    pub runs: Vec<String>,
    pub feedback: Vec<String>,
}

impl Session {
    pub fn head(&self) -> Option<&str> {
        self.versions.last().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramVersion {
    pub id: String,
    pub session: String,
    pub parent: Option<String>,
    pub program_hash: String,
    pub source: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub id: String,
    pub session: String,
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub max_ticks: u64,
    pub last_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredFeedback {
    pub id: String,
    pub session: String,
    pub version: String,
    pub run: Option<String>,
    pub feedback: FeedbackSession,
    /// The grounded transcript the repair prompt will see.
    pub grounded: GroundedTranscript,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Counters {
    session: u64,
    run: u64,
    feedback: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Index {
    next: Counters,
    sessions: BTreeMap<String, Session>,
    runs: BTreeMap<String, RunMeta>,
}

pub struct Store {
    root: PathBuf,
    index: Index,
}

const DIRS: [&str; 5] = ["programs", "versions", "demos", "traces", "feedback"];

/// Write-then-rename so readers never see a half-written file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for d in DIRS {
            fs::create_dir_all(root.join(d))?;
        }
        let index_path = root.join("index.json");
        let index = if index_path.exists() { serde_json::from_slice(&fs::read(&index_path)?)? } else { Index::default() };
        Ok(Store { root, index })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn save_index(&self) -> Result<(), StoreError> {
        let text = serde_json::to_vec_pretty(&self.index).expect("index serializes");
        write_atomic(&self.root.join("index.json"), &text)
    }

    fn file(&self, dir: &str, name: &str) -> PathBuf {
        self.root.join(dir).join(name)
    }

    fn read(&self, dir: &str, name: &str, kind: &'static str, id: &str) -> Result<Vec<u8>, StoreError> {
        match fs::read(self.file(dir, name)) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(StoreError::NotFound { kind, id: id.into() }),
            Err(e) => Err(e.into()),
        }
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.index.sessions.values()
    }

    pub fn session(&self, id: &str) -> Result<&Session, StoreError> {
        self.index.sessions.get(id).ok_or_else(|| StoreError::NotFound { kind: "session", id: id.into() })
    }

    fn session_mut(&mut self, id: &str) -> Result<&mut Session, StoreError> {
        self.index.sessions.get_mut(id).ok_or_else(|| StoreError::NotFound { kind: "session", id: id.into() })
    }

    pub fn create_session(&mut self, registry: &str, scenario: &str) -> Result<Session, StoreError> {
        self.index.next.session += 1;
        let s = Session {
            id: format!("s{}", self.index.next.session),
            registry: registry.into(),
            scenario: scenario.into(),
            demos: vec![],
            versions: vec![],
            runs: vec![],
            feedback: vec![],
        };
        self.index.sessions.insert(s.id.clone(), s.clone());
        self.save_index()?;
        Ok(s)
    }

    pub fn put_demo(&mut self, session: &str, demo: &DemonstrationTrace) -> Result<String, StoreError> {
        self.session(session)?;
        let text = demo.to_json();
        let id = short_id("d", text.as_bytes());
        write_atomic(&self.file("demos", &format!("{id}.json")), text.as_bytes())?;
        let s = self.session_mut(session)?;
        if !s.demos.contains(&id) {
            s.demos.push(id.clone());
        }
        self.save_index()?;
        Ok(id)
    }

    pub fn demo(&self, id: &str) -> Result<DemonstrationTrace, StoreError> {
        let bytes = self.read("demos", &format!("{id}.json"), "demo", id)?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Appends a version whose parent must be the current head.
    pub fn append_version(
        &mut self,
        session: &str,
        parent: Option<&str>,
        source: &str,
        provenance: Provenance,
    ) -> Result<ProgramVersion, StoreError> {
        let head = self.session(session)?.head().map(str::to_string);
        if head.as_deref() != parent {
            return Err(StoreError::Conflict(format!(
                "version {} is not the head of session {session}",
                parent.unwrap_or("(none)")
            )));
        }
        let program_hash = sha256_hex(source.as_bytes());
        let key = serde_json::to_vec(&(session, parent, &program_hash, &provenance)).expect("serializes");
        let v = ProgramVersion {
            id: short_id("v", &key),
            session: session.into(),
            parent: parent.map(str::to_string),
            program_hash: program_hash.clone(),
            source: source.into(),
            provenance,
        };
        write_atomic(&self.file("programs", &format!("{program_hash}.tact")), source.as_bytes())?;
        write_atomic(&self.file("versions", &format!("{}.json", v.id)), &serde_json::to_vec_pretty(&v).expect("serializes"))?;
        self.session_mut(session)?.versions.push(v.id.clone());
        self.save_index()?;
        Ok(v)
    }

    pub fn version(&self, id: &str) -> Result<ProgramVersion, StoreError> {
        let bytes = self.read("versions", &format!("{id}.json"), "program version", id)?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn put_run(&mut self, mut meta: RunMeta, trace: &ExecutionTrace) -> Result<RunMeta, StoreError> {
        self.session(&meta.session)?;
        self.index.next.run += 1;
        meta.id = format!("r{}", self.index.next.run);
        meta.last_tick = trace.states.last().map_or(0, |s| s.tick);
        write_atomic(&self.file("traces", &format!("{}.json", meta.id)), trace.to_json().as_bytes())?;
        self.index.runs.insert(meta.id.clone(), meta.clone());
        self.session_mut(&meta.session)?.runs.push(meta.id.clone());
        self.save_index()?;
        Ok(meta)
    }

    pub fn run(&self, id: &str) -> Result<&RunMeta, StoreError> {
        self.index.runs.get(id).ok_or_else(|| StoreError::NotFound { kind: "run", id: id.into() })
    }

    /// The persisted trace, byte for byte.
    pub fn trace_text(&self, run: &str) -> Result<String, StoreError> {
        self.run(run)?;
        let bytes = self.read("traces", &format!("{run}.json"), "trace", run)?;
        String::from_utf8(bytes).map_err(|e| StoreError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
    }

    pub fn trace(&self, run: &str) -> Result<ExecutionTrace, StoreError> {
        Ok(serde_json::from_str(&self.trace_text(run)?)?)
    }

    pub fn put_feedback(&mut self, mut fb: StoredFeedback) -> Result<StoredFeedback, StoreError> {
        self.session(&fb.session)?;
        self.index.next.feedback += 1;
        fb.id = format!("f{}", self.index.next.feedback);
        write_atomic(&self.file("feedback", &format!("{}.json", fb.id)), &serde_json::to_vec_pretty(&fb).expect("serializes"))?;
        self.session_mut(&fb.session)?.feedback.push(fb.id.clone());
        self.save_index()?;
        Ok(fb)
    }

    pub fn feedback(&self, id: &str) -> Result<StoredFeedback, StoreError> {
        let bytes = self.read("feedback", &format!("{id}.json"), "feedback", id)?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}
