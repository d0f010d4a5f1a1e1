use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Mutant, OperatorId};

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("mutant {0:?} is not part of this session")]
    UnknownMutant(String),
    #[error("cannot bind {address}: {source}")]
    BindFailure { address: String, source: std::io::Error },
    #[error("session has no mutants")]
    EmptySession,
    #[error("session file {path}: {message}")]
    SessionFile { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Installed,
    NotInstallable,
    FieldIgnored,
    PromptAnomaly,
    DelayedUpdate,
    Other,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Installed,
        Outcome::NotInstallable,
        Outcome::FieldIgnored,
        Outcome::PromptAnomaly,
        Outcome::DelayedUpdate,
        Outcome::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Installed => "installed",
            Outcome::NotInstallable => "not_installable",
            Outcome::FieldIgnored => "field_ignored",
            Outcome::PromptAnomaly => "prompt_anomaly",
            Outcome::DelayedUpdate => "delayed_update",
            Outcome::Other => "other",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Outcome::ALL
            .into_iter()
            .find(|o| o.as_str() == key)
            .ok_or_else(|| format!("unknown outcome {s:?}"))
    }
}

/// Timestamps are Unix milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServeEvent {
    pub timestamp: u64,
    pub mutant_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(default)]
    pub timestamp: u64,
    pub mutant_id: String,
    pub outcome: Outcome,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuzzSession {
    pub session_id: String,
    pub seed: u64,
    pub interval_seconds: u64,
    pub mutants: Vec<Mutant>,
    pub serve_log: Vec<ServeEvent>,
    pub observations: Vec<Observation>,
    #[serde(skip)]
    path: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Event {
    #[serde(rename = "type")]
    kind: String,
    timestamp: u64,
    payload: Value,
}

#[derive(Serialize, Deserialize)]
struct Generation {
    session_id: String,
    seed: u64,
    interval_seconds: u64,
    mutants: Vec<Mutant>,
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl FuzzSession {
    /// An in-memory session. Use [`FuzzSession::create`] to persist one.
    pub fn new(mutants: Vec<Mutant>, seed: u64, interval_seconds: u64) -> Self {
        let mut ids = mutants.iter().map(|m| m.mutant_id.as_str()).collect::<Vec<_>>().join(",");
        ids.push_str(&seed.to_string());
        let digest = hex::encode(Sha256::digest(ids.as_bytes()));
        Self {
            session_id: digest[..12].to_string(),
            seed,
            interval_seconds,
            mutants,
            serve_log: Vec::new(),
            observations: Vec::new(),
            path: None,
        }
    }

    /// Write a new session file holding the generation event.
    pub fn create(path: &Path, mutants: Vec<Mutant>, seed: u64, interval_seconds: u64) -> Result<Self, FuzzError> {
        let mut session = Self::new(mutants, seed, interval_seconds);
        File::create(path)?;
        session.path = Some(path.to_path_buf());
        let payload = Generation {
            session_id: session.session_id.clone(),
            seed,
            interval_seconds,
            mutants: session.mutants.clone(),
        };
        session.append("generation", now_ms(), serde_json::to_value(payload).expect("session serializes"))?;
        Ok(session)
    }

    /// Replay a session file. Later events are appended to the same file.
    pub fn open(path: &Path) -> Result<Self, FuzzError> {
        let bad = |message: String| FuzzError::SessionFile { path: path.display().to_string(), message };
        let reader = BufReader::new(File::open(path).map_err(|e| bad(e.to_string()))?);
        let mut session: Option<FuzzSession> = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = match serde_json::from_str(&line) {
                Ok(e) => e,
                // a crash can leave a partial final line
                Err(e) => {
                    log::warn!("{}:{}: skipping unreadable event: {e}", path.display(), n + 1);
                    continue;
                }
            };
            match (event.kind.as_str(), session.as_mut()) {
                ("generation", None) => {
                    let g: Generation = serde_json::from_value(event.payload).map_err(|e| bad(e.to_string()))?;
                    session = Some(FuzzSession {
                        session_id: g.session_id,
                        seed: g.seed,
                        interval_seconds: g.interval_seconds,
                        mutants: g.mutants,
                        serve_log: Vec::new(),
                        observations: Vec::new(),
                        path: None,
                    });
                }
                ("serve", Some(s)) => {
                    let id = event.payload["mutant_id"].as_str().unwrap_or_default().to_string();
                    s.serve_log.push(ServeEvent { timestamp: event.timestamp, mutant_id: id });
                }
                ("observation", Some(s)) => {
                    let mut o: Observation = serde_json::from_value(event.payload).map_err(|e| bad(e.to_string()))?;
                    o.timestamp = event.timestamp;
                    s.observations.push(o);
                }
                (kind, _) => return Err(bad(format!("line {}: unexpected {kind:?} event", n + 1))),
            }
        }
        let mut session = session.ok_or_else(|| bad("no generation event".into()))?;
        // terminate a torn last line so the next event starts cleanly
        let bytes = std::fs::read(path)?;
        if bytes.last().is_some_and(|&b| b != b'\n') {
            OpenOptions::new().append(true).open(path)?.write_all(b"\n")?;
        }
        session.path = Some(path.to_path_buf());
        Ok(session)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn append(&self, kind: &str, timestamp: u64, payload: Value) -> Result<(), FuzzError> {
        let Some(path) = &self.path else { return Ok(()) };
        let mut line = serde_json::to_string(&Event { kind: kind.into(), timestamp, payload }).expect("event serializes");
        line.push('\n');
        let mut f = OpenOptions::new().append(true).open(path)?;
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn mutant(&self, mutant_id: &str) -> Option<&Mutant> {
        self.mutants.iter().find(|m| m.mutant_id == mutant_id)
    }

    /// Append a serve event. Timestamps never go backwards, even if the
    /// system clock does.
    pub fn record_serve(&mut self, mutant_id: &str) -> Result<(), FuzzError> {
        let last = self.serve_log.last().map_or(0, |e| e.timestamp);
        let timestamp = now_ms().max(last);
        self.serve_log.push(ServeEvent { timestamp, mutant_id: mutant_id.to_string() });
        self.append("serve", timestamp, json!({ "mutant_id": mutant_id }))
    }

    pub fn record_observation(&mut self, mutant_id: &str, outcome: Outcome, note: &str) -> Result<(), FuzzError> {
        if self.mutant(mutant_id).is_none() {
            return Err(FuzzError::UnknownMutant(mutant_id.to_string()));
        }
        let timestamp = now_ms();
        let o = Observation { timestamp, mutant_id: mutant_id.to_string(), outcome, note: note.to_string() };
        self.append(
            "observation",
            timestamp,
            json!({ "mutant_id": o.mutant_id, "outcome": o.outcome, "note": o.note }),
        )?;
        self.observations.push(o);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantSummary {
    pub mutant_id: String,
    pub operator: OperatorId,
    pub field: String,
    pub serve_count: u64,
    pub observations: BTreeMap<Outcome, u64>,
    pub unobserved: bool,
}

/// Per-mutant serve counts and observation counts by outcome, in mutant order.
pub fn session_report(session: &FuzzSession) -> Vec<MutantSummary> {
    session
        .mutants
        .iter()
        .map(|m| {
            let serve_count = session.serve_log.iter().filter(|e| e.mutant_id == m.mutant_id).count() as u64;
            let mut observations = BTreeMap::new();
            for o in session.observations.iter().filter(|o| o.mutant_id == m.mutant_id) {
                *observations.entry(o.outcome).or_insert(0) += 1;
            }
            MutantSummary {
                mutant_id: m.mutant_id.clone(),
                operator: m.operator,
                field: m.field.clone(),
                serve_count,
                unobserved: observations.is_empty(),
                observations,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzz::{generate_mutants, FieldSchema};
    use crate::manifest::parse_manifest;
    use crate::url_semantics::AbsoluteUrl;

    fn mutants(n: usize) -> Vec<Mutant> {
        let u = AbsoluteUrl::parse("http://127.0.0.1/").unwrap();
        let base = parse_manifest(r#"{"name":"x","start_url":"/"}"#, &u, &u).unwrap();
        generate_mutants(&base, &FieldSchema::default(), 0).into_iter().take(n).collect()
    }

    #[test]
    fn observations_and_report() {
        let mut s = FuzzSession::new(mutants(3), 0, 60);
        assert!(session_report(&s).iter().all(|r| r.unobserved));
        let id = s.mutants[1].mutant_id.clone();
        for _ in 0..3 {
            s.record_observation(&id, Outcome::Installed, "Chrome desktop, banner shown").unwrap();
        }
        assert_eq!(s.observations.len(), 3);
        assert!(matches!(s.record_observation("m99", Outcome::Installed, ""), Err(FuzzError::UnknownMutant(_))));

        let mut one = FuzzSession::new(mutants(1), 0, 60);
        let id = one.mutants[0].mutant_id.clone();
        one.record_observation(&id, Outcome::Installed, "").unwrap();
        one.record_observation(&id, Outcome::Installed, "").unwrap();
        one.record_observation(&id, Outcome::Other, "").unwrap();
        let r = session_report(&one);
        assert_eq!(r[0].observations, BTreeMap::from([(Outcome::Installed, 2), (Outcome::Other, 1)]));
        assert!(session_report(&FuzzSession::new(Vec::new(), 0, 60)).is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut s = FuzzSession::create(&path, mutants(3), 9, 5).unwrap();
        let id = s.mutants[2].mutant_id.clone();
        s.record_serve(&id).unwrap();
        s.record_observation(&id, Outcome::FieldIgnored, "name kept").unwrap();
        // a torn final line is tolerated
        std::fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"type\":\"ser").unwrap();
        let back = FuzzSession::open(&path).unwrap();
        assert_eq!(back.session_id, s.session_id);
        assert_eq!(back.mutants, s.mutants);
        assert_eq!(back.serve_log, s.serve_log);
        assert_eq!(back.observations, s.observations);
        assert_eq!(back.interval_seconds, 5);
        let mut back = back;
        back.record_serve(&id).unwrap();
        assert_eq!(FuzzSession::open(&path).unwrap().serve_log.len(), 2);
    }
}
