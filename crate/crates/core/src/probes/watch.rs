use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::{ProbeError, Prober};
use crate::fuzz::now_ms;
use crate::manifest::parse_manifest;
use crate::url_semantics::AbsoluteUrl;

/// Fields whose change makes browsers refresh an installed app.
pub const UPDATE_TRIGGERING_FIELDS: [&str; 6] = ["name", "short_name", "display", "start_url", "theme_color", "scope"];

pub fn is_update_triggering(field: &str) -> bool {
    UPDATE_TRIGGERING_FIELDS.contains(&field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldChange {
    pub field: String,
    pub old: Option<Value>,
    pub new: Option<Value>,
    pub update_triggering: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiff {
    /// Unix milliseconds.
    pub timestamp: u64,
    pub url: AbsoluteUrl,
    pub changed_fields: Vec<FieldChange>,
}

impl UpdateDiff {
    pub fn triggering(&self) -> impl Iterator<Item = &FieldChange> {
        self.changed_fields.iter().filter(|c| c.update_triggering)
    }

    pub fn non_triggering(&self) -> impl Iterator<Item = &FieldChange> {
        self.changed_fields.iter().filter(|c| !c.update_triggering)
    }
}

/// Fields added, removed or changed between two field maps, in the old
/// map's order followed by new fields.
pub fn diff_fields(old: &Map<String, Value>, new: &Map<String, Value>) -> Vec<FieldChange> {
    let change = |field: &str, o: Option<&Value>, n: Option<&Value>| FieldChange {
        field: field.to_string(),
        old: o.cloned(),
        new: n.cloned(),
        update_triggering: is_update_triggering(field),
    };
    let mut out = Vec::new();
    for (k, o) in old {
        match new.get(k) {
            Some(n) if n == o => {}
            n => out.push(change(k, Some(o), n)),
        }
    }
    for (k, n) in new {
        if !old.contains_key(k) {
            out.push(change(k, None, Some(n)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredVersion {
    pub url: String,
    pub sha256: String,
    pub body: String,
    pub fetched_at: u64,
}

/// One file per watched URL, named by the hash of the URL.
#[derive(Debug, Clone)]
pub struct WatchStore {
    dir: PathBuf,
}

impl WatchStore {
    pub fn open(dir: &Path) -> Result<Self, ProbeError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn path_for(&self, url: &AbsoluteUrl) -> PathBuf {
        self.dir.join(format!("{}.json", hex::encode(Sha256::digest(url.as_str().as_bytes()))))
    }

    pub fn load(&self, url: &AbsoluteUrl) -> Result<Option<StoredVersion>, ProbeError> {
        let path = self.path_for(url);
        match fs::read_to_string(&path) {
            Ok(text) => match serde_json::from_str(&text) {
                Ok(v) => Ok(Some(v)),
                Err(e) => {
                    log::warn!("ignoring unreadable store file {}: {e}", path.display());
                    Ok(None)
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, url: &AbsoluteUrl, body: &str) -> Result<StoredVersion, ProbeError> {
        let version = StoredVersion {
            url: url.to_string(),
            sha256: hex::encode(Sha256::digest(body.as_bytes())),
            body: body.to_string(),
            fetched_at: now_ms(),
        };
        let path = self.path_for(url);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&version).expect("stored version serializes"))?;
        fs::rename(&tmp, &path)?;
        Ok(version)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PollOutcome {
    /// Nothing was stored yet; this body is now the baseline.
    Baseline,
    Unchanged,
    Changed(UpdateDiff),
}

fn fields(body: &str, url: &AbsoluteUrl) -> Result<Map<String, Value>, ProbeError> {
    parse_manifest(body, url, url)
        .map(|r| r.fields)
        .map_err(|e| ProbeError::MalformedJson { url: url.to_string(), message: e.to_string() })
}

/// Fetch once and compare with the stored version, then store the new body.
pub fn poll(prober: &Prober, store: &WatchStore, url: &AbsoluteUrl) -> Result<PollOutcome, ProbeError> {
    let fetched = prober.get_ok(url)?;
    let new_fields = fields(&fetched.body, url)?;
    let Some(stored) = store.load(url)? else {
        store.save(url, &fetched.body)?;
        return Ok(PollOutcome::Baseline);
    };
    if stored.sha256 == hex::encode(Sha256::digest(fetched.body.as_bytes())) {
        return Ok(PollOutcome::Unchanged);
    }
    let old_fields = fields(&stored.body, url).unwrap_or_default();
    let changed_fields = diff_fields(&old_fields, &new_fields);
    store.save(url, &fetched.body)?;
    if changed_fields.is_empty() {
        return Ok(PollOutcome::Unchanged);
    }
    Ok(PollOutcome::Changed(UpdateDiff { timestamp: now_ms(), url: url.clone(), changed_fields }))
}

/// Poll `url` every `interval`, calling `on_diff` for each change. The first
/// poll must succeed; later failures are logged and skipped. Runs `polls`
/// times, or forever when `None`.
pub fn watch_manifest(
    prober: &Prober,
    url: &AbsoluteUrl,
    interval: Duration,
    store: &WatchStore,
    polls: Option<u64>,
    mut on_diff: impl FnMut(&UpdateDiff),
) -> Result<(), ProbeError> {
    let mut done = 0u64;
    loop {
        match poll(prober, store, url) {
            Ok(PollOutcome::Changed(diff)) => on_diff(&diff),
            Ok(_) => {}
            Err(e) if done == 0 => return Err(e),
            Err(e) => log::warn!("poll of {url} missed: {e}"),
        }
        done += 1;
        if polls.is_some_and(|n| done >= n) {
            return Ok(());
        }
        std::thread::sleep(interval);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn map(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn partitions() {
        let old = map(json!({"name":"A","theme_color":"#fff","background_color":"#000","lang":"en"}));
        let new = map(json!({"name":"A","theme_color":"#f00","background_color":"#111","scope":"/"}));
        let d = diff_fields(&old, &new);
        let names: Vec<_> = d.iter().map(|c| (c.field.as_str(), c.update_triggering)).collect();
        assert_eq!(
            names,
            vec![("theme_color", true), ("background_color", false), ("lang", false), ("scope", true)]
        );
        assert!(diff_fields(&old, &old).is_empty());
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = WatchStore::open(dir.path()).unwrap();
        let u = AbsoluteUrl::parse("https://a.test/m.json").unwrap();
        assert!(store.load(&u).unwrap().is_none());
        let saved = store.save(&u, "{\"name\":\"x\"}").unwrap();
        assert_eq!(store.load(&u).unwrap(), Some(saved));
    }
}
