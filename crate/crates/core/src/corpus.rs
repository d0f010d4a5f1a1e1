//! Corpus ingestion and the aggregate indexes used for duplicate detection
//! and field statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::manifest::{normalize, parse_manifest, DisplayMode, Manifest, RawManifest};
use crate::names::normalize_name;
use crate::url_semantics::{is_parent_path_ref, origin_of, resolve, same_origin, AbsoluteUrl};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus source {path}: {source}")]
    SourceUnreadable { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Jsonl,
    Directory,
}

impl CorpusFormat {
    /// Directory for directories, JSONL for anything else.
    pub fn detect(path: &Path) -> Self {
        if path.is_dir() {
            CorpusFormat::Directory
        } else {
            CorpusFormat::Jsonl
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub document_url: AbsoluteUrl,
    pub raw: RawManifest,
    pub manifest: Manifest,
}

impl CorpusEntry {
    pub fn new(raw: RawManifest) -> Self {
        let manifest = normalize(&raw);
        Self { document_url: raw.document_url.clone(), raw, manifest }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqField {
    Name,
    StartUrlRaw,
    ScopeRaw,
    Id,
}

impl FreqField {
    pub const ALL: [FreqField; 4] = [FreqField::Name, FreqField::StartUrlRaw, FreqField::ScopeRaw, FreqField::Id];

    fn manifest_key(self) -> &'static str {
        match self {
            FreqField::Name => "name",
            FreqField::StartUrlRaw => "start_url",
            FreqField::ScopeRaw => "scope",
            FreqField::Id => "id",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlFieldStats {
    pub present: u64,
    pub non_empty: u64,
    pub empty: u64,
    pub with_query_params: u64,
    pub cross_origin_https: u64,
    pub parent_path: u64,
}

impl UrlFieldStats {
    fn add(&mut self, value: Option<&Value>, document: &AbsoluteUrl) {
        let Some(value) = value else { return };
        self.present += 1;
        let text = match value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let t = text.trim();
        if t.is_empty() {
            self.empty += 1;
            return;
        }
        self.non_empty += 1;
        if t.contains('?') {
            self.with_query_params += 1;
        }
        if is_parent_path_ref(t) {
            self.parent_path += 1;
        }
        if let Ok(abs) = AbsoluteUrl::parse(t) {
            if abs.scheme() == "https" && !same_origin(&abs, document) {
                self.cross_origin_https += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldStats {
    pub start_url: UrlFieldStats,
    pub scope: UrlFieldStats,
    /// Documented display values, by canonical spelling.
    pub display_counts: BTreeMap<String, u64>,
    /// Undocumented display values, by raw text.
    pub display_errors: BTreeMap<String, u64>,
}

/// Read-only indexes over an ingested corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub entry_count: u64,
    pub malformed_lines: u64,
    /// Entries replaced by a later entry with the same document URL.
    pub dedup_replacements: u64,
    pub name_counts: BTreeMap<String, u64>,
    pub name_documents: BTreeMap<String, BTreeSet<String>>,
    pub empty_names: u64,
    pub icon_origins: BTreeMap<String, BTreeSet<String>>,
    /// origin -> resolved id -> count
    pub id_counts_per_origin: BTreeMap<String, BTreeMap<String, u64>>,
    /// origin -> resolved id -> document URLs
    pub id_documents: BTreeMap<String, BTreeMap<String, BTreeSet<String>>>,
    pub raw_values: BTreeMap<FreqField, BTreeMap<String, u64>>,
    pub field_stats: FieldStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateSummary {
    pub unique_duplicate_names: u64,
    pub affected_entries: u64,
    pub empty_names: u64,
}

/// The id a manifest is known by on its origin, when it declares one that
/// resolves same-origin.
pub fn resolved_id(manifest: &Manifest) -> Option<AbsoluteUrl> {
    let raw = manifest.id.as_deref()?;
    if raw.trim().is_empty() {
        return None;
    }
    let mut id = resolve(&manifest.start_url, raw).ok()?;
    if !same_origin(&id, &manifest.start_url) {
        return None;
    }
    let mut url = id.as_url().clone();
    url.set_fragment(None);
    id = AbsoluteUrl::parse(url.as_str()).ok()?;
    Some(id)
}

impl CorpusIndex {
    /// Build from entries in input order; a later entry with the same
    /// document URL replaces the earlier one.
    pub fn build(entries: impl IntoIterator<Item = CorpusEntry>) -> Self {
        let mut by_document: BTreeMap<String, CorpusEntry> = BTreeMap::new();
        let mut index = CorpusIndex::default();
        for entry in entries {
            if by_document.insert(entry.document_url.to_string(), entry).is_some() {
                index.dedup_replacements += 1;
            }
        }
        for entry in by_document.values() {
            index.add(entry);
        }
        index
    }

    fn add(&mut self, entry: &CorpusEntry) {
        let m = &entry.manifest;
        let doc = entry.document_url.to_string();
        let doc_origin = origin_of(&entry.document_url).to_string();
        self.entry_count += 1;

        match m.name.as_deref().map(normalize_name) {
            Some(n) if !n.is_empty() => {
                *self.name_counts.entry(n.clone()).or_default() += 1;
                self.name_documents.entry(n).or_default().insert(doc.clone());
            }
            _ => self.empty_names += 1,
        }

        for icon in &m.icons {
            self.icon_origins
                .entry(icon.src.to_string())
                .or_default()
                .insert(doc_origin.clone());
        }

        if let Some(id) = resolved_id(m) {
            let origin = origin_of(&id).to_string();
            *self
                .id_counts_per_origin
                .entry(origin.clone())
                .or_default()
                .entry(id.to_string())
                .or_default() += 1;
            self.id_documents
                .entry(origin)
                .or_default()
                .entry(id.to_string())
                .or_default()
                .insert(doc.clone());
        }

        for field in FreqField::ALL {
            if let Some(v) = entry.raw.get(field.manifest_key()) {
                let token = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                *self.raw_values.entry(field).or_default().entry(token).or_default() += 1;
            }
        }

        let stats = &mut self.field_stats;
        stats.start_url.add(entry.raw.get("start_url"), &entry.document_url);
        stats.scope.add(entry.raw.get("scope"), &entry.document_url);
        if m.display_raw.is_some() {
            match &m.display {
                DisplayMode::Unknown(t) => *stats.display_errors.entry(t.clone()).or_default() += 1,
                d => *stats.display_counts.entry(d.as_str().to_string()).or_default() += 1,
            }
        }
    }

    /// Documents other than `document` whose normalized name is `name`.
    pub fn other_documents_named(&self, name: &str, document: &AbsoluteUrl) -> usize {
        let key = normalize_name(name);
        let doc = document.to_string();
        self.name_documents
            .get(&key)
            .map(|d| d.iter().filter(|x| **x != doc).count())
            .unwrap_or(0)
    }

    /// Origins other than `origin` referencing the icon URL `src`.
    pub fn other_origins_using_icon(&self, src: &AbsoluteUrl, document: &AbsoluteUrl) -> usize {
        let own = origin_of(document).to_string();
        self.icon_origins
            .get(src.as_str())
            .map(|o| o.iter().filter(|x| **x != own).count())
            .unwrap_or(0)
    }

    /// Other documents on the same origin declaring the same resolved id.
    pub fn other_documents_with_id(&self, id: &AbsoluteUrl, document: &AbsoluteUrl) -> usize {
        let doc = document.to_string();
        self.id_documents
            .get(&origin_of(id).to_string())
            .and_then(|ids| ids.get(id.as_str()))
            .map(|d| d.iter().filter(|x| **x != doc).count())
            .unwrap_or(0)
    }
}

pub fn ingest(path: &Path, format: CorpusFormat) -> Result<CorpusIndex, CorpusError> {
    let (entries, malformed) = read_entries(path, format)?;
    let mut index = CorpusIndex::build(entries);
    index.malformed_lines = malformed;
    Ok(index)
}

/// Parse every entry of a corpus source, in source order, plus the count of
/// entries that could not be used.
pub fn read_entries(path: &Path, format: CorpusFormat) -> Result<(Vec<CorpusEntry>, u64), CorpusError> {
    let unreadable = |source| CorpusError::SourceUnreadable { path: path.to_path_buf(), source };
    match format {
        CorpusFormat::Jsonl => {
            let file = fs::File::open(path).map_err(unreadable)?;
            let mut entries = Vec::new();
            let mut malformed = 0;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(unreadable)?;
                if line.trim().is_empty() {
                    continue;
                }
                match parse_jsonl_line(&line) {
                    Some(e) => entries.push(e),
                    None => malformed += 1,
                }
            }
            Ok((entries, malformed))
        }
        CorpusFormat::Directory => {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(unreadable)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file()
                        && matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "webmanifest"))
                })
                .collect();
            files.sort();
            let mut entries = Vec::new();
            let mut malformed = 0;
            for file in files {
                match parse_directory_file(&file) {
                    Some(e) => entries.push(e),
                    None => malformed += 1,
                }
            }
            Ok((entries, malformed))
        }
    }
}

#[derive(Deserialize)]
struct JsonlLine {
    url: String,
    manifest: Value,
    #[serde(default)]
    manifest_url: Option<String>,
}

/// One `{"url": ..., "manifest": {...}}` corpus line. `manifest` may also be
/// a string holding the manifest text.
pub fn parse_jsonl_line(line: &str) -> Option<CorpusEntry> {
    let parsed: JsonlLine = serde_json::from_str(line).ok()?;
    let document = AbsoluteUrl::parse(&parsed.url).ok()?;
    let source = match parsed.manifest_url.as_deref() {
        Some(m) => resolve(&document, m).ok()?,
        None => document.clone(),
    };
    let text = match parsed.manifest {
        Value::String(s) => s,
        v @ Value::Object(_) => v.to_string(),
        _ => return None,
    };
    let raw = parse_manifest(&text, &source, &document).ok()?;
    Some(CorpusEntry::new(raw))
}

/// Encode a document URL as a file stem for directory corpora.
pub fn encode_document_stem(url: &AbsoluteUrl) -> String {
    base64::engine::general_purpose::URL_SAFE_NO_PAD.encode(url.as_str())
}

/// Decode a directory-corpus file stem: base64url first, then percent-encoding.
pub fn decode_document_stem(stem: &str) -> Option<AbsoluteUrl> {
    let b64 = base64::engine::general_purpose::URL_SAFE_NO_PAD
        .decode(stem.trim_end_matches('='))
        .ok()
        .and_then(|b| String::from_utf8(b).ok())
        .and_then(|s| AbsoluteUrl::parse(&s).ok());
    b64.or_else(|| {
        let decoded = percent_encoding::percent_decode_str(stem).decode_utf8().ok()?;
        AbsoluteUrl::parse(&decoded).ok()
    })
}

fn parse_directory_file(file: &Path) -> Option<CorpusEntry> {
    let stem = file.file_stem()?.to_str()?;
    let document = decode_document_stem(stem)?;
    let text = fs::read_to_string(file).ok()?;
    let raw = parse_manifest(&text, &document, &document).ok()?;
    Some(CorpusEntry::new(raw))
}

/// Names shared by at least two entries, most common first, ties by name.
pub fn duplicate_names(index: &CorpusIndex) -> Vec<(String, u64)> {
    let mut dups: Vec<(String, u64)> = index
        .name_counts
        .iter()
        .filter(|(_, c)| **c >= 2)
        .map(|(n, c)| (n.clone(), *c))
        .collect();
    dups.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    dups
}

pub fn duplicate_summary(index: &CorpusIndex) -> DuplicateSummary {
    let dups = duplicate_names(index);
    DuplicateSummary {
        unique_duplicate_names: dups.len() as u64,
        affected_entries: dups.iter().map(|(_, c)| c).sum(),
        empty_names: index.empty_names,
    }
}

/// Raw value counts for one field, most common first, ties by value.
pub fn frequency_table(index: &CorpusIndex, field: FreqField) -> Vec<(String, u64)> {
    let mut rows: Vec<(String, u64)> = index
        .raw_values
        .get(&field)
        .map(|m| m.iter().map(|(k, v)| (k.clone(), *v)).collect())
        .unwrap_or_default();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

/// Icon URLs referenced from two or more origins, ordered by URL.
pub fn icon_collisions(index: &CorpusIndex) -> Vec<(String, Vec<String>)> {
    index
        .icon_origins
        .iter()
        .filter(|(_, o)| o.len() >= 2)
        .map(|(src, o)| (src.clone(), o.iter().cloned().collect()))
        .collect()
}

pub fn frequency_csv(rows: &[(String, u64)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["token", "count"]).expect("in-memory write");
    for (token, count) in rows {
        w.write_record([token.as_str(), &count.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(doc: &str, manifest: &str) -> CorpusEntry {
        parse_jsonl_line(&format!(r#"{{"url":"{doc}","manifest":{manifest}}}"#)).unwrap()
    }

    #[test]
    fn starbucks_fixture() {
        let index = CorpusIndex::build([
            entry("https://a.test/", r#"{"name":"Starbucks"}"#),
            entry("https://b.test/", r#"{"name":" starbucks "}"#),
            entry("https://c.test/", r#"{"name":"Coffee"}"#),
            entry("https://d.test/", r#"{"name":"Tea"}"#),
            entry("https://e.test/", r#"{"name":"Juice"}"#),
        ]);
        assert_eq!(index.name_counts["starbucks"], 2);
        assert_eq!(duplicate_names(&index), vec![("starbucks".to_string(), 2)]);
        assert_eq!(
            duplicate_summary(&index),
            DuplicateSummary { unique_duplicate_names: 1, affected_entries: 2, empty_names: 0 }
        );
    }

    #[test]
    fn start_url_field_stats() {
        let index = CorpusIndex::build([
            entry("https://a.test/", r#"{"start_url":"?id=1"}"#),
            entry("https://b.test/", r#"{"start_url":"../x"}"#),
            entry("https://c.test/", r#"{"start_url":""}"#),
        ]);
        let s = &index.field_stats.start_url;
        assert_eq!((s.present, s.with_query_params, s.parent_path, s.empty), (3, 1, 1, 1));
        assert_eq!(s.non_empty + s.empty, s.present);
    }

    #[test]
    fn empty_index() {
        let index = CorpusIndex::build(Vec::new());
        assert_eq!(index.entry_count, 0);
        assert!(index.name_counts.is_empty() && index.icon_origins.is_empty());
        assert!(duplicate_names(&index).is_empty());
        assert!(frequency_table(&index, FreqField::Name).is_empty());
        assert_eq!(
            duplicate_summary(&index),
            DuplicateSummary { unique_duplicate_names: 0, affected_entries: 0, empty_names: 0 }
        );
    }

    #[test]
    fn frequency_and_collisions() {
        let index = CorpusIndex::build([
            entry("https://a.test/", r#"{"start_url":"../","id":"/","icons":[{"src":"https://cdn.x/logo.png"}]}"#),
            entry("https://b.test/", r#"{"start_url":"../","id":"/","icons":[{"src":"https://cdn.x/logo.png"}]}"#),
            entry("https://c.test/", r#"{"start_url":"../","id":"/","icons":[{"src":"/local.png"}]}"#),
        ]);
        assert_eq!(frequency_table(&index, FreqField::StartUrlRaw)[0], ("../".to_string(), 3));
        assert_eq!(frequency_table(&index, FreqField::Id), vec![("/".to_string(), 3)]);
        let c = icon_collisions(&index);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].0, "https://cdn.x/logo.png");
        assert_eq!(c[0].1.len(), 2);
    }

    #[test]
    fn single_entry_has_no_collisions() {
        let index = CorpusIndex::build([entry("https://a.test/", r#"{"icons":[{"src":"https://cdn.x/l.png"}]}"#)]);
        assert!(icon_collisions(&index).is_empty());
    }

    #[test]
    fn last_duplicate_document_wins() {
        let index = CorpusIndex::build([
            entry("https://a.test/", r#"{"name":"Old"}"#),
            entry("https://a.test/", r#"{"name":"New"}"#),
        ]);
        assert_eq!(index.entry_count, 1);
        assert_eq!(index.dedup_replacements, 1);
        assert!(index.name_counts.contains_key("new"));
    }

    #[test]
    fn malformed_lines_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        fs::write(
            &p,
            "{\"url\":\"https://a.test/\",\"manifest\":{\"name\":\"A\"}}\nnot json\n{\"url\":\"nope\",\"manifest\":{}}\n\n",
        )
        .unwrap();
        let index = ingest(&p, CorpusFormat::Jsonl).unwrap();
        assert_eq!((index.entry_count, index.malformed_lines), (1, 2));
        assert!(matches!(
            ingest(&dir.path().join("missing.jsonl"), CorpusFormat::Jsonl),
            Err(CorpusError::SourceUnreadable { .. })
        ));
    }

    #[test]
    fn directory_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let a = AbsoluteUrl::parse("https://a.test/app/").unwrap();
        fs::write(dir.path().join(format!("{}.webmanifest", encode_document_stem(&a))), r#"{"name":"A"}"#).unwrap();
        fs::write(dir.path().join("https%3A%2F%2Fb.test%2F.json"), r#"{"name":"A"}"#).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let index = ingest(dir.path(), CorpusFormat::Directory).unwrap();
        assert_eq!(index.entry_count, 2);
        assert_eq!(index.name_counts["a"], 2);
    }

    #[test]
    fn csv_export() {
        let csv = frequency_csv(&[("a,b".into(), 2), ("/".into(), 1)]);
        assert_eq!(csv, "token,count\n\"a,b\",2\n/,1\n");
    }
}
