//! Manifest parsing and normalization.
//!
//! Parsing keeps every top-level key in input order ([`RawManifest`]);
//! normalization resolves URLs, applies the fallbacks browsers apply, and
//! records what it had to change as [`ParseNote`]s.

use std::fmt;

use serde::de::{Deserializer as _, MapAccess, Visitor};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::url_semantics::{has_authority, resolve, same_origin, within_scope, AbsoluteUrl};

/// Members defined by the W3C Web App Manifest. Anything else is reported as
/// an unknown field.
pub const STANDARD_FIELDS: &[&str] = &[
    "name",
    "short_name",
    "description",
    "icons",
    "start_url",
    "scope",
    "display",
    "display_override",
    "id",
    "theme_color",
    "background_color",
    "orientation",
    "lang",
    "dir",
    "categories",
    "screenshots",
    "shortcuts",
    "related_applications",
    "prefer_related_applications",
    "protocol_handlers",
    "share_target",
];

pub fn is_standard_field(name: &str) -> bool {
    STANDARD_FIELDS.contains(&name)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("malformed manifest JSON: {0}")]
    MalformedJson(String),
}

/// Something normalization (or parsing) had to tolerate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParseNote {
    pub field: String,
    pub message: String,
}

impl ParseNote {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ParseNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// The top-level members of a manifest, exactly as read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawManifest {
    pub fields: Map<String, Value>,
    pub source_url: AbsoluteUrl,
    pub document_url: AbsoluteUrl,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<ParseNote>,
}

impl RawManifest {
    pub fn new(fields: Map<String, Value>, source_url: AbsoluteUrl, document_url: AbsoluteUrl) -> Self {
        Self { fields, source_url, document_url, notes: Vec::new() }
    }

    /// Re-serialize the field map as manifest JSON text.
    pub fn to_json_text(&self) -> String {
        serde_json::to_string(&self.fields).expect("JSON map always serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.fields).expect("JSON map always serializes")
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.get(field)
    }
}

struct TopLevel {
    fields: Map<String, Value>,
    duplicates: Vec<String>,
}

struct TopLevelVisitor;

impl<'de> Visitor<'de> for TopLevelVisitor {
    type Value = TopLevel;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON object")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<TopLevel, A::Error> {
        let mut fields = Map::new();
        let mut duplicates = Vec::new();
        while let Some((key, value)) = access.next_entry::<String, Value>()? {
            if fields.insert(key.clone(), value).is_some() {
                duplicates.push(key);
            }
        }
        Ok(TopLevel { fields, duplicates })
    }
}

/// Parse manifest text. The top level must be a JSON object; duplicate keys
/// keep the last value and leave a note.
pub fn parse_manifest(
    text: &str,
    source_url: &AbsoluteUrl,
    document_url: &AbsoluteUrl,
) -> Result<RawManifest, ManifestError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut de = serde_json::Deserializer::from_str(text);
    let top = de
        .deserialize_map(TopLevelVisitor)
        .map_err(|e| ManifestError::MalformedJson(e.to_string()))?;
    de.end().map_err(|e| ManifestError::MalformedJson(e.to_string()))?;

    let mut raw = RawManifest::new(top.fields, source_url.clone(), document_url.clone());
    for key in top.duplicates {
        raw.notes
            .push(ParseNote::new(key, "duplicate key; the last occurrence was kept"));
    }
    Ok(raw)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplayMode {
    Browser,
    MinimalUi,
    Standalone,
    Fullscreen,
    Unknown(String),
}

impl DisplayMode {
    pub const DOCUMENTED: [&'static str; 4] = ["fullscreen", "standalone", "minimal-ui", "browser"];

    pub fn parse(text: &str) -> Self {
        match text.trim().to_ascii_lowercase().as_str() {
            "browser" => DisplayMode::Browser,
            "minimal-ui" => DisplayMode::MinimalUi,
            "standalone" => DisplayMode::Standalone,
            "fullscreen" => DisplayMode::Fullscreen,
            _ => DisplayMode::Unknown(text.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            DisplayMode::Browser => "browser",
            DisplayMode::MinimalUi => "minimal-ui",
            DisplayMode::Standalone => "standalone",
            DisplayMode::Fullscreen => "fullscreen",
            DisplayMode::Unknown(t) => t,
        }
    }

    /// Modes that give the app its own window.
    pub fn is_app_like(&self) -> bool {
        matches!(self, DisplayMode::Standalone | DisplayMode::Fullscreen | DisplayMode::MinimalUi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IconEntry {
    /// Position in the original `icons` array.
    pub index: usize,
    pub src: AbsoluteUrl,
    pub src_raw: String,
    pub sizes: Option<String>,
    #[serde(rename = "type")]
    pub mime_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatedApplication {
    pub platform: String,
    pub url: Option<AbsoluteUrl>,
    pub id: Option<String>,
}

/// A normalized manifest.
///
/// `start_url` is always same-origin with `document_url` and always inside
/// `scope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub document_url: AbsoluteUrl,
    pub manifest_url: AbsoluteUrl,
    pub name: Option<String>,
    pub short_name: Option<String>,
    pub id: Option<String>,
    pub start_url: AbsoluteUrl,
    pub start_url_raw: Option<String>,
    pub start_url_fell_back: bool,
    pub scope: AbsoluteUrl,
    pub scope_raw: Option<String>,
    pub scope_fell_back: bool,
    pub display: DisplayMode,
    pub display_raw: Option<String>,
    pub theme_color: Option<String>,
    pub icons: Vec<IconEntry>,
    pub related_applications: Vec<RelatedApplication>,
    pub prefer_related_applications: Option<bool>,
    pub unknown_fields: Vec<String>,
    pub notes: Vec<ParseNote>,
}

impl Manifest {
    /// Rebuild a raw field map from this manifest. Raw texts are written back
    /// where they were kept, so `normalize(m.to_raw())` reproduces `m` up to
    /// parse notes. Unknown fields come back with `null` values.
    pub fn to_raw(&self) -> RawManifest {
        let mut f = Map::new();
        let text = |v: &Option<String>| v.clone().map(Value::String);
        if let Some(v) = text(&self.name) {
            f.insert("name".into(), v);
        }
        if let Some(v) = text(&self.short_name) {
            f.insert("short_name".into(), v);
        }
        if let Some(v) = text(&self.id) {
            f.insert("id".into(), v);
        }
        if let Some(v) = text(&self.start_url_raw) {
            f.insert("start_url".into(), v);
        }
        if let Some(v) = text(&self.scope_raw) {
            f.insert("scope".into(), v);
        }
        if let Some(v) = text(&self.display_raw) {
            f.insert("display".into(), v);
        }
        if let Some(v) = text(&self.theme_color) {
            f.insert("theme_color".into(), v);
        }
        if !self.icons.is_empty() {
            let slots = self.icons.iter().map(|i| i.index + 1).max().unwrap_or(0);
            let mut arr = vec![Value::Null; slots];
            for icon in &self.icons {
                let mut o = Map::new();
                o.insert("src".into(), Value::String(icon.src_raw.clone()));
                if let Some(s) = &icon.sizes {
                    o.insert("sizes".into(), Value::String(s.clone()));
                }
                if let Some(t) = &icon.mime_type {
                    o.insert("type".into(), Value::String(t.clone()));
                }
                arr[icon.index] = Value::Object(o);
            }
            f.insert("icons".into(), Value::Array(arr));
        }
        if !self.related_applications.is_empty() {
            let arr = self
                .related_applications
                .iter()
                .map(|r| {
                    let mut o = Map::new();
                    o.insert("platform".into(), Value::String(r.platform.clone()));
                    if let Some(u) = &r.url {
                        o.insert("url".into(), Value::String(u.to_string()));
                    }
                    if let Some(i) = &r.id {
                        o.insert("id".into(), Value::String(i.clone()));
                    }
                    Value::Object(o)
                })
                .collect();
            f.insert("related_applications".into(), Value::Array(arr));
        }
        if let Some(b) = self.prefer_related_applications {
            f.insert("prefer_related_applications".into(), Value::Bool(b));
        }
        for name in &self.unknown_fields {
            f.insert(name.clone(), Value::Null);
        }
        RawManifest::new(f, self.manifest_url.clone(), self.document_url.clone())
    }

    /// The same manifest with parse notes cleared; what idempotence compares.
    pub fn without_notes(&self) -> Manifest {
        Manifest { notes: Vec::new(), ..self.clone() }
    }
}

fn coerce_text(field: &str, value: Option<&Value>, notes: &mut Vec<ParseNote>) -> Option<String> {
    match value? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => {
            notes.push(ParseNote::new(field, "numeric value coerced to text"));
            Some(n.to_string())
        }
        Value::Bool(b) => {
            notes.push(ParseNote::new(field, "boolean value coerced to text"));
            Some(b.to_string())
        }
        Value::Null => {
            notes.push(ParseNote::new(field, "null value ignored"));
            None
        }
        Value::Array(_) | Value::Object(_) => {
            notes.push(ParseNote::new(field, "non-text value ignored"));
            None
        }
    }
}

fn note_idn(field: &str, reference: &str, notes: &mut Vec<ParseNote>) {
    if has_authority(reference) && !reference.is_ascii() {
        notes.push(ParseNote::new(
            field,
            "internationalized host compared in its ASCII (punycode) form",
        ));
    }
}

/// Normalize a parsed manifest. Total: every raw manifest normalizes.
pub fn normalize(raw: &RawManifest) -> Manifest {
    let mut notes = raw.notes.clone();
    let doc = &raw.document_url;
    let fields = &raw.fields;

    let name = coerce_text("name", fields.get("name"), &mut notes);
    let short_name = coerce_text("short_name", fields.get("short_name"), &mut notes);
    let id = coerce_text("id", fields.get("id"), &mut notes);
    let theme_color = coerce_text("theme_color", fields.get("theme_color"), &mut notes);

    let start_url_raw = coerce_text("start_url", fields.get("start_url"), &mut notes);
    let (start_url, start_url_fell_back) = match start_url_raw.as_deref() {
        None => (doc.clone(), true),
        Some(r) if r.trim().is_empty() => {
            notes.push(ParseNote::new("start_url", "empty start_url; using the document URL"));
            (doc.clone(), true)
        }
        Some(r) => {
            note_idn("start_url", r, &mut notes);
            match resolve(doc, r) {
                Ok(u) if same_origin(&u, doc) => (u, false),
                Ok(u) => {
                    notes.push(ParseNote::new(
                        "start_url",
                        format!("start_url {u} is not same-origin with the document; using the document URL"),
                    ));
                    (doc.clone(), true)
                }
                Err(e) => {
                    notes.push(ParseNote::new("start_url", format!("{e}; using the document URL")));
                    (doc.clone(), true)
                }
            }
        }
    };

    let default_scope = start_url.directory();
    let scope_raw = coerce_text("scope", fields.get("scope"), &mut notes);
    let (scope, scope_fell_back) = match scope_raw.as_deref() {
        None => (default_scope, false),
        Some(r) if r.trim().is_empty() => {
            notes.push(ParseNote::new("scope", "empty scope; using the start_url directory"));
            (default_scope, true)
        }
        Some(r) => {
            note_idn("scope", r, &mut notes);
            match resolve(doc, r) {
                Ok(s) if !same_origin(&s, doc) => {
                    notes.push(ParseNote::new(
                        "scope",
                        format!("scope {s} is not same-origin with the document; using the start_url directory"),
                    ));
                    (default_scope, true)
                }
                Ok(s) if !within_scope(&start_url, &s) => {
                    notes.push(ParseNote::new(
                        "scope",
                        format!("start_url is outside scope {s}; using the start_url directory"),
                    ));
                    (default_scope, true)
                }
                Ok(s) => (s, false),
                Err(e) => {
                    notes.push(ParseNote::new("scope", format!("{e}; using the start_url directory")));
                    (default_scope, true)
                }
            }
        }
    };

    let display_raw = coerce_text("display", fields.get("display"), &mut notes);
    let display = display_raw.as_deref().map(DisplayMode::parse).unwrap_or(DisplayMode::Browser);

    let icons = normalize_icons(raw, &mut notes);
    let related_applications = normalize_related(raw, &mut notes);

    let prefer_related_applications = match fields.get("prefer_related_applications") {
        None => None,
        Some(Value::Bool(b)) => Some(*b),
        Some(Value::String(s)) if s.trim().eq_ignore_ascii_case("true") => {
            notes.push(ParseNote::new("prefer_related_applications", "text value coerced to boolean"));
            Some(true)
        }
        Some(Value::String(s)) if s.trim().eq_ignore_ascii_case("false") => {
            notes.push(ParseNote::new("prefer_related_applications", "text value coerced to boolean"));
            Some(false)
        }
        Some(_) => {
            notes.push(ParseNote::new("prefer_related_applications", "non-boolean value ignored"));
            None
        }
    };

    let unknown_fields = fields
        .keys()
        .filter(|k| !is_standard_field(k))
        .cloned()
        .collect();

    Manifest {
        document_url: doc.clone(),
        manifest_url: raw.source_url.clone(),
        name,
        short_name,
        id,
        start_url,
        start_url_raw,
        start_url_fell_back,
        scope,
        scope_raw,
        scope_fell_back,
        display,
        display_raw,
        theme_color,
        icons,
        related_applications,
        prefer_related_applications,
        unknown_fields,
        notes,
    }
}

fn normalize_icons(raw: &RawManifest, notes: &mut Vec<ParseNote>) -> Vec<IconEntry> {
    let arr = match raw.fields.get("icons") {
        None => return Vec::new(),
        Some(Value::Array(a)) => a,
        Some(_) => {
            notes.push(ParseNote::new("icons", "icons is not an array; ignored"));
            return Vec::new();
        }
    };
    let mut out = Vec::new();
    for (index, item) in arr.iter().enumerate() {
        let path = format!("icons[{index}]");
        let Some(obj) = item.as_object() else {
            notes.push(ParseNote::new(path, "icon entry is not an object; dropped"));
            continue;
        };
        let Some(src_raw) = obj.get("src").and_then(Value::as_str) else {
            notes.push(ParseNote::new(path, "icon entry has no text src; dropped"));
            continue;
        };
        note_idn(&format!("{path}.src"), src_raw, notes);
        match resolve(&raw.source_url, src_raw) {
            Ok(src) => out.push(IconEntry {
                index,
                src,
                src_raw: src_raw.to_string(),
                sizes: obj.get("sizes").and_then(Value::as_str).map(str::to_string),
                mime_type: obj.get("type").and_then(Value::as_str).map(str::to_string),
            }),
            Err(e) => notes.push(ParseNote::new(format!("{path}.src"), format!("{e}; icon dropped"))),
        }
    }
    out
}

fn normalize_related(raw: &RawManifest, notes: &mut Vec<ParseNote>) -> Vec<RelatedApplication> {
    let arr = match raw.fields.get("related_applications") {
        None => return Vec::new(),
        Some(Value::Array(a)) => a,
        Some(_) => {
            notes.push(ParseNote::new("related_applications", "not an array; ignored"));
            return Vec::new();
        }
    };
    let mut out = Vec::new();
    for (i, item) in arr.iter().enumerate() {
        let path = format!("related_applications[{i}]");
        let Some(obj) = item.as_object() else {
            notes.push(ParseNote::new(path, "entry is not an object; dropped"));
            continue;
        };
        let platform = obj.get("platform").and_then(Value::as_str).unwrap_or_default().to_string();
        let url = match obj.get("url").and_then(Value::as_str) {
            Some(u) => match resolve(&raw.source_url, u) {
                Ok(u) => Some(u),
                Err(e) => {
                    notes.push(ParseNote::new(format!("{path}.url"), e.to_string()));
                    None
                }
            },
            None => None,
        };
        let id = obj.get("id").and_then(Value::as_str).map(str::to_string);
        if url.is_none() && id.is_none() {
            notes.push(ParseNote::new(path, "entry has neither url nor id; dropped"));
            continue;
        }
        out.push(RelatedApplication { platform, url, id });
    }
    out
}
