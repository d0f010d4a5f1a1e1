//! Schema-guided mutation of manifest fields, a rotating serving harness, and
//! the observation log for the manual installation step.
//!
//! Each mutant changes one field (or, with pairs, two fields) of a base
//! manifest. Generation is a pure function of the base, the schema and the
//! seed.

mod server;
mod session;

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::manifest::{DisplayMode, RawManifest};

pub use server::{serve_session, spawn_server, ServerHandle, Status};
pub(crate) use session::now_ms;
pub use session::{session_report, FuzzError, FuzzSession, MutantSummary, Observation, Outcome, ServeEvent};

/// Lengths used by the oversize-text operator.
pub const OVERSIZE_LENGTHS: [usize; 3] = [1000, 1001, 5000];

pub const CROSS_ORIGIN_URL: &str = "https://attack.example/";
pub const REDIRECT_TARGET: &str = "attack.example";
const RELATIVE_PATHS: [&str; 2] = ["./", "fuzz/index.html"];
const PARENT_PATHS: [&str; 2] = ["../", "../../"];
const UNDOCUMENTED_DISPLAY: [&str; 5] = ["kiosk", "picture-in-picture", "FULLSCREEN", "window-controls-overlay", "tabbed"];
const UNDOCUMENTED_BOOLEAN: [&str; 3] = ["true", "yes", "1"];
const UNDOCUMENTED_PLATFORM: [&str; 3] = ["attack-store", "sideload", "apk"];
const UNKNOWN_FIELD_STEMS: [&str; 4] = ["tracking_id", "gcm_sender_id_x", "user_token", "x_campaign"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Text,
    Url,
    UrlList,
    Boolean,
    ObjectList,
}

/// How one manifest field may be mutated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub field: String,
    pub value_kind: ValueKind,
    /// Documented values. For object lists these are values of
    /// `documented_member`.
    pub documented_values: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documented_member: Option<String>,
    /// For object lists, the member holding a URL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url_member: Option<String>,
    pub constraints: Vec<String>,
}

impl FieldSpec {
    fn new(field: &str, value_kind: ValueKind) -> Self {
        Self {
            field: field.into(),
            value_kind,
            documented_values: Vec::new(),
            documented_member: None,
            url_member: None,
            constraints: Vec::new(),
        }
    }

    fn documented(mut self, values: impl IntoIterator<Item = Value>) -> Self {
        self.documented_values = values.into_iter().collect();
        self
    }

    fn constraint(mut self, text: &str) -> Self {
        self.constraints.push(text.into());
        self
    }

    fn members(mut self, documented: Option<&str>, url: Option<&str>) -> Self {
        self.documented_member = documented.map(Into::into);
        self.url_member = url.map(Into::into);
        self
    }

    pub fn is_enumerated(&self) -> bool {
        !self.documented_values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub fields: Vec<FieldSpec>,
}

impl Default for FieldSchema {
    /// One entry for every field of [`crate::manifest::Manifest`].
    fn default() -> Self {
        use ValueKind::*;
        let fields = vec![
            FieldSpec::new("name", Text).constraint("desktop Chrome and Edge refuse to install above 1000 characters"),
            FieldSpec::new("short_name", Text),
            FieldSpec::new("id", Url).constraint("resolved against start_url; must stay same-origin"),
            FieldSpec::new("start_url", Url).constraint("must be same-origin with the document"),
            FieldSpec::new("scope", Url).constraint("must contain start_url"),
            FieldSpec::new("display", Text).documented(DisplayMode::DOCUMENTED.iter().map(|v| json!(v))),
            FieldSpec::new("theme_color", Text),
            FieldSpec::new("icons", ObjectList).members(None, Some("src")),
            FieldSpec::new("related_applications", ObjectList)
                .members(Some("platform"), Some("url"))
                .documented(["play", "itunes", "windows", "f-droid", "amazon", "webapp"].map(|v| json!(v))),
            FieldSpec::new("prefer_related_applications", Boolean).documented([json!(true), json!(false)]),
        ];
        Self { fields }
    }
}

impl FieldSchema {
    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.field == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorId {
    DocumentedValue,
    UndocumentedValue,
    UnknownField,
    FieldRemoval,
    EmptyValue,
    OversizeText,
    ScriptPayload,
    RelativePath,
    ParentPath,
    CrossOrigin,
    RedirectParam,
    /// The single designated mutant whose text is not valid JSON.
    MalformedJson,
}

impl OperatorId {
    pub const ALL: [OperatorId; 12] = [
        OperatorId::DocumentedValue,
        OperatorId::UndocumentedValue,
        OperatorId::UnknownField,
        OperatorId::FieldRemoval,
        OperatorId::EmptyValue,
        OperatorId::OversizeText,
        OperatorId::ScriptPayload,
        OperatorId::RelativePath,
        OperatorId::ParentPath,
        OperatorId::CrossOrigin,
        OperatorId::RedirectParam,
        OperatorId::MalformedJson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperatorId::DocumentedValue => "documented_value",
            OperatorId::UndocumentedValue => "undocumented_value",
            OperatorId::UnknownField => "unknown_field",
            OperatorId::FieldRemoval => "field_removal",
            OperatorId::EmptyValue => "empty_value",
            OperatorId::OversizeText => "oversize_text",
            OperatorId::ScriptPayload => "script_payload",
            OperatorId::RelativePath => "relative_path",
            OperatorId::ParentPath => "parent_path",
            OperatorId::CrossOrigin => "cross_origin",
            OperatorId::RedirectParam => "redirect_param",
            OperatorId::MalformedJson => "malformed_json",
        }
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OperatorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OperatorId::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown operator {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payload {
    pub id: String,
    pub text: String,
    pub url: bool,
}

#[derive(Deserialize)]
struct PayloadFile {
    payloads: Vec<Payload>,
}

static PAYLOADS: LazyLock<Vec<Payload>> = LazyLock::new(|| {
    let file: PayloadFile =
        serde_json::from_str(include_str!("../../data/xss_payloads.json")).expect("bundled payload list parses");
    file.payloads
});

/// The bundled script-shaped payloads.
pub fn script_payloads() -> &'static [Payload] {
    &PAYLOADS
}

/// One mutated manifest.
///
/// In `mutated_fields`, `null` means the field was removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutant {
    pub mutant_id: String,
    pub operator: OperatorId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_with: Option<OperatorId>,
    /// Field the operator targeted; empty for whole-document operators.
    pub field: String,
    /// The operator's parameter (documented value, length, payload id, ...).
    pub parameter: Value,
    pub base: RawManifest,
    pub mutated_fields: Map<String, Value>,
    pub rendered: String,
    pub malformed: bool,
}

fn mutant_id(base_text: &str, ops: &[(OperatorId, &str, &Value)]) -> String {
    let mut h = Sha256::new();
    h.update(base_text.as_bytes());
    for (op, field, param) in ops {
        h.update([0u8]);
        h.update(op.as_str().as_bytes());
        h.update([0u8]);
        h.update(field.as_bytes());
        h.update([0u8]);
        h.update(param.to_string().as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

fn render(base: &RawManifest, changes: &Map<String, Value>) -> String {
    let mut fields = base.fields.clone();
    for (k, v) in changes {
        if v.is_null() {
            fields.shift_remove(k);
        } else {
            fields.insert(k.clone(), v.clone());
        }
    }
    serde_json::to_string(&fields).expect("JSON map always serializes")
}

/// One planned single-field change before ids and rendering.
struct Plan {
    operator: OperatorId,
    field: String,
    parameter: Value,
    value: Value,
}

fn with_redirect(reference: &str) -> String {
    let stem = reference.split('#').next().unwrap_or_default();
    let sep = if stem.contains('?') { '&' } else { '?' };
    format!("{stem}{sep}redirect={REDIRECT_TARGET}")
}

fn default_member(field: &str) -> Value {
    match field {
        "icons" => json!({"src": "/icon-192.png", "sizes": "192x192", "type": "image/png"}),
        _ => json!({"platform": "webapp", "url": "/related.webmanifest"}),
    }
}

/// Replace `member` of the first element of an object list.
fn with_first_member(base: Option<&Value>, field: &str, member: &str, value: Value) -> Value {
    let mut list = match base {
        Some(Value::Array(items)) if items.first().is_some_and(Value::is_object) => items.clone(),
        _ => vec![default_member(field)],
    };
    list[0][member] = value;
    Value::Array(list)
}

fn plans_for(spec: &FieldSpec, base: &RawManifest, rng: &mut ChaCha8Rng) -> Vec<Plan> {
    use OperatorId::*;
    let field = spec.field.as_str();
    let current = base.get(field);
    let mut out = Vec::new();
    let mut push = |operator, parameter: Value, value: Value| {
        out.push(Plan { operator, field: field.to_string(), parameter, value });
    };

    // (a) and (b)
    if spec.is_enumerated() {
        let undocumented = match spec.value_kind {
            ValueKind::Boolean => UNDOCUMENTED_BOOLEAN[rng.random_range(0..UNDOCUMENTED_BOOLEAN.len())],
            ValueKind::ObjectList => UNDOCUMENTED_PLATFORM[rng.random_range(0..UNDOCUMENTED_PLATFORM.len())],
            _ => UNDOCUMENTED_DISPLAY[rng.random_range(0..UNDOCUMENTED_DISPLAY.len())],
        };
        let wrap = |v: Value| match (&spec.documented_member, spec.value_kind) {
            (Some(member), ValueKind::ObjectList) => {
                let mut entry = default_member(field);
                entry[member.as_str()] = v;
                entry["id"] = json!("com.attack.example");
                json!([entry])
            }
            _ => v,
        };
        for v in &spec.documented_values {
            push(DocumentedValue, v.clone(), wrap(v.clone()));
        }
        let undoc = json!(undocumented);
        push(UndocumentedValue, undoc.clone(), wrap(undoc));
    }
    // (d)
    if current.is_some() {
        push(FieldRemoval, Value::Null, Value::Null);
    }
    // (e)
    match spec.value_kind {
        ValueKind::Text | ValueKind::Url => push(EmptyValue, json!(""), json!("")),
        ValueKind::UrlList | ValueKind::ObjectList => push(EmptyValue, json!([]), json!([])),
        ValueKind::Boolean => {}
    }
    // (f) and (g)
    if spec.value_kind == ValueKind::Text && !spec.is_enumerated() {
        for len in OVERSIZE_LENGTHS {
            push(OversizeText, json!(len), json!("A".repeat(len)));
        }
    }
    if matches!(spec.value_kind, ValueKind::Text | ValueKind::Url) && !spec.is_enumerated() {
        for p in script_payloads() {
            if spec.value_kind == ValueKind::Text || p.url {
                push(ScriptPayload, json!(p.id), json!(p.text));
            }
        }
    }
    // (h) to (k)
    let url_value = |reference: &str| -> Option<Value> {
        match (spec.value_kind, &spec.url_member) {
            (ValueKind::Url, _) => Some(json!(reference)),
            (ValueKind::UrlList, _) => Some(json!([reference])),
            (ValueKind::ObjectList, Some(member)) => Some(with_first_member(current, field, member, json!(reference))),
            _ => None,
        }
    };
    let mut url_plans = Vec::new();
    for r in RELATIVE_PATHS {
        url_plans.push((RelativePath, r.to_string()));
    }
    for r in PARENT_PATHS {
        url_plans.push((ParentPath, r.to_string()));
    }
    url_plans.push((CrossOrigin, CROSS_ORIGIN_URL.to_string()));
    if spec.value_kind == ValueKind::Url {
        let reference = current.and_then(Value::as_str).filter(|s| !s.trim().is_empty()).unwrap_or("/");
        url_plans.push((RedirectParam, with_redirect(reference)));
    }
    for (op, reference) in url_plans {
        if let Some(value) = url_value(&reference) {
            push(op, json!(reference), value);
        }
    }
    out
}

fn build(base: &RawManifest, base_text: &str, plans: &[&Plan]) -> Mutant {
    let mut changes = Map::new();
    for p in plans {
        changes.insert(p.field.clone(), p.value.clone());
    }
    let ops: Vec<_> = plans.iter().map(|p| (p.operator, p.field.as_str(), &p.parameter)).collect();
    Mutant {
        mutant_id: mutant_id(base_text, &ops),
        operator: plans[0].operator,
        paired_with: plans.get(1).map(|p| p.operator),
        field: plans.iter().map(|p| p.field.as_str()).collect::<Vec<_>>().join("+"),
        parameter: if plans.len() == 1 {
            plans[0].parameter.clone()
        } else {
            Value::Array(plans.iter().map(|p| p.parameter.clone()).collect())
        },
        base: base.clone(),
        rendered: render(base, &changes),
        mutated_fields: changes,
        malformed: false,
    }
}

/// The default plan: every operator applied to every applicable field, one
/// change per mutant, then one unknown-field mutant and the malformed-JSON
/// mutant.
pub fn generate_mutants(base: &RawManifest, schema: &FieldSchema, seed: u64) -> Vec<Mutant> {
    generate_plan(base, schema, seed, 0)
}

/// [`generate_mutants`] followed by up to `pairs` mutants that each compose
/// two single-field changes on different fields.
pub fn generate_plan(base: &RawManifest, schema: &FieldSchema, seed: u64, pairs: usize) -> Vec<Mutant> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_text = base.to_json_text();
    let mut plans = Vec::new();
    for spec in &schema.fields {
        plans.extend(plans_for(spec, base, &mut rng));
    }
    // (c): a field name that is not in the standard.
    let stem = UNKNOWN_FIELD_STEMS[rng.random_range(0..UNKNOWN_FIELD_STEMS.len())];
    let unknown = format!("{stem}_{:04x}", rng.random::<u16>());
    let tracking = format!("u-{:08x}", rng.random::<u32>());
    plans.push(Plan { operator: OperatorId::UnknownField, field: unknown.clone(), parameter: json!(unknown), value: json!(tracking) });

    let mut seen = std::collections::BTreeSet::new();
    let mut mutants = Vec::new();
    for p in &plans {
        let m = build(base, &base_text, &[p]);
        if seen.insert(m.mutant_id.clone()) {
            mutants.push(m);
        }
    }

    let mut malformed = build(
        base,
        &base_text,
        &[&Plan { operator: OperatorId::MalformedJson, field: String::new(), parameter: Value::Null, value: Value::Null }],
    );
    malformed.mutated_fields.clear();
    malformed.rendered = base_text[..base_text.len().saturating_sub(1)].to_string();
    malformed.malformed = true;

    if pairs > 0 && plans.len() > 1 {
        let mut attempts = 0;
        let mut added = 0;
        while added < pairs && attempts < pairs * 20 {
            attempts += 1;
            let i = rng.random_range(0..plans.len());
            let j = rng.random_range(0..plans.len());
            if plans[i].field == plans[j].field {
                continue;
            }
            let (a, b) = if i < j { (&plans[i], &plans[j]) } else { (&plans[j], &plans[i]) };
            let m = build(base, &base_text, &[a, b]);
            if seen.insert(m.mutant_id.clone()) {
                mutants.push(m);
                added += 1;
            }
        }
    }
    mutants.push(malformed);
    mutants
}
