//! Syntactic and semantic manifest rules.
//!
//! [`lint`] is total and pure: identical inputs give byte-identical finding
//! lists, ordered by `(field_path, rule_id)`.

mod install;
mod report;
mod rules;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use install::{check_installable, classify_site, InstallMode, InstallabilityReport, ManifestResult, SiteCategory};
pub use report::{LintReport, REPORT_SCHEMA_VERSION, TOOL_VERSION};
pub use rules::{Cia, Phase, RuleId, Severity};

use crate::corpus::{resolved_id, CorpusIndex};
use crate::manifest::{DisplayMode, Manifest, RawManifest};
use crate::names::is_template_name;
use crate::url_semantics::{is_parent_path_ref, origin_of, resolve, same_origin, AbsoluteUrl};

/// Document URL used when a manifest is linted without knowing where it is
/// served. Origin-dependent rules are downgraded to info against it.
pub const PLACEHOLDER_DOCUMENT_URL: &str = "https://manifest.invalid/";

pub fn is_placeholder(document: &AbsoluteUrl) -> bool {
    document.host() == "manifest.invalid"
}

/// Query parameter names that identify a user or session.
pub const TRACKING_PARAMS: &[&str] = &["id", "uid", "user", "token", "session", "ref"];
/// Query parameter names that carry a navigation target.
pub const REDIRECT_PARAMS: &[&str] = &["redirect", "url", "next", "goto", "return", "dest"];

pub const NAME_LENGTH_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub cia: Vec<Cia>,
    pub phase: Phase,
    pub field_path: String,
    pub message: String,
    pub remediation: String,
}

impl Finding {
    pub fn new(rule: RuleId, field_path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            rule_id: rule,
            severity: rule.default_severity(),
            cia: rule.cia().to_vec(),
            phase: rule.phase(),
            field_path: field_path.into(),
            message: message.into(),
            remediation: remediation(rule).to_string(),
        }
    }

    pub fn with_severity(mut self, severity: Severity) -> Self {
        self.severity = severity;
        self
    }
}

/// Sort into the canonical `(field_path, rule_id)` order and drop exact repeats.
pub fn sort_findings(findings: &mut Vec<Finding>) {
    findings.sort_by(|a, b| {
        (a.field_path.as_str(), a.rule_id.as_str(), a.message.as_str())
            .cmp(&(b.field_path.as_str(), b.rule_id.as_str(), b.message.as_str()))
    });
    findings.dedup();
}

/// Findings at or above `threshold`.
pub fn at_or_above(findings: &[Finding], threshold: Severity) -> Vec<&Finding> {
    findings.iter().filter(|f| f.severity >= threshold).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LintOptions {
    pub mode: InstallMode,
}

fn remediation(rule: RuleId) -> &'static str {
    match rule {
        RuleId::SynJsonMalformed => "Serve the manifest as a single JSON object.",
        RuleId::SynSuEmpty => "Remove the empty start_url or set it to a path on this origin, e.g. \"/\".",
        RuleId::SynScEmpty => "Remove the empty scope or set it to a directory on this origin ending in '/'.",
        RuleId::SynDisplayUnknown => "Use one of fullscreen, standalone, minimal-ui or browser.",
        RuleId::SecSuTrack => "Launch from a fixed path; keep per-user state out of start_url.",
        RuleId::SecSuXorigin => "Point start_url at a page on the installing origin.",
        RuleId::SecSuParent => "Use an absolute path on this origin instead of '../' segments.",
        RuleId::SecSuRedirectParam => "Drop navigation targets from start_url query parameters.",
        RuleId::SecScParent => "Use an absolute directory path instead of '../' segments.",
        RuleId::SecScXorigin => "Set scope to a directory on the installing origin.",
        RuleId::SecScNoTrailingSlash => "End scope with '/' so it does not match sibling paths.",
        RuleId::SecNameEmpty => "Give the app a distinctive, non-empty name.",
        RuleId::SecNameLong => "Keep name at or below 1000 characters; desktop browsers refuse longer names.",
        RuleId::SecNameDup => "Choose a name that no other installed app uses.",
        RuleId::SecNameTemplate => "Replace the scaffold's default name with the product name.",
        RuleId::SecIconXorigin => "Host icons on the app's own origin.",
        RuleId::SecIconDup => "Use icon artwork and URLs unique to this app.",
        RuleId::SecDisplayHidesUrl => "Prefer minimal-ui so users can still see the URL.",
        RuleId::SecIdTrack => "Use a stable, user-independent id; \"/\" is the recommended value.",
        RuleId::SecIdXorigin => "Use an id on the app's own origin; \"/\" is the recommended value.",
        RuleId::SecIdDup => "Give each app on this origin its own id.",
        RuleId::SecRelatedUnpaired => "Set both related_applications and prefer_related_applications, or neither.",
        RuleId::SecRelatedPrefer => "Only redirect installs to native apps you publish and have verified.",
        RuleId::SecUnknownField => "Remove non-standard fields; they can carry tracking data.",
        RuleId::SecSwCacheonly => "Add a network path (network-first or stale-while-revalidate) so updates reach users.",
    }
}

fn is_origin_dependent(rule: RuleId) -> bool {
    matches!(
        rule,
        RuleId::SecSuXorigin | RuleId::SecScXorigin | RuleId::SecIconXorigin | RuleId::SecIdXorigin
    )
}

struct Collector {
    findings: Vec<Finding>,
    placeholder: bool,
}

impl Collector {
    fn push(&mut self, finding: Finding) {
        let finding = if self.placeholder && is_origin_dependent(finding.rule_id) {
            Finding {
                severity: Severity::Info,
                message: format!("{} (document URL unknown; pass --url to judge origins)", finding.message),
                ..finding
            }
        } else {
            finding
        };
        self.findings.push(finding);
    }
}

/// The non-empty query of a raw URL reference, without the fragment.
pub fn raw_query(reference: &str) -> Option<&str> {
    let (_, rest) = reference.split_once('?')?;
    let q = rest.split('#').next().unwrap_or_default();
    (!q.is_empty()).then_some(q)
}

fn query_pairs(query: &str) -> Vec<(String, String)> {
    url::form_urlencoded::parse(query.as_bytes())
        .map(|(k, v)| (k.into_owned(), v.into_owned()))
        .collect()
}

fn name_in(name: &str, list: &[&str]) -> bool {
    list.iter().any(|n| n.eq_ignore_ascii_case(name))
}

/// Query parameters naming a redirect target, or whose value is an absolute URL.
pub fn redirect_params(reference: &str) -> Vec<(String, String)> {
    raw_query(reference)
        .map(query_pairs)
        .unwrap_or_default()
        .into_iter()
        .filter(|(k, v)| name_in(k, REDIRECT_PARAMS) || AbsoluteUrl::parse(v).is_ok())
        .collect()
}

static UUID: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$").unwrap()
});

/// An id that carries a query, or a path segment that looks like a user or
/// record identifier (3+ digits, 16+ hex digits, or a UUID).
pub fn looks_like_tracking_id(reference: &str) -> bool {
    let t = reference.trim();
    if raw_query(t).is_some() {
        return true;
    }
    let without_authority = match t.find("//") {
        Some(i) => &t[i + 2..],
        None => t,
    };
    let path = match (t.contains("//"), without_authority.find('/')) {
        (true, Some(i)) => &without_authority[i..],
        (true, None) => "",
        (false, _) => without_authority,
    };
    let path = path.split('#').next().unwrap_or_default();
    path.split('/').any(|seg| {
        (seg.len() >= 3 && seg.bytes().all(|b| b.is_ascii_digit()))
            || (seg.len() >= 16 && seg.bytes().all(|b| b.is_ascii_hexdigit()))
            || UUID.is_match(seg)
    })
}

pub fn lint(manifest: &Manifest, raw: &RawManifest, corpus: Option<&CorpusIndex>) -> Vec<Finding> {
    lint_with(manifest, raw, corpus, &LintOptions::default())
}

pub fn lint_with(
    manifest: &Manifest,
    raw: &RawManifest,
    corpus: Option<&CorpusIndex>,
    options: &LintOptions,
) -> Vec<Finding> {
    let m = manifest;
    let doc = &m.document_url;
    let mut out = Collector {
        findings: Vec::new(),
        placeholder: is_placeholder(doc),
    };

    check_start_url(m, &mut out);
    check_scope(m, &mut out);
    check_name(m, corpus, options, &mut out);

    for icon in &m.icons {
        let path = format!("icons[{}].src", icon.index);
        if !same_origin(&icon.src, doc) {
            out.push(Finding::new(
                RuleId::SecIconXorigin,
                &path,
                format!("icon {} is served from {}", icon.src, origin_of(&icon.src)),
            ));
        }
        if let Some(c) = corpus {
            let n = c.other_origins_using_icon(&icon.src, doc);
            if n > 0 {
                out.push(Finding::new(
                    RuleId::SecIconDup,
                    &path,
                    format!("icon {} is also used by {n} other origin(s)", icon.src),
                ));
            }
        }
    }

    if let (Some(text), DisplayMode::Unknown(_)) = (&m.display_raw, &m.display) {
        out.push(Finding::new(
            RuleId::SynDisplayUnknown,
            "display",
            format!("display {text:?} is not a documented mode; the app will not install"),
        ));
    }
    if m.display == DisplayMode::Fullscreen {
        out.push(Finding::new(
            RuleId::SecDisplayHidesUrl,
            "display",
            "fullscreen hides the URL, so users cannot tell which site they are on",
        ));
    }

    check_id(m, corpus, &mut out);
    check_related(m, raw, &mut out);

    for field in &m.unknown_fields {
        out.push(Finding::new(
            RuleId::SecUnknownField,
            field,
            format!("non-standard field {field:?}"),
        ));
    }

    let mut findings = out.findings;
    sort_findings(&mut findings);
    findings
}

fn check_start_url(m: &Manifest, out: &mut Collector) {
    let Some(raw) = m.start_url_raw.as_deref() else { return };
    let t = raw.trim();
    if t.is_empty() {
        out.push(Finding::new(RuleId::SynSuEmpty, "start_url", "start_url is empty"));
        return;
    }
    if m.start_url_fell_back {
        let message = match resolve(&m.document_url, t) {
            Ok(u) => format!("start_url {u} is not on {}; browsers ignore it", origin_of(&m.document_url)),
            Err(e) => format!("start_url is unusable ({e}); browsers ignore it"),
        };
        out.push(Finding::new(RuleId::SecSuXorigin, "start_url", message));
    }
    if is_parent_path_ref(t) {
        out.push(Finding::new(
            RuleId::SecSuParent,
            "start_url",
            format!("start_url {t:?} uses parent-path segments"),
        ));
    }
    if let Some(q) = raw_query(t) {
        let pairs = query_pairs(q);
        let tracking: Vec<&str> = pairs
            .iter()
            .map(|(k, _)| k.as_str())
            .filter(|k| name_in(k, TRACKING_PARAMS))
            .collect();
        let finding = if tracking.is_empty() {
            Finding::new(RuleId::SecSuTrack, "start_url", format!("start_url has query {q:?}"))
                .with_severity(Severity::Info)
        } else {
            Finding::new(
                RuleId::SecSuTrack,
                "start_url",
                format!("start_url has identifying parameter(s) {}", tracking.join(", ")),
            )
        };
        out.push(finding);
        let redirects = redirect_params(t);
        if !redirects.is_empty() {
            let listed: Vec<String> = redirects.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.push(Finding::new(
                RuleId::SecSuRedirectParam,
                "start_url",
                format!("start_url carries navigation target(s) {}", listed.join(", ")),
            ));
        }
    }
}

fn check_scope(m: &Manifest, out: &mut Collector) {
    let Some(raw) = m.scope_raw.as_deref() else { return };
    let t = raw.trim();
    if t.is_empty() {
        out.push(Finding::new(RuleId::SynScEmpty, "scope", "scope is empty"));
        return;
    }
    if is_parent_path_ref(t) {
        out.push(Finding::new(
            RuleId::SecScParent,
            "scope",
            format!("scope {t:?} uses parent-path segments"),
        ));
    }
    match resolve(&m.document_url, t) {
        Ok(s) if !same_origin(&s, &m.document_url) => out.push(Finding::new(
            RuleId::SecScXorigin,
            "scope",
            format!("scope {s} is not on {}", origin_of(&m.document_url)),
        )),
        Ok(s) => {
            if !s.path().ends_with('/') {
                out.push(Finding::new(
                    RuleId::SecScNoTrailingSlash,
                    "scope",
                    format!("scope path {:?} also admits sibling paths sharing its prefix", s.path()),
                ));
            }
        }
        Err(e) => out.push(Finding::new(
            RuleId::SecScXorigin,
            "scope",
            format!("scope is unusable ({e})"),
        )),
    }
}

fn check_name(m: &Manifest, corpus: Option<&CorpusIndex>, options: &LintOptions, out: &mut Collector) {
    let name = m.name.as_deref().map(str::trim).unwrap_or_default();
    if name.is_empty() {
        let f = Finding::new(RuleId::SecNameEmpty, "name", "name is missing or empty; browsers substitute a default");
        let f = match options.mode {
            InstallMode::StrictW3c => f.with_severity(Severity::Error),
            InstallMode::ChromeLenient => f,
        };
        out.push(f);
        return;
    }
    let len = m.name.as_deref().unwrap_or_default().chars().count();
    if len > NAME_LENGTH_LIMIT {
        out.push(Finding::new(
            RuleId::SecNameLong,
            "name",
            format!("name is {len} characters long"),
        ));
    }
    if is_template_name(name) {
        out.push(Finding::new(
            RuleId::SecNameTemplate,
            "name",
            format!("{name:?} is a project-template default"),
        ));
    }
    if let Some(c) = corpus {
        let n = c.other_documents_named(name, &m.document_url);
        if n > 0 {
            out.push(Finding::new(
                RuleId::SecNameDup,
                "name",
                format!("{name:?} is also used by {n} other app(s)"),
            ));
        }
    }
}

fn check_id(m: &Manifest, corpus: Option<&CorpusIndex>, out: &mut Collector) {
    let Some(raw) = m.id.as_deref() else { return };
    let t = raw.trim();
    if t.is_empty() {
        return;
    }
    if looks_like_tracking_id(t) {
        out.push(Finding::new(
            RuleId::SecIdTrack,
            "id",
            format!("id {t:?} looks user-specific; the recommended id is \"/\""),
        ));
    }
    if let Ok(u) = resolve(&m.start_url, t) {
        if !same_origin(&u, &m.start_url) {
            out.push(Finding::new(
                RuleId::SecIdXorigin,
                "id",
                format!("id {u} is not on {}; the recommended id is \"/\"", origin_of(&m.start_url)),
            ));
        }
    }
    if let (Some(c), Some(id)) = (corpus, resolved_id(m)) {
        let n = c.other_documents_with_id(&id, &m.document_url);
        if n > 0 {
            out.push(Finding::new(
                RuleId::SecIdDup,
                "id",
                format!("id {id} is also declared by {n} other app(s) on this origin"),
            ));
        }
    }
}

fn check_related(m: &Manifest, raw: &RawManifest, out: &mut Collector) {
    let has_related = !m.related_applications.is_empty();
    let has_prefer = m.prefer_related_applications.is_some();
    if has_related != has_prefer {
        let path = if has_related || raw.get("related_applications").is_some() {
            "related_applications"
        } else {
            "prefer_related_applications"
        };
        out.push(Finding::new(
            RuleId::SecRelatedUnpaired,
            path,
            "related_applications and prefer_related_applications only take effect together",
        ));
    }
    if has_related && m.prefer_related_applications == Some(true) {
        let targets: Vec<String> = m
            .related_applications
            .iter()
            .map(|r| {
                let target = r.id.clone().or_else(|| r.url.as_ref().map(|u| u.to_string()));
                format!("{}:{}", r.platform, target.unwrap_or_default())
            })
            .collect();
        out.push(Finding::new(
            RuleId::SecRelatedPrefer,
            "prefer_related_applications",
            format!("install is redirected to {}", targets.join(", ")),
        ));
    }
}
