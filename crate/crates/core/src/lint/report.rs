use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{check_installable, lint_with, Finding, InstallabilityReport, LintOptions, RuleId, Severity};
use crate::corpus::CorpusIndex;
use crate::manifest::{normalize, ParseNote, RawManifest};
use crate::url_semantics::AbsoluteUrl;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One linted manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub manifest_url: AbsoluteUrl,
    pub document_url: AbsoluteUrl,
    pub findings: Vec<Finding>,
    pub installability: Option<InstallabilityReport>,
    pub parse_notes: Vec<ParseNote>,
}

impl LintReport {
    pub fn build(
        raw: &RawManifest,
        corpus: Option<&CorpusIndex>,
        options: &LintOptions,
        has_service_worker: bool,
    ) -> Self {
        let manifest = normalize(raw);
        let findings = lint_with(&manifest, raw, corpus, options);
        let installability = check_installable(
            &manifest,
            has_service_worker,
            manifest.document_url.is_secure_context(),
            options.mode,
        );
        LintReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            manifest_url: raw.source_url.clone(),
            document_url: raw.document_url.clone(),
            findings,
            installability: Some(installability),
            parse_notes: manifest.notes,
        }
    }

    /// Report for a body that did not parse as a manifest.
    pub fn malformed(manifest_url: &AbsoluteUrl, document_url: &AbsoluteUrl, error: &str) -> Self {
        LintReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            manifest_url: manifest_url.clone(),
            document_url: document_url.clone(),
            findings: vec![Finding::new(RuleId::SynJsonMalformed, "$", error)],
            installability: None,
            parse_notes: Vec::new(),
        }
    }

    pub fn worst_severity(&self) -> Option<Severity> {
        self.findings.iter().map(|f| f.severity).max()
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "manifest {} (document {})", self.manifest_url, self.document_url);
        if self.findings.is_empty() {
            let _ = writeln!(s, "  no findings");
        }
        for f in &self.findings {
            let cia: String = f.cia.iter().map(|c| c.letter()).collect();
            let _ = writeln!(
                s,
                "  {:<7} {:<26} [{}] {}: {}",
                f.severity.as_str(),
                f.rule_id.as_str(),
                cia,
                f.field_path,
                f.message
            );
            let _ = writeln!(s, "          fix: {}", f.remediation);
        }
        if let Some(i) = &self.installability {
            let verdict = if i.installable { "installable" } else { "not installable" };
            let _ = write!(s, "  {verdict} ({})", i.mode);
            if !i.missing.is_empty() {
                let _ = write!(s, "; missing: {}", i.missing.join(", "));
            }
            let _ = writeln!(s);
            for n in &i.notes {
                let _ = writeln!(s, "    note: {n}");
            }
        }
        for n in &self.parse_notes {
            let _ = writeln!(s, "  parse note: {n}");
        }
        s
    }
}
