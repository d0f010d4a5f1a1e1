use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::url_semantics::{same_origin, within_scope};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstallMode {
    /// Manifest, secure context and a service worker are all required.
    StrictW3c,
    /// As strict, minus the service worker.
    #[default]
    ChromeLenient,
}

impl InstallMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InstallMode::StrictW3c => "strict_w3c",
            InstallMode::ChromeLenient => "chrome_lenient",
        }
    }
}

impl fmt::Display for InstallMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstallMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "strict_w3c" | "strict" => Ok(InstallMode::StrictW3c),
            "chrome_lenient" | "lenient" | "chrome" => Ok(InstallMode::ChromeLenient),
            other => Err(format!("unknown install mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstallabilityReport {
    pub installable: bool,
    pub mode: InstallMode,
    pub missing: Vec<String>,
    pub notes: Vec<String>,
}

/// Requirements that concern the manifest itself rather than how it is served.
const MANIFEST_REQUIREMENTS: &[&str] = &["name", "icons", "start_url", "display"];

pub fn check_installable(
    manifest: &Manifest,
    has_service_worker: bool,
    is_secure_context: bool,
    mode: InstallMode,
) -> InstallabilityReport {
    let mut missing = Vec::new();
    let mut notes = Vec::new();

    if manifest.name.as_deref().map(str::trim).unwrap_or_default().is_empty() {
        missing.push("name");
    }
    if manifest.icons.is_empty() {
        missing.push("icons");
    }
    let start_ok = same_origin(&manifest.start_url, &manifest.document_url)
        && within_scope(&manifest.start_url, &manifest.scope);
    if !start_ok {
        missing.push("start_url");
    }
    if manifest.start_url_fell_back && manifest.start_url_raw.is_some() {
        notes.push("start_url was unusable and replaced by the document URL".to_string());
    }
    if !manifest.display.is_app_like() {
        missing.push("display");
        notes.push(format!(
            "display {:?} must be standalone, fullscreen or minimal-ui",
            manifest.display.as_str()
        ));
    }
    if !is_secure_context {
        missing.push("secure_context");
    }
    match mode {
        InstallMode::StrictW3c => {
            if !has_service_worker {
                missing.push("service_worker");
            }
        }
        InstallMode::ChromeLenient => {
            if !has_service_worker {
                notes.push("no service worker; not required in this mode".to_string());
            }
        }
    }

    InstallabilityReport {
        installable: missing.is_empty(),
        mode,
        missing: missing.into_iter().map(str::to_string).collect(),
        notes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestResult {
    Absent,
    Malformed,
    Present,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteCategory {
    InaccessibleOrNoManifest,
    InvalidManifest,
    InstallableWithSw,
    InstallableWithoutSw,
    NotInstallable,
}

/// Site-level category. A present manifest that fails any manifest-level
/// requirement is invalid; one that fails only serving requirements (secure
/// context, service worker) is not installable.
pub fn classify_site(
    manifest_result: ManifestResult,
    installability: Option<&InstallabilityReport>,
    has_service_worker: bool,
) -> SiteCategory {
    match manifest_result {
        ManifestResult::Absent => SiteCategory::InaccessibleOrNoManifest,
        ManifestResult::Malformed => SiteCategory::InvalidManifest,
        ManifestResult::Present => match installability {
            None => SiteCategory::NotInstallable,
            Some(r) if r.installable && has_service_worker => SiteCategory::InstallableWithSw,
            Some(r) if r.installable => SiteCategory::InstallableWithoutSw,
            Some(r) if r.missing.iter().any(|m| MANIFEST_REQUIREMENTS.contains(&m.as_str())) => {
                SiteCategory::InvalidManifest
            }
            Some(_) => SiteCategory::NotInstallable,
        },
    }
}
