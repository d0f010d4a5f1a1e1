//! The violation catalog: published risk rows with their CIA letter and
//! affected-browser counts, the browser/OS install and profile matrices, and
//! per-browser uninstallation steps.
//!
//! The data ships as `data/catalog.json` and is checked against
//! `data/catalog.json.sha256` on every load.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lint::{Cia, Phase};

const CATALOG_JSON: &str = include_str!("../data/catalog.json");
const CATALOG_SHA256: &str = include_str!("../data/catalog.json.sha256");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog data is corrupt: {0}")]
    CatalogCorrupt(String),
    #[error("no catalog entry for {browser} on {os}")]
    UnknownCombination { browser: String, os: String },
}

macro_rules! name_enum {
    ($name:ident { $($variant:ident = $label:literal => [$($alias:literal),+]),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name { $(#[serde(rename = $label)] $variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
                $( if [$($alias),+].contains(&key.as_str()) { return Ok($name::$variant); } )+
                Err(format!("unknown {} {s:?}", stringify!($name).to_ascii_lowercase()))
            }
        }
    };
}

name_enum!(Browser {
    Safari = "Safari" => ["safari"],
    Firefox = "Firefox" => ["firefox"],
    Chrome = "Chrome" => ["chrome"],
    Edge = "Edge" => ["edge"],
    Opera = "Opera" => ["opera"],
    Brave = "Brave" => ["brave"],
    SamsungInternet = "SamsungInternet" => ["samsunginternet", "samsung"],
    TorBrowser = "TorBrowser" => ["torbrowser", "tor"],
});

name_enum!(Os {
    Linux = "Linux" => ["linux"],
    MacOs = "macOS" => ["macos", "osx", "mac"],
    Windows = "Windows" => ["windows", "win"],
    Ios = "iOS" => ["ios"],
    Android = "Android" => ["android"],
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Desktop,
    Mobile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstallSupport {
    Supported,
    Unsupported,
    BrowserUnavailable,
    AddToDock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSupport {
    MultiProfileIsolated,
    MultiProfileNotIsolated,
    NoMultiProfile,
    Unsupported,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub risk_name: String,
    pub cia: Cia,
    pub browser_count: u32,
    pub phase: Phase,
    pub notes: String,
    /// Browser/OS pairs the count covers. Not published, so always empty in
    /// the shipped data.
    #[serde(default)]
    pub applicability: Vec<(Browser, Os)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowserProfile {
    pub browser: Browser,
    pub os: Os,
    pub platform: Platform,
    pub install_support: InstallSupport,
    pub profile_support: ProfileSupport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiaTally {
    pub c: u32,
    pub i: u32,
    pub a: u32,
    pub total: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UninstallEntry {
    browsers: Vec<Browser>,
    os: Vec<Os>,
    steps: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct UninstallData {
    fallback: String,
    site_data: String,
    unsupported: String,
    entries: Vec<UninstallEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UninstallGuide {
    pub browser: Browser,
    pub os: Os,
    pub steps: Vec<String>,
    pub fallback: String,
}

impl UninstallGuide {
    pub fn render_text(&self) -> String {
        let mut out = format!("{} on {}\n", self.browser, self.os);
        for (n, step) in self.steps.iter().enumerate() {
            out.push_str(&format!("  {}. {step}\n", n + 1));
        }
        out.push_str(&format!("  Fallback: {}\n", self.fallback));
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Catalog {
    pub version: u32,
    pub violations: Vec<ViolationRecord>,
    pub browsers: Vec<BrowserProfile>,
    uninstall: UninstallData,
}

impl Catalog {
    /// The shipped catalog, verified against its checksum.
    pub fn load() -> Result<Catalog, CatalogError> {
        Self::from_parts(CATALOG_JSON.as_bytes(), CATALOG_SHA256)
    }

    pub fn from_parts(data: &[u8], expected_sha256: &str) -> Result<Catalog, CatalogError> {
        let actual = hex::encode(Sha256::digest(data));
        if !actual.eq_ignore_ascii_case(expected_sha256.trim()) {
            return Err(CatalogError::CatalogCorrupt(format!(
                "sha256 {actual} does not match {}",
                expected_sha256.trim()
            )));
        }
        let catalog: Catalog =
            serde_json::from_slice(data).map_err(|e| CatalogError::CatalogCorrupt(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let corrupt = |m: String| Err(CatalogError::CatalogCorrupt(m));
        let mut names = std::collections::BTreeSet::new();
        for v in &self.violations {
            if v.browser_count == 0 {
                return corrupt(format!("{:?} has a zero browser count", v.risk_name));
            }
            if !names.insert(v.risk_name.as_str()) {
                return corrupt(format!("{:?} appears twice", v.risk_name));
            }
        }
        for b in Browser::ALL {
            for o in Os::ALL {
                let n = self.browsers.iter().filter(|p| p.browser == *b && p.os == *o).count();
                if n != 1 {
                    return corrupt(format!("{b} on {o} has {n} entries"));
                }
            }
        }
        Ok(())
    }

    pub fn violation(&self, risk_name: &str) -> Option<&ViolationRecord> {
        self.violations.iter().find(|v| v.risk_name == risk_name)
    }

    pub fn browser_support(&self, browser: Browser, os: Os) -> Result<&BrowserProfile, CatalogError> {
        self.browsers
            .iter()
            .find(|p| p.browser == browser && p.os == os)
            .ok_or_else(|| unknown(browser, os))
    }

    /// Uninstallation steps for `browser` on `os`. Pairs where the browser
    /// does not exist are rejected.
    pub fn uninstall_guide(&self, browser: Browser, os: Os) -> Result<UninstallGuide, CatalogError> {
        let profile = self.browser_support(browser, os)?;
        let u = &self.uninstall;
        let mut steps: Vec<String> = match profile.install_support {
            InstallSupport::BrowserUnavailable => return Err(unknown(browser, os)),
            InstallSupport::Unsupported => vec![u.unsupported.clone()],
            InstallSupport::Supported | InstallSupport::AddToDock => u
                .entries
                .iter()
                .filter(|e| e.browsers.contains(&browser) && e.os.contains(&os))
                .flat_map(|e| e.steps.iter().cloned())
                .collect(),
        };
        steps.push(u.site_data.clone());
        Ok(UninstallGuide { browser, os, steps, fallback: u.fallback.clone() })
    }
}

fn unknown(browser: Browser, os: Os) -> CatalogError {
    CatalogError::UnknownCombination { browser: browser.to_string(), os: os.to_string() }
}

/// The shipped catalog rows.
pub fn load_catalog() -> Result<Vec<ViolationRecord>, CatalogError> {
    Catalog::load().map(|c| c.violations)
}

pub fn cia_tally(records: &[ViolationRecord]) -> CiaTally {
    let mut t = CiaTally::default();
    for r in records {
        match r.cia {
            Cia::C => t.c += r.browser_count,
            Cia::I => t.i += r.browser_count,
            Cia::A => t.a += r.browser_count,
        }
    }
    t.total = t.c + t.i + t.a;
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rows() {
        let rows = load_catalog().unwrap();
        assert_eq!(rows.len(), 25);
        let c = Catalog::load().unwrap();
        let h = c.violation("History sniffing via Chrome Mini-Infobar").unwrap();
        assert_eq!((h.cia, h.browser_count), (Cia::C, 1));
        let d = c.violation("Discrepancies in PWA installation requirements").unwrap();
        assert_eq!((d.cia, d.browser_count), (Cia::I, 16));
        assert!(rows.iter().all(|r| r.applicability.is_empty()));
    }

    #[test]
    fn tallies() {
        let rows = load_catalog().unwrap();
        assert_eq!(cia_tally(&rows), CiaTally { c: 84, i: 114, a: 5, total: 203 });
        assert_eq!(cia_tally(&[]), CiaTally::default());
        let a: Vec<_> = rows.into_iter().filter(|r| r.cia == Cia::A).collect();
        assert_eq!(cia_tally(&a), CiaTally { c: 0, i: 0, a: 5, total: 5 });
    }

    #[test]
    fn corrupt_data_is_rejected() {
        let mut bytes = CATALOG_JSON.as_bytes().to_vec();
        let pos = CATALOG_JSON.find("\"browser_count\": 16").unwrap() + "\"browser_count\": ".len();
        bytes[pos] = b'2';
        assert!(matches!(Catalog::from_parts(&bytes, CATALOG_SHA256), Err(CatalogError::CatalogCorrupt(_))));
    }

    #[test]
    fn support_cells() {
        let c = Catalog::load().unwrap();
        assert_eq!(c.browser_support(Browser::Safari, Os::MacOs).unwrap().install_support, InstallSupport::AddToDock);
        assert_eq!(c.browser_support(Browser::Firefox, Os::Linux).unwrap().install_support, InstallSupport::Unsupported);
        let chrome = c.browser_support(Browser::Chrome, Os::Android).unwrap();
        assert_eq!(chrome.install_support, InstallSupport::Supported);
        assert_eq!(chrome.profile_support, ProfileSupport::MultiProfileNotIsolated);
        assert_eq!(c.browsers.len(), 40);
    }

    #[test]
    fn uninstall_guides() {
        let c = Catalog::load().unwrap();
        let g = c.uninstall_guide(Browser::Chrome, Os::Android).unwrap();
        let text = g.steps.join(" ");
        assert!(text.contains("Remove") && text.contains("Uninstall"));
        let g = c.uninstall_guide(Browser::Edge, Os::Windows).unwrap();
        assert!(g.steps.iter().any(|s| s.contains("edge://apps/all")));
        for b in Browser::ALL {
            for o in Os::ALL {
                match c.uninstall_guide(*b, *o) {
                    Ok(g) => assert!(g.fallback.contains("install it again")),
                    Err(CatalogError::UnknownCombination { .. }) => {
                        assert_eq!(c.browser_support(*b, *o).unwrap().install_support, InstallSupport::BrowserUnavailable)
                    }
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn lint_rules_agree_with_rows() {
        let c = Catalog::load().unwrap();
        for rule in crate::lint::RuleId::ALL {
            if let Some(risk) = rule.catalog_risk() {
                let row = c.violation(risk).unwrap_or_else(|| panic!("{rule} names missing row {risk:?}"));
                assert_eq!(rule.cia(), &[row.cia][..], "{rule}");
            }
        }
    }

    #[test]
    fn names_parse_loosely() {
        assert_eq!("Samsung Internet".parse::<Browser>().unwrap(), Browser::SamsungInternet);
        assert_eq!("macOS".parse::<Os>().unwrap(), Os::MacOs);
        assert!("netscape".parse::<Browser>().is_err());
    }
}
