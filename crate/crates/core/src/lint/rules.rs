use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "info" => Ok(Severity::Info),
            "warning" | "warn" => Ok(Severity::Warning),
            "error" => Ok(Severity::Error),
            other => Err(format!("unknown severity {other:?}")),
        }
    }
}

/// Confidentiality, integrity, availability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cia {
    C,
    I,
    A,
}

impl Cia {
    pub fn letter(self) -> char {
        match self {
            Cia::C => 'C',
            Cia::I => 'I',
            Cia::A => 'A',
        }
    }

    pub fn from_letter(c: char) -> Option<Cia> {
        match c {
            'C' => Some(Cia::C),
            'I' => Some(Cia::I),
            'A' => Some(Cia::A),
            _ => None,
        }
    }
}

/// Installation lifecycle phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreInstallation,
    Installation,
    PostInstallation,
    Uninstallation,
}

macro_rules! rules {
    ($( $variant:ident => $id:literal, $sev:ident, [$($cia:ident),+], $phase:ident, $risk:expr, $why:literal; )+) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum RuleId {
            $($variant,)+
        }

        impl RuleId {
            pub const ALL: &'static [RuleId] = &[$(RuleId::$variant,)+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(RuleId::$variant => $id,)+
                }
            }

            pub fn default_severity(self) -> Severity {
                match self {
                    $(RuleId::$variant => Severity::$sev,)+
                }
            }

            pub fn cia(self) -> &'static [Cia] {
                match self {
                    $(RuleId::$variant => &[$(Cia::$cia),+],)+
                }
            }

            pub fn phase(self) -> Phase {
                match self {
                    $(RuleId::$variant => Phase::$phase,)+
                }
            }

            /// The catalog risk this rule detects an instance of, if any.
            pub fn catalog_risk(self) -> Option<&'static str> {
                match self {
                    $(RuleId::$variant => $risk,)+
                }
            }

            /// What the rule is looking for.
            pub fn summary(self) -> &'static str {
                match self {
                    $(RuleId::$variant => $why,)+
                }
            }
        }
    };
}

const RISK_DISCREPANCIES: Option<&str> = Some("Discrepancies in PWA installation requirements");
const RISK_EXTERNAL: Option<&str> = Some("start_url and scope leading to external sites");
const RISK_DUPLICATION: Option<&str> = Some("Name and icon duplication causing user confusion and phishing");
const RISK_ICON: Option<&str> = Some("Icon can be a third-party URL, leading to phishing");
const RISK_DISPLAY: Option<&str> = Some("Display fullscreen mode hides URLs, enabling phishing attacks");
const RISK_ID: Option<&str> = Some("ID can be duplicated and multiple PWAs not distinguishable");
const RISK_RELATED: Option<&str> = Some("Related applications can lead to third-party app installations");
const RISK_ARBITRARY: Option<&str> = Some("Manifest allows arbitrary fields, leading to tracking");
const RISK_CACHE_ONLY: Option<&str> = Some("Service worker cache-only strategies prevent updates");

rules! {
    SynJsonMalformed => "SYN-JSON-MALFORMED", Error, [A], PreInstallation, None,
        "manifest body is not a JSON object";
    SynSuEmpty => "SYN-SU-EMPTY", Error, [A], PreInstallation, None,
        "start_url is present but empty";
    SynScEmpty => "SYN-SC-EMPTY", Error, [A], PreInstallation, None,
        "scope is present but empty";
    SynDisplayUnknown => "SYN-DISPLAY-UNKNOWN", Error, [A], PreInstallation, None,
        "display is not one of the documented modes";
    SecSuTrack => "SEC-SU-TRACK", Warning, [I], PreInstallation, None,
        "start_url carries query parameters that can personalize launches";
    SecSuXorigin => "SEC-SU-XORIGIN", Error, [I], PreInstallation, RISK_EXTERNAL,
        "start_url points at another origin";
    SecSuParent => "SEC-SU-PARENT", Warning, [I], PreInstallation, RISK_EXTERNAL,
        "start_url climbs to a parent path";
    SecSuRedirectParam => "SEC-SU-REDIRECT-PARAM", Warning, [I], PreInstallation, RISK_EXTERNAL,
        "start_url carries a redirect-style query parameter";
    SecScParent => "SEC-SC-PARENT", Warning, [I], PreInstallation, RISK_EXTERNAL,
        "scope climbs to a parent path";
    SecScXorigin => "SEC-SC-XORIGIN", Error, [I], PreInstallation, RISK_EXTERNAL,
        "scope points at another origin";
    SecScNoTrailingSlash => "SEC-SC-NO-TRAILING-SLASH", Info, [I], PreInstallation, None,
        "scope does not end in '/', so it prefix-matches sibling paths";
    SecNameEmpty => "SEC-NAME-EMPTY", Warning, [C], PreInstallation, None,
        "name is missing or empty";
    SecNameLong => "SEC-NAME-LONG", Warning, [I], PreInstallation, RISK_DISCREPANCIES,
        "name is longer than 1000 characters";
    SecNameDup => "SEC-NAME-DUP", Warning, [C], PreInstallation, RISK_DUPLICATION,
        "name is already used by another app in the corpus";
    SecNameTemplate => "SEC-NAME-TEMPLATE", Warning, [C], PreInstallation, RISK_DUPLICATION,
        "name is an unchanged project-template default";
    SecIconXorigin => "SEC-ICON-XORIGIN", Warning, [C], PreInstallation, RISK_ICON,
        "icon is loaded from another origin";
    SecIconDup => "SEC-ICON-DUP", Warning, [C], PreInstallation, RISK_DUPLICATION,
        "icon URL is used by another origin in the corpus";
    SecDisplayHidesUrl => "SEC-DISPLAY-HIDES-URL", Warning, [C], PreInstallation, RISK_DISPLAY,
        "display mode hides the URL bar";
    SecIdTrack => "SEC-ID-TRACK", Warning, [I], PreInstallation, RISK_ID,
        "id embeds per-user or tracking data";
    SecIdXorigin => "SEC-ID-XORIGIN", Warning, [I], PreInstallation, RISK_ID,
        "id resolves to another origin";
    SecIdDup => "SEC-ID-DUP", Warning, [I], PreInstallation, RISK_ID,
        "id is shared with another app on the same origin";
    SecRelatedUnpaired => "SEC-RELATED-UNPAIRED", Info, [C], PreInstallation, RISK_RELATED,
        "only one of related_applications / prefer_related_applications is set";
    SecRelatedPrefer => "SEC-RELATED-PREFER", Warning, [C], PreInstallation, RISK_RELATED,
        "install is redirected to a related native application";
    SecUnknownField => "SEC-UNKNOWN-FIELD", Info, [I], PreInstallation, RISK_ARBITRARY,
        "field is not part of the manifest standard";
    SecSwCacheonly => "SEC-SW-CACHEONLY", Warning, [I], PostInstallation, RISK_CACHE_ONLY,
        "service worker serves from cache only, so updates never reach users";
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown rule id {s:?}"))
    }
}

impl Serialize for RuleId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for RuleId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
