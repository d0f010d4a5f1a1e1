//! Origin computation, same-origin tests, scope membership and parent-path
//! detection.
//!
//! Every manifest rule in this crate reduces to one of these questions, so
//! the functions here are deliberately small and pure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UrlError {
    #[error("unresolvable reference {reference:?}: {reason}")]
    UnresolvableReference { reference: String, reason: String },
    #[error("not an absolute http(s) URL: {0:?}")]
    NotAbsolute(String),
}

/// An absolute `http` or `https` URL.
///
/// The path always begins with `/`; default ports are filled in by
/// [`AbsoluteUrl::port`].
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbsoluteUrl(Url);

impl AbsoluteUrl {
    pub fn parse(text: &str) -> Result<Self, UrlError> {
        let url = Url::parse(text.trim()).map_err(|_| UrlError::NotAbsolute(text.to_string()))?;
        Self::from_url(url).ok_or_else(|| UrlError::NotAbsolute(text.to_string()))
    }

    fn from_url(url: Url) -> Option<Self> {
        match url.scheme() {
            "http" | "https" if url.host_str().is_some() => Some(Self(url)),
            _ => None,
        }
    }

    pub fn scheme(&self) -> &str {
        self.0.scheme()
    }

    pub fn host(&self) -> &str {
        self.0.host_str().unwrap_or_default()
    }

    pub fn port(&self) -> u16 {
        // http(s) always has a known default
        self.0.port_or_known_default().unwrap_or(0)
    }

    pub fn path(&self) -> &str {
        self.0.path()
    }

    pub fn query(&self) -> Option<&str> {
        self.0.query()
    }

    pub fn fragment(&self) -> Option<&str> {
        self.0.fragment()
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }

    pub fn as_url(&self) -> &Url {
        &self.0
    }

    /// Decoded `(name, value)` pairs of the query string.
    pub fn query_pairs(&self) -> Vec<(String, String)> {
        self.0
            .query_pairs()
            .map(|(k, v)| (k.into_owned(), v.into_owned()))
            .collect()
    }

    /// The URL with its last path segment removed: `https://a.com/app/index.html`
    /// becomes `https://a.com/app/`.
    pub fn directory(&self) -> AbsoluteUrl {
        let mut url = self.0.clone();
        let path = url.path();
        let dir = match path.rfind('/') {
            Some(i) => path[..=i].to_string(),
            None => "/".to_string(),
        };
        url.set_path(&dir);
        url.set_query(None);
        url.set_fragment(None);
        AbsoluteUrl(url)
    }

    /// `scheme://host:port/path` with the port always explicit; the form used
    /// for scope prefix comparison.
    pub fn scope_key(&self) -> String {
        format!("{}://{}:{}{}", self.scheme(), self.host(), self.port(), self.path())
    }

    /// Whether the host is a loopback name or address.
    pub fn is_loopback(&self) -> bool {
        match self.0.host() {
            Some(url::Host::Domain(d)) => d.eq_ignore_ascii_case("localhost") || d.ends_with(".localhost"),
            Some(url::Host::Ipv4(ip)) => ip.is_loopback(),
            Some(url::Host::Ipv6(ip)) => ip.is_loopback(),
            None => false,
        }
    }

    /// https, or http on a loopback host.
    pub fn is_secure_context(&self) -> bool {
        self.scheme() == "https" || self.is_loopback()
    }
}

impl fmt::Display for AbsoluteUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.as_str())
    }
}

impl fmt::Debug for AbsoluteUrl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AbsoluteUrl({})", self.0.as_str())
    }
}

impl FromStr for AbsoluteUrl {
    type Err = UrlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for AbsoluteUrl {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AbsoluteUrl {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AbsoluteUrl::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub scheme: String,
    pub host: String,
    pub port: u16,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let default = matches!((self.scheme.as_str(), self.port), ("http", 80) | ("https", 443));
        if default {
            write!(f, "{}://{}", self.scheme, self.host)
        } else {
            write!(f, "{}://{}:{}", self.scheme, self.host, self.port)
        }
    }
}

/// Resolve `reference` against `base` with dot-segment removal. `../` chains
/// that climb above the root clamp at `/`.
pub fn resolve(base: &AbsoluteUrl, reference: &str) -> Result<AbsoluteUrl, UrlError> {
    let trimmed = reference.trim();
    if let Some(scheme) = leading_scheme(trimmed) {
        if !scheme.eq_ignore_ascii_case("http") && !scheme.eq_ignore_ascii_case("https") {
            return Err(UrlError::UnresolvableReference {
                reference: reference.to_string(),
                reason: format!("scheme {scheme:?} is not analyzed"),
            });
        }
    }
    let joined = base.0.join(trimmed).map_err(|e| UrlError::UnresolvableReference {
        reference: reference.to_string(),
        reason: e.to_string(),
    })?;
    AbsoluteUrl::from_url(joined).ok_or_else(|| UrlError::UnresolvableReference {
        reference: reference.to_string(),
        reason: "resolved to a non-http(s) URL".to_string(),
    })
}

/// The scheme of `text` if it starts with one (`scheme:`), per RFC 3986.
pub(crate) fn leading_scheme(text: &str) -> Option<&str> {
    let colon = text.find(':')?;
    let candidate = &text[..colon];
    let mut chars = candidate.chars();
    let first = chars.next()?;
    if first.is_ascii_alphabetic() && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.')) {
        Some(candidate)
    } else {
        None
    }
}

/// Whether `reference` carries its own authority (`//host` or `scheme://host`).
pub fn has_authority(reference: &str) -> bool {
    let t = reference.trim();
    if t.starts_with("//") || t.starts_with("\\\\") {
        return true;
    }
    leading_scheme(t).is_some()
}

pub fn origin_of(url: &AbsoluteUrl) -> Origin {
    Origin {
        scheme: url.scheme().to_ascii_lowercase(),
        host: url.host().to_string(),
        port: url.port(),
    }
}

pub fn same_origin(a: &AbsoluteUrl, b: &AbsoluteUrl) -> bool {
    origin_of(a) == origin_of(b)
}

/// Scope membership: same origin and a code-unit prefix match on the path.
/// Query and fragment are ignored, so `/app` admits `/approot`.
pub fn within_scope(url: &AbsoluteUrl, scope: &AbsoluteUrl) -> bool {
    same_origin(url, scope) && url.path().starts_with(scope.path())
}

/// True for `..`, anything starting with `../`, or anything containing a
/// `/../` segment (after trimming whitespace).
pub fn is_parent_path_ref(reference: &str) -> bool {
    let t = reference.trim();
    t == ".." || t.starts_with("../") || t.contains("/../") || t.ends_with("/..")
}
