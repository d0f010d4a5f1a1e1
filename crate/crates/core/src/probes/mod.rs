//! Network checks against live sites: manifest discovery and fetch, redirect
//! chains, framing protection and manifest update watching.
//!
//! All requests go through [`Prober`], which never follows redirects on its
//! own, applies one timeout to every request and retries once when the
//! connection fails. Loopback hosts always bypass the configured proxy.

mod frame;
mod html;
mod redirect;
mod watch;

use std::time::Duration;

use thiserror::Error;
use ureq::Agent;

use crate::manifest::{parse_manifest, RawManifest};
use crate::url_semantics::{resolve, AbsoluteUrl};

pub use frame::{frame_protection_probe, frame_verdict, FrameReport};
pub use redirect::{redirect_probe, HopMechanism, JsRedirect, RedirectHop, RedirectReport};
pub use watch::{
    diff_fields, is_update_triggering, poll, watch_manifest, FieldChange, PollOutcome, StoredVersion, UpdateDiff, WatchStore,
    UPDATE_TRIGGERING_FIELDS,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(15);
pub const DEFAULT_MAX_HOPS: usize = 10;
const MAX_BODY_BYTES: u64 = 5 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("fetching {url} failed: {message}")]
    FetchFailure { url: String, status: Option<u16>, message: String },
    #[error("{0} has no <link rel=\"manifest\">")]
    NoManifestLink(String),
    #[error("malformed manifest JSON at {url}: {message}")]
    MalformedJson { url: String, message: String },
    #[error("invalid URL: {0}")]
    InvalidUrl(String),
    #[error("watch store: {0}")]
    Store(#[from] std::io::Error),
}

impl ProbeError {
    /// HTTP status of a failed fetch, if the server answered.
    pub fn status(&self) -> Option<u16> {
        match self {
            ProbeError::FetchFailure { status, .. } => *status,
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub timeout: Duration,
    pub user_agent: String,
    /// Proxy URI such as `http://proxy:3128`.
    pub proxy: Option<String>,
    pub retries: u32,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
            user_agent: format!("pwa-sentinel/{}", env!("CARGO_PKG_VERSION")),
            proxy: None,
            retries: 1,
        }
    }
}

impl ProbeConfig {
    /// Defaults with the proxy taken from `HTTPS_PROXY`, `HTTP_PROXY` or
    /// `ALL_PROXY` (either case).
    pub fn from_env() -> Self {
        let proxy = ["HTTPS_PROXY", "https_proxy", "HTTP_PROXY", "http_proxy", "ALL_PROXY", "all_proxy"]
            .iter()
            .find_map(|k| std::env::var(k).ok().filter(|v| !v.trim().is_empty()));
        Self { proxy, ..Self::default() }
    }
}

/// One HTTP response, body decoded lossily as UTF-8.
#[derive(Debug, Clone)]
pub struct Fetched {
    pub url: AbsoluteUrl,
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Fetched {
    /// All values of a header, case-insensitively.
    pub fn header_values(&self, name: &str) -> Vec<&str> {
        self.headers
            .iter()
            .filter(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.header_values(name).into_iter().next()
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn is_redirect(&self) -> bool {
        (300..400).contains(&self.status)
    }
}

pub struct Prober {
    config: ProbeConfig,
    direct: Agent,
    proxied: Option<Agent>,
}

fn agent(config: &ProbeConfig, proxy: Option<ureq::Proxy>) -> Agent {
    Agent::config_builder()
        .timeout_global(Some(config.timeout))
        .max_redirects(0)
        .http_status_as_error(false)
        .user_agent(config.user_agent.as_str())
        .proxy(proxy)
        .build()
        .into()
}

impl Prober {
    pub fn new(config: ProbeConfig) -> Result<Self, ProbeError> {
        let proxied = match &config.proxy {
            Some(p) => {
                let proxy = ureq::Proxy::new(p).map_err(|e| ProbeError::InvalidUrl(format!("proxy {p:?}: {e}")))?;
                Some(agent(&config, Some(proxy)))
            }
            None => None,
        };
        let direct = agent(&config, None);
        Ok(Self { config, direct, proxied })
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.config
    }

    fn agent_for(&self, url: &AbsoluteUrl) -> &Agent {
        match &self.proxied {
            Some(p) if !url.is_loopback() => p,
            _ => &self.direct,
        }
    }

    /// A single GET, no redirect following.
    pub fn get(&self, url: &AbsoluteUrl) -> Result<Fetched, ProbeError> {
        let fail = |status: Option<u16>, message: String| ProbeError::FetchFailure {
            url: url.to_string(),
            status,
            message,
        };
        let mut attempt = 0;
        let mut response = loop {
            match self.agent_for(url).get(url.as_str()).call() {
                Ok(r) => break r,
                Err(e @ (ureq::Error::Io(_) | ureq::Error::ConnectionFailed)) if attempt < self.config.retries => {
                    log::debug!("retrying {url} after {e}");
                    attempt += 1;
                }
                Err(e) => return Err(fail(None, e.to_string())),
            }
        };
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), String::from_utf8_lossy(v.as_bytes()).into_owned()))
            .collect();
        let bytes = response
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_vec()
            .map_err(|e| fail(Some(status), e.to_string()))?;
        Ok(Fetched { url: url.clone(), status, headers, body: String::from_utf8_lossy(&bytes).into_owned() })
    }

    fn get_ok(&self, url: &AbsoluteUrl) -> Result<Fetched, ProbeError> {
        let f = self.get(url)?;
        if f.is_success() {
            Ok(f)
        } else {
            Err(ProbeError::FetchFailure { url: url.to_string(), status: Some(f.status), message: format!("HTTP {}", f.status) })
        }
    }
}

/// The first `<link rel="manifest">` href of the page, resolved against the
/// page URL.
pub fn discover_manifest(prober: &Prober, page_url: &AbsoluteUrl) -> Result<AbsoluteUrl, ProbeError> {
    let page = prober.get_ok(page_url)?;
    manifest_link(&page.body, page_url)
}

/// [`discover_manifest`] on an already fetched page.
pub fn manifest_link(html_text: &str, page_url: &AbsoluteUrl) -> Result<AbsoluteUrl, ProbeError> {
    html::tags(html_text, "link")
        .into_iter()
        .filter(|attrs| {
            html::attr(attrs, "rel")
                .is_some_and(|rel| rel.split_ascii_whitespace().any(|r| r.eq_ignore_ascii_case("manifest")))
        })
        .find_map(|attrs| html::attr(&attrs, "href").and_then(|href| resolve(page_url, href).ok()))
        .ok_or_else(|| ProbeError::NoManifestLink(page_url.to_string()))
}

#[derive(Debug, Clone)]
pub struct FetchedManifest {
    pub raw: RawManifest,
    pub status: u16,
    pub headers: Vec<(String, String)>,
    /// https, or http on a loopback host.
    pub secure_context: bool,
}

/// Fetch and parse a manifest. `document_url` defaults to the manifest URL.
pub fn fetch_manifest(
    prober: &Prober,
    url: &AbsoluteUrl,
    document_url: Option<&AbsoluteUrl>,
) -> Result<FetchedManifest, ProbeError> {
    let f = prober.get_ok(url)?;
    let raw = parse_manifest(&f.body, url, document_url.unwrap_or(url))
        .map_err(|e| ProbeError::MalformedJson { url: url.to_string(), message: e.to_string() })?;
    Ok(FetchedManifest { raw, status: f.status, headers: f.headers, secure_context: url.is_secure_context() })
}
