use serde::{Deserialize, Serialize};

use super::{ProbeError, Prober};
use crate::url_semantics::AbsoluteUrl;

/// Whether a page can be embedded by a foreign origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameReport {
    pub url: AbsoluteUrl,
    pub status: u16,
    pub x_frame_options: Option<String>,
    pub csp_frame_ancestors: Option<String>,
    pub frameable: bool,
}

/// `frame-ancestors` values from every Content-Security-Policy header.
fn frame_ancestors<'a>(csp_headers: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    csp_headers
        .into_iter()
        .flat_map(|h| h.split(';'))
        .filter_map(|directive| {
            let mut parts = directive.split_ascii_whitespace();
            let name = parts.next()?;
            name.eq_ignore_ascii_case("frame-ancestors").then(|| parts.collect::<Vec<_>>().join(" "))
        })
        .collect()
}

/// A foreign prober is admitted only by `*` or a bare scheme source.
fn admits_foreign(sources: &str) -> bool {
    sources
        .split_ascii_whitespace()
        .any(|s| s == "*" || s.eq_ignore_ascii_case("https:") || s.eq_ignore_ascii_case("http:"))
}

/// The framing verdict for a set of response headers.
///
/// Not frameable when X-Frame-Options is DENY or SAMEORIGIN, or when any
/// frame-ancestors directive leaves out a foreign origin.
pub fn frame_verdict(x_frame_options: Option<&str>, csp_headers: &[&str]) -> (bool, Option<String>) {
    let xfo_blocks = x_frame_options.is_some_and(|v| {
        v.split(',').any(|t| {
            let t = t.trim();
            t.eq_ignore_ascii_case("deny") || t.eq_ignore_ascii_case("sameorigin")
        })
    });
    let ancestors = frame_ancestors(csp_headers.iter().copied());
    let csp_blocks = ancestors.iter().any(|a| !admits_foreign(a));
    let shown = (!ancestors.is_empty()).then(|| ancestors.join(", "));
    (!(xfo_blocks || csp_blocks), shown)
}

/// One GET, then the verdict from its headers.
pub fn frame_protection_probe(prober: &Prober, url: &AbsoluteUrl) -> Result<FrameReport, ProbeError> {
    let f = prober.get(url)?;
    let xfo = f.header_values("x-frame-options");
    let xfo = (!xfo.is_empty()).then(|| xfo.join(", "));
    let csp = f.header_values("content-security-policy");
    let (frameable, csp_frame_ancestors) = frame_verdict(xfo.as_deref(), &csp);
    Ok(FrameReport { url: url.clone(), status: f.status, x_frame_options: xfo, csp_frame_ancestors, frameable })
}
