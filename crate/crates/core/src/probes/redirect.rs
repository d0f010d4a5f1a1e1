use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{html, Fetched, ProbeError, Prober};
use crate::lint::REDIRECT_PARAMS;
use crate::url_semantics::{resolve, same_origin, AbsoluteUrl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HopMechanism {
    #[serde(rename = "http_3xx")]
    Http3xx,
    #[serde(rename = "meta_refresh")]
    MetaRefresh,
    #[serde(rename = "detected_js_pattern")]
    DetectedJsPattern,
}

/// One URL in a redirect chain. `status` is the response to fetching this
/// URL; JS targets are never fetched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectHop {
    pub url: AbsoluteUrl,
    pub mechanism: Option<HopMechanism>,
    pub status: Option<u16>,
}

/// A script redirect seen in a page body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JsRedirect {
    /// Index of the chain entry whose body contained the pattern.
    pub page: usize,
    pub pattern: String,
    /// The literal target, when the assignment used one.
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectReport {
    pub chain: Vec<RedirectHop>,
    pub cross_origin_hops: Vec<usize>,
    pub suspicious_params: Vec<(String, String)>,
    pub js_redirects: Vec<JsRedirect>,
    pub truncated: bool,
}

static JS_PATTERNS: LazyLock<Vec<(&'static str, Regex)>> = LazyLock::new(|| {
    let lit = r#"(?:(['"`])([^'"`]*)['"`])"#;
    vec![
        ("window.location.assign", Regex::new(&format!(r"window\.location\.assign\s*\(\s*{lit}?")).unwrap()),
        ("window.location.href", Regex::new(&format!(r"window\.location\.href\s*=\s*(?:{lit}|[^=\s])")).unwrap()),
        ("window.location", Regex::new(&format!(r"window\.location\s*=\s*(?:{lit}|[^=\s])")).unwrap()),
    ]
});

static REFRESH_CONTENT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)^\s*[\d.]*\s*[;,]?\s*(?:url\s*=\s*)?['"]?([^'"]*)['"]?\s*$"#).unwrap()
});

fn js_redirects(body: &str) -> Vec<(String, Option<String>)> {
    let body = html::strip_comments(body);
    let mut out = Vec::new();
    for (name, re) in JS_PATTERNS.iter() {
        for c in re.captures_iter(&body) {
            out.push((name.to_string(), c.get(2).map(|m| m.as_str().to_string())));
        }
    }
    out
}

fn meta_refresh(body: &str) -> Option<String> {
    html::tags(body, "meta").into_iter().find_map(|attrs| {
        let refresh = html::attr(&attrs, "http-equiv").is_some_and(|v| v.trim().eq_ignore_ascii_case("refresh"));
        if !refresh {
            return None;
        }
        let content = html::attr(&attrs, "content")?;
        let target = REFRESH_CONTENT.captures(content)?.get(1)?.as_str().trim().to_string();
        (!target.is_empty()).then_some(target)
    })
}

fn is_html(f: &Fetched) -> bool {
    f.header("content-type").is_none_or(|ct| ct.to_ascii_lowercase().contains("html"))
}

/// Follow `url` through HTTP redirects and meta refreshes, noting script
/// redirects without running them.
pub fn redirect_probe(prober: &Prober, url: &AbsoluteUrl, max_hops: usize) -> Result<RedirectReport, ProbeError> {
    let max_hops = max_hops.max(1);
    let mut report = RedirectReport {
        chain: vec![RedirectHop { url: url.clone(), mechanism: None, status: None }],
        cross_origin_hops: Vec::new(),
        suspicious_params: Vec::new(),
        js_redirects: Vec::new(),
        truncated: false,
    };
    let mut current = 0;
    loop {
        let page_url = report.chain[current].url.clone();
        let fetched = match prober.get(&page_url) {
            Ok(f) => f,
            Err(e) if current == 0 => return Err(e),
            Err(e) => {
                log::info!("redirect chain stopped at {page_url}: {e}");
                report.truncated = true;
                break;
            }
        };
        report.chain[current].status = Some(fetched.status);

        let mut next: Option<(String, HopMechanism)> = None;
        if fetched.is_redirect() {
            next = fetched.header("location").map(|l| (l.to_string(), HopMechanism::Http3xx));
        } else if fetched.is_success() && is_html(&fetched) {
            for (pattern, target) in js_redirects(&fetched.body) {
                let resolved = target.as_deref().and_then(|t| resolve(&page_url, t).ok());
                report.js_redirects.push(JsRedirect { page: current, pattern, target });
                if let Some(t) = resolved {
                    push_hop(&mut report, current, t, HopMechanism::DetectedJsPattern, max_hops);
                }
            }
            next = meta_refresh(&fetched.body).map(|t| (t, HopMechanism::MetaRefresh));
        }

        let Some((target, mechanism)) = next else { break };
        let Ok(target) = resolve(&page_url, &target) else {
            log::info!("unresolvable redirect target {target:?} from {page_url}");
            report.truncated = true;
            break;
        };
        if !push_hop(&mut report, current, target, mechanism, max_hops) {
            break;
        }
        current = report.chain.len() - 1;
    }

    for hop in &report.chain {
        for (k, v) in hop.url.query_pairs() {
            let pair = (k.clone(), v);
            if REDIRECT_PARAMS.contains(&k.to_ascii_lowercase().as_str()) && !report.suspicious_params.contains(&pair) {
                report.suspicious_params.push(pair);
            }
        }
    }
    Ok(report)
}

/// Append a hop unless the chain is full, in which case mark it truncated.
fn push_hop(report: &mut RedirectReport, from: usize, url: AbsoluteUrl, mechanism: HopMechanism, max_hops: usize) -> bool {
    if report.chain.len() > max_hops {
        report.truncated = true;
        return false;
    }
    if !same_origin(&report.chain[from].url, &url) {
        report.cross_origin_hops.push(report.chain.len());
    }
    report.chain.push(RedirectHop { url, mechanism: Some(mechanism), status: None });
    true
}
