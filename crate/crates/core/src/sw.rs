//! Service-worker cache strategy classification.
//!
//! Lexical only: comments are blanked, fetch handlers are located, and the
//! order of cache reads, network fetches and cache writes inside each handler
//! decides the strategy. Workbox strategy constructors are recognized
//! anywhere in the file. Nothing is executed.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lint::{Finding, RuleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStrategy {
    CacheFirst,
    NetworkFirst,
    CacheOnly,
    NetworkOnly,
    StaleWhileRevalidate,
    Unknown,
}

impl CacheStrategy {
    /// Higher is riskier for update delivery.
    fn risk_rank(self) -> u8 {
        match self {
            CacheStrategy::CacheOnly => 5,
            CacheStrategy::NetworkOnly => 4,
            CacheStrategy::CacheFirst => 3,
            CacheStrategy::NetworkFirst => 2,
            CacheStrategy::StaleWhileRevalidate => 1,
            CacheStrategy::Unknown => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CacheStrategy::CacheFirst => "cache_first",
            CacheStrategy::NetworkFirst => "network_first",
            CacheStrategy::CacheOnly => "cache_only",
            CacheStrategy::NetworkOnly => "network_only",
            CacheStrategy::StaleWhileRevalidate => "stale_while_revalidate",
            CacheStrategy::Unknown => "unknown",
        }
    }
}

impl fmt::Display for CacheStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    PatternMatch,
    Heuristic,
    Unknown,
}

/// 1-based inclusive line range in the original source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpan {
    pub start_line: usize,
    pub end_line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub pattern: String,
    pub span: LineSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwClassification {
    pub strategy: CacheStrategy,
    pub confidence: Confidence,
    pub evidence: Vec<Evidence>,
}

impl SwClassification {
    fn unknown() -> Self {
        Self { strategy: CacheStrategy::Unknown, confidence: Confidence::Unknown, evidence: Vec::new() }
    }
}

/// Replace the contents of comments (and, with `strings`, string literals)
/// by spaces. Byte offsets and newlines are preserved.
fn blank(source: &str, strings: bool) -> String {
    let b = source.as_bytes();
    let mut out = b.to_vec();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'/' if b.get(i + 1) == Some(&b'/') => {
                while i < b.len() && b[i] != b'\n' {
                    out[i] = b' ';
                    i += 1;
                }
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                let start = i;
                i += 2;
                while i < b.len() && !(b[i] == b'*' && b.get(i + 1) == Some(&b'/')) {
                    i += 1;
                }
                let end = (i + 2).min(b.len());
                for c in &mut out[start..end] {
                    if *c != b'\n' {
                        *c = b' ';
                    }
                }
                i = end;
            }
            q @ (b'\'' | b'"' | b'`') => {
                i += 1;
                while i < b.len() && b[i] != q {
                    if b[i] == b'\\' && i + 1 < b.len() {
                        if strings {
                            out[i] = b' ';
                            if b[i + 1] != b'\n' {
                                out[i + 1] = b' ';
                            }
                        }
                        i += 2;
                        continue;
                    }
                    if strings && b[i] != b'\n' {
                        out[i] = b' ';
                    }
                    i += 1;
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    // only ASCII bytes were overwritten with ASCII spaces, and every byte of a
    // multi-byte character inside a comment or string is replaced together
    String::from_utf8(out).unwrap_or_else(|e| String::from_utf8_lossy(e.as_bytes()).into_owned())
}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())].iter().filter(|&&c| c == b'\n').count() + 1
}

fn span(text: &str, start: usize, end: usize) -> LineSpan {
    LineSpan { start_line: line_of(text, start), end_line: line_of(text, end.saturating_sub(1).max(start)) }
}

/// Index just past the bracket closing the one opened before `from`, with
/// `depth` brackets already open. Operates on string-blanked text.
fn close_of(text: &[u8], from: usize, mut depth: i32) -> usize {
    let mut i = from;
    while i < text.len() {
        match text[i] {
            b'(' | b'{' | b'[' => depth += 1,
            b')' | b'}' | b']' => {
                depth -= 1;
                if depth == 0 {
                    return i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    text.len()
}

static ADD_LISTENER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"addEventListener\s*\(\s*['"`]fetch['"`]\s*,"#).unwrap());
static ON_FETCH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bonfetch\s*=").unwrap());
static CACHE_READ: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(?:caches|[A-Za-z_$][\w$]*)\s*\.\s*match(?:All)?\s*\(").unwrap());
static NETWORK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bfetch\s*\(").unwrap());
static CACHE_WRITE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\.\s*(?:put|addAll|add)\s*\(").unwrap());
static FETCH_BINDING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(?:const|let|var)\s+([A-Za-z_$][\w$]*)\s*=\s*fetch\s*\(").unwrap());
static WAIT_UNTIL_FETCH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bwaitUntil\s*\(\s*(?:[\w$.]+\s*\(\s*)?fetch\s*\(").unwrap());
static WORKBOX: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?:\bnew\s+(?:[\w$]+\s*\.\s*)*(CacheFirst|NetworkFirst|CacheOnly|NetworkOnly|StaleWhileRevalidate)|\bstrategies\s*\.\s*(cacheFirst|networkFirst|cacheOnly|networkOnly|staleWhileRevalidate))\s*\(",
    )
    .unwrap()
});

struct Handler {
    start: usize,
    end: usize,
}

fn find_handlers(code: &str, tokens: &str) -> Vec<Handler> {
    let bytes = tokens.as_bytes();
    let mut handlers = Vec::new();
    for m in ADD_LISTENER.find_iter(code) {
        // the listener call's own '(' is already open
        let end = close_of(bytes, m.end(), 1);
        handlers.push(Handler { start: m.start(), end });
    }
    for m in ON_FETCH.find_iter(code) {
        let rest = &bytes[m.end()..];
        let end = match rest.iter().position(|&c| c == b'{' || c == b';') {
            Some(p) if rest[p] == b'{' => close_of(bytes, m.end() + p + 1, 1),
            Some(p) => m.end() + p,
            None => bytes.len(),
        };
        handlers.push(Handler { start: m.start(), end });
    }
    handlers.sort_by_key(|h| h.start);
    handlers
}

fn classify_handler(source: &str, tokens: &str, h: &Handler) -> Option<(CacheStrategy, Vec<Evidence>)> {
    let region = &tokens[h.start..h.end];
    let at = |offset: usize| h.start + offset;
    let read = CACHE_READ.find(region);
    let net = NETWORK.find(region);
    let write = CACHE_WRITE.find(region);

    let mut evidence = vec![Evidence { pattern: "fetch_handler".into(), span: span(source, h.start, h.end) }];
    let mut note = |name: &str, m: regex::Match| {
        evidence.push(Evidence { pattern: name.into(), span: span(source, at(m.start()), at(m.end())) });
    };

    let strategy = match (read, net) {
        (None, None) => return None,
        (Some(r), None) => {
            note("cache_read", r);
            CacheStrategy::CacheOnly
        }
        (None, Some(n)) => {
            note("network_fetch", n);
            CacheStrategy::NetworkOnly
        }
        (Some(r), Some(n)) => {
            note("cache_read", r);
            note("network_fetch", n);
            let background = swr_signal(region);
            match (background, write) {
                (Some(b), Some(w)) => {
                    note("cache_write", w);
                    evidence.push(Evidence {
                        pattern: "background_revalidate".into(),
                        span: span(source, at(b.0), at(b.1)),
                    });
                    CacheStrategy::StaleWhileRevalidate
                }
                _ if r.start() < n.start() => CacheStrategy::CacheFirst,
                _ => CacheStrategy::NetworkFirst,
            }
        }
    };
    Some((strategy, evidence))
}

/// A fetch started independently of the cache lookup: either bound to a
/// variable that is later returned as the `||`/`??` fallback of the cached
/// response, or kept alive with `waitUntil`.
fn swr_signal(region: &str) -> Option<(usize, usize)> {
    for caps in FETCH_BINDING.captures_iter(region) {
        let whole = caps.get(0).unwrap();
        let name = regex::escape(&caps[1]);
        let fallback = Regex::new(&format!(r"(?:\|\||\?\?)\s*{name}\b")).unwrap();
        if fallback.is_match(&region[whole.end()..]) {
            return Some((whole.start(), whole.end()));
        }
    }
    WAIT_UNTIL_FETCH.find(region).map(|m| (m.start(), m.end()))
}

fn workbox_strategy(name: &str) -> CacheStrategy {
    match name.to_ascii_lowercase().as_str() {
        "cachefirst" => CacheStrategy::CacheFirst,
        "networkfirst" => CacheStrategy::NetworkFirst,
        "cacheonly" => CacheStrategy::CacheOnly,
        "networkonly" => CacheStrategy::NetworkOnly,
        _ => CacheStrategy::StaleWhileRevalidate,
    }
}

pub fn classify_sw(source: &str) -> SwClassification {
    let code = blank(source, false);
    let tokens = blank(source, true);

    let mut found: Vec<(CacheStrategy, Vec<Evidence>)> = Vec::new();
    for h in find_handlers(&code, &tokens) {
        if let Some(hit) = classify_handler(source, &tokens, &h) {
            found.push(hit);
        }
    }
    for caps in WORKBOX.captures_iter(&tokens) {
        let whole = caps.get(0).unwrap();
        let name = caps.get(1).or_else(|| caps.get(2)).unwrap().as_str();
        let strategy = workbox_strategy(name);
        found.push((
            strategy,
            vec![Evidence {
                pattern: format!("workbox_{}", strategy.as_str()),
                span: span(source, whole.start(), whole.end()),
            }],
        ));
    }

    let Some(riskiest) = found.iter().map(|(s, _)| *s).max_by_key(|s| s.risk_rank()) else {
        return SwClassification::unknown();
    };
    let conflicting = found.iter().any(|(s, _)| *s != riskiest);
    SwClassification {
        strategy: riskiest,
        confidence: if conflicting { Confidence::Heuristic } else { Confidence::PatternMatch },
        evidence: found.into_iter().flat_map(|(_, e)| e).collect(),
    }
}

/// SEC-SW-CACHEONLY for cache-only workers.
pub fn cache_only_risk(classification: &SwClassification) -> Option<Finding> {
    (classification.strategy == CacheStrategy::CacheOnly).then(|| {
        Finding::new(
            RuleId::SecSwCacheonly,
            "service_worker",
            "fetch handling never consults the network, so updated content is never served",
        )
    })
}
