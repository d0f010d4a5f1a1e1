//! Acceptance criteria 1-11. Runs without the libtest harness so each
//! criterion prints exactly one PASS/FAIL line; exits non-zero on any failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestCaseError, TestRunner};
use regex::Regex;
use serde_json::{json, Map, Value};

use common::strategies::{corpus_entries, corpus_jsonl, document, manifest_fields};
use common::{cli, Fixture};
use pwa_sentinel::catalog::{cia_tally, Catalog};
use pwa_sentinel::corpus::{duplicate_names, duplicate_summary, ingest, CorpusFormat};
use pwa_sentinel::fuzz::{generate_plan, generate_mutants, spawn_server, FieldSchema, FuzzSession, OperatorId, Status};
use pwa_sentinel::lint::{Cia, InstallMode, LintOptions, PLACEHOLDER_DOCUMENT_URL};
use pwa_sentinel::manifest::{normalize, parse_manifest, RawManifest};
use pwa_sentinel::probes::{frame_protection_probe, poll, redirect_probe, HopMechanism, PollOutcome, ProbeConfig, Prober, WatchStore};
use pwa_sentinel::sw::classify_sw;
use pwa_sentinel::url_semantics::{resolve, same_origin, within_scope, AbsoluteUrl};
use pwa_sentinel::{LintReport, RuleId};

type Outcome = Result<String, String>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn url(s: &str) -> AbsoluteUrl {
    AbsoluteUrl::parse(s).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn raw_from(fields: Map<String, Value>, doc: &str) -> RawManifest {
    let d = url(doc);
    let src = resolve(&d, "/manifest.json").unwrap();
    parse_manifest(&Value::Object(fields).to_string(), &src, &d).unwrap()
}

// 1 ---------------------------------------------------------------------

fn catalog_fidelity() -> Outcome {
    let start = Instant::now();
    let (code, out, err) = cli(&["--format", "json", "catalog", "tally"]);
    let elapsed = start.elapsed();
    ensure(code == 0, || format!("exit {code}: {err}"))?;
    let v: Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let got = (v["c"].as_u64(), v["i"].as_u64(), v["a"].as_u64(), v["total"].as_u64());
    ensure(got == (Some(84), Some(114), Some(5), Some(203)), || format!("tally {got:?}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("C=84 I=114 A=5 total=203 in {elapsed:.2?}"))
}

// 2 ---------------------------------------------------------------------

fn catalog_cross_check() -> Outcome {
    let catalog = Catalog::load().map_err(|e| e.to_string())?;
    let rows = &catalog.violations;
    ensure(rows.len() == 25, || format!("{} rows", rows.len()))?;
    let mut per_letter: BTreeMap<char, u32> = BTreeMap::new();
    let mut total = 0;
    for r in rows {
        *per_letter.entry(r.cia.letter()).or_default() += r.browser_count;
        total += r.browser_count;
    }
    ensure(total == 203, || format!("row sum {total}"))?;
    let expected: BTreeMap<char, u32> = [('A', 5), ('C', 84), ('I', 114)].into_iter().collect();
    ensure(per_letter == expected, || format!("per letter {per_letter:?}"))?;
    let t = cia_tally(rows);
    ensure((t.c, t.i, t.a, t.total) == (84, 114, 5, 203), || format!("tally {t:?}"))?;
    ensure(rows.iter().all(|r| matches!(r.cia, Cia::C | Cia::I | Cia::A) && r.browser_count >= 1), || {
        "row with zero browsers".into()
    })?;
    Ok("25 rows sum to 203; per-letter sums 84/114/5".into())
}

// 3 ---------------------------------------------------------------------

fn lint_fixture_oracle() -> Outcome {
    let dir = fixtures().join("lint");
    let truth: Value = serde_json::from_str(&fs::read_to_string(dir.join("truth.json")).unwrap()).unwrap();
    let corpus = ingest(&dir.join(truth["corpus"].as_str().unwrap()), CorpusFormat::Jsonl).map_err(|e| e.to_string())?;
    let cases = truth["fixtures"].as_array().unwrap();
    ensure(cases.len() == 30, || format!("{} fixtures", cases.len()))?;
    let mut planted = 0;
    let mut problems = Vec::new();
    for case in cases {
        let file = case["file"].as_str().unwrap();
        let doc = url(case["document_url"].as_str().unwrap_or(PLACEHOLDER_DOCUMENT_URL));
        let src = resolve(&doc, file).unwrap();
        let text = fs::read_to_string(dir.join(file)).unwrap();
        let report = match parse_manifest(&text, &src, &doc) {
            Ok(raw) => LintReport::build(&raw, Some(&corpus), &LintOptions::default(), false),
            Err(e) => LintReport::malformed(&src, &doc, &e.to_string()),
        };
        let mut got: Vec<String> =
            report.findings.iter().map(|f| format!("{}:{}", f.rule_id, f.severity.as_str())).collect();
        got.sort();
        let want: Vec<String> =
            case["expected"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
        planted += want.len();
        if got != want {
            problems.push(format!("{file}: expected {want:?}, got {got:?}"));
        }
    }
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(format!("30 fixtures, {planted} planted findings, no misses or extras (incl. 1000/1001 name pair)"))
}

// 4 ---------------------------------------------------------------------

fn normalization_invariants() -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let cases = std::cell::Cell::new(0u32);
    let result = runner.run(&(manifest_fields(), document()), |(fields, doc)| {
        cases.set(cases.get() + 1);
        let raw = raw_from(fields, doc);
        let m = normalize(&raw);
        if !same_origin(&m.start_url, &m.document_url) {
            return Err(TestCaseError::fail(format!("start_url {} not on {}", m.start_url, m.document_url)));
        }
        if !within_scope(&m.start_url, &m.scope) {
            return Err(TestCaseError::fail(format!("start_url {} outside scope {}", m.start_url, m.scope)));
        }
        let again = normalize(&m.to_raw());
        if again.without_notes() != m.without_notes() {
            return Err(TestCaseError::fail(format!("not idempotent: {m:?} vs {again:?}")));
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    let cases = cases.get();
    ensure(cases >= 1000, || format!("only {cases} cases"))?;
    Ok(format!("{cases} generated manifests: same-origin, in-scope, idempotent"))
}

// 5 ---------------------------------------------------------------------

/// RFC 3986 Appendix B split.
struct Parts {
    scheme: Option<String>,
    authority: Option<String>,
    path: String,
    query: Option<String>,
    fragment: Option<String>,
}

fn split(s: &str) -> Parts {
    let re = Regex::new(r"^(([^:/?#]+):)?(//([^/?#]*))?([^?#]*)(\?([^#]*))?(#(.*))?").unwrap();
    let c = re.captures(s).unwrap();
    let g = |i: usize| c.get(i).map(|m| m.as_str().to_string());
    Parts { scheme: g(2), authority: g(4), path: g(5).unwrap_or_default(), query: g(7), fragment: g(9) }
}

/// RFC 3986 section 5.2.4.
fn remove_dot_segments(path: &str) -> String {
    let mut input = path.to_string();
    let mut output = String::new();
    while !input.is_empty() {
        if let Some(rest) = input.strip_prefix("../") {
            input = rest.to_string();
        } else if let Some(rest) = input.strip_prefix("./") {
            input = rest.to_string();
        } else if input.starts_with("/./") {
            input = input[2..].to_string();
        } else if input == "/." {
            input = "/".to_string();
        } else if input.starts_with("/../") || input == "/.." {
            input = if input == "/.." { "/".to_string() } else { input[3..].to_string() };
            match output.rfind('/') {
                Some(i) => output.truncate(i),
                None => output.clear(),
            }
        } else if input == "." || input == ".." {
            input.clear();
        } else {
            let start = usize::from(input.starts_with('/'));
            let end = input[start..].find('/').map_or(input.len(), |i| i + start);
            output.push_str(&input[..end]);
            input = input[end..].to_string();
        }
    }
    output
}

fn oracle_resolve(base: &str, reference: &str) -> String {
    let b = split(base);
    let r = split(reference);
    let (scheme, authority, path, query);
    if r.scheme.is_some() {
        scheme = r.scheme.clone().unwrap();
        authority = r.authority.clone();
        path = remove_dot_segments(&r.path);
        query = r.query.clone();
    } else {
        scheme = b.scheme.clone().unwrap();
        if r.authority.is_some() {
            authority = r.authority.clone();
            path = remove_dot_segments(&r.path);
            query = r.query.clone();
        } else {
            authority = b.authority.clone();
            if r.path.is_empty() {
                path = b.path.clone();
                query = r.query.clone().or(b.query.clone());
            } else {
                path = if r.path.starts_with('/') {
                    remove_dot_segments(&r.path)
                } else {
                    let merged = match b.path.rfind('/') {
                        Some(i) => format!("{}{}", &b.path[..=i], r.path),
                        None => format!("/{}", r.path),
                    };
                    remove_dot_segments(&merged)
                };
                query = r.query.clone();
            }
        }
    }
    let scheme = scheme.to_ascii_lowercase();
    let mut authority = authority.unwrap_or_default().to_ascii_lowercase();
    for default in [("http", ":80"), ("https", ":443")] {
        if scheme == default.0 && authority.ends_with(default.1) {
            authority.truncate(authority.len() - default.1.len());
        }
    }
    let path = if path.is_empty() { "/".to_string() } else { path };
    let mut out = format!("{scheme}://{authority}{path}");
    if let Some(q) = query {
        out.push('?');
        out.push_str(&q);
    }
    if let Some(f) = r.fragment {
        out.push('#');
        out.push_str(&f);
    }
    out
}

fn oracle_origin(u: &str) -> (String, String, u16) {
    let p = split(u);
    let scheme = p.scheme.unwrap().to_ascii_lowercase();
    let auth = p.authority.unwrap().to_ascii_lowercase();
    let (host, port) = match auth.rsplit_once(':') {
        Some((h, port)) => (h.to_string(), port.parse().unwrap()),
        None => (auth.clone(), if scheme == "https" { 443 } else { 80 }),
    };
    (scheme, host, port)
}

fn oracle_within(u: &str, scope: &str) -> bool {
    oracle_origin(u) == oracle_origin(scope) && split(u).path.starts_with(&split(scope).path)
}

const ORACLE_BASES: &[&str] = &[
    "https://xw.qq.com/",
    "https://a.example/b/c/d;p?q",
    "http://a.example:8080/x/y/",
    "https://a.example/only",
];

const ORACLE_REFS: &[&str] = &[
    "", ".", "./", "..", "../", "../..", "../../../g", "g", "./g", "g/", "/g", "//other.example/g", "?y", "g?y", "#s",
    "g#s", "g?y#s", ";x", "g;x", "/./g", "/../g", "g/./h", "g/../h", ".g", "g..", "https://qq.com/",
    "https://xw.qq.com/news/", "http://a.example:8080/x/../y",
];

const ORACLE_SCOPES: &[&str] = &["https://a.example/b/", "https://xw.qq.com/", "http://a.example:8080/x/"];

fn url_semantics_oracle() -> Outcome {
    let mut triples = 0;
    let mut problems = Vec::new();
    for base in ORACLE_BASES {
        let b = url(base);
        for reference in ORACLE_REFS {
            let expected = oracle_resolve(base, reference);
            let got = resolve(&b, reference).map_err(|e| e.to_string())?;
            if got.as_str() != expected {
                problems.push(format!("resolve({base}, {reference:?}) = {got}, oracle {expected}"));
            }
            for scope in ORACLE_SCOPES {
                triples += 1;
                let w = within_scope(&got, &url(scope));
                if w != oracle_within(&expected, scope) {
                    problems.push(format!("within_scope({got}, {scope}) = {w}"));
                }
            }
        }
    }
    // the qq.com page whose start_url names the parent domain
    let raw = raw_from(json!({"name": "QQ", "start_url": "https://qq.com/"}).as_object().unwrap().clone(), "https://xw.qq.com/");
    let m = normalize(&raw);
    if !(m.start_url_fell_back && m.start_url == url("https://xw.qq.com/")) {
        problems.push(format!("qq.com start_url normalized to {}", m.start_url));
    }
    let report = LintReport::build(&raw, None, &LintOptions::default(), false);
    if !report.findings.iter().any(|f| f.rule_id == RuleId::SecSuXorigin) {
        problems.push("qq.com start_url not flagged cross-origin".into());
    }
    ensure(triples >= 200, || format!("only {triples} triples"))?;
    ensure(problems.is_empty(), || problems.join("; "))?;
    Ok(format!("{triples} (base, reference, scope) triples agree with the RFC 3986 oracle; qq.com falls back"))
}

// 6 ---------------------------------------------------------------------

fn corpus_identities() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut runner = TestRunner::new(Config { cases: 128, failure_persistence: None, ..Config::default() });
    let strategy = (corpus_entries(), any_seed());
    runner
        .run(&strategy, |(entries, seed)| {
            let rows: Vec<_> = entries.into_iter().enumerate().map(|(i, (n, s))| (i, n, s)).collect();
            let a = dir.path().join("a.jsonl");
            fs::write(&a, corpus_jsonl(&rows)).unwrap();
            let index = ingest(&a, CorpusFormat::Jsonl).unwrap();

            let dups = duplicate_names(&index);
            let summary = duplicate_summary(&index);
            let sum: u64 = dups.iter().map(|(_, c)| c).sum();
            if summary.affected_entries != sum {
                return Err(TestCaseError::fail(format!("affected {} vs sum {sum}", summary.affected_entries)));
            }
            let named = oracle_named(&rows);
            if index.name_counts.values().sum::<u64>() != named {
                return Err(TestCaseError::fail("name_counts do not sum to named entries"));
            }

            let mut shuffled = rows.clone();
            permute(&mut shuffled, seed);
            let b = dir.path().join("b.jsonl");
            fs::write(&b, corpus_jsonl(&shuffled)).unwrap();
            let other = ingest(&b, CorpusFormat::Jsonl).unwrap();
            if serde_json::to_value(&index).unwrap() != serde_json::to_value(&other).unwrap() {
                return Err(TestCaseError::fail("ingestion depends on input order"));
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("affected_entries = sum of duplicate counts; permuted corpora index identically (128 corpora)".into())
}

fn any_seed() -> impl proptest::strategy::Strategy<Value = u64> {
    proptest::num::u64::ANY
}

/// Entries with a non-blank name, counted without the crate's helpers.
fn oracle_named(rows: &[(usize, Option<String>, Option<String>)]) -> u64 {
    rows.iter().filter(|(_, n, _)| n.as_deref().is_some_and(|n| !n.trim().is_empty())).count() as u64
}

fn permute<T>(v: &mut [T], seed: u64) {
    let mut state = seed | 1;
    for i in (1..v.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        v.swap(i, (state % (i as u64 + 1)) as usize);
    }
}

// 7 ---------------------------------------------------------------------

fn fuzz_base() -> RawManifest {
    raw_from(
        json!({
            "name": "Fuzz Base",
            "short_name": "Fuzz",
            "id": "/",
            "start_url": "/app/",
            "scope": "/app/",
            "display": "standalone",
            "theme_color": "#123456",
            "icons": [{"src": "/icon-192.png", "sizes": "192x192"}]
        })
        .as_object()
        .unwrap()
        .clone(),
        "http://127.0.0.1:8080/",
    )
}

fn fuzzer_coverage() -> Outcome {
    let base = fuzz_base();
    let schema = FieldSchema::default();
    let start = Instant::now();
    let first = generate_mutants(&base, &schema, 42);
    let elapsed = start.elapsed();
    let second = generate_mutants(&base, &schema, 42);
    let ids = |m: &[pwa_sentinel::fuzz::Mutant]| m.iter().map(|m| m.mutant_id.clone()).collect::<Vec<_>>();
    ensure(ids(&first) == ids(&second), || "equal seeds gave different mutant ids".into())?;
    ensure(elapsed < Duration::from_secs(5), || format!("generation took {elapsed:?}"))?;

    for value in ["fullscreen", "standalone", "minimal-ui", "browser"] {
        let n = first
            .iter()
            .filter(|m| m.operator == OperatorId::DocumentedValue && m.field == "display" && m.parameter == json!(value))
            .count();
        ensure(n == 1, || format!("display {value} appears in {n} enumeration mutants"))?;
    }
    let unparsable: Vec<_> = first
        .iter()
        .filter(|m| !m.malformed && serde_json::from_str::<Value>(&m.rendered).is_err())
        .map(|m| m.mutant_id.clone())
        .collect();
    ensure(unparsable.is_empty(), || format!("unparsable mutants {unparsable:?}"))?;
    let lengths: Vec<usize> = first
        .iter()
        .filter(|m| m.operator == OperatorId::OversizeText && m.field == "name")
        .filter_map(|m| m.mutated_fields.get("name").and_then(Value::as_str).map(|s| s.chars().count()))
        .collect();
    ensure(lengths.contains(&1000) && lengths.contains(&1001), || format!("name lengths {lengths:?}"))?;
    ensure(
        first.iter().any(|m| {
            m.operator == OperatorId::RedirectParam
                && m.mutated_fields.get("start_url").and_then(Value::as_str).is_some_and(|s| s.contains("?redirect=attack.example"))
        }),
        || "no ?redirect=attack.example start_url mutant".into(),
    )?;
    Ok(format!("{} mutants in {elapsed:.2?}; display values once each; ids stable; all parse", first.len()))
}

// 8 ---------------------------------------------------------------------

fn fuzz_harness_timing() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mutants: Vec<_> = generate_plan(&fuzz_base(), &FieldSchema::default(), 1, 0).into_iter().take(3).collect();
    let ids: Vec<String> = mutants.iter().map(|m| m.mutant_id.clone()).collect();
    let bodies: Vec<String> = mutants.iter().map(|m| m.rendered.clone()).collect();
    let session = FuzzSession::create(&dir.path().join("s.jsonl"), mutants, 1, 5).map_err(|e| e.to_string())?;
    let handle = spawn_server(session, "127.0.0.1:0").map_err(|e| e.to_string())?;
    let prober = Prober::new(ProbeConfig { timeout: Duration::from_secs(2), ..ProbeConfig::default() }).unwrap();
    let status_url = url(&format!("{}status", handle.base_url()));
    let manifest_url = url(&format!("{}manifest.json", handle.base_url()));

    let mut advances: Vec<Status> = Vec::new();
    let mut served_bodies: Vec<String> = Vec::new();
    let deadline = Instant::now() + Duration::from_secs(19);
    while advances.len() < 4 && Instant::now() < deadline {
        let s: Status = serde_json::from_str(&prober.get(&status_url).map_err(|e| e.to_string())?.body).map_err(|e| e.to_string())?;
        if advances.last().is_none_or(|l| l.advanced_at != s.advanced_at) {
            advances.push(s);
        }
        let body = prober.get(&manifest_url).map_err(|e| e.to_string())?.body;
        if served_bodies.last() != Some(&body) {
            served_bodies.push(body);
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    let session = handle.stop();

    let order: Vec<usize> = advances.iter().map(|s| s.index).collect();
    ensure(order == [0, 1, 2, 0], || format!("index order {order:?}"))?;
    ensure(advances.iter().all(|s| s.mutant_id == ids[s.index] && s.total == 3), || "status ids disagree".into())?;
    let gaps: Vec<u64> = advances.windows(2).map(|w| w[1].advanced_at - w[0].advanced_at).collect();
    ensure(gaps.iter().all(|g| (5000..=6000).contains(g)), || format!("gaps {gaps:?} ms"))?;
    let expected_bodies: Vec<String> = [0, 1, 2, 0].iter().map(|&i| bodies[i].clone()).collect();
    ensure(served_bodies == expected_bodies, || format!("{} distinct served runs", served_bodies.len()))?;

    let ts: Vec<u64> = session.serve_log.iter().map(|e| e.timestamp).collect();
    ensure(ts.windows(2).all(|w| w[0] <= w[1]), || "serve log timestamps decrease".into())?;
    let mut replay: Vec<&str> = Vec::new();
    for e in &session.serve_log {
        if replay.last() != Some(&e.mutant_id.as_str()) {
            replay.push(&e.mutant_id);
        }
    }
    let expected: Vec<&str> = [0, 1, 2, 0].iter().map(|&i| ids[i].as_str()).collect();
    ensure(replay == expected, || format!("serve log sequence {replay:?}"))?;
    let reopened = FuzzSession::open(&dir.path().join("s.jsonl")).map_err(|e| e.to_string())?;
    ensure(reopened.serve_log == session.serve_log, || "persisted serve log differs".into())?;
    Ok(format!("order m1,m2,m3,m1; gaps {gaps:?} ms; serve log replays the sequence"))
}

// 9 ---------------------------------------------------------------------

fn perturb(source: &str) -> Vec<String> {
    let commented: String = source
        .lines()
        .map(|l| format!("{l} // caches.match( fetch( cache.put(\n/* fetch(event.request) */"))
        .collect::<Vec<_>>()
        .join("\n");
    vec![
        format!("/* service worker\n   caches.match(event.request) */\n// fetch(event.request)\n\n{source}"),
        source.lines().map(|l| format!("\t\t{}", l.trim())).collect::<Vec<_>>().join("\n\n"),
        source.replace('\n', "\r\n"),
        commented,
    ]
}

fn sw_classifier() -> Outcome {
    let dir = fixtures().join("sw");
    let labels = ["cache_first", "network_first", "cache_only", "network_only", "stale_while_revalidate"];
    let mut checked = 0;
    for label in labels {
        let source = fs::read_to_string(dir.join(format!("{label}.js"))).unwrap();
        let c = classify_sw(&source);
        ensure(c.strategy.as_str() == label, || format!("{label}.js classified as {}", c.strategy.as_str()))?;
        for (i, variant) in perturb(&source).iter().enumerate() {
            let v = classify_sw(variant);
            ensure(v.strategy == c.strategy, || format!("{label}.js variant {i} classified as {}", v.strategy.as_str()))?;
            checked += 1;
        }
    }
    Ok(format!("5 canonical fixtures and {checked} perturbed variants classify as labeled"))
}

// 10 --------------------------------------------------------------------

fn probe_fixtures() -> Outcome {
    let start = Instant::now();
    let fx = Fixture::start();
    let p = Prober::new(ProbeConfig { timeout: Duration::from_secs(5), ..ProbeConfig::default() }).unwrap();
    let r = redirect_probe(&p, &url(&fx.url_a("/redirect-start")), 10).map_err(|e| e.to_string())?;
    ensure(r.cross_origin_hops == [1], || format!("cross_origin_hops {:?}", r.cross_origin_hops))?;
    let r = redirect_probe(&p, &url(&fx.url_a("/meta")), 10).map_err(|e| e.to_string())?;
    ensure(r.chain.iter().any(|h| h.mechanism == Some(HopMechanism::MetaRefresh)), || "no meta_refresh hop".into())?;
    let plain = frame_protection_probe(&p, &url(&fx.url_a("/plain"))).map_err(|e| e.to_string())?;
    ensure(plain.frameable, || "header-free page not frameable".into())?;
    let deny = frame_protection_probe(&p, &url(&fx.url_a("/deny"))).map_err(|e| e.to_string())?;
    ensure(!deny.frameable, || "DENY page frameable".into())?;

    let dir = tempfile::tempdir().unwrap();
    let store = WatchStore::open(dir.path()).map_err(|e| e.to_string())?;
    let m = url(&fx.url_a("/watched.json"));
    poll(&p, &store, &m).map_err(|e| e.to_string())?;
    fx.set_manifest(r##"{"name":"Watched","theme_color":"#ff0000","background_color":"#000000"}"##);
    let theme = poll(&p, &store, &m).map_err(|e| e.to_string())?;
    fx.set_manifest(r##"{"name":"Watched","theme_color":"#ff0000","background_color":"#ffffff"}"##);
    let background = poll(&p, &store, &m).map_err(|e| e.to_string())?;
    let flags = |o: &PollOutcome| match o {
        PollOutcome::Changed(d) => d.changed_fields.iter().map(|c| (c.field.clone(), c.update_triggering)).collect(),
        _ => Vec::new(),
    };
    ensure(flags(&theme) == [("theme_color".to_string(), true)], || format!("theme change {:?}", flags(&theme)))?;
    ensure(flags(&background) == [("background_color".to_string(), false)], || {
        format!("background change {:?}", flags(&background))
    })?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("302 chain, meta refresh, framing and watch fixtures behave in {elapsed:.2?}"))
}

// 11 --------------------------------------------------------------------

fn installability_modes() -> Outcome {
    let dir = fixtures().join("lint");
    let doc = url("https://app.example/");
    let text = fs::read_to_string(dir.join("01-clean.json")).unwrap();
    let raw = parse_manifest(&text, &resolve(&doc, "01-clean.json").unwrap(), &doc).map_err(|e| e.to_string())?;
    let lenient = LintReport::build(&raw, None, &LintOptions { mode: InstallMode::ChromeLenient }, false);
    let strict = LintReport::build(&raw, None, &LintOptions { mode: InstallMode::StrictW3c }, false);
    let lenient = lenient.installability.unwrap();
    let strict = strict.installability.unwrap();
    ensure(lenient.installable, || format!("chrome_lenient: missing {:?}", lenient.missing))?;
    ensure(!strict.installable, || "strict_w3c installable without a service worker".into())?;
    ensure(strict.missing.iter().any(|m| m.contains("service_worker")), || format!("strict missing {:?}", strict.missing))?;

    let (code, _, _) = cli(&["validate", dir.join("01-clean.json").to_str().unwrap(), "--url", "https://app.example/"]);
    ensure(code == 0, || format!("validate chrome-lenient exit {code}"))?;
    let (code, _, _) = cli(&[
        "validate",
        dir.join("01-clean.json").to_str().unwrap(),
        "--url",
        "https://app.example/",
        "--mode",
        "strict-w3c",
    ]);
    ensure(code == 1, || format!("validate strict-w3c exit {code}"))?;
    Ok("no-service-worker manifest: installable under chrome_lenient, not under strict_w3c".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("catalog fidelity", catalog_fidelity),
        ("catalog cross-check", catalog_cross_check),
        ("lint fixture oracle", lint_fixture_oracle),
        ("normalization invariants", normalization_invariants),
        ("URL semantics oracle", url_semantics_oracle),
        ("corpus statistics identities", corpus_identities),
        ("fuzzer coverage and determinism", fuzzer_coverage),
        ("fuzz harness timing", fuzz_harness_timing),
        ("service-worker classifier", sw_classifier),
        ("probe fixtures", probe_fixtures),
        ("installability modes", installability_modes),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == n.to_string() || name.contains(f.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
