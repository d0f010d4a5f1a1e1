//! Proptest generators for manifests, URL references and corpora.

use proptest::prelude::*;
use serde_json::{json, Map, Value};

pub const DOCUMENTS: &[&str] = &[
    "https://app.example/",
    "https://app.example/pwa/index.html",
    "https://app.example/deep/er/path/",
    "http://localhost:8080/a/b/",
    "https://xw.qq.com/",
    "http://plain.example:8080/shop/cart?item=1",
];

/// URL references that exercise every resolution branch.
pub const REFERENCES: &[&str] = &[
    "",
    "   ",
    "/",
    ".",
    "./",
    "..",
    "../",
    "../../x/",
    "/a/",
    "/a/b",
    "a/b/",
    "pwa/",
    "/pwa/start.html",
    "?x=1",
    "/?uid=42",
    "#frag",
    "/app/?redirect=https://evil.example/",
    "https://evil.example/",
    "//evil.example/x",
    "http://app.example/",
    "https://app.example:8443/",
    "https://app.example/pwa/",
    "https://qq.com/",
    "https://xw.qq.com/news/",
    "javascript:alert(1)",
    "data:text/html,hi",
    "mailto:a@b.example",
    " /padded/ ",
    "/%2e%2e/x",
    "\\\\evil.example\\x",
    "https://b\u{fc}cher.example/",
    "https://xn--bcher-kva.example/",
    "http://[::1]/",
    "/a/./b/../c/",
];

fn reference() -> impl Strategy<Value = Value> {
    prop_oneof![
        6 => proptest::sample::select(REFERENCES).prop_map(Value::from),
        3 => "[a-z./?#=%]{0,14}".prop_map(Value::from),
        1 => prop_oneof![
            Just(json!(42)),
            Just(json!(true)),
            Just(Value::Null),
            Just(json!([])),
            Just(json!({"href": "/"})),
        ],
    ]
}

fn display() -> impl Strategy<Value = Value> {
    prop_oneof![
        proptest::sample::select(&["browser", "minimal-ui", "standalone", "fullscreen", "Standalone", "kiosk", ""][..])
            .prop_map(Value::from),
        Just(json!(3)),
    ]
}

fn icons() -> impl Strategy<Value = Value> {
    proptest::collection::vec(
        prop_oneof![
            reference().prop_map(|src| json!({ "src": src, "sizes": "192x192" })),
            Just(json!("not-an-object")),
            Just(json!({ "sizes": "48x48" })),
        ],
        0..3,
    )
    .prop_map(Value::Array)
}

/// A manifest field map: standard fields drawn independently, some unknown keys.
pub fn manifest_fields() -> impl Strategy<Value = Map<String, Value>> {
    (
        proptest::option::of(prop_oneof!["[A-Za-z ]{0,12}".prop_map(Value::from), Just(json!(7))]),
        proptest::option::of(reference()),
        proptest::option::of(reference()),
        proptest::option::of(reference()),
        proptest::option::of(display()),
        proptest::option::of(icons()),
        proptest::option::of(any::<bool>()),
        proptest::collection::vec("x_[a-z]{1,6}", 0..2),
    )
        .prop_map(|(name, start, scope, id, display, icons, prefer, unknown)| {
            let mut m = Map::new();
            let mut put = |k: &str, v: Option<Value>| {
                if let Some(v) = v {
                    m.insert(k.to_string(), v);
                }
            };
            put("name", name);
            put("start_url", start);
            put("scope", scope);
            put("id", id);
            put("display", display);
            put("icons", icons);
            put("prefer_related_applications", prefer.map(Value::Bool));
            for k in unknown {
                m.insert(k, json!("v"));
            }
            m
        })
}

pub fn document() -> impl Strategy<Value = &'static str> {
    proptest::sample::select(DOCUMENTS)
}

/// One corpus line: a distinct document URL per index, a name from a small
/// pool so duplicates are common.
pub fn corpus_entries() -> impl Strategy<Value = Vec<(Option<String>, Option<String>)>> {
    proptest::collection::vec(
        (
            proptest::option::of(proptest::sample::select(
                &["Starbucks", "starbucks ", "Weather", "News", "", "  ", "Caf\u{e9}", "Cafe\u{301}"][..],
            ))
            .prop_map(|n| n.map(str::to_string)),
            proptest::option::of(proptest::sample::select(&["/", "/?uid=1", "../x", "https://evil.example/", ""][..]))
                .prop_map(|s| s.map(str::to_string)),
        ),
        0..24,
    )
}

pub fn corpus_jsonl(entries: &[(usize, Option<String>, Option<String>)]) -> String {
    entries
        .iter()
        .map(|(i, name, start)| {
            let mut m = Map::new();
            if let Some(n) = name {
                m.insert("name".into(), json!(n));
            }
            if let Some(s) = start {
                m.insert("start_url".into(), json!(s));
            }
            m.insert("icons".into(), json!([{ "src": format!("/icon-{}.png", i % 3) }]));
            format!("{}\n", json!({ "url": format!("https://site{i}.example/"), "manifest": m }))
        })
        .collect()
}
