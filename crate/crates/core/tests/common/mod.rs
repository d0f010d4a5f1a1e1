//! Local HTTP fixtures: two servers on different ports, so two origins.
#![allow(dead_code)]

pub mod strategies;

use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;

pub const CACHE_ONLY_SW: &str = "self.addEventListener('fetch', event => {\n  event.respondWith(caches.match(event.request));\n});\n";

#[derive(Clone)]
struct AppState {
    other: String,
    manifest: Arc<Mutex<String>>,
}

pub struct Fixture {
    /// Origin A, e.g. `http://127.0.0.1:41234`.
    pub a: String,
    /// Origin B.
    pub b: String,
    manifest: Arc<Mutex<String>>,
}

fn html(body: &str) -> Html<String> {
    Html(format!("<!doctype html><html><head><title>fixture</title></head><body>{body}</body></html>"))
}

fn router(state: AppState) -> Router {
    Router::new()
        .route(
            "/redirect-start",
            get(|State(s): State<AppState>| async move {
                (StatusCode::FOUND, [(header::LOCATION, format!("{}/landing", s.other))]).into_response()
            }),
        )
        .route(
            "/same-origin-hop",
            get(|| async { (StatusCode::MOVED_PERMANENTLY, [(header::LOCATION, "/landing")]).into_response() }),
        )
        .route(
            "/redirect-param",
            get(|| async {
                (StatusCode::FOUND, [(header::LOCATION, "/landing?redirect=https://attack.example/")]).into_response()
            }),
        )
        .route("/loop", get(|| async { (StatusCode::FOUND, [(header::LOCATION, "/loop")]).into_response() }))
        .route("/landing", get(|| async { html("landed") }))
        .route(
            "/meta",
            get(|| async {
                Html(
                    r#"<html><head><meta http-equiv="refresh" content="0; url=/landing"></head><body></body></html>"#
                        .to_string(),
                )
            }),
        )
        .route(
            "/js",
            get(|| async { html(r#"<script>window.location.href = "https://attack.example/";</script>"#) }),
        )
        .route("/plain", get(|| async { html("no framing headers") }))
        .route("/deny", get(|| async { ([("x-frame-options", "DENY")], html("deny")).into_response() }))
        .route(
            "/csp-none",
            get(|| async { ([("content-security-policy", "frame-ancestors 'none'")], html("csp")).into_response() }),
        )
        .route(
            "/csp-star",
            get(|| async { ([("content-security-policy", "frame-ancestors *")], html("csp")).into_response() }),
        )
        .route(
            "/page",
            get(|| async { Html(r#"<html><head><link rel="manifest" href="/watched.json"></head></html>"#.to_string()) }),
        )
        .route("/nolink", get(|| async { html("nothing here") }))
        .route(
            "/watched.json",
            get(|State(s): State<AppState>| async move {
                let body = s.manifest.lock().unwrap().clone();
                ([(header::CONTENT_TYPE, "application/manifest+json")], body).into_response()
            }),
        )
        .route("/sw.js", get(|| async { ([(header::CONTENT_TYPE, "text/javascript")], CACHE_ONLY_SW).into_response() }))
        .route("/missing", get(|| async { Response::builder().status(404).body(axum::body::Body::empty()).unwrap() }))
        .with_state(state)
}

fn bind() -> TcpListener {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.set_nonblocking(true).unwrap();
    l
}

impl Fixture {
    pub fn start() -> Fixture {
        let (la, lb) = (bind(), bind());
        let a = format!("http://{}", la.local_addr().unwrap());
        let b = format!("http://{}", lb.local_addr().unwrap());
        let manifest = Arc::new(Mutex::new(
            r##"{"name":"Watched","theme_color":"#ffffff","background_color":"#000000"}"##.to_string(),
        ));
        let apps = [
            (la, router(AppState { other: b.clone(), manifest: manifest.clone() })),
            (lb, router(AppState { other: a.clone(), manifest: manifest.clone() })),
        ];
        std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
            rt.block_on(async move {
                let mut tasks = Vec::new();
                for (listener, app) in apps {
                    let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                    tasks.push(tokio::spawn(async move { axum::serve(listener, app).await }));
                }
                for t in tasks {
                    let _ = t.await;
                }
            });
        });
        Fixture { a, b, manifest }
    }

    pub fn url_a(&self, path: &str) -> String {
        format!("{}{path}", self.a)
    }

    pub fn url_b(&self, path: &str) -> String {
        format!("{}{path}", self.b)
    }

    pub fn set_manifest(&self, body: &str) {
        *self.manifest.lock().unwrap() = body.to_string();
    }
}

/// Run the CLI in-process and capture its streams.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = pwa_sentinel::cli::run_with(std::iter::once("pwa-sentinel").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
