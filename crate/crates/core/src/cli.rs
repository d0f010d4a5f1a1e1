//! The `pwa-sentinel` command line.
//!
//! Exit codes: 0 clean, 1 findings at or above the threshold, 2 input error,
//! 3 internal error. Reports go to stdout, diagnostics to stderr.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::catalog::{cia_tally, Browser, Catalog, CatalogError, Os};
use crate::corpus::{
    duplicate_names, duplicate_summary, frequency_csv, frequency_table, icon_collisions, ingest, read_entries,
    CorpusEntry, CorpusFormat, CorpusIndex, FreqField,
};
use crate::fuzz::{generate_plan, serve_session, session_report, FieldSchema, FuzzError, FuzzSession, Outcome};
use crate::lint::{
    at_or_above, is_placeholder, InstallMode, LintOptions, LintReport, RuleId, Severity, PLACEHOLDER_DOCUMENT_URL,
    REPORT_SCHEMA_VERSION, TOOL_VERSION,
};
use crate::manifest::{parse_manifest, RawManifest};
use crate::probes::{
    discover_manifest, frame_protection_probe, redirect_probe, watch_manifest, ProbeConfig, ProbeError, Prober,
    WatchStore, DEFAULT_MAX_HOPS,
};
use crate::sw::{cache_only_risk, classify_sw};
use crate::url_semantics::{resolve, AbsoluteUrl};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Threshold {
    Info,
    Warning,
    Error,
}

impl From<Threshold> for Severity {
    fn from(t: Threshold) -> Self {
        match t {
            Threshold::Info => Severity::Info,
            Threshold::Warning => Severity::Warning,
            Threshold::Error => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    ChromeLenient,
    StrictW3c,
}

impl From<Mode> for InstallMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ChromeLenient => InstallMode::ChromeLenient,
            Mode::StrictW3c => InstallMode::StrictW3c,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pwa-sentinel", version, about = "Security checks for Progressive Web App manifests")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "text", global = true)]
    pub format: Format,
    /// Lowest severity that makes the exit code 1.
    #[arg(long, value_enum, default_value = "warning", global = true)]
    pub threshold: Threshold,
    /// Network timeout in seconds.
    #[arg(long, default_value_t = 15, global = true)]
    pub timeout: u64,
    /// Proxy for probes; defaults to HTTPS_PROXY / HTTP_PROXY / ALL_PROXY.
    #[arg(long, global = true)]
    pub proxy: Option<String>,
    /// User-Agent header for probes.
    #[arg(long, global = true)]
    pub user_agent: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lint manifest files, JSONL corpora or corpus directories.
    Lint(LintArgs),
    /// Check installability of one manifest.
    Validate(ValidateArgs),
    /// Index a crawl of manifests.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Mutate a manifest and serve the mutants to real browsers.
    #[command(subcommand)]
    Fuzz(FuzzCommand),
    /// Service-worker analysis.
    #[command(subcommand)]
    Sw(SwCommand),
    /// Live checks against a deployed site.
    #[command(subcommand)]
    Probe(ProbeCommand),
    /// Known violations and per-browser support.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Debug, Args)]
pub struct DocumentArgs {
    /// URL of the page linking the manifest. Without it a placeholder origin
    /// is used and origin-dependent findings drop to info.
    #[arg(long)]
    pub url: Option<String>,
    /// URL the manifest is served from; defaults to the file name resolved
    /// against --url.
    #[arg(long)]
    pub manifest_url: Option<String>,
    #[arg(long, value_enum, default_value = "chrome-lenient")]
    pub mode: Mode,
    /// The site registers a service worker.
    #[arg(long)]
    pub sw: bool,
    /// Service-worker script to classify alongside the manifest.
    #[arg(long)]
    pub sw_script: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LintArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub doc: DocumentArgs,
    /// Corpus (JSONL, directory or saved index) for duplicate checks.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub doc: DocumentArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FreqArg {
    Name,
    StartUrl,
    Scope,
    Id,
}

impl From<FreqArg> for FreqField {
    fn from(f: FreqArg) -> Self {
        match f {
            FreqArg::Name => FreqField::Name,
            FreqArg::StartUrl => FreqField::StartUrlRaw,
            FreqArg::Scope => FreqField::ScopeRaw,
            FreqArg::Id => FreqField::Id,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Build an index and optionally save it.
    Ingest {
        source: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Field statistics.
    Stats { source: PathBuf },
    /// Duplicate names and shared icons.
    Dups {
        source: PathBuf,
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Raw-value frequency table for one field.
    Freq {
        source: PathBuf,
        #[arg(long, value_enum)]
        field: FreqArg,
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        top: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum FuzzCommand {
    /// Generate mutants of a base manifest into a new session file.
    Gen {
        base: PathBuf,
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        interval: u64,
        /// Also emit this many two-operator mutants.
        #[arg(long, default_value_t = 0)]
        pairs: usize,
        #[arg(long, default_value = "http://127.0.0.1:8080/")]
        url: String,
    },
    /// Serve a session, rotating mutants every interval.
    Serve {
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Record what happened when installing a mutant.
    Record {
        #[arg(long)]
        session: PathBuf,
        mutant_id: String,
        outcome: String,
        #[arg(long, default_value = "")]
        note: String,
    },
    /// Serve counts and observations per mutant.
    Report {
        #[arg(long)]
        session: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SwCommand {
    /// Classify a service worker's cache strategy.
    Classify { source: String },
}

#[derive(Debug, Subcommand)]
pub enum ProbeCommand {
    /// Find the manifest linked from a page.
    Discover { url: String },
    /// Follow redirects from a URL.
    Redirects {
        url: String,
        #[arg(long, default_value_t = DEFAULT_MAX_HOPS)]
        max_hops: usize,
    },
    /// Check framing protection headers.
    Frames { url: String },
    /// Watch a manifest for field changes.
    Watch {
        url: String,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 60)]
        interval: u64,
        /// Stop after this many polls.
        #[arg(long)]
        polls: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    /// Browser counts per CIA letter.
    Tally,
    /// All catalog rows.
    List,
    /// Install and profile support for one browser on one OS.
    Support { browser: String, os: String },
    /// Uninstallation steps for one browser on one OS.
    Uninstall { browser: String, os: String },
}

/// A failure that decides the exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self { code: EXIT_INTERNAL, message: message.into() }
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<FuzzError> for CliError {
    fn from(e: FuzzError) -> Self {
        match e {
            FuzzError::Io(_) => CliError::internal(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::CatalogCorrupt(_) => CliError::internal(e.to_string()),
            CatalogError::UnknownCombination { .. } => CliError::input(e.to_string()),
        }
    }
}

type CliResult = Result<i32, CliError>;

const FILE_NAME: &percent_encoding::AsciiSet =
    &percent_encoding::CONTROLS.add(b' ').add(b'"').add(b'#').add(b'%').add(b'?').add(b'/').add(b'\\').add(b'<').add(b'>');

struct Ctx<'a> {
    cli: &'a Cli,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn json(&self) -> bool {
        self.cli.format == Format::Json
    }

    /// Write one JSON document carrying the schema and tool versions.
    fn emit_json(&mut self, command: &str, payload: impl Serialize) -> Result<(), CliError> {
        let mut doc = serde_json::Map::new();
        doc.insert("schema_version".into(), json!(REPORT_SCHEMA_VERSION));
        doc.insert("tool_version".into(), json!(TOOL_VERSION));
        doc.insert("command".into(), json!(command));
        match serde_json::to_value(payload).map_err(|e| CliError::internal(e.to_string()))? {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON value serializes");
        self.line(&text)
    }

    fn line(&mut self, text: &str) -> Result<(), CliError> {
        self.text(&format!("{text}\n"))
    }

    /// A closed reader (`| head`) is not an error; the exit code still
    /// reflects the findings.
    fn text(&mut self, text: &str) -> Result<(), CliError> {
        match self.out.write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::internal(e.to_string())),
            _ => Ok(()),
        }
    }

    fn prober(&self) -> Result<Prober, CliError> {
        let mut config = ProbeConfig::from_env();
        config.timeout = Duration::from_secs(self.cli.timeout.max(1));
        if let Some(p) = &self.cli.proxy {
            config.proxy = Some(p.clone());
        }
        if let Some(ua) = &self.cli.user_agent {
            config.user_agent = ua.clone();
        }
        Ok(Prober::new(config)?)
    }
}

/// Parse `argv` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_CLEAN
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_INPUT
                }
            };
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        let mut ctx = Ctx { cli: &cli, out: &mut *out };
        dispatch(&mut ctx)
    }));
    match result {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
        Err(_) => {
            let _ = writeln!(err, "error: internal failure");
            EXIT_INTERNAL
        }
    }
}

fn dispatch(ctx: &mut Ctx) -> CliResult {
    match &ctx.cli.command {
        Command::Lint(a) => cmd_lint(ctx, a),
        Command::Validate(a) => cmd_validate(ctx, a),
        Command::Corpus(c) => cmd_corpus(ctx, c),
        Command::Fuzz(c) => cmd_fuzz(ctx, c),
        Command::Sw(SwCommand::Classify { source }) => cmd_sw(ctx, source),
        Command::Probe(c) => cmd_probe(ctx, c),
        Command::Catalog(c) => cmd_catalog(ctx, c),
    }
}

fn parse_url(text: &str) -> Result<AbsoluteUrl, CliError> {
    AbsoluteUrl::parse(text).map_err(|e| CliError::input(e.to_string()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Document and manifest URLs for a manifest read from `path`.
fn file_urls(doc: &DocumentArgs, path: &Path) -> Result<(AbsoluteUrl, AbsoluteUrl), CliError> {
    let document = parse_url(doc.url.as_deref().unwrap_or(PLACEHOLDER_DOCUMENT_URL))?;
    let manifest = match &doc.manifest_url {
        Some(m) => resolve(&document, m).map_err(|e| CliError::input(e.to_string()))?,
        None => {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("manifest.json");
            let encoded = percent_encoding::utf8_percent_encode(name, FILE_NAME).to_string();
            resolve(&document, &encoded).unwrap_or_else(|_| document.clone())
        }
    };
    Ok((document, manifest))
}

/// Load a corpus for duplicate checks: a saved index or any corpus source.
fn load_corpus(path: &Path) -> Result<CorpusIndex, CliError> {
    if path.is_file() && path.extension().is_some_and(|e| e == "json") {
        let text = read_text(path)?;
        if let Ok(index) = serde_json::from_str::<CorpusIndex>(&text) {
            return Ok(index);
        }
    }
    ingest(path, CorpusFormat::detect(path)).map_err(|e| CliError::input(e.to_string()))
}

#[derive(Debug, Serialize)]
struct LintEntry {
    input: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<LintReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct LintBatch {
    entries: Vec<LintEntry>,
    histogram: BTreeMap<RuleId, u64>,
    exit_code: i32,
}

fn sw_findings(report: &mut LintReport, sw_script: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = sw_script {
        let c = classify_sw(&read_text(path)?);
        report.findings.extend(cache_only_risk(&c));
        crate::lint::sort_findings(&mut report.findings);
    }
    Ok(())
}

fn lint_raw(raw: &RawManifest, corpus: Option<&CorpusIndex>, doc: &DocumentArgs) -> Result<LintReport, CliError> {
    let options = LintOptions { mode: doc.mode.into() };
    let has_sw = doc.sw || doc.sw_script.is_some();
    let mut report = LintReport::build(raw, corpus, &options, has_sw);
    sw_findings(&mut report, doc.sw_script.as_deref())?;
    Ok(report)
}

/// Lint every input; files in path order, corpus entries in source order.
fn lint_many(inputs: &[PathBuf], doc: &DocumentArgs, corpus: Option<&CorpusIndex>) -> Result<Vec<LintEntry>, CliError> {
    let mut paths = inputs.to_vec();
    paths.sort();
    paths.dedup();
    let mut entries = Vec::new();
    for path in &paths {
        let label = path.display().to_string();
        let is_corpus = path.is_dir() || path.extension().is_some_and(|e| e == "jsonl");
        if is_corpus {
            match read_entries(path, CorpusFormat::detect(path)) {
                Ok((items, malformed)) => {
                    for (i, CorpusEntry { raw, .. }) in items.into_iter().enumerate() {
                        entries.push(LintEntry {
                            input: format!("{label}#{}", i + 1),
                            report: Some(lint_raw(&raw, corpus, doc)?),
                            error: None,
                        });
                    }
                    if malformed > 0 {
                        entries.push(LintEntry {
                            input: label,
                            report: None,
                            error: Some(format!("{malformed} entries could not be read")),
                        });
                    }
                }
                Err(e) => entries.push(LintEntry { input: label, report: None, error: Some(e.to_string()) }),
            }
            continue;
        }
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                entries.push(LintEntry { input: label, report: None, error: Some(format!("cannot read: {e}")) });
                continue;
            }
        };
        let (document, manifest_url) = file_urls(doc, path)?;
        let entry = match parse_manifest(&text, &manifest_url, &document) {
            Ok(raw) => LintEntry { input: label, report: Some(lint_raw(&raw, corpus, doc)?), error: None },
            Err(e) => LintEntry {
                input: label,
                report: Some(LintReport::malformed(&manifest_url, &document, &e.to_string())),
                error: Some(e.to_string()),
            },
        };
        entries.push(entry);
    }
    Ok(entries)
}

fn cmd_lint(ctx: &mut Ctx, a: &LintArgs) -> CliResult {
    let corpus = a.corpus.as_deref().map(load_corpus).transpose()?;
    let entries = lint_many(&a.inputs, &a.doc, corpus.as_ref())?;
    let threshold: Severity = ctx.cli.threshold.into();
    let mut histogram = BTreeMap::new();
    let mut code = EXIT_CLEAN;
    for e in &entries {
        if e.error.is_some() {
            code = code.max(EXIT_INPUT);
        }
        if let Some(r) = &e.report {
            for f in &r.findings {
                *histogram.entry(f.rule_id).or_insert(0) += 1;
            }
            if !at_or_above(&r.findings, threshold).is_empty() {
                code = code.max(EXIT_FINDINGS);
            }
        }
    }
    if ctx.json() {
        ctx.emit_json("lint", LintBatch { entries, histogram, exit_code: code })?;
    } else {
        for e in &entries {
            ctx.line(&format!("== {}", e.input))?;
            if let Some(r) = &e.report {
                ctx.text(&r.render_text())?;
                if is_placeholder(&r.document_url) {
                    ctx.line("  note: no --url given; origin-dependent findings are reported as info")?;
                }
            }
            if let Some(err) = &e.error {
                ctx.line(&format!("  error: {err}"))?;
            }
        }
        if entries.len() > 1 {
            ctx.line("== findings by rule")?;
            for (rule, n) in &histogram {
                ctx.line(&format!("  {n:>6}  {rule}"))?;
            }
        }
    }
    Ok(code)
}

fn cmd_validate(ctx: &mut Ctx, a: &ValidateArgs) -> CliResult {
    let text = read_text(&a.input)?;
    let (document, manifest_url) = file_urls(&a.doc, &a.input)?;
    let raw = match parse_manifest(&text, &manifest_url, &document) {
        Ok(r) => r,
        Err(e) => {
            let report = LintReport::malformed(&manifest_url, &document, &e.to_string());
            if ctx.json() {
                ctx.emit_json("validate", &report)?;
            } else {
                ctx.text(&report.render_text())?;
            }
            return Ok(EXIT_INPUT);
        }
    };
    let report = lint_raw(&raw, None, &a.doc)?;
    let syntax_errors = report
        .findings
        .iter()
        .any(|f| f.rule_id.as_str().starts_with("SYN-") && f.severity >= Severity::Error);
    let installable = report.installability.as_ref().is_some_and(|i| i.installable);
    if ctx.json() {
        ctx.emit_json(
            "validate",
            json!({ "installability": report.installability, "parse_notes": report.parse_notes, "syntax_errors": syntax_errors }),
        )?;
    } else if let Some(i) = &report.installability {
        let verdict = if i.installable { "installable" } else { "not installable" };
        ctx.line(&format!("{} ({}): {verdict}", a.input.display(), i.mode))?;
        for m in &i.missing {
            ctx.line(&format!("  missing: {m}"))?;
        }
        for n in &i.notes {
            ctx.line(&format!("  note: {n}"))?;
        }
    }
    Ok(if installable && !syntax_errors { EXIT_CLEAN } else { EXIT_FINDINGS })
}

fn cmd_corpus(ctx: &mut Ctx, c: &CorpusCommand) -> CliResult {
    match c {
        CorpusCommand::Ingest { source, out } => {
            let index = load_corpus(source)?;
            if let Some(out) = out {
                let text = serde_json::to_string_pretty(&index).expect("index serializes");
                fs::write(out, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", out.display())))?;
            }
            let summary = json!({
                "entries": index.entry_count,
                "malformed_lines": index.malformed_lines,
                "dedup_replacements": index.dedup_replacements,
                "saved_to": out.as_ref().map(|p| p.display().to_string()),
            });
            if ctx.json() {
                ctx.emit_json("corpus ingest", summary)?;
            } else {
                ctx.line(&format!(
                    "{} entries ({} unreadable, {} replaced by later duplicates)",
                    index.entry_count, index.malformed_lines, index.dedup_replacements
                ))?;
            }
        }
        CorpusCommand::Stats { source } => {
            let index = load_corpus(source)?;
            let s = &index.field_stats;
            if ctx.json() {
                ctx.emit_json(
                    "corpus stats",
                    json!({ "entries": index.entry_count, "malformed_lines": index.malformed_lines, "field_stats": s }),
                )?;
            } else {
                ctx.line(&format!("entries: {}", index.entry_count))?;
                for (name, u) in [("start_url", &s.start_url), ("scope", &s.scope)] {
                    ctx.line(&format!(
                        "{name}: present {}, empty {}, with query {}, cross-origin https {}, parent path {}",
                        u.present, u.empty, u.with_query_params, u.cross_origin_https, u.parent_path
                    ))?;
                }
                for (v, n) in &s.display_counts {
                    ctx.line(&format!("display {v}: {n}"))?;
                }
                for (v, n) in &s.display_errors {
                    ctx.line(&format!("display (undocumented) {v:?}: {n}"))?;
                }
            }
        }
        CorpusCommand::Dups { source, top } => {
            let index = load_corpus(source)?;
            let summary = duplicate_summary(&index);
            let names: Vec<_> = duplicate_names(&index).into_iter().take(*top).collect();
            let icons = icon_collisions(&index);
            if ctx.json() {
                let names: Vec<_> = names.iter().map(|(n, c)| json!({ "name": n, "count": c })).collect();
                let icons: Vec<_> = icons.iter().map(|(s, o)| json!({ "src": s, "origins": o })).collect();
                ctx.emit_json("corpus dups", json!({ "summary": summary, "names": names, "icons": icons }))?;
            } else {
                ctx.line(&format!(
                    "{} duplicated names over {} entries; {} entries without a name",
                    summary.unique_duplicate_names, summary.affected_entries, summary.empty_names
                ))?;
                for (n, c) in &names {
                    ctx.line(&format!("  {c:>6}  {n}"))?;
                }
                for (src, origins) in &icons {
                    ctx.line(&format!("icon {src} used by {}", origins.join(", ")))?;
                }
            }
        }
        CorpusCommand::Freq { source, field, csv, top } => {
            let index = load_corpus(source)?;
            let mut rows = frequency_table(&index, (*field).into());
            if let Some(n) = top {
                rows.truncate(*n);
            }
            if *csv {
                ctx.text(&frequency_csv(&rows))?;
            } else if ctx.json() {
                let rows: Vec<_> = rows.iter().map(|(t, c)| json!({ "token": t, "count": c })).collect();
                ctx.emit_json("corpus freq", json!({ "rows": rows }))?;
            } else {
                for (t, c) in &rows {
                    ctx.line(&format!("{c:>6}  {t}"))?;
                }
            }
        }
    }
    Ok(EXIT_CLEAN)
}

fn cmd_fuzz(ctx: &mut Ctx, c: &FuzzCommand) -> CliResult {
    match c {
        FuzzCommand::Gen { base, session, seed, interval, pairs, url } => {
            let document = parse_url(url)?;
            let manifest_url = resolve(&document, "manifest.json").map_err(|e| CliError::input(e.to_string()))?;
            let raw = parse_manifest(&read_text(base)?, &manifest_url, &document)
                .map_err(|e| CliError::input(e.to_string()))?;
            let mutants = generate_plan(&raw, &FieldSchema::default(), *seed, *pairs);
            let s = FuzzSession::create(session, mutants, *seed, *interval)?;
            if ctx.json() {
                let ids: Vec<_> = s.mutants.iter().map(|m| json!({ "mutant_id": m.mutant_id, "operator": m.operator, "field": m.field })).collect();
                ctx.emit_json("fuzz gen", json!({ "session_id": s.session_id, "session": session.display().to_string(), "mutants": ids }))?;
            } else {
                ctx.line(&format!("{} mutants written to {} (session {})", s.mutants.len(), session.display(), s.session_id))?;
            }
            Ok(EXIT_CLEAN)
        }
        FuzzCommand::Serve { session, bind } => {
            let s = FuzzSession::open(session)?;
            let s = serve_session(s, bind)?;
            if ctx.json() {
                ctx.emit_json("fuzz serve", json!({ "session_id": s.session_id, "serves": s.serve_log.len() }))?;
            } else {
                ctx.line(&format!("stopped after {} manifest serves", s.serve_log.len()))?;
            }
            Ok(EXIT_CLEAN)
        }
        FuzzCommand::Record { session, mutant_id, outcome, note } => {
            let outcome: Outcome = outcome.parse().map_err(CliError::input)?;
            let mut s = FuzzSession::open(session)?;
            s.record_observation(mutant_id, outcome, note)?;
            if ctx.json() {
                ctx.emit_json("fuzz record", json!({ "mutant_id": mutant_id, "outcome": outcome, "observations": s.observations.len() }))?;
            } else {
                ctx.line(&format!("recorded {outcome} for {mutant_id}"))?;
            }
            Ok(EXIT_CLEAN)
        }
        FuzzCommand::Report { session } => {
            let s = FuzzSession::open(session)?;
            let report = session_report(&s);
            if ctx.json() {
                ctx.emit_json("fuzz report", json!({ "session_id": s.session_id, "mutants": report }))?;
            } else {
                for r in &report {
                    let obs = if r.unobserved {
                        "unobserved".to_string()
                    } else {
                        r.observations.iter().map(|(o, n)| format!("{o}:{n}")).collect::<Vec<_>>().join(" ")
                    };
                    ctx.line(&format!("{}  {:<20} {:<28} served {:>4}  {obs}", r.mutant_id, r.operator, r.field, r.serve_count))?;
                }
            }
            Ok(EXIT_CLEAN)
        }
    }
}

fn cmd_sw(ctx: &mut Ctx, source: &str) -> CliResult {
    let text = if source.starts_with("http://") || source.starts_with("https://") {
        let url = parse_url(source)?;
        let f = ctx.prober()?.get(&url)?;
        if !f.is_success() {
            return Err(CliError::input(format!("{url}: HTTP {}", f.status)));
        }
        f.body
    } else {
        read_text(Path::new(source))?
    };
    let c = classify_sw(&text);
    let risk = cache_only_risk(&c);
    let threshold: Severity = ctx.cli.threshold.into();
    let code = if risk.as_ref().is_some_and(|f| f.severity >= threshold) { EXIT_FINDINGS } else { EXIT_CLEAN };
    if ctx.json() {
        ctx.emit_json("sw classify", json!({ "strategy": c.strategy, "confidence": c.confidence, "evidence": c.evidence, "finding": risk }))?;
    } else {
        ctx.line(&format!("strategy: {} ({:?})", c.strategy, c.confidence))?;
        for e in &c.evidence {
            ctx.line(&format!("  {} lines {}-{}", e.pattern, e.span.start_line, e.span.end_line))?;
        }
        if let Some(f) = &risk {
            ctx.line(&format!("{} {}: {}", f.severity.as_str(), f.rule_id, f.message))?;
        }
    }
    Ok(code)
}

fn cmd_probe(ctx: &mut Ctx, c: &ProbeCommand) -> CliResult {
    let prober = ctx.prober()?;
    match c {
        ProbeCommand::Discover { url } => {
            let url = parse_url(url)?;
            match discover_manifest(&prober, &url) {
                Ok(m) => {
                    if ctx.json() {
                        ctx.emit_json("probe discover", json!({ "page_url": url, "manifest_url": m }))?;
                    } else {
                        ctx.line(m.as_str())?;
                    }
                    Ok(EXIT_CLEAN)
                }
                Err(ProbeError::NoManifestLink(_)) => {
                    if ctx.json() {
                        ctx.emit_json("probe discover", json!({ "page_url": url, "manifest_url": null }))?;
                    } else {
                        ctx.line("no manifest link")?;
                    }
                    Ok(EXIT_FINDINGS)
                }
                Err(e) => Err(e.into()),
            }
        }
        ProbeCommand::Redirects { url, max_hops } => {
            let url = parse_url(url)?;
            let r = redirect_probe(&prober, &url, *max_hops)?;
            let risky = !r.cross_origin_hops.is_empty() || !r.suspicious_params.is_empty() || !r.js_redirects.is_empty();
            if ctx.json() {
                ctx.emit_json("probe redirects", &r)?;
            } else {
                for (i, hop) in r.chain.iter().enumerate() {
                    let how = hop.mechanism.map_or("start".to_string(), |m| format!("{m:?}"));
                    let status = hop.status.map_or("-".to_string(), |s| s.to_string());
                    let mark = if r.cross_origin_hops.contains(&i) { "  cross-origin" } else { "" };
                    ctx.line(&format!("{i:>2} {status:>3} {how:<18} {}{mark}", hop.url))?;
                }
                for (k, v) in &r.suspicious_params {
                    ctx.line(&format!("suspicious parameter {k}={v}"))?;
                }
                for j in &r.js_redirects {
                    ctx.line(&format!("script redirect {} -> {}", j.pattern, j.target.as_deref().unwrap_or("(computed)")))?;
                }
                if r.truncated {
                    ctx.line("chain truncated")?;
                }
            }
            Ok(if risky { EXIT_FINDINGS } else { EXIT_CLEAN })
        }
        ProbeCommand::Frames { url } => {
            let url = parse_url(url)?;
            let r = frame_protection_probe(&prober, &url)?;
            if ctx.json() {
                ctx.emit_json("probe frames", &r)?;
            } else {
                ctx.line(&format!(
                    "{}: {} (X-Frame-Options: {}, frame-ancestors: {})",
                    r.url,
                    if r.frameable { "frameable" } else { "not frameable" },
                    r.x_frame_options.as_deref().unwrap_or("-"),
                    r.csp_frame_ancestors.as_deref().unwrap_or("-")
                ))?;
            }
            Ok(if r.frameable { EXIT_FINDINGS } else { EXIT_CLEAN })
        }
        ProbeCommand::Watch { url, store, interval, polls } => {
            let url = parse_url(url)?;
            let store = WatchStore::open(store)?;
            let json_mode = ctx.json();
            let mut diffs = Vec::new();
            let mut write_err = None;
            watch_manifest(&prober, &url, Duration::from_secs(*interval), &store, *polls, |d| {
                // one line per change so long watches can be tailed
                let line = if json_mode {
                    serde_json::to_string(d).expect("diff serializes")
                } else {
                    d.changed_fields
                        .iter()
                        .map(|c| format!("{} {}{}", d.timestamp, c.field, if c.update_triggering { " (triggers update)" } else { "" }))
                        .collect::<Vec<_>>()
                        .join("\n")
                };
                if polls.is_none() {
                    if let Err(e) = writeln!(std::io::stdout(), "{line}") {
                        write_err = Some(e);
                    }
                } else {
                    diffs.push((d.clone(), line));
                }
            })?;
            if let Some(e) = write_err {
                return Err(CliError::internal(e.to_string()));
            }
            let triggering = diffs.iter().any(|(d, _)| d.triggering().next().is_some());
            if json_mode {
                let list: Vec<_> = diffs.into_iter().map(|(d, _)| d).collect();
                ctx.emit_json("probe watch", json!({ "url": url, "diffs": list }))?;
            } else {
                for (_, line) in &diffs {
                    ctx.line(line)?;
                }
            }
            Ok(if triggering { EXIT_FINDINGS } else { EXIT_CLEAN })
        }
    }
}

fn browser_os(browser: &str, os: &str) -> Result<(Browser, Os), CliError> {
    let unknown = || CatalogError::UnknownCombination { browser: browser.to_string(), os: os.to_string() };
    let b = browser.parse::<Browser>().map_err(|_| unknown())?;
    let o = os.parse::<Os>().map_err(|_| unknown())?;
    Ok((b, o))
}

fn cmd_catalog(ctx: &mut Ctx, c: &CatalogCommand) -> CliResult {
    let catalog = Catalog::load()?;
    match c {
        CatalogCommand::Tally => {
            let t = cia_tally(&catalog.violations);
            if ctx.json() {
                ctx.emit_json("catalog tally", t)?;
            } else {
                ctx.line(&format!("C {}\nI {}\nA {}\ntotal {}", t.c, t.i, t.a, t.total))?;
            }
        }
        CatalogCommand::List => {
            if ctx.json() {
                ctx.emit_json("catalog list", json!({ "violations": catalog.violations }))?;
            } else {
                for v in &catalog.violations {
                    ctx.line(&format!("{} {:>2}  {:<17} {}", v.cia.letter(), v.browser_count, format!("{:?}", v.phase), v.risk_name))?;
                }
            }
        }
        CatalogCommand::Support { browser, os } => {
            let (b, o) = browser_os(browser, os)?;
            let p = catalog.browser_support(b, o)?;
            if ctx.json() {
                ctx.emit_json("catalog support", p)?;
            } else {
                ctx.line(&format!("{b} on {o}: install {:?}, profiles {:?}", p.install_support, p.profile_support))?;
            }
        }
        CatalogCommand::Uninstall { browser, os } => {
            let (b, o) = browser_os(browser, os)?;
            let g = catalog.uninstall_guide(b, o)?;
            if ctx.json() {
                ctx.emit_json("catalog uninstall", &g)?;
            } else {
                ctx.text(&g.render_text())?;
            }
        }
    }
    Ok(EXIT_CLEAN)
}
