//! Python bindings for `pwa_sentinel`.
//!
//! Structured results cross the boundary as plain dicts and lists built from
//! the same JSON the CLI emits, so field names match `--format json`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use pwa_sentinel::catalog::{cia_tally, Browser, Catalog as CoreCatalog, CatalogError, Os};
use pwa_sentinel::corpus::{self, CorpusFormat, CorpusIndex as CoreIndex, FreqField};
use pwa_sentinel::fuzz::{generate_plan, FieldSchema};
use pwa_sentinel::lint::{InstallMode, LintOptions, PLACEHOLDER_DOCUMENT_URL};
use pwa_sentinel::sw;
use pwa_sentinel::url_semantics::{self, AbsoluteUrl};
use pwa_sentinel::{Finding as CoreFinding, LintReport as CoreReport, RawManifest};

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Serialized name of a unit enum variant.
fn label<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(e) => e.to_string(),
    }
}

fn url(text: &str) -> PyResult<AbsoluteUrl> {
    AbsoluteUrl::parse(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn catalog_err(e: CatalogError) -> PyErr {
    match e {
        CatalogError::UnknownCombination { .. } => PyValueError::new_err(e.to_string()),
        CatalogError::CatalogCorrupt(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Parse manifest text the same way the CLI does for a file named
/// `manifest.json` next to the document.
fn parse(text: &str, document_url: Option<&str>, manifest_url: Option<&str>) -> PyResult<RawManifest> {
    let document = url(document_url.unwrap_or(PLACEHOLDER_DOCUMENT_URL))?;
    let manifest = match manifest_url {
        Some(m) => url_semantics::resolve(&document, m).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => url_semantics::resolve(&document, "manifest.json").map_err(|e| PyValueError::new_err(e.to_string()))?,
    };
    pwa_sentinel::parse_manifest(text, &manifest, &document).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(frozen, skip_from_py_object, module = "pwa_sentinel_py")]
#[derive(Clone)]
pub struct Finding {
    inner: CoreFinding,
}

#[pymethods]
impl Finding {
    #[getter]
    fn rule_id(&self) -> &'static str {
        self.inner.rule_id.as_str()
    }

    #[getter]
    fn severity(&self) -> String {
        label(&self.inner.severity)
    }

    #[getter]
    fn cia(&self) -> Vec<String> {
        self.inner.cia.iter().map(label).collect()
    }

    #[getter]
    fn phase(&self) -> String {
        label(&self.inner.phase)
    }

    #[getter]
    fn field_path(&self) -> &str {
        &self.inner.field_path
    }

    #[getter]
    fn message(&self) -> &str {
        &self.inner.message
    }

    #[getter]
    fn remediation(&self) -> &str {
        &self.inner.remediation
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("<Finding {} {} at {}>", self.rule_id(), self.severity(), self.inner.field_path)
    }
}

#[pyclass(frozen, module = "pwa_sentinel_py")]
pub struct LintReport {
    inner: CoreReport,
}

#[pymethods]
impl LintReport {
    #[getter]
    fn findings(&self) -> Vec<Finding> {
        self.inner.findings.iter().map(|f| Finding { inner: f.clone() }).collect()
    }

    #[getter]
    fn rule_ids(&self) -> Vec<&'static str> {
        self.inner.findings.iter().map(|f| f.rule_id.as_str()).collect()
    }

    /// None when the manifest did not parse.
    #[getter]
    fn installable(&self) -> Option<bool> {
        self.inner.installability.as_ref().map(|i| i.installable)
    }

    #[getter]
    fn worst_severity(&self) -> Option<String> {
        self.inner.worst_severity().map(|s| label(&s))
    }

    fn render_text(&self) -> String {
        self.inner.render_text()
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("report serializes")
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.findings.len()
    }

    fn __repr__(&self) -> String {
        format!("<LintReport {} findings for {}>", self.inner.findings.len(), self.inner.manifest_url)
    }
}

#[pyclass(frozen, module = "pwa_sentinel_py")]
pub struct CorpusIndex {
    inner: CoreIndex,
}

#[pymethods]
impl CorpusIndex {
    /// Ingest a JSONL file or a directory of manifests.
    #[staticmethod]
    fn ingest(path: PathBuf) -> PyResult<Self> {
        let format = CorpusFormat::detect(&path);
        corpus::ingest(&path, format)
            .map(|inner| Self { inner })
            .map_err(|e| PyOSError::new_err(e.to_string()))
    }

    #[getter]
    fn entry_count(&self) -> u64 {
        self.inner.entry_count
    }

    #[getter]
    fn malformed_lines(&self) -> u64 {
        self.inner.malformed_lines
    }

    fn duplicate_names(&self) -> Vec<(String, u64)> {
        corpus::duplicate_names(&self.inner)
    }

    fn duplicate_summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &corpus::duplicate_summary(&self.inner))
    }

    /// Raw-value counts for `name`, `start_url`, `scope` or `id`.
    fn frequency(&self, field: &str) -> PyResult<Vec<(String, u64)>> {
        let field = match field {
            "name" => FreqField::Name,
            "start_url" => FreqField::StartUrlRaw,
            "scope" => FreqField::ScopeRaw,
            "id" => FreqField::Id,
            other => return Err(PyValueError::new_err(format!("no frequency table for {other:?}"))),
        };
        Ok(corpus::frequency_table(&self.inner, field))
    }

    fn field_stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.field_stats)
    }
}

#[pyclass(frozen, module = "pwa_sentinel_py")]
pub struct Catalog {
    inner: CoreCatalog,
}

fn browser_os(browser: &str, os: &str) -> PyResult<(Browser, Os)> {
    let unknown = || catalog_err(CatalogError::UnknownCombination { browser: browser.into(), os: os.into() });
    Ok((browser.parse().map_err(|_| unknown())?, os.parse().map_err(|_| unknown())?))
}

#[pymethods]
impl Catalog {
    #[new]
    fn new() -> PyResult<Self> {
        CoreCatalog::load().map(|inner| Self { inner }).map_err(catalog_err)
    }

    fn violations(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.violations)
    }

    /// Browser counts per CIA letter.
    fn tally(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &cia_tally(&self.inner.violations))
    }

    fn browser_support(&self, py: Python<'_>, browser: &str, os: &str) -> PyResult<Py<PyAny>> {
        let (b, o) = browser_os(browser, os)?;
        to_py(py, self.inner.browser_support(b, o).map_err(catalog_err)?)
    }

    fn uninstall_guide(&self, py: Python<'_>, browser: &str, os: &str) -> PyResult<Py<PyAny>> {
        let (b, o) = browser_os(browser, os)?;
        to_py(py, &self.inner.uninstall_guide(b, o).map_err(catalog_err)?)
    }
}

/// Lint manifest text. Malformed JSON yields a report with a single
/// SYN-JSON-MALFORMED finding rather than an exception.
#[pyfunction]
#[pyo3(signature = (text, document_url=None, manifest_url=None, mode="chrome_lenient", has_service_worker=false, corpus=None))]
fn lint(
    text: &str,
    document_url: Option<&str>,
    manifest_url: Option<&str>,
    mode: &str,
    has_service_worker: bool,
    corpus: Option<&CorpusIndex>,
) -> PyResult<LintReport> {
    let mode: InstallMode = mode.parse().map_err(PyValueError::new_err)?;
    let document = url(document_url.unwrap_or(PLACEHOLDER_DOCUMENT_URL))?;
    let manifest = url_semantics::resolve(&document, manifest_url.unwrap_or("manifest.json"))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let inner = match pwa_sentinel::parse_manifest(text, &manifest, &document) {
        Ok(raw) => CoreReport::build(&raw, corpus.map(|c| &c.inner), &LintOptions { mode }, has_service_worker),
        Err(e) => CoreReport::malformed(&manifest, &document, &e.to_string()),
    };
    Ok(LintReport { inner })
}

/// The normalized manifest as a dict.
#[pyfunction]
#[pyo3(signature = (text, document_url=None, manifest_url=None))]
fn normalize(py: Python<'_>, text: &str, document_url: Option<&str>, manifest_url: Option<&str>) -> PyResult<Py<PyAny>> {
    let raw = parse(text, document_url, manifest_url)?;
    to_py(py, &pwa_sentinel::normalize(&raw))
}

/// Cache strategy of a service-worker script.
#[pyfunction]
fn classify_sw(py: Python<'_>, source: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &sw::classify_sw(source))
}

/// SEC-SW-CACHEONLY finding for a script, if it serves from cache only.
#[pyfunction]
fn cache_only_risk(source: &str) -> Option<Finding> {
    sw::cache_only_risk(&sw::classify_sw(source)).map(|inner| Finding { inner })
}

/// Mutants of a base manifest as dicts.
#[pyfunction]
#[pyo3(signature = (base_text, seed=0, pairs=0, document_url=None))]
fn generate_mutants(
    py: Python<'_>,
    base_text: &str,
    seed: u64,
    pairs: usize,
    document_url: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let raw = parse(base_text, document_url, None)?;
    to_py(py, &generate_plan(&raw, &FieldSchema::default(), seed, pairs))
}

#[pyfunction]
fn resolve_url(base: &str, reference: &str) -> PyResult<String> {
    url_semantics::resolve(&url(base)?, reference)
        .map(|u| u.to_string())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn same_origin(a: &str, b: &str) -> PyResult<bool> {
    Ok(url_semantics::same_origin(&url(a)?, &url(b)?))
}

#[pyfunction]
fn within_scope(target: &str, scope: &str) -> PyResult<bool> {
    Ok(url_semantics::within_scope(&url(target)?, &url(scope)?))
}

#[pymodule]
fn pwa_sentinel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", pwa_sentinel::lint::TOOL_VERSION)?;
    m.add_class::<Finding>()?;
    m.add_class::<LintReport>()?;
    m.add_class::<CorpusIndex>()?;
    m.add_class::<Catalog>()?;
    m.add_function(wrap_pyfunction!(lint, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(classify_sw, m)?)?;
    m.add_function(wrap_pyfunction!(cache_only_risk, m)?)?;
    m.add_function(wrap_pyfunction!(generate_mutants, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_url, m)?)?;
    m.add_function(wrap_pyfunction!(same_origin, m)?)?;
    m.add_function(wrap_pyfunction!(within_scope, m)?)?;
    Ok(())
}
