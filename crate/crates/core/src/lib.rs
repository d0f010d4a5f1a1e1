//! Security analysis for Progressive Web App manifests: linting, corpus
//! statistics, mutation fuzzing, service-worker cache classification, live
//! probes and a catalog of known installation-lifecycle risks.

pub mod catalog;
pub mod cli;
pub mod corpus;
pub mod fuzz;
pub mod lint;
pub mod manifest;
pub mod names;
pub mod probes;
pub mod sw;
pub mod url_semantics;

pub use corpus::{CorpusEntry, CorpusIndex};
pub use lint::{lint, Finding, LintReport, RuleId, Severity};
pub use manifest::{normalize, parse_manifest, Manifest, RawManifest};
pub use url_semantics::{AbsoluteUrl, Origin};
