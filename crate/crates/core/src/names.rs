//! Name canonicalization shared by the duplicate-name rule and the corpus
//! index, so both agree on what "the same name" means.

use unicode_normalization::UnicodeNormalization;

/// Names that ship with project scaffolds and are rarely changed.
pub const TEMPLATE_NAMES: &[&str] = &[
    "Create React App Sample",
    "React App",
    "Vite App",
    "Vite + React",
    "Vue App",
    "Angular App",
    "Ionic App",
    "Next.js App",
    "My App",
    "My PWA",
    "PWA App",
    "App",
];

/// Trim, compose (NFC), then case-fold.
pub fn normalize_name(name: &str) -> String {
    name.trim().nfc().collect::<String>().to_lowercase()
}

pub fn is_template_name(name: &str) -> bool {
    let n = normalize_name(name);
    TEMPLATE_NAMES.iter().any(|t| normalize_name(t) == n)
}
