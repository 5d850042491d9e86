//! Line-delimited JSON manifests, one [`ManifestEntry`] per line.

use memefuse_core::ManifestEntry;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("manifest line {line}: {source}")]
pub struct ManifestError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

/// Parses a manifest. Blank lines are skipped; line numbers are 1-based.
pub fn parse(text: &str) -> Result<Vec<ManifestEntry>, ManifestError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| ManifestError { line: i + 1, source }))
        .collect()
}

pub fn render(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("manifest entries always serialize"));
        out.push('\n');
    }
    out
}
