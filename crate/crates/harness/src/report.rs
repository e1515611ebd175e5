//! Summary table over one or more `verdicts.json` files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::output::VerdictFile;

#[derive(Debug)]
pub enum ReportError {
    Read(PathBuf, String),
    HashMismatch { first: String, other: String, path: PathBuf },
}

impl std::fmt::Display for ReportError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReportError::Read(p, e) => write!(f, "{}: {e}", p.display()),
            ReportError::HashMismatch { first, other, path } => {
                write!(f, "{} was produced by config {other}, expected {first}", path.display())
            }
        }
    }
}

impl std::error::Error for ReportError {}

pub fn load(paths: &[PathBuf]) -> Result<Vec<VerdictFile>, ReportError> {
    let mut files = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| ReportError::Read(p.clone(), e.to_string()))?;
        let vf: VerdictFile = serde_json::from_str(&text).map_err(|e| ReportError::Read(p.clone(), e.to_string()))?;
        if let Some(first) = files.first().map(|f: &VerdictFile| f.config_hash.clone()) {
            if vf.config_hash != first {
                return Err(ReportError::HashMismatch { first, other: vf.config_hash, path: p.clone() });
            }
        }
        files.push(vf);
    }
    Ok(files)
}

/// Renders the table; the flag is true when every row passed.
pub fn render(files: &[VerdictFile]) -> (String, bool) {
    let rows: Vec<[String; 6]> = files
        .iter()
        .flat_map(|f| &f.verdicts)
        .map(|v| {
            [
                v.claim.clone(),
                v.reference.clone(),
                if v.pass { "PASS" } else { "FAIL" }.to_string(),
                format!("{:.4e}", v.measured),
                v.comparison.symbol().to_string(),
                format!("{:.4e}", v.threshold),
            ]
        })
        .collect();
    let header = ["claim", "reference", "result", "measured", "cmp", "threshold"];
    let mut widths = header.map(|h| h.chars().count());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, &header);
    for r in &rows {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let pass = rows.iter().all(|r| r[2] == "PASS");
    (out, pass)
}

pub fn report(paths: &[PathBuf]) -> Result<(String, bool), ReportError> {
    Ok(render(&load(paths)?))
}

pub fn default_path(dir: &Path) -> PathBuf {
    dir.join("verdicts.json")
}
