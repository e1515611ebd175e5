//! Verdict records and CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::claims::lookup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">=")]
    AtLeast,
}

impl Comparison {
    pub fn holds(self, measured: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => measured <= threshold,
            Comparison::Below => measured < threshold,
            Comparison::AtLeast => measured >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::AtMost => "<=",
            Comparison::Below => "<",
            Comparison::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claim: String,
    pub reference: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub pass: bool,
    pub runtime_s: f64,
    #[serde(default)]
    pub details: Value,
}

impl Verdict {
    /// Builds a verdict for a registered claim; the reference string is
    /// taken from the registry.
    ///
    /// ```
    /// use hyperlab_harness::output::{Comparison, Verdict};
    /// let v = Verdict::new("outfield.rate", -1.0, Comparison::AtMost, -0.7, 0.1);
    /// assert!(v.pass);
    /// assert_eq!(v.reference, hyperlab_harness::claims::lookup("outfield.rate").unwrap().reference);
    /// ```
    pub fn new(claim: &str, measured: f64, comparison: Comparison, threshold: f64, runtime_s: f64) -> Self {
        let entry = lookup(claim).unwrap_or_else(|| panic!("claim {claim} is not registered"));
        Verdict {
            claim: claim.to_string(),
            reference: entry.reference.to_string(),
            measured,
            comparison,
            threshold,
            pass: measured.is_finite() && comparison.holds(measured, threshold),
            runtime_s,
            details: Value::Null,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    /// Overrides the comparison outcome with an additional requirement.
    pub fn require(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub command: String,
    pub config: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub verdicts: Vec<Verdict>,
}

impl VerdictFile {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest round-trip representation; identical bits print identically
            Cell::Num(x) => format!("{x:e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}

pub struct CsvTable {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &str, header: &[&str]) -> Self {
        CsvTable { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(cells.iter().map(Cell::render).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes `<dir>/<name>.csv`: a `# config_sha256=` comment line, the
    /// header, then the rows.
    pub fn write(&self, dir: &Path, config_hash: &str) -> anyhow::Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut buf = format!("# config_sha256={config_hash}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        fs::write(&path, buf)?;
        Ok(path)
    }
}
