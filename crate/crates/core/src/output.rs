//! Machine-readable artifacts: CSV tables with a provenance header and JSON
//! documents. Formatting is locale-free and deterministic.

use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Round-trip formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Provenance stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Header {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub version: String,
}

impl Header {
    pub fn new(command: &str, config_hash: &str, seed: u64, n: usize) -> Self {
        Self {
            command: command.into(),
            config_hash: config_hash.into(),
            seed,
            n,
            version: VERSION.into(),
        }
    }

    /// Short identifier for CSV rows.
    pub fn instance_id(&self) -> &str {
        &self.config_hash[..self.config_hash.len().min(12)]
    }

    /// `#` lines placed at the top of every CSV artifact.
    pub fn comment_lines(&self) -> String {
        format!(
            "# spectral-reg {}\n# command: {}\n# config_hash: {}\n# seed: {}\n# N: {}\n",
            self.version, self.command, self.config_hash, self.seed, self.n
        )
    }
}

pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
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
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) => t.clone(),
        }
    }
}

/// CSV table with `#` comment lines above the column header.
pub struct Table {
    columns: Vec<String>,
    notes: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), notes: Vec::new(), rows: Vec::new() }
    }

    /// Extra `# key: value` line under the provenance header.
    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.notes.push(format!("# {key}: {value}"));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, header: &Header) -> String {
        let mut out = header.comment_lines();
        for n in &self.notes {
            out.push_str(n);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    meta: &'a Header,
    result: &'a T,
}

/// Pretty JSON `{meta, result}` with a trailing newline.
pub fn json_document<T: Serialize>(header: &Header, result: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Document { meta: header, result }).expect("serializable result");
    s.push('\n');
    s
}
