//! CSV tables, atomic file writes and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Shortest decimal that round-trips: positional for moderate magnitudes,
/// scientific otherwise.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Table {
    columns: usize,
    body: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            columns: header.len(),
            body: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[f64]) {
        assert_eq!(cells.len(), self.columns, "row width");
        let line: Vec<String> = cells.iter().map(|c| num(*c)).collect();
        let _ = writeln!(self.body, "{}", line.join(","));
    }

    /// Row whose cells are already formatted.
    pub fn text_row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width");
        let _ = writeln!(self.body, "{}", cells.join(","));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.body.into_bytes()
    }
}

#[derive(Debug)]
pub struct WriteError {
    pub path: PathBuf,
    pub source: io::Error,
}

impl std::fmt::Display for WriteError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.source)
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), WriteError> {
    let wrap = |source| WriteError {
        path: path.to_path_buf(),
        source,
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(wrap)?;
    f.write_all(bytes).map_err(wrap)?;
    f.sync_all().map_err(wrap)?;
    drop(f);
    fs::rename(&tmp, path).map_err(wrap)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that remembers a digest for every file it wrote.
pub struct OutputDir {
    pub root: PathBuf,
    pub files: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, WriteError> {
        fs::create_dir_all(root).map_err(|source| WriteError {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), WriteError> {
        write_atomic(&self.root.join(name), bytes)?;
        let digest = sha256_hex(bytes);
        match self.files.iter_mut().find(|(n, _)| n == name) {
            Some(entry) => entry.1 = digest,
            None => self.files.push((name.to_string(), digest)),
        }
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: Table) -> Result<(), WriteError> {
        self.write(name, &table.into_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
}

impl Check {
    /// Passes when `measured ≤ limit`.
    pub fn at_most(name: &str, measured: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: measured <= limit,
            measured,
            limit,
        }
    }

    pub fn flag(name: &str, passed: bool) -> Self {
        Self {
            name: name.to_string(),
            passed,
            measured: if passed { 1.0 } else { 0.0 },
            limit: 1.0,
        }
    }
}

pub struct Manifest {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub wall_clock_s: f64,
    pub started_unix_s: u64,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub assumptions: Vec<String>,
    pub outputs: Vec<(String, String)>,
    pub notes: Vec<(String, String)>,
    pub status: String,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "artifact: conspde {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command: {}", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}: {v}");
        }
        let _ = writeln!(s, "started_unix_s: {}", self.started_unix_s);
        let _ = writeln!(s, "wall_clock_s: {}", self.wall_clock_s);
        for (k, v) in &self.notes {
            let _ = writeln!(s, "{k}: {v}");
        }
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "fail" };
            let _ = writeln!(
                s,
                "check: {} {verdict} measured={} limit={}",
                c.name,
                num(c.measured),
                num(c.limit)
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for a in &self.assumptions {
            let _ = writeln!(s, "assumption: {a}");
        }
        for (name, digest) in &self.outputs {
            let _ = writeln!(s, "output: {name} sha256={digest}");
        }
        let _ = writeln!(s, "status: {}", self.status);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5e-7, 0.5] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(3.5e-44), "3.5e-44");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["t", "v"]);
        t.row(&[0.0, 0.25]);
        assert_eq!(String::from_utf8(t.into_bytes()).unwrap(), "t,v\n0,0.25\n");
    }

    #[test]
    fn atomic_write_replaces_and_cleans_up() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("nested")).unwrap();
        out.write("a.csv", b"x\n").unwrap();
        out.write("a.csv", b"y\n").unwrap();
        let path = dir.path().join("nested/a.csv");
        assert_eq!(fs::read(&path).unwrap(), b"y\n");
        assert!(!dir.path().join("nested/.a.csv.tmp").exists());
        assert_eq!(out.files, vec![("a.csv".to_string(), sha256_hex(b"y\n"))]);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
