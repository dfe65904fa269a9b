//! CSV files with a `#` metadata header.
//!
//! The header records the command, engine, seed and the canonical
//! configuration, one TOML line per `# | ` line, together with a git-style
//! SHA-256 content hash of that configuration. Nothing run-dependent (time,
//! worker count, output path) goes into a file, so identical configurations
//! produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{Command, RunConfig};
use crate::error::CliError;

const CONFIG_PREFIX: &str = "# | ";

/// SHA-256 of `blob <len>\0<content>`, the object hash git uses for files.
pub fn blob_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Metadata block for one output file. `extra` lines are `key: value`
/// notes specific to the file.
pub fn header(cmd: Command, cfg: &RunConfig, extra: &[(&str, String)]) -> String {
    let toml = cfg.to_toml();
    let mut s = String::new();
    let _ = writeln!(s, "# generator: autores {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# command: {}", cmd.name());
    let _ = writeln!(s, "# engine: {}", cfg.engine.kind);
    let _ = writeln!(s, "# seed0: {}", cfg.ensemble.seed0);
    let _ = writeln!(s, "# sweep: {}", cfg.sweep.parameter);
    for (k, v) in extra {
        let _ = writeln!(s, "# {k}: {v}");
    }
    let _ = writeln!(s, "# config_sha256: {}", blob_hash(&toml));
    let _ = writeln!(s, "# config:");
    for line in toml.lines() {
        let _ = writeln!(s, "{CONFIG_PREFIX}{line}");
    }
    s
}

/// A parsed output file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    /// `key: value` metadata lines in file order.
    pub meta: Vec<(String, String)>,
    /// The embedded configuration text.
    pub config_toml: String,
    /// Everything after the header: column names and rows.
    pub body: String,
}

impl CsvFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut meta = Vec::new();
        let mut config_toml = String::new();
        let mut body_start = text.len();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            if !line.starts_with('#') {
                body_start = offset;
                break;
            }
            let trimmed = line.trim_end_matches(['\n', '\r']);
            if let Some(cfg_line) = trimmed.strip_prefix(CONFIG_PREFIX) {
                config_toml.push_str(cfg_line);
                config_toml.push('\n');
            } else if trimmed == CONFIG_PREFIX.trim_end() {
                config_toml.push('\n');
            } else if let Some((k, v)) = trimmed.trim_start_matches('#').trim().split_once(": ") {
                meta.push((k.to_string(), v.to_string()));
            } else if let Some(k) = trimmed.trim_start_matches('#').trim().strip_suffix(':') {
                meta.push((k.to_string(), String::new()));
            }
            offset += line.len();
        }
        Ok(Self {
            meta,
            config_toml,
            body: text[body_start..].to_string(),
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// The configuration and command that produced this file, after
    /// checking the recorded hash.
    pub fn run_config(&self) -> Result<(Command, RunConfig), CliError> {
        let bad = |reason: String| CliError::Config {
            path: "<header>".into(),
            reason,
        };
        let cmd = self
            .get("command")
            .and_then(Command::from_name)
            .ok_or_else(|| bad("missing or unknown `command` line".into()))?;
        let recorded = self.get("config_sha256").ok_or_else(|| bad("missing `config_sha256` line".into()))?;
        let actual = blob_hash(&self.config_toml);
        if recorded != actual {
            return Err(bad(format!("config hash mismatch: header {recorded}, content {actual}")));
        }
        Ok((cmd, RunConfig::from_toml(&self.config_toml)?))
    }

    /// Rows of the body as string fields (header row excluded).
    pub fn rows(&self) -> Vec<Vec<String>> {
        self.body
            .lines()
            .skip(1)
            .filter(|l| !l.is_empty())
            .map(split_csv_line)
            .collect()
    }

    pub fn columns(&self) -> Vec<String> {
        self.body.lines().next().map(split_csv_line).unwrap_or_default()
    }

    /// Every value of the named column, if it exists.
    pub fn column(&self, name: &str) -> Option<Vec<String>> {
        let idx = self.columns().iter().position(|c| c == name)?;
        Some(self.rows().into_iter().map(|mut r| r.swap_remove(idx)).collect())
    }
}

/// Split one CSV line, honouring double-quoted fields.
fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

/// Collects finished files and writes them only once the whole run has
/// produced its data, so a failed run leaves no partial outputs behind.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn add(&mut self, name: &str, header: String, body: &str) {
        self.files.push((name.to_string(), header + body));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn contents(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for (name, text) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(io(&path))?;
            written.push(path);
        }
        Ok(written)
    }
}
