//! Configuration, orchestration and CSV output for the `autores` binary.

// `!(x > 0.0)` is used deliberately so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Outcome};
pub use config::{Command, RunConfig};
pub use error::CliError;
pub use output::CsvFile;

/// Read a run configuration from a TOML file, or from the header of a CSV
/// file this tool wrote (in which case the recorded command is returned too).
pub fn load_config(path: &std::path::Path) -> Result<(Option<Command>, RunConfig), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if text.lines().any(|l| l.starts_with("# config_sha256:")) {
        let (cmd, cfg) = CsvFile::parse(&text)?.run_config()?;
        Ok((Some(cmd), cfg))
    } else {
        Ok((None, RunConfig::from_toml(&text)?))
    }
}
