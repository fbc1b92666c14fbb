use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{GridSpec, RunConfig, Tolerances};
use crate::error::CliError;

/// Envelope shared by every command's `report.json`.
#[derive(Debug, Serialize)]
pub struct Report<B: Serialize> {
    pub command: String,
    pub config_hash: String,
    pub tolerances: Tolerances,
    pub grid: GridSpec,
    pub n_max: usize,
    pub pass: bool,
    pub body: B,
}

impl<B: Serialize> Report<B> {
    pub fn new(command: &str, config: &RunConfig, pass: bool, body: B) -> Self {
        Self {
            command: command.into(),
            config_hash: config.hash(),
            tolerances: config.tolerances,
            grid: config.grid,
            n_max: config.n_max,
            pass,
            body,
        }
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(out)?;
        let path = out.join("report.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Directory for per-weight artifacts: `out` itself for a single weight,
/// `out/<slug>` otherwise.
pub fn artifact_dir(out: &Path, weight_id: &str, many: bool) -> Result<PathBuf, CliError> {
    let dir = if many {
        let slug: String = weight_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
            .collect();
        out.join(slug)
    } else {
        out.to_path_buf()
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}
