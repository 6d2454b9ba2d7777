//! Buffered output: every file is staged first and written only when none of them would
//! overwrite an existing file (unless forced).

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::exit::{CliError, ExitCode};

pub const OUT_ENV: &str = "THRESHOLDOPT_OUT";
pub const DEFAULT_OUT: &str = "thresholdopt-out";

/// `THRESHOLDOPT_OUT`, then `--out`, then the default.
pub fn output_root(flag: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => flag.map_or_else(|| PathBuf::from(DEFAULT_OUT), Path::to_path_buf),
    }
}

pub struct Staged {
    root: PathBuf,
    force: bool,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn new(root: PathBuf, force: bool) -> Self {
        Self { root, force, files: Vec::new() }
    }

    pub fn add(&mut self, rel: impl AsRef<Path>, bytes: impl Into<Vec<u8>>) {
        self.files.push((self.root.join(rel), bytes.into()));
    }

    pub fn add_json(&mut self, rel: impl AsRef<Path>, value: &impl Serialize) {
        let mut text = serde_json::to_string_pretty(value).expect("output serializes");
        text.push('\n');
        self.add(rel, text);
    }

    pub fn commit(self) -> Result<(), CliError> {
        if !self.force {
            let existing: Vec<String> =
                self.files.iter().filter(|(p, _)| p.exists()).map(|(p, _)| p.display().to_string()).collect();
            if !existing.is_empty() {
                return Err(CliError::new(
                    ExitCode::Io,
                    format!("refusing to overwrite {} (use --force): {}", existing.len(), existing.join(", ")),
                ));
            }
        }
        for (path, bytes) in &self.files {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
            }
            std::fs::write(path, bytes).map_err(|e| io_error(path, e))?;
        }
        log::info!("wrote {} files under {}", self.files.len(), self.root.display());
        Ok(())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(ExitCode::Io, format!("{}: {e}", path.display()))
}
