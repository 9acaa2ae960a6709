//! Atomic file output and run manifests.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use dynsolow::params::{to_config_text, ModelParams, SimConfig};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Writes through a temporary sibling file, then renames it into place.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().context("output path has no file name")?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        let mut out = BufWriter::new(file);
        fill(&mut out).with_context(|| format!("writing {}", tmp.display()))?;
        out.flush()?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |out| out.write_all(text.as_bytes()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Everything needed to rerun a command. The body is a loadable config;
/// bookkeeping lives under `meta.` keys, which the loader skips.
pub struct Manifest<'a> {
    pub command: &'a str,
    pub params: &'a ModelParams,
    pub sim: &'a SimConfig,
    pub extra: Vec<(String, String)>,
    pub outputs: Vec<String>,
    pub elapsed: Duration,
}

impl Manifest<'_> {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("meta.command = {}\n", self.command));
        s.push_str(&format!("meta.version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("meta.wall_clock_seconds = {:.6}\n", self.elapsed.as_secs_f64()));
        s.push_str(&format!("meta.outputs = {}\n", self.outputs.join(",")));
        for (k, v) in &self.extra {
            s.push_str(&format!("meta.{k} = {v}\n"));
        }
        s.push_str(&to_config_text(self.params, self.sim));
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join(MANIFEST_NAME), &self.render())
    }
}
