//! Output directory with a manifest of everything written to it.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use poolflip::harness::{HarnessError, RunManifest};

use crate::config::ensure_dir;
use crate::failure::{CliResult, Context};

pub struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
    manifest_file: String,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, config: serde_json::Value, manifest_file: String) -> CliResult<Self> {
        ensure_dir(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), manifest: RunManifest::new(command, config), manifest_file })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Writes `file` through `f` and records its hash.
    pub fn write<F>(&mut self, file: &str, f: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), HarnessError>,
    {
        let path = self.path(file);
        let mut w = BufWriter::new(File::create(&path).context(format!("creating {}", path.display()))?);
        f(&mut w).context(format!("writing {}", path.display()))?;
        w.into_inner().map_err(|e| e.into_error()).context(format!("flushing {}", path.display()))?;
        self.record(file)
    }

    /// Records a file some other code wrote.
    pub fn record(&mut self, file: &str) -> CliResult<()> {
        self.manifest.record(&self.dir, file).context(format!("hashing {file}"))
    }

    pub fn finish(self) -> CliResult<PathBuf> {
        let path = self.dir.join(&self.manifest_file);
        self.manifest.save(&path).context(format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Lower-case file-name tag: `B(8,3)` becomes `b8_3`.
pub fn file_tag(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        match c {
            'a'..='z' | '0'..='9' | '-' => out.push(c),
            'A'..='Z' => out.push(c.to_ascii_lowercase()),
            '(' | ')' => {}
            _ => {
                if !out.ends_with('_') {
                    out.push('_');
                }
            }
        }
    }
    out.trim_matches('_').to_string()
}
