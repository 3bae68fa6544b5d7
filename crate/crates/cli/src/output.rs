//! Outputs are assembled in memory and written only once a command has fully
//! succeeded, each file through a temporary file renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, relative: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((relative.into(), bytes));
    }

    pub fn add_json<T: serde::Serialize>(&mut self, relative: &str, value: &T) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(relative, bytes);
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, relative: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(p, _)| p == Path::new(relative))
            .map(|(_, b)| b.as_slice())
    }

    pub fn write_all(&self, root: &Path) -> anyhow::Result<()> {
        for (relative, bytes) in &self.files {
            let path = root.join(relative);
            let dir = path.parent().unwrap_or(root);
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(&path)
                .with_context(|| format!("writing {}", path.display()))?;
            log::debug!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// CSV with a header row and one row per record; floats use the shortest
/// representation that round-trips.
pub fn csv_table<R: AsRef<[f64]>>(
    header: &[String],
    index_name: &str,
    first_index: usize,
    rows: &[R],
) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(index_name);
    for h in header {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    for (k, row) in rows.iter().enumerate() {
        out.push_str(&(first_index + k).to_string());
        for v in row.as_ref() {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out.into_bytes()
}
