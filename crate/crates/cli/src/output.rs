//! All-or-nothing artifact writing.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

/// File name to contents, written in name order.
#[derive(Debug, Default)]
pub struct Artifacts(BTreeMap<String, String>);

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.0.insert(name.into(), contents.into());
    }

    pub fn add_json<T: serde::Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
        s.push('\n');
        self.add(name, s);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Output {
        path: path.to_path_buf(),
        source,
    }
}

/// Stages every file under a temporary name, then renames them into place.
/// Staged files are removed if any write fails, so a failed run leaves no
/// partial artifact behind.
pub fn write_all(dir: &Path, artifacts: &Artifacts) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let pid = std::process::id();
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(artifacts.len());
    let result = (|| {
        for (name, contents) in &artifacts.0 {
            let tmp = dir.join(format!(".{name}.{pid}.tmp"));
            let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
            staged.push((tmp.clone(), dir.join(name)));
            f.write_all(contents.as_bytes()).map_err(|e| io_err(&tmp, e))?;
            f.sync_all().map_err(|e| io_err(&tmp, e))?;
        }
        for (tmp, dst) in &staged {
            fs::rename(tmp, dst).map_err(|e| io_err(dst, e))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    Ok(staged.into_iter().map(|(_, dst)| dst).collect())
}
