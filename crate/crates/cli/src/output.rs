//! Run manifests and atomic output directories.

use std::fs;
use std::path::{Path, PathBuf};

use adlab::TorusGrid;
use serde::Serialize;

use crate::config::Tolerances;
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Gate {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Gate {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Gate { name: name.into(), pass: value <= tolerance, value, tolerance }
    }

    pub fn check(name: &str, pass: bool) -> Self {
        Gate { name: name.into(), pass, value: if pass { 1.0 } else { 0.0 }, tolerance: 1.0 }
    }
}

/// Everything an experiment produces before it is committed to disk.
#[derive(Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub gates: Vec<Gate>,
    pub grid: Option<TorusGrid>,
    pub warnings: Vec<String>,
    /// Experiment-specific summary embedded in the manifest.
    pub summary: serde_json::Value,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub kind: String,
    pub config_hash: Option<String>,
    pub seed: u64,
    pub threads: usize,
    pub grid: Option<TorusGrid>,
    pub tolerances: Tolerances,
    pub wall_time_s: f64,
    pub passed: bool,
    pub gates: Vec<Gate>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn sibling(target: &Path, tag: &str) -> PathBuf {
    let name = target.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    target.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

/// Writes `files` into a fresh sibling directory and renames it onto
/// `target`, replacing a previous run directory only after the new one is
/// complete.
pub fn commit_dir(target: &Path, files: &[(String, Vec<u8>)]) -> Result<(), CliError> {
    if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let tmp = sibling(target, "tmp");
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| io_err(&tmp, e))?;
    }
    fs::create_dir(&tmp).map_err(|e| io_err(&tmp, e))?;
    let result = (|| {
        for (name, bytes) in files {
            let p = tmp.join(name);
            fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
        }
        if target.exists() {
            if !target.is_dir() {
                return Err(CliError::Io(format!("{} exists and is not a directory", target.display())));
            }
            let old = sibling(target, "old");
            fs::rename(target, &old).map_err(|e| io_err(target, e))?;
            fs::rename(&tmp, target).map_err(|e| io_err(target, e))?;
            fs::remove_dir_all(&old).map_err(|e| io_err(&old, e))?;
        } else {
            fs::rename(&tmp, target).map_err(|e| io_err(target, e))?;
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

/// Writes one file through a temporary sibling and a rename.
pub fn commit_file(target: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let tmp = sibling(target, "tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, target).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(target, e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replaces_previous_run() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("run");
        commit_dir(&target, &[("a.txt".into(), b"1".to_vec())]).unwrap();
        commit_dir(&target, &[("b.txt".into(), b"2".to_vec())]).unwrap();
        assert!(!target.join("a.txt").exists());
        assert_eq!(fs::read(target.join("b.txt")).unwrap(), b"2");
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn refuses_file_target() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("f");
        fs::write(&target, b"x").unwrap();
        assert!(matches!(commit_dir(&target, &[]), Err(CliError::Io(_))));
        assert_eq!(fs::read(&target).unwrap(), b"x");
    }
}
