//! Output directory ownership, CSV tables and the run manifest.

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const LOCK_NAME: &str = ".lock";
pub const MANIFEST_NAME: &str = "manifest";

/// Exclusive handle on an output directory; the lock file is removed on drop.
pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
    timings: Vec<(String, f64)>,
    derived: Vec<(String, String)>,
}

impl OutDir {
    pub fn acquire(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => writeln!(f, "{}", std::process::id())?,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!(
                    "{} is locked by another run ({} exists)",
                    root.display(),
                    lock.display()
                )
            }
            Err(e) => return Err(e).with_context(|| format!("creating {}", lock.display())),
        }
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            timings: Vec::new(),
            derived: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn table(&mut self, name: &str, header: &[String]) -> Result<Table> {
        let path = self.root.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", header.join(","))?;
        Ok(Table {
            out,
            width: header.len(),
        })
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn derive(&mut self, key: &str, value: impl ToString) {
        self.derived.push((key.to_string(), value.to_string()));
    }

    /// Writes the manifest: config echo, version, run parameters, derived
    /// constants, timings and a sha256 digest of every emitted file.
    pub fn write_manifest(&self, command: &str, config_text: &str, seed: u64, threads: usize) -> Result<()> {
        let mut m = String::new();
        writeln!(m, "# hmcf run manifest")?;
        writeln!(m, "command = {command}")?;
        writeln!(m, "code_version = {}", crate::CODE_VERSION)?;
        writeln!(m, "seed = {seed}")?;
        writeln!(m, "threads = {threads}")?;
        writeln!(m, "\n[derived]")?;
        for (k, v) in &self.derived {
            writeln!(m, "{k} = {v}")?;
        }
        writeln!(m, "\n[timings_seconds]")?;
        for (k, v) in &self.timings {
            writeln!(m, "{k} = {v:.3}")?;
        }
        writeln!(m, "\n[files]")?;
        let mut names = self.files.clone();
        names.sort();
        let mut all = Sha256::new();
        for name in &names {
            let digest = hex::encode(file_digest(&self.root.join(name))?);
            all.update(digest.as_bytes());
            writeln!(m, "{digest}  {name}")?;
        }
        writeln!(m, "inventory_sha256 = {}", hex::encode(all.finalize()))?;
        writeln!(m, "\n[config]")?;
        for line in config_text.lines() {
            writeln!(m, "| {line}")?;
        }
        fs::write(self.root.join(MANIFEST_NAME), m)?;
        Ok(())
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.root.join(LOCK_NAME));
    }
}

pub fn file_digest(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).to_vec())
}

/// A CSV file being written; rows must match the header width.
pub struct Table {
    out: BufWriter<File>,
    width: usize,
}

/// One CSV cell; floats use the shortest round-trip form.
pub enum Cell<'a> {
    F(f64),
    U(usize),
    I(u64),
    S(&'a str),
}

impl std::fmt::Display for Cell<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(v) => write!(f, "{v:?}"),
            Cell::U(v) => write!(f, "{v}"),
            Cell::I(v) => write!(f, "{v}"),
            Cell::S(s) => write!(f, "{s}"),
        }
    }
}

impl Table {
    pub fn row(&mut self, cells: &[Cell<'_>]) -> Result<()> {
        if cells.len() != self.width {
            bail!("row has {} cells, header has {}", cells.len(), self.width);
        }
        let mut line = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "{c}")?;
        }
        writeln!(self.out, "{line}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// `prefix1..prefixN` column names.
pub fn coords(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// Header from fixed names around the coordinate block.
pub fn header(before: &[&str], n: usize, after: &[&str]) -> Vec<String> {
    before
        .iter()
        .map(|s| s.to_string())
        .chain(coords("x", n))
        .chain(after.iter().map(|s| s.to_string()))
        .collect()
}

pub fn floats(v: &[f64]) -> impl Iterator<Item = Cell<'static>> + '_ {
    v.iter().map(|x| Cell::F(*x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_excludes_a_second_owner() {
        let dir = tempfile::tempdir().unwrap();
        let first = OutDir::acquire(dir.path()).unwrap();
        assert!(OutDir::acquire(dir.path()).is_err());
        drop(first);
        assert!(OutDir::acquire(dir.path()).is_ok());
    }

    #[test]
    fn manifest_lists_every_table() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::acquire(dir.path()).unwrap();
        let mut t = out.table("a.csv", &header(&["t"], 2, &["u"])).unwrap();
        t.row(&[Cell::F(0.5), Cell::F(1.0), Cell::F(-2.0), Cell::F(0.1)])
            .unwrap();
        assert!(t.row(&[Cell::F(0.5)]).is_err());
        t.finish().unwrap();
        out.derive("cfl_dt", 0.25);
        out.write_manifest("pde", "seed = 1", 1, 1).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        let digest = hex::encode(Sha256::digest(b"t,x1,x2,u\n0.5,1.0,-2.0,0.1\n"));
        assert!(text.contains(&format!("{digest}  a.csv")), "{text}");
        assert!(text.contains("cfl_dt = 0.25"));
        assert!(text.contains("| seed = 1"));
    }
}
