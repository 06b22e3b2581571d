//! Output directory that refuses to clobber files unless forced.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

pub struct OutDir {
    dir: PathBuf,
    force: bool,
}

impl OutDir {
    pub fn new(dir: &Path, force: bool) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), force })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let mut opts = OpenOptions::new();
        opts.write(true);
        if self.force {
            opts.create(true).truncate(true);
        } else {
            opts.create_new(true);
        }
        match opts.open(&path) {
            Ok(f) => Ok(BufWriter::new(f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!("{} exists; pass --force to overwrite", path.display())
            }
            Err(e) => Err(e).with_context(|| format!("creating {}", path.display())),
        }
    }

    /// Fails up front if any of `names` would be overwritten.
    pub fn check_free<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<()> {
        if self.force {
            return Ok(());
        }
        for n in names {
            let p = self.path(n);
            if p.exists() {
                bail!("{} exists; pass --force to overwrite", p.display());
            }
        }
        Ok(())
    }

    /// Creates `name` and hands a writer to `f`.
    pub fn write<F>(&self, name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> langevin_core::Result<()>,
    {
        let mut w = self.create(name)?;
        f(&mut w).with_context(|| format!("writing {name}"))?;
        w.flush().with_context(|| format!("writing {name}"))?;
        Ok(self.path(name))
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<PathBuf> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).with_context(|| format!("writing {name}"))?;
        writeln!(w)?;
        w.flush()?;
        Ok(self.path(name))
    }
}
