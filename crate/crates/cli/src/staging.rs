//! Outputs are assembled in a staging directory and moved into place only
//! when the command succeeds; a failed run's partial files go to
//! `<out>/quarantine/<command>/` instead.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct Staging {
    out: PathBuf,
    name: String,
    dir: PathBuf,
}

impl Staging {
    pub fn new(out: &Path, name: &str) -> Result<Self> {
        let dir = out.join(format!(".staging-{name}"));
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Staging {
            out: out.to_path_buf(),
            name: name.to_string(),
            dir,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn join(&self, file: impl AsRef<Path>) -> PathBuf {
        self.dir.join(file)
    }

    /// Move every staged entry into the output directory, replacing old ones.
    pub fn commit(self) -> Result<()> {
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let target = self.out.join(entry.file_name());
            if target.is_dir() {
                fs::remove_dir_all(&target)?;
            } else if target.exists() {
                fs::remove_file(&target)?;
            }
            fs::rename(entry.path(), &target).with_context(|| format!("moving output to {}", target.display()))?;
        }
        fs::remove_dir(&self.dir)?;
        Ok(())
    }

    pub fn quarantine(self) -> Result<PathBuf> {
        let target = self.out.join("quarantine").join(&self.name);
        if target.exists() {
            fs::remove_dir_all(&target)?;
        }
        fs::create_dir_all(target.parent().expect("quarantine has a parent"))?;
        fs::rename(&self.dir, &target)?;
        Ok(target)
    }
}

/// Run `body` against a fresh staging area and commit or quarantine its output.
pub fn staged(out: &Path, name: &str, body: impl FnOnce(&Staging) -> Result<()>) -> Result<()> {
    let staging = Staging::new(out, name)?;
    match body(&staging) {
        Ok(()) => staging.commit(),
        Err(err) => {
            match staging.quarantine() {
                Ok(path) => log::warn!("partial outputs moved to {}", path.display()),
                Err(q) => log::warn!("could not quarantine partial outputs: {q:#}"),
            }
            Err(err)
        }
    }
}
