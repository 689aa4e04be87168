use std::cell::RefCell;
use std::path::{Component, Path, PathBuf};

use serde::Serialize;

use crate::config::{Manifest, MANIFEST_FILE};
use crate::CliError;

/// Output directory; every file a subcommand produces goes through here.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: RefCell<Vec<String>>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root.display(), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: RefCell::new(Vec::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// `rel` must stay inside the directory.
    pub fn path(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = Path::new(rel);
        if rel.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(CliError::Internal(format!(
                "output path {rel:?} escapes the output directory"
            )));
        }
        Ok(self.root.join(p))
    }

    /// Writes via a temporary sibling and a rename, so readers never see a
    /// half-written file.
    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(rel)?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display(), e))?;
        }
        let tmp = path.with_extension("partial");
        std::fs::write(&tmp, bytes).map_err(|e| CliError::io(tmp.display(), e))?;
        std::fs::rename(&tmp, &path).map_err(|e| CliError::io(path.display(), e))?;
        let mut w = self.written.borrow_mut();
        if !w.iter().any(|x| x == rel) {
            w.push(rel.to_string());
        }
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn write_manifest<T: Serialize>(
        &self,
        command: &str,
        config: &T,
    ) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            tool: "gsvin".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            outputs: self.written.borrow().clone(),
        };
        self.write_json(MANIFEST_FILE, &manifest)
    }
}
