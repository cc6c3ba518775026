//! One JSON document per session in a data directory, replaced atomically.

use std::path::{Path, PathBuf};

use crate::error::{Result, ServiceError};
use crate::session::SessionDoc;

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Writes to a temporary file and renames it over the old document.
    pub async fn save(&self, doc: &SessionDoc) -> Result<()> {
        let text = serde_json::to_vec(doc).map_err(|e| ServiceError::Storage(e.to_string()))?;
        let tmp = self.dir.join(format!(".{}.json.tmp", doc.id));
        tokio::fs::write(&tmp, text).await?;
        tokio::fs::rename(&tmp, self.path(&doc.id)).await?;
        Ok(())
    }

    /// Every stored session; unreadable documents are skipped with a warning.
    pub fn load_all(&self) -> Result<Vec<SessionDoc>> {
        let mut docs = Vec::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") || path.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')) {
                continue;
            }
            match std::fs::read(&path).map_err(|e| e.to_string()).and_then(|b| {
                serde_json::from_slice::<SessionDoc>(&b).map_err(|e| e.to_string())
            }) {
                Ok(doc) => docs.push(doc),
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(docs)
    }
}
