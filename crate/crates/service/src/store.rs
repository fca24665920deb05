//! One JSON document per campaign under a data directory.
//!
//! Writes go to a temporary file in the same directory, are fsynced, then
//! renamed over the previous document, so a crash at any point leaves either
//! the old or the new revision on disk.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use kiln_core::campaign::Campaign;
use kiln_core::wire::{self, SerializeError, WireError};
use thiserror::Error;

/// Called after the temporary file is durable and before the rename. An
/// error aborts the write as if the process died there.
pub type FailureHook = Arc<dyn Fn(&Path) -> io::Result<()> + Send + Sync>;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("campaign `{0}` not found")]
    NotFound(String),
    #[error("campaign `{0}` is busy with another request")]
    Busy(String),
    #[error("campaign `{0}` already exists")]
    Exists(String),
    #[error("stored campaign `{id}` is unreadable: {error}")]
    Corrupt { id: String, error: WireError },
    #[error(transparent)]
    Serialize(#[from] SerializeError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub struct Store {
    dir: PathBuf,
    busy: Mutex<HashSet<String>>,
    hook: Option<FailureHook>,
}

/// Exclusive claim on one campaign; released on drop.
pub struct CampaignLock<'a> {
    store: &'a Store,
    id: String,
}

impl Drop for CampaignLock<'_> {
    fn drop(&mut self) {
        self.store
            .busy
            .lock()
            .expect("lock set poisoned")
            .remove(&self.id);
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            busy: Mutex::new(HashSet::new()),
            hook: None,
        })
    }

    pub fn with_failure_hook(mut self, hook: FailureHook) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        Ok(self.dir.join(format!("{id}.json")))
    }

    /// Claims `id` or fails immediately if another request holds it.
    pub fn try_lock(&self, id: &str) -> Result<CampaignLock<'_>, StoreError> {
        let mut busy = self.busy.lock().expect("lock set poisoned");
        if !busy.insert(id.to_owned()) {
            return Err(StoreError::Busy(id.to_owned()));
        }
        Ok(CampaignLock {
            store: self,
            id: id.to_owned(),
        })
    }

    pub fn load(&self, id: &str) -> Result<Campaign, StoreError> {
        let path = self.path(id)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.to_owned()))
            }
            Err(e) => return Err(e.into()),
        };
        wire::deserialize_bytes(&bytes).map_err(|error| StoreError::Corrupt {
            id: id.to_owned(),
            error,
        })
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path(id).is_ok_and(|p| p.exists())
    }

    /// Every readable campaign, ordered by id.
    pub fn list(&self) -> Result<Vec<Campaign>, StoreError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(Result::ok)
            .filter_map(|e| {
                e.file_name()
                    .to_str()?
                    .strip_suffix(".json")
                    .map(str::to_owned)
            })
            .filter(|id| valid_id(id))
            .collect();
        ids.sort();
        ids.iter().map(|id| self.load(id)).collect()
    }

    /// Writes a new campaign; fails if the id is taken.
    pub fn create(&self, campaign: &Campaign) -> Result<(), StoreError> {
        if self.exists(&campaign.id) {
            return Err(StoreError::Exists(campaign.id.clone()));
        }
        self.save(campaign)
    }

    /// Atomically replaces the stored document.
    pub fn save(&self, campaign: &Campaign) -> Result<(), StoreError> {
        let path = self.path(&campaign.id)?;
        let text = wire::serialize(campaign)?;
        let tmp = self.dir.join(format!(
            ".{}.{}.tmp",
            campaign.id,
            uuid::Uuid::new_v4().simple()
        ));
        let mut file = File::create(&tmp)?;
        file.write_all(text.as_bytes())?;
        file.sync_all()?;
        drop(file);
        if let Some(hook) = &self.hook {
            hook(&tmp)?;
        }
        fs::rename(&tmp, &path)?;
        // make the rename itself durable
        if let Ok(dir) = File::open(&self.dir) {
            let _ = dir.sync_all();
        }
        Ok(())
    }
}
