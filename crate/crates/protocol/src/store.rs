//! On-disk enrollment store: one file per user, named by the SHA-256 of the
//! user id, holding the enrollment request exactly as received.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use crate::error::Result;

const EXTENSION: &str = "hevf";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

#[derive(Debug)]
pub struct EnrollmentStore {
    dir: PathBuf,
    tmp_counter: AtomicU64,
}

impl EnrollmentStore {
    /// Opens (creating if needed) a store rooted at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, tmp_counter: AtomicU64::new(0) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, user_id: &str) -> PathBuf {
        self.dir.join(format!("{}.{EXTENSION}", hex(&digest(user_id.as_bytes()))))
    }

    /// Writes the record atomically, replacing any previous one for the
    /// same user. Returns the record's digest.
    pub fn put(&self, user_id: &str, record: &[u8]) -> Result<[u8; 32]> {
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = self.dir.join(format!(".tmp-{}-{n}", std::process::id()));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(record)?;
        f.sync_all()?;
        drop(f);
        if let Err(e) = fs::rename(&tmp, self.path_for(user_id)) {
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        Ok(digest(record))
    }

    pub fn get(&self, user_id: &str) -> Result<Option<Vec<u8>>> {
        match fs::read(self.path_for(user_id)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn contains(&self, user_id: &str) -> bool {
        self.path_for(user_id).is_file()
    }

    pub fn remove(&self, user_id: &str) -> Result<bool> {
        match fs::remove_file(self.path_for(user_id)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    /// Paths of all stored records.
    pub fn records(&self) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == EXTENSION) {
                out.push(p);
            }
        }
        out.sort();
        Ok(out)
    }
}
