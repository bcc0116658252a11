//! Content-addressed file cache for expert replies.
//!
//! Keys are the SHA-256 of a canonical encoding of the backend identity
//! and the full request, so any change to the prompt, decoding parameters,
//! or backend yields a fresh entry. Writes go through a temporary file and
//! an atomic rename, so a crash mid-write never leaves a partial entry.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ExpertRequest;

/// On-disk reply cache; one file per request, named by its key.
#[derive(Debug, Clone)]
pub struct FileCache {
    dir: PathBuf,
}

/// Canonical key material. Field order is part of the format: changing it
/// invalidates every existing cache.
#[derive(Serialize)]
struct KeyRecord<'a> {
    backend: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    stop: &'a [String],
}

/// Content hash identifying a (backend, request) pair; doubles as the
/// cache key and as the prompt fingerprint recorded on annotations.
pub fn request_fingerprint(backend_id: &str, request: &ExpertRequest) -> String {
    let record = KeyRecord {
        backend: backend_id,
        prompt: &request.prompt_text,
        max_tokens: request.max_tokens,
        temperature: request.temperature,
        stop: &request.stop,
    };
    let encoded = serde_json::to_vec(&record).expect("key record serializes");
    hex::encode(Sha256::digest(&encoded))
}

impl FileCache {
    /// Open a cache rooted at `dir`, creating the directory if needed.
    pub fn new(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self { dir: dir.as_ref().to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Cache key for a request against a given backend.
    pub fn key(&self, backend_id: &str, request: &ExpertRequest) -> String {
        request_fingerprint(backend_id, request)
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.txt"))
    }

    /// Stored reply text, or `None` on a miss.
    pub fn get(&self, key: &str) -> io::Result<Option<String>> {
        match fs::read_to_string(self.entry_path(key)) {
            Ok(text) => Ok(Some(text)),
            Err(err) if err.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(err) => Err(err),
        }
    }

    /// Store a reply atomically: write to a temporary file in the cache
    /// directory, then rename over the final path.
    pub fn put(&self, key: &str, text: &str) -> io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(text.as_bytes())?;
        tmp.persist(self.entry_path(key)).map_err(|e| e.error)?;
        Ok(())
    }
}
