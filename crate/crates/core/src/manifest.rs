//! JSON manifest describing the persistent level set.
//!
//! Replaced atomically: written to `MANIFEST.tmp`, synced, then renamed over
//! `MANIFEST`. Keys are stored hex-encoded.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunk::ChunkMeta;
use crate::config::{CompactionMode, IndexKind};
use crate::error::{Error, Result};
use crate::key::StoreKey;
use crate::wal::sync_dir;

pub const MANIFEST_FILE: &str = "MANIFEST";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub mode: CompactionMode,
    pub growth_factor: usize,
    pub next_chunk_id: u64,
    pub next_run_ordinal: u64,
    /// Every record with a seqno at or below this is in a chunk.
    pub flushed_seqno: u64,
    pub levels: Vec<LevelEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub level: u32,
    /// Newest run first.
    pub runs: Vec<RunEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEntry {
    pub ordinal: u64,
    pub chunks: Vec<ChunkEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub prefix: String,
    pub suffix: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkEntry {
    pub id: u64,
    pub file: String,
    pub record_count: u64,
    pub block_count: u32,
    pub smallest: KeyEntry,
    pub largest: KeyEntry,
    pub min_seqno: u64,
    pub max_seqno: u64,
    pub index_kind: IndexKind,
    pub file_size: u64,
}

impl From<&StoreKey> for KeyEntry {
    fn from(k: &StoreKey) -> Self {
        KeyEntry {
            prefix: hex::encode(k.prefix()),
            suffix: hex::encode(k.suffix()),
        }
    }
}

impl KeyEntry {
    fn to_key(&self) -> Result<StoreKey> {
        let decode = |s: &str| hex::decode(s).map_err(|e| Error::Manifest(e.to_string()));
        StoreKey::new(decode(&self.prefix)?, decode(&self.suffix)?)
            .map_err(|e| Error::Manifest(e.to_string()))
    }
}

impl From<&ChunkMeta> for ChunkEntry {
    fn from(m: &ChunkMeta) -> Self {
        ChunkEntry {
            id: m.id,
            file: m.file_name.clone(),
            record_count: m.record_count,
            block_count: m.block_count,
            smallest: (&m.smallest).into(),
            largest: (&m.largest).into(),
            min_seqno: m.min_seqno,
            max_seqno: m.max_seqno,
            index_kind: m.index_kind,
            file_size: m.file_size,
        }
    }
}

impl ChunkEntry {
    pub fn to_meta(&self, level: u32, sublevel: u64) -> Result<ChunkMeta> {
        let meta = ChunkMeta {
            id: self.id,
            level,
            sublevel,
            file_name: self.file.clone(),
            record_count: self.record_count,
            block_count: self.block_count,
            smallest: self.smallest.to_key()?,
            largest: self.largest.to_key()?,
            min_seqno: self.min_seqno,
            max_seqno: self.max_seqno,
            index_kind: self.index_kind,
            file_size: self.file_size,
        };
        if meta.largest < meta.smallest {
            return Err(Error::Manifest(format!("chunk {} has inverted key range", meta.id)));
        }
        Ok(meta)
    }
}

impl Manifest {
    pub fn empty(mode: CompactionMode, growth_factor: usize) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            mode,
            growth_factor,
            next_chunk_id: 1,
            next_run_ordinal: 1,
            flushed_seqno: 0,
            levels: Vec::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let bytes = match fs::read(dir.join(MANIFEST_FILE)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|e| Error::Manifest(e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        Ok(Some(manifest))
    }

    /// Atomically replaces the manifest. Returns the bytes written.
    pub fn store(&self, dir: &Path) -> Result<u64> {
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::Manifest(e.to_string()))?;
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&json)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
        sync_dir(dir)?;
        Ok(json.len() as u64)
    }

    pub fn chunk_files(&self) -> impl Iterator<Item = &str> {
        self.levels
            .iter()
            .flat_map(|l| &l.runs)
            .flat_map(|r| &r.chunks)
            .map(|c| c.file.as_str())
    }
}
