//! Immutable on-disk chunks.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! [block 0][block 1]...[block n-1]
//! [index region: u32 n | n x (u64 offset, u32 len) | index body]
//! [u32 crc32 per block][u64 index offset][u8 index kind][u32 block count]["STEPCHNK"]
//! ```
//!
//! A block is `u32 record count` followed by encoded records. Blocks are
//! packed greedily up to `block_size`; a record larger than a block gets a
//! block of its own.

mod vanilla;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::os::unix::fs::FileExt;
use std::path::Path;

pub use vanilla::VanillaBlockIndex;

use crate::config::IndexKind;
use crate::error::{Error, Result};
use crate::key::StoreKey;
use crate::record::{EntryRecord, Lookup};
use crate::slim_index::ThreeLevelIndex;

pub const CHUNK_MAGIC: &[u8; 8] = b"STEPCHNK";
const TRAILER_LEN: usize = 8 + 1 + 4 + 8;

pub fn chunk_file_name(level: u32, sublevel: u64, id: u64) -> String {
    format!("L{level}_S{sublevel}_{id}.chk")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataBlock {
    pub entries: Vec<EntryRecord>,
}

impl DataBlock {
    pub fn get(&self, key: &StoreKey) -> Option<&EntryRecord> {
        self.entries
            .binary_search_by(|r| r.key.cmp(key))
            .ok()
            .map(|i| &self.entries[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockHandle {
    pub offset: u64,
    pub len: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChunkIndex {
    Vanilla(VanillaBlockIndex),
    ThreeLevel(ThreeLevelIndex),
}

impl ChunkIndex {
    pub fn build(kind: IndexKind, bounds: Vec<(StoreKey, StoreKey)>) -> Result<Self> {
        crate::slim_index::check_bounds(&bounds)?;
        Ok(match kind {
            IndexKind::Vanilla => ChunkIndex::Vanilla(VanillaBlockIndex::new(bounds)),
            IndexKind::ThreeLevel => ChunkIndex::ThreeLevel(ThreeLevelIndex::build(&bounds)?),
        })
    }

    pub fn kind(&self) -> IndexKind {
        match self {
            ChunkIndex::Vanilla(_) => IndexKind::Vanilla,
            ChunkIndex::ThreeLevel(_) => IndexKind::ThreeLevel,
        }
    }

    pub fn find(&self, key: &StoreKey) -> Option<usize> {
        match self {
            ChunkIndex::Vanilla(idx) => idx.lookup(key),
            ChunkIndex::ThreeLevel(idx) => idx.find(key),
        }
    }

    pub fn first_block_for_prefix(&self, prefix: &[u8]) -> Option<usize> {
        match self {
            ChunkIndex::Vanilla(idx) => idx.first_block_for_prefix(prefix),
            ChunkIndex::ThreeLevel(idx) => idx.first_block_for_prefix(prefix),
        }
    }

    fn encode(&self) -> Vec<u8> {
        match self {
            ChunkIndex::Vanilla(idx) => idx.encode(),
            ChunkIndex::ThreeLevel(idx) => idx.encode(),
        }
    }
}

/// Everything the manifest records about a chunk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkMeta {
    pub id: u64,
    pub level: u32,
    pub sublevel: u64,
    pub file_name: String,
    pub record_count: u64,
    pub block_count: u32,
    pub smallest: StoreKey,
    pub largest: StoreKey,
    pub min_seqno: u64,
    pub max_seqno: u64,
    pub index_kind: IndexKind,
    pub file_size: u64,
}

/// Where and how to write a chunk.
#[derive(Clone, Copy, Debug)]
pub struct ChunkSpec<'a> {
    pub dir: &'a Path,
    pub id: u64,
    pub level: u32,
    pub sublevel: u64,
    pub index_kind: IndexKind,
    pub block_size: usize,
}

/// Greedy packing: ranges of `records` forming each block.
pub fn plan_blocks(records: &[EntryRecord], block_size: usize) -> Vec<std::ops::Range<usize>> {
    let mut blocks = Vec::new();
    let mut start = 0;
    let mut size = 4;
    for (i, rec) in records.iter().enumerate() {
        let len = rec.encoded_len();
        if i > start && size + len > block_size {
            blocks.push(start..i);
            start = i;
            size = 4;
        }
        size += len;
    }
    if start < records.len() {
        blocks.push(start..records.len());
    }
    blocks
}

/// Writes `records` (strictly ascending, one per key) as a chunk file.
pub fn build_chunk(records: &[EntryRecord], spec: &ChunkSpec<'_>) -> Result<ChunkMeta> {
    if records.is_empty() {
        return Err(Error::EmptyChunk);
    }
    if records.windows(2).any(|w| w[0].key >= w[1].key) {
        return Err(Error::UnsortedInput);
    }

    let plan = plan_blocks(records, spec.block_size);
    let mut data = Vec::new();
    let mut handles = Vec::with_capacity(plan.len());
    let mut checksums = Vec::with_capacity(plan.len());
    let mut bounds = Vec::with_capacity(plan.len());
    for range in &plan {
        let start = data.len();
        data.extend_from_slice(&(range.len() as u32).to_le_bytes());
        for rec in &records[range.clone()] {
            rec.encode_into(&mut data);
        }
        checksums.push(crc32fast::hash(&data[start..]));
        handles.push(BlockHandle {
            offset: start as u64,
            len: (data.len() - start) as u32,
        });
        bounds.push((
            records[range.start].key.clone(),
            records[range.end - 1].key.clone(),
        ));
    }
    let index = ChunkIndex::build(spec.index_kind, bounds)?;

    let index_offset = data.len() as u64;
    data.extend_from_slice(&(handles.len() as u32).to_le_bytes());
    for h in &handles {
        data.extend_from_slice(&h.offset.to_le_bytes());
        data.extend_from_slice(&h.len.to_le_bytes());
    }
    data.extend_from_slice(&index.encode());
    for crc in &checksums {
        data.extend_from_slice(&crc.to_le_bytes());
    }
    data.extend_from_slice(&index_offset.to_le_bytes());
    data.push(spec.index_kind.tag());
    data.extend_from_slice(&(handles.len() as u32).to_le_bytes());
    data.extend_from_slice(CHUNK_MAGIC);

    let file_name = chunk_file_name(spec.level, spec.sublevel, spec.id);
    let mut file = OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(spec.dir.join(&file_name))?;
    file.write_all(&data)?;
    file.sync_data()?;

    Ok(ChunkMeta {
        id: spec.id,
        level: spec.level,
        sublevel: spec.sublevel,
        file_name,
        record_count: records.len() as u64,
        block_count: handles.len() as u32,
        smallest: records[0].key.clone(),
        largest: records[records.len() - 1].key.clone(),
        min_seqno: records.iter().map(|r| r.seqno).min().expect("non-empty"),
        max_seqno: records.iter().map(|r| r.seqno).max().expect("non-empty"),
        index_kind: spec.index_kind,
        file_size: data.len() as u64,
    })
}

/// Read access to one chunk. The index and block handles stay in memory;
/// blocks are read from the file on demand.
#[derive(Debug)]
pub struct ChunkReader {
    name: String,
    file: File,
    handles: Vec<BlockHandle>,
    checksums: Vec<u32>,
    index: ChunkIndex,
    file_len: u64,
}

impl ChunkReader {
    pub fn open(path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = File::open(path)?;
        let file_len = file.metadata()?.len();
        let corrupt = |reason: &str| Error::corrupted(name.clone(), reason);
        if file_len < TRAILER_LEN as u64 {
            return Err(corrupt("file shorter than trailer"));
        }
        let mut trailer = [0u8; TRAILER_LEN];
        file.read_exact_at(&mut trailer, file_len - TRAILER_LEN as u64)?;
        if &trailer[13..] != CHUNK_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let index_offset = u64::from_le_bytes(trailer[0..8].try_into().expect("8 bytes"));
        let kind = IndexKind::from_tag(trailer[8]).ok_or_else(|| corrupt("unknown index kind"))?;
        let blocks = u32::from_le_bytes(trailer[9..13].try_into().expect("4 bytes")) as u64;
        let crc_start = file_len
            .checked_sub(TRAILER_LEN as u64 + 4 * blocks)
            .filter(|&s| s >= index_offset)
            .ok_or_else(|| corrupt("footer does not fit"))?;

        let mut region = vec![0u8; (file_len - TRAILER_LEN as u64 - index_offset) as usize];
        file.read_exact_at(&mut region, index_offset)?;
        let (index_region, crc_region) = region.split_at((crc_start - index_offset) as usize);
        let checksums: Vec<u32> = crc_region
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();

        if index_region.len() < 4 {
            return Err(corrupt("index region truncated"));
        }
        let n = u32::from_le_bytes(index_region[..4].try_into().expect("4 bytes")) as usize;
        if n as u64 != blocks || index_region.len() < 4 + 12 * n {
            return Err(corrupt("block handle table truncated"));
        }
        let mut handles = Vec::with_capacity(n);
        for entry in index_region[4..4 + 12 * n].chunks_exact(12) {
            let h = BlockHandle {
                offset: u64::from_le_bytes(entry[..8].try_into().expect("8 bytes")),
                len: u32::from_le_bytes(entry[8..].try_into().expect("4 bytes")),
            };
            if h.offset + u64::from(h.len) > index_offset {
                return Err(corrupt("block handle past data region"));
            }
            handles.push(h);
        }
        let body = &index_region[4 + 12 * n..];
        let index = match kind {
            IndexKind::Vanilla => VanillaBlockIndex::decode(body, n).map(ChunkIndex::Vanilla),
            IndexKind::ThreeLevel => ThreeLevelIndex::decode(body).map(ChunkIndex::ThreeLevel),
        }
        .map_err(|e| corrupt(e.0))?;

        Ok(ChunkReader {
            name,
            file,
            handles,
            checksums,
            index,
            file_len,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn block_count(&self) -> usize {
        self.handles.len()
    }

    pub fn index(&self) -> &ChunkIndex {
        &self.index
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    pub fn read_block(&self, ordinal: usize) -> Result<DataBlock> {
        let handle = *self.handles.get(ordinal).ok_or(Error::OutOfRange {
            ordinal,
            count: self.handles.len(),
        })?;
        let mut buf = vec![0u8; handle.len as usize];
        self.file.read_exact_at(&mut buf, handle.offset)?;
        if crc32fast::hash(&buf) != self.checksums[ordinal] {
            return Err(Error::corrupted(
                self.name.clone(),
                format!("checksum mismatch in block {ordinal}"),
            ));
        }
        self.decode_block(ordinal, &buf)
    }

    fn decode_block(&self, ordinal: usize, buf: &[u8]) -> Result<DataBlock> {
        let corrupt = |reason: String| Error::corrupted(self.name.clone(), reason);
        if buf.len() < 4 {
            return Err(corrupt(format!("block {ordinal} truncated")));
        }
        let count = u32::from_le_bytes(buf[..4].try_into().expect("4 bytes")) as usize;
        let mut rest = &buf[4..];
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let rec = EntryRecord::decode(&mut rest)
                .map_err(|e| corrupt(format!("block {ordinal}: {e}")))?;
            entries.push(rec);
        }
        if !rest.is_empty() {
            return Err(corrupt(format!("block {ordinal}: trailing bytes")));
        }
        Ok(DataBlock { entries })
    }

    /// Index lookup followed by a confirming block read.
    pub fn get(&self, key: &StoreKey) -> Result<Lookup> {
        let Some(block) = self.index.find(key) else {
            return Ok(Lookup::Absent);
        };
        Ok(self
            .read_block(block)?
            .get(key)
            .map_or(Lookup::Absent, |r| Lookup::from(&r.value)))
    }

    /// Every record (tombstones included) whose key has `prefix`.
    pub fn prefix_records(&self, prefix: &[u8]) -> Result<Vec<EntryRecord>> {
        let mut out = Vec::new();
        let Some(start) = self.index.first_block_for_prefix(prefix) else {
            return Ok(out);
        };
        for ordinal in start..self.block_count() {
            let block = self.read_block(ordinal)?;
            for rec in block.entries {
                match rec.key.prefix().cmp(prefix) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => out.push(rec),
                    std::cmp::Ordering::Greater => return Ok(out),
                }
            }
        }
        Ok(out)
    }

    pub fn iter(&self) -> ChunkIter<'_> {
        ChunkIter {
            reader: self,
            next_block: 0,
            buffered: Vec::new().into_iter(),
        }
    }

    /// Reads every block, checking checksums and key order. Returns the
    /// record count.
    pub fn verify(&self) -> Result<u64> {
        let mut count = 0u64;
        let mut prev: Option<StoreKey> = None;
        for rec in self.iter() {
            let rec = rec?;
            if prev.as_ref().is_some_and(|p| *p >= rec.key) {
                return Err(Error::corrupted(self.name.clone(), "records out of order"));
            }
            prev = Some(rec.key);
            count += 1;
        }
        Ok(count)
    }
}

/// Streams a chunk's records in key order, one block at a time.
pub struct ChunkIter<'a> {
    reader: &'a ChunkReader,
    next_block: usize,
    buffered: std::vec::IntoIter<EntryRecord>,
}

impl Iterator for ChunkIter<'_> {
    type Item = Result<EntryRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(rec) = self.buffered.next() {
                return Some(Ok(rec));
            }
            if self.next_block >= self.reader.block_count() {
                return None;
            }
            let ordinal = self.next_block;
            self.next_block += 1;
            match self.reader.read_block(ordinal) {
                Ok(block) => self.buffered = block.entries.into_iter(),
                Err(e) => {
                    self.next_block = self.reader.block_count();
                    return Some(Err(e));
                }
            }
        }
    }
}
