//! Persistent level set and compaction.
//!
//! A [`LevelSet`] is an immutable snapshot: levels shallow to deep, each a
//! list of runs newest first, each run a list of key-disjoint chunks in key
//! order. In leveled mode every level holds at most one run and a level
//! spills into the next once it outgrows `base * r^i`, rewriting the
//! overlapping part of the next level. In stepped mode a level collects up
//! to `r` runs; the `r`-th run triggers an `r`-way merge that lands as one
//! new run in the next level without touching the data already there.
//!
//! [`Levels`] owns the current snapshot and serializes all mutations.
//! Readers clone the `Arc` and never wait for a compaction.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use tracing::debug;

use crate::chunk::{build_chunk, ChunkMeta, ChunkReader, ChunkSpec};
use crate::config::{CompactionMode, IndexKind, StoreConfig};
use crate::error::{Error, Result};
use crate::key::StoreKey;
use crate::manifest::{LevelEntry, Manifest, RunEntry};
use crate::merge::MergeIter;
use crate::record::{EntryRecord, Lookup};

/// Byte counters behind write amplification. Shared between the engine
/// (ingest and WAL) and the level set (chunks).
#[derive(Debug, Default)]
pub struct WriteAmpCounters {
    bytes_ingested: AtomicU64,
    wal_bytes: AtomicU64,
    flush_bytes: AtomicU64,
    compaction_bytes: AtomicU64,
}

impl WriteAmpCounters {
    pub fn add_ingested(&self, n: u64) {
        self.bytes_ingested.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_wal(&self, n: u64) {
        self.wal_bytes.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_flush(&self, n: u64) {
        self.flush_bytes.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_compaction(&self, n: u64) {
        self.compaction_bytes.fetch_add(n, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> WriteAmp {
        WriteAmp {
            bytes_ingested: self.bytes_ingested.load(Ordering::Relaxed),
            wal_bytes: self.wal_bytes.load(Ordering::Relaxed),
            flush_bytes: self.flush_bytes.load(Ordering::Relaxed),
            compaction_bytes: self.compaction_bytes.load(Ordering::Relaxed),
        }
    }
}

/// A point-in-time copy of [`WriteAmpCounters`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WriteAmp {
    /// Encoded size of every accepted put and delete.
    pub bytes_ingested: u64,
    pub wal_bytes: u64,
    /// Chunk bytes written by memstore flushes.
    pub flush_bytes: u64,
    /// Chunk bytes written by compactions.
    pub compaction_bytes: u64,
}

impl WriteAmp {
    pub fn chunk_bytes(&self) -> u64 {
        self.flush_bytes + self.compaction_bytes
    }

    pub fn bytes_written(&self) -> u64 {
        self.wal_bytes + self.chunk_bytes()
    }

    /// WAL plus chunk bytes per ingested byte; 0 before any ingest.
    pub fn write_amp(&self) -> f64 {
        ratio(self.bytes_written(), self.bytes_ingested)
    }

    /// Chunk bytes only per ingested byte; 0 before any ingest.
    pub fn chunk_write_amp(&self) -> f64 {
        ratio(self.chunk_bytes(), self.bytes_ingested)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// An open chunk and its manifest entry.
#[derive(Debug)]
pub struct ChunkHandle {
    meta: ChunkMeta,
    reader: ChunkReader,
}

impl ChunkHandle {
    pub fn open(dir: &Path, meta: ChunkMeta) -> Result<Self> {
        let reader = ChunkReader::open(&dir.join(&meta.file_name))?;
        if reader.block_count() != meta.block_count as usize {
            return Err(Error::corrupted(
                meta.file_name.clone(),
                "block count disagrees with manifest",
            ));
        }
        Ok(ChunkHandle { meta, reader })
    }

    pub fn meta(&self) -> &ChunkMeta {
        &self.meta
    }

    pub fn reader(&self) -> &ChunkReader {
        &self.reader
    }

    fn covers(&self, key: &StoreKey) -> bool {
        self.meta.smallest <= *key && *key <= self.meta.largest
    }

    fn touches_prefix(&self, prefix: &[u8]) -> bool {
        self.meta.smallest.prefix() <= prefix && prefix <= self.meta.largest.prefix()
    }
}

/// Streams one chunk's records, owning its handle.
struct OwnedChunkIter {
    chunk: Arc<ChunkHandle>,
    next_block: usize,
    buffered: std::vec::IntoIter<EntryRecord>,
}

impl Iterator for OwnedChunkIter {
    type Item = Result<EntryRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(rec) = self.buffered.next() {
                return Some(Ok(rec));
            }
            if self.next_block >= self.chunk.reader.block_count() {
                return None;
            }
            let ordinal = self.next_block;
            self.next_block += 1;
            match self.chunk.reader.read_block(ordinal) {
                Ok(block) => self.buffered = block.entries.into_iter(),
                Err(e) => {
                    self.next_block = usize::MAX;
                    return Some(Err(e));
                }
            }
        }
    }
}

pub type RecordStream = Box<dyn Iterator<Item = Result<EntryRecord>> + Send>;

fn stream_chunks(chunks: Vec<Arc<ChunkHandle>>) -> RecordStream {
    Box::new(chunks.into_iter().flat_map(|chunk| OwnedChunkIter {
        chunk,
        next_block: 0,
        buffered: Vec::new().into_iter(),
    }))
}

/// How much work one persistent lookup did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReadProbe {
    /// Runs whose key range admitted the key and whose index was consulted.
    pub runs: usize,
    pub blocks: usize,
}

/// A sorted run: key-disjoint chunks in key order.
#[derive(Clone, Debug)]
pub struct Run {
    ordinal: u64,
    chunks: Vec<Arc<ChunkHandle>>,
}

impl Run {
    pub fn ordinal(&self) -> u64 {
        self.ordinal
    }

    pub fn chunks(&self) -> &[Arc<ChunkHandle>] {
        &self.chunks
    }

    pub fn bytes(&self) -> u64 {
        self.chunks.iter().map(|c| c.meta.file_size).sum()
    }

    pub fn record_count(&self) -> u64 {
        self.chunks.iter().map(|c| c.meta.record_count).sum()
    }

    pub fn smallest(&self) -> Option<&StoreKey> {
        self.chunks.first().map(|c| &c.meta.smallest)
    }

    pub fn largest(&self) -> Option<&StoreKey> {
        self.chunks.last().map(|c| &c.meta.largest)
    }

    fn chunk_for(&self, key: &StoreKey) -> Option<&Arc<ChunkHandle>> {
        let idx = self.chunks.partition_point(|c| c.meta.largest < *key);
        self.chunks.get(idx).filter(|c| c.covers(key))
    }

    fn get(&self, key: &StoreKey, probe: &mut ReadProbe) -> Result<Lookup> {
        let Some(chunk) = self.chunk_for(key) else {
            return Ok(Lookup::Absent);
        };
        probe.runs += 1;
        let Some(block) = chunk.reader.index().find(key) else {
            return Ok(Lookup::Absent);
        };
        probe.blocks += 1;
        Ok(chunk
            .reader
            .read_block(block)?
            .get(key)
            .map_or(Lookup::Absent, |r| Lookup::from(&r.value)))
    }

    fn prefix_records(&self, prefix: &[u8]) -> Result<Vec<EntryRecord>> {
        let mut out = Vec::new();
        for chunk in self.chunks.iter().filter(|c| c.touches_prefix(prefix)) {
            out.extend(chunk.reader.prefix_records(prefix)?);
        }
        Ok(out)
    }

    pub fn stream(&self) -> RecordStream {
        stream_chunks(self.chunks.clone())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Level {
    /// Newest first.
    runs: Vec<Run>,
}

impl Level {
    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn bytes(&self) -> u64 {
        self.runs.iter().map(Run::bytes).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

/// Per-level summary for stats output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelSummary {
    pub level: u32,
    pub runs: usize,
    pub chunks: usize,
    pub records: u64,
    pub bytes: u64,
}

/// Immutable snapshot of the persistent hierarchy.
#[derive(Clone, Debug, Default)]
pub struct LevelSet {
    levels: Vec<Level>,
}

impl LevelSet {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(Level::is_empty)
    }

    fn has_data_below(&self, level: usize) -> bool {
        self.levels.iter().skip(level + 1).any(|l| !l.is_empty())
    }

    pub fn run_counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.runs.len()).collect()
    }

    pub fn total_bytes(&self) -> u64 {
        self.levels.iter().map(Level::bytes).sum()
    }

    pub fn chunks(&self) -> impl Iterator<Item = &Arc<ChunkHandle>> {
        self.levels
            .iter()
            .flat_map(|l| &l.runs)
            .flat_map(|r| &r.chunks)
    }

    pub fn summaries(&self) -> Vec<LevelSummary> {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, l)| LevelSummary {
                level: i as u32,
                runs: l.runs.len(),
                chunks: l.runs.iter().map(|r| r.chunks.len()).sum(),
                records: l.runs.iter().map(Run::record_count).sum(),
                bytes: l.bytes(),
            })
            .collect()
    }

    /// Levels shallow to deep, runs newest first; the first hit wins.
    pub fn read_path(&self, key: &StoreKey) -> Result<(Lookup, ReadProbe)> {
        let mut probe = ReadProbe::default();
        for level in &self.levels {
            for run in &level.runs {
                let hit = run.get(key, &mut probe)?;
                if !hit.is_absent() {
                    return Ok((hit, probe));
                }
            }
        }
        Ok((Lookup::Absent, probe))
    }

    /// Records under `prefix` from every run, one sorted vector per run.
    pub fn prefix_runs(&self, prefix: &[u8]) -> Result<Vec<Vec<EntryRecord>>> {
        let mut out = Vec::new();
        for run in self.levels.iter().flat_map(|l| &l.runs) {
            let recs = run.prefix_records(prefix)?;
            if !recs.is_empty() {
                out.push(recs);
            }
        }
        Ok(out)
    }

    fn to_manifest(&self, book: &Bookkeeping, mode: CompactionMode, r: usize) -> Manifest {
        let mut m = Manifest::empty(mode, r);
        m.next_chunk_id = book.next_chunk_id;
        m.next_run_ordinal = book.next_run_ordinal;
        m.flushed_seqno = book.flushed_seqno;
        m.levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| LevelEntry {
                level: i as u32,
                runs: l
                    .runs
                    .iter()
                    .map(|r| RunEntry {
                        ordinal: r.ordinal,
                        chunks: r.chunks.iter().map(|c| (&c.meta).into()).collect(),
                    })
                    .collect(),
            })
            .collect();
        m
    }

    fn trim(&mut self) {
        while self.levels.last().is_some_and(Level::is_empty) {
            self.levels.pop();
        }
    }

    fn level_mut(&mut self, i: usize) -> &mut Level {
        if self.levels.len() <= i {
            self.levels.resize_with(i + 1, Level::default);
        }
        &mut self.levels[i]
    }
}

#[derive(Clone, Debug)]
pub struct LevelParams {
    pub dir: PathBuf,
    pub mode: CompactionMode,
    pub growth_factor: usize,
    pub level0_capacity: u64,
    pub index_kind: IndexKind,
    pub block_size: usize,
    pub chunk_target_bytes: usize,
}

impl LevelParams {
    pub fn from_config(dir: &Path, cfg: &StoreConfig) -> Self {
        LevelParams {
            dir: dir.to_path_buf(),
            mode: cfg.compaction_mode,
            growth_factor: cfg.growth_factor,
            level0_capacity: cfg.level0_capacity(),
            index_kind: cfg.index_kind,
            block_size: cfg.block_size,
            chunk_target_bytes: cfg.chunk_target_bytes,
        }
    }

    /// `base * r^i`, saturating.
    pub fn capacity(&self, level: usize) -> u64 {
        let mut cap = self.level0_capacity;
        for _ in 0..level {
            cap = cap.saturating_mul(self.growth_factor as u64);
        }
        cap
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CompactionStats {
    pub stepped: u64,
    pub leveled: u64,
    pub full: u64,
    pub input_records: u64,
    pub output_records: u64,
}

#[derive(Debug)]
struct Bookkeeping {
    next_chunk_id: u64,
    next_run_ordinal: u64,
    flushed_seqno: u64,
    stats: CompactionStats,
}

impl Bookkeeping {
    fn run_ordinal(&mut self) -> u64 {
        let o = self.next_run_ordinal;
        self.next_run_ordinal += 1;
        o
    }
}

/// Splits a sorted record stream into chunks of roughly the target size.
struct RunWriter<'a> {
    params: &'a LevelParams,
    level: u32,
    ordinal: u64,
    buf: Vec<EntryRecord>,
    buf_bytes: usize,
    chunks: Vec<Arc<ChunkHandle>>,
    bytes: u64,
    records: u64,
}

impl<'a> RunWriter<'a> {
    fn new(params: &'a LevelParams, level: usize, ordinal: u64) -> Self {
        RunWriter {
            params,
            level: level as u32,
            ordinal,
            buf: Vec::new(),
            buf_bytes: 0,
            chunks: Vec::new(),
            bytes: 0,
            records: 0,
        }
    }

    fn push(&mut self, rec: EntryRecord, book: &mut Bookkeeping) -> Result<()> {
        self.buf_bytes += rec.encoded_len();
        self.buf.push(rec);
        if self.buf_bytes >= self.params.chunk_target_bytes {
            self.cut(book)?;
        }
        Ok(())
    }

    fn cut(&mut self, book: &mut Bookkeeping) -> Result<()> {
        if self.buf.is_empty() {
            return Ok(());
        }
        let id = book.next_chunk_id;
        book.next_chunk_id += 1;
        let spec = ChunkSpec {
            dir: &self.params.dir,
            id,
            level: self.level,
            sublevel: self.ordinal,
            index_kind: self.params.index_kind,
            block_size: self.params.block_size,
        };
        let meta = build_chunk(&self.buf, &spec)?;
        self.bytes += meta.file_size;
        self.records += meta.record_count;
        self.chunks
            .push(Arc::new(ChunkHandle::open(&self.params.dir, meta)?));
        self.buf.clear();
        self.buf_bytes = 0;
        Ok(())
    }

    fn write_all(
        mut self,
        input: impl Iterator<Item = Result<EntryRecord>>,
        book: &mut Bookkeeping,
    ) -> Result<(Run, u64)> {
        for rec in input {
            self.push(rec?, book)?;
        }
        self.cut(book)?;
        book.stats.output_records += self.records;
        Ok((
            Run {
                ordinal: self.ordinal,
                chunks: self.chunks,
            },
            self.bytes,
        ))
    }
}

/// Owner of the current [`LevelSet`]; all mutations go through here.
#[derive(Debug)]
pub struct Levels {
    params: LevelParams,
    current: RwLock<Arc<LevelSet>>,
    book: Mutex<Bookkeeping>,
    counters: Arc<WriteAmpCounters>,
}

impl Levels {
    /// Loads the manifest (if any), opens every chunk it lists and removes
    /// chunk files it does not list.
    pub fn open(params: LevelParams, counters: Arc<WriteAmpCounters>) -> Result<Self> {
        let manifest = match Manifest::load(&params.dir)? {
            Some(m) => {
                if m.mode != params.mode {
                    return Err(Error::InvalidConfig(format!(
                        "store was created in {} mode, opened as {}",
                        m.mode, params.mode
                    )));
                }
                m
            }
            None => Manifest::empty(params.mode, params.growth_factor),
        };

        let mut set = LevelSet::default();
        for entry in &manifest.levels {
            let level = set.level_mut(entry.level as usize);
            for run in &entry.runs {
                let chunks = run
                    .chunks
                    .iter()
                    .map(|c| {
                        let meta = c.to_meta(entry.level, run.ordinal)?;
                        Ok(Arc::new(ChunkHandle::open(&params.dir, meta)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                level.runs.push(Run {
                    ordinal: run.ordinal,
                    chunks,
                });
            }
        }
        set.trim();

        let live: HashSet<&str> = manifest.chunk_files().collect();
        for entry in fs::read_dir(&params.dir)? {
            let name = entry?.file_name();
            let Some(name) = name.to_str() else { continue };
            if name.ends_with(".chk") && !live.contains(name) {
                debug!(file = name, "removing orphan chunk");
                fs::remove_file(params.dir.join(name))?;
            }
        }

        let book = Bookkeeping {
            next_chunk_id: manifest.next_chunk_id,
            next_run_ordinal: manifest.next_run_ordinal,
            flushed_seqno: manifest.flushed_seqno,
            stats: CompactionStats::default(),
        };
        Ok(Levels {
            params,
            current: RwLock::new(Arc::new(set)),
            book: Mutex::new(book),
            counters,
        })
    }

    pub fn params(&self) -> &LevelParams {
        &self.params
    }

    pub fn snapshot(&self) -> Arc<LevelSet> {
        self.current.read().expect("level set lock").clone()
    }

    pub fn flushed_seqno(&self) -> u64 {
        self.book.lock().expect("bookkeeping lock").flushed_seqno
    }

    pub fn compaction_stats(&self) -> CompactionStats {
        self.book.lock().expect("bookkeeping lock").stats
    }

    /// The manifest describing the current snapshot.
    pub fn manifest(&self) -> Manifest {
        let book = self.book.lock().expect("bookkeeping lock");
        self.snapshot()
            .to_manifest(&book, self.params.mode, self.params.growth_factor)
    }

    /// Persists `next`, swaps it in, then deletes chunk files that only the
    /// old snapshot referenced.
    fn publish(&self, next: LevelSet, book: &Bookkeeping) -> Result<()> {
        next.to_manifest(book, self.params.mode, self.params.growth_factor)
            .store(&self.params.dir)?;
        let live: HashSet<&str> = next.chunks().map(|c| c.meta.file_name.as_str()).collect();
        let old = {
            let mut cur = self.current.write().expect("level set lock");
            std::mem::replace(&mut *cur, Arc::new(next.clone()))
        };
        for chunk in old.chunks() {
            if !live.contains(chunk.meta.file_name.as_str()) {
                fs::remove_file(self.params.dir.join(&chunk.meta.file_name))?;
            }
        }
        Ok(())
    }

    /// Installs a flushed run (sorted, one record per key) at level 0 and
    /// records that every seqno up to `flushed_seqno` is now persistent.
    /// Stepped mode adds it as the newest sub-level; leveled mode merges it
    /// with the existing level-0 run. Returns the first new chunk id, or
    /// `None` for an empty run. Call [`Levels::compact_if_needed`] after.
    pub fn ingest_run(&self, records: Vec<EntryRecord>, flushed_seqno: u64) -> Result<Option<u64>> {
        let mut book = self.book.lock().expect("bookkeeping lock");
        let mut next = (*self.snapshot()).clone();
        let first_id = book.next_chunk_id;
        book.flushed_seqno = book.flushed_seqno.max(flushed_seqno);
        if records.is_empty() {
            self.publish(next, &book)?;
            return Ok(None);
        }
        let fresh: RecordStream = Box::new(records.into_iter().map(Ok));
        match self.params.mode {
            CompactionMode::Stepped => {
                let ordinal = book.run_ordinal();
                let (run, bytes) =
                    RunWriter::new(&self.params, 0, ordinal).write_all(fresh, &mut book)?;
                self.counters.add_flush(bytes);
                next.level_mut(0).runs.insert(0, run);
            }
            CompactionMode::Leveled => {
                let drop = !next.has_data_below(0);
                let level0 = next.level_mut(0);
                let ordinal = match level0.runs.first() {
                    Some(r) => r.ordinal,
                    None => book.run_ordinal(),
                };
                let mut sources = vec![fresh];
                sources.extend(level0.runs.iter().map(Run::stream));
                let merged = MergeIter::new(sources, drop)?;
                let (run, bytes) =
                    RunWriter::new(&self.params, 0, ordinal).write_all(merged, &mut book)?;
                self.counters.add_flush(bytes);
                level0.runs = if run.chunks.is_empty() { vec![] } else { vec![run] };
            }
        }
        next.trim();
        self.publish(next, &book)?;
        Ok(Some(first_id))
    }

    /// Runs compactions until every level is within its limit.
    pub fn compact_if_needed(&self) -> Result<usize> {
        let mut done = 0;
        let mut level = 0;
        loop {
            let set = self.snapshot();
            if level >= set.depth() {
                return Ok(done);
            }
            let needs = match self.params.mode {
                CompactionMode::Stepped => set.levels[level].runs.len() >= self.params.growth_factor,
                CompactionMode::Leveled => set.levels[level].bytes() > self.params.capacity(level),
            };
            if needs {
                match self.params.mode {
                    CompactionMode::Stepped => self.compact_stepped(level)?,
                    CompactionMode::Leveled => self.compact_leveled(level)?,
                }
                done += 1;
            }
            level += 1;
        }
    }

    /// Merges every run of `level` into one new run that becomes the
    /// newest sub-level of `level + 1`. Data already in `level + 1` is not
    /// rewritten.
    pub fn compact_stepped(&self, level: usize) -> Result<()> {
        let mut book = self.book.lock().expect("bookkeeping lock");
        let mut next = (*self.snapshot()).clone();
        let Some(src) = next.levels.get_mut(level).filter(|l| !l.is_empty()) else {
            return Err(Error::PreconditionUnmet("level has no runs to compact"));
        };
        let inputs = std::mem::take(&mut src.runs);
        let drop = !next.has_data_below(level);
        let input_records: u64 = inputs.iter().map(Run::record_count).sum();
        let input_bytes: u64 = inputs.iter().map(Run::bytes).sum();
        let merged = MergeIter::new(inputs.iter().map(Run::stream).collect(), drop)?;
        let ordinal = book.run_ordinal();
        let (run, bytes) =
            RunWriter::new(&self.params, level + 1, ordinal).write_all(merged, &mut book)?;
        book.stats.stepped += 1;
        book.stats.input_records += input_records;
        self.counters.add_compaction(bytes);
        debug!(level, runs = inputs.len(), input_bytes, bytes, "stepped compaction");
        if !run.chunks.is_empty() {
            next.level_mut(level + 1).runs.insert(0, run);
        }
        next.trim();
        self.publish(next, &book)
    }

    /// Merges the run of `level` with the overlapping chunks of the run in
    /// `level + 1`; the output replaces both.
    pub fn compact_leveled(&self, level: usize) -> Result<()> {
        let mut book = self.book.lock().expect("bookkeeping lock");
        let mut next = (*self.snapshot()).clone();
        let Some(src) = next.levels.get_mut(level).filter(|l| !l.is_empty()) else {
            return Err(Error::PreconditionUnmet("level has no runs to compact"));
        };
        let upper = std::mem::take(&mut src.runs);
        let (lo, hi) = run_span(&upper);
        let drop = !next.has_data_below(level + 1);
        let (ordinal, lower) = match next.level_mut(level + 1).runs.pop() {
            Some(run) => (run.ordinal, run.chunks),
            None => (book.run_ordinal(), Vec::new()),
        };
        let start = lower.partition_point(|c| c.meta.largest < lo);
        let end = lower.partition_point(|c| c.meta.smallest <= hi);
        let overlapping = lower[start..end].to_vec();

        let input_records: u64 = upper.iter().map(Run::record_count).sum::<u64>()
            + overlapping.iter().map(|c| c.meta.record_count).sum::<u64>();
        let mut sources: Vec<RecordStream> = upper.iter().map(Run::stream).collect();
        sources.push(stream_chunks(overlapping.clone()));
        let merged = MergeIter::new(sources, drop)?;
        let (run, bytes) =
            RunWriter::new(&self.params, level + 1, ordinal).write_all(merged, &mut book)?;
        book.stats.leveled += 1;
        book.stats.input_records += input_records;
        self.counters.add_compaction(bytes);
        debug!(level, rewritten = overlapping.len(), bytes, "leveled compaction");

        let mut chunks = lower[..start].to_vec();
        chunks.extend(run.chunks);
        chunks.extend_from_slice(&lower[end..]);
        if !chunks.is_empty() {
            next.level_mut(level + 1).runs.push(Run { ordinal, chunks });
        }
        next.trim();
        self.publish(next, &book)
    }

    /// Merges everything into one run at the deepest level, dropping
    /// tombstones and shadowed versions.
    pub fn compact_full(&self) -> Result<()> {
        let mut book = self.book.lock().expect("bookkeeping lock");
        let mut next = (*self.snapshot()).clone();
        if next.is_empty() {
            return Ok(());
        }
        let bottom = next.depth() - 1;
        let inputs: Vec<Run> = next
            .levels
            .iter_mut()
            .flat_map(|l| std::mem::take(&mut l.runs))
            .collect();
        let input_records: u64 = inputs.iter().map(Run::record_count).sum();
        let merged = MergeIter::new(inputs.iter().map(Run::stream).collect(), true)?;
        let ordinal = book.run_ordinal();
        let (run, bytes) =
            RunWriter::new(&self.params, bottom, ordinal).write_all(merged, &mut book)?;
        book.stats.full += 1;
        book.stats.input_records += input_records;
        self.counters.add_compaction(bytes);
        if !run.chunks.is_empty() {
            next.level_mut(bottom).runs.push(run);
        }
        next.trim();
        self.publish(next, &book)
    }

    /// Structural checks on the current snapshot.
    pub fn check_invariants(&self) -> Result<()> {
        let set = self.snapshot();
        let bad = |msg: String| Err(Error::Manifest(msg));
        for (i, level) in set.levels.iter().enumerate() {
            let limit = match self.params.mode {
                CompactionMode::Stepped => self.params.growth_factor - 1,
                CompactionMode::Leveled => 1,
            };
            if level.runs.len() > limit {
                return bad(format!("level {i} holds {} runs", level.runs.len()));
            }
            for run in &level.runs {
                if run.chunks.is_empty() {
                    return bad(format!("empty run {} in level {i}", run.ordinal));
                }
                for w in run.chunks.windows(2) {
                    if w[0].meta.largest >= w[1].meta.smallest {
                        return bad(format!("overlapping chunks in run {}", run.ordinal));
                    }
                }
            }
        }
        Ok(())
    }
}

fn run_span(runs: &[Run]) -> (StoreKey, StoreKey) {
    let lo = runs
        .iter()
        .filter_map(Run::smallest)
        .min()
        .expect("non-empty runs")
        .clone();
    let hi = runs
        .iter()
        .filter_map(Run::largest)
        .max()
        .expect("non-empty runs")
        .clone();
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn key(i: u64) -> StoreKey {
        StoreKey::new(format!("p{}", i % 3), format!("{i:06}")).unwrap()
    }

    fn params(dir: &Path, mode: CompactionMode, r: usize) -> LevelParams {
        LevelParams {
            dir: dir.to_path_buf(),
            mode,
            growth_factor: r,
            level0_capacity: 8 << 10,
            index_kind: IndexKind::ThreeLevel,
            block_size: 512,
            chunk_target_bytes: 4 << 10,
        }
    }

    fn run_of(keys: impl IntoIterator<Item = u64>, seq: &mut u64) -> Vec<EntryRecord> {
        let mut recs: Vec<EntryRecord> = keys
            .into_iter()
            .map(|i| {
                *seq += 1;
                EntryRecord::put(key(i), seq.to_le_bytes().to_vec(), *seq)
            })
            .collect();
        recs.sort_by(|a, b| a.key.cmp(&b.key));
        recs
    }

    #[test]
    fn stepped_ingest_adds_sublevels_and_cascades() {
        let dir = tempfile::tempdir().unwrap();
        let levels = Levels::open(
            params(dir.path(), CompactionMode::Stepped, 4),
            Arc::default(),
        )
        .unwrap();
        let mut seq = 0;
        for n in 1..=3 {
            levels.ingest_run(run_of(n * 10..n * 10 + 10, &mut seq), seq).unwrap();
            levels.compact_if_needed().unwrap();
            assert_eq!(levels.snapshot().run_counts(), vec![n as usize]);
        }
        levels.ingest_run(run_of(100..110, &mut seq), seq).unwrap();
        assert_eq!(levels.snapshot().run_counts(), vec![4]);
        assert_eq!(levels.compact_if_needed().unwrap(), 1);
        assert_eq!(levels.snapshot().run_counts(), vec![0, 1]);
        assert_eq!(levels.snapshot().levels()[1].runs()[0].record_count(), 40);
        levels.check_invariants().unwrap();
    }

    #[test]
    fn stepped_merge_keeps_newest_version() {
        let dir = tempfile::tempdir().unwrap();
        let levels = Levels::open(
            params(dir.path(), CompactionMode::Stepped, 2),
            Arc::default(),
        )
        .unwrap();
        let mut seq = 0;
        levels.ingest_run(run_of([7], &mut seq), seq).unwrap();
        levels.ingest_run(run_of([7], &mut seq), seq).unwrap();
        // Before compaction the newer sub-level answers.
        let (hit, probe) = levels.snapshot().read_path(&key(7)).unwrap();
        assert_eq!(hit, Lookup::Value(2u64.to_le_bytes().to_vec()));
        assert_eq!(probe.runs, 1);
        levels.compact_if_needed().unwrap();
        let set = levels.snapshot();
        assert_eq!(set.run_counts(), vec![0, 1]);
        assert_eq!(set.levels()[1].runs()[0].record_count(), 1);
        let (hit, _) = set.read_path(&key(7)).unwrap();
        assert_eq!(hit, Lookup::Value(2u64.to_le_bytes().to_vec()));
    }

    #[test]
    fn stepped_compaction_does_not_rewrite_next_level() {
        let dir = tempfile::tempdir().unwrap();
        let counters = Arc::new(WriteAmpCounters::default());
        let levels = Levels::open(
            params(dir.path(), CompactionMode::Stepped, 2),
            counters.clone(),
        )
        .unwrap();
        let mut seq = 0;
        for batch in 0..6u64 {
            levels.ingest_run(run_of(batch * 50..batch * 50 + 50, &mut seq), seq).unwrap();
            let before = counters.snapshot().compaction_bytes;
            let l0: u64 = levels.snapshot().levels()[0].bytes();
            if levels.snapshot().levels()[0].runs().len() == 2 {
                levels.compact_stepped(0).unwrap();
                let written = counters.snapshot().compaction_bytes - before;
                assert!(written <= l0, "{written} > {l0}");
            }
            levels.compact_if_needed().unwrap();
        }
        levels.check_invariants().unwrap();
    }

    #[test]
    fn leveled_ingest_merges_into_single_run() {
        let dir = tempfile::tempdir().unwrap();
        let levels = Levels::open(
            params(dir.path(), CompactionMode::Leveled, 4),
            Arc::default(),
        )
        .unwrap();
        let mut seq = 0;
        levels.ingest_run(run_of(0..20, &mut seq), seq).unwrap();
        levels.ingest_run(run_of(10..30, &mut seq), seq).unwrap();
        let set = levels.snapshot();
        assert_eq!(set.run_counts(), vec![1]);
        assert_eq!(set.levels()[0].runs()[0].record_count(), 30);
    }

    #[test]
    fn leveled_spills_past_capacity() {
        let dir = tempfile::tempdir().unwrap();
        let levels = Levels::open(
            params(dir.path(), CompactionMode::Leveled, 4),
            Arc::default(),
        )
        .unwrap();
        let mut seq = 0;
        let mut model = BTreeMap::new();
        for batch in 0..40u64 {
            let recs = run_of((0..60).map(|j| (batch * 37 + j * 11) % 900), &mut seq);
            for r in &recs {
                model.insert(r.key.clone(), r.value.clone());
            }
            levels.ingest_run(recs, seq).unwrap();
            levels.compact_if_needed().unwrap();
            levels.check_invariants().unwrap();
        }
        let set = levels.snapshot();
        assert!(set.depth() >= 2, "{:?}", set.run_counts());
        for (i, level) in set.levels().iter().enumerate() {
            assert!(level.bytes() <= levels.params().capacity(i) || i + 1 == set.depth());
        }
        for (k, v) in &model {
            let (hit, _) = set.read_path(k).unwrap();
            assert_eq!(hit, Lookup::from(v));
        }
    }

    #[test]
    fn tombstones_survive_until_bottom() {
        let dir = tempfile::tempdir().unwrap();
        let levels = Levels::open(
            params(dir.path(), CompactionMode::Stepped, 2),
            Arc::default(),
        )
        .unwrap();
        let mut seq = 0;
        levels.ingest_run(run_of(0..5, &mut seq), seq).unwrap();
        levels.ingest_run(run_of(5..10, &mut seq), seq).unwrap();
        levels.compact_if_needed().unwrap();
        seq += 1;
        levels
            .ingest_run(vec![EntryRecord::tombstone(key(3), seq)], seq)
            .unwrap();
        levels.ingest_run(run_of(20..22, &mut seq), seq).unwrap();
        // Level 1 already holds data, so the tombstone must be kept.
        levels.compact_stepped(0).unwrap();
        let set = levels.snapshot();
        assert_eq!(set.run_counts(), vec![0, 2]);
        assert_eq!(set.read_path(&key(3)).unwrap().0, Lookup::Tombstone);
        // Level 1 merges into an empty bottom: nothing older can remain.
        levels.compact_if_needed().unwrap();
        let set = levels.snapshot();
        assert_eq!(set.run_counts(), vec![0, 0, 1]);
        assert_eq!(set.read_path(&key(3)).unwrap().0, Lookup::Absent);
        levels.compact_full().unwrap();
        let set = levels.snapshot();
        assert_eq!(set.read_path(&key(3)).unwrap().0, Lookup::Absent);
        let all: Vec<_> = set.levels().last().unwrap().runs()[0]
            .stream()
            .map(|r| r.unwrap())
            .collect();
        assert!(all.iter().all(|r| r.key != key(3) && !r.value.is_tombstone()));
        assert_eq!(all.len(), 11);
    }

    #[test]
    fn reopen_restores_levels_and_removes_orphans() {
        let dir = tempfile::tempdir().unwrap();
        let p = params(dir.path(), CompactionMode::Stepped, 3);
        let mut seq = 0;
        let before = {
            let levels = Levels::open(p.clone(), Arc::default()).unwrap();
            for n in 0..5 {
                levels.ingest_run(run_of(n * 7..n * 7 + 7, &mut seq), seq).unwrap();
                levels.compact_if_needed().unwrap();
            }
            levels.manifest()
        };
        fs::write(dir.path().join("L0_S99_999.chk"), b"junk").unwrap();
        let levels = Levels::open(p, Arc::default()).unwrap();
        assert_eq!(levels.manifest(), before);
        assert_eq!(levels.flushed_seqno(), seq);
        assert!(!dir.path().join("L0_S99_999.chk").exists());
        for i in 0..35 {
            assert!(!levels.snapshot().read_path(&key(i)).unwrap().0.is_absent());
        }
    }

    #[test]
    fn absent_key_probe_bound() {
        let dir = tempfile::tempdir().unwrap();
        let levels = Levels::open(
            params(dir.path(), CompactionMode::Stepped, 4),
            Arc::default(),
        )
        .unwrap();
        let mut seq = 0;
        for n in 0..11 {
            levels.ingest_run(run_of((0..30).map(|j| j * 3 + n % 3), &mut seq), seq).unwrap();
            levels.compact_if_needed().unwrap();
        }
        let set = levels.snapshot();
        let runs: usize = set.run_counts().iter().sum();
        let (hit, probe) = set.read_path(&key(100_000)).unwrap();
        assert!(hit.is_absent());
        assert!(probe.runs <= runs);
    }

    #[test]
    fn write_amp_conventions() {
        let wa = WriteAmp::default();
        assert_eq!(wa.write_amp(), 0.0);
        assert_eq!(wa.chunk_write_amp(), 0.0);
        let wa = WriteAmp {
            bytes_ingested: 100,
            wal_bytes: 110,
            flush_bytes: 120,
            compaction_bytes: 30,
        };
        assert_eq!(wa.chunk_bytes(), 150);
        assert!((wa.write_amp() - 2.6).abs() < 1e-12);
        assert!((wa.chunk_write_amp() - 1.5).abs() < 1e-12);
    }
}
