//! The store: WAL, memstore and level set wired together.
//!
//! One writer at a time (serialized by an internal mutex), any number of
//! readers. Flushes and compactions run on the writing thread after the
//! write that triggered them; readers keep going against the previous
//! level-set snapshot while they do.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use serde::Serialize;
use tracing::{debug, warn};

use crate::chunk::ChunkReader;
use crate::config::StoreConfig;
use crate::error::{Error, Result};
use crate::key::{StoreKey, MAX_PREFIX_LEN};
use crate::levels::{
    CompactionStats, LevelParams, LevelSet, LevelSummary, Levels, ReadProbe, WriteAmp,
    WriteAmpCounters,
};
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::memstore::{MemConfig, MemStats, MemStore};
use crate::merge::{merge_sorted_runs, MergeIter};
use crate::record::{EntryRecord, Lookup, Value};
use crate::wal::{self, parse_wal_file_name, wal_file_name, WalWriter, WAL_MAGIC};

#[derive(Debug)]
struct WriterState {
    wal: WalWriter,
    wal_gen: u64,
    /// Closed logs and the highest seqno each holds.
    retired: Vec<(u64, u64)>,
    last_seqno: u64,
    flushes: u64,
}

#[derive(Debug, Default)]
struct ReadCounters {
    gets: AtomicU64,
    memstore_hits: AtomicU64,
    segment_probes: AtomicU64,
    run_probes: AtomicU64,
    block_reads: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReadStats {
    pub gets: u64,
    pub memstore_hits: u64,
    /// Immutable in-memory segments consulted.
    pub segment_probes: u64,
    /// Persistent runs consulted.
    pub run_probes: u64,
    pub block_reads: u64,
}

/// What recovery found in the write-ahead logs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RecoveryReport {
    pub wal_files: usize,
    /// Records applied to the memstore.
    pub replayed: u64,
    /// Records skipped because a chunk already holds them.
    pub already_flushed: u64,
    /// Bytes cut from torn or corrupt log tails.
    pub truncated_bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StoreStats {
    pub last_seqno: u64,
    pub flushes: u64,
    pub mem: MemStats,
    pub active_bytes: usize,
    pub pipeline_len: usize,
    pub snapshot_segments: usize,
    pub mem_footprint: usize,
    pub write_amp: WriteAmp,
    pub compactions: CompactionStats,
    pub levels: Vec<LevelSummary>,
    pub reads: ReadStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IntegrityReport {
    pub chunks: usize,
    pub records: u64,
    pub bytes: u64,
}

/// How a `get` was answered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReadTrace {
    pub from_memstore: bool,
    pub segment_probes: usize,
    pub persistent: ReadProbe,
}

pub struct Store {
    dir: PathBuf,
    cfg: StoreConfig,
    writer: Mutex<WriterState>,
    mem: RwLock<MemStore>,
    levels: Levels,
    counters: Arc<WriteAmpCounters>,
    reads: ReadCounters,
    recovery: RecoveryReport,
    closed: AtomicBool,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).finish_non_exhaustive()
    }
}

impl Store {
    /// Opens or creates a store in `dir`, replaying any write-ahead logs.
    pub fn open(dir: impl AsRef<Path>, cfg: StoreConfig) -> Result<Self> {
        cfg.validate()?;
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let had_manifest = dir.join(MANIFEST_FILE).exists();
        let counters = Arc::new(WriteAmpCounters::default());
        let levels = Levels::open(LevelParams::from_config(&dir, &cfg), counters.clone())?;
        let mut mem = MemStore::new(MemConfig::from(&cfg));
        let flushed = levels.flushed_seqno();
        let Recovered {
            report: recovery,
            retired,
            last_gen,
            last_seqno: last_seen,
        } = recover_logs(&dir, flushed, had_manifest, &mut mem)?;

        let wal_gen = last_gen + 1;
        let wal = WalWriter::create(&dir.join(wal_file_name(wal_gen)), cfg.wal_sync)?;
        counters.add_wal(wal.bytes_written());
        let store = Store {
            writer: Mutex::new(WriterState {
                wal,
                wal_gen,
                retired,
                last_seqno: flushed.max(last_seen),
                flushes: 0,
            }),
            mem: RwLock::new(mem),
            levels,
            counters,
            reads: ReadCounters::default(),
            recovery,
            closed: AtomicBool::new(false),
            dir,
            cfg,
        };
        {
            let mut w = store.lock_writer();
            store.drop_retired_logs(&mut w, flushed)?;
            if store.mem_read().is_full() {
                store.flush_locked(&mut w, false)?;
            }
        }
        Ok(store)
    }

    pub fn config(&self) -> &StoreConfig {
        &self.cfg
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn recovery_report(&self) -> &RecoveryReport {
        &self.recovery
    }

    fn lock_writer(&self) -> MutexGuard<'_, WriterState> {
        self.writer.lock().expect("writer lock poisoned")
    }

    fn mem_read(&self) -> std::sync::RwLockReadGuard<'_, MemStore> {
        self.mem.read().expect("memstore lock poisoned")
    }

    fn mem_write(&self) -> std::sync::RwLockWriteGuard<'_, MemStore> {
        self.mem.write().expect("memstore lock poisoned")
    }

    fn check_open(&self) -> Result<()> {
        if self.closed.load(Ordering::Acquire) {
            Err(Error::StoreClosed)
        } else {
            Ok(())
        }
    }

    pub fn put(&self, key: StoreKey, value: impl Into<Vec<u8>>) -> Result<u64> {
        let value = value.into();
        if value.len() > u32::MAX as usize {
            return Err(Error::ValueTooLarge(value.len()));
        }
        self.write(key, Value::Put(value))
    }

    pub fn delete(&self, key: StoreKey) -> Result<u64> {
        self.write(key, Value::Tombstone)
    }

    fn write(&self, key: StoreKey, value: Value) -> Result<u64> {
        key.validate()?;
        let mut w = self.lock_writer();
        self.check_open()?;
        let seqno = w.last_seqno + 1;
        let rec = EntryRecord { key, value, seqno };
        match w.wal.append(&rec) {
            Ok(n) => self.counters.add_wal(n),
            Err(e) => {
                // The log may now end in a torn frame; continue in a fresh one.
                if let Err(rotate) = self.rotate_log(&mut w) {
                    warn!(error = %rotate, "log rotation after failed append");
                }
                return Err(Error::StorageFull(e));
            }
        }
        w.last_seqno = seqno;
        self.counters.add_ingested(rec.encoded_len() as u64);
        let full = {
            let mut mem = self.mem_write();
            mem.insert(rec);
            mem.is_full()
        };
        if full {
            self.flush_locked(&mut w, false)?;
        }
        Ok(seqno)
    }

    pub fn get(&self, key: &StoreKey) -> Result<Option<Vec<u8>>> {
        Ok(self.get_traced(key)?.0.into_value())
    }

    /// Active segment, pipeline newest first, snapshots, then the level set
    /// shallow to deep.
    pub fn get_traced(&self, key: &StoreKey) -> Result<(Lookup, ReadTrace)> {
        self.check_open()?;
        self.reads.gets.fetch_add(1, Ordering::Relaxed);
        let mut trace = ReadTrace::default();
        let (hit, probes) = self.mem_read().search_probed(key);
        trace.segment_probes = probes;
        self.reads
            .segment_probes
            .fetch_add(probes as u64, Ordering::Relaxed);
        if !hit.is_absent() {
            trace.from_memstore = true;
            self.reads.memstore_hits.fetch_add(1, Ordering::Relaxed);
            return Ok((hit, trace));
        }
        // Flushes publish the level set before dropping the flushed
        // segments, so a miss above is still covered here.
        let (hit, probe) = self.levels.snapshot().read_path(key)?;
        trace.persistent = probe;
        self.reads
            .run_probes
            .fetch_add(probe.runs as u64, Ordering::Relaxed);
        self.reads
            .block_reads
            .fetch_add(probe.blocks as u64, Ordering::Relaxed);
        Ok((hit, trace))
    }

    /// Live entries under `prefix` in ascending suffix order.
    pub fn scan(&self, prefix: &[u8]) -> Result<Vec<(StoreKey, Vec<u8>)>> {
        self.check_open()?;
        if prefix.is_empty() || prefix.len() > MAX_PREFIX_LEN {
            return Err(Error::InvalidKey("scan prefix must be 1..=64 bytes"));
        }
        let mut runs = self.mem_read().prefix_runs(prefix);
        runs.extend(self.levels.snapshot().prefix_runs(prefix)?);
        Ok(merge_sorted_runs(runs.iter().map(Vec::as_slice), true)
            .into_iter()
            .map(|r| match r.value {
                Value::Put(v) => (r.key, v),
                Value::Tombstone => unreachable!("tombstones dropped by merge"),
            })
            .collect())
    }

    /// Every live entry. Intended for debugging; no ordering contract.
    pub fn dump(&self) -> Result<Vec<(StoreKey, Vec<u8>)>> {
        self.check_open()?;
        let mut mem_runs = Vec::new();
        {
            let mem = self.mem_read();
            mem_runs.push(mem.active().newest_records());
            for seg in mem.pipeline().segments().iter().chain(mem.snapshots()) {
                mem_runs.push(seg.records().to_vec());
            }
        }
        let set = self.levels.snapshot();
        let mut sources: Vec<crate::levels::RecordStream> = mem_runs
            .into_iter()
            .map(|r| Box::new(r.into_iter().map(Ok)) as crate::levels::RecordStream)
            .collect();
        sources.extend(set.levels().iter().flat_map(|l| l.runs()).map(|r| r.stream()));
        MergeIter::new(sources, true)?
            .map(|r| {
                r.map(|rec| match rec.value {
                    Value::Put(v) => (rec.key, v),
                    Value::Tombstone => unreachable!("tombstones dropped by merge"),
                })
            })
            .collect()
    }

    /// Flushes the in-memory snapshot to a level-0 chunk. Without `force`
    /// at least one immutable segment must exist; with it the active
    /// segment is sealed first. Returns the first chunk id written.
    pub fn flush_snapshot(&self, force: bool) -> Result<u64> {
        let mut w = self.lock_writer();
        self.check_open()?;
        {
            let mem = self.mem_read();
            let immutable = !mem.pipeline().is_empty() || !mem.snapshots().is_empty();
            if !immutable && !(force && !mem.active().is_empty()) {
                return Err(Error::PreconditionUnmet("no immutable segment to flush"));
            }
        }
        self.flush_locked(&mut w, force)?
            .ok_or(Error::PreconditionUnmet("flush produced no chunk"))
    }

    fn flush_locked(&self, w: &mut WriterState, seal: bool) -> Result<Option<u64>> {
        let segments = {
            let mut mem = self.mem_write();
            if seal || (mem.pipeline().is_empty() && mem.snapshots().is_empty()) {
                mem.seal_active();
            }
            mem.begin_flush()
        };
        let Some(flushed_seqno) = segments.iter().filter_map(|s| s.max_seqno()).max() else {
            return Ok(None);
        };
        let records = merge_sorted_runs(segments.iter().map(|s| s.records()), false);
        debug!(segments = segments.len(), records = records.len(), "flush");

        self.rotate_log(w)?;
        let id = self.levels.ingest_run(records, flushed_seqno)?;
        self.mem_write().finish_flush(&segments);
        w.flushes += 1;
        self.drop_retired_logs(w, flushed_seqno)?;
        self.levels.compact_if_needed()?;
        Ok(id)
    }

    fn rotate_log(&self, w: &mut WriterState) -> Result<()> {
        w.wal.sync()?;
        let gen = w.wal_gen + 1;
        let next = WalWriter::create(&self.dir.join(wal_file_name(gen)), self.cfg.wal_sync)?;
        self.counters.add_wal(next.bytes_written());
        let old = std::mem::replace(&mut w.wal, next);
        w.retired.push((w.wal_gen, old.max_seqno().unwrap_or(0)));
        w.wal_gen = gen;
        Ok(())
    }

    fn drop_retired_logs(&self, w: &mut WriterState, flushed_seqno: u64) -> Result<()> {
        let mut keep = Vec::new();
        for (gen, max) in w.retired.drain(..) {
            if max <= flushed_seqno {
                fs::remove_file(self.dir.join(wal_file_name(gen)))?;
            } else {
                keep.push((gen, max));
            }
        }
        w.retired = keep;
        Ok(())
    }

    /// Merges every level into one run at the bottom, dropping tombstones.
    pub fn compact_full(&self) -> Result<()> {
        let _w = self.lock_writer();
        self.check_open()?;
        self.levels.compact_full()
    }

    /// Syncs the log and rejects further operations.
    pub fn close(&self) -> Result<()> {
        let mut w = self.lock_writer();
        if self.closed.swap(true, Ordering::AcqRel) {
            return Ok(());
        }
        w.wal.sync()?;
        Ok(())
    }

    pub fn pipeline_len(&self) -> usize {
        self.mem_read().pipeline().len()
    }

    pub fn level_set(&self) -> Arc<LevelSet> {
        self.levels.snapshot()
    }

    pub fn manifest(&self) -> Manifest {
        self.levels.manifest()
    }

    /// Current log generation and its length, for crash harnesses.
    pub fn wal_position(&self) -> (PathBuf, u64) {
        let w = self.lock_writer();
        (w.wal.path().to_path_buf(), w.wal.bytes_written())
    }

    pub fn stats(&self) -> StoreStats {
        let (last_seqno, flushes) = {
            let w = self.lock_writer();
            (w.last_seqno, w.flushes)
        };
        let mem = self.mem_read();
        StoreStats {
            last_seqno,
            flushes,
            mem: mem.stats(),
            active_bytes: mem.active().byte_size(),
            pipeline_len: mem.pipeline().len(),
            snapshot_segments: mem.snapshots().len(),
            mem_footprint: mem.footprint(),
            write_amp: self.counters.snapshot(),
            compactions: self.levels.compaction_stats(),
            levels: self.levels.snapshot().summaries(),
            reads: ReadStats {
                gets: self.reads.gets.load(Ordering::Relaxed),
                memstore_hits: self.reads.memstore_hits.load(Ordering::Relaxed),
                segment_probes: self.reads.segment_probes.load(Ordering::Relaxed),
                run_probes: self.reads.run_probes.load(Ordering::Relaxed),
                block_reads: self.reads.block_reads.load(Ordering::Relaxed),
            },
        }
    }

    /// Checks structural invariants, that the manifest on disk matches the
    /// live level set, and that every chunk re-reads cleanly and agrees with
    /// its manifest entry.
    pub fn verify_integrity(&self) -> Result<IntegrityReport> {
        let _w = self.lock_writer();
        {
            let mem = self.mem_read();
            if mem.pipeline().len() > mem.pipeline().cap().max(1) {
                return Err(Error::Manifest(format!(
                    "pipeline length {} exceeds cap {}",
                    mem.pipeline().len(),
                    mem.pipeline().cap()
                )));
            }
        }
        self.levels.check_invariants()?;
        let live = self.levels.manifest();
        if let Some(on_disk) = Manifest::load(&self.dir)? {
            if on_disk != live {
                return Err(Error::Manifest("manifest on disk differs from live level set".into()));
            }
        } else if !live.levels.is_empty() {
            return Err(Error::Manifest("manifest missing".into()));
        }

        let mut report = IntegrityReport::default();
        for chunk in self.levels.snapshot().chunks() {
            let meta = chunk.meta();
            let reader = ChunkReader::open(&self.dir.join(&meta.file_name))?;
            let mismatch = |what: &str| Error::corrupted(meta.file_name.clone(), what.to_string());
            let mut count = 0u64;
            let mut first = None;
            let mut last = None;
            for rec in reader.iter() {
                let rec = rec?;
                if last.as_ref().is_some_and(|l: &StoreKey| *l >= rec.key) {
                    return Err(mismatch("records out of order"));
                }
                if rec.seqno < meta.min_seqno || rec.seqno > meta.max_seqno {
                    return Err(mismatch("seqno outside manifest range"));
                }
                if first.is_none() {
                    first = Some(rec.key.clone());
                }
                last = Some(rec.key);
                count += 1;
            }
            if count != meta.record_count {
                return Err(mismatch("record count differs from manifest"));
            }
            if first.as_ref() != Some(&meta.smallest) || last.as_ref() != Some(&meta.largest) {
                return Err(mismatch("key range differs from manifest"));
            }
            if reader.file_len() != meta.file_size {
                return Err(mismatch("file size differs from manifest"));
            }
            report.chunks += 1;
            report.records += count;
            report.bytes += meta.file_size;
        }
        Ok(report)
    }
}

struct Recovered {
    report: RecoveryReport,
    /// Replayed logs as `(generation, highest seqno)`.
    retired: Vec<(u64, u64)>,
    last_gen: u64,
    last_seqno: u64,
}

/// Replays every log in generation order into `mem`, skipping records that
/// are already in chunks. Torn tails are cut off.
fn recover_logs(
    dir: &Path,
    flushed_seqno: u64,
    had_manifest: bool,
    mem: &mut MemStore,
) -> Result<Recovered> {
    let mut gens = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let Some(name) = name.to_str() else { continue };
        if name.ends_with(".log.tmp") {
            fs::remove_file(dir.join(name))?;
        } else if let Some(gen) = parse_wal_file_name(name) {
            gens.push(gen);
        }
    }
    gens.sort_unstable();
    if gens.is_empty() && had_manifest {
        return Err(Error::WalMissing(dir.to_path_buf()));
    }

    let mut report = RecoveryReport {
        wal_files: gens.len(),
        ..RecoveryReport::default()
    };
    let mut retired = Vec::new();
    let mut last_seen = 0u64;
    for &gen in &gens {
        let path = dir.join(wal_file_name(gen));
        let log = wal::replay(&path)?;
        let mut valid_len = log.valid_len;
        let mut max_in_file = 0;
        for (i, rec) in log.records.into_iter().enumerate() {
            if rec.seqno <= last_seen {
                // Out of order across files: treat the rest as torn.
                valid_len = WAL_MAGIC.len() as u64 + frames_len(&path, i)?;
                break;
            }
            last_seen = rec.seqno;
            max_in_file = rec.seqno;
            if rec.seqno <= flushed_seqno {
                report.already_flushed += 1;
            } else {
                report.replayed += 1;
                mem.insert(rec);
            }
        }
        let file_len = fs::metadata(&path)?.len();
        if valid_len < file_len {
            warn!(file = %path.display(), valid_len, file_len, "truncating torn log tail");
            fs::OpenOptions::new().write(true).open(&path)?.set_len(valid_len)?;
            report.truncated_bytes += file_len - valid_len;
        }
        retired.push((gen, max_in_file));
    }
    Ok(Recovered {
        report,
        retired,
        last_gen: gens.last().copied().unwrap_or(0),
        last_seqno: last_seen,
    })
}

/// Byte length of the first `n` frames of a log, header excluded.
fn frames_len(path: &Path, n: usize) -> Result<u64> {
    let bytes = fs::read(path)?;
    let mut pos = WAL_MAGIC.len();
    for _ in 0..n {
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().expect("4 bytes"));
        pos += 8 + len as usize;
    }
    Ok((pos - WAL_MAGIC.len()) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(p: &str, s: &str) -> StoreKey {
        StoreKey::new(p, s).unwrap()
    }

    fn small() -> StoreConfig {
        StoreConfig {
            memstore_budget: 16 << 10,
            block_size: 256,
            growth_factor: 3,
            ..StoreConfig::default()
        }
    }

    #[test]
    fn round_trip_and_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), StoreConfig::default()).unwrap();
        assert_eq!(store.get(&k("a/", "1")).unwrap(), None);
        store.put(k("a/", "1"), "x").unwrap();
        assert_eq!(store.get(&k("a/", "1")).unwrap(), Some(b"x".to_vec()));
        store.put(k("a/", "1"), "y").unwrap();
        assert_eq!(store.get(&k("a/", "1")).unwrap(), Some(b"y".to_vec()));
        store.delete(k("a/", "1")).unwrap();
        assert_eq!(store.get(&k("a/", "1")).unwrap(), None);
        store.delete(k("a/", "never")).unwrap();
        assert_eq!(store.get(&k("a/", "never")).unwrap(), None);
    }

    #[test]
    fn seqnos_increase() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), small()).unwrap();
        let mut last = 0;
        for i in 0..500 {
            let s = store.put(k("p", &i.to_string()), vec![0; 40]).unwrap();
            assert!(s > last);
            last = s;
        }
    }

    #[test]
    fn flush_preconditions() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), StoreConfig::default()).unwrap();
        assert!(matches!(
            store.flush_snapshot(false),
            Err(Error::PreconditionUnmet(_))
        ));
        assert!(matches!(
            store.flush_snapshot(true),
            Err(Error::PreconditionUnmet(_))
        ));
        store.put(k("p", "1"), "v").unwrap();
        assert!(store.flush_snapshot(false).is_err());
        store.flush_snapshot(true).unwrap();
        assert_eq!(store.level_set().run_counts(), vec![1]);
        assert_eq!(store.get(&k("p", "1")).unwrap(), Some(b"v".to_vec()));
    }

    #[test]
    fn closed_store_rejects_operations() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), StoreConfig::default()).unwrap();
        store.close().unwrap();
        assert!(matches!(store.put(k("p", "1"), "v"), Err(Error::StoreClosed)));
        assert!(matches!(store.get(&k("p", "1")), Err(Error::StoreClosed)));
        assert!(matches!(store.scan(b"p"), Err(Error::StoreClosed)));
    }

    #[test]
    fn scan_rejects_bad_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), StoreConfig::default()).unwrap();
        assert!(matches!(store.scan(b""), Err(Error::InvalidKey(_))));
        assert!(matches!(store.scan(&[b'x'; 65]), Err(Error::InvalidKey(_))));
    }

    #[test]
    fn logs_are_reclaimed_after_flush() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path(), small()).unwrap();
        for i in 0..3000 {
            store.put(k("p", &format!("{i:05}")), vec![1; 30]).unwrap();
        }
        let logs = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                parse_wal_file_name(e.as_ref().unwrap().file_name().to_str().unwrap()).is_some()
            })
            .count();
        assert!(store.stats().flushes > 3);
        assert!(logs <= 2, "{logs} logs left");
    }

    #[test]
    fn reopen_sees_everything() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path(), small()).unwrap();
            for i in 0..2000u32 {
                store.put(k("p", &format!("{i:05}")), i.to_le_bytes()).unwrap();
            }
            store.close().unwrap();
        }
        let store = Store::open(dir.path(), small()).unwrap();
        for i in 0..2000u32 {
            assert_eq!(
                store.get(&k("p", &format!("{i:05}"))).unwrap(),
                Some(i.to_le_bytes().to_vec())
            );
        }
        assert_eq!(store.put(k("p", "z"), "v").unwrap(), 2001);
        store.verify_integrity().unwrap();
    }

    #[test]
    fn manifest_without_logs_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path(), small()).unwrap();
            store.put(k("p", "1"), "v").unwrap();
            store.flush_snapshot(true).unwrap();
        }
        for e in fs::read_dir(dir.path()).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "log") {
                fs::remove_file(p).unwrap();
            }
        }
        assert!(matches!(
            Store::open(dir.path(), small()),
            Err(Error::WalMissing(_))
        ));
    }

    #[test]
    fn corrupt_log_header_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        {
            Store::open(dir.path(), small()).unwrap();
        }
        fs::write(dir.path().join(wal_file_name(1)), b"NOTALOG!").unwrap();
        assert!(matches!(
            Store::open(dir.path(), small()),
            Err(Error::WalHeaderCorrupt(_))
        ));
    }
}
