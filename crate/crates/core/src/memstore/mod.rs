//! The in-memory store: one mutable active segment, a bounded pipeline of
//! flattened immutable segments, and a snapshot set of segments that have
//! left the pipeline and wait for the next flush.
//!
//! Reads probe the active segment, then the pipeline newest to oldest, then
//! the snapshot set newest to oldest. Everything after the active segment
//! is immutable and shared through `Arc`, so a flush can copy the snapshot
//! list out and write it without holding the memstore.

mod pipeline;
mod segment;

use std::sync::Arc;

pub use pipeline::{decide_policy, Decision, PolicyStats, PushOutcome, SegmentPipeline};
pub use segment::{ActiveSegment, FlatSegment, ACTIVE_ENTRY_OVERHEAD, FLAT_ENTRY_OVERHEAD};

use crate::config::{Policy, StoreConfig};
use crate::key::StoreKey;
use crate::record::{EntryRecord, Lookup};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemConfig {
    pub budget: usize,
    pub active_fraction: f64,
    pub pipeline_cap: usize,
    pub policy: Policy,
    pub adaptive_threshold: f64,
}

impl From<&StoreConfig> for MemConfig {
    fn from(cfg: &StoreConfig) -> Self {
        MemConfig {
            budget: cfg.memstore_budget,
            active_fraction: cfg.active_fraction,
            pipeline_cap: cfg.pipeline_cap,
            policy: cfg.policy,
            adaptive_threshold: cfg.adaptive_threshold,
        }
    }
}

impl MemConfig {
    pub fn active_threshold(&self) -> f64 {
        self.active_fraction * self.budget as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Absorbed,
    /// The active segment crossed `A * M` and was sealed, flattened and
    /// pushed into the pipeline.
    Sealed,
}

/// Observability counters exported to the benchmark harness.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct MemStats {
    pub seals: u64,
    pub merges: u64,
    pub merge_input_records: u64,
    pub merge_output_records: u64,
    pub handoffs: u64,
}

#[derive(Debug)]
pub struct MemStore {
    cfg: MemConfig,
    active: ActiveSegment,
    pipeline: SegmentPipeline,
    /// Segments awaiting flush, newest first. Still readable.
    snapshots: Vec<Arc<FlatSegment>>,
    next_segment_id: u64,
    stats: MemStats,
}

impl MemStore {
    pub fn new(cfg: MemConfig) -> Self {
        MemStore {
            pipeline: SegmentPipeline::new(cfg.pipeline_cap, cfg.policy, cfg.adaptive_threshold),
            cfg,
            active: ActiveSegment::new(),
            snapshots: Vec::new(),
            next_segment_id: 0,
            stats: MemStats::default(),
        }
    }

    pub fn insert(&mut self, rec: EntryRecord) -> InsertOutcome {
        self.active.insert(rec);
        if self.active.byte_size() as f64 > self.cfg.active_threshold() {
            self.seal_active();
            InsertOutcome::Sealed
        } else {
            InsertOutcome::Absorbed
        }
    }

    /// Seals, flattens and pushes the active segment. No-op when empty.
    pub fn seal_active(&mut self) -> bool {
        if self.active.is_empty() {
            return false;
        }
        let sealed = std::mem::take(&mut self.active);
        let id = self.bump_id();
        let flat = Arc::new(FlatSegment::flatten(sealed, id));
        self.stats.seals += 1;
        let merge_id = self.bump_id();
        let outcome = self.pipeline.push(flat, merge_id);
        if outcome.decision == Some(Decision::MergeNow) {
            self.stats.merges += 1;
            self.stats.merge_input_records += outcome.merged_inputs as u64;
            self.stats.merge_output_records += outcome.merged_outputs as u64;
        }
        if !outcome.handed_off.is_empty() {
            self.stats.handoffs += 1;
            // handed_off is newest first and newer than every snapshot
            let mut snapshots = outcome.handed_off;
            snapshots.append(&mut self.snapshots);
            self.snapshots = snapshots;
        }
        true
    }

    fn bump_id(&mut self) -> u64 {
        self.next_segment_id += 1;
        self.next_segment_id
    }

    /// Active, then pipeline newest-first, then snapshots newest-first.
    pub fn search(&self, key: &StoreKey) -> Lookup {
        self.search_probed(key).0
    }

    /// Like [`MemStore::search`], also reporting how many immutable
    /// segments were consulted.
    pub fn search_probed(&self, key: &StoreKey) -> (Lookup, usize) {
        if let Some((_, value)) = self.active.get(key) {
            return (Lookup::from(value), 0);
        }
        let (hit, mut probes) = self.pipeline.search(key);
        if !hit.is_absent() {
            return (hit, probes);
        }
        for seg in &self.snapshots {
            probes += 1;
            let hit = seg.lookup(key);
            if !hit.is_absent() {
                return (hit, probes);
            }
        }
        (Lookup::Absent, probes)
    }

    /// Newest record per key under `prefix` from every layer, each layer a
    /// sorted run, newest layer first.
    pub fn prefix_runs(&self, prefix: &[u8]) -> Vec<Vec<EntryRecord>> {
        let mut runs = vec![self.active.prefix_records(prefix)];
        for seg in self.pipeline.segments().iter().chain(&self.snapshots) {
            runs.push(seg.prefix_records(prefix).to_vec());
        }
        runs
    }

    pub fn footprint(&self) -> usize {
        self.active.footprint()
            + self.pipeline.footprint()
            + self.snapshots.iter().map(|s| s.footprint()).sum::<usize>()
    }

    /// The whole in-memory store has outgrown `M`.
    pub fn is_full(&self) -> bool {
        self.footprint() > self.cfg.budget
    }

    /// Moves whatever is left in the pipeline into the snapshot set and
    /// returns the full snapshot list (newest first). The segments stay
    /// readable until [`MemStore::finish_flush`].
    pub fn begin_flush(&mut self) -> Vec<Arc<FlatSegment>> {
        let mut pending = self.pipeline.drain();
        pending.append(&mut self.snapshots);
        self.snapshots = pending;
        self.snapshots.clone()
    }

    /// Drops the snapshots that a committed flush made durable.
    pub fn finish_flush(&mut self, flushed: &[Arc<FlatSegment>]) {
        self.snapshots
            .retain(|s| !flushed.iter().any(|f| Arc::ptr_eq(f, s)));
    }

    pub fn active(&self) -> &ActiveSegment {
        &self.active
    }

    pub fn pipeline(&self) -> &SegmentPipeline {
        &self.pipeline
    }

    pub fn snapshots(&self) -> &[Arc<FlatSegment>] {
        &self.snapshots
    }

    pub fn stats(&self) -> MemStats {
        self.stats
    }

    pub fn config(&self) -> &MemConfig {
        &self.cfg
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty() && self.pipeline.is_empty() && self.snapshots.is_empty()
    }
}
