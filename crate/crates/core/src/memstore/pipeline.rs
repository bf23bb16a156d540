use std::collections::HashSet;
use std::sync::Arc;

use crate::config::Policy;
use crate::key::StoreKey;
use crate::record::Lookup;

use super::segment::FlatSegment;

/// Redundancy estimate that drives the adaptive policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyStats {
    /// Distinct keys over total records across the pipeline, in (0, 1].
    /// An empty pipeline reports 1.0 (nothing redundant).
    pub unique_fraction: f64,
    pub adaptive_threshold: f64,
}

impl PolicyStats {
    pub fn new(adaptive_threshold: f64) -> Self {
        PolicyStats {
            unique_fraction: 1.0,
            adaptive_threshold,
        }
    }

    /// Exact count; pipelines are short so this stays cheap.
    pub fn measure(segments: &[Arc<FlatSegment>], adaptive_threshold: f64) -> Self {
        let total: usize = segments.iter().map(|s| s.len()).sum();
        let unique_fraction = if total == 0 {
            1.0
        } else {
            let distinct: HashSet<&StoreKey> = segments
                .iter()
                .flat_map(|s| s.records().iter().map(|r| &r.key))
                .collect();
            distinct.len() as f64 / total as f64
        };
        PolicyStats {
            unique_fraction,
            adaptive_threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    MergeNow,
    FlushAsIs,
    Wait,
}

/// Pure policy table.
///
/// Eager merges whenever two segments are present (or the cap is already
/// exceeded, which only happens with `S = 0`). Basic merges once the
/// pipeline is longer than the cap. Adaptive does the same only if the
/// pipeline is redundant enough, and otherwise hands the segments over
/// unmerged.
pub fn decide_policy(policy: Policy, stats: &PolicyStats, len: usize, cap: usize) -> Decision {
    let over_cap = len > cap;
    match policy {
        Policy::Eager if len >= 2 || over_cap => Decision::MergeNow,
        Policy::Basic if over_cap => Decision::MergeNow,
        Policy::Adaptive if over_cap && stats.unique_fraction < stats.adaptive_threshold => {
            Decision::MergeNow
        }
        Policy::Adaptive if over_cap => Decision::FlushAsIs,
        _ => Decision::Wait,
    }
}

/// What a push left behind for the snapshot set.
#[derive(Debug, Default)]
pub struct PushOutcome {
    pub decision: Option<Decision>,
    /// Segments leaving the pipeline, newest first.
    pub handed_off: Vec<Arc<FlatSegment>>,
    pub merged_inputs: usize,
    pub merged_outputs: usize,
}

/// Flattened immutable segments, newest first, bounded by `cap`.
#[derive(Debug)]
pub struct SegmentPipeline {
    segments: Vec<Arc<FlatSegment>>,
    cap: usize,
    policy: Policy,
    stats: PolicyStats,
}

impl SegmentPipeline {
    pub fn new(cap: usize, policy: Policy, adaptive_threshold: f64) -> Self {
        SegmentPipeline {
            segments: Vec::new(),
            cap,
            policy,
            stats: PolicyStats::new(adaptive_threshold),
        }
    }

    /// Prepends `flat` and applies the policy. A merge that happens while
    /// the pipeline is within its cap (eager) stays in the pipeline; a merge
    /// or hand-off triggered by exceeding the cap empties the pipeline into
    /// the returned snapshot list.
    pub fn push(&mut self, flat: Arc<FlatSegment>, created_at: u64) -> PushOutcome {
        self.segments.insert(0, flat);
        self.refresh_stats();
        let len = self.segments.len();
        let decision = decide_policy(self.policy, &self.stats, len, self.cap);
        let mut outcome = PushOutcome {
            decision: Some(decision),
            ..Default::default()
        };
        match decision {
            Decision::Wait => {}
            Decision::MergeNow => {
                let merged = Arc::new(FlatSegment::merge(&self.segments, created_at));
                outcome.merged_inputs = self.segments.iter().map(|s| s.len()).sum();
                outcome.merged_outputs = merged.len();
                if len > self.cap {
                    self.segments.clear();
                    outcome.handed_off.push(merged);
                } else {
                    self.segments = vec![merged];
                }
                self.refresh_stats();
            }
            Decision::FlushAsIs => {
                outcome.handed_off = std::mem::take(&mut self.segments);
                self.refresh_stats();
            }
        }
        outcome
    }

    /// Removes every segment, newest first.
    pub fn drain(&mut self) -> Vec<Arc<FlatSegment>> {
        let out = std::mem::take(&mut self.segments);
        self.refresh_stats();
        out
    }

    fn refresh_stats(&mut self) {
        self.stats = PolicyStats::measure(&self.segments, self.stats.adaptive_threshold);
    }

    pub fn stats(&self) -> &PolicyStats {
        &self.stats
    }

    pub fn segments(&self) -> &[Arc<FlatSegment>] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn footprint(&self) -> usize {
        self.segments.iter().map(|s| s.footprint()).sum()
    }

    /// Newest-first probe. Returns the answer and how many segments were
    /// consulted.
    pub fn search(&self, key: &StoreKey) -> (Lookup, usize) {
        for (i, seg) in self.segments.iter().enumerate() {
            let hit = seg.lookup(key);
            if !hit.is_absent() {
                return (hit, i + 1);
            }
        }
        (Lookup::Absent, self.segments.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::EntryRecord;

    fn key(n: u32) -> StoreKey {
        StoreKey::new("p", format!("{n:04}")).unwrap()
    }

    fn seg(keys: &[u32], first_seqno: u64) -> Arc<FlatSegment> {
        let recs = keys
            .iter()
            .enumerate()
            .map(|(i, &k)| EntryRecord::put(key(k), b"v".to_vec(), first_seqno + i as u64))
            .collect();
        Arc::new(FlatSegment::from_sorted(recs, first_seqno))
    }

    fn stats(u: f64) -> PolicyStats {
        PolicyStats {
            unique_fraction: u,
            adaptive_threshold: 0.8,
        }
    }

    #[test]
    fn policy_table() {
        use Decision::*;
        use Policy::*;
        // (policy, unique fraction, len, cap, expected)
        let table = [
            (Eager, 1.0, 1, 2, Wait),
            (Eager, 1.0, 2, 2, MergeNow),
            (Eager, 0.1, 2, 5, MergeNow),
            (Eager, 1.0, 1, 0, MergeNow),
            (Basic, 0.1, 5, 5, Wait),
            (Basic, 1.0, 6, 5, MergeNow),
            (Basic, 0.1, 1, 0, MergeNow),
            (Adaptive, 0.95, 6, 5, FlushAsIs),
            (Adaptive, 0.8, 6, 5, FlushAsIs),
            (Adaptive, 0.79, 6, 5, MergeNow),
            (Adaptive, 0.1, 5, 5, Wait),
            (Adaptive, 1.0, 0, 0, Wait),
        ];
        for (policy, u, len, cap, want) in table {
            let got = decide_policy(policy, &stats(u), len, cap);
            assert_eq!(got, want, "{policy:?} u={u} len={len} cap={cap}");
            // Pure: same inputs, same answer.
            assert_eq!(decide_policy(policy, &stats(u), len, cap), got);
        }
    }

    #[test]
    fn push_into_empty_pipeline() {
        let mut p = SegmentPipeline::new(5, Policy::Basic, 0.8);
        let out = p.push(seg(&[1, 2], 1), 0);
        assert_eq!(p.len(), 1);
        assert!(out.handed_off.is_empty());
        assert_eq!(out.decision, Some(Decision::Wait));
    }

    #[test]
    fn basic_sixth_push_merges_everything_into_one_snapshot() {
        let mut p = SegmentPipeline::new(5, Policy::Basic, 0.8);
        for i in 0..5u32 {
            let out = p.push(seg(&[i, 100], u64::from(i) * 10 + 1), u64::from(i));
            assert!(out.handed_off.is_empty());
        }
        assert_eq!(p.len(), 5);
        let out = p.push(seg(&[5, 100], 51), 5);
        assert_eq!(out.decision, Some(Decision::MergeNow));
        assert_eq!(out.handed_off.len(), 1);
        assert!(p.is_empty());
        let merged = &out.handed_off[0];
        // keys 0..=5 plus the shared key 100, newest copy retained
        assert_eq!(merged.len(), 7);
        assert_eq!(merged.get(&key(100)).unwrap().seqno, 52);
        assert_eq!(out.merged_inputs, 12);
        assert_eq!(out.merged_outputs, 7);
    }

    #[test]
    fn eager_keeps_a_single_segment() {
        let mut p = SegmentPipeline::new(2, Policy::Eager, 0.8);
        p.push(seg(&[1], 1), 0);
        assert_eq!(p.len(), 1);
        let out = p.push(seg(&[1, 2], 2), 1);
        assert_eq!(out.decision, Some(Decision::MergeNow));
        assert_eq!(p.len(), 1);
        assert!(out.handed_off.is_empty());
        for i in 0..10 {
            p.push(seg(&[i], 10 + u64::from(i)), 2);
            assert!(p.len() <= 1);
        }
    }

    #[test]
    fn adaptive_hands_over_unmerged_when_unique() {
        let mut p = SegmentPipeline::new(1, Policy::Adaptive, 0.8);
        p.push(seg(&[1, 2], 1), 0);
        let out = p.push(seg(&[3, 4], 3), 1);
        assert_eq!(out.decision, Some(Decision::FlushAsIs));
        assert_eq!(out.handed_off.len(), 2);
        assert_eq!(out.merged_inputs, 0);
        // redundant pipeline merges instead
        p.push(seg(&[1, 2], 10), 2);
        let out = p.push(seg(&[1, 2], 20), 3);
        assert_eq!(out.decision, Some(Decision::MergeNow));
        assert_eq!(out.handed_off.len(), 1);
        assert_eq!(out.handed_off[0].len(), 2);
    }

    #[test]
    fn stats_track_redundancy() {
        let mut p = SegmentPipeline::new(5, Policy::Basic, 0.8);
        assert_eq!(p.stats().unique_fraction, 1.0);
        p.push(seg(&[1, 2], 1), 0);
        p.push(seg(&[1, 2], 3), 1);
        assert!((p.stats().unique_fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn search_is_newest_first() {
        let mut p = SegmentPipeline::new(5, Policy::Basic, 0.8);
        let old = Arc::new(FlatSegment::from_sorted(
            vec![EntryRecord::put(key(1), b"old".to_vec(), 1)],
            0,
        ));
        let new = Arc::new(FlatSegment::from_sorted(
            vec![EntryRecord::put(key(1), b"new".to_vec(), 2)],
            1,
        ));
        p.push(old, 0);
        p.push(seg(&[9], 5), 1);
        p.push(new, 2);
        p.push(seg(&[8], 6), 3);
        assert_eq!(p.search(&key(1)), (Lookup::Value(b"new".to_vec()), 2));
        assert_eq!(p.search(&key(2)), (Lookup::Absent, 4));
    }
}
