use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::key::StoreKey;
use crate::merge::merge_sorted_runs;
use crate::record::{EntryRecord, Lookup, Value};

/// Estimated per-entry bookkeeping of the mutable ordered map (node
/// pointers plus a second copy of the seqno).
pub const ACTIVE_ENTRY_OVERHEAD: usize = 64;
/// Per-entry bookkeeping of a flat array: one offset.
pub const FLAT_ENTRY_OVERHEAD: usize = 8;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct VersionedKey {
    key: StoreKey,
    seqno: Reverse<u64>,
}

/// The single mutable segment absorbing writes. Keeps every version; dedup
/// happens when the segment is flattened.
#[derive(Default, Debug)]
pub struct ActiveSegment {
    entries: BTreeMap<VersionedKey, Value>,
    byte_size: usize,
}

impl ActiveSegment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rec: EntryRecord) {
        let key_bytes = rec.encoded_len() - rec.value.len();
        self.byte_size += rec.encoded_len();
        let vk = VersionedKey {
            key: rec.key,
            seqno: Reverse(rec.seqno),
        };
        if let Some(old) = self.entries.insert(vk, rec.value) {
            // Same key and seqno twice: replay of an already applied record.
            self.byte_size -= key_bytes + old.len();
        }
    }

    /// Newest version of `key` in this segment.
    pub fn get(&self, key: &StoreKey) -> Option<(u64, &Value)> {
        let probe = VersionedKey {
            key: key.clone(),
            seqno: Reverse(u64::MAX),
        };
        self.entries
            .range(probe..)
            .next()
            .filter(|(vk, _)| &vk.key == key)
            .map(|(vk, v)| (vk.seqno.0, v))
    }

    /// Newest version of every key with the given prefix, ascending.
    pub fn prefix_records(&self, prefix: &[u8]) -> Vec<EntryRecord> {
        let start = VersionedKey {
            key: StoreKey::group_start(prefix),
            seqno: Reverse(u64::MAX),
        };
        let mut out: Vec<EntryRecord> = Vec::new();
        for (vk, v) in self.entries.range(start..) {
            if vk.key.prefix() != prefix {
                break;
            }
            if out.last().is_some_and(|last| last.key == vk.key) {
                continue;
            }
            out.push(EntryRecord {
                key: vk.key.clone(),
                value: v.clone(),
                seqno: vk.seqno.0,
            });
        }
        out
    }

    /// Newest version of every key, ascending.
    pub fn newest_records(&self) -> Vec<EntryRecord> {
        let mut out: Vec<EntryRecord> = Vec::new();
        for (vk, v) in &self.entries {
            if out.last().is_some_and(|last| last.key == vk.key) {
                continue;
            }
            out.push(EntryRecord {
                key: vk.key.clone(),
                value: v.clone(),
                seqno: vk.seqno.0,
            });
        }
        out
    }

    /// Number of stored versions (not distinct keys).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn byte_size(&self) -> usize {
        self.byte_size
    }

    pub fn footprint(&self) -> usize {
        self.byte_size + self.entries.len() * ACTIVE_ENTRY_OVERHEAD
    }

    pub fn max_seqno(&self) -> Option<u64> {
        self.entries.keys().map(|vk| vk.seqno.0).max()
    }
}

/// An immutable, sorted array segment with one record per key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatSegment {
    records: Vec<EntryRecord>,
    byte_size: usize,
    created_at: u64,
}

impl FlatSegment {
    /// Replaces the ordered map of a sealed segment with a sorted array,
    /// keeping only the newest version of each key.
    pub fn flatten(sealed: ActiveSegment, created_at: u64) -> FlatSegment {
        let mut records: Vec<EntryRecord> = Vec::new();
        // Map order is (key asc, seqno desc): the first record per key is
        // the newest.
        for (vk, value) in sealed.entries {
            if records.last().is_some_and(|last| last.key == vk.key) {
                continue;
            }
            records.push(EntryRecord {
                key: vk.key,
                value,
                seqno: vk.seqno.0,
            });
        }
        FlatSegment::from_sorted(records, created_at)
    }

    pub(crate) fn from_sorted(records: Vec<EntryRecord>, created_at: u64) -> FlatSegment {
        debug_assert!(records.windows(2).all(|w| w[0].key < w[1].key));
        let byte_size = records.iter().map(EntryRecord::encoded_len).sum();
        FlatSegment {
            records,
            byte_size,
            created_at,
        }
    }

    /// Cross-segment merge: exactly one record per key survives (max
    /// seqno). Tombstones are retained because they may still shadow
    /// persisted data.
    pub fn merge(segments: &[Arc<FlatSegment>], created_at: u64) -> FlatSegment {
        let merged = merge_sorted_runs(segments.iter().map(|s| s.records()), false);
        FlatSegment::from_sorted(merged, created_at)
    }

    pub fn get(&self, key: &StoreKey) -> Option<&EntryRecord> {
        self.records
            .binary_search_by(|r| r.key.cmp(key))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn prefix_records(&self, prefix: &[u8]) -> &[EntryRecord] {
        let start = self.records.partition_point(|r| r.key.prefix() < prefix);
        let end = start + self.records[start..].partition_point(|r| r.key.prefix() == prefix);
        &self.records[start..end]
    }

    pub fn records(&self) -> &[EntryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn byte_size(&self) -> usize {
        self.byte_size
    }

    pub fn footprint(&self) -> usize {
        self.byte_size + self.records.len() * FLAT_ENTRY_OVERHEAD
    }

    pub fn created_at(&self) -> u64 {
        self.created_at
    }

    pub fn max_seqno(&self) -> Option<u64> {
        self.records.iter().map(|r| r.seqno).max()
    }

    pub fn lookup(&self, key: &StoreKey) -> Lookup {
        self.get(key)
            .map_or(Lookup::Absent, |r| Lookup::from(&r.value))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn key(n: u32) -> StoreKey {
        StoreKey::new("p", format!("{n:03}")).unwrap()
    }

    #[test]
    fn overwrites_are_kept_until_flatten() {
        let mut seg = ActiveSegment::new();
        for seqno in 1..=100 {
            seg.insert(EntryRecord::put(key(7), seqno.to_string(), seqno));
        }
        assert_eq!(seg.len(), 100);
        let (seqno, value) = seg.get(&key(7)).unwrap();
        assert_eq!(seqno, 100);
        assert_eq!(value, &Value::Put(b"100".to_vec()));
        let flat = FlatSegment::flatten(seg, 0);
        assert_eq!(flat.len(), 1);
        assert_eq!(flat.records()[0].seqno, 100);
    }

    #[test]
    fn byte_size_tracks_inserts() {
        let mut seg = ActiveSegment::new();
        let mut total = 0;
        for i in 0..20 {
            let rec = EntryRecord::put(key(i % 5), vec![0u8; i as usize], i as u64 + 1);
            total += rec.encoded_len();
            seg.insert(rec);
        }
        assert_eq!(seg.byte_size(), total);
    }

    #[test]
    fn empty_flatten() {
        let flat = FlatSegment::flatten(ActiveSegment::new(), 3);
        assert!(flat.is_empty());
        assert_eq!(flat.created_at(), 3);
    }

    #[test]
    fn reverse_inserts_come_out_sorted() {
        let mut seg = ActiveSegment::new();
        for (seqno, k) in (0..50).rev().enumerate() {
            seg.insert(EntryRecord::put(key(k), b"v".to_vec(), seqno as u64 + 1));
        }
        let flat = FlatSegment::flatten(seg, 0);
        assert!(flat.records().windows(2).all(|w| w[0].key < w[1].key));
        assert_eq!(flat.len(), 50);
    }

    #[test]
    fn flatten_keeps_max_seqno_per_key() {
        // 50 puts over 10 keys; oracle is a last-write-wins map.
        let mut seg = ActiveSegment::new();
        let mut oracle = BTreeMap::new();
        let mut x = 17u32;
        for seqno in 1..=50u64 {
            x = x.wrapping_mul(1103515245).wrapping_add(12345);
            let k = key((x >> 16) % 10);
            oracle.insert(k.clone(), seqno);
            seg.insert(EntryRecord::put(k, seqno.to_string(), seqno));
        }
        let footprint_before = seg.footprint();
        let flat = FlatSegment::flatten(seg, 0);
        assert_eq!(flat.len(), oracle.len());
        for rec in flat.records() {
            assert_eq!(oracle[&rec.key], rec.seqno);
        }
        assert!(flat.footprint() <= footprint_before);
    }

    #[test]
    fn merge_keeps_newest_and_tombstones() {
        let a = Arc::new(FlatSegment::from_sorted(
            vec![EntryRecord::put(key(1), b"a".to_vec(), 5)],
            0,
        ));
        let b = Arc::new(FlatSegment::from_sorted(
            vec![
                EntryRecord::put(key(1), b"b".to_vec(), 9),
                EntryRecord::tombstone(key(2), 10),
            ],
            1,
        ));
        let merged = FlatSegment::merge(&[b, a], 2);
        assert_eq!(merged.len(), 2);
        assert_eq!(merged.get(&key(1)).unwrap().seqno, 9);
        assert_eq!(merged.lookup(&key(2)), Lookup::Tombstone);
    }

    #[test]
    fn prefix_slices() {
        let recs = vec![
            EntryRecord::put(StoreKey::new("a", "1").unwrap(), b"".to_vec(), 1),
            EntryRecord::put(StoreKey::new("b", "1").unwrap(), b"".to_vec(), 2),
            EntryRecord::put(StoreKey::new("b", "2").unwrap(), b"".to_vec(), 3),
            EntryRecord::put(StoreKey::new("c", "").unwrap(), b"".to_vec(), 4),
        ];
        let flat = FlatSegment::from_sorted(recs, 0);
        assert_eq!(flat.prefix_records(b"b").len(), 2);
        assert!(flat.prefix_records(b"bb").is_empty());
    }
}
