//! Reference model: an ordered map holding the newest version of each key.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::key::StoreKey;
use crate::record::{EntryRecord, Value};

#[derive(Clone, Debug, Default)]
pub struct Oracle {
    entries: BTreeMap<StoreKey, (u64, Value)>,
    last_seqno: u64,
}

impl Oracle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one write. Seqnos must strictly increase.
    pub fn apply(&mut self, rec: &EntryRecord) -> Result<()> {
        if rec.seqno <= self.last_seqno {
            return Err(Error::OutOfOrderSeqno {
                last: self.last_seqno,
                got: rec.seqno,
            });
        }
        self.last_seqno = rec.seqno;
        self.entries
            .insert(rec.key.clone(), (rec.seqno, rec.value.clone()));
        Ok(())
    }

    pub fn expected_get(&self, key: &StoreKey) -> Option<&[u8]> {
        match self.entries.get(key) {
            Some((_, Value::Put(v))) => Some(v),
            _ => None,
        }
    }

    /// Live entries under `prefix` in suffix order.
    pub fn expected_scan(&self, prefix: &[u8]) -> Vec<(StoreKey, Vec<u8>)> {
        self.entries
            .range(StoreKey::group_start(prefix)..)
            .take_while(|(k, _)| k.prefix() == prefix)
            .filter_map(|(k, (_, v))| match v {
                Value::Put(v) => Some((k.clone(), v.clone())),
                Value::Tombstone => None,
            })
            .collect()
    }

    pub fn last_seqno(&self) -> u64 {
        self.last_seqno
    }

    /// Number of keys whose newest version is a value.
    pub fn live_len(&self) -> usize {
        self.entries.values().filter(|(_, v)| !v.is_tombstone()).count()
    }

    pub fn live_keys(&self) -> impl Iterator<Item = &StoreKey> {
        self.entries
            .iter()
            .filter(|(_, (_, v))| !v.is_tombstone())
            .map(|(k, _)| k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(p: &str, s: &str) -> StoreKey {
        StoreKey::new(p, s).unwrap()
    }

    #[test]
    fn newest_wins_and_tombstones_hide() {
        let mut o = Oracle::new();
        o.apply(&EntryRecord::put(k("a", "1"), "x", 1)).unwrap();
        o.apply(&EntryRecord::put(k("a", "1"), "y", 2)).unwrap();
        assert_eq!(o.expected_get(&k("a", "1")), Some(&b"y"[..]));
        o.apply(&EntryRecord::tombstone(k("a", "1"), 3)).unwrap();
        assert_eq!(o.expected_get(&k("a", "1")), None);
        assert_eq!(o.live_len(), 0);
    }

    #[test]
    fn rejects_stale_seqno() {
        let mut o = Oracle::new();
        o.apply(&EntryRecord::put(k("a", "1"), "x", 5)).unwrap();
        assert!(matches!(
            o.apply(&EntryRecord::put(k("a", "2"), "x", 5)),
            Err(Error::OutOfOrderSeqno { last: 5, got: 5 })
        ));
    }

    #[test]
    fn scan_is_per_prefix_in_suffix_order() {
        let mut o = Oracle::new();
        for (i, (p, s)) in [("b", "2"), ("a", "9"), ("b", "1"), ("ba", "0"), ("b", "")]
            .iter()
            .enumerate()
        {
            o.apply(&EntryRecord::put(k(p, s), *s, i as u64 + 1)).unwrap();
        }
        let got: Vec<_> = o
            .expected_scan(b"b")
            .into_iter()
            .map(|(k, _)| k.suffix().to_vec())
            .collect();
        assert_eq!(got, vec![b"".to_vec(), b"1".to_vec(), b"2".to_vec()]);
    }
}
