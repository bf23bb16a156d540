//! K-way merge of sorted record sources.
//!
//! Every source must yield records in ascending key order. When several
//! sources hold the same key, only the record with the highest seqno
//! survives. Tombstones are kept unless the caller asks to drop them, which
//! is only safe when no older version can exist below the merge output.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::record::EntryRecord;

struct HeapItem {
    rec: EntryRecord,
    source: usize,
}

impl HeapItem {
    fn sort_key(&self) -> (&crate::key::StoreKey, Reverse<u64>) {
        (&self.rec.key, Reverse(self.rec.seqno))
    }
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // BinaryHeap is a max-heap; invert so the smallest key (and, for equal
    // keys, the newest record) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .sort_key()
            .cmp(&self.sort_key())
            .then_with(|| other.source.cmp(&self.source))
    }
}

pub struct MergeIter<I> {
    sources: Vec<I>,
    heap: BinaryHeap<HeapItem>,
    drop_tombstones: bool,
    failed: bool,
}

impl<I> MergeIter<I>
where
    I: Iterator<Item = Result<EntryRecord>>,
{
    pub fn new(sources: Vec<I>, drop_tombstones: bool) -> Result<Self> {
        let mut merge = MergeIter {
            sources,
            heap: BinaryHeap::new(),
            drop_tombstones,
            failed: false,
        };
        for idx in 0..merge.sources.len() {
            merge.advance(idx)?;
        }
        Ok(merge)
    }

    fn advance(&mut self, source: usize) -> Result<()> {
        if let Some(next) = self.sources[source].next() {
            self.heap.push(HeapItem { rec: next?, source });
        }
        Ok(())
    }

    fn next_record(&mut self) -> Result<Option<EntryRecord>> {
        loop {
            let Some(top) = self.heap.pop() else {
                return Ok(None);
            };
            self.advance(top.source)?;
            // Older versions of the same key are shadowed.
            while self
                .heap
                .peek()
                .is_some_and(|item| item.rec.key == top.rec.key)
            {
                let shadowed = self.heap.pop().expect("peeked");
                self.advance(shadowed.source)?;
            }
            if self.drop_tombstones && top.rec.value.is_tombstone() {
                continue;
            }
            return Ok(Some(top.rec));
        }
    }
}

impl<I> Iterator for MergeIter<I>
where
    I: Iterator<Item = Result<EntryRecord>>,
{
    type Item = Result<EntryRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(rec) => rec.map(Ok),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Merges in-memory sorted runs. Infallible sources, so this cannot fail.
pub fn merge_sorted_runs<'a, R>(runs: R, drop_tombstones: bool) -> Vec<EntryRecord>
where
    R: IntoIterator<Item = &'a [EntryRecord]>,
{
    let sources: Vec<_> = runs
        .into_iter()
        .map(|run| run.iter().cloned().map(Ok))
        .collect();
    MergeIter::new(sources, drop_tombstones)
        .expect("in-memory sources cannot fail")
        .map(|r| r.expect("in-memory sources cannot fail"))
        .collect()
}
