//! Three-level block index.
//!
//! Built from the boundary keys of a chunk (first and last key of every
//! block, in order):
//!
//! 1. `prefix_array`: each distinct prefix among the boundary keys, emitted
//!    when the prefix changes;
//! 2. `last_offsets`: for each prefix, the last position in the boundary
//!    sequence where it occurs;
//! 3. one suffix fragment per block: the shortest prefix of the block's last
//!    suffix that no other boundary suffix of the same prefix group starts
//!    with. When the last suffix is itself a prefix of a neighbour it cannot
//!    be shortened and is stored whole as an escape entry.
//!
//! A lookup binary-searches the prefix, narrows to the blocks whose last
//! key belongs to that prefix group, and compares the query suffix against
//! the fragments. Truncating the query to a fragment's length decides
//! `query <= last_key` exactly for every key stored in the chunk; absent
//! keys may get a candidate block that the block read then rejects.

mod bits;

use integer_encoding::VarInt;

use crate::error::{Error, Result};
use crate::key::StoreKey;
use crate::record::DecodeError;

pub use bits::{BitReader, BitWriter};

/// Shortest distinguishing piece of a block's last suffix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuffixFragment {
    pub bytes: Vec<u8>,
    /// `bytes` is the full suffix and must be compared in full.
    pub escape: bool,
}

impl SuffixFragment {
    /// Whether `suffix <= last suffix of the block`, decided from the
    /// fragment alone.
    pub fn admits(&self, suffix: &[u8]) -> bool {
        if self.escape {
            suffix <= self.bytes.as_slice()
        } else {
            let cut = suffix.len().min(self.bytes.len());
            &suffix[..cut] <= self.bytes.as_slice()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreeLevelIndex {
    prefixes: Vec<Vec<u8>>,
    last_offsets: Vec<u32>,
    fragments: Vec<SuffixFragment>,
}

/// Bit accounting for a block index.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct IndexCostReport {
    pub total_index_bits: u64,
    pub blocks: usize,
    pub entries_per_block: usize,
    pub bits_per_block: f64,
    pub bits_per_key: f64,
}

impl IndexCostReport {
    pub fn new(total_index_bits: u64, blocks: usize, entries_per_block: usize) -> Self {
        let bits_per_block = total_index_bits as f64 / blocks.max(1) as f64;
        IndexCostReport {
            total_index_bits,
            blocks,
            entries_per_block,
            bits_per_block,
            bits_per_key: bits_per_block / entries_per_block.max(1) as f64,
        }
    }
}

fn lcp(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Checks that `(first, last)` pairs describe ascending, disjoint blocks.
pub(crate) fn check_bounds(bounds: &[(StoreKey, StoreKey)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::EmptyChunk);
    }
    for (i, (first, last)) in bounds.iter().enumerate() {
        if first > last {
            return Err(Error::UnsortedInput);
        }
        if i > 0 && bounds[i - 1].1 >= *first {
            return Err(Error::UnsortedInput);
        }
    }
    Ok(())
}

impl ThreeLevelIndex {
    /// Builds the index from each block's first and last key.
    pub fn build(bounds: &[(StoreKey, StoreKey)]) -> Result<Self> {
        check_bounds(bounds)?;
        let boundary: Vec<&StoreKey> = bounds.iter().flat_map(|(f, l)| [f, l]).collect();

        let mut prefixes: Vec<Vec<u8>> = Vec::new();
        let mut last_offsets: Vec<u32> = Vec::new();
        for (idx, key) in boundary.iter().enumerate() {
            if prefixes.last().map(Vec::as_slice) != Some(key.prefix()) {
                prefixes.push(key.prefix().to_vec());
                last_offsets.push(idx as u32);
            } else {
                *last_offsets.last_mut().expect("pushed") = idx as u32;
            }
        }

        let mut fragments = Vec::with_capacity(bounds.len());
        let mut group_lo = 0usize;
        for &hi in &last_offsets {
            let hi = hi as usize;
            let group = &boundary[group_lo..=hi];
            let mut distinct: Vec<&[u8]> = group.iter().map(|k| k.suffix()).collect();
            distinct.dedup();
            // Blocks whose last key (odd position) falls in this group.
            let mut pos = group_lo | 1;
            while pos <= hi {
                let suffix = boundary[pos].suffix();
                let at = distinct
                    .binary_search(&suffix)
                    .expect("suffix comes from the group");
                let before = at.checked_sub(1).map_or(0, |j| lcp(distinct[j], suffix));
                let after = distinct.get(at + 1).map_or(0, |n| lcp(n, suffix));
                let need = before.max(after) + 1;
                fragments.push(if need > suffix.len() {
                    SuffixFragment {
                        bytes: suffix.to_vec(),
                        escape: true,
                    }
                } else {
                    SuffixFragment {
                        bytes: suffix[..need].to_vec(),
                        escape: false,
                    }
                });
                pos += 2;
            }
            group_lo = hi + 1;
        }
        debug_assert_eq!(fragments.len(), bounds.len());
        Ok(ThreeLevelIndex {
            prefixes,
            last_offsets,
            fragments,
        })
    }

    pub fn prefix_array(&self) -> &[Vec<u8>] {
        &self.prefixes
    }

    pub fn last_offsets(&self) -> &[u32] {
        &self.last_offsets
    }

    pub fn fragments(&self) -> &[SuffixFragment] {
        &self.fragments
    }

    pub fn block_count(&self) -> usize {
        self.fragments.len()
    }

    /// Boundary positions `lo..=hi` covered by prefix group `g`.
    fn group_range(&self, g: usize) -> (usize, usize) {
        let lo = if g == 0 {
            0
        } else {
            self.last_offsets[g - 1] as usize + 1
        };
        (lo, self.last_offsets[g] as usize)
    }

    /// Candidate block for `key`, or `None` when no block can hold it.
    pub fn find(&self, key: &StoreKey) -> Option<usize> {
        match self
            .prefixes
            .binary_search_by(|p| p.as_slice().cmp(key.prefix()))
        {
            Ok(g) => {
                let (lo, hi) = self.group_range(g);
                // Blocks b with lo <= 2b + 1 <= hi.
                let first = lo / 2;
                let end = if hi >= 1 { (hi - 1) / 2 + 1 } else { 0 };
                if first < end {
                    let n = self.fragments[first..end]
                        .partition_point(|f| !f.admits(key.suffix()));
                    if first + n < end {
                        return Some(first + n);
                    }
                }
                // Past every last key of the group: only a block that
                // starts inside the group and ends beyond it remains.
                (hi % 2 == 0).then_some(hi / 2)
            }
            Err(0) => None,
            Err(g) => self.spanning_block(g - 1),
        }
    }

    /// A prefix missing from the boundary keys can only live inside a block
    /// whose first key closes the preceding group.
    fn spanning_block(&self, group: usize) -> Option<usize> {
        let off = self.last_offsets[group] as usize;
        off.is_multiple_of(2).then_some(off / 2)
    }

    /// First block that may contain keys with `prefix`.
    pub fn first_block_for_prefix(&self, prefix: &[u8]) -> Option<usize> {
        match self.prefixes.binary_search_by(|p| p.as_slice().cmp(prefix)) {
            Ok(g) => Some(self.group_range(g).0 / 2),
            Err(0) => None,
            Err(g) => self.spanning_block(g - 1),
        }
    }

    /// `[header: block count, three section lengths (u32 LE)]`
    /// `[prefixes: front-coded varints][last offsets: delta varints]`
    /// `[fragments: bit-packed]`.
    pub fn encode(&self) -> Vec<u8> {
        let mut prefix_sec = Vec::new();
        let mut prev: &[u8] = &[];
        for p in &self.prefixes {
            let shared = lcp(prev, p);
            push_varint(&mut prefix_sec, shared as u64);
            push_varint(&mut prefix_sec, (p.len() - shared) as u64);
            prefix_sec.extend_from_slice(&p[shared..]);
            prev = p;
        }

        let mut offset_sec = Vec::new();
        let mut prev_off = 0u32;
        for (i, &off) in self.last_offsets.iter().enumerate() {
            let delta = if i == 0 { off } else { off - prev_off };
            push_varint(&mut offset_sec, u64::from(delta));
            prev_off = off;
        }

        let mut w = BitWriter::new();
        let mut prev: &[u8] = &[];
        for frag in &self.fragments {
            let shared = lcp(prev, &frag.bytes);
            w.push_bit(frag.escape);
            w.push_gamma(shared as u64 + 1);
            w.push_gamma((frag.bytes.len() - shared) as u64 + 1);
            for &b in &frag.bytes[shared..] {
                w.push_bits(u64::from(b), 8);
            }
            prev = &frag.bytes;
        }
        let suffix_sec = w.into_bytes();

        let mut out = Vec::with_capacity(16 + prefix_sec.len() + offset_sec.len() + suffix_sec.len());
        for n in [
            self.fragments.len(),
            prefix_sec.len(),
            offset_sec.len(),
            suffix_sec.len(),
        ] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        out.extend_from_slice(&prefix_sec);
        out.extend_from_slice(&offset_sec);
        out.extend_from_slice(&suffix_sec);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let header = |i: usize| -> Result<usize, DecodeError> {
            bytes
                .get(i * 4..i * 4 + 4)
                .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
                .ok_or(DecodeError("index header truncated"))
        };
        let blocks = header(0)?;
        let (plen, olen, slen) = (header(1)?, header(2)?, header(3)?);
        if bytes.len() != 16 + plen + olen + slen {
            return Err(DecodeError("index section lengths disagree"));
        }
        let mut prefix_sec = &bytes[16..16 + plen];
        let mut offset_sec = &bytes[16 + plen..16 + plen + olen];
        let suffix_sec = &bytes[16 + plen + olen..];

        let mut prefixes: Vec<Vec<u8>> = Vec::new();
        while !prefix_sec.is_empty() {
            let shared = take_varint(&mut prefix_sec)? as usize;
            let rest = take_varint(&mut prefix_sec)? as usize;
            let prev = prefixes.last().map_or(&[][..], Vec::as_slice);
            if shared > prev.len() || rest > prefix_sec.len() {
                return Err(DecodeError("bad prefix entry"));
            }
            let mut p = prev[..shared].to_vec();
            p.extend_from_slice(&prefix_sec[..rest]);
            prefix_sec = &prefix_sec[rest..];
            if p.is_empty() || prefixes.last().is_some_and(|last| *last >= p) {
                return Err(DecodeError("prefix array not ascending"));
            }
            prefixes.push(p);
        }

        let mut last_offsets: Vec<u32> = Vec::with_capacity(prefixes.len());
        while !offset_sec.is_empty() {
            let delta = take_varint(&mut offset_sec)?;
            let off = match last_offsets.last() {
                None => delta,
                Some(_) if delta == 0 => return Err(DecodeError("offsets not ascending")),
                Some(&prev) => u64::from(prev) + delta,
            };
            last_offsets.push(u32::try_from(off).map_err(|_| DecodeError("offset overflow"))?);
        }
        if last_offsets.len() != prefixes.len()
            || blocks == 0
            || last_offsets.last().copied() != Some((2 * blocks - 1) as u32)
        {
            return Err(DecodeError("offsets do not match prefixes and blocks"));
        }

        let mut r = BitReader::new(suffix_sec);
        let mut fragments: Vec<SuffixFragment> = Vec::with_capacity(blocks);
        let bad = DecodeError("bad suffix fragment");
        for _ in 0..blocks {
            let escape = r.read_bit().ok_or(bad)?;
            let shared = (r.read_gamma().ok_or(bad)? - 1) as usize;
            let rest = (r.read_gamma().ok_or(bad)? - 1) as usize;
            let prev = fragments.last().map_or(&[][..], |f| f.bytes.as_slice());
            if shared > prev.len() || rest > suffix_sec.len() {
                return Err(bad);
            }
            let mut frag = prev[..shared].to_vec();
            for _ in 0..rest {
                frag.push(r.read_bits(8).ok_or(bad)? as u8);
            }
            fragments.push(SuffixFragment {
                bytes: frag,
                escape,
            });
        }
        Ok(ThreeLevelIndex {
            prefixes,
            last_offsets,
            fragments,
        })
    }

    /// Exact size of the serialized index.
    pub fn measure_cost(&self, entries_per_block: usize) -> IndexCostReport {
        let bits = 8 * self.encode().len() as u64;
        IndexCostReport::new(bits, self.block_count(), entries_per_block)
    }
}

fn push_varint(buf: &mut Vec<u8>, v: u64) {
    let mut tmp = [0u8; 10];
    let n = v.encode_var(&mut tmp);
    buf.extend_from_slice(&tmp[..n]);
}

fn take_varint(buf: &mut &[u8]) -> Result<u64, DecodeError> {
    let (v, n) = u64::decode_var(buf).ok_or(DecodeError("bad varint"))?;
    *buf = &buf[n..];
    Ok(v)
}
