use crate::key::StoreKey;
use crate::record::DecodeError;
use crate::slim_index::IndexCostReport;

/// Baseline block index: full first and last key per block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VanillaBlockIndex {
    bounds: Vec<(StoreKey, StoreKey)>,
}

impl VanillaBlockIndex {
    pub fn new(bounds: Vec<(StoreKey, StoreKey)>) -> Self {
        VanillaBlockIndex { bounds }
    }

    pub fn bounds(&self) -> &[(StoreKey, StoreKey)] {
        &self.bounds
    }

    /// Binary search over `[first, last]` ranges; `None` when the key falls
    /// outside every block.
    pub fn lookup(&self, key: &StoreKey) -> Option<usize> {
        let i = self.bounds.partition_point(|(_, last)| last < key);
        self.bounds
            .get(i)
            .filter(|(first, _)| first <= key)
            .map(|_| i)
    }

    pub fn first_block_for_prefix(&self, prefix: &[u8]) -> Option<usize> {
        let start = StoreKey::group_start(prefix);
        let i = self.bounds.partition_point(|(_, last)| *last < start);
        (i < self.bounds.len()).then_some(i)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (first, last) in &self.bounds {
            first.encode_into(&mut out);
            last.encode_into(&mut out);
        }
        out
    }

    pub fn decode(mut bytes: &[u8], blocks: usize) -> Result<Self, DecodeError> {
        let mut bounds = Vec::with_capacity(blocks);
        for _ in 0..blocks {
            let first = decode_key(&mut bytes)?;
            let last = decode_key(&mut bytes)?;
            bounds.push((first, last));
        }
        if !bytes.is_empty() {
            return Err(DecodeError("trailing bytes after vanilla index"));
        }
        Ok(VanillaBlockIndex { bounds })
    }

    /// Size of the serialized boundary keys (block handles excluded, as for
    /// the three-level index).
    pub fn measure_cost(&self, entries_per_block: usize) -> IndexCostReport {
        let bits = 8 * self
            .bounds
            .iter()
            .map(|(f, l)| f.encoded_len() + l.encoded_len())
            .sum::<usize>() as u64;
        IndexCostReport::new(bits, self.bounds.len(), entries_per_block)
    }
}

fn decode_key(bytes: &mut &[u8]) -> Result<StoreKey, DecodeError> {
    let mut take = |n: usize| -> Result<&[u8], DecodeError> {
        if bytes.len() < n {
            return Err(DecodeError("truncated key"));
        }
        let (head, tail) = bytes.split_at(n);
        *bytes = tail;
        Ok(head)
    };
    let plen = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
    let prefix = take(plen)?.to_vec();
    let slen = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
    let suffix = take(slen)?.to_vec();
    if prefix.is_empty() {
        return Err(DecodeError("empty key prefix"));
    }
    Ok(StoreKey::from_parts(prefix, suffix))
}
