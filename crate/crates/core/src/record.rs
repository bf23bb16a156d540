use crate::key::StoreKey;

const FLAG_PUT: u8 = 0;
const FLAG_TOMBSTONE: u8 = 1;

/// Fixed part of an encoded record: seqno, flag, two key length fields and
/// the value length.
pub const RECORD_OVERHEAD: usize = 8 + 1 + 2 + 2 + 4;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Value {
    Put(Vec<u8>),
    Tombstone,
}

impl Value {
    pub fn is_tombstone(&self) -> bool {
        matches!(self, Value::Tombstone)
    }

    pub fn len(&self) -> usize {
        match self {
            Value::Put(v) => v.len(),
            Value::Tombstone => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One key-value mutation as it flows through WAL, memstore and chunks.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EntryRecord {
    pub key: StoreKey,
    pub value: Value,
    pub seqno: u64,
}

/// Result of probing one layer of the store.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Lookup {
    Value(Vec<u8>),
    Tombstone,
    Absent,
}

impl Lookup {
    pub fn is_absent(&self) -> bool {
        matches!(self, Lookup::Absent)
    }

    /// Collapses a final answer into what a caller of `get` sees.
    pub fn into_value(self) -> Option<Vec<u8>> {
        match self {
            Lookup::Value(v) => Some(v),
            Lookup::Tombstone | Lookup::Absent => None,
        }
    }
}

impl From<&Value> for Lookup {
    fn from(v: &Value) -> Self {
        match v {
            Value::Put(bytes) => Lookup::Value(bytes.clone()),
            Value::Tombstone => Lookup::Tombstone,
        }
    }
}

impl EntryRecord {
    pub fn put(key: StoreKey, value: impl Into<Vec<u8>>, seqno: u64) -> Self {
        EntryRecord {
            key,
            value: Value::Put(value.into()),
            seqno,
        }
    }

    pub fn tombstone(key: StoreKey, seqno: u64) -> Self {
        EntryRecord {
            key,
            value: Value::Tombstone,
            seqno,
        }
    }

    /// The entry size `C` used by all byte accounting.
    pub fn encoded_len(&self) -> usize {
        RECORD_OVERHEAD + self.key.prefix().len() + self.key.suffix().len() + self.value.len()
    }

    /// `seqno u64 | flag u8 | prefix-len u16 | prefix | suffix-len u16 | suffix | value-len u32 | value`,
    /// little-endian.
    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        buf.reserve(self.encoded_len());
        buf.extend_from_slice(&self.seqno.to_le_bytes());
        let flag = if self.value.is_tombstone() {
            FLAG_TOMBSTONE
        } else {
            FLAG_PUT
        };
        buf.push(flag);
        self.key.encode_into(buf);
        match &self.value {
            Value::Put(v) => {
                buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
                buf.extend_from_slice(v);
            }
            Value::Tombstone => buf.extend_from_slice(&0u32.to_le_bytes()),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut buf);
        buf
    }

    /// Decodes one record from the front of `input`, advancing it.
    pub fn decode(input: &mut &[u8]) -> Result<EntryRecord, DecodeError> {
        let mut cur = Cursor(input);
        let seqno = u64::from_le_bytes(cur.take_array()?);
        let flag = cur.take(1)?[0];
        let plen = u16::from_le_bytes(cur.take_array()?) as usize;
        let prefix = cur.take(plen)?.to_vec();
        let slen = u16::from_le_bytes(cur.take_array()?) as usize;
        let suffix = cur.take(slen)?.to_vec();
        let vlen = u32::from_le_bytes(cur.take_array()?) as usize;
        let value = match flag {
            FLAG_PUT => Value::Put(cur.take(vlen)?.to_vec()),
            FLAG_TOMBSTONE if vlen == 0 => Value::Tombstone,
            FLAG_TOMBSTONE => return Err(DecodeError("tombstone carries value bytes")),
            _ => return Err(DecodeError("unknown record flag")),
        };
        if prefix.is_empty() {
            return Err(DecodeError("empty key prefix"));
        }
        *input = cur.0;
        Ok(EntryRecord {
            key: StoreKey::from_parts(prefix, suffix),
            value,
            seqno,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeError(pub &'static str);

impl std::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0)
    }
}

struct Cursor<'a>(&'a [u8]);

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.0.len() < n {
            return Err(DecodeError("truncated record"));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn take_array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(p: &str, s: &str) -> StoreKey {
        StoreKey::new(p, s).unwrap()
    }

    #[test]
    fn encoded_len_matches_layout() {
        let rec = EntryRecord::put(key("ab", "cde"), b"xyz".to_vec(), 7);
        assert_eq!(rec.encoded_len(), 17 + 2 + 3 + 3);
        assert_eq!(rec.encode().len(), rec.encoded_len());
        let tomb = EntryRecord::tombstone(key("ab", ""), 8);
        assert_eq!(tomb.encode().len(), 19);
    }

    #[test]
    fn truncated_input_is_rejected() {
        let bytes = EntryRecord::put(key("p", "s"), b"v".to_vec(), 1).encode();
        for cut in 0..bytes.len() {
            let mut slice = &bytes[..cut];
            assert!(EntryRecord::decode(&mut slice).is_err());
        }
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(
            prefix in proptest::collection::vec(any::<u8>(), 1..64),
            suffix in proptest::collection::vec(any::<u8>(), 0..192),
            value in proptest::option::of(proptest::collection::vec(any::<u8>(), 0..300)),
            seqno in any::<u64>(),
        ) {
            let k = StoreKey::new(prefix, suffix).unwrap();
            let rec = match value {
                Some(v) => EntryRecord::put(k, v, seqno),
                None => EntryRecord::tombstone(k, seqno),
            };
            let mut buf = rec.encode();
            buf.extend_from_slice(b"trailing");
            let mut slice = buf.as_slice();
            let back = EntryRecord::decode(&mut slice).unwrap();
            prop_assert_eq!(back, rec);
            prop_assert_eq!(slice, b"trailing");
        }
    }
}
