use std::fmt;

use crate::error::{Error, Result};

pub const MAX_PREFIX_LEN: usize = 64;
pub const MAX_SUFFIX_LEN: usize = 192;

/// A composite key ordered by prefix, then suffix.
///
/// Ordering is only meaningful inside one prefix group; the store never
/// promises a global order across prefixes (scans are per prefix).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct StoreKey {
    prefix: Vec<u8>,
    suffix: Vec<u8>,
}

impl StoreKey {
    pub fn new(prefix: impl Into<Vec<u8>>, suffix: impl Into<Vec<u8>>) -> Result<Self> {
        let key = StoreKey {
            prefix: prefix.into(),
            suffix: suffix.into(),
        };
        key.validate()?;
        Ok(key)
    }

    /// Builds a key without validation. Used by decoders that have already
    /// bounded the lengths by their wire format.
    pub(crate) fn from_parts(prefix: Vec<u8>, suffix: Vec<u8>) -> Self {
        StoreKey { prefix, suffix }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prefix.is_empty() {
            return Err(Error::InvalidKey("prefix must not be empty"));
        }
        if self.prefix.len() > MAX_PREFIX_LEN || self.suffix.len() > MAX_SUFFIX_LEN {
            return Err(Error::KeyTooLarge {
                prefix: self.prefix.len(),
                suffix: self.suffix.len(),
            });
        }
        Ok(())
    }

    pub fn prefix(&self) -> &[u8] {
        &self.prefix
    }

    pub fn suffix(&self) -> &[u8] {
        &self.suffix
    }

    /// Smallest key of a prefix group.
    pub(crate) fn group_start(prefix: &[u8]) -> Self {
        StoreKey {
            prefix: prefix.to_vec(),
            suffix: Vec::new(),
        }
    }

    /// Encoded length: two u16 length fields plus the bytes.
    pub fn encoded_len(&self) -> usize {
        4 + self.prefix.len() + self.suffix.len()
    }

    pub(crate) fn encode_into(&self, buf: &mut Vec<u8>) {
        buf.extend_from_slice(&(self.prefix.len() as u16).to_le_bytes());
        buf.extend_from_slice(&self.prefix);
        buf.extend_from_slice(&(self.suffix.len() as u16).to_le_bytes());
        buf.extend_from_slice(&self.suffix);
    }
}

impl fmt::Debug for StoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "StoreKey({:?}|{:?})",
            String::from_utf8_lossy(&self.prefix),
            String::from_utf8_lossy(&self.suffix)
        )
    }
}

impl fmt::Display for StoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}",
            String::from_utf8_lossy(&self.prefix),
            String::from_utf8_lossy(&self.suffix)
        )
    }
}
