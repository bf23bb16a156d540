use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the store and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("store is closed")]
    StoreClosed,

    #[error("invalid key: {0}")]
    InvalidKey(&'static str),

    #[error("key too large: prefix is {prefix} bytes, suffix is {suffix} bytes")]
    KeyTooLarge { prefix: usize, suffix: usize },

    #[error("value too large: {0} bytes")]
    ValueTooLarge(usize),

    /// The write-ahead log could not accept an append.
    #[error("storage full: {0}")]
    StorageFull(#[source] io::Error),

    #[error("corrupted chunk {chunk}: {reason}")]
    CorruptedChunk { chunk: String, reason: String },

    #[error("block ordinal {ordinal} out of range ({count} blocks)")]
    OutOfRange { ordinal: usize, count: usize },

    #[error("refusing to build an empty chunk")]
    EmptyChunk,

    #[error("input records are not strictly ascending")]
    UnsortedInput,

    #[error("write-ahead log missing: {}", .0.display())]
    WalMissing(PathBuf),

    #[error("write-ahead log header corrupt: {}", .0.display())]
    WalHeaderCorrupt(PathBuf),

    #[error("precondition unmet: {0}")]
    PreconditionUnmet(&'static str),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("out-of-order seqno {got} after {last}")]
    OutOfOrderSeqno { last: u64, got: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupted(chunk: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::CorruptedChunk {
            chunk: chunk.into(),
            reason: reason.into(),
        }
    }
}
