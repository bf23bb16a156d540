//! An embedded log-structured merge-tree key-value store.
//!
//! Writes land in a write-ahead log and an in-memory store made of one
//! mutable active segment and a bounded pipeline of flattened immutable
//! segments ([`memstore`]). When memory fills up, the flattened segments are
//! merged and flushed as a chunk ([`chunk`]) into the persistent level set
//! ([`levels`]), which compacts either leveled or stepped (up to `r`
//! sub-level runs per level, merged `r`-way into the next level). Chunks
//! are indexed with a vanilla first/last-key index or the compact
//! three-level index ([`slim_index`]).
//!
//! Keys are `(prefix, suffix)` pairs and only ordered within a prefix, so
//! scans are per prefix.
//!
//! ```no_run
//! use steplsm::{Store, StoreConfig, StoreKey};
//!
//! let store = Store::open("/tmp/steplsm-demo", StoreConfig::default())?;
//! let key = StoreKey::new("user/", "42")?;
//! store.put(key.clone(), b"hello".to_vec())?;
//! assert_eq!(store.get(&key)?, Some(b"hello".to_vec()));
//! store.delete(key.clone())?;
//! assert_eq!(store.get(&key)?, None);
//! # Ok::<(), steplsm::Error>(())
//! ```

pub mod chunk;
pub mod config;
pub mod engine;
pub mod error;
pub mod key;
pub mod levels;
pub mod manifest;
pub mod memstore;
pub mod merge;
pub mod oracle;
pub mod record;
pub mod slim_index;
pub mod wal;

pub use config::{CompactionMode, IndexKind, Policy, StoreConfig, WalSync};
pub use engine::{Store, StoreStats};
pub use error::{Error, Result};
pub use key::StoreKey;
pub use levels::WriteAmpCounters;
pub use oracle::Oracle;
pub use record::{EntryRecord, Lookup, Value};
