use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// In-memory compaction policy for the segment pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Merge only once the pipeline outgrows its cap.
    Basic,
    /// Merge as soon as two segments are present.
    Eager,
    /// Merge past the cap only when the pipeline is redundant enough.
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompactionMode {
    Leveled,
    Stepped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Vanilla,
    ThreeLevel,
}

impl IndexKind {
    pub(crate) fn tag(self) -> u8 {
        match self {
            IndexKind::Vanilla => 0,
            IndexKind::ThreeLevel => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(IndexKind::Vanilla),
            1 => Some(IndexKind::ThreeLevel),
            _ => None,
        }
    }
}

/// When an acknowledged WAL append must reach stable storage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalSync {
    /// fsync before every acknowledgement.
    EveryWrite,
    /// Hand every record to the OS, fsync at most once per interval.
    IntervalMs(u64),
}

macro_rules! parse_enum {
    ($ty:ty, $what:literal, { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().replace('_', "-").as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidConfig(format!(concat!("unknown ", $what, " {:?}"), other))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $(v if *v == $variant => $name,)+
                    _ => unreachable!(),
                };
                f.write_str(name)
            }
        }
    };
}

parse_enum!(Policy, "policy", {
    "basic" => Policy::Basic,
    "eager" => Policy::Eager,
    "adaptive" => Policy::Adaptive,
});

parse_enum!(CompactionMode, "compaction mode", {
    "leveled" => CompactionMode::Leveled,
    "stepped" => CompactionMode::Stepped,
});

parse_enum!(IndexKind, "index kind", {
    "vanilla" => IndexKind::Vanilla,
    "three-level" => IndexKind::ThreeLevel,
});

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    /// Level size ratio and stepped sub-level fan-in (`r`).
    pub growth_factor: usize,
    /// Total in-memory budget `M` in bytes.
    pub memstore_budget: usize,
    /// Active segment threshold as a fraction of `M` (`A`).
    pub active_fraction: f64,
    /// Maximum pipeline length (`S`). Zero disables the pipeline.
    pub pipeline_cap: usize,
    pub policy: Policy,
    /// Unique-key fraction below which the adaptive policy merges.
    pub adaptive_threshold: f64,
    pub compaction_mode: CompactionMode,
    pub index_kind: IndexKind,
    pub block_size: usize,
    /// Level-0 capacity for leveled compaction; `None` means four memstore
    /// snapshots (`4 * M`).
    pub base_bytes: Option<u64>,
    /// Compaction output is split into chunks of roughly this size.
    pub chunk_target_bytes: usize,
    pub wal_sync: WalSync,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            growth_factor: 8,
            memstore_budget: 1 << 20,
            active_fraction: 0.02,
            pipeline_cap: 5,
            policy: Policy::Basic,
            adaptive_threshold: 0.8,
            compaction_mode: CompactionMode::Stepped,
            index_kind: IndexKind::ThreeLevel,
            block_size: 4096,
            base_bytes: None,
            chunk_target_bytes: 4 << 20,
            wal_sync: WalSync::EveryWrite,
        }
    }
}

impl StoreConfig {
    /// Basic policy with `A = 0.02, S = 5`.
    pub fn basic() -> Self {
        StoreConfig::default()
    }

    /// Eager policy with `A = 0.25, S = 2`.
    pub fn eager() -> Self {
        StoreConfig {
            policy: Policy::Eager,
            active_fraction: 0.25,
            pipeline_cap: 2,
            ..StoreConfig::default()
        }
    }

    pub fn adaptive() -> Self {
        StoreConfig {
            policy: Policy::Adaptive,
            ..StoreConfig::default()
        }
    }

    pub fn active_threshold(&self) -> f64 {
        self.active_fraction * self.memstore_budget as f64
    }

    pub fn level0_capacity(&self) -> u64 {
        self.base_bytes
            .unwrap_or(4 * self.memstore_budget as u64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(2..=64).contains(&self.growth_factor) {
            return bad(format!("growth factor {} not in [2, 64]", self.growth_factor));
        }
        if !(self.active_fraction > 0.0 && self.active_fraction < 1.0) {
            return bad(format!("active fraction {} not in (0, 1)", self.active_fraction));
        }
        if !(self.adaptive_threshold > 0.0 && self.adaptive_threshold < 1.0) {
            return bad(format!(
                "adaptive threshold {} not in (0, 1)",
                self.adaptive_threshold
            ));
        }
        if self.memstore_budget < 1024 {
            return bad(format!("memstore budget {} below 1 KiB", self.memstore_budget));
        }
        if self.block_size < 64 {
            return bad(format!("block size {} below 64 bytes", self.block_size));
        }
        if self.chunk_target_bytes < self.block_size {
            return bad("chunk target smaller than one block".to_string());
        }
        if self.base_bytes == Some(0) {
            return bad("base bytes must be positive".to_string());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_sit_in_recommended_ranges() {
        let cfg = StoreConfig::default();
        assert!((0.02..=0.05).contains(&cfg.active_fraction));
        assert!((2..=5).contains(&cfg.pipeline_cap));
        assert!((8..=16).contains(&cfg.growth_factor));
        assert_eq!(cfg.block_size, 4096);
        cfg.validate().unwrap();
        StoreConfig::eager().validate().unwrap();
    }

    #[test]
    fn threshold_for_one_mebibyte() {
        let cfg = StoreConfig::default();
        assert!((cfg.active_threshold() - 20971.52).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range_values() {
        for cfg in [
            StoreConfig { growth_factor: 1, ..Default::default() },
            StoreConfig { growth_factor: 65, ..Default::default() },
            StoreConfig { active_fraction: 1.0, ..Default::default() },
            StoreConfig { active_fraction: 0.0, ..Default::default() },
            StoreConfig { adaptive_threshold: 1.0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn enum_names_round_trip() {
        for p in [Policy::Basic, Policy::Eager, Policy::Adaptive] {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
        assert_eq!("three-level".parse::<IndexKind>().unwrap(), IndexKind::ThreeLevel);
        assert_eq!("three_level".parse::<IndexKind>().unwrap(), IndexKind::ThreeLevel);
        assert!("fancy".parse::<CompactionMode>().is_err());
    }
}
