//! Deterministic operation streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Zipf};
use serde::{Deserialize, Serialize};
use steplsm::StoreKey;

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Distribution {
    Uniform,
    /// Rank `k` (1-based) is drawn with probability proportional to
    /// `1 / k^theta`; rank `k` maps to key id `k - 1`.
    Zipfian { theta: f64 },
}

impl Distribution {
    pub fn zipfian() -> Self {
        Distribution::Zipfian { theta: 0.99 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::Zipfian { .. } => "zipfian",
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match self {
            Distribution::Uniform => None,
            Distribution::Zipfian { theta } => Some(*theta),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub distribution: Distribution,
    pub op_count: u64,
    pub key_space_size: u64,
    pub value_size_bytes: usize,
    pub read_fraction: f64,
    pub delete_fraction: f64,
    pub scan_fraction: f64,
    /// Keys are spread over this many prefixes by `id % prefix_count`.
    pub prefix_count: u64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            distribution: Distribution::Uniform,
            op_count: 100_000,
            key_space_size: 100_000,
            value_size_bytes: 100,
            read_fraction: 0.0,
            delete_fraction: 0.0,
            scan_fraction: 0.0,
            prefix_count: 16,
            seed: 0,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        for (name, f) in [
            ("read fraction", self.read_fraction),
            ("delete fraction", self.delete_fraction),
            ("scan fraction", self.scan_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} {f} not in [0, 1]"));
            }
        }
        if self.read_fraction + self.delete_fraction + self.scan_fraction > 1.0 + 1e-9 {
            return bad("operation fractions sum past 1".into());
        }
        if self.key_space_size == 0 {
            return bad("key space is empty".into());
        }
        if self.prefix_count == 0 {
            return bad("prefix count is zero".into());
        }
        if let Distribution::Zipfian { theta } = self.distribution {
            if !(theta > 0.0 && theta.is_finite()) {
                return bad(format!("zipf theta {theta} must be positive"));
            }
        }
        Ok(())
    }
}

/// The key with numeric id `id`.
pub fn key_for(id: u64, prefix_count: u64) -> StoreKey {
    StoreKey::new(
        format!("user{:02}", id % prefix_count),
        format!("{id:012}"),
    )
    .expect("generated keys are within limits")
}

pub fn prefix_for(id: u64, prefix_count: u64) -> Vec<u8> {
    format!("user{:02}", id % prefix_count).into_bytes()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Put { key: StoreKey, value: Vec<u8> },
    Delete { key: StoreKey },
    Get { key: StoreKey },
    Scan { prefix: Vec<u8> },
}

#[derive(Clone, Debug)]
enum KeySampler {
    Uniform(u64),
    Zipf(Zipf<f64>, u64),
}

impl KeySampler {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match self {
            KeySampler::Uniform(n) => rng.random_range(0..*n),
            KeySampler::Zipf(z, n) => (z.sample(rng) as u64).clamp(1, *n) - 1,
        }
    }
}

/// The operation stream of a spec. Same spec, same stream.
#[derive(Clone, Debug)]
pub struct OpStream {
    spec: WorkloadSpec,
    rng: ChaCha8Rng,
    keys: KeySampler,
    emitted: u64,
}

pub fn generate(spec: &WorkloadSpec) -> Result<OpStream, BenchError> {
    spec.validate()?;
    let keys = match spec.distribution {
        Distribution::Uniform => KeySampler::Uniform(spec.key_space_size),
        Distribution::Zipfian { theta } => KeySampler::Zipf(
            Zipf::new(spec.key_space_size as f64, theta)
                .map_err(|e| BenchError::InvalidSpec(e.to_string()))?,
            spec.key_space_size,
        ),
    };
    Ok(OpStream {
        spec: spec.clone(),
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        keys,
        emitted: 0,
    })
}

impl OpStream {
    /// Draws one key id from the stream's distribution.
    pub fn sample_id(&mut self) -> u64 {
        self.keys.sample(&mut self.rng)
    }
}

impl Iterator for OpStream {
    type Item = Op;

    fn next(&mut self) -> Option<Op> {
        if self.emitted == self.spec.op_count {
            return None;
        }
        self.emitted += 1;
        let s = &self.spec;
        let u: f64 = self.rng.random();
        let id = self.keys.sample(&mut self.rng);
        let n = s.prefix_count;
        Some(if u < s.read_fraction {
            Op::Get { key: key_for(id, n) }
        } else if u < s.read_fraction + s.scan_fraction {
            Op::Scan { prefix: prefix_for(id, n) }
        } else if u < s.read_fraction + s.scan_fraction + s.delete_fraction {
            Op::Delete { key: key_for(id, n) }
        } else {
            let mut value = vec![0u8; s.value_size_bytes];
            self.rng.fill_bytes(&mut value);
            Op::Put { key: key_for(id, n), value }
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.spec.op_count - self.emitted) as usize;
        (left, Some(left))
    }
}
