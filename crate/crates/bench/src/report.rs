//! Metrics report and its CSV / JSON emission.
//!
//! The JSON layout is described by `schema/metrics-report.schema.json`;
//! CSV uses the same field names as columns, in declaration order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Latency percentiles in microseconds, nearest-rank.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Percentiles {
    pub count: u64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub p999: f64,
}

impl Percentiles {
    pub fn from_nanos(mut samples: Vec<u64>) -> Self {
        if samples.is_empty() {
            return Percentiles::default();
        }
        samples.sort_unstable();
        let at = |q: f64| {
            let rank = (q * samples.len() as f64).ceil() as usize;
            samples[rank.clamp(1, samples.len()) - 1] as f64 / 1000.0
        };
        Percentiles {
            count: samples.len() as u64,
            p50: at(0.50),
            p95: at(0.95),
            p99: at(0.99),
            p999: at(0.999),
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.p50 <= self.p95 && self.p95 <= self.p99 && self.p99 <= self.p999
    }
}

/// One run's results. Flat so that it maps onto one CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub label: String,
    pub mode: String,
    pub index: String,
    pub policy: String,
    pub active_fraction: f64,
    pub pipeline_cap: u64,
    pub growth_factor: u64,
    pub memstore_budget: u64,
    pub distribution: String,
    pub theta: Option<f64>,
    pub op_count: u64,
    pub key_space_size: u64,
    pub value_size_bytes: u64,
    pub read_fraction: f64,
    pub delete_fraction: f64,
    pub scan_fraction: f64,
    pub seed: u64,
    pub readers: u64,
    pub verified: bool,

    /// Wall-clock figures are indicative only.
    pub elapsed_secs: f64,
    pub ops_per_sec: f64,

    pub puts: u64,
    pub deletes: u64,
    pub gets: u64,
    pub scans: u64,
    pub put_p50_us: f64,
    pub put_p95_us: f64,
    pub put_p99_us: f64,
    pub put_p999_us: f64,
    pub get_p50_us: f64,
    pub get_p95_us: f64,
    pub get_p99_us: f64,
    pub get_p999_us: f64,
    pub delete_p50_us: f64,
    pub delete_p95_us: f64,
    pub delete_p99_us: f64,
    pub delete_p999_us: f64,
    pub scan_p50_us: f64,
    pub scan_p95_us: f64,
    pub scan_p99_us: f64,
    pub scan_p999_us: f64,
    pub reader_gets: u64,
    pub reader_get_p50_us: f64,
    pub reader_get_p95_us: f64,
    pub reader_get_p99_us: f64,
    pub reader_get_p999_us: f64,

    pub records_ingested: u64,
    pub bytes_ingested: u64,
    pub bytes_written_chunks: u64,
    pub bytes_written_flush: u64,
    pub bytes_written_compaction: u64,
    pub bytes_written_wal: u64,
    pub write_amp: f64,
    pub chunk_write_amp: f64,
    pub flush_count: u64,
    pub seal_count: u64,
    pub merge_count: u64,
    pub merge_input_records: u64,
    pub merge_output_records: u64,
    pub handoff_count: u64,
    /// Records fed to in-memory merges per ingested record.
    pub merge_work: f64,
    pub compaction_count: u64,
    pub max_pipeline_len: u64,
    pub max_sublevels: u64,
    /// Run count per level at the end, shallow to deep, `-` separated.
    pub final_level_runs: String,
    pub run_probes: u64,
    pub block_reads: u64,
}

impl MetricsReport {
    pub fn latencies(&self) -> [[f64; 4]; 5] {
        [
            [self.put_p50_us, self.put_p95_us, self.put_p99_us, self.put_p999_us],
            [self.get_p50_us, self.get_p95_us, self.get_p99_us, self.get_p999_us],
            [self.delete_p50_us, self.delete_p95_us, self.delete_p99_us, self.delete_p999_us],
            [self.scan_p50_us, self.scan_p95_us, self.scan_p99_us, self.scan_p999_us],
            [
                self.reader_get_p50_us,
                self.reader_get_p95_us,
                self.reader_get_p99_us,
                self.reader_get_p999_us,
            ],
        ]
    }

    pub fn percentiles_monotone(&self) -> bool {
        self.latencies()
            .iter()
            .all(|p| p[0] <= p[1] && p[1] <= p[2] && p[2] <= p[3])
    }

    /// The report with wall-clock fields zeroed, for determinism checks.
    pub fn counters_only(&self) -> MetricsReport {
        let mut r = self.clone();
        r.elapsed_secs = 0.0;
        r.ops_per_sec = 0.0;
        for p in [
            &mut r.put_p50_us, &mut r.put_p95_us, &mut r.put_p99_us, &mut r.put_p999_us,
            &mut r.get_p50_us, &mut r.get_p95_us, &mut r.get_p99_us, &mut r.get_p999_us,
            &mut r.delete_p50_us, &mut r.delete_p95_us, &mut r.delete_p99_us, &mut r.delete_p999_us,
            &mut r.scan_p50_us, &mut r.scan_p95_us, &mut r.scan_p99_us, &mut r.scan_p999_us,
            &mut r.reader_get_p50_us, &mut r.reader_get_p95_us, &mut r.reader_get_p99_us,
            &mut r.reader_get_p999_us,
        ] {
            *p = 0.0;
        }
        r.reader_gets = 0;
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

pub fn write_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricsReport>, BenchError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(BenchError::from))
        .collect()
}

/// A single report is written as an object, several as an array.
pub fn write_json<W: Write>(reports: &[MetricsReport], mut out: W) -> Result<(), BenchError> {
    match reports {
        [one] => serde_json::to_writer_pretty(&mut out, one)?,
        many => serde_json::to_writer_pretty(&mut out, many)?,
    }
    writeln!(out)?;
    Ok(())
}

pub fn emit(reports: &[MetricsReport], format: Format, path: Option<&Path>) -> Result<(), BenchError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match format {
        Format::Csv => write_csv(reports, sink),
        Format::Json => write_json(reports, sink),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let p = Percentiles::from_nanos((1..=1000).map(|i| i * 1000).collect());
        assert_eq!((p.p50, p.p95, p.p99, p.p999), (500.0, 950.0, 990.0, 999.0));
        assert_eq!(p.count, 1000);
        assert_eq!(Percentiles::from_nanos(vec![]), Percentiles::default());
        let one = Percentiles::from_nanos(vec![7000]);
        assert_eq!((one.p50, one.p999), (7.0, 7.0));
    }
}
