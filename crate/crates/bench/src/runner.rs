//! Drives a store through an operation stream and collects metrics.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steplsm::{EntryRecord, Oracle, Store, StoreConfig};

use crate::report::{MetricsReport, Percentiles};
use crate::workload::{generate, key_for, Op, WorkloadSpec};
use crate::BenchError;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Check every read against the reference model.
    pub verify: bool,
    /// Threads issuing random gets while the stream runs.
    pub readers: usize,
    /// Store directory; must be empty or absent. A temporary directory is
    /// used when unset.
    pub dir: Option<PathBuf>,
    pub label: Option<String>,
}

/// Opens a fresh store and runs `spec` against it.
pub fn run(cfg: &StoreConfig, spec: &WorkloadSpec, opts: &RunOptions) -> Result<MetricsReport, BenchError> {
    spec.validate()?;
    let _tmp;
    let dir = match &opts.dir {
        Some(d) => {
            if d.exists() && std::fs::read_dir(d)?.next().is_some() {
                return Err(BenchError::InvalidSpec(format!(
                    "store directory {} is not empty",
                    d.display()
                )));
            }
            d.clone()
        }
        None => {
            let t = tempfile::tempdir()?;
            let p = t.path().to_path_buf();
            _tmp = t;
            p
        }
    };
    let store = Store::open(&dir, cfg.clone())?;
    let report = run_on(&store, spec, opts)?;
    store.close()?;
    Ok(report)
}

#[derive(Default)]
struct Samples {
    put: Vec<u64>,
    get: Vec<u64>,
    delete: Vec<u64>,
    scan: Vec<u64>,
}

/// Runs `spec` against an already open, empty store. The store is left
/// open for inspection.
pub fn run_on(store: &Store, spec: &WorkloadSpec, opts: &RunOptions) -> Result<MetricsReport, BenchError> {
    let stream = generate(spec)?;
    let cfg = store.config().clone();
    let done = AtomicBool::new(false);

    let (writer, readers) = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..opts.readers)
            .map(|t| {
                let done = &done;
                scope.spawn(move || reader_loop(store, spec, t as u64, done))
            })
            .collect();
        let writer = drive(store, stream, opts.verify);
        done.store(true, Ordering::Release);
        let mut reader_samples = Vec::new();
        for h in handles {
            reader_samples.extend(h.join().expect("reader thread panicked"));
        }
        (writer, reader_samples)
    });
    let (samples, elapsed, maxima) = writer?;

    let stats = store.stats();
    let wa = stats.write_amp;
    let ops = spec.op_count;
    let records_ingested = (samples.put.len() + samples.delete.len()) as u64;
    let put = Percentiles::from_nanos(samples.put);
    let get = Percentiles::from_nanos(samples.get);
    let delete = Percentiles::from_nanos(samples.delete);
    let scan = Percentiles::from_nanos(samples.scan);
    let reader = Percentiles::from_nanos(readers);
    let secs = elapsed.max(1e-9);

    Ok(MetricsReport {
        label: opts.label.clone().unwrap_or_else(|| default_label(&cfg)),
        mode: cfg.compaction_mode.to_string(),
        index: cfg.index_kind.to_string(),
        policy: cfg.policy.to_string(),
        active_fraction: cfg.active_fraction,
        pipeline_cap: cfg.pipeline_cap as u64,
        growth_factor: cfg.growth_factor as u64,
        memstore_budget: cfg.memstore_budget as u64,
        distribution: spec.distribution.name().to_string(),
        theta: spec.distribution.theta(),
        op_count: ops,
        key_space_size: spec.key_space_size,
        value_size_bytes: spec.value_size_bytes as u64,
        read_fraction: spec.read_fraction,
        delete_fraction: spec.delete_fraction,
        scan_fraction: spec.scan_fraction,
        seed: spec.seed,
        readers: opts.readers as u64,
        verified: opts.verify,
        elapsed_secs: elapsed,
        ops_per_sec: if ops == 0 { 0.0 } else { ops as f64 / secs },
        puts: put.count,
        deletes: delete.count,
        gets: get.count,
        scans: scan.count,
        put_p50_us: put.p50,
        put_p95_us: put.p95,
        put_p99_us: put.p99,
        put_p999_us: put.p999,
        get_p50_us: get.p50,
        get_p95_us: get.p95,
        get_p99_us: get.p99,
        get_p999_us: get.p999,
        delete_p50_us: delete.p50,
        delete_p95_us: delete.p95,
        delete_p99_us: delete.p99,
        delete_p999_us: delete.p999,
        scan_p50_us: scan.p50,
        scan_p95_us: scan.p95,
        scan_p99_us: scan.p99,
        scan_p999_us: scan.p999,
        reader_gets: reader.count,
        reader_get_p50_us: reader.p50,
        reader_get_p95_us: reader.p95,
        reader_get_p99_us: reader.p99,
        reader_get_p999_us: reader.p999,
        records_ingested,
        bytes_ingested: wa.bytes_ingested,
        bytes_written_chunks: wa.chunk_bytes(),
        bytes_written_flush: wa.flush_bytes,
        bytes_written_compaction: wa.compaction_bytes,
        bytes_written_wal: wa.wal_bytes,
        write_amp: wa.write_amp(),
        chunk_write_amp: wa.chunk_write_amp(),
        flush_count: stats.flushes,
        seal_count: stats.mem.seals,
        merge_count: stats.mem.merges,
        merge_input_records: stats.mem.merge_input_records,
        merge_output_records: stats.mem.merge_output_records,
        handoff_count: stats.mem.handoffs,
        merge_work: if records_ingested == 0 {
            0.0
        } else {
            stats.mem.merge_input_records as f64 / records_ingested as f64
        },
        compaction_count: stats.compactions.stepped + stats.compactions.leveled + stats.compactions.full,
        max_pipeline_len: maxima.0 as u64,
        max_sublevels: maxima.1 as u64,
        final_level_runs: stats
            .levels
            .iter()
            .map(|l| l.runs.to_string())
            .collect::<Vec<_>>()
            .join("-"),
        run_probes: stats.reads.run_probes,
        block_reads: stats.reads.block_reads,
    })
}

fn default_label(cfg: &StoreConfig) -> String {
    format!(
        "{}/{}/{}/A={}/S={}/r={}",
        cfg.compaction_mode,
        cfg.index_kind,
        cfg.policy,
        cfg.active_fraction,
        cfg.pipeline_cap,
        cfg.growth_factor
    )
}

type DriveResult = Result<(Samples, f64, (usize, usize)), BenchError>;

fn drive(store: &Store, stream: crate::workload::OpStream, verify: bool) -> DriveResult {
    let mut oracle = Oracle::new();
    let mut samples = Samples::default();
    let mut max_pipeline = 0usize;
    let mut max_sublevels = 0usize;
    let started = Instant::now();
    for (idx, op) in stream.enumerate() {
        let idx = idx as u64;
        match op {
            Op::Put { key, value } => {
                let copy = verify.then(|| (key.clone(), value.clone()));
                let t = Instant::now();
                let seqno = store.put(key, value)?;
                samples.put.push(t.elapsed().as_nanos() as u64);
                if let Some((key, value)) = copy {
                    oracle.apply(&EntryRecord::put(key, value, seqno))?;
                }
            }
            Op::Delete { key } => {
                let t = Instant::now();
                let seqno = store.delete(key.clone())?;
                samples.delete.push(t.elapsed().as_nanos() as u64);
                if verify {
                    oracle.apply(&EntryRecord::tombstone(key, seqno))?;
                }
            }
            Op::Get { key } => {
                let t = Instant::now();
                let got = store.get(&key)?;
                samples.get.push(t.elapsed().as_nanos() as u64);
                if verify {
                    let want = oracle.expected_get(&key);
                    if got.as_deref() != want {
                        return Err(BenchError::Mismatch {
                            op_index: idx,
                            detail: format!(
                                "get {key}: store returned {}, model expects {}",
                                describe(got.as_deref()),
                                describe(want)
                            ),
                        });
                    }
                }
            }
            Op::Scan { prefix } => {
                let t = Instant::now();
                let got = store.scan(&prefix)?;
                samples.scan.push(t.elapsed().as_nanos() as u64);
                if verify {
                    let want = oracle.expected_scan(&prefix);
                    if got != want {
                        let first_diff = got
                            .iter()
                            .zip(&want)
                            .position(|(a, b)| a != b)
                            .unwrap_or(got.len().min(want.len()));
                        return Err(BenchError::Mismatch {
                            op_index: idx,
                            detail: format!(
                                "scan {}: store returned {} entries, model {}; first difference at {}",
                                String::from_utf8_lossy(&prefix),
                                got.len(),
                                want.len(),
                                first_diff
                            ),
                        });
                    }
                }
            }
        }
        max_pipeline = max_pipeline.max(store.pipeline_len());
        let runs = store.level_set().run_counts();
        max_sublevels = max_sublevels.max(runs.into_iter().max().unwrap_or(0));
    }
    Ok((samples, started.elapsed().as_secs_f64(), (max_pipeline, max_sublevels)))
}

fn describe(v: Option<&[u8]>) -> String {
    match v {
        Some(v) => format!("{} bytes", v.len()),
        None => "absent".into(),
    }
}

fn reader_loop(store: &Store, spec: &WorkloadSpec, thread: u64, done: &AtomicBool) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (0x5eed_0000 + thread));
    let mut samples = Vec::new();
    while !done.load(Ordering::Acquire) {
        let key = key_for(rng.random_range(0..spec.key_space_size), spec.prefix_count);
        let t = Instant::now();
        if store.get(&key).is_err() {
            break;
        }
        samples.push(t.elapsed().as_nanos() as u64);
    }
    samples
}

/// Runs each configuration on the identical stream.
pub fn sweep(
    configs: &[(String, StoreConfig)],
    spec: &WorkloadSpec,
    opts: &RunOptions,
) -> Result<Vec<MetricsReport>, BenchError> {
    if configs.len() < 2 {
        return Err(BenchError::InvalidSpec("a sweep needs at least two configurations".into()));
    }
    configs
        .iter()
        .map(|(label, cfg)| {
            let opts = RunOptions {
                label: Some(label.clone()),
                dir: None,
                ..opts.clone()
            };
            run(cfg, spec, &opts)
        })
        .collect()
}

/// The policy presets: Basic and Adaptive with `A = 0.02, S = 5`, Eager with
/// `A = 0.25, S = 2`, on top of `base`'s persistent-level settings.
pub fn policy_presets(base: &StoreConfig) -> Vec<(String, StoreConfig)> {
    [StoreConfig::basic(), StoreConfig::eager(), StoreConfig::adaptive()]
        .into_iter()
        .map(|preset| {
            let cfg = StoreConfig {
                policy: preset.policy,
                active_fraction: preset.active_fraction,
                pipeline_cap: preset.pipeline_cap,
                ..base.clone()
            };
            (cfg.policy.to_string(), cfg)
        })
        .collect()
}

/// Every policy preset on every distribution: one row per pair.
pub fn policy_table(
    base: &StoreConfig,
    distributions: &[crate::workload::Distribution],
    spec: &WorkloadSpec,
    opts: &RunOptions,
) -> Result<Vec<MetricsReport>, BenchError> {
    let mut rows = Vec::new();
    for dist in distributions {
        let spec = WorkloadSpec {
            distribution: *dist,
            ..spec.clone()
        };
        for (name, cfg) in policy_presets(base) {
            let opts = RunOptions {
                label: Some(format!("{name}/{}", dist.name())),
                dir: None,
                ..opts.clone()
            };
            rows.push(run(&cfg, &spec, &opts)?);
        }
    }
    Ok(rows)
}
