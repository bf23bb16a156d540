use std::collections::BTreeMap;

use serde_json::Value;
use steplsm::{Store, StoreConfig, WalSync};
use steplsm_bench::report::{read_csv, write_csv, write_json};
use steplsm_bench::{
    key_for, policy_table, run, run_on, sweep, BenchError, Distribution, MetricsReport,
    RunOptions, WorkloadSpec,
};

fn small_config() -> StoreConfig {
    StoreConfig {
        memstore_budget: 64 << 10,
        growth_factor: 4,
        block_size: 1024,
        chunk_target_bytes: 32 << 10,
        wal_sync: WalSync::IntervalMs(1000),
        ..StoreConfig::default()
    }
}

fn small_spec() -> WorkloadSpec {
    WorkloadSpec {
        op_count: 20_000,
        key_space_size: 3000,
        read_fraction: 0.2,
        delete_fraction: 0.05,
        scan_fraction: 0.005,
        distribution: Distribution::zipfian(),
        seed: 9,
        ..WorkloadSpec::default()
    }
}

#[test]
fn zero_ops_report_is_empty() {
    let spec = WorkloadSpec {
        op_count: 0,
        ..WorkloadSpec::default()
    };
    let r = run(&small_config(), &spec, &RunOptions::default()).unwrap();
    assert_eq!(r.ops_per_sec, 0.0);
    assert_eq!(r.write_amp, 0.0);
    assert_eq!(r.chunk_write_amp, 0.0);
    assert_eq!(r.puts + r.gets + r.deletes + r.scans, 0);
    assert_eq!(r.bytes_written_chunks, 0);
    assert!(r.latencies().iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn verified_run_succeeds_with_readers() {
    let opts = RunOptions {
        verify: true,
        readers: 2,
        ..RunOptions::default()
    };
    let r = run(&small_config(), &small_spec(), &opts).unwrap();
    assert!(r.verified);
    assert_eq!(r.puts + r.gets + r.deletes + r.scans, 20_000);
    assert!(r.flush_count > 0);
    assert!(r.reader_gets > 0);
    assert!(r.percentiles_monotone());
    assert!(r.write_amp >= r.chunk_write_amp);
}

#[test]
fn verification_catches_injected_fault() {
    // A record the reference model never saw: the first get of it must fail.
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path(), small_config()).unwrap();
    store.put(key_for(0, 16), b"stray".to_vec()).unwrap();
    let spec = WorkloadSpec {
        op_count: 100,
        key_space_size: 1,
        read_fraction: 1.0,
        ..WorkloadSpec::default()
    };
    let opts = RunOptions {
        verify: true,
        ..RunOptions::default()
    };
    match run_on(&store, &spec, &opts) {
        Err(BenchError::Mismatch { op_index, .. }) => assert_eq!(op_index, 0),
        other => panic!("expected a mismatch, got {other:?}"),
    }
}

#[test]
fn identical_runs_have_identical_counters() {
    let a = run(&small_config(), &small_spec(), &RunOptions::default()).unwrap();
    let b = run(&small_config(), &small_spec(), &RunOptions::default()).unwrap();
    assert_eq!(a.counters_only(), b.counters_only());
}

#[test]
fn sweep_needs_two_configs() {
    let one = vec![("only".to_string(), small_config())];
    assert!(matches!(
        sweep(&one, &small_spec(), &RunOptions::default()),
        Err(BenchError::InvalidSpec(_))
    ));
}

#[test]
fn policy_table_has_one_row_per_pair() {
    let spec = WorkloadSpec {
        op_count: 5000,
        ..small_spec()
    };
    let rows = policy_table(
        &small_config(),
        &[Distribution::zipfian(), Distribution::Uniform],
        &spec,
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(rows.len(), 6);
    let labels: Vec<_> = rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(
        labels,
        [
            "basic/zipfian",
            "eager/zipfian",
            "adaptive/zipfian",
            "basic/uniform",
            "eager/uniform",
            "adaptive/uniform"
        ]
    );
    assert_eq!(rows[1].pipeline_cap, 2);
    assert_eq!(rows[3].distribution, "uniform");
    assert!(rows[3].theta.is_none());
}

fn sample_reports() -> Vec<MetricsReport> {
    static REPORTS: std::sync::OnceLock<Vec<MetricsReport>> = std::sync::OnceLock::new();
    REPORTS.get_or_init(build_sample_reports).clone()
}

fn build_sample_reports() -> Vec<MetricsReport> {
    let spec = WorkloadSpec {
        op_count: 3000,
        ..small_spec()
    };
    let cfgs = vec![
        ("a".to_string(), small_config()),
        (
            "b".to_string(),
            StoreConfig {
                compaction_mode: steplsm::CompactionMode::Leveled,
                ..small_config()
            },
        ),
    ];
    let mut rows = sweep(&cfgs, &spec, &RunOptions::default()).unwrap();
    rows[1].theta = None;
    rows
}

#[test]
fn json_matches_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schema/metrics-report.schema.json")).unwrap();
    let props = schema["properties"].as_object().unwrap();
    let required: Vec<&str> = schema["required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();

    let mut out = Vec::new();
    write_json(&sample_reports(), &mut out).unwrap();
    let doc: Value = serde_json::from_slice(&out).unwrap();
    for report in doc.as_array().unwrap() {
        let obj = report.as_object().unwrap();
        for name in &required {
            assert!(obj.contains_key(*name), "missing {name}");
        }
        for (name, value) in obj {
            let spec = props.get(name).unwrap_or_else(|| panic!("unexpected field {name}"));
            let types: Vec<&str> = match &spec["type"] {
                Value::String(s) => vec![s.as_str()],
                Value::Array(a) => a.iter().map(|t| t.as_str().unwrap()).collect(),
                _ => unreachable!(),
            };
            let ok = types.iter().any(|t| match *t {
                "string" => value.is_string(),
                "boolean" => value.is_boolean(),
                "integer" => value.is_u64(),
                "number" => value.is_number(),
                "null" => value.is_null(),
                _ => false,
            });
            assert!(ok, "{name} = {value} is not {types:?}");
        }
    }

    // A single report is written as an object.
    let mut one = Vec::new();
    write_json(&sample_reports()[..1], &mut one).unwrap();
    assert!(serde_json::from_slice::<Value>(&one).unwrap().is_object());
}

#[test]
fn csv_and_json_carry_the_same_values() {
    let reports = sample_reports();
    let mut csv_out = Vec::new();
    write_csv(&reports, &mut csv_out).unwrap();
    let text = String::from_utf8(csv_out.clone()).unwrap();
    let widths: Vec<usize> = text.lines().map(|l| l.split(',').count()).collect();
    assert_eq!(widths.len(), 3);
    assert!(widths.iter().all(|&w| w == widths[0]));
    let back = read_csv(csv_out.as_slice()).unwrap();
    assert_eq!(back, reports);

    let mut json_out = Vec::new();
    write_json(&reports, &mut json_out).unwrap();
    let from_json: Vec<MetricsReport> = serde_json::from_slice(&json_out).unwrap();
    assert_eq!(from_json, reports);

    // Column order follows field order.
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let obj: BTreeMap<String, Value> =
        serde_json::from_value(serde_json::to_value(&reports[0]).unwrap()).unwrap();
    assert_eq!(header.len(), obj.len());
}

proptest::proptest! {
    #[test]
    fn reports_round_trip_any_floats(
        x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
        n in proptest::prelude::any::<u64>(),
        theta in proptest::option::of(0.01f64..5.0),
    ) {
        let mut r = sample_reports().remove(0);
        r.elapsed_secs = x;
        r.write_amp = x;
        r.put_p999_us = x;
        r.bytes_written_wal = n;
        r.theta = theta;
        let mut out = Vec::new();
        write_csv(std::slice::from_ref(&r), &mut out).unwrap();
        let back = read_csv(out.as_slice()).unwrap();
        proptest::prop_assert_eq!(&back[0], &r, "{}", String::from_utf8_lossy(&out));
        let mut out = Vec::new();
        write_json(std::slice::from_ref(&r), &mut out).unwrap();
        let back: MetricsReport = serde_json::from_slice(&out).unwrap();
        proptest::prop_assert_eq!(back, r);
    }
}
