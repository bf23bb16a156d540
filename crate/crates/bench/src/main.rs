use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use steplsm::{CompactionMode, IndexKind, Policy, StoreConfig, WalSync};
use steplsm_bench::{
    emit, policy_table, run, BenchError, Distribution, Format, RunOptions, WorkloadSpec,
};

#[derive(Parser)]
#[command(name = "bench", about = "Benchmark and verify the steplsm store")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration on one workload.
    Run(RunArgs),
    /// Run every policy preset on every requested distribution.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dist {
    Uniform,
    Zipfian,
}

#[derive(Args)]
struct LevelArgs {
    #[arg(long, default_value = "stepped")]
    mode: CompactionMode,
    #[arg(long, default_value = "three-level")]
    index: IndexKind,
    /// Growth factor and stepped fan-in.
    #[arg(long = "r", default_value_t = 8)]
    r: usize,
    /// In-memory budget in bytes.
    #[arg(long, default_value_t = 1 << 20)]
    memstore_bytes: usize,
    #[arg(long, default_value_t = 4096)]
    block_size: usize,
    /// Log fsync interval in milliseconds; 0 syncs every write.
    #[arg(long, default_value_t = 100)]
    sync_ms: u64,
}

#[derive(Args)]
struct WorkloadArgs {
    #[arg(long, default_value_t = 0.99)]
    theta: f64,
    #[arg(long, default_value_t = 100_000)]
    ops: u64,
    #[arg(long, default_value_t = 100_000)]
    keys: u64,
    #[arg(long, default_value_t = 100)]
    value_bytes: usize,
    #[arg(long, default_value_t = 0.0)]
    read_frac: f64,
    #[arg(long, default_value_t = 0.0)]
    delete_frac: f64,
    #[arg(long, default_value_t = 0.0)]
    scan_frac: f64,
    #[arg(long, default_value_t = 16)]
    prefixes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OutputArgs {
    /// Check every read against the reference model.
    #[arg(long)]
    verify: bool,
    /// Concurrent reader threads.
    #[arg(long, default_value_t = 0)]
    readers: usize,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    levels: LevelArgs,
    #[arg(long, default_value = "basic")]
    policy: Policy,
    /// Active segment fraction; defaults to the policy preset.
    #[arg(long = "A")]
    active_fraction: Option<f64>,
    /// Pipeline cap; defaults to the policy preset.
    #[arg(long = "S")]
    pipeline_cap: Option<usize>,
    #[arg(long, value_enum, default_value = "uniform")]
    dist: Dist,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Store directory (must be empty); a temporary one when omitted.
    #[arg(long)]
    dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    levels: LevelArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "zipfian,uniform")]
    dists: Vec<Dist>,
    #[command(flatten)]
    workload: WorkloadArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn base_config(l: &LevelArgs) -> StoreConfig {
    StoreConfig {
        compaction_mode: l.mode,
        index_kind: l.index,
        growth_factor: l.r,
        memstore_budget: l.memstore_bytes,
        block_size: l.block_size,
        wal_sync: if l.sync_ms == 0 {
            WalSync::EveryWrite
        } else {
            WalSync::IntervalMs(l.sync_ms)
        },
        ..StoreConfig::default()
    }
}

fn distribution(d: Dist, theta: f64) -> Distribution {
    match d {
        Dist::Uniform => Distribution::Uniform,
        Dist::Zipfian => Distribution::Zipfian { theta },
    }
}

fn workload(w: &WorkloadArgs, dist: Distribution) -> WorkloadSpec {
    WorkloadSpec {
        distribution: dist,
        op_count: w.ops,
        key_space_size: w.keys,
        value_size_bytes: w.value_bytes,
        read_fraction: w.read_frac,
        delete_fraction: w.delete_frac,
        scan_fraction: w.scan_frac,
        prefix_count: w.prefixes,
        seed: w.seed,
    }
}

fn options(o: &OutputArgs) -> RunOptions {
    RunOptions {
        verify: o.verify,
        readers: o.readers,
        ..RunOptions::default()
    }
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.cmd {
        Cmd::Run(a) => {
            let preset = match a.policy {
                Policy::Basic => StoreConfig::basic(),
                Policy::Eager => StoreConfig::eager(),
                Policy::Adaptive => StoreConfig::adaptive(),
            };
            let cfg = StoreConfig {
                policy: a.policy,
                active_fraction: a.active_fraction.unwrap_or(preset.active_fraction),
                pipeline_cap: a.pipeline_cap.unwrap_or(preset.pipeline_cap),
                ..base_config(&a.levels)
            };
            let spec = workload(&a.workload, distribution(a.dist, a.workload.theta));
            let opts = RunOptions {
                dir: a.dir,
                ..options(&a.output)
            };
            let report = run(&cfg, &spec, &opts)?;
            emit(&[report], a.output.format, a.output.out.as_deref())
        }
        Cmd::Sweep(a) => {
            let dists: Vec<_> = a
                .dists
                .iter()
                .map(|d| distribution(*d, a.workload.theta))
                .collect();
            let spec = workload(&a.workload, Distribution::Uniform);
            let rows = policy_table(&base_config(&a.levels), &dists, &spec, &options(&a.output))?;
            emit(&rows, a.output.format, a.output.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ BenchError::Mismatch { .. }) => {
            eprintln!("bench: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("bench: {e}");
            ExitCode::FAILURE
        }
    }
}
