use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hybrid_sched::engine::{run_with, write_event_log, RunOptions};
use hybrid_sched::oracle::{cross_check, oracle_run, TinyInstance};
use hybrid_sched::sweep::{
    aggregate, read_reports_jsonl, run_sweep, write_aggregate_csv, write_cells_csv, write_reports_jsonl, Execution,
    SweepConfig,
};
use hybrid_sched::workload::{
    generate_workload, read_native, read_swf, synthesize_trace, write_native, write_swf, NoticeMix,
};
use hybrid_sched::{JobSpec, Mechanism, WorkloadConfig};
use log::{info, warn};

mod config;

use config::FileConfig;

/// Simulate co-scheduling of rigid, on-demand and malleable jobs on one cluster.
///
/// Every flag can also be set through an environment variable named
/// `HYBRID_SCHED_<FLAG>`, e.g. `HYBRID_SCHED_MECHANISM=CUA&SPAA`.
#[derive(Parser)]
#[command(name = "hybrid-sched", version)]
struct Cli {
    /// TOML config file; missing keys take their defaults.
    #[arg(long, global = true, env = "HYBRID_SCHED_CONFIG")]
    config: Option<PathBuf>,
    /// Override the cluster size from the config.
    #[arg(long, global = true, env = "HYBRID_SCHED_CAPACITY")]
    capacity: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic trace in SWF.
    SynthTrace {
        #[arg(long, env = "HYBRID_SCHED_OUT")]
        out: PathBuf,
        #[arg(long, env = "HYBRID_SCHED_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Turn an SWF trace into a typed workload in the native format.
    Generate {
        /// SWF input trace.
        #[arg(long, env = "HYBRID_SCHED_WORKLOAD")]
        workload: PathBuf,
        #[arg(long, env = "HYBRID_SCHED_OUT")]
        out: PathBuf,
        #[command(flatten)]
        mix: MixArgs,
    },
    /// Run one simulation and write its report.
    Simulate {
        /// Native workload, or an SWF trace (`.swf`) to generate from first.
        #[arg(long, env = "HYBRID_SCHED_WORKLOAD")]
        workload: PathBuf,
        #[arg(long, env = "HYBRID_SCHED_MECHANISM")]
        mechanism: Mechanism,
        /// Directory for report.json and report.csv.
        #[arg(long, env = "HYBRID_SCHED_OUT")]
        out: PathBuf,
        #[arg(long, env = "HYBRID_SCHED_CHECKPOINT_SCALE")]
        checkpoint_scale: Option<f64>,
        /// Write the structured event log here.
        #[arg(long, env = "HYBRID_SCHED_EVENT_LOG")]
        event_log: Option<PathBuf>,
        /// Write the per-mutation ledger audit here and check it.
        #[arg(long, env = "HYBRID_SCHED_LEDGER_AUDIT")]
        ledger_audit: Option<PathBuf>,
        #[command(flatten)]
        mix: MixArgs,
    },
    /// Run a mechanism x workload x seed x checkpoint-scale grid and aggregate it.
    Sweep(SweepArgs),
    /// Cross-check the engine against the brute-force oracle on tiny instances.
    #[command(hide = true)]
    OracleCheck {
        #[arg(long, default_value_t = 0, env = "HYBRID_SCHED_SEED")]
        seed: u64,
        #[arg(long, default_value_t = 100, env = "HYBRID_SCHED_SEEDS")]
        seeds: u64,
        /// Only this mechanism; all seven by default.
        #[arg(long, env = "HYBRID_SCHED_MECHANISM")]
        mechanism: Option<Mechanism>,
        /// Also write each instance and its oracle output as JSON fixtures here.
        #[arg(long, env = "HYBRID_SCHED_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MixArgs {
    /// Notice-mix preset, W1 to W5.
    #[arg(long, env = "HYBRID_SCHED_NOTICE_MIX")]
    notice_mix: Option<String>,
    /// Seed for job-type and notice assignment.
    #[arg(long, env = "HYBRID_SCHED_SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Output directory for cells.csv, aggregate.csv and reports.jsonl.
    #[arg(long, env = "HYBRID_SCHED_OUT")]
    out: PathBuf,
    /// Comma-separated mechanisms.
    #[arg(long, value_delimiter = ',', env = "HYBRID_SCHED_MECHANISM")]
    mechanism: Vec<Mechanism>,
    /// Comma-separated notice-mix presets.
    #[arg(long, value_delimiter = ',', env = "HYBRID_SCHED_NOTICE_MIX")]
    notice_mix: Vec<String>,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, env = "HYBRID_SCHED_SEEDS")]
    seeds: Option<u64>,
    #[arg(long, default_value_t = 0, env = "HYBRID_SCHED_SEED")]
    seed: u64,
    /// Comma-separated checkpoint interval multipliers.
    #[arg(long, value_delimiter = ',', env = "HYBRID_SCHED_CHECKPOINT_SCALE")]
    checkpoint_scale: Vec<f64>,
    /// SWF trace to use for every seed instead of synthetic traces.
    #[arg(long, env = "HYBRID_SCHED_WORKLOAD")]
    workload: Option<PathBuf>,
    /// Run cells one at a time.
    #[arg(long)]
    sequential: bool,
    /// Re-aggregate a stored reports.jsonl instead of simulating.
    #[arg(long, conflicts_with_all = ["mechanism", "notice_mix", "seeds", "checkpoint_scale", "workload"])]
    from_reports: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn workload_config(cfg: &FileConfig, mix: &MixArgs) -> Result<WorkloadConfig> {
    let mut w = cfg.workload.clone();
    if let Some(name) = &mix.notice_mix {
        w.notice_mix = NoticeMix::preset(name).with_context(|| {
            format!("unknown notice mix {name:?}, expected one of {}", NoticeMix::PRESETS.join(", "))
        })?;
    }
    if let Some(seed) = mix.seed {
        w.rng_seed = seed;
    }
    Ok(w)
}

fn generate(cfg: &FileConfig, swf: &Path, mix: &MixArgs) -> Result<Vec<JobSpec>> {
    let trace = read_swf(swf)?;
    if trace.stats.warnings() > 0 {
        warn!("{}: {:?}", swf.display(), trace.stats);
    }
    let (specs, summary) = generate_workload(&trace.jobs, &workload_config(cfg, mix)?)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(specs)
}

fn is_swf(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("swf"))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cfg: &FileConfig,
    workload: &Path,
    mechanism: Mechanism,
    out: &Path,
    checkpoint_scale: Option<f64>,
    event_log: Option<&Path>,
    ledger_audit: Option<&Path>,
    mix: &MixArgs,
) -> Result<bool> {
    let specs = if is_swf(workload) { generate(cfg, workload, mix)? } else { read_native(workload)? };
    let mut system = cfg.system.clone();
    if let Some(s) = checkpoint_scale {
        system.checkpoint_scale = s;
    }
    let opts = RunOptions { ledger_audit: ledger_audit.is_some(), ..RunOptions::default() };
    let result = run_with(&specs, mechanism, &system, &opts)?;
    let report = &result.report;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut json = create(&out.join("report.json"))?;
    writeln!(json, "{}", report.to_json())?;
    json.flush()?;
    report.write_csv(create(&out.join("report.csv"))?)?;
    if let Some(path) = event_log {
        let mut w = create(path)?;
        write_event_log(&mut w, mechanism.name(), system.capacity, &result.log)?;
        w.flush()?;
    }
    let mut ok = true;
    if let Some(path) = ledger_audit {
        let mut w = create(path)?;
        for a in &result.audit {
            writeln!(w, "{}", serde_json::to_string(a)?)?;
            if a.free + a.allocated + a.reserved_idle != system.capacity {
                warn!("ledger out of balance after {} of job {} at t={}", a.op, a.job, a.time);
                ok = false;
            }
        }
        w.flush()?;
    }
    println!("{mechanism} on {} jobs\n{}", specs.len(), report.summary());
    Ok(ok)
}

fn sweep(cfg: &FileConfig, args: &SweepArgs) -> Result<bool> {
    let results = match &args.from_reports {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_reports_jsonl(BufReader::new(file))?
        }
        None => {
            let s = &cfg.sweep;
            let sc = SweepConfig {
                system: cfg.system.clone(),
                workload: cfg.workload.clone(),
                trace: cfg.trace.clone(),
                trace_file: args.workload.clone().or_else(|| s.trace_file.clone()),
                mechanisms: if args.mechanism.is_empty() { s.mechanisms.clone() } else { args.mechanism.clone() },
                workloads: if args.notice_mix.is_empty() { s.workloads.clone() } else { args.notice_mix.clone() },
                seeds: match args.seeds {
                    Some(n) => (args.seed..args.seed + n).collect(),
                    None => s.seeds.clone(),
                },
                checkpoint_scales: if args.checkpoint_scale.is_empty() {
                    s.checkpoint_scales.clone()
                } else {
                    args.checkpoint_scale.clone()
                },
            };
            if sc.mechanisms.is_empty()
                || sc.workloads.is_empty()
                || sc.seeds.is_empty()
                || sc.checkpoint_scales.is_empty()
            {
                bail!("the sweep grid is empty");
            }
            let how = if args.sequential { Execution::Sequential } else { Execution::Parallel };
            let results = run_sweep(&sc, how)?;
            let mut w = create(&args.out.join("reports.jsonl"))?;
            write_reports_jsonl(&results, &mut w)?;
            w.flush()?;
            results
        }
    };
    write_cells_csv(&results, create(&args.out.join("cells.csv"))?)?;
    let rows = aggregate(&results);
    write_aggregate_csv(&rows, create(&args.out.join("aggregate.csv"))?)?;
    let failed = results.iter().filter(|r| r.report.is_err()).count();
    println!("{} cells, {} failed, {} aggregate rows in {}", results.len(), failed, rows.len(), args.out.display());
    Ok(failed == 0)
}

fn oracle_check(seed: u64, seeds: u64, mechanism: Option<Mechanism>, out: Option<&Path>) -> Result<bool> {
    let mechs: Vec<Mechanism> = match mechanism {
        Some(m) => vec![m],
        None => std::iter::once(Mechanism::Baseline).chain(Mechanism::SIX).collect(),
    };
    let mut mismatches = 0;
    for s in seed..seed + seeds {
        let inst = TinyInstance::random(s);
        for &m in &mechs {
            if let Some(diff) = cross_check(&inst, m)? {
                mismatches += 1;
                println!("seed {s} {m}: {diff}");
            }
            if let Some(dir) = out {
                let fixture = serde_json::json!({
                    "mechanism": m.name(),
                    "instance": &inst,
                    "log": oracle_run(&inst, m)?.log,
                });
                let mut w = create(&dir.join(format!("tiny-{s}-{}.json", m.name().replace('&', "-"))))?;
                writeln!(w, "{}", serde_json::to_string_pretty(&fixture)?)?;
                w.flush()?;
            }
        }
    }
    println!("{} instance runs, {mismatches} mismatches", seeds * mechs.len() as u64);
    Ok(mismatches == 0)
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = FileConfig::load(cli.config.as_deref())?;
    if let Some(c) = cli.capacity {
        cfg.set_capacity(c);
    }
    cfg.system.validate()?;
    info!("capacity {}", cfg.system.capacity);
    match cli.command {
        Command::SynthTrace { out, seed, jobs } => {
            let mut t = cfg.trace.clone();
            t.seed = seed.unwrap_or(t.seed);
            t.jobs = jobs.unwrap_or(t.jobs);
            let trace = synthesize_trace(&t);
            let mut w = create(&out)?;
            write_swf(&trace, &mut w)?;
            w.flush()?;
            println!("{} jobs written to {}", trace.len(), out.display());
            Ok(true)
        }
        Command::Generate { workload, out, mix } => {
            let specs = generate(&cfg, &workload, &mix)?;
            let mut w = create(&out)?;
            write_native(&specs, &mut w)?;
            w.flush()?;
            Ok(true)
        }
        Command::Simulate { workload, mechanism, out, checkpoint_scale, event_log, ledger_audit, mix } => simulate(
            &cfg,
            &workload,
            mechanism,
            &out,
            checkpoint_scale,
            event_log.as_deref(),
            ledger_audit.as_deref(),
            &mix,
        ),
        Command::Sweep(args) => sweep(&cfg, &args),
        Command::OracleCheck { seed, seeds, mechanism, out } => oracle_check(seed, seeds, mechanism, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
