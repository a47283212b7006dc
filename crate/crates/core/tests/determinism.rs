//! Identical inputs give byte-identical logs and reports.

mod common;

use hybrid_sched::engine::write_event_log;
use hybrid_sched::sweep::{run_sweep, Execution, SweepConfig};
use hybrid_sched::workload::SyntheticTraceConfig;
use hybrid_sched::{run, Mechanism};

fn render(mechanism: Mechanism, seed: u64) -> (Vec<u8>, String, Vec<u8>) {
    let (specs, cfg) = common::small_workload(seed, 64, 150);
    let out = run(&specs, mechanism, &cfg).unwrap();
    let mut log = Vec::new();
    write_event_log(&mut log, mechanism.name(), cfg.capacity, &out.log).unwrap();
    let mut csv = Vec::new();
    out.report.write_csv(&mut csv).unwrap();
    (log, out.report.to_json(), csv)
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases = [(Mechanism::Baseline, 3), (Mechanism::SIX[3], 11), (Mechanism::SIX[4], 29)];
    for (m, seed) in cases {
        let a = render(m, seed);
        let b = render(m, seed);
        assert_eq!(a, b, "{m} seed {seed}");
        assert!(!a.0.is_empty());
    }
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let cfg = SweepConfig {
        trace: SyntheticTraceConfig { jobs: 120, system_size: 64, ..SyntheticTraceConfig::default() },
        workload: hybrid_sched::WorkloadConfig { system_size: 64, ..Default::default() },
        system: hybrid_sched::SystemConfig { capacity: 64, ..Default::default() },
        workloads: vec!["W2".into(), "W5".into()],
        seeds: vec![1, 2],
        ..SweepConfig::default()
    };
    let a = run_sweep(&cfg, Execution::Sequential).unwrap();
    let b = run_sweep(&cfg, Execution::Parallel).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.cell, y.cell);
        assert_eq!(x.report.as_ref().unwrap(), y.report.as_ref().unwrap());
    }
}
