#![allow(dead_code)]

pub mod easy;

use std::collections::HashMap;

use hybrid_sched::engine::LogEvent;
use hybrid_sched::workload::{generate_workload, synthesize_trace, NoticeMix, SyntheticTraceConfig};
use hybrid_sched::{JobKind, JobSpec, Mechanism, SimOutput, SystemConfig, WorkloadConfig};

pub fn all_mechanisms() -> Vec<Mechanism> {
    std::iter::once(Mechanism::Baseline).chain(Mechanism::SIX).collect()
}

/// A few dozen jobs on a small machine, busy enough to force preemptions.
pub fn small_workload(seed: u64, capacity: u32, jobs: usize) -> (Vec<JobSpec>, SystemConfig) {
    let trace = SyntheticTraceConfig {
        jobs,
        projects: 12,
        system_size: capacity,
        target_load: 1.2,
        max_runtime: 20_000,
        seed,
        ..SyntheticTraceConfig::default()
    };
    let mix = NoticeMix::preset(NoticeMix::PRESETS[seed as usize % 5]).unwrap();
    let wcfg = WorkloadConfig { system_size: capacity, notice_mix: mix, rng_seed: seed, ..WorkloadConfig::default() };
    let (specs, _) = generate_workload(&synthesize_trace(&trace), &wcfg).unwrap();
    let cfg = SystemConfig { capacity, checkpoint_node_threshold: capacity / 2, ..SystemConfig::default() };
    (specs, cfg)
}

/// First conservation failure of a run, if any: node-seconds over the horizon,
/// ledger totals after each audited mutation, and per-job useful work.
pub fn conservation_violation(specs: &[JobSpec], out: &SimOutput, capacity: u32) -> Option<String> {
    let r = &out.report;
    let lhs = r.useful_node_seconds as f64 + r.waste.total() as f64 + r.idle_node_seconds as f64;
    let rhs = capacity as f64 * r.horizon() as f64;
    if (lhs - rhs).abs() > 1e-9 * rhs.max(1.0) {
        return Some(format!("useful + waste + idle = {lhs}, capacity x horizon = {rhs}"));
    }
    if let Some(a) = out.audit.iter().find(|a| a.free + a.allocated + a.reserved_idle != capacity) {
        return Some(format!(
            "ledger sums to {} after {} at t={}",
            a.free + a.allocated + a.reserved_idle,
            a.op,
            a.time
        ));
    }
    let spec: HashMap<u64, &JobSpec> = specs.iter().map(|s| (s.job_id, s)).collect();
    let mut useful: HashMap<u64, u64> = HashMap::new();
    for rec in &out.log {
        match &rec.event {
            LogEvent::Preempt { job, acct, .. } => *useful.entry(*job).or_default() += acct.useful,
            LogEvent::Finish { job, acct } => {
                let done = useful.get(job).copied().unwrap_or(0) + acct.useful;
                let s = spec[job];
                let expect = match s.kind {
                    JobKind::Malleable => s.actual_work,
                    _ => s.size as u64 * s.compute_time() as u64,
                };
                if done != expect {
                    return Some(format!("job {job} finished with {done} of {expect} node-seconds of work"));
                }
                useful.insert(*job, done);
            }
            _ => {}
        }
    }
    if useful.len() != specs.len() {
        return Some(format!("{} of {} jobs finished", useful.len(), specs.len()));
    }
    None
}
