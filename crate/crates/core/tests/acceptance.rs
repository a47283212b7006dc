//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any asserted criterion fails.
//!
//! Run with `cargo test -p hybrid-sched --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hybrid_sched::engine::{run_with, write_event_log, RunOptions};
use hybrid_sched::metrics::LatencySummary;
use hybrid_sched::oracle::{cross_check, TinyInstance};
use hybrid_sched::sweep::{build_workload, metric_value, run_sweep, CellResult, Execution, SweepConfig};
use hybrid_sched::workload::SyntheticTraceConfig;
use hybrid_sched::{run, JobKind, Mechanism, MetricsReport};
use proptest::test_runner::{Config, TestRunner};

const WORKLOADS: [&str; 5] = ["W1", "W2", "W3", "W4", "W5"];

struct Verdict {
    id: &'static str,
    pass: bool,
    asserted: bool,
    detail: String,
}

impl Verdict {
    fn print(&self) {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        let note = if self.asserted { "" } else { " (reported, not asserted)" };
        println!("{tag} {}{note}: {}", self.id, self.detail);
    }
}

fn m(name: &str) -> Mechanism {
    name.parse().unwrap()
}

fn oracle_equivalence() -> Verdict {
    let t = Instant::now();
    let mut runs = 0;
    let mut mismatches = Vec::new();
    for seed in 0..100 {
        let inst = TinyInstance::random(seed);
        for mech in common::all_mechanisms() {
            runs += 1;
            match cross_check(&inst, mech) {
                Ok(None) => {}
                Ok(Some(diff)) => mismatches.push(format!("{mech} seed {seed}: {diff}")),
                Err(e) => mismatches.push(format!("{mech} seed {seed}: {e}")),
            }
        }
    }
    let took = t.elapsed();
    for line in mismatches.iter().take(5) {
        println!("    {line}");
    }
    Verdict {
        id: "1 oracle equivalence",
        pass: mismatches.is_empty() && took < Duration::from_secs(60),
        asserted: true,
        detail: format!("{runs} tiny instances, {} mismatches, {:.1}s", mismatches.len(), took.as_secs_f64()),
    }
}

fn conservation() -> Verdict {
    let opts = RunOptions { ledger_audit: true, ..RunOptions::default() };
    let sweep = SweepConfig::default();
    let mut runs = 0;
    let mut audits = 0;
    let mut failures = Vec::new();
    for (w, seed) in [("W5", 0), ("W1", 1), ("W3", 2)] {
        let specs = build_workload(&sweep, w, seed).unwrap();
        for mech in common::all_mechanisms() {
            let out = run_with(&specs, mech, &sweep.system, &opts).unwrap();
            runs += 1;
            audits += out.audit.len();
            if let Some(v) = common::conservation_violation(&specs, &out, sweep.system.capacity) {
                failures.push(format!("{mech} {w} seed {seed}: {v}"));
            }
        }
    }
    for seed in 0..200 {
        let inst = TinyInstance::random(seed);
        for mech in common::all_mechanisms() {
            let out = run_with(&inst.jobs, mech, &inst.config, &opts).unwrap();
            runs += 1;
            audits += out.audit.len();
            if let Some(v) = common::conservation_violation(&inst.jobs, &out, inst.config.capacity) {
                failures.push(format!("{mech} tiny seed {seed}: {v}"));
            }
        }
    }
    for line in failures.iter().take(5) {
        println!("    {line}");
    }
    Verdict {
        id: "2 conservation",
        pass: failures.is_empty(),
        asserted: true,
        detail: format!("{runs} runs, {audits} ledger mutations audited, {} violations", failures.len()),
    }
}

/// Reports keyed by (mechanism, workload, checkpoint scale in thousandths, seed).
type Table = BTreeMap<(Mechanism, String, u32, u64), MetricsReport>;

fn tabulate(results: Vec<CellResult>) -> Table {
    results
        .into_iter()
        .map(|r| {
            let c = r.cell;
            let report = r.report.unwrap_or_else(|e| panic!("{} {} seed {}: {e}", c.mechanism, c.workload, c.seed));
            ((c.mechanism, c.workload, (c.checkpoint_scale * 1000.0).round() as u32, c.seed), report)
        })
        .collect()
}

fn series(t: &Table, mech: Mechanism, w: &str, scale: u32, metric: &str) -> Vec<(u64, f64)> {
    t.iter()
        .filter(|((m, wl, s, _), _)| *m == mech && wl == w && *s == scale)
        .map(|((.., seed), r)| (*seed, metric_value(r, metric).unwrap_or(f64::NAN)))
        .collect()
}

fn mean(v: &[(u64, f64)]) -> f64 {
    v.iter().map(|x| x.1).sum::<f64>() / v.len() as f64
}

fn instant_start(sweep: &SweepConfig) -> (Verdict, Table) {
    let t = Instant::now();
    let cfg = SweepConfig { workloads: vec!["W5".into()], ..sweep.clone() };
    let mut od_fraction: f64 = 0.0;
    for &seed in &cfg.seeds {
        let specs = build_workload(&cfg, "W5", seed).unwrap();
        let od = specs.iter().filter(|s| s.kind == JobKind::OnDemand).count();
        od_fraction = od_fraction.max(od as f64 / specs.len() as f64);
    }
    let table = tabulate(run_sweep(&cfg, Execution::Parallel).unwrap());
    let took = t.elapsed();
    let mut pass = od_fraction <= 0.15 && took < Duration::from_secs(300);
    let mut parts = Vec::new();
    for mech in common::all_mechanisms() {
        let v = series(&table, mech, "W5", 1000, "instant_start_rate");
        let avg = mean(&v);
        let worst = v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        pass &= if mech.is_baseline() { avg < 0.60 } else { avg >= 0.95 };
        parts.push(format!("{mech} {avg:.3} (min {worst:.3})"));
    }
    let v = Verdict {
        id: "3 instant start",
        pass,
        asserted: true,
        detail: format!(
            "{} traces, on-demand share <= {:.3}, {:.1}s; {}",
            cfg.seeds.len(),
            od_fraction,
            took.as_secs_f64(),
            parts.join(", ")
        ),
    };
    (v, table)
}

#[derive(Clone, Copy)]
enum Op {
    Lt,
    Le,
    Ge,
    Gt,
}

impl Op {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Op::Lt => a < b,
            Op::Le => a <= b,
            Op::Ge => a >= b,
            Op::Gt => a > b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Ge => ">=",
            Op::Gt => ">",
        }
    }
}

/// One side of a comparison: a metric of a mechanism on a workload at a checkpoint scale.
#[derive(Clone, Copy)]
struct Side<'a>(&'a str, &'a str, u32, &'a str);

struct Ordering {
    lines: Vec<String>,
    pass: bool,
}

impl Ordering {
    fn new() -> Ordering {
        Ordering { lines: Vec::new(), pass: true }
    }

    fn check(&mut self, t: &Table, a: Side, op: Op, b: Side) {
        let va = series(t, m(a.0), a.1, a.2, a.3);
        let vb = series(t, m(b.0), b.1, b.2, b.3);
        let (ma, mb) = (mean(&va), mean(&vb));
        let ok = op.holds(ma, mb);
        self.pass &= ok;
        let violations: Vec<String> =
            va.iter().zip(&vb).filter(|(x, y)| !op.holds(x.1, y.1)).map(|(x, _)| x.0.to_string()).collect();
        let name = |s: Side| {
            let scale = if s.2 == 1000 { String::new() } else { format!(" x{}", s.2 as f64 / 1000.0) };
            format!("{} {} {}{scale}", s.3, s.0, s.1)
        };
        self.lines.push(format!(
            "    [{}] {} {:.4} {} {} {:.4}; trace-level violations: {}",
            if ok { "ok" } else { "violated" },
            name(a),
            ma,
            op.symbol(),
            name(b),
            mb,
            if violations.is_empty() { "none".into() } else { format!("seeds {}", violations.join(",")) }
        ));
    }
}

fn orderings(sweep: &SweepConfig, w5: Table) -> Vec<Verdict> {
    let t = Instant::now();
    let cfg = SweepConfig {
        mechanisms: Mechanism::SIX.to_vec(),
        workloads: WORKLOADS.iter().map(|w| w.to_string()).collect(),
        checkpoint_scales: vec![1.0, 0.5],
        ..sweep.clone()
    };
    let mut table = tabulate(run_sweep(&cfg, Execution::Parallel).unwrap());
    table.extend(w5);
    println!("    ordering sweep: {} cells in {:.1}s", table.len(), t.elapsed().as_secs_f64());

    const TAT: &str = "avg_turnaround";
    const UTIL: &str = "system_utilization";
    let six: Vec<&str> = Mechanism::SIX.iter().map(|m| m.name()).collect();
    let mut out = Vec::new();
    let mut push = |id: &'static str, what: &str, o: Ordering| {
        for l in &o.lines {
            println!("{l}");
        }
        out.push(Verdict { id, pass: o.pass, asserted: false, detail: what.to_string() });
    };

    let mut o = Ordering::new();
    for other in six.iter().filter(|&&n| n != "N&PAA") {
        o.check(&table, Side("N&PAA", "W5", 1000, TAT), Op::Ge, Side(other, "W5", 1000, TAT));
        o.check(&table, Side("N&PAA", "W5", 1000, UTIL), Op::Le, Side(other, "W5", 1000, UTIL));
    }
    push("4a", "N&PAA has the worst turnaround and lowest utilization on W5", o);

    let mut o = Ordering::new();
    for n in ["N", "CUA", "CUP"] {
        let (paa, spaa) = (format!("{n}&PAA"), format!("{n}&SPAA"));
        let pr = "preemption_ratio_malleable";
        o.check(&table, Side(&spaa, "W5", 1000, pr), Op::Lt, Side(&paa, "W5", 1000, pr));
        o.check(&table, Side(&spaa, "W5", 1000, UTIL), Op::Ge, Side(&paa, "W5", 1000, UTIL));
    }
    push("4b", "SPAA lowers malleable preemption and keeps utilization vs PAA on W5", o);

    let mut o = Ordering::new();
    for n in ["CUA", "CUP"] {
        let (paa, spaa) = (format!("{n}&PAA"), format!("{n}&SPAA"));
        o.check(&table, Side(&paa, "W5", 1000, TAT), Op::Le, Side(&spaa, "W5", 1000, TAT));
    }
    push("4c", "PAA turnaround <= SPAA turnaround under CUA and CUP on W5", o);

    let mut o = Ordering::new();
    for x in ["PAA", "SPAA"] {
        let (cua, cup) = (format!("CUA&{x}"), format!("CUP&{x}"));
        o.check(&table, Side(&cua, "W5", 1000, TAT), Op::Le, Side(&cup, "W5", 1000, TAT));
        o.check(&table, Side(&cua, "W5", 1000, UTIL), Op::Ge, Side(&cup, "W5", 1000, UTIL));
    }
    push("4d", "CUA beats CUP on W5", o);

    let mut o = Ordering::new();
    for mech in ["CUA&PAA", "CUA&SPAA", "CUP&PAA", "CUP&SPAA"] {
        o.check(
            &table,
            Side(mech, "W5", 1000, "avg_turnaround_malleable"),
            Op::Lt,
            Side(mech, "W5", 1000, "avg_turnaround_rigid"),
        );
    }
    push("4e", "malleable turnaround < rigid turnaround under CUA/CUP on W5", o);

    let mut o = Ordering::new();
    for mech in &six {
        o.check(
            &table,
            Side(mech, "W5", 1000, "preemption_ratio_malleable"),
            Op::Gt,
            Side(mech, "W5", 1000, "preemption_ratio_rigid"),
        );
    }
    push("4f", "malleable preemption ratio > rigid preemption ratio on W5", o);

    let mut o = Ordering::new();
    for mech in ["CUP&PAA", "CUP&SPAA"] {
        o.check(&table, Side(mech, "W2", 1000, UTIL), Op::Ge, Side(mech, "W1", 1000, UTIL));
        o.check(&table, Side(mech, "W2", 1000, TAT), Op::Le, Side(mech, "W1", 1000, TAT));
    }
    push("4g", "CUP does at least as well on W2 as on W1", o);

    let mut o = Ordering::new();
    for mech in ["CUA&PAA", "CUA&SPAA"] {
        for w in ["W1", "W2", "W3", "W5"] {
            o.check(&table, Side(mech, "W4", 1000, TAT), Op::Le, Side(mech, w, 1000, TAT));
        }
    }
    push("4h", "CUA turnaround is lowest on W4", o);

    let mut o = Ordering::new();
    for mech in &six {
        o.check(
            &table,
            Side(mech, "W5", 500, "avg_turnaround_rigid"),
            Op::Le,
            Side(mech, "W5", 1000, "avg_turnaround_rigid"),
        );
        o.check(&table, Side(mech, "W5", 500, UTIL), Op::Ge, Side(mech, "W5", 1000, UTIL));
    }
    push("4i", "checkpoint scale 0.5 helps rigid turnaround and utilization on W5", o);
    out
}

fn decision_latency() -> Verdict {
    let capacity = 4392;
    let mut cfg = SweepConfig::default();
    cfg.system.capacity = capacity;
    cfg.workload.system_size = capacity;
    cfg.trace = SyntheticTraceConfig { system_size: capacity, jobs: 10_000, target_load: 8.0, ..cfg.trace.clone() };
    let specs = build_workload(&cfg, "W5", 1).unwrap();
    let t = Instant::now();
    let out = run(&specs, m("CUP&SPAA"), &cfg.system).unwrap();
    let took = t.elapsed();
    let l = &out.latency;
    let deep: Vec<f64> =
        l.arrival_ms.iter().zip(&l.arrival_queue_len).filter(|(_, &q)| q >= 1000).map(|(&ms, _)| ms).collect();
    let (p99, max) = LatencySummary::of(&deep).map_or((f64::NAN, f64::NAN), |s| (s.p99_ms, s.max_ms));
    Verdict {
        id: "5 decision latency",
        pass: !deep.is_empty() && p99 < 10.0 && took < Duration::from_secs(120),
        asserted: true,
        detail: format!(
            "{capacity} nodes, {} arrival decisions with >= 1000 queued, p99 {:.3} ms, max {:.3} ms, run {:.1}s",
            deep.len(),
            p99,
            max,
            took.as_secs_f64()
        ),
    }
}

fn easy_safety() -> Verdict {
    let mut runner = TestRunner::new(Config { cases: 200, failure_persistence: None, ..Config::default() });
    let result = runner.run(&common::easy::cases(), common::easy::check);
    Verdict {
        id: "6 EASY safety",
        pass: result.is_ok(),
        asserted: true,
        detail: match result {
            Ok(()) => "200 cases, head start unchanged without each backfilled job".into(),
            Err(e) => e.to_string(),
        },
    }
}

fn determinism(sweep: &SweepConfig) -> Verdict {
    let render = |mech: Mechanism, w: &str, seed: u64| {
        let specs = build_workload(sweep, w, seed).unwrap();
        let out = run(&specs, mech, &sweep.system).unwrap();
        let mut log = Vec::new();
        write_event_log(&mut log, mech.name(), sweep.system.capacity, &out.log).unwrap();
        let mut csv = Vec::new();
        out.report.write_csv(&mut csv).unwrap();
        (log, out.report.to_json(), csv)
    };
    let cases = [(Mechanism::Baseline, "W1", 0), (m("CUA&SPAA"), "W5", 1), (m("CUP&PAA"), "W3", 2)];
    let mut differing = Vec::new();
    let mut bytes = 0;
    for (mech, w, seed) in cases {
        let first = render(mech, w, seed);
        bytes += first.0.len() + first.1.len() + first.2.len();
        for _ in 0..2 {
            if render(mech, w, seed) != first {
                differing.push(format!("{mech} {w} seed {seed}"));
            }
        }
    }
    Verdict {
        id: "7 determinism",
        pass: differing.is_empty(),
        asserted: true,
        detail: format!("3 runs x 3 repetitions, {bytes} bytes per repetition, differing: {differing:?}"),
    }
}

fn main() -> ExitCode {
    let sweep = SweepConfig::default();
    let mut verdicts = vec![oracle_equivalence(), conservation()];
    verdicts.iter().for_each(Verdict::print);
    let (v3, w5) = instant_start(&sweep);
    v3.print();
    verdicts.push(v3);
    let v4 = orderings(&sweep, w5);
    v4.iter().for_each(Verdict::print);
    verdicts.extend(v4);
    for v in [decision_latency(), easy_safety(), determinism(&sweep)] {
        v.print();
        verdicts.push(v);
    }
    let failed: Vec<&str> = verdicts.iter().filter(|v| v.asserted && !v.pass).map(|v| v.id).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("asserted criteria failed: {failed:?}");
        ExitCode::FAILURE
    }
}
