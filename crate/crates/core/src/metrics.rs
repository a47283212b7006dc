//! Metrics as a pure fold over the event log.
//!
//! Besides the averages, the fold integrates each job's node count over time
//! from the `start`/`shrink`/`expand`/`preempt`/`finish` records and checks
//! the result against the per-segment accounts, so a report only exists for
//! a log whose node-seconds add up.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{Acct, LogEvent, LogRecord};
use crate::error::{Error, Result};
use crate::{JobId, JobKind, JobSpec, Secs};

const WEEK: Secs = 7 * 24 * 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct MetricsOptions {
    /// Count setup time as useful work instead of waste.
    pub setup_counts_as_useful: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WasteBreakdown {
    pub lost_compute: u64,
    pub setup_replay: u64,
    pub checkpoint_writes: u64,
    pub drain_occupancy: u64,
    pub rounding_slack: u64,
}

impl WasteBreakdown {
    pub fn total(&self) -> u64 {
        self.lost_compute + self.setup_replay + self.checkpoint_writes + self.drain_occupancy + self.rounding_slack
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub capacity: u32,
    pub jobs: usize,
    pub jobs_rigid: usize,
    pub jobs_on_demand: usize,
    pub jobs_malleable: usize,
    pub avg_turnaround: Option<f64>,
    pub avg_turnaround_rigid: Option<f64>,
    pub avg_turnaround_on_demand: Option<f64>,
    pub avg_turnaround_malleable: Option<f64>,
    /// Absent without on-demand jobs.
    pub instant_start_rate: Option<f64>,
    pub preemption_ratio_rigid: f64,
    pub preemption_ratio_malleable: f64,
    pub preemptions: u64,
    pub shrinks: u64,
    pub expansions: u64,
    /// Absent for a zero-length horizon.
    pub system_utilization: Option<f64>,
    pub useful_node_seconds: u64,
    pub waste: WasteBreakdown,
    pub idle_node_seconds: u64,
    pub horizon_start: Secs,
    pub horizon_end: Secs,
    /// On-demand arrivals per week since the horizon start.
    pub weekly_on_demand: Vec<u32>,
}

impl MetricsReport {
    pub fn horizon(&self) -> Secs {
        self.horizon_end - self.horizon_start
    }

    pub fn capacity_node_seconds(&self) -> u64 {
        self.capacity as u64 * self.horizon() as u64
    }

    /// One flat row for CSV output.
    pub fn row(&self) -> ReportRow {
        ReportRow {
            jobs: self.jobs,
            avg_turnaround: self.avg_turnaround,
            avg_turnaround_rigid: self.avg_turnaround_rigid,
            avg_turnaround_on_demand: self.avg_turnaround_on_demand,
            avg_turnaround_malleable: self.avg_turnaround_malleable,
            instant_start_rate: self.instant_start_rate,
            preemption_ratio_rigid: self.preemption_ratio_rigid,
            preemption_ratio_malleable: self.preemption_ratio_malleable,
            system_utilization: self.system_utilization,
            preemptions: self.preemptions,
            shrinks: self.shrinks,
            expansions: self.expansions,
            useful_node_seconds: self.useful_node_seconds,
            lost_compute: self.waste.lost_compute,
            setup_replay: self.waste.setup_replay,
            checkpoint_writes: self.waste.checkpoint_writes,
            drain_occupancy: self.waste.drain_occupancy,
            rounding_slack: self.waste.rounding_slack,
            idle_node_seconds: self.idle_node_seconds,
            horizon_start: self.horizon_start,
            horizon_end: self.horizon_end,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.serialize(self.row())?;
        w.flush().map_err(|e| Error::io("report csv", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        fn opt(v: Option<f64>, scale: f64, unit: &str) -> String {
            v.map_or("n/a".to_string(), |x| format!("{:.2}{unit}", x * scale))
        }
        let hours = 1.0 / 3600.0;
        format!(
            "jobs {} (rigid {}, on-demand {}, malleable {})\n\
             avg turnaround {} (rigid {}, on-demand {}, malleable {})\n\
             instant start rate {}\n\
             preemption ratio rigid {:.2}% malleable {:.2}%\n\
             system utilization {}\n",
            self.jobs,
            self.jobs_rigid,
            self.jobs_on_demand,
            self.jobs_malleable,
            opt(self.avg_turnaround, hours, " h"),
            opt(self.avg_turnaround_rigid, hours, " h"),
            opt(self.avg_turnaround_on_demand, hours, " h"),
            opt(self.avg_turnaround_malleable, hours, " h"),
            opt(self.instant_start_rate, 100.0, "%"),
            self.preemption_ratio_rigid * 100.0,
            self.preemption_ratio_malleable * 100.0,
            opt(self.system_utilization, 100.0, "%"),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub jobs: usize,
    pub avg_turnaround: Option<f64>,
    pub avg_turnaround_rigid: Option<f64>,
    pub avg_turnaround_on_demand: Option<f64>,
    pub avg_turnaround_malleable: Option<f64>,
    pub instant_start_rate: Option<f64>,
    pub preemption_ratio_rigid: f64,
    pub preemption_ratio_malleable: f64,
    pub system_utilization: Option<f64>,
    pub preemptions: u64,
    pub shrinks: u64,
    pub expansions: u64,
    pub useful_node_seconds: u64,
    pub lost_compute: u64,
    pub setup_replay: u64,
    pub checkpoint_writes: u64,
    pub drain_occupancy: u64,
    pub rounding_slack: u64,
    pub idle_node_seconds: u64,
    pub horizon_start: Secs,
    pub horizon_end: Secs,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Default)]
struct JobTrack {
    nodes: u32,
    since: Secs,
    first_start: Option<Secs>,
    finish: Option<Secs>,
    preempted: bool,
    committed: Option<bool>,
}

/// Folds a log into a report, checking node-second conservation on the way.
pub fn compute(specs: &[JobSpec], log: &[LogRecord], capacity: u32, opts: &MetricsOptions) -> Result<MetricsReport> {
    let by_id: HashMap<JobId, &JobSpec> = specs.iter().map(|s| (s.job_id, s)).collect();
    let mut track: HashMap<JobId, JobTrack> = HashMap::new();
    let mut acct = Acct::default();
    let mut integral: u64 = 0;
    let (mut preemptions, mut shrinks, mut expansions) = (0u64, 0u64, 0u64);
    let horizon_start = log.iter().map(|r| r.t).min().unwrap_or(0);
    let horizon_end = log.iter().map(|r| r.t).max().unwrap_or(0);

    let close = |t: &mut JobTrack, now: Secs, integral: &mut u64| {
        *integral += t.nodes as u64 * (now - t.since) as u64;
        t.since = now;
    };
    for r in log {
        let job = r.event.job();
        if !by_id.contains_key(&job) {
            return Err(Error::invariant(r.t, format!("log mentions unknown job {job}")));
        }
        let t = track.entry(job).or_default();
        match &r.event {
            LogEvent::Start { nodes, .. } => {
                if t.nodes != 0 {
                    return Err(Error::invariant(r.t, format!("job {job} started twice")));
                }
                t.nodes = *nodes;
                t.since = r.t;
                t.first_start.get_or_insert(r.t);
            }
            LogEvent::Shrink { to, .. } | LogEvent::Expand { to, .. } => {
                close(t, r.t, &mut integral);
                t.nodes = *to;
                if matches!(r.event, LogEvent::Shrink { .. }) {
                    shrinks += 1;
                } else {
                    expansions += 1;
                }
            }
            LogEvent::Preempt { acct: a, .. } | LogEvent::Finish { acct: a, .. } => {
                close(t, r.t, &mut integral);
                t.nodes = 0;
                acct.add(a);
                if matches!(r.event, LogEvent::Preempt { .. }) {
                    t.preempted = true;
                    preemptions += 1;
                } else {
                    t.finish = Some(r.t);
                }
            }
            LogEvent::Arrive { committed, .. } => t.committed = Some(*committed),
            _ => {}
        }
    }
    if track.values().any(|t| t.nodes != 0) {
        return Err(Error::invariant(horizon_end, "log ends with jobs still holding nodes"));
    }
    if integral != acct.total() {
        return Err(Error::invariant(
            horizon_end,
            format!("allocated node-seconds {integral} differ from accounted {}", acct.total()),
        ));
    }
    let capacity_ns = capacity as u64 * (horizon_end - horizon_start) as u64;
    if integral > capacity_ns {
        return Err(Error::invariant(horizon_end, "allocated node-seconds exceed capacity"));
    }

    let mut turnaround: HashMap<JobKind, Vec<f64>> = HashMap::new();
    let mut all = Vec::new();
    let mut counts: HashMap<JobKind, usize> = HashMap::new();
    let mut preempted: HashMap<JobKind, usize> = HashMap::new();
    let (mut od_total, mut od_instant) = (0usize, 0usize);
    let mut weekly = Vec::new();
    let mut sorted: Vec<&JobSpec> = specs.iter().collect();
    sorted.sort_by_key(|s| s.job_id);
    for s in sorted {
        *counts.entry(s.kind).or_default() += 1;
        let t = track.get(&s.job_id);
        if let Some(fin) = t.and_then(|t| t.finish) {
            let ta = (fin - s.arrival_time()) as f64;
            turnaround.entry(s.kind).or_default().push(ta);
            all.push(ta);
        }
        if t.is_some_and(|t| t.preempted) {
            *preempted.entry(s.kind).or_default() += 1;
        }
        if s.kind == JobKind::OnDemand {
            od_total += 1;
            let instant = match t {
                Some(JobTrack { committed: Some(c), .. }) => *c,
                Some(tr) => tr.first_start == Some(s.arrival_time()),
                None => false,
            };
            od_instant += instant as usize;
            let week = ((s.arrival_time() - horizon_start).max(0) / WEEK) as usize;
            if weekly.len() <= week {
                weekly.resize(week + 1, 0);
            }
            weekly[week] += 1;
        }
    }
    let ratio = |k: JobKind| {
        let n = counts.get(&k).copied().unwrap_or(0);
        if n == 0 {
            0.0
        } else {
            preempted.get(&k).copied().unwrap_or(0) as f64 / n as f64
        }
    };
    let waste = WasteBreakdown {
        lost_compute: acct.lost,
        setup_replay: if opts.setup_counts_as_useful { 0 } else { acct.setup },
        checkpoint_writes: acct.checkpoint,
        drain_occupancy: acct.drain,
        rounding_slack: acct.slack,
    };
    let useful = acct.useful + if opts.setup_counts_as_useful { acct.setup } else { 0 };
    let kind_mean = |k: JobKind| turnaround.get(&k).and_then(|v| mean(v));
    Ok(MetricsReport {
        capacity,
        jobs: specs.len(),
        jobs_rigid: counts.get(&JobKind::Rigid).copied().unwrap_or(0),
        jobs_on_demand: od_total,
        jobs_malleable: counts.get(&JobKind::Malleable).copied().unwrap_or(0),
        avg_turnaround: mean(&all),
        avg_turnaround_rigid: kind_mean(JobKind::Rigid),
        avg_turnaround_on_demand: kind_mean(JobKind::OnDemand),
        avg_turnaround_malleable: kind_mean(JobKind::Malleable),
        instant_start_rate: (od_total > 0).then(|| od_instant as f64 / od_total as f64),
        preemption_ratio_rigid: ratio(JobKind::Rigid),
        preemption_ratio_malleable: ratio(JobKind::Malleable),
        preemptions,
        shrinks,
        expansions,
        system_utilization: (capacity_ns > 0).then(|| useful as f64 / capacity_ns as f64),
        useful_node_seconds: useful,
        waste,
        idle_node_seconds: capacity_ns - integral,
        horizon_start,
        horizon_end,
        weekly_on_demand: weekly,
    })
}

/// Wall-clock decision timings in milliseconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencySamples {
    /// On-demand arrival handling.
    pub arrival_ms: Vec<f64>,
    /// Waiting jobs at each arrival decision, aligned with `arrival_ms`.
    pub arrival_queue_len: Vec<usize>,
    /// Scheduling passes.
    pub pass_ms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencySummary {
    pub count: usize,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    pub fn of(samples: &[f64]) -> Option<LatencySummary> {
        if samples.is_empty() {
            return None;
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(LatencySummary { count: v.len(), p50_ms: at(0.50), p99_ms: at(0.99), max_ms: v[v.len() - 1] })
    }
}
