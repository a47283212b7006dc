//! Mechanism × workload × seed × checkpoint-scale sweeps.
//!
//! Cells are independent, so with the `parallel` feature they run on the rayon
//! pool. Results are always returned in cell order, which keeps the output
//! identical between the parallel and sequential paths.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;
use crate::workload::{generate_workload, read_swf, synthesize_trace, NoticeMix, SyntheticTraceConfig};
use crate::{Error, JobSpec, Mechanism, RawTraceJob, Result, SystemConfig, WorkloadConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub system: SystemConfig,
    pub workload: WorkloadConfig,
    pub trace: SyntheticTraceConfig,
    /// SWF trace used for every seed instead of the synthetic generator; seeds
    /// then vary only the job-type and notice assignment.
    pub trace_file: Option<PathBuf>,
    pub mechanisms: Vec<Mechanism>,
    /// Notice-mix preset names.
    pub workloads: Vec<String>,
    pub seeds: Vec<u64>,
    pub checkpoint_scales: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let system = SystemConfig { capacity: 512, ..SystemConfig::default() };
        SweepConfig {
            workload: WorkloadConfig { system_size: system.capacity, ..WorkloadConfig::default() },
            trace: SyntheticTraceConfig { system_size: system.capacity, ..SyntheticTraceConfig::default() },
            trace_file: None,
            system,
            mechanisms: std::iter::once(Mechanism::Baseline).chain(Mechanism::SIX).collect(),
            workloads: NoticeMix::PRESETS.iter().map(|s| s.to_string()).collect(),
            seeds: (0..10).collect(),
            checkpoint_scales: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mechanism: Mechanism,
    pub workload: String,
    pub seed: u64,
    pub checkpoint_scale: f64,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    /// A failed cell keeps its error message; the rest of the sweep carries on.
    pub report: std::result::Result<MetricsReport, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    Parallel,
}

pub fn cells(cfg: &SweepConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for w in &cfg.workloads {
        for &seed in &cfg.seeds {
            for &scale in &cfg.checkpoint_scales {
                for &m in &cfg.mechanisms {
                    out.push(Cell { mechanism: m, workload: w.clone(), seed, checkpoint_scale: scale });
                }
            }
        }
    }
    out
}

/// The job set for one (notice mix, seed) pair.
///
/// The raw trace and the job-type assignment depend only on the seed, so all
/// notice mixes share the same jobs and differ only in their notice profiles.
pub fn build_workload(cfg: &SweepConfig, workload: &str, seed: u64) -> Result<Vec<JobSpec>> {
    let raw = match &cfg.trace_file {
        Some(path) => read_swf(path)?.jobs,
        None => synthesize_trace(&SyntheticTraceConfig { seed, ..cfg.trace.clone() }),
    };
    build_from_trace(cfg, &raw, workload, seed)
}

fn build_from_trace(cfg: &SweepConfig, raw: &[RawTraceJob], workload: &str, seed: u64) -> Result<Vec<JobSpec>> {
    let mix =
        NoticeMix::preset(workload).ok_or_else(|| Error::Config(format!("unknown workload preset {workload:?}")))?;
    let wcfg = WorkloadConfig { notice_mix: mix, rng_seed: seed, ..cfg.workload.clone() };
    Ok(generate_workload(raw, &wcfg)?.0)
}

pub fn run_cell(cfg: &SweepConfig, cell: &Cell, specs: &[JobSpec]) -> CellResult {
    let system = SystemConfig { checkpoint_scale: cell.checkpoint_scale, ..cfg.system.clone() };
    let report = crate::engine::run(specs, cell.mechanism, &system).map(|o| o.report).map_err(|e| {
        warn!("{} {} seed {}: {e}", cell.mechanism, cell.workload, cell.seed);
        e.to_string()
    });
    CellResult { cell: cell.clone(), report }
}

/// Order-preserving map over cells, on the rayon pool when asked and available.
pub fn map_cells<T, R, F>(items: &[T], how: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match how {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

pub fn run_sweep(cfg: &SweepConfig, how: Execution) -> Result<Vec<CellResult>> {
    cfg.system.validate()?;
    cfg.workload.validate()?;
    let all = cells(cfg);
    info!("sweep: {} cells", all.len());
    let mut groups: BTreeMap<(String, u64), Vec<Cell>> = BTreeMap::new();
    for c in &all {
        groups.entry((c.workload.clone(), c.seed)).or_default().push(c.clone());
    }
    let keys: Vec<(String, u64)> = groups.keys().cloned().collect();
    let file_trace = cfg.trace_file.as_ref().map(read_swf).transpose()?.map(|t| t.jobs);
    let mut built = Vec::with_capacity(keys.len());
    for (w, seed) in &keys {
        built.push(match &file_trace {
            Some(raw) => build_from_trace(cfg, raw, w, *seed)?,
            None => build_workload(cfg, w, *seed)?,
        });
    }
    let jobs: Vec<(Cell, usize)> = all
        .iter()
        .map(|c| (c.clone(), keys.iter().position(|k| k.0 == c.workload && k.1 == c.seed).unwrap()))
        .collect();
    Ok(map_cells(&jobs, how, |(c, k)| run_cell(cfg, c, &built[*k])))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub mechanism: String,
    pub workload: String,
    pub checkpoint_scale: f64,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single sample.
    pub stddev: f64,
}

pub const AGGREGATED_METRICS: [&str; 8] = [
    "avg_turnaround",
    "avg_turnaround_rigid",
    "avg_turnaround_on_demand",
    "avg_turnaround_malleable",
    "instant_start_rate",
    "preemption_ratio_rigid",
    "preemption_ratio_malleable",
    "system_utilization",
];

pub fn metric_value(r: &MetricsReport, metric: &str) -> Option<f64> {
    match metric {
        "avg_turnaround" => r.avg_turnaround,
        "avg_turnaround_rigid" => r.avg_turnaround_rigid,
        "avg_turnaround_on_demand" => r.avg_turnaround_on_demand,
        "avg_turnaround_malleable" => r.avg_turnaround_malleable,
        "instant_start_rate" => r.instant_start_rate,
        "preemption_ratio_rigid" => Some(r.preemption_ratio_rigid),
        "preemption_ratio_malleable" => Some(r.preemption_ratio_malleable),
        "system_utilization" => r.system_utilization,
        _ => None,
    }
}

pub fn mean_stddev(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Means and standard deviations over seeds; failed cells are skipped.
pub fn aggregate(results: &[CellResult]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, String, u64), (f64, Vec<&MetricsReport>)> = BTreeMap::new();
    for r in results {
        if let Ok(rep) = &r.report {
            let key = (r.cell.mechanism.name().to_string(), r.cell.workload.clone(), r.cell.checkpoint_scale.to_bits());
            groups.entry(key).or_insert((r.cell.checkpoint_scale, Vec::new())).1.push(rep);
        }
    }
    let mut rows = Vec::new();
    for ((mech, workload, _), (scale, reps)) in groups {
        for metric in AGGREGATED_METRICS {
            let vals: Vec<f64> = reps.iter().filter_map(|r| metric_value(r, metric)).collect();
            if vals.is_empty() {
                continue;
            }
            let (mean, stddev) = mean_stddev(&vals);
            rows.push(AggregateRow {
                mechanism: mech.clone(),
                workload: workload.clone(),
                checkpoint_scale: scale,
                metric: metric.to_string(),
                n: vals.len(),
                mean,
                stddev,
            });
        }
    }
    rows
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("aggregate csv", e))?;
    Ok(())
}

/// One row per cell, failed cells included with their error.
pub fn write_cells_csv<W: Write>(results: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let header = ["mechanism", "workload", "seed", "checkpoint_scale", "error"];
    let metrics: Vec<String> = results
        .iter()
        .find_map(|r| r.report.as_ref().ok())
        .map(|rep| {
            let v = serde_json::to_value(rep.row()).unwrap();
            v.as_object().unwrap().keys().cloned().collect()
        })
        .unwrap_or_default();
    w.write_record(header.iter().map(|s| s.to_string()).chain(metrics.iter().cloned()))?;
    for r in results {
        let mut rec = vec![
            r.cell.mechanism.name().to_string(),
            r.cell.workload.clone(),
            r.cell.seed.to_string(),
            r.cell.checkpoint_scale.to_string(),
        ];
        match &r.report {
            Ok(rep) => {
                rec.push(String::new());
                let v = serde_json::to_value(rep.row()).unwrap();
                for k in &metrics {
                    rec.push(match &v[k] {
                        serde_json::Value::Null => String::new(),
                        x => x.to_string(),
                    });
                }
            }
            Err(e) => {
                rec.push(e.clone());
                rec.extend(metrics.iter().map(|_| String::new()));
            }
        }
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io("cells csv", e))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StoredCell {
    #[serde(flatten)]
    cell: Cell,
    report: Option<MetricsReport>,
    error: Option<String>,
}

/// Full per-cell reports, one JSON object per line, for later re-aggregation.
pub fn write_reports_jsonl<W: Write>(results: &[CellResult], mut out: W) -> Result<()> {
    for r in results {
        let stored = StoredCell {
            cell: r.cell.clone(),
            report: r.report.as_ref().ok().cloned(),
            error: r.report.as_ref().err().cloned(),
        };
        let line = serde_json::to_string(&stored)?;
        writeln!(out, "{line}").map_err(|e| Error::io("reports", e))?;
    }
    Ok(())
}

pub fn read_reports_jsonl<R: BufRead>(input: R) -> Result<Vec<CellResult>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("reports", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let stored: StoredCell =
            serde_json::from_str(&line).map_err(|e| Error::Config(format!("reports line {}: {e}", i + 1)))?;
        let report = match (stored.report, stored.error) {
            (Some(r), _) => Ok(r),
            (None, e) => Err(e.unwrap_or_default()),
        };
        out.push(CellResult { cell: stored.cell, report });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stddev_of_single_sample_is_zero() {
        assert_eq!(mean_stddev(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_stddev(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cell_grid_covers_every_combination() {
        let cfg = SweepConfig { seeds: vec![1, 2], checkpoint_scales: vec![0.5, 1.0], ..SweepConfig::default() };
        assert_eq!(cells(&cfg).len(), 7 * 5 * 2 * 2);
    }

    #[test]
    fn stored_reports_aggregate_identically() {
        let cfg = SweepConfig {
            trace: SyntheticTraceConfig { jobs: 80, system_size: 64, ..SyntheticTraceConfig::default() },
            workload: WorkloadConfig { system_size: 64, ..WorkloadConfig::default() },
            system: SystemConfig { capacity: 64, ..SystemConfig::default() },
            mechanisms: vec![Mechanism::Baseline, Mechanism::SIX[3]],
            workloads: vec!["W3".into()],
            seeds: vec![4, 5],
            ..SweepConfig::default()
        };
        let results = run_sweep(&cfg, Execution::Sequential).unwrap();
        let mut stored = Vec::new();
        write_reports_jsonl(&results, &mut stored).unwrap();
        let back = read_reports_jsonl(&stored[..]).unwrap();
        let csv = |r: &[CellResult]| {
            let mut v = Vec::new();
            write_aggregate_csv(&aggregate(r), &mut v).unwrap();
            v
        };
        assert_eq!(csv(&results), csv(&back));
        assert!(!csv(&back).is_empty());
    }
}
