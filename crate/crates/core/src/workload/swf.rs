//! Standard Workload Format ingestion.
//!
//! Each record is 18 whitespace-separated numeric fields; lines starting with
//! `;` are header comments. Fields used here (1-based): 1 job id, 2 submit
//! time, 4 run time, 5 allocated processors, 8 requested processors,
//! 9 requested time, 13 group id (the project label).

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use log::warn;

use super::RawTraceJob;
use crate::{Error, Result};

const FIELDS: usize = 18;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwfStats {
    pub records: usize,
    pub comments: usize,
    pub malformed: usize,
    /// Records with size < 1 or negative runtime.
    pub dropped: usize,
    /// Records whose runtime exceeded the estimate and was clamped.
    pub clamped: usize,
}

impl SwfStats {
    pub fn warnings(&self) -> usize {
        self.malformed + self.dropped + self.clamped
    }
}

#[derive(Debug, Clone, Default)]
pub struct SwfTrace {
    pub jobs: Vec<RawTraceJob>,
    pub stats: SwfStats,
}

pub fn read_swf(path: impl AsRef<Path>) -> Result<SwfTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_swf(&text))
}

/// Parses SWF text. Malformed lines are skipped and counted, never fatal.
pub fn parse_swf(text: &str) -> SwfTrace {
    let mut trace = SwfTrace::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with(';') {
            trace.stats.comments += 1;
            continue;
        }
        let fields: Option<Vec<f64>> = line.split_whitespace().map(|f| f.parse::<f64>().ok()).collect();
        let fields = match fields {
            Some(f) if f.len() == FIELDS => f,
            _ => {
                warn!("swf line {}: malformed record skipped", lineno + 1);
                trace.stats.malformed += 1;
                continue;
            }
        };
        trace.stats.records += 1;

        let job_id = fields[0];
        let submit = fields[1];
        let runtime = fields[3];
        let size = if fields[4] >= 1.0 { fields[4] } else { fields[7] };
        if size < 1.0 || runtime < 0.0 || job_id < 0.0 {
            trace.stats.dropped += 1;
            continue;
        }
        let mut actual = runtime.round() as i64;
        let estimate = if fields[8] >= 0.0 { fields[8].round() as i64 } else { actual };
        if actual > estimate {
            trace.stats.clamped += 1;
            actual = estimate;
        }
        trace.jobs.push(RawTraceJob {
            job_id: job_id as u64,
            submit_time: submit.round() as i64,
            runtime_estimate: estimate,
            actual_runtime: actual,
            size: size as u32,
            project: format!("g{}", fields[12] as i64),
        });
    }
    trace.jobs.sort_by_key(|j| (j.submit_time, j.job_id));
    trace
}

/// Writes jobs as SWF records; unknown fields are `-1`.
pub fn write_swf(jobs: &[RawTraceJob], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "; Version: 2.2")?;
    writeln!(out, "; Note: group id carries the project label")?;
    let mut line = String::new();
    for j in jobs {
        line.clear();
        let group: i64 = j.project.trim_start_matches('g').parse().unwrap_or(-1);
        write!(
            line,
            "{} {} -1 {} {} -1 -1 {} {} -1 1 -1 {} -1 -1 -1 -1 -1",
            j.job_id, j.submit_time, j.actual_runtime, j.size, j.size, j.runtime_estimate, group
        )
        .unwrap();
        writeln!(out, "{line}")?;
    }
    Ok(())
}
