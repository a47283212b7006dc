//! Event log records.
//!
//! The log is the simulator's output of record: metrics are a fold over it,
//! and the oracle produces the same records so the two can be diffed. Each
//! record is one JSON object per line; the first line of a log file is a
//! header carrying [`LOG_SCHEMA_VERSION`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{JobId, JobKind, Secs};

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// Node-seconds spent by one run segment, split by what they achieved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acct {
    /// Computation kept: checkpointed or finished.
    pub useful: u64,
    /// Computation thrown away on preemption.
    pub lost: u64,
    pub setup: u64,
    pub checkpoint: u64,
    /// Warning period of a preempted malleable job.
    pub drain: u64,
    /// Unused part of the last second of a malleable job.
    pub slack: u64,
}

impl Acct {
    pub fn total(&self) -> u64 {
        self.useful + self.lost + self.setup + self.checkpoint + self.drain + self.slack
    }

    pub fn add(&mut self, o: &Acct) {
        self.useful += o.useful;
        self.lost += o.lost;
        self.setup += o.setup;
        self.checkpoint += o.checkpoint;
        self.drain += o.drain;
        self.slack += o.slack;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "snake_case")]
pub enum LogEvent {
    Submit {
        job: JobId,
        kind: JobKind,
    },
    Notice {
        job: JobId,
        estimated_arrival: Secs,
        size: u32,
    },
    /// Actual arrival of an on-demand job; `committed` means its nodes were
    /// secured at that instant.
    Arrive {
        job: JobId,
        committed: bool,
    },
    Start {
        job: JobId,
        nodes: u32,
        /// Owner of the reservation whose idle nodes the job borrows.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reserved_from: Option<JobId>,
        backfilled: bool,
        /// The job ran before and was preempted.
        resumed: bool,
    },
    Checkpoint {
        job: JobId,
    },
    Warn {
        job: JobId,
        owner: JobId,
    },
    Preempt {
        job: JobId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        owner: Option<JobId>,
        acct: Acct,
    },
    Shrink {
        job: JobId,
        from: u32,
        to: u32,
        owner: JobId,
    },
    Expand {
        job: JobId,
        from: u32,
        to: u32,
    },
    Finish {
        job: JobId,
        acct: Acct,
    },
    Timeout {
        job: JobId,
        released: u32,
    },
}

impl LogEvent {
    pub fn job(&self) -> JobId {
        match *self {
            LogEvent::Submit { job, .. }
            | LogEvent::Notice { job, .. }
            | LogEvent::Arrive { job, .. }
            | LogEvent::Start { job, .. }
            | LogEvent::Checkpoint { job }
            | LogEvent::Warn { job, .. }
            | LogEvent::Preempt { job, .. }
            | LogEvent::Shrink { job, .. }
            | LogEvent::Expand { job, .. }
            | LogEvent::Finish { job, .. }
            | LogEvent::Timeout { job, .. } => job,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: Secs,
    #[serde(flatten)]
    pub event: LogEvent,
}

impl LogRecord {
    pub fn new(t: Secs, event: LogEvent) -> Self {
        LogRecord { t, event }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log records always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LogHeader {
    schema_version: u32,
    mechanism: String,
    capacity: u32,
}

/// Sorts a log into a canonical order: by time, then by serialized record.
///
/// Records at the same instant may legitimately be emitted in different
/// orders by different simulators.
pub fn normalize(log: &[LogRecord]) -> Vec<LogRecord> {
    let mut keyed: Vec<(Secs, String, &LogRecord)> = log.iter().map(|r| (r.t, r.to_json(), r)).collect();
    keyed.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    keyed.into_iter().map(|(_, _, r)| r.clone()).collect()
}

pub fn write_event_log<W: Write>(mut out: W, mechanism: &str, capacity: u32, log: &[LogRecord]) -> Result<()> {
    let header = LogHeader { schema_version: LOG_SCHEMA_VERSION, mechanism: mechanism.to_string(), capacity };
    let mut buf = serde_json::to_string(&header)?;
    buf.push('\n');
    for r in log {
        buf.push_str(&r.to_json());
        buf.push('\n');
    }
    out.write_all(buf.as_bytes()).map_err(|e| Error::io("event log", e))
}

/// Reads a log written by [`write_event_log`]; returns mechanism, capacity and records.
pub fn read_event_log(text: &str) -> Result<(String, u32, Vec<LogRecord>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(Error::Schema { line: 1, message: "empty event log".into() })?;
    let header: LogHeader =
        serde_json::from_str(first).map_err(|e| Error::Schema { line: 1, message: e.to_string() })?;
    if header.schema_version != LOG_SCHEMA_VERSION {
        return Err(Error::Schema { line: 1, message: format!("unsupported log version {}", header.schema_version) });
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let r = serde_json::from_str(line).map_err(|e| Error::Schema { line: i + 1, message: e.to_string() })?;
        records.push(r);
    }
    Ok((header.mechanism, header.capacity, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip() {
        let log = vec![
            LogRecord::new(0, LogEvent::Submit { job: 1, kind: JobKind::Rigid }),
            LogRecord::new(
                3,
                LogEvent::Start { job: 1, nodes: 2, reserved_from: Some(7), backfilled: true, resumed: false },
            ),
            LogRecord::new(9, LogEvent::Finish { job: 1, acct: Acct { useful: 12, ..Acct::default() } }),
        ];
        let mut buf = Vec::new();
        write_event_log(&mut buf, "CUA&PAA", 4, &log).unwrap();
        let (m, cap, back) = read_event_log(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!((m.as_str(), cap), ("CUA&PAA", 4));
        assert_eq!(back, log);
        assert!(log[0].to_json().contains("\"ev\":\"submit\""));
    }

    #[test]
    fn normalize_orders_same_instant() {
        let a = LogRecord::new(5, LogEvent::Checkpoint { job: 2 });
        let b = LogRecord::new(5, LogEvent::Checkpoint { job: 1 });
        let c = LogRecord::new(1, LogEvent::Checkpoint { job: 9 });
        assert_eq!(normalize(&[a.clone(), b.clone(), c.clone()]), normalize(&[c, b, a]));
    }
}
