//! Job descriptions and workload ingestion/synthesis.

mod generate;
mod native;
mod swf;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::{Error, JobId, Result, Secs};

pub use generate::{generate_workload, GenerateSummary};
pub use native::{parse_native, read_native, to_native_string, write_native, NATIVE_SCHEMA_VERSION};
pub use swf::{parse_swf, read_swf, write_swf, SwfStats, SwfTrace};
pub use synthetic::{synthesize_trace, SyntheticTraceConfig};

/// One record of a real scheduler trace, before job types are assigned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTraceJob {
    pub job_id: JobId,
    pub submit_time: Secs,
    pub runtime_estimate: Secs,
    pub actual_runtime: Secs,
    pub size: u32,
    pub project: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Rigid,
    OnDemand,
    Malleable,
}

impl JobKind {
    pub const ALL: [JobKind; 3] = [JobKind::Rigid, JobKind::OnDemand, JobKind::Malleable];

    pub fn as_str(self) -> &'static str {
        match self {
            JobKind::Rigid => "rigid",
            JobKind::OnDemand => "on_demand",
            JobKind::Malleable => "malleable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoticeCategory {
    NoNotice,
    Accurate,
    Early,
    Late,
}

impl NoticeCategory {
    pub const ALL: [NoticeCategory; 4] =
        [NoticeCategory::NoNotice, NoticeCategory::Accurate, NoticeCategory::Early, NoticeCategory::Late];
}

/// What an on-demand job announces ahead of its arrival, and when it actually shows up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoticeProfile {
    pub category: NoticeCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice_time: Option<Secs>,
    pub estimated_arrival: Secs,
    pub actual_arrival: Secs,
    pub estimated_size: u32,
    pub estimated_runtime: Secs,
}

impl NoticeProfile {
    /// Checks the ordering constraints of the profile's category.
    pub fn validate(&self, late_window: Secs) -> std::result::Result<(), String> {
        match self.category {
            NoticeCategory::NoNotice => {
                if self.notice_time.is_some() {
                    return Err("no_notice profile carries a notice_time".into());
                }
            }
            NoticeCategory::Accurate => {
                let notice = self.notice_time.ok_or("accurate profile without notice_time")?;
                if self.actual_arrival != self.estimated_arrival || notice >= self.actual_arrival {
                    return Err("accurate profile must arrive exactly at its estimate, after the notice".into());
                }
            }
            NoticeCategory::Early => {
                let notice = self.notice_time.ok_or("early profile without notice_time")?;
                if !(notice < self.actual_arrival && self.actual_arrival < self.estimated_arrival) {
                    return Err("early profile must satisfy notice < arrival < estimated arrival".into());
                }
            }
            NoticeCategory::Late => {
                let notice = self.notice_time.ok_or("late profile without notice_time")?;
                let delay = self.actual_arrival - self.estimated_arrival;
                if !(notice < self.estimated_arrival && delay > 0 && delay <= late_window) {
                    return Err("late profile must arrive within the late window after its estimate".into());
                }
            }
        }
        Ok(())
    }
}

/// Immutable description of one submitted job.
///
/// `actual_work` is hidden from the scheduler; it is the node-seconds of
/// computation the job needs beyond its setup. For rigid and on-demand jobs it
/// is `size * compute_seconds`; for malleable jobs it is the single-node time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub job_id: JobId,
    pub project: String,
    pub submit_time: Secs,
    pub kind: JobKind,
    /// Requested nodes; equals `n_max` for malleable jobs.
    pub size: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_min: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    /// Wall-clock estimate including setup (at `n_max` for malleable jobs).
    pub runtime_estimate: Secs,
    pub actual_work: u64,
    pub setup_time: Secs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<NoticeProfile>,
}

impl JobSpec {
    /// Node count the job was submitted with (the maximum for malleable jobs).
    pub fn width(&self) -> u32 {
        match self.kind {
            JobKind::Malleable => self.n_max.unwrap_or(self.size),
            _ => self.size,
        }
    }

    pub fn min_width(&self) -> u32 {
        match self.kind {
            JobKind::Malleable => self.n_min.unwrap_or(self.size),
            _ => self.size,
        }
    }

    /// Seconds of computation for a fixed-size job.
    pub fn compute_time(&self) -> Secs {
        (self.actual_work / self.size.max(1) as u64) as Secs
    }

    /// Node-seconds of computation the user's estimate implies.
    pub fn estimated_work(&self) -> u64 {
        (self.runtime_estimate - self.setup_time).max(0) as u64 * self.width() as u64
    }

    /// Single-node runtime of a malleable job.
    pub fn t_single(&self) -> u64 {
        self.actual_work
    }

    /// Time the job enters the system (actual arrival for on-demand jobs).
    pub fn arrival_time(&self) -> Secs {
        match &self.notice {
            Some(n) => n.actual_arrival,
            None => self.submit_time,
        }
    }

    /// Structural checks shared by the native parser and the generator tests.
    pub fn validate(&self, late_window: Secs) -> std::result::Result<(), String> {
        if self.size == 0 {
            return Err("size must be at least 1".into());
        }
        if self.setup_time < 0 {
            return Err("setup_time must be non-negative".into());
        }
        match self.kind {
            JobKind::Malleable => {
                let n_min = self.n_min.ok_or("malleable job is missing field `n_min`")?;
                let n_max = self.n_max.ok_or("malleable job is missing field `n_max`")?;
                if !(1 <= n_min && n_min <= n_max) {
                    return Err(format!("need 1 <= n_min <= n_max, got {n_min}..{n_max}"));
                }
                if self.size != n_max {
                    return Err("malleable size must equal n_max".into());
                }
                if self.actual_work == 0 {
                    return Err("actual_work must be positive".into());
                }
            }
            JobKind::Rigid | JobKind::OnDemand => {
                if self.n_min.is_some() || self.n_max.is_some() {
                    return Err("n_min/n_max are only valid for malleable jobs".into());
                }
                if self.actual_work == 0 || !self.actual_work.is_multiple_of(self.size as u64) {
                    return Err("actual_work must be a positive multiple of size".into());
                }
            }
        }
        if self.estimated_work() < self.actual_work {
            return Err("runtime_estimate is shorter than the actual runtime".into());
        }
        match (self.kind, &self.notice) {
            (JobKind::OnDemand, Some(n)) => {
                if n.actual_arrival != self.submit_time {
                    return Err("on-demand submit_time must equal notice.actual_arrival".into());
                }
                n.validate(late_window)?;
            }
            (JobKind::OnDemand, None) => return Err("on-demand job is missing field `notice`".into()),
            (_, Some(_)) => return Err("only on-demand jobs carry a notice".into()),
            (_, None) => {}
        }
        Ok(())
    }
}

/// Node-seconds a malleable job needs given its runtime at `n_max`.
///
/// Runtime at `n` nodes is then `work / n + setup`.
pub fn derive_t_single(runtime_at_max: Secs, setup: Secs, n_max: u32) -> u64 {
    (runtime_at_max - setup).max(0) as u64 * n_max as u64
}

/// Wall-clock runtime of a malleable job with `work` node-seconds on `n` nodes.
pub fn malleable_runtime(work: u64, n: u32, setup: Secs) -> Secs {
    work.div_ceil(n as u64) as Secs + setup
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TypeFractions {
    pub on_demand: f64,
    pub rigid: f64,
    pub malleable: f64,
}

impl Default for TypeFractions {
    fn default() -> Self {
        TypeFractions { on_demand: 0.10, rigid: 0.60, malleable: 0.30 }
    }
}

/// Fractions of on-demand jobs per notice category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoticeMix {
    pub no_notice: f64,
    pub accurate: f64,
    pub early: f64,
    pub late: f64,
}

impl Default for NoticeMix {
    fn default() -> Self {
        NoticeMix::preset("W5").unwrap()
    }
}

impl NoticeMix {
    pub const PRESETS: [&'static str; 5] = ["W1", "W2", "W3", "W4", "W5"];

    /// The five notice mixes used throughout the evaluation.
    pub fn preset(name: &str) -> Option<NoticeMix> {
        let (a, b, c, d) = match name.to_ascii_uppercase().as_str() {
            "W1" => (0.70, 0.10, 0.10, 0.10),
            "W2" => (0.10, 0.70, 0.10, 0.10),
            "W3" => (0.10, 0.10, 0.70, 0.10),
            "W4" => (0.10, 0.10, 0.10, 0.70),
            "W5" => (0.25, 0.25, 0.25, 0.25),
            _ => return None,
        };
        Some(NoticeMix { no_notice: a, accurate: b, early: c, late: d })
    }

    pub fn weights(&self) -> [f64; 4] {
        [self.no_notice, self.accurate, self.early, self.late]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    /// Nodes in the target system; bounds on-demand sizes.
    pub system_size: u32,
    pub project_type_fractions: TypeFractions,
    pub notice_mix: NoticeMix,
    /// Lead of the advance notice ahead of the estimated arrival, inclusive range.
    pub notice_lead: (Secs, Secs),
    pub late_window: Secs,
    pub shrink_fraction: f64,
    pub rigid_setup_fraction: (f64, f64),
    pub malleable_setup_fraction: (f64, f64),
    pub on_demand_setup: Secs,
    /// On-demand jobs larger than this fraction of the system are retyped.
    pub large_on_demand_fraction: f64,
    pub rng_seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            system_size: 4392,
            project_type_fractions: TypeFractions::default(),
            notice_mix: NoticeMix::default(),
            notice_lead: (900, 1800),
            late_window: 1800,
            shrink_fraction: 0.20,
            rigid_setup_fraction: (0.05, 0.10),
            malleable_setup_fraction: (0.00, 0.05),
            on_demand_setup: 0,
            large_on_demand_fraction: 0.5,
            rng_seed: 0,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        let f = &self.project_type_fractions;
        let mix = self.notice_mix.weights();
        let fractions = [
            f.on_demand,
            f.rigid,
            f.malleable,
            self.shrink_fraction,
            self.rigid_setup_fraction.0,
            self.rigid_setup_fraction.1,
            self.malleable_setup_fraction.0,
            self.malleable_setup_fraction.1,
            self.large_on_demand_fraction,
        ];
        if !fractions.iter().chain(mix.iter()).all(|&x| in_unit(x)) {
            return Err(Error::Config("all fractions must lie in [0, 1]".into()));
        }
        if (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("notice_mix must sum to 1".into()));
        }
        if (f.on_demand + f.rigid + f.malleable - 1.0).abs() > 1e-9 {
            return Err(Error::Config("project_type_fractions must sum to 1".into()));
        }
        if self.rigid_setup_fraction.0 > self.rigid_setup_fraction.1
            || self.malleable_setup_fraction.0 > self.malleable_setup_fraction.1
        {
            return Err(Error::Config("setup fraction ranges must be ordered".into()));
        }
        if self.notice_lead.0 < 2 || self.notice_lead.0 > self.notice_lead.1 {
            return Err(Error::Config("notice_lead must be an ordered range of at least 2 s".into()));
        }
        if self.late_window < 1 || self.system_size == 0 || self.on_demand_setup < 0 {
            return Err(Error::Config("late_window and system_size must be positive".into()));
        }
        Ok(())
    }

    /// On-demand jobs above this size are reassigned to rigid or malleable.
    pub fn large_on_demand_threshold(&self) -> f64 {
        self.large_on_demand_fraction * self.system_size as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_single_matches_linear_speedup_model() {
        let work = derive_t_single(110, 10, 10);
        assert_eq!(work, 1000);
        assert_eq!(malleable_runtime(work, 5, 10), 210);

        assert_eq!(derive_t_single(100, 0, 1), 100);

        let work = derive_t_single(400, 40, 4);
        assert_eq!(work, 1440);
        assert_eq!(malleable_runtime(work, 2, 40), 760);
    }

    #[test]
    fn presets_sum_to_one() {
        for name in NoticeMix::PRESETS {
            let w = NoticeMix::preset(name).unwrap().weights();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{name}");
        }
        assert_eq!(NoticeMix::preset("W1").unwrap().no_notice, 0.70);
        assert!(NoticeMix::preset("W6").is_none());
    }

    #[test]
    fn config_rejects_bad_mix() {
        let mut cfg = WorkloadConfig::default();
        cfg.notice_mix.late = 0.5;
        assert!(cfg.validate().is_err());
        assert!(WorkloadConfig::default().validate().is_ok());
    }
}
