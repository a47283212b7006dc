use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{derive_t_single, JobKind, JobSpec, NoticeCategory, NoticeProfile, RawTraceJob, WorkloadConfig};
use crate::{Error, Result, Secs};

/// Job-type and notice statistics of a generated workload.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub projects: BTreeMap<String, usize>,
    pub jobs: BTreeMap<String, usize>,
    /// Node-hours requested per kind (at the submitted width).
    pub node_hours: BTreeMap<String, f64>,
    pub notice_categories: BTreeMap<String, usize>,
    pub reassigned_large_on_demand: usize,
    pub clamped_to_system: usize,
    pub warnings: Vec<String>,
}

/// Splits `total` items over `fractions` with largest-remainder rounding.
pub(crate) fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    // Stable sort keeps the listed order on equal remainders.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap()
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn ceil_fraction(fraction: f64, n: u32) -> u32 {
    ((fraction * n as f64 - 1e-9).ceil() as u32).clamp(1, n)
}

fn uniform_fraction(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn draw_category(rng: &mut ChaCha8Rng, weights: [f64; 4]) -> NoticeCategory {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (cat, w) in NoticeCategory::ALL.into_iter().zip(weights) {
        acc += w;
        if u < acc {
            return cat;
        }
    }
    // Rounding can leave u just above the cumulative sum.
    NoticeCategory::ALL
        .into_iter()
        .zip(weights)
        .rev()
        .find(|(_, w)| *w > 0.0)
        .map(|(c, _)| c)
        .unwrap_or(NoticeCategory::NoNotice)
}

/// Every call consumes the same number of draws, so traces generated with
/// different notice mixes stay paired job by job.
fn draw_notice(rng: &mut ChaCha8Rng, cfg: &WorkloadConfig, arrival: Secs, size: u32, estimate: Secs) -> NoticeProfile {
    let category = draw_category(rng, cfg.notice_mix.weights());
    let lead = rng.gen_range(cfg.notice_lead.0..=cfg.notice_lead.1);
    let offset: f64 = rng.gen();
    let (notice_time, estimated_arrival) = match category {
        NoticeCategory::NoNotice => (None, arrival),
        NoticeCategory::Accurate => (Some(arrival - lead), arrival),
        NoticeCategory::Early => {
            let since_notice = 1 + (offset * (lead - 1) as f64) as Secs;
            let notice = arrival - since_notice;
            (Some(notice), notice + lead)
        }
        NoticeCategory::Late => {
            let delay = 1 + (offset * cfg.late_window as f64) as Secs;
            let estimated = arrival - delay;
            (Some(estimated - lead), estimated)
        }
    };
    NoticeProfile {
        category,
        notice_time,
        estimated_arrival,
        actual_arrival: arrival,
        estimated_size: size,
        estimated_runtime: estimate,
    }
}

/// Assigns job types per project and annotates jobs with setup times, malleable
/// bounds and on-demand notice profiles.
///
/// The output is a pure function of `(raw, cfg)`.
pub fn generate_workload(raw: &[RawTraceJob], cfg: &WorkloadConfig) -> Result<(Vec<JobSpec>, GenerateSummary)> {
    cfg.validate()?;
    if raw.is_empty() {
        return Err(Error::Config("cannot generate a workload from an empty trace".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    // Notices draw from their own stream so the notice mix leaves everything else unchanged.
    let mut notice_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    notice_rng.set_stream(1);
    let mut summary = GenerateSummary::default();

    let mut projects: Vec<&str> = raw.iter().map(|j| j.project.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    projects.shuffle(&mut rng);
    let f = cfg.project_type_fractions;
    let counts = largest_remainder(projects.len(), &[f.on_demand, f.rigid, f.malleable]);
    for (count, (frac, kind)) in
        counts.iter().zip([(f.on_demand, "on_demand"), (f.rigid, "rigid"), (f.malleable, "malleable")])
    {
        if frac > 0.0 && *count == 0 {
            let msg = format!("{} projects cannot realize a {kind} fraction of {frac}", projects.len());
            warn!("{msg}");
            summary.warnings.push(msg);
        }
    }
    let mut project_kind: BTreeMap<&str, JobKind> = BTreeMap::new();
    for (i, p) in projects.iter().enumerate() {
        let kind = if i < counts[0] {
            JobKind::OnDemand
        } else if i < counts[0] + counts[1] {
            JobKind::Rigid
        } else {
            JobKind::Malleable
        };
        project_kind.insert(p, kind);
        *summary.projects.entry(kind.as_str().to_string()).or_default() += 1;
    }

    let mut order: Vec<&RawTraceJob> = raw.iter().collect();
    order.sort_by_key(|j| (j.submit_time, j.job_id));

    let threshold = cfg.large_on_demand_threshold();
    let mut specs = Vec::with_capacity(raw.len());
    for job in order {
        let mut kind = project_kind[job.project.as_str()];
        let mut size = job.size;
        if size > cfg.system_size {
            size = cfg.system_size;
            summary.clamped_to_system += 1;
        }
        if kind == JobKind::OnDemand && size as f64 > threshold {
            kind = if rng.gen_bool(0.5) { JobKind::Rigid } else { JobKind::Malleable };
            summary.reassigned_large_on_demand += 1;
        }
        let runtime = job.actual_runtime.max(1);
        let estimate = job.runtime_estimate.max(runtime);
        let setup = match kind {
            JobKind::Rigid => (uniform_fraction(&mut rng, cfg.rigid_setup_fraction) * runtime as f64).round() as Secs,
            JobKind::Malleable => {
                (uniform_fraction(&mut rng, cfg.malleable_setup_fraction) * runtime as f64).round() as Secs
            }
            JobKind::OnDemand => cfg.on_demand_setup,
        }
        .min(runtime - 1)
        .max(0);
        let actual_work = derive_t_single(runtime, setup, size);
        let (n_min, n_max) = match kind {
            JobKind::Malleable => (Some(ceil_fraction(cfg.shrink_fraction, size)), Some(size)),
            _ => (None, None),
        };
        let notice =
            (kind == JobKind::OnDemand).then(|| draw_notice(&mut notice_rng, cfg, job.submit_time, size, estimate));
        if let Some(n) = &notice {
            let key = serde_json::to_value(n.category).unwrap().as_str().unwrap().to_string();
            *summary.notice_categories.entry(key).or_default() += 1;
        }
        *summary.jobs.entry(kind.as_str().to_string()).or_default() += 1;
        *summary.node_hours.entry(kind.as_str().to_string()).or_default() += size as f64 * runtime as f64 / 3600.0;
        specs.push(JobSpec {
            job_id: job.job_id,
            project: job.project.clone(),
            submit_time: job.submit_time,
            kind,
            size,
            n_min,
            n_max,
            runtime_estimate: estimate,
            actual_work,
            setup_time: setup,
            notice,
        });
    }
    Ok((specs, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::TypeFractions;

    fn raw(id: u64, project: &str, size: u32) -> RawTraceJob {
        RawTraceJob {
            job_id: id,
            submit_time: id as Secs * 100,
            runtime_estimate: 4000,
            actual_runtime: 3000,
            size,
            project: project.into(),
        }
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(largest_remainder(10, &[0.1, 0.6, 0.3]), vec![1, 6, 3]);
        assert_eq!(largest_remainder(7, &[0.1, 0.6, 0.3]), vec![1, 4, 2]);
        assert_eq!(largest_remainder(1, &[0.0, 1.0, 0.0]), vec![0, 1, 0]);
        assert_eq!(largest_remainder(0, &[0.5, 0.5]), vec![0, 0]);
    }

    #[test]
    fn n_min_ceiling_never_breaks_floor() {
        assert_eq!(ceil_fraction(0.2, 10), 2);
        assert_eq!(ceil_fraction(0.2, 15), 3);
        assert_eq!(ceil_fraction(0.2, 11), 3);
        assert_eq!(ceil_fraction(0.2, 1), 1);
        for n in 1..500 {
            let m = ceil_fraction(0.2, n);
            assert!(m as f64 >= 0.2 * n as f64 - 1e-9, "n={n}");
            assert!(m == 1 || ((m - 1) as f64) < 0.2 * n as f64 - 1e-9, "n={n}");
        }
    }

    #[test]
    fn degenerate_fractions_make_everything_rigid() {
        let cfg = WorkloadConfig {
            system_size: 64,
            project_type_fractions: TypeFractions { on_demand: 0.0, rigid: 1.0, malleable: 0.0 },
            ..WorkloadConfig::default()
        };
        let jobs: Vec<_> = (0..20).map(|i| raw(i, "only", 4)).collect();
        let (specs, _) = generate_workload(&jobs, &cfg).unwrap();
        assert!(specs.iter().all(|s| s.kind == JobKind::Rigid));
    }

    #[test]
    fn oversized_on_demand_is_retyped() {
        let cfg = WorkloadConfig {
            system_size: 100,
            project_type_fractions: TypeFractions { on_demand: 1.0, rigid: 0.0, malleable: 0.0 },
            ..WorkloadConfig::default()
        };
        let jobs = vec![raw(1, "big", 60), raw(2, "big", 10)];
        let (specs, summary) = generate_workload(&jobs, &cfg).unwrap();
        assert!(matches!(specs[0].kind, JobKind::Rigid | JobKind::Malleable));
        assert_eq!(specs[1].kind, JobKind::OnDemand);
        assert_eq!(summary.reassigned_large_on_demand, 1);
    }

    #[test]
    fn malleable_bounds_and_work() {
        let cfg = WorkloadConfig {
            system_size: 100,
            project_type_fractions: TypeFractions { on_demand: 0.0, rigid: 0.0, malleable: 1.0 },
            ..WorkloadConfig::default()
        };
        let (specs, _) = generate_workload(&[raw(1, "m", 15)], &cfg).unwrap();
        let s = &specs[0];
        assert_eq!((s.n_min, s.n_max), (Some(3), Some(15)));
        assert_eq!(s.actual_work, (3000 - s.setup_time) as u64 * 15);
        assert!(s.setup_time <= 150);
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(generate_workload(&[], &WorkloadConfig::default()).is_err());
    }
}
