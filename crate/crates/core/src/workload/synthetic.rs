//! Seeded synthetic trace source, used when no production trace is at hand.
//!
//! Jobs come in per-project bursts (sessions). Each project has a typical size
//! and runtime; session start times are spread uniformly over a span chosen so
//! that the offered load hits `target_load`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::RawTraceJob;
use crate::Secs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTraceConfig {
    pub jobs: usize,
    pub projects: usize,
    pub system_size: u32,
    /// Offered node-seconds over capacity node-seconds of the submission span.
    pub target_load: f64,
    pub mean_session_jobs: f64,
    pub max_runtime: Secs,
    pub seed: u64,
}

impl Default for SyntheticTraceConfig {
    fn default() -> Self {
        SyntheticTraceConfig {
            jobs: 2000,
            projects: 160,
            system_size: 512,
            target_load: 0.95,
            mean_session_jobs: 4.0,
            max_runtime: 86_400,
            seed: 0,
        }
    }
}

struct Project {
    weight: f64,
    size_log2: f64,
    runtime_median: f64,
}

/// (project, offset within session, size, runtime, estimate)
type Draw = (usize, Secs, u32, Secs, Secs);

pub fn synthesize_trace(cfg: &SyntheticTraceConfig) -> Vec<RawTraceJob> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max_log2 = (cfg.system_size.max(2) as f64).log2();
    let mut projects: Vec<Project> = (0..cfg.projects.max(1))
        .map(|i| Project {
            weight: 1.0 / (i as f64 + 1.0).powf(0.8),
            size_log2: rng.gen_range(0.0..(max_log2 - 1.0).max(0.5)),
            runtime_median: 10f64.powf(rng.gen_range(2.8..4.5)),
        })
        .collect();
    // Busy projects tend to run many small jobs; capability projects submit few large ones.
    let mut sizes: Vec<f64> = projects.iter().map(|p| p.size_log2).collect();
    sizes.sort_by(f64::total_cmp);
    for (p, s) in projects.iter_mut().zip(sizes) {
        p.size_log2 = s;
    }
    let total_weight: f64 = projects.iter().map(|p| p.weight).sum();
    let size_jitter = LogNormal::new(0.0, 0.5).unwrap();
    let runtime_jitter = LogNormal::new(0.0, 0.8).unwrap();

    let mut sessions: Vec<Vec<Draw>> = Vec::new();
    let mut produced = 0;
    let mut offered = 0.0;
    while produced < cfg.jobs {
        let mut pick = rng.gen::<f64>() * total_weight;
        let mut project = projects.len() - 1;
        for (i, p) in projects.iter().enumerate() {
            if pick < p.weight {
                project = i;
                break;
            }
            pick -= p.weight;
        }
        let p = &projects[project];
        let stop = 1.0 / cfg.mean_session_jobs.max(1.0);
        let mut session = Vec::new();
        let mut offset = 0;
        loop {
            let size = (2f64.powf(p.size_log2) * size_jitter.sample(&mut rng))
                .round()
                .clamp(1.0, cfg.system_size as f64) as u32;
            let runtime = (p.runtime_median * runtime_jitter.sample(&mut rng))
                .round()
                .clamp(60.0, cfg.max_runtime as f64) as Secs;
            let estimate =
                ((runtime as f64 * rng.gen_range(1.0..2.5)).ceil() as Secs).min(cfg.max_runtime).max(runtime);
            offered += size as f64 * runtime as f64;
            session.push((project, offset, size, runtime, estimate));
            produced += 1;
            offset += rng.gen_range(10..600);
            if produced >= cfg.jobs || rng.gen::<f64>() < stop {
                break;
            }
        }
        sessions.push(session);
    }

    let span = offered / (cfg.target_load.max(1e-3) * cfg.system_size as f64);
    let mut starts: Vec<Secs> = (0..sessions.len()).map(|_| (rng.gen::<f64>() * span) as Secs).collect();
    starts.sort_unstable();

    let mut jobs: Vec<RawTraceJob> = sessions
        .into_iter()
        .zip(starts)
        .flat_map(|(session, start)| {
            session.into_iter().map(move |(project, offset, size, runtime, estimate)| {
                (start + offset, project, size, runtime, estimate)
            })
        })
        .map(|(submit, project, size, runtime, estimate)| RawTraceJob {
            job_id: 0,
            submit_time: submit,
            runtime_estimate: estimate,
            actual_runtime: runtime,
            size,
            project: format!("g{project}"),
        })
        .collect();
    jobs.sort_by_key(|j| (j.submit_time, j.project.clone()));
    for (i, j) in jobs.iter_mut().enumerate() {
        j.job_id = i as u64 + 1;
    }
    jobs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let cfg = SyntheticTraceConfig { jobs: 300, seed: 7, ..Default::default() };
        let a = synthesize_trace(&cfg);
        assert_eq!(a.len(), 300);
        assert_eq!(a, synthesize_trace(&cfg));
        assert!(a.iter().all(|j| j.size >= 1 && j.size <= 512 && j.actual_runtime <= j.runtime_estimate));
        assert!(a.windows(2).all(|w| w[0].submit_time <= w[1].submit_time));
    }

    #[test]
    fn offered_load_near_target() {
        let cfg = SyntheticTraceConfig { jobs: 2000, seed: 3, target_load: 0.8, ..Default::default() };
        let jobs = synthesize_trace(&cfg);
        let work: f64 = jobs.iter().map(|j| j.size as f64 * j.actual_runtime as f64).sum();
        let span = (jobs.last().unwrap().submit_time - jobs[0].submit_time) as f64;
        let load = work / (span * 512.0);
        assert!((0.6..1.1).contains(&load), "load {load}");
    }
}
