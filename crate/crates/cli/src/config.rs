//! The hierarchical config file. Every key is optional and falls back to the
//! built-in defaults, so an empty file is the stock configuration.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hybrid_sched::workload::{NoticeMix, SyntheticTraceConfig};
use hybrid_sched::{Mechanism, SystemConfig, WorkloadConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct FileConfig {
    pub system: SystemConfig,
    /// `system_size` here is ignored; it always follows `system.capacity`.
    pub workload: WorkloadConfig,
    /// `system_size` here is ignored too.
    pub trace: SyntheticTraceConfig,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mechanisms: Vec<Mechanism>,
    pub workloads: Vec<String>,
    pub seeds: Vec<u64>,
    pub checkpoint_scales: Vec<f64>,
    pub trace_file: Option<PathBuf>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            mechanisms: std::iter::once(Mechanism::Baseline).chain(Mechanism::SIX).collect(),
            workloads: NoticeMix::PRESETS.iter().map(|s| s.to_string()).collect(),
            seeds: (0..10).collect(),
            checkpoint_scales: vec![1.0],
            trace_file: None,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => FileConfig::default(),
        };
        cfg.set_capacity(cfg.system.capacity);
        Ok(cfg)
    }

    pub fn set_capacity(&mut self, capacity: u32) {
        self.system.capacity = capacity;
        self.workload.system_size = capacity;
        self.trace.system_size = capacity;
    }
}
