//! System constants and mechanism selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Secs};

/// What the scheduler does when an on-demand job sends advance notice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoticeStrategy {
    /// Ignore the notice.
    N,
    /// Collect nodes released by finishing jobs until the job arrives.
    Cua,
    /// Collect expected releases, and preempt before the predicted arrival.
    Cup,
}

/// How missing nodes are found when an on-demand job arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArrivalStrategy {
    /// Preempt running jobs in ascending order of preemption overhead.
    Paa,
    /// Shrink running malleable jobs evenly; fall back to `Paa`.
    Spaa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    /// Plain FCFS/EASY with no special treatment of job types.
    Baseline,
    Hybrid {
        notice: NoticeStrategy,
        arrival: ArrivalStrategy,
    },
}

impl Mechanism {
    pub const SIX: [Mechanism; 6] = [
        Mechanism::Hybrid { notice: NoticeStrategy::N, arrival: ArrivalStrategy::Paa },
        Mechanism::Hybrid { notice: NoticeStrategy::N, arrival: ArrivalStrategy::Spaa },
        Mechanism::Hybrid { notice: NoticeStrategy::Cua, arrival: ArrivalStrategy::Paa },
        Mechanism::Hybrid { notice: NoticeStrategy::Cua, arrival: ArrivalStrategy::Spaa },
        Mechanism::Hybrid { notice: NoticeStrategy::Cup, arrival: ArrivalStrategy::Paa },
        Mechanism::Hybrid { notice: NoticeStrategy::Cup, arrival: ArrivalStrategy::Spaa },
    ];

    pub fn name(self) -> &'static str {
        use ArrivalStrategy::*;
        use NoticeStrategy::*;
        match self {
            Mechanism::Baseline => "FCFS-EASY",
            Mechanism::Hybrid { notice: N, arrival: Paa } => "N&PAA",
            Mechanism::Hybrid { notice: N, arrival: Spaa } => "N&SPAA",
            Mechanism::Hybrid { notice: Cua, arrival: Paa } => "CUA&PAA",
            Mechanism::Hybrid { notice: Cua, arrival: Spaa } => "CUA&SPAA",
            Mechanism::Hybrid { notice: Cup, arrival: Paa } => "CUP&PAA",
            Mechanism::Hybrid { notice: Cup, arrival: Spaa } => "CUP&SPAA",
        }
    }

    pub fn notice(self) -> Option<NoticeStrategy> {
        match self {
            Mechanism::Baseline => None,
            Mechanism::Hybrid { notice, .. } => Some(notice),
        }
    }

    pub fn arrival(self) -> Option<ArrivalStrategy> {
        match self {
            Mechanism::Baseline => None,
            Mechanism::Hybrid { arrival, .. } => Some(arrival),
        }
    }

    pub fn is_baseline(self) -> bool {
        self == Mechanism::Baseline
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_uppercase();
        if wanted == "FCFS-EASY" || wanted == "FCFS/EASY" || wanted == "BASELINE" {
            return Ok(Mechanism::Baseline);
        }
        Mechanism::SIX.into_iter().find(|m| m.name() == wanted).ok_or_else(|| Error::UnknownMechanism(s.to_string()))
    }
}

impl Serialize for Mechanism {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Mechanism {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Cluster and job-overhead constants for one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub capacity: u32,
    /// Mean time between failures fed to the checkpoint interval model.
    pub mtbf: Secs,
    pub checkpoint_cost_small: Secs,
    pub checkpoint_cost_large: Secs,
    /// Jobs with at least this many nodes pay `checkpoint_cost_large`.
    pub checkpoint_node_threshold: u32,
    /// Multiplier on the optimal checkpoint interval (0.5 = twice as often).
    pub checkpoint_scale: f64,
    /// Grace a malleable job gets to save its state before yielding nodes.
    pub warning_duration: Secs,
    /// Reservations are dropped this long after the estimated arrival.
    pub reservation_grace: Secs,
    /// CUP preempts rigid victims right after their next checkpoint.
    pub cup_checkpoint_aligned: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            capacity: 4392,
            mtbf: 86_400,
            checkpoint_cost_small: 600,
            checkpoint_cost_large: 1200,
            checkpoint_node_threshold: 1024,
            checkpoint_scale: 1.0,
            warning_duration: 120,
            reservation_grace: 600,
            cup_checkpoint_aligned: true,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capacity < 1 {
            return Err(Error::Config("capacity must be at least 1".into()));
        }
        if !(self.checkpoint_scale > 0.0 && self.checkpoint_scale.is_finite()) {
            return Err(Error::Config("checkpoint_scale must be positive".into()));
        }
        if self.mtbf < 1 || self.checkpoint_cost_small < 1 || self.checkpoint_cost_large < 1 {
            return Err(Error::Config("mtbf and checkpoint costs must be positive".into()));
        }
        if self.warning_duration < 1 || self.reservation_grace < 0 {
            return Err(Error::Config("warning_duration must be positive, reservation_grace non-negative".into()));
        }
        Ok(())
    }

    /// Time to write one checkpoint for a job on `nodes` nodes.
    pub fn checkpoint_cost(&self, nodes: u32) -> Secs {
        if nodes < self.checkpoint_node_threshold {
            self.checkpoint_cost_small
        } else {
            self.checkpoint_cost_large
        }
    }

    /// Compute seconds between checkpoints for a rigid job on `nodes` nodes.
    pub fn checkpoint_interval(&self, nodes: u32) -> Secs {
        daly_interval(self.checkpoint_cost(nodes), self.mtbf, self.checkpoint_scale)
    }
}

/// First-order optimal checkpoint interval `scale * sqrt(2 * cost * mtbf)`,
/// rounded to whole seconds and at least one second.
pub fn daly_interval(cost: Secs, mtbf: Secs, scale: f64) -> Secs {
    let tau = scale * (2.0 * cost as f64 * mtbf as f64).sqrt();
    (tau.round() as Secs).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mechanism_names_round_trip() {
        for m in Mechanism::SIX {
            assert_eq!(m.name().parse::<Mechanism>().unwrap(), m);
        }
        assert_eq!("cua&spaa".parse::<Mechanism>().unwrap().name(), "CUA&SPAA");
        assert_eq!("FCFS-EASY".parse::<Mechanism>().unwrap(), Mechanism::Baseline);
        let err = "CUA&FOO".parse::<Mechanism>().unwrap_err().to_string();
        for m in Mechanism::SIX {
            assert!(err.contains(m.name()), "{err}");
        }
    }

    #[test]
    fn daly_interval_values() {
        // sqrt(2 * 600 * 86400) = 10182.3
        assert_eq!(daly_interval(600, 86_400, 1.0), 10_182);
        assert_eq!(daly_interval(2, 1, 1.0), 2);
        assert_eq!(daly_interval(600, 86_400, 0.5), 5_091);
    }

    #[test]
    fn checkpoint_cost_threshold() {
        let cfg = SystemConfig::default();
        assert_eq!(cfg.checkpoint_cost(1023), 600);
        assert_eq!(cfg.checkpoint_cost(1024), 1200);
        assert_eq!(cfg.checkpoint_cost(2000), 1200);
    }
}
