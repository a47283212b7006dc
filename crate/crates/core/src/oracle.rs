//! Brute-force reference simulator for tiny instances.
//!
//! The oracle steps the clock one second at a time, keeps every job's state in
//! plain counters and re-derives each decision from scratch. It shares no
//! logic with the engine, the ledger or the planners, only the job models and
//! the log format, so agreement between the two is meaningful evidence.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ArrivalStrategy, Mechanism, NoticeStrategy};
use crate::engine::{normalize, Acct, LogEvent, LogRecord, SimOutput};
use crate::error::{Error, Result};
use crate::metrics::WasteBreakdown;
use crate::workload::{JobKind, JobSpec, NoticeCategory, NoticeProfile};
use crate::{JobId, Secs, SystemConfig};

pub const MAX_CAPACITY: u32 = 4;
pub const MAX_JOBS: usize = 6;
/// The oracle refuses to step past this many seconds.
pub const MAX_SECONDS: Secs = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyInstance {
    pub config: SystemConfig,
    pub jobs: Vec<JobSpec>,
}

impl TinyInstance {
    pub fn check_bounds(&self) -> Result<()> {
        if self.config.capacity > MAX_CAPACITY {
            return Err(Error::OracleBounds(format!("capacity {} > {MAX_CAPACITY}", self.config.capacity)));
        }
        if self.jobs.len() > MAX_JOBS {
            return Err(Error::OracleBounds(format!("{} jobs > {MAX_JOBS}", self.jobs.len())));
        }
        Ok(())
    }

    /// Random instance with small overheads so every mechanism path gets exercised.
    pub fn random(seed: u64) -> TinyInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cap = rng.gen_range(1..=MAX_CAPACITY);
        let config = SystemConfig {
            capacity: cap,
            mtbf: rng.gen_range(1..=6),
            checkpoint_cost_small: rng.gen_range(1..=3),
            checkpoint_cost_large: rng.gen_range(2..=4),
            checkpoint_node_threshold: 3,
            checkpoint_scale: 1.0,
            warning_duration: rng.gen_range(1..=4),
            reservation_grace: rng.gen_range(0..=4),
            cup_checkpoint_aligned: rng.gen_bool(0.7),
        };
        let n = rng.gen_range(1..=MAX_JOBS);
        let mut jobs = Vec::with_capacity(n);
        for id in 1..=n as JobId {
            let submit = rng.gen_range(0..=15);
            let roll: f64 = rng.gen();
            let spec = if roll < 0.4 {
                let size = rng.gen_range(1..=cap);
                let setup = rng.gen_range(0..=3);
                let compute = rng.gen_range(1..=12);
                JobSpec {
                    job_id: id,
                    project: "rigid".into(),
                    submit_time: submit,
                    kind: JobKind::Rigid,
                    size,
                    n_min: None,
                    n_max: None,
                    runtime_estimate: setup + compute + rng.gen_range(0..=5),
                    actual_work: size as u64 * compute as u64,
                    setup_time: setup,
                    notice: None,
                }
            } else if roll < 0.7 {
                let n_max = rng.gen_range(1..=cap);
                let n_min = rng.gen_range(1..=n_max);
                let setup = rng.gen_range(0..=2);
                let work: u64 = rng.gen_range(1..=30);
                let est_work = work + rng.gen_range(0..=8);
                JobSpec {
                    job_id: id,
                    project: "malleable".into(),
                    submit_time: submit,
                    kind: JobKind::Malleable,
                    size: n_max,
                    n_min: Some(n_min),
                    n_max: Some(n_max),
                    runtime_estimate: setup + est_work.div_ceil(n_max as u64) as Secs,
                    actual_work: work,
                    setup_time: setup,
                    notice: None,
                }
            } else {
                let size = rng.gen_range(1..=cap);
                let setup = rng.gen_range(0..=1);
                let compute = rng.gen_range(1..=10);
                let estimate = setup + compute + rng.gen_range(0..=3);
                let lead = rng.gen_range(2..=6);
                let (category, notice_time, estimated_arrival) = match rng.gen_range(0..4) {
                    0 => (NoticeCategory::NoNotice, None, submit),
                    1 => (NoticeCategory::Accurate, Some(submit - lead), submit),
                    2 => {
                        let x = rng.gen_range(1..lead);
                        (NoticeCategory::Early, Some(submit - x), submit - x + lead)
                    }
                    _ => {
                        let y = rng.gen_range(1..=8);
                        (NoticeCategory::Late, Some(submit - y - lead), submit - y)
                    }
                };
                JobSpec {
                    job_id: id,
                    project: "on_demand".into(),
                    submit_time: submit,
                    kind: JobKind::OnDemand,
                    size,
                    n_min: None,
                    n_max: None,
                    runtime_estimate: estimate,
                    actual_work: size as u64 * compute as u64,
                    setup_time: setup,
                    notice: Some(NoticeProfile {
                        category,
                        notice_time,
                        estimated_arrival,
                        actual_arrival: submit,
                        estimated_size: size,
                        estimated_runtime: estimate,
                    }),
                }
            };
            jobs.push(spec);
        }
        TinyInstance { config, jobs }
    }
}

/// Metrics computed by the oracle from its own per-second tallies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleMetrics {
    pub turnaround: BTreeMap<JobId, Secs>,
    pub avg_turnaround: Option<f64>,
    pub avg_turnaround_rigid: Option<f64>,
    pub avg_turnaround_on_demand: Option<f64>,
    pub avg_turnaround_malleable: Option<f64>,
    pub instant_start_rate: Option<f64>,
    pub preemption_ratio_rigid: f64,
    pub preemption_ratio_malleable: f64,
    pub useful: u64,
    pub waste: WasteBreakdown,
    pub system_utilization: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OracleOutput {
    pub log: Vec<LogRecord>,
    pub metrics: OracleMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum St {
    Future,
    Queued,
    /// Arrived on-demand job whose nodes are secured but not all there yet.
    Committed,
    Running,
    Draining,
    Done,
}

#[derive(Debug, Clone)]
struct OJob {
    spec: JobSpec,
    st: St,
    first_submit: Secs,
    n: u32,
    segs: u32,
    preempted: bool,
    first_start: Option<Secs>,
    finish: Option<Secs>,
    // rigid / on-demand counters
    setup_left: Secs,
    progress: Secs,
    ckpt: Secs,
    base: Secs,
    write_left: Secs,
    since: Secs,
    setup_secs: Secs,
    write_secs: Secs,
    last_ckpt: Option<Secs>,
    // malleable counters
    work: u64,
    seg_work: u64,
    setup_ns: u64,
    drain_left: Secs,
    drain_ns: u64,
    original: u32,
    est_end: Secs,
    pinned: bool,
    arrived: bool,
    committed: Option<bool>,
    beneficiary: Option<JobId>,
    kill_at: Option<Secs>,
    /// (lender, lent, shrunk, lender segment)
    loans: Vec<(JobId, u32, bool, u32)>,
    host: Option<JobId>,
}

#[derive(Debug, Clone)]
struct ORes {
    owner: JobId,
    target: u32,
    held: u32,
    occupied: u32,
    expiry: Option<Secs>,
    class: u8,
    since: Secs,
}

#[derive(Default)]
struct Tally {
    useful: u64,
    lost: u64,
    setup: u64,
    checkpoint: u64,
    drain: u64,
    slack: u64,
}

struct Oracle {
    cfg: SystemConfig,
    mech: Mechanism,
    jobs: BTreeMap<JobId, OJob>,
    free: u32,
    res: Vec<ORes>,
    log: Vec<LogRecord>,
    t: Secs,
    tally: Tally,
}

pub fn oracle_run(inst: &TinyInstance, mech: Mechanism) -> Result<OracleOutput> {
    inst.check_bounds()?;
    inst.config.validate()?;
    for s in &inst.jobs {
        s.validate(Secs::MAX).map_err(|m| Error::OracleBounds(format!("job {}: {m}", s.job_id)))?;
    }
    let mut o = Oracle {
        cfg: inst.config.clone(),
        mech,
        jobs: inst
            .jobs
            .iter()
            .map(|s| {
                let j = OJob {
                    spec: s.clone(),
                    st: St::Future,
                    first_submit: s.arrival_time(),
                    n: 0,
                    segs: 0,
                    preempted: false,
                    first_start: None,
                    finish: None,
                    setup_left: 0,
                    progress: 0,
                    ckpt: 0,
                    base: 0,
                    write_left: 0,
                    since: 0,
                    setup_secs: 0,
                    write_secs: 0,
                    last_ckpt: None,
                    work: 0,
                    seg_work: 0,
                    setup_ns: 0,
                    drain_left: 0,
                    drain_ns: 0,
                    original: 0,
                    est_end: 0,
                    pinned: false,
                    arrived: false,
                    committed: None,
                    beneficiary: None,
                    kill_at: None,
                    loans: Vec::new(),
                    host: None,
                };
                (s.job_id, j)
            })
            .collect(),
        free: inst.config.capacity,
        res: Vec::new(),
        log: Vec::new(),
        t: 0,
        tally: Tally::default(),
    };
    o.simulate()?;
    let metrics = o.metrics();
    Ok(OracleOutput { log: o.log, metrics })
}

/// Runs engine and oracle on one instance and describes the first difference.
pub fn cross_check(inst: &TinyInstance, mech: Mechanism) -> Result<Option<String>> {
    let engine = crate::engine::run(&inst.jobs, mech, &inst.config)?;
    let oracle = oracle_run(inst, mech)?;
    Ok(compare(&engine, &oracle))
}

/// `None` when logs and metrics agree exactly.
pub fn compare(engine: &SimOutput, oracle: &OracleOutput) -> Option<String> {
    let a = normalize(&engine.log);
    let b = normalize(&oracle.log);
    if let Some(i) = (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i)) {
        let show = |r: Option<&LogRecord>| r.map_or("<end>".to_string(), |r| format!("t={} {}", r.t, r.to_json()));
        return Some(format!("log differs at record {i}: engine {} vs oracle {}", show(a.get(i)), show(b.get(i))));
    }
    let r = &engine.report;
    let m = &oracle.metrics;
    let pairs = [
        ("avg_turnaround", r.avg_turnaround, m.avg_turnaround),
        ("avg_turnaround_rigid", r.avg_turnaround_rigid, m.avg_turnaround_rigid),
        ("avg_turnaround_on_demand", r.avg_turnaround_on_demand, m.avg_turnaround_on_demand),
        ("avg_turnaround_malleable", r.avg_turnaround_malleable, m.avg_turnaround_malleable),
        ("instant_start_rate", r.instant_start_rate, m.instant_start_rate),
        ("system_utilization", r.system_utilization, m.system_utilization),
        ("preemption_ratio_rigid", Some(r.preemption_ratio_rigid), Some(m.preemption_ratio_rigid)),
        ("preemption_ratio_malleable", Some(r.preemption_ratio_malleable), Some(m.preemption_ratio_malleable)),
    ];
    for (name, x, y) in pairs {
        if x != y {
            return Some(format!("{name}: engine {x:?} vs oracle {y:?}"));
        }
    }
    if r.waste != m.waste || r.useful_node_seconds != m.useful {
        return Some(format!(
            "node-seconds: engine useful {} {:?} vs oracle useful {} {:?}",
            r.useful_node_seconds, r.waste, m.useful, m.waste
        ));
    }
    None
}

fn width_fit(spec: &JobSpec, hybrid: bool, limit: u32) -> Option<u32> {
    match spec.kind {
        JobKind::Malleable if hybrid => {
            let lo = spec.n_min.unwrap();
            let hi = spec.n_max.unwrap();
            if lo <= limit {
                Some(hi.min(limit))
            } else {
                None
            }
        }
        _ => (spec.width() <= limit).then_some(spec.width()),
    }
}

fn min_width(spec: &JobSpec, hybrid: bool) -> u32 {
    match spec.kind {
        JobKind::Malleable if hybrid => spec.n_min.unwrap(),
        _ => spec.width(),
    }
}

impl Oracle {
    fn hybrid(&self) -> bool {
        !self.mech.is_baseline()
    }

    fn j(&mut self, id: JobId) -> &mut OJob {
        self.jobs.get_mut(&id).unwrap()
    }

    fn emit(&mut self, event: LogEvent) {
        self.log.push(LogRecord::new(self.t, event));
    }

    fn interval(&self, spec: &JobSpec) -> Option<(Secs, Secs)> {
        if spec.kind != JobKind::Rigid {
            return None;
        }
        let cost = if spec.size < self.cfg.checkpoint_node_threshold {
            self.cfg.checkpoint_cost_small
        } else {
            self.cfg.checkpoint_cost_large
        };
        let tau = (self.cfg.checkpoint_scale * ((2 * cost * self.cfg.mtbf) as f64).sqrt()).round() as Secs;
        Some((tau.max(1), cost))
    }

    /// Estimated wall time of a fixed-size job restarted from `ckpt`.
    fn fixed_est_wall(&self, spec: &JobSpec, ckpt: Secs) -> Secs {
        let rest = spec.runtime_estimate - spec.setup_time - ckpt;
        let writes = match self.interval(spec) {
            Some((tau, cost)) if rest > 0 => (rest - 1) / tau * cost,
            _ => 0,
        };
        spec.setup_time + rest + writes
    }

    fn malleable_est_end(&self, j: &OJob) -> Secs {
        let left = j.spec.estimated_work().saturating_sub(j.work);
        self.t + j.setup_left + left.div_ceil(j.n as u64) as Secs
    }

    fn check_conservation(&self) -> Result<()> {
        let alloc: u32 = self.jobs.values().filter(|j| matches!(j.st, St::Running | St::Draining)).map(|j| j.n).sum();
        let idle: u32 = self.res.iter().map(|r| r.held - r.occupied).sum();
        if self.free + alloc + idle != self.cfg.capacity {
            return Err(Error::invariant(self.t, "oracle node conservation broken"));
        }
        Ok(())
    }

    fn simulate(&mut self) -> Result<()> {
        let hybrid = self.hybrid();
        let mut first = Secs::MAX;
        for j in self.jobs.values() {
            first = first.min(j.first_submit);
            if hybrid {
                if let Some(nt) = j.spec.notice.as_ref().and_then(|n| n.notice_time) {
                    first = first.min(nt);
                }
            }
        }
        if first == Secs::MAX {
            return Ok(());
        }
        self.t = first;
        loop {
            if self.t > first {
                self.step_second()?;
            }
            self.process_instant()?;
            self.check_conservation()?;
            if self.jobs.values().all(|j| j.st == St::Done) {
                return Ok(());
            }
            if self.t - first > MAX_SECONDS {
                let stuck: Vec<String> = self
                    .jobs
                    .iter()
                    .filter(|(_, j)| j.st != St::Done)
                    .map(|(id, j)| format!("{id}:{:?}", j.st))
                    .collect();
                if std::env::var_os("ORACLE_TRACE").is_some() {
                    for r in &self.log {
                        eprintln!("O t={} {}", r.t, r.to_json());
                    }
                }
                return Err(Error::OracleBounds(format!("instance runs too long, unfinished {}", stuck.join(" "))));
            }
            self.t += 1;
        }
    }

    /// Advances every running job over the second ending at `self.t`.
    fn step_second(&mut self) -> Result<()> {
        let t = self.t;
        let mut tally = std::mem::take(&mut self.tally);
        let intervals: BTreeMap<JobId, Option<(Secs, Secs)>> =
            self.jobs.iter().map(|(&id, j)| (id, self.interval(&j.spec))).collect();
        for (id, j) in self.jobs.iter_mut() {
            let n = j.n as u64;
            match j.st {
                St::Draining => {
                    j.drain_ns += n;
                    tally.drain += n;
                    j.drain_left -= 1;
                }
                St::Running if j.spec.kind == JobKind::Malleable => {
                    if j.setup_left > 0 {
                        j.setup_left -= 1;
                        j.setup_ns += n;
                        tally.setup += n;
                    } else {
                        j.work += n;
                    }
                }
                St::Running => {
                    if j.setup_left > 0 {
                        j.setup_left -= 1;
                        j.setup_secs += 1;
                        tally.setup += n;
                    } else if j.write_left > 0 {
                        j.write_left -= 1;
                        j.write_secs += 1;
                        j.since += 1;
                        tally.checkpoint += n;
                        if j.write_left == 0 {
                            j.ckpt = j.progress;
                            j.since = 0;
                            j.last_ckpt = Some(t);
                        }
                    } else {
                        j.progress += 1;
                        j.since += 1;
                        if let Some((tau, cost)) = intervals[id] {
                            if j.progress < j.spec.compute_time() && (j.progress - j.base) % tau == 0 {
                                j.write_left = cost;
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        self.tally = tally;
        Ok(())
    }

    fn process_instant(&mut self) -> Result<()> {
        let t = self.t;
        let hybrid = self.hybrid();
        let ids: Vec<JobId> = self.jobs.keys().copied().collect();

        let finished: Vec<JobId> = ids
            .iter()
            .copied()
            .filter(|id| {
                let j = &self.jobs[id];
                j.st == St::Running
                    && match j.spec.kind {
                        JobKind::Malleable => j.work >= j.spec.actual_work,
                        _ => j.progress == j.spec.compute_time() && j.setup_left == 0,
                    }
            })
            .collect();
        for id in finished {
            self.finish(id);
        }
        let ckpts: Vec<JobId> = ids
            .iter()
            .copied()
            .filter(|id| self.jobs[id].st == St::Running && self.jobs[id].last_ckpt == Some(t))
            .collect();
        for id in ckpts {
            self.emit(LogEvent::Checkpoint { job: id });
            if self.jobs[&id].kill_at == Some(t) {
                let owner = self.jobs[&id].beneficiary;
                self.kill(id, owner);
            }
        }
        let expired: Vec<JobId> = ids
            .iter()
            .copied()
            .filter(|id| self.jobs[id].st == St::Draining && self.jobs[id].drain_left == 0)
            .collect();
        for id in expired {
            self.drain_done(id);
        }
        if hybrid {
            let arrivals: Vec<JobId> = ids
                .iter()
                .copied()
                .filter(|id| self.jobs[id].spec.kind == JobKind::OnDemand && self.jobs[id].first_submit == t)
                .collect();
            for id in arrivals {
                self.arrive(id);
            }
            let notices: Vec<JobId> = ids
                .iter()
                .copied()
                .filter(|id| self.jobs[id].spec.notice.as_ref().and_then(|n| n.notice_time) == Some(t))
                .collect();
            for id in notices {
                self.notice(id);
            }
            let timeouts: Vec<JobId> = ids
                .iter()
                .copied()
                .filter(|id| !self.jobs[id].arrived && self.res.iter().any(|r| r.owner == *id && r.expiry == Some(t)))
                .collect();
            for id in timeouts {
                self.timeout(id);
            }
        }
        let submits: Vec<JobId> = ids
            .iter()
            .copied()
            .filter(|id| {
                let j = &self.jobs[id];
                j.st == St::Future && j.first_submit == t && (!hybrid || j.spec.kind != JobKind::OnDemand)
            })
            .collect();
        for id in submits {
            let kind = self.jobs[&id].spec.kind;
            let j = self.j(id);
            j.st = St::Queued;
            j.arrived = true;
            self.emit(LogEvent::Submit { job: id, kind });
        }
        self.pass();
        Ok(())
    }

    // ----- node routing -----

    fn res_idx(&self, owner: JobId) -> Option<usize> {
        self.res.iter().position(|r| r.owner == owner)
    }

    /// Sends loose nodes to the beneficiary, then reservations by priority, then free.
    fn route(&mut self, mut k: u32, beneficiary: Option<JobId>) {
        if let Some(i) = beneficiary.and_then(|b| self.res_idx(b)) {
            let take = (self.res[i].target - self.res[i].held).min(k);
            self.res[i].held += take;
            k -= take;
        }
        let mut order: Vec<usize> = (0..self.res.len()).collect();
        order.sort_by_key(|&i| (self.res[i].class, self.res[i].since, self.res[i].owner));
        for i in order {
            let take = (self.res[i].target - self.res[i].held).min(k);
            self.res[i].held += take;
            k -= take;
        }
        self.free += k;
    }

    /// Gives back all of a job's nodes.
    fn release_all(&mut self, id: JobId, beneficiary: Option<JobId>) {
        let j = self.j(id);
        let k = j.n;
        j.n = 0;
        match j.host.take() {
            Some(h) => {
                let i = self.res_idx(h).expect("borrowed reservation exists");
                self.res[i].occupied -= k;
            }
            None => self.route(k, beneficiary),
        }
    }

    fn dissolve(&mut self, owner: JobId) -> u32 {
        let Some(i) = self.res_idx(owner) else { return 0 };
        let borrowers: Vec<JobId> =
            self.jobs.iter().filter(|(_, j)| j.host == Some(owner)).map(|(&id, _)| id).collect();
        for b in borrowers {
            let j = self.j(b);
            j.host = None;
            let k = j.n;
            self.res[i].held -= k;
            self.res[i].occupied -= k;
        }
        let r = self.res.remove(i);
        self.free += r.held;
        r.held
    }

    // ----- job transitions -----

    fn start(&mut self, id: JobId, n: u32, host: Option<JobId>, backfilled: bool) {
        let t = self.t;
        let est_wall = self.fixed_est_wall(&self.jobs[&id].spec, self.jobs[&id].ckpt);
        let j = self.j(id);
        j.st = St::Running;
        j.n = n;
        j.segs += 1;
        j.pinned = false;
        j.beneficiary = None;
        j.kill_at = None;
        j.host = host;
        j.first_start.get_or_insert(t);
        j.setup_left = j.spec.setup_time;
        if j.spec.kind == JobKind::Malleable {
            j.seg_work = j.work;
            j.setup_ns = 0;
            j.original = n;
            let j = self.jobs[&id].clone();
            let est = self.malleable_est_end(&j);
            self.j(id).est_end = est;
        } else {
            j.base = j.ckpt;
            j.progress = j.ckpt;
            j.write_left = 0;
            j.since = 0;
            j.setup_secs = 0;
            j.write_secs = 0;
            j.est_end = t + est_wall;
        }
        let resumed = self.jobs[&id].preempted;
        self.emit(LogEvent::Start { job: id, nodes: n, reserved_from: host, backfilled, resumed });
    }

    fn segment_acct(&self, id: JobId, finished: bool) -> Acct {
        let j = &self.jobs[&id];
        let n = j.n as u64;
        if j.spec.kind == JobKind::Malleable {
            let w = j.spec.actual_work;
            if finished {
                Acct { useful: w - j.seg_work, setup: j.setup_ns, slack: j.work - w, ..Acct::default() }
            } else {
                Acct { useful: j.work - j.seg_work, setup: j.setup_ns, drain: j.drain_ns, ..Acct::default() }
            }
        } else {
            let kept = if finished { j.progress } else { j.ckpt };
            Acct {
                useful: n * (kept - j.base) as u64,
                lost: n * (j.progress - kept) as u64,
                setup: n * j.setup_secs as u64,
                checkpoint: n * j.write_secs as u64,
                ..Acct::default()
            }
        }
    }

    fn finish(&mut self, id: JobId) {
        let acct = self.segment_acct(id, true);
        self.tally.useful += acct.useful;
        self.tally.slack += acct.slack;
        let t = self.t;
        let j = self.j(id);
        if j.spec.kind == JobKind::Malleable {
            j.work = j.spec.actual_work;
        }
        j.st = St::Done;
        j.finish = Some(t);
        let loans = std::mem::take(&mut j.loans);
        self.emit(LogEvent::Finish { job: id, acct });
        let hybrid = self.hybrid();
        let mut pool = self.jobs[&id].n;
        for (lender, lent, shrunk, seg) in loans {
            let share = lent.min(pool);
            if share == 0 {
                continue;
            }
            let l = self.jobs[&lender].clone();
            if !shrunk && l.st == St::Queued && l.segs == seg {
                if let Some(n) = width_fit(&l.spec, hybrid, share + self.free).filter(|&n| n >= share) {
                    pool -= share;
                    self.free -= n - share;
                    self.start(lender, n, None, false);
                }
            } else if shrunk && l.st == St::Running && l.segs == seg {
                let grow = share.min(l.original - l.n);
                if grow > 0 {
                    pool -= grow;
                    self.resize(lender, l.n + grow);
                    self.emit(LogEvent::Expand { job: lender, from: l.n, to: l.n + grow });
                }
            }
        }
        self.j(id).n = pool;
        self.release_all(id, None);
    }

    fn resize(&mut self, id: JobId, to: u32) {
        self.j(id).n = to;
        let j = self.jobs[&id].clone();
        let est = self.malleable_est_end(&j);
        self.j(id).est_end = est;
    }

    fn requeue(&mut self, id: JobId, owner: Option<JobId>, acct: Acct) {
        self.tally.useful += acct.useful;
        self.tally.lost += acct.lost;
        self.release_all(id, owner);
        let j = self.j(id);
        j.st = St::Queued;
        j.preempted = true;
        j.beneficiary = None;
        j.kill_at = None;
        if j.spec.kind != JobKind::Malleable {
            j.progress = j.ckpt;
        }
        self.emit(LogEvent::Preempt { job: id, owner, acct });
    }

    fn kill(&mut self, id: JobId, owner: Option<JobId>) {
        let mut acct = self.segment_acct(id, false);
        acct.drain = 0;
        self.requeue(id, owner, acct);
    }

    fn drain_done(&mut self, id: JobId) {
        let acct = self.segment_acct(id, false);
        let owner = self.jobs[&id].beneficiary;
        self.requeue(id, owner, acct);
    }

    fn warn(&mut self, id: JobId, owner: JobId) {
        let w = self.cfg.warning_duration;
        let t = self.t;
        let j = self.j(id);
        j.st = St::Draining;
        j.drain_left = w;
        j.drain_ns = 0;
        j.beneficiary = Some(owner);
        j.est_end = t + w;
        self.emit(LogEvent::Warn { job: id, owner });
    }

    // ----- mechanisms -----

    /// (id, overhead) of running jobs that may be preempted, ascending by (overhead, id).
    fn victims_by_overhead(&self) -> Vec<(JobId, u64)> {
        let mut v: Vec<(JobId, u64)> = self
            .jobs
            .iter()
            .filter(|(_, j)| {
                j.st == St::Running && j.spec.kind != JobKind::OnDemand && j.beneficiary.is_none() && j.host.is_none()
            })
            .map(|(&id, j)| {
                let per_node = if j.spec.kind == JobKind::Malleable {
                    self.cfg.warning_duration + j.spec.setup_time
                } else {
                    j.since + j.spec.setup_time
                };
                (id, j.n as u64 * per_node as u64)
            })
            .collect();
        v.sort_by_key(|&(id, o)| (o, id));
        v
    }

    fn preempt_for(&mut self, owner: JobId, id: JobId, lent: u32) {
        let seg = self.jobs[&id].segs;
        self.j(owner).loans.push((id, lent, false, seg));
        if self.jobs[&id].spec.kind == JobKind::Malleable {
            self.warn(id, owner);
        } else {
            self.kill(id, Some(owner));
        }
    }

    fn cancel_pending(&mut self, owner: JobId) {
        let pending: Vec<JobId> = self
            .jobs
            .iter()
            .filter(|(_, j)| j.st == St::Running && j.beneficiary == Some(owner))
            .map(|(&id, _)| id)
            .collect();
        for id in &pending {
            let j = self.j(*id);
            j.beneficiary = None;
            j.kill_at = None;
        }
        self.j(owner).loans.retain(|l| !pending.contains(&l.0));
    }

    fn notice(&mut self, id: JobId) {
        let t = self.t;
        let p = self.jobs[&id].spec.notice.clone().unwrap();
        self.emit(LogEvent::Notice { job: id, estimated_arrival: p.estimated_arrival, size: p.estimated_size });
        let strategy = self.mech.notice().unwrap();
        if strategy == NoticeStrategy::N {
            return;
        }
        let ea = p.estimated_arrival;
        let target = p.estimated_size;
        let bank = self.free.min(target);
        self.free -= bank;
        self.res.push(ORes {
            owner: id,
            target,
            held: bank,
            occupied: 0,
            expiry: Some(ea + self.cfg.reservation_grace),
            class: 1,
            since: t,
        });
        if strategy == NoticeStrategy::Cua {
            return;
        }
        let expected: u32 = self
            .jobs
            .values()
            .filter(|j| j.st == St::Running && j.beneficiary.is_none() && j.host.is_none() && j.est_end <= ea)
            .map(|j| j.n)
            .sum();
        let mut deficit = (target - bank).saturating_sub(expected);
        let picks: Vec<(JobId, u32)> = self
            .victims_by_overhead()
            .into_iter()
            .filter(|(v, _)| self.jobs[v].est_end > ea)
            .map_while(|(v, _)| {
                if deficit == 0 {
                    return None;
                }
                let lent = self.jobs[&v].n.min(deficit);
                deficit -= lent;
                Some((v, lent))
            })
            .collect();
        for (v, lent) in picks {
            if self.jobs[&v].spec.kind == JobKind::Rigid
                && self.cfg.cup_checkpoint_aligned
                && self.jobs[&v].last_ckpt != Some(t)
            {
                if let Some(at) = self.next_checkpoint(v, ea) {
                    let seg = self.jobs[&v].segs;
                    self.j(id).loans.push((v, lent, false, seg));
                    let j = self.j(v);
                    j.beneficiary = Some(id);
                    j.kill_at = Some(at);
                    continue;
                }
            }
            self.preempt_for(id, v, lent);
        }
    }

    /// First checkpoint completion of a running rigid job in `(t, until]`,
    /// found by stepping a copy of its counters.
    fn next_checkpoint(&self, id: JobId, until: Secs) -> Option<Secs> {
        let j = &self.jobs[&id];
        let (tau, cost) = self.interval(&j.spec)?;
        let total = j.spec.compute_time();
        let (mut setup, mut write, mut progress) = (j.setup_left, j.write_left, j.progress);
        let mut now = self.t;
        while now < until && progress < total {
            now += 1;
            if setup > 0 {
                setup -= 1;
            } else if write > 0 {
                write -= 1;
                if write == 0 {
                    return Some(now);
                }
            } else {
                progress += 1;
                if progress < total && (progress - j.base) % tau == 0 {
                    write = cost;
                }
            }
        }
        None
    }

    fn arrive(&mut self, id: JobId) {
        let t = self.t;
        let size = self.jobs[&id].spec.size;
        self.j(id).arrived = true;
        self.cancel_pending(id);
        match self.res_idx(id) {
            Some(i) => {
                self.res[i].class = 0;
                self.res[i].since = t;
                self.res[i].expiry = None;
            }
            None => {
                self.res.push(ORes { owner: id, target: size, held: 0, occupied: 0, expiry: None, class: 0, since: t })
            }
        }
        let i = self.res_idx(id).unwrap();
        let draining: u32 =
            self.jobs.values().filter(|j| j.st == St::Draining && j.beneficiary == Some(id)).map(|j| j.n).sum();
        let demand = size.saturating_sub(draining);
        let idle = self.res[i].held - self.res[i].occupied;
        let borrowers: Vec<(JobId, u32)> =
            self.jobs.iter().filter(|(_, j)| j.host == Some(id)).map(|(&b, j)| (b, j.n)).collect();
        let victims = self.victims_by_overhead();
        let supply = idle.min(demand) as u64
            + self.free as u64
            + borrowers.iter().map(|b| b.1 as u64).sum::<u64>()
            + victims.iter().map(|v| self.jobs[&v.0].n as u64).sum::<u64>();
        if supply < demand as u64 {
            self.dissolve(id);
            let j = self.j(id);
            j.loans.clear();
            j.pinned = true;
            j.st = St::Queued;
            j.committed = Some(false);
            self.emit(LogEvent::Arrive { job: id, committed: false });
            return;
        }
        // Banked idle nodes, then free nodes, then borrowers, then preemption or shrinking.
        let from_banked = idle.min(demand);
        let from_free = self.free.min(demand - from_banked);
        let mut deficit = demand - from_banked - from_free;
        let mut evict = Vec::new();
        for &(b, n) in &borrowers {
            if deficit == 0 {
                break;
            }
            deficit -= n.min(deficit);
            evict.push(b);
        }
        let mut shrink: Vec<(JobId, u32, u32)> = Vec::new();
        let mut preempt: Vec<(JobId, u32)> = Vec::new();
        let slack: Vec<(JobId, u32, u32)> = self
            .jobs
            .iter()
            .filter(|(_, j)| {
                j.st == St::Running
                    && j.spec.kind == JobKind::Malleable
                    && j.beneficiary.is_none()
                    && j.host.is_none()
                    && j.n > j.spec.n_min.unwrap()
            })
            .map(|(&m, j)| (m, j.n, j.n - j.spec.n_min.unwrap()))
            .collect();
        let slack_total: u32 = slack.iter().map(|s| s.2).sum();
        let spaa = self.mech.arrival() == Some(ArrivalStrategy::Spaa);
        if deficit > 0 && spaa && slack_total >= deficit {
            // Proportional shares; leftover nodes go to the largest remainders.
            let mut give: Vec<(JobId, u32, u32, u64)> = slack
                .iter()
                .map(|&(m, n, s)| {
                    let num = deficit as u64 * s as u64;
                    (m, n, (num / slack_total as u64) as u32, num % slack_total as u64)
                })
                .collect();
            let mut left = deficit - give.iter().map(|g| g.2).sum::<u32>();
            let mut order: Vec<usize> = (0..give.len()).collect();
            order.sort_by(|&a, &b| give[b].3.cmp(&give[a].3).then(give[a].0.cmp(&give[b].0)));
            for k in order {
                if left == 0 {
                    break;
                }
                give[k].2 += 1;
                left -= 1;
            }
            shrink = give.into_iter().filter(|g| g.2 > 0).map(|g| (g.0, g.1, g.1 - g.2)).collect();
        } else {
            for (v, _) in victims {
                if deficit == 0 {
                    break;
                }
                let lent = self.jobs[&v].n.min(deficit);
                deficit -= lent;
                preempt.push((v, lent));
            }
        }
        for &(b, _) in &borrowers {
            if !evict.contains(&b) {
                let k = self.jobs[&b].n;
                self.j(b).host = None;
                self.res[i].held -= k;
                self.res[i].occupied -= k;
            }
        }
        // Evicted borrowers hand their nodes straight back, so free nodes only fill what is still missing.
        let take = from_free.min(self.res[i].target - self.res[i].held);
        self.free -= take;
        self.res[i].held += take;
        for b in evict {
            self.kill(b, Some(id));
        }
        for (v, lent) in preempt {
            self.preempt_for(id, v, lent);
        }
        for (m, from, to) in shrink {
            let seg = self.jobs[&m].segs;
            self.j(id).loans.push((m, from - to, true, seg));
            self.resize(m, to);
            self.route(from - to, Some(id));
            self.emit(LogEvent::Shrink { job: m, from, to, owner: id });
        }
        let j = self.j(id);
        j.st = St::Committed;
        j.committed = Some(true);
        self.emit(LogEvent::Arrive { job: id, committed: true });
    }

    fn timeout(&mut self, id: JobId) {
        self.cancel_pending(id);
        self.j(id).loans.clear();
        let released = self.dissolve(id);
        self.emit(LogEvent::Timeout { job: id, released });
    }

    // ----- scheduling -----

    fn est_duration(&self, j: &OJob, n: u32) -> Secs {
        if j.spec.kind == JobKind::Malleable {
            j.spec.setup_time + (j.spec.estimated_work() - j.work).div_ceil(n as u64) as Secs
        } else {
            self.fixed_est_wall(&j.spec, j.ckpt)
        }
    }

    fn pass(&mut self) {
        let t = self.t;
        let hybrid = self.hybrid();
        let mut ready: Vec<(u8, Secs, JobId)> = self
            .res
            .iter()
            .filter(|r| r.class == 0 && r.held == r.target && r.occupied == 0)
            .map(|r| (r.class, r.since, r.owner))
            .collect();
        ready.sort();
        for (_, _, owner) in ready {
            let i = self.res_idx(owner).unwrap();
            let r = self.res.remove(i);
            self.start(owner, r.held, None, false);
        }

        let mut queue: Vec<JobId> = self.jobs.iter().filter(|(_, j)| j.st == St::Queued).map(|(&id, _)| id).collect();
        queue.sort_by_key(|id| {
            let j = &self.jobs[id];
            (!j.pinned, j.first_submit, *id)
        });
        let mut k = 0;
        while k < queue.len() {
            let id = queue[k];
            let Some(n) = width_fit(&self.jobs[&id].spec, hybrid, self.free) else { break };
            self.free -= n;
            self.start(id, n, None, false);
            k += 1;
        }
        if k >= queue.len() {
            if hybrid {
                self.grow();
            }
            return;
        }
        let head = queue[k];
        let need = min_width(&self.jobs[&head].spec, hybrid);
        // Earliest time enough nodes come back if running jobs end at their estimates.
        let returning: Vec<(Secs, u32)> =
            self.jobs.values().filter(|j| j.st == St::Running && j.host.is_none()).map(|j| (j.est_end, j.n)).collect();
        let avail_at = |at: Secs| self.free + returning.iter().filter(|r| r.0 <= at).map(|r| r.1).sum::<u32>();
        let mut times: Vec<Secs> = returning.iter().map(|r| r.0.max(t)).collect();
        times.push(t);
        times.sort();
        let shadow = times.into_iter().find(|&at| avail_at(at) >= need);
        let mut extra = shadow.map_or(u32::MAX, |s| avail_at(s) - need);

        for &id in &queue[k + 1..] {
            let j = self.jobs[&id].clone();
            if let Some(n) = width_fit(&j.spec, hybrid, self.free) {
                if shadow.is_none_or(|s| t + self.est_duration(&j, n) <= s) {
                    self.free -= n;
                    self.start(id, n, None, true);
                    continue;
                }
                if let Some(n2) = width_fit(&j.spec, hybrid, self.free.min(extra)) {
                    self.free -= n2;
                    if shadow.is_some() {
                        extra -= n2;
                    }
                    self.start(id, n2, None, true);
                    continue;
                }
            }
            if !hybrid || j.spec.kind == JobKind::OnDemand {
                continue;
            }
            let mut order: Vec<usize> = (0..self.res.len()).filter(|&i| self.res[i].class == 1).collect();
            order.sort_by_key(|&i| (self.res[i].since, self.res[i].owner));
            for i in order {
                let idle = self.res[i].held - self.res[i].occupied;
                if idle == 0 {
                    continue;
                }
                if let Some(n) = width_fit(&j.spec, hybrid, idle) {
                    self.res[i].occupied += n;
                    let owner = self.res[i].owner;
                    self.start(id, n, Some(owner), true);
                    break;
                }
            }
        }
    }

    /// Free nodes with no blocked job in the queue go to running malleable jobs.
    fn grow(&mut self) {
        let mut order: Vec<(Secs, JobId)> = self
            .jobs
            .iter()
            .filter(|(_, j)| {
                j.st == St::Running
                    && j.spec.kind == JobKind::Malleable
                    && j.beneficiary.is_none()
                    && j.host.is_none()
                    && j.n < j.spec.n_max.unwrap()
            })
            .map(|(&id, j)| (j.first_submit, id))
            .collect();
        order.sort();
        for (_, id) in order {
            if self.free == 0 {
                break;
            }
            let from = self.jobs[&id].n;
            let to = self.jobs[&id].spec.n_max.unwrap().min(from + self.free);
            self.free -= to - from;
            self.resize(id, to);
            let j = self.j(id);
            j.original = j.original.max(to);
            self.emit(LogEvent::Expand { job: id, from, to });
        }
    }

    fn metrics(&self) -> OracleMetrics {
        let mut turnaround = BTreeMap::new();
        let mut per_kind: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
        let mut all = Vec::new();
        let (mut od, mut instant) = (0usize, 0usize);
        let mut count: BTreeMap<&'static str, (usize, usize)> = BTreeMap::new();
        for (&id, j) in &self.jobs {
            let key = j.spec.kind.as_str();
            if let Some(f) = j.finish {
                let ta = f - j.first_submit;
                turnaround.insert(id, ta);
                per_kind.entry(key).or_default().push(ta as f64);
                all.push(ta as f64);
            }
            let c = count.entry(key).or_default();
            c.0 += 1;
            c.1 += j.preempted as usize;
            if j.spec.kind == JobKind::OnDemand {
                od += 1;
                let ok = match j.committed {
                    Some(c) => c,
                    None => j.first_start == Some(j.first_submit),
                };
                instant += ok as usize;
            }
        }
        let avg = |v: Option<&Vec<f64>>| v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64);
        let ratio = |k: JobKind| count.get(k.as_str()).map_or(0.0, |c| c.1 as f64 / c.0 as f64);
        let start = self.log.iter().map(|r| r.t).min().unwrap_or(0);
        let end = self.log.iter().map(|r| r.t).max().unwrap_or(0);
        let cap_ns = self.cfg.capacity as u64 * (end - start) as u64;
        OracleMetrics {
            turnaround,
            avg_turnaround: avg(Some(&all)),
            avg_turnaround_rigid: avg(per_kind.get(JobKind::Rigid.as_str())),
            avg_turnaround_on_demand: avg(per_kind.get(JobKind::OnDemand.as_str())),
            avg_turnaround_malleable: avg(per_kind.get(JobKind::Malleable.as_str())),
            instant_start_rate: (od > 0).then(|| instant as f64 / od as f64),
            preemption_ratio_rigid: ratio(JobKind::Rigid),
            preemption_ratio_malleable: ratio(JobKind::Malleable),
            useful: self.tally.useful,
            waste: WasteBreakdown {
                lost_compute: self.tally.lost,
                setup_replay: self.tally.setup,
                checkpoint_writes: self.tally.checkpoint,
                drain_occupancy: self.tally.drain,
                rounding_slack: self.tally.slack,
            },
            system_utilization: (cap_ns > 0).then(|| self.tally.useful as f64 / cap_ns as f64),
        }
    }
}
