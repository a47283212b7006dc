//! Deterministic discrete-event loop.
//!
//! Events are ordered by `(time, class, job id, seq)`. After every event at a
//! timestamp has been handled, one scheduling pass runs if anything changed:
//! first committed on-demand jobs whose reservation is complete start, then
//! the FCFS + EASY pass runs over the queue.

mod log;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::time::Instant;

pub use log::{normalize, read_event_log, write_event_log, Acct, LogEvent, LogRecord, LOG_SCHEMA_VERSION};

use crate::cluster::{AuditRecord, ClusterLedger, LedgerError, ReservationPriority};
use crate::config::{Mechanism, NoticeStrategy};
use crate::error::{Error, Result};
use crate::mechanisms::{
    handle_arrival, handle_completion, handle_notice, preemption_overhead, ArrivalInput, BackfilledJob, Candidate,
    CheckpointTimeline, Forecast, Lender, LenderStatus, NoticeInput, PreemptAction, ReturnAction,
};
use crate::metrics::{self, LatencySamples, MetricsOptions, MetricsReport};
use crate::policy::{
    easy_backfill, fcfs_order, DurationModel, IdleReservation, Placement, QueuedJob, RunningJob, Width,
};
use crate::{JobId, JobKind, JobSpec, Secs, SystemConfig};

/// Same-instant processing order; earlier variants go first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventClass {
    JobFinish,
    CheckpointComplete,
    WarningExpiry,
    OnDemandArrival,
    AdvanceNotice,
    ReservationTimeout,
    JobSubmit,
    SchedulerPass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EventKey {
    pub time: Secs,
    pub class: EventClass,
    pub job: JobId,
    pub seq: u64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep the ledger's per-mutation audit trail.
    pub ledger_audit: bool,
    pub metrics: MetricsOptions,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: Vec<LogRecord>,
    pub report: MetricsReport,
    /// Wall-clock timings; not deterministic, so kept out of the report.
    pub latency: LatencySamples,
    pub audit: Vec<AuditRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Pending,
    Queued,
    Running,
    Draining,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LoanKind {
    Preempted,
    Shrunk,
}

/// Nodes a job gave up for an on-demand job, owed back at its completion.
#[derive(Debug, Clone, Copy)]
struct Loan {
    job: JobId,
    lent: u32,
    kind: LoanKind,
    /// Run segment of the lender the loan was taken from.
    segment: u32,
}

#[derive(Debug, Clone)]
struct Job {
    spec: JobSpec,
    phase: Phase,
    first_submit: Secs,
    nodes: u32,
    /// Number of run segments started so far.
    segments: u32,
    preempted: bool,
    /// Bumped whenever scheduled per-job events become stale.
    token: u64,
    // Fixed-size jobs.
    checkpointed: Secs,
    timeline: Option<CheckpointTimeline>,
    // Malleable jobs.
    work: u64,
    seg_work: u64,
    setup_end: Secs,
    anchor: Secs,
    acc_setup: u64,
    warned_at: Secs,
    original: u32,

    est_end: Secs,
    pinned: bool,
    committed: bool,
    arrived: bool,
    /// On-demand job this job's nodes are promised to.
    beneficiary: Option<JobId>,
    /// Checkpoint completion at which a pending preemption happens.
    kill_at: Option<Secs>,
    loans: Vec<Loan>,
}

impl Job {
    fn new(spec: &JobSpec) -> Self {
        Job {
            first_submit: spec.arrival_time(),
            spec: spec.clone(),
            phase: Phase::Pending,
            nodes: 0,
            segments: 0,
            preempted: false,
            token: 0,
            checkpointed: 0,
            timeline: None,
            work: 0,
            seg_work: 0,
            setup_end: 0,
            anchor: 0,
            acc_setup: 0,
            warned_at: 0,
            original: 0,
            est_end: 0,
            pinned: false,
            committed: false,
            arrived: false,
            beneficiary: None,
            kill_at: None,
            loans: Vec::new(),
        }
    }

    fn is_malleable(&self) -> bool {
        self.spec.kind == JobKind::Malleable
    }

    /// Accrues setup and work of a running malleable job up to `to`.
    fn accrue(&mut self, to: Secs) {
        let n = self.nodes as u64;
        let mut a = self.anchor;
        if a < self.setup_end {
            let s = to.min(self.setup_end);
            self.acc_setup += n * (s - a).max(0) as u64;
            a = s;
        }
        if to > a {
            self.work += n * (to - a) as u64;
        }
        self.anchor = to;
    }

    fn malleable_finish(&self) -> Secs {
        let from = self.anchor.max(self.setup_end);
        // A job expanded in the instant its work completes finishes right away.
        from + self.spec.actual_work.saturating_sub(self.work).div_ceil(self.nodes as u64) as Secs
    }

    fn malleable_est_end(&self) -> Secs {
        let from = self.anchor.max(self.setup_end);
        let left = self.spec.estimated_work().saturating_sub(self.work);
        from + left.div_ceil(self.nodes as u64) as Secs
    }
}

fn ledger_err(time: Secs) -> impl Fn(LedgerError) -> Error {
    move |e| Error::invariant(time, e.to_string())
}

struct Engine<'a> {
    mech: Mechanism,
    cfg: &'a SystemConfig,
    jobs: Vec<Job>,
    index: HashMap<JobId, usize>,
    ledger: ClusterLedger,
    heap: BinaryHeap<Reverse<(EventKey, u64)>>,
    seq: u64,
    queued: BTreeSet<JobId>,
    running: BTreeSet<JobId>,
    log: Vec<LogRecord>,
    now: Secs,
    dirty: bool,
    latency: LatencySamples,
}

/// Runs one simulation with default options.
pub fn run(specs: &[JobSpec], mechanism: Mechanism, cfg: &SystemConfig) -> Result<SimOutput> {
    run_with(specs, mechanism, cfg, &RunOptions::default())
}

pub fn run_with(specs: &[JobSpec], mechanism: Mechanism, cfg: &SystemConfig, opts: &RunOptions) -> Result<SimOutput> {
    cfg.validate()?;
    let mut seen = HashMap::new();
    for (i, s) in specs.iter().enumerate() {
        s.validate(Secs::MAX).map_err(|m| Error::Schema { line: i + 1, message: format!("job {}: {m}", s.job_id) })?;
        if seen.insert(s.job_id, i).is_some() {
            return Err(Error::Schema { line: i + 1, message: format!("duplicate job id {}", s.job_id) });
        }
        if s.min_width() > cfg.capacity || (s.kind != JobKind::Malleable && s.size > cfg.capacity) {
            return Err(Error::Config(format!("job {} needs more than {} nodes", s.job_id, cfg.capacity)));
        }
    }
    let mut engine = Engine::new(specs, mechanism, cfg, opts.ledger_audit);
    engine.seed_events();
    engine.main_loop()?;
    if let Some(j) = engine.jobs.iter().find(|j| j.phase != Phase::Finished) {
        return Err(Error::invariant(engine.now, format!("job {} never finished", j.spec.job_id)));
    }
    let report = metrics::compute(specs, &engine.log, cfg.capacity, &opts.metrics)?;
    let audit = engine.ledger.take_audit();
    Ok(SimOutput { log: engine.log, report, latency: engine.latency, audit })
}

impl<'a> Engine<'a> {
    fn new(specs: &[JobSpec], mech: Mechanism, cfg: &'a SystemConfig, audit: bool) -> Self {
        let mut sorted: Vec<&JobSpec> = specs.iter().collect();
        sorted.sort_by_key(|s| s.job_id);
        let jobs: Vec<Job> = sorted.into_iter().map(Job::new).collect();
        let index = jobs.iter().enumerate().map(|(i, j)| (j.spec.job_id, i)).collect();
        let mut ledger = ClusterLedger::new(cfg.capacity);
        if audit {
            ledger = ledger.with_audit();
        }
        Engine {
            mech,
            cfg,
            jobs,
            index,
            ledger,
            heap: BinaryHeap::new(),
            seq: 0,
            queued: BTreeSet::new(),
            running: BTreeSet::new(),
            log: Vec::new(),
            now: 0,
            dirty: false,
            latency: LatencySamples::default(),
        }
    }

    fn job(&self, id: JobId) -> &Job {
        &self.jobs[self.index[&id]]
    }

    fn job_mut(&mut self, id: JobId) -> &mut Job {
        let i = self.index[&id];
        &mut self.jobs[i]
    }

    fn push(&mut self, time: Secs, class: EventClass, job: JobId, token: u64) {
        self.seq += 1;
        self.heap.push(Reverse((EventKey { time, class, job, seq: self.seq }, token)));
    }

    fn emit(&mut self, event: LogEvent) {
        self.log.push(LogRecord::new(self.now, event));
    }

    fn hybrid(&self) -> bool {
        !self.mech.is_baseline()
    }

    fn seed_events(&mut self) {
        let mut first = Secs::MAX;
        for i in 0..self.jobs.len() {
            let spec = self.jobs[i].spec.clone();
            let id = spec.job_id;
            match (&spec.notice, self.hybrid()) {
                (Some(n), true) if spec.kind == JobKind::OnDemand => {
                    if let Some(t) = n.notice_time {
                        self.push(t, EventClass::AdvanceNotice, id, 0);
                        first = first.min(t);
                    }
                    self.push(n.actual_arrival, EventClass::OnDemandArrival, id, 0);
                    first = first.min(n.actual_arrival);
                }
                _ => {
                    let t = spec.arrival_time();
                    self.push(t, EventClass::JobSubmit, id, 0);
                    first = first.min(t);
                }
            }
        }
        if first != Secs::MAX {
            self.now = first;
            self.ledger.set_clock(first);
        }
    }

    fn main_loop(&mut self) -> Result<()> {
        loop {
            let next = self.heap.peek().map(|e| e.0 .0.time);
            match next {
                Some(t) if t <= self.now || !self.dirty => {
                    if t < self.now {
                        return Err(Error::invariant(self.now, format!("event at {t} dispatched after {}", self.now)));
                    }
                    self.now = t;
                    self.ledger.set_clock(t);
                    let Reverse((key, token)) = self.heap.pop().unwrap();
                    self.dispatch(key, token)?;
                }
                _ if self.dirty => {
                    self.dirty = false;
                    self.schedule_pass()?;
                }
                _ => return Ok(()),
            }
        }
    }

    fn dispatch(&mut self, key: EventKey, token: u64) -> Result<()> {
        let id = key.job;
        let current = self.job(id).token == token;
        match key.class {
            EventClass::JobFinish if current => self.on_finish(id),
            EventClass::CheckpointComplete if current => self.on_checkpoint(id),
            EventClass::WarningExpiry if current => self.on_warning_expiry(id),
            EventClass::OnDemandArrival => {
                let waiting = self.queued.len();
                let started = Instant::now();
                let r = self.on_arrival(id);
                self.latency.arrival_ms.push(started.elapsed().as_secs_f64() * 1e3);
                self.latency.arrival_queue_len.push(waiting);
                r
            }
            EventClass::AdvanceNotice => self.on_notice(id),
            EventClass::ReservationTimeout => self.on_timeout(id),
            EventClass::JobSubmit => self.on_submit(id),
            _ => Ok(()),
        }
    }

    fn on_submit(&mut self, id: JobId) -> Result<()> {
        let kind = self.job(id).spec.kind;
        let j = self.job_mut(id);
        j.phase = Phase::Queued;
        j.arrived = true;
        self.queued.insert(id);
        self.emit(LogEvent::Submit { job: id, kind });
        self.dirty = true;
        Ok(())
    }

    fn start_job(&mut self, id: JobId, nodes: u32, reserved_from: Option<JobId>, backfilled: bool) {
        let now = self.now;
        let cfg = self.cfg;
        let j = self.job_mut(id);
        j.phase = Phase::Running;
        j.nodes = nodes;
        j.segments += 1;
        j.token += 1;
        j.pinned = false;
        j.beneficiary = None;
        j.kill_at = None;
        let setup = j.spec.setup_time;
        let mut checkpoint = None;
        let finish = if j.is_malleable() {
            j.setup_end = now + setup;
            j.anchor = now;
            j.acc_setup = 0;
            j.seg_work = j.work;
            j.original = nodes;
            j.est_end = j.malleable_est_end();
            j.malleable_finish()
        } else {
            let size = j.spec.size;
            let interval = (j.spec.kind == JobKind::Rigid).then(|| cfg.checkpoint_interval(size));
            let tl = CheckpointTimeline {
                start: now,
                setup,
                base: j.checkpointed,
                total: j.spec.compute_time(),
                interval,
                cost: cfg.checkpoint_cost(size),
            };
            let est = CheckpointTimeline { total: j.spec.runtime_estimate - setup, ..tl };
            j.est_end = est.end();
            j.timeline = Some(tl);
            checkpoint = tl.checkpoint_completions().first().copied();
            tl.end()
        };
        let token = j.token;
        let resumed = j.preempted;
        self.queued.remove(&id);
        self.running.insert(id);
        self.push(finish, EventClass::JobFinish, id, token);
        if let Some(c) = checkpoint {
            self.push(c, EventClass::CheckpointComplete, id, token);
        }
        self.emit(LogEvent::Start { job: id, nodes, reserved_from, backfilled, resumed });
    }

    /// Ends the current run segment and puts the job back in the queue.
    fn requeue(&mut self, id: JobId, owner: Option<JobId>, acct: Acct) -> Result<()> {
        let now = self.now;
        let j = self.job_mut(id);
        let n = j.nodes;
        j.phase = Phase::Queued;
        j.preempted = true;
        j.token += 1;
        j.nodes = 0;
        j.beneficiary = None;
        j.kill_at = None;
        j.timeline = None;
        self.running.remove(&id);
        self.queued.insert(id);
        self.ledger.release(id, n, owner).map_err(ledger_err(now))?;
        self.emit(LogEvent::Preempt { job: id, owner, acct });
        self.dirty = true;
        Ok(())
    }

    /// Stops a job immediately. Fixed-size jobs keep their last checkpoint;
    /// malleable jobs keep all work done.
    fn preempt_now(&mut self, id: JobId, owner: Option<JobId>) -> Result<()> {
        let now = self.now;
        let j = self.job_mut(id);
        let n = j.nodes as u64;
        let acct = if j.is_malleable() {
            j.accrue(now);
            Acct { useful: j.work - j.seg_work, setup: j.acc_setup, ..Acct::default() }
        } else {
            let tl = j.timeline.expect("running fixed-size job has a timeline");
            let st = tl.state_at(now);
            let elapsed = now - tl.start;
            let compute = st.progress - tl.base;
            j.checkpointed = st.checkpointed;
            Acct {
                useful: n * (st.checkpointed - tl.base) as u64,
                lost: n * (st.progress - st.checkpointed) as u64,
                setup: n * st.setup_elapsed as u64,
                checkpoint: n * (elapsed - st.setup_elapsed - compute) as u64,
                ..Acct::default()
            }
        };
        self.requeue(id, owner, acct)
    }

    fn warn(&mut self, id: JobId, owner: JobId) {
        let now = self.now;
        let warning = self.cfg.warning_duration;
        let j = self.job_mut(id);
        j.accrue(now);
        j.phase = Phase::Draining;
        j.warned_at = now;
        j.beneficiary = Some(owner);
        j.token += 1;
        j.est_end = now + warning;
        let token = j.token;
        self.push(now + warning, EventClass::WarningExpiry, id, token);
        self.emit(LogEvent::Warn { job: id, owner });
    }

    fn on_warning_expiry(&mut self, id: JobId) -> Result<()> {
        let now = self.now;
        let j = self.job_mut(id);
        let n = j.nodes as u64;
        let acct = Acct {
            useful: j.work - j.seg_work,
            setup: j.acc_setup,
            drain: n * (now - j.warned_at) as u64,
            ..Acct::default()
        };
        let owner = j.beneficiary;
        self.requeue(id, owner, acct)
    }

    fn resize(&mut self, id: JobId, to: u32) {
        let now = self.now;
        let j = self.job_mut(id);
        j.accrue(now);
        j.nodes = to;
        j.token += 1;
        j.est_end = j.malleable_est_end();
        let finish = j.malleable_finish();
        let token = j.token;
        self.push(finish, EventClass::JobFinish, id, token);
    }

    fn on_checkpoint(&mut self, id: JobId) -> Result<()> {
        let now = self.now;
        self.emit(LogEvent::Checkpoint { job: id });
        let j = self.job(id);
        if j.kill_at == Some(now) {
            let owner = j.beneficiary;
            return self.preempt_now(id, owner);
        }
        let tl = j.timeline.expect("checkpointing job has a timeline");
        let token = j.token;
        if let Some(next) = tl.next_completion(now, tl.end()) {
            self.push(next, EventClass::CheckpointComplete, id, token);
        }
        Ok(())
    }

    fn on_finish(&mut self, id: JobId) -> Result<()> {
        let now = self.now;
        let j = self.job_mut(id);
        let n = j.nodes as u64;
        let acct = if j.is_malleable() {
            j.accrue(now);
            let w = j.spec.actual_work;
            let acct = Acct { useful: w - j.seg_work, setup: j.acc_setup, slack: j.work - w, ..Acct::default() };
            j.work = w;
            acct
        } else {
            let tl = j.timeline.expect("running fixed-size job has a timeline");
            j.checkpointed = tl.total;
            Acct {
                useful: n * tl.remaining() as u64,
                setup: n * tl.setup as u64,
                checkpoint: n * (tl.checkpoints() * tl.cost) as u64,
                ..Acct::default()
            }
        };
        j.phase = Phase::Finished;
        j.token += 1;
        let loans = std::mem::take(&mut j.loans);
        let nodes = j.nodes;
        self.running.remove(&id);
        self.emit(LogEvent::Finish { job: id, acct });
        self.dirty = true;
        if !loans.is_empty() {
            self.return_loans(id, nodes, &loans)?;
        }
        let rest = self.ledger.allocation(id);
        self.ledger.release(id, rest, None).map_err(ledger_err(now))?;
        Ok(())
    }

    fn return_loans(&mut self, owner: JobId, nodes: u32, loans: &[Loan]) -> Result<()> {
        let now = self.now;
        let lenders: Vec<Lender> = loans
            .iter()
            .map(|l| {
                let j = self.job(l.job);
                let same = j.segments == l.segment;
                let status = match (l.kind, j.phase) {
                    (LoanKind::Preempted, Phase::Queued) if same => LenderStatus::Waiting { width: self.width_of(j) },
                    (LoanKind::Shrunk, Phase::Running) if same => {
                        LenderStatus::Running { current: j.nodes, original: j.original }
                    }
                    _ => LenderStatus::Gone,
                };
                Lender { job: l.job, lent: l.lent, status }
            })
            .collect();
        let plan = handle_completion(nodes, self.ledger.free(), &lenders);
        for action in plan.actions {
            match action {
                ReturnAction::Resume { job, nodes, from_returned, from_free } => {
                    self.ledger.transfer(owner, job, from_returned).map_err(ledger_err(now))?;
                    self.ledger.allocate(job, from_free).map_err(ledger_err(now))?;
                    self.start_job(job, nodes, None, false);
                }
                ReturnAction::Expand { job, from, to } => {
                    self.ledger.transfer(owner, job, to - from).map_err(ledger_err(now))?;
                    self.resize(job, to);
                    self.emit(LogEvent::Expand { job, from, to });
                }
            }
        }
        Ok(())
    }

    fn width_of(&self, j: &Job) -> Width {
        match j.spec.kind {
            JobKind::Malleable if self.hybrid() => Width::Range { min: j.spec.min_width(), max: j.spec.width() },
            _ => Width::Fixed(j.spec.width()),
        }
    }

    /// Running jobs an arrival or notice may take nodes from.
    fn candidates(&self) -> Vec<Candidate> {
        let now = self.now;
        let warning = self.cfg.warning_duration;
        self.running
            .iter()
            .map(|&id| self.job(id))
            .filter(|j| {
                j.phase == Phase::Running
                    && j.spec.kind != JobKind::OnDemand
                    && j.beneficiary.is_none()
                    && self.ledger.backfill_host(j.spec.job_id).is_none()
            })
            .map(|j| {
                let since = j.timeline.map_or(0, |tl| tl.state_at(now).since_checkpoint);
                let overhead = preemption_overhead(j.spec.kind, j.nodes, j.spec.setup_time, since, warning)
                    .expect("on-demand jobs are filtered out");
                let n_min = if j.is_malleable() { j.spec.min_width() } else { j.nodes };
                Candidate { id: j.spec.job_id, kind: j.spec.kind, nodes: j.nodes, n_min, overhead, est_end: j.est_end }
            })
            .collect()
    }

    fn take_victim(&mut self, owner: JobId, victim: JobId, lent: u32, action: PreemptAction) -> Result<()> {
        let segment = self.job(victim).segments;
        self.job_mut(owner).loans.push(Loan { job: victim, lent, kind: LoanKind::Preempted, segment });
        match action {
            PreemptAction::WarnMalleable => {
                self.warn(victim, owner);
                Ok(())
            }
            _ => self.preempt_now(victim, Some(owner)),
        }
    }

    fn on_notice(&mut self, id: JobId) -> Result<()> {
        let now = self.now;
        let profile = self.job(id).spec.notice.clone().expect("notice event for a job with a notice");
        self.emit(LogEvent::Notice {
            job: id,
            estimated_arrival: profile.estimated_arrival,
            size: profile.estimated_size,
        });
        let Some(strategy) = self.mech.notice() else { return Ok(()) };
        if strategy == NoticeStrategy::N {
            return Ok(());
        }
        let target = profile.estimated_size;
        let expiry = profile.estimated_arrival + self.cfg.reservation_grace;
        let err = ledger_err(now);
        self.ledger
            .create_reservation(id, target, Some(expiry), ReservationPriority { class: 1, since: now })
            .map_err(&err)?;
        self.push(expiry, EventClass::ReservationTimeout, id, 0);
        let releasing: Vec<Forecast> = self
            .running
            .iter()
            .map(|&r| self.job(r))
            .filter(|j| {
                j.phase == Phase::Running
                    && j.beneficiary.is_none()
                    && self.ledger.backfill_host(j.spec.job_id).is_none()
            })
            .map(|j| Forecast { id: j.spec.job_id, nodes: j.nodes, est_end: j.est_end })
            .collect();
        let candidates = self.candidates();
        let input = NoticeInput {
            target,
            free: self.ledger.free(),
            estimated_arrival: profile.estimated_arrival,
            releasing: &releasing,
            candidates: &candidates,
        };
        let plan = handle_notice(strategy, &input).expect("CUA and CUP always plan");
        self.ledger.reserve_available(id, plan.bank_free).map_err(&err)?;
        for v in plan.victims {
            if v.action == PreemptAction::KillRigid && self.cfg.cup_checkpoint_aligned {
                let tl = self.job(v.job).timeline.expect("rigid victim has a timeline");
                if let Some(at) = tl.next_completion(now - 1, profile.estimated_arrival).filter(|&at| at > now) {
                    let segment = self.job(v.job).segments;
                    self.job_mut(id).loans.push(Loan { job: v.job, lent: v.lent, kind: LoanKind::Preempted, segment });
                    let j = self.job_mut(v.job);
                    j.beneficiary = Some(id);
                    j.kill_at = Some(at);
                    continue;
                }
            }
            self.take_victim(id, v.job, v.lent, v.action)?;
        }
        self.dirty = true;
        Ok(())
    }

    /// Forgets victims that were to be preempted for `owner` at a later checkpoint.
    fn cancel_pending_kills(&mut self, owner: JobId) {
        let pending: Vec<JobId> = self
            .running
            .iter()
            .copied()
            .filter(|&r| {
                let j = self.job(r);
                j.phase == Phase::Running && j.beneficiary == Some(owner)
            })
            .collect();
        for r in &pending {
            let j = self.job_mut(*r);
            j.beneficiary = None;
            j.kill_at = None;
        }
        self.job_mut(owner).loans.retain(|l| !pending.contains(&l.job));
    }

    fn on_arrival(&mut self, id: JobId) -> Result<()> {
        let now = self.now;
        let err = ledger_err(now);
        let strategy = self.mech.arrival().expect("arrival handling only runs for hybrid mechanisms");
        let size = self.job(id).spec.size;
        self.job_mut(id).arrived = true;
        self.cancel_pending_kills(id);
        let priority = ReservationPriority { class: 0, since: now };
        if self.ledger.reservation(id).is_some() {
            self.ledger.promote_reservation(id, priority).map_err(&err)?;
        } else {
            self.ledger.create_reservation(id, size, None, priority).map_err(&err)?;
        }
        let draining: u32 = self
            .running
            .iter()
            .map(|&r| self.job(r))
            .filter(|j| j.phase == Phase::Draining && j.beneficiary == Some(id))
            .map(|j| j.nodes)
            .sum();
        let banked_idle = self.ledger.reservation(id).map_or(0, |r| r.idle());
        let borrowers: Vec<BackfilledJob> = self
            .ledger
            .evict_backfilled(id)
            .into_iter()
            .map(|b| BackfilledJob { id: b, nodes: self.ledger.allocation(b) })
            .collect();
        let candidates = self.candidates();
        let input = ArrivalInput {
            demand: size.saturating_sub(draining),
            banked_idle,
            free: self.ledger.free(),
            backfilled: &borrowers,
            candidates: &candidates,
        };
        let plan = handle_arrival(strategy, &input);
        self.dirty = true;
        if !plan.feasible {
            self.ledger.dissolve_reservation(id).map_err(&err)?;
            let j = self.job_mut(id);
            j.loans.clear();
            j.pinned = true;
            j.phase = Phase::Queued;
            self.queued.insert(id);
            self.emit(LogEvent::Arrive { job: id, committed: false });
            return Ok(());
        }
        for b in &borrowers {
            if !plan.victims.iter().any(|v| v.job == b.id) {
                self.ledger.detach_backfilled(b.id).map_err(&err)?;
            }
        }
        self.ledger.reserve_available(id, plan.take_free).map_err(&err)?;
        for v in &plan.victims {
            match v.action {
                PreemptAction::EvictBackfilled => self.preempt_now(v.job, Some(id))?,
                action => self.take_victim(id, v.job, v.lent, action)?,
            }
        }
        for s in &plan.shrinks {
            let segment = self.job(s.job).segments;
            self.job_mut(id).loans.push(Loan { job: s.job, lent: s.from - s.to, kind: LoanKind::Shrunk, segment });
            self.ledger.release(s.job, s.from - s.to, Some(id)).map_err(&err)?;
            self.resize(s.job, s.to);
            self.emit(LogEvent::Shrink { job: s.job, from: s.from, to: s.to, owner: id });
        }
        let j = self.job_mut(id);
        j.committed = true;
        j.phase = Phase::Queued;
        self.emit(LogEvent::Arrive { job: id, committed: true });
        Ok(())
    }

    fn on_timeout(&mut self, id: JobId) -> Result<()> {
        let now = self.now;
        let due = self.ledger.reservation(id).is_some_and(|r| r.expiry == Some(now)) && !self.job(id).arrived;
        if !due {
            return Ok(());
        }
        self.cancel_pending_kills(id);
        self.job_mut(id).loans.clear();
        let released = self.ledger.dissolve_reservation(id).map_err(ledger_err(now))?;
        self.emit(LogEvent::Timeout { job: id, released });
        self.dirty = true;
        Ok(())
    }

    fn schedule_pass(&mut self) -> Result<()> {
        let started = Instant::now();
        let now = self.now;
        let err = ledger_err(now);
        let ready: Vec<JobId> = self
            .ledger
            .reservations_by_priority()
            .into_iter()
            .filter(|r| r.priority.class == 0 && r.held == r.target && r.occupied == 0)
            .map(|r| r.owner)
            .collect();
        for owner in ready {
            let n = self.ledger.claim_reservation(owner).map_err(&err)?;
            self.start_job(owner, n, None, false);
        }

        let mut queue: Vec<QueuedJob> = self
            .queued
            .iter()
            .map(|&id| self.job(id))
            .filter(|j| !j.committed)
            .map(|j| QueuedJob {
                id: j.spec.job_id,
                first_submit: j.first_submit,
                pinned: j.pinned,
                width: self.width_of(j),
                duration: self.duration_of(j),
                may_use_reserved: self.hybrid() && j.spec.kind != JobKind::OnDemand,
            })
            .collect();
        let mut blocked = false;
        if !queue.is_empty() {
            fcfs_order(&mut queue);
            let running: Vec<RunningJob> = self
                .running
                .iter()
                .map(|&id| self.job(id))
                .filter(|j| j.phase == Phase::Running && self.ledger.backfill_host(j.spec.job_id).is_none())
                .map(|j| RunningJob { id: j.spec.job_id, nodes: j.nodes, est_end: j.est_end })
                .collect();
            let reserved: Vec<IdleReservation> = self
                .ledger
                .reservations_by_priority()
                .into_iter()
                .filter(|r| r.priority.class == 1 && r.idle() > 0)
                .map(|r| IdleReservation { owner: r.owner, idle: r.idle() })
                .collect();
            let outcome = easy_backfill(now, self.ledger.free(), &queue, &running, &reserved);
            blocked = outcome.head.is_some();
            for s in outcome.starts {
                let reserved_from = match s.placement {
                    Placement::Free => {
                        self.ledger.allocate(s.job, s.nodes).map_err(&err)?;
                        None
                    }
                    Placement::Reserved(owner) => {
                        self.ledger.backfill_on_reserved(s.job, owner, s.nodes).map_err(&err)?;
                        Some(owner)
                    }
                };
                self.start_job(s.job, s.nodes, reserved_from, s.backfilled);
            }
        }
        if self.hybrid() && !blocked {
            self.grow_malleable()?;
        }
        self.latency.pass_ms.push(started.elapsed().as_secs_f64() * 1e3);
        Ok(())
    }

    /// Hands nodes nobody is waiting for to running malleable jobs, oldest first.
    fn grow_malleable(&mut self) -> Result<()> {
        let mut budget = self.ledger.free();
        if budget == 0 {
            return Ok(());
        }
        let mut grow: Vec<(Secs, JobId)> = self
            .running
            .iter()
            .map(|&id| self.job(id))
            .filter(|j| {
                j.phase == Phase::Running
                    && j.is_malleable()
                    && j.beneficiary.is_none()
                    && j.nodes < j.spec.n_max.unwrap_or(j.nodes)
                    && self.ledger.backfill_host(j.spec.job_id).is_none()
            })
            .map(|j| (j.first_submit, j.spec.job_id))
            .collect();
        grow.sort_unstable();
        for (_, id) in grow {
            if budget == 0 {
                break;
            }
            let j = self.job(id);
            let from = j.nodes;
            let to = j.spec.n_max.unwrap().min(from + budget);
            budget -= to - from;
            self.ledger.allocate(id, to - from).map_err(ledger_err(self.now))?;
            self.resize(id, to);
            let j = self.job_mut(id);
            j.original = j.original.max(to);
            self.emit(LogEvent::Expand { job: id, from, to });
        }
        Ok(())
    }

    fn duration_of(&self, j: &Job) -> DurationModel {
        let setup = j.spec.setup_time;
        if j.is_malleable() {
            return DurationModel::Work { setup, work: j.spec.estimated_work() - j.work };
        }
        let size = j.spec.size;
        let est = CheckpointTimeline {
            start: 0,
            setup,
            base: j.checkpointed,
            total: j.spec.runtime_estimate - setup,
            interval: (j.spec.kind == JobKind::Rigid).then(|| self.cfg.checkpoint_interval(size)),
            cost: self.cfg.checkpoint_cost(size),
        };
        DurationModel::Fixed(est.end())
    }
}
