//! Planning for on-demand job events: advance notice (N / CUA / CUP), actual
//! arrival (PAA / SPAA), completion (returning nodes to lenders) and the
//! rigid-job checkpoint timeline the overheads are computed from.
//!
//! Everything here is a pure function over a snapshot; the engine applies the
//! resulting plans.

use serde::Serialize;

use crate::config::{ArrivalStrategy, NoticeStrategy};
use crate::policy::Width;
use crate::{JobId, JobKind, Secs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PreemptAction {
    /// Stop a rigid job now; it restarts from its last checkpoint.
    KillRigid,
    /// Give a malleable job the warning period, then take its nodes.
    WarnMalleable,
    /// Preempt a job that borrowed the arriving job's reserved nodes.
    EvictBackfilled,
}

impl PreemptAction {
    pub fn for_kind(kind: JobKind) -> PreemptAction {
        match kind {
            JobKind::Malleable => PreemptAction::WarnMalleable,
            _ => PreemptAction::KillRigid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Victim {
    pub job: JobId,
    pub action: PreemptAction,
    pub nodes: u32,
    /// Nodes of this victim the on-demand job actually needs.
    pub lent: u32,
    pub overhead: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShrinkStep {
    pub job: JobId,
    pub from: u32,
    pub to: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreemptionPlan {
    /// Idle banked nodes of the arriving job's own reservation.
    pub take_banked: u32,
    pub take_free: u32,
    /// Backfilled evictions first, then victims by ascending overhead.
    pub victims: Vec<Victim>,
    pub shrinks: Vec<ShrinkStep>,
    /// Nodes provided by victims and shrinks.
    pub nodes_yielded: u32,
    pub feasible: bool,
}

impl PreemptionPlan {
    pub fn preemptions(&self) -> usize {
        self.victims.len()
    }
}

/// A running job that may be preempted or shrunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub id: JobId,
    pub kind: JobKind,
    pub nodes: u32,
    /// Equal to `nodes` for rigid jobs.
    pub n_min: u32,
    pub overhead: u64,
    pub est_end: Secs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackfilledJob {
    pub id: JobId,
    pub nodes: u32,
}

/// Node-seconds wasted if the job is preempted now.
///
/// Rigid jobs lose the time since their last checkpoint (or since setup ended)
/// and replay their setup. Malleable jobs hold their nodes through the warning
/// and replay their setup. On-demand jobs are never victims.
pub fn preemption_overhead(
    kind: JobKind,
    nodes: u32,
    setup: Secs,
    since_checkpoint: Secs,
    warning: Secs,
) -> Option<u64> {
    let per_node = match kind {
        JobKind::Rigid => since_checkpoint.max(0) + setup,
        JobKind::Malleable => warning + setup,
        JobKind::OnDemand => return None,
    };
    Some(nodes as u64 * per_node as u64)
}

fn by_overhead(candidates: &[Candidate]) -> Vec<Candidate> {
    let mut sorted: Vec<Candidate> = candidates.iter().copied().filter(|c| c.kind != JobKind::OnDemand).collect();
    sorted.sort_by_key(|c| (c.overhead, c.id));
    sorted
}

/// Greedy prefix of `candidates` by ascending overhead covering `deficit`.
fn take_victims(deficit: u32, candidates: &[Candidate]) -> Vec<Victim> {
    let mut victims = Vec::new();
    let mut need = deficit;
    for c in by_overhead(candidates) {
        if need == 0 {
            break;
        }
        let lent = c.nodes.min(need);
        need -= lent;
        victims.push(Victim {
            job: c.id,
            action: PreemptAction::for_kind(c.kind),
            nodes: c.nodes,
            lent,
            overhead: c.overhead,
        });
    }
    victims
}

pub struct ArrivalInput<'a> {
    pub demand: u32,
    pub banked_idle: u32,
    pub free: u32,
    /// Jobs borrowing the arriving job's own reservation.
    pub backfilled: &'a [BackfilledJob],
    pub candidates: &'a [Candidate],
}

/// Covers the part of the demand that banked and free nodes cannot, evicting
/// backfilled borrowers first. Returns the remaining deficit.
fn cover_without_victims(input: &ArrivalInput, plan: &mut PreemptionPlan) -> u32 {
    plan.take_banked = input.banked_idle.min(input.demand);
    plan.take_free = input.free.min(input.demand - plan.take_banked);
    let mut deficit = input.demand - plan.take_banked - plan.take_free;
    let mut borrowers = input.backfilled.to_vec();
    borrowers.sort_by_key(|b| b.id);
    for b in borrowers {
        if deficit == 0 {
            break;
        }
        let lent = b.nodes.min(deficit);
        deficit -= lent;
        plan.nodes_yielded += b.nodes;
        plan.victims.push(Victim {
            job: b.id,
            action: PreemptAction::EvictBackfilled,
            nodes: b.nodes,
            lent,
            overhead: 0,
        });
    }
    deficit
}

fn total_supply(input: &ArrivalInput) -> u64 {
    input.banked_idle.min(input.demand) as u64
        + input.free as u64
        + input.backfilled.iter().map(|b| b.nodes as u64).sum::<u64>()
        + input.candidates.iter().filter(|c| c.kind != JobKind::OnDemand).map(|c| c.nodes as u64).sum::<u64>()
}

/// Preempt-at-actual-arrival.
pub fn handle_arrival_paa(input: &ArrivalInput) -> PreemptionPlan {
    if total_supply(input) < input.demand as u64 {
        return PreemptionPlan::default();
    }
    let mut plan = PreemptionPlan::default();
    let deficit = cover_without_victims(input, &mut plan);
    for v in take_victims(deficit, input.candidates) {
        plan.nodes_yielded += v.nodes;
        plan.victims.push(v);
    }
    plan.feasible = true;
    plan
}

/// Shrink-preempt-at-actual-arrival: shrink running malleable jobs evenly if
/// they can cover the deficit, otherwise behave exactly like PAA.
pub fn handle_arrival_spaa(input: &ArrivalInput) -> PreemptionPlan {
    if total_supply(input) < input.demand as u64 {
        return PreemptionPlan::default();
    }
    let mut plan = PreemptionPlan::default();
    let deficit = cover_without_victims(input, &mut plan);
    if deficit == 0 {
        plan.feasible = true;
        return plan;
    }
    let shrinkable: Vec<(JobId, u32, u32)> = input
        .candidates
        .iter()
        .filter(|c| c.kind == JobKind::Malleable && c.nodes > c.n_min)
        .map(|c| (c.id, c.nodes, c.n_min))
        .collect();
    let supply: u64 = shrinkable.iter().map(|&(_, cur, min)| (cur - min) as u64).sum();
    if supply < deficit as u64 {
        return handle_arrival_paa(input);
    }
    for (job, to) in shrink_evenly(&shrinkable, deficit) {
        let from = shrinkable.iter().find(|s| s.0 == job).unwrap().1;
        plan.nodes_yielded += from - to;
        plan.shrinks.push(ShrinkStep { job, from, to });
    }
    plan.feasible = true;
    plan
}

pub fn handle_arrival(strategy: ArrivalStrategy, input: &ArrivalInput) -> PreemptionPlan {
    match strategy {
        ArrivalStrategy::Paa => handle_arrival_paa(input),
        ArrivalStrategy::Spaa => handle_arrival_spaa(input),
    }
}

/// Splits `deficit` over jobs in proportion to their slack `current - min`,
/// using largest remainders (ties to the smaller id) so the total is exact.
///
/// Input is `(job, current, min)`; output is `(job, new_size)` for jobs that
/// yield at least one node, in id order.
pub fn shrink_evenly(jobs: &[(JobId, u32, u32)], deficit: u32) -> Vec<(JobId, u32)> {
    let mut jobs: Vec<(JobId, u32, u32)> = jobs.iter().copied().filter(|j| j.1 > j.2).collect();
    jobs.sort_by_key(|j| j.0);
    let slack: u64 = jobs.iter().map(|j| (j.1 - j.2) as u64).sum();
    if deficit == 0 || slack == 0 {
        return Vec::new();
    }
    assert!(slack >= deficit as u64, "shrink supply {slack} below deficit {deficit}");
    let d = deficit as u64;
    let mut shares: Vec<(u64, u64, usize)> = jobs
        .iter()
        .enumerate()
        .map(|(i, j)| {
            let num = d * (j.1 - j.2) as u64;
            (num / slack, num % slack, i)
        })
        .collect();
    let assigned: u64 = shares.iter().map(|s| s.0).sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(shares[i].1), jobs[i].0));
    for &i in order.iter().take((d - assigned) as usize) {
        shares[i].0 += 1;
    }
    shares.iter().filter(|s| s.0 > 0).map(|&(share, _, i)| (jobs[i].0, jobs[i].1 - share as u32)).collect()
}

/// Running job whose nodes return to the pool at its estimated end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Forecast {
    pub id: JobId,
    pub nodes: u32,
    pub est_end: Secs,
}

pub struct NoticeInput<'a> {
    pub target: u32,
    pub free: u32,
    pub estimated_arrival: Secs,
    pub releasing: &'a [Forecast],
    pub candidates: &'a [Candidate],
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoticePlan {
    pub bank_free: u32,
    /// Nodes expected back from jobs ending before the estimated arrival.
    pub expected_supply: u32,
    /// Jobs to preempt before the estimated arrival (CUP only).
    pub victims: Vec<Victim>,
}

/// What to do on an advance notice. `None` means ignore it.
pub fn handle_notice(strategy: NoticeStrategy, input: &NoticeInput) -> Option<NoticePlan> {
    let bank_free = input.free.min(input.target);
    match strategy {
        NoticeStrategy::N => None,
        NoticeStrategy::Cua => Some(NoticePlan { bank_free, ..NoticePlan::default() }),
        NoticeStrategy::Cup => {
            let expected: u64 =
                input.releasing.iter().filter(|f| f.est_end <= input.estimated_arrival).map(|f| f.nodes as u64).sum();
            let still = (input.target - bank_free) as u64;
            let deficit = still.saturating_sub(expected) as u32;
            let late: Vec<Candidate> =
                input.candidates.iter().copied().filter(|c| c.est_end > input.estimated_arrival).collect();
            Some(NoticePlan {
                bank_free,
                expected_supply: expected.min(still) as u32,
                victims: take_victims(deficit, &late),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LenderStatus {
    /// Preempted for the on-demand job and still queued.
    Waiting { width: Width },
    /// Shrunk for the on-demand job and still running.
    Running { current: u32, original: u32 },
    /// Finished, restarted, or otherwise no longer owed anything.
    Gone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lender {
    pub job: JobId,
    pub lent: u32,
    pub status: LenderStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnAction {
    Resume { job: JobId, nodes: u32, from_returned: u32, from_free: u32 },
    Expand { job: JobId, from: u32, to: u32 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompletionPlan {
    pub actions: Vec<ReturnAction>,
    /// Returned nodes nobody claimed; they go back to the pool.
    pub unclaimed: u32,
}

/// Gives a finished on-demand job's nodes back to its lenders in lending order.
///
/// A queued lender resumes right away if its share plus free nodes fit it; a
/// shrunk lender grows back towards its original size. Shares that cannot be
/// used are returned to the pool.
pub fn handle_completion(returned: u32, free: u32, lenders: &[Lender]) -> CompletionPlan {
    let mut plan = CompletionPlan::default();
    let mut left = returned;
    let mut free = free;
    for l in lenders {
        let share = l.lent.min(left);
        left -= share;
        if share == 0 {
            continue;
        }
        match l.status {
            LenderStatus::Waiting { width } => match width.fit(share + free) {
                Some(n) if n >= share => {
                    let from_free = n - share;
                    free -= from_free;
                    plan.actions.push(ReturnAction::Resume { job: l.job, nodes: n, from_returned: share, from_free });
                }
                _ => plan.unclaimed += share,
            },
            LenderStatus::Running { current, original } => {
                let grow = share.min(original.saturating_sub(current));
                if grow > 0 {
                    plan.actions.push(ReturnAction::Expand { job: l.job, from: current, to: current + grow });
                }
                plan.unclaimed += share - grow;
            }
            LenderStatus::Gone => plan.unclaimed += share,
        }
    }
    plan.unclaimed += left;
    plan
}

/// Phase of a rigid run segment at a given instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentPhase {
    Setup,
    Compute,
    CheckpointWrite,
    Done,
}

/// Where a rigid run segment stands at some instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentState {
    pub phase: SegmentPhase,
    /// Compute seconds done, including those from earlier segments.
    pub progress: Secs,
    /// Progress saved by the latest completed checkpoint (or segment start).
    pub checkpointed: Secs,
    pub checkpoint_writing: Secs,
    pub setup_elapsed: Secs,
    /// Seconds since the last checkpoint completed, or since setup ended.
    pub since_checkpoint: Secs,
}

/// Timeline of one run segment of a fixed-size job: setup, then compute with a
/// checkpoint write after every `interval` compute seconds, as long as compute
/// remains afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointTimeline {
    pub start: Secs,
    pub setup: Secs,
    /// Progress restored at segment start.
    pub base: Secs,
    /// Total compute seconds of the job.
    pub total: Secs,
    /// `None` disables checkpointing.
    pub interval: Option<Secs>,
    pub cost: Secs,
}

impl CheckpointTimeline {
    pub fn remaining(&self) -> Secs {
        self.total - self.base
    }

    pub fn setup_end(&self) -> Secs {
        self.start + self.setup
    }

    /// Checkpoints written during this segment if it runs to completion.
    pub fn checkpoints(&self) -> Secs {
        match self.interval {
            Some(tau) if self.remaining() > 0 => (self.remaining() - 1) / tau,
            _ => 0,
        }
    }

    pub fn end(&self) -> Secs {
        self.setup_end() + self.remaining() + self.checkpoints() * self.cost
    }

    /// Completion times of every checkpoint write in this segment.
    pub fn checkpoint_completions(&self) -> Vec<Secs> {
        let Some(tau) = self.interval else { return Vec::new() };
        (1..=self.checkpoints()).map(|j| self.setup_end() + j * (tau + self.cost)).collect()
    }

    /// First checkpoint completion in `(after, until]`.
    pub fn next_completion(&self, after: Secs, until: Secs) -> Option<Secs> {
        self.checkpoint_completions().into_iter().find(|&t| t > after && t <= until)
    }

    pub fn state_at(&self, t: Secs) -> SegmentState {
        let elapsed = (t - self.start).max(0);
        let setup_elapsed = elapsed.min(self.setup);
        if elapsed < self.setup {
            return SegmentState {
                phase: SegmentPhase::Setup,
                progress: self.base,
                checkpointed: self.base,
                checkpoint_writing: 0,
                setup_elapsed,
                since_checkpoint: 0,
            };
        }
        let e = elapsed - self.setup;
        let k = self.checkpoints();
        let (compute, writing, done_ckpts, since) = match self.interval {
            Some(tau) if k > 0 => {
                let cycle = tau + self.cost;
                let m = e / cycle;
                let r = e % cycle;
                if m >= k {
                    (k * tau + (e - k * cycle), 0, k, e - k * cycle)
                } else if r < tau {
                    (m * tau + r, 0, m, r)
                } else {
                    ((m + 1) * tau, r - tau, m, r)
                }
            }
            _ => (e, 0, 0, e),
        };
        let compute = compute.min(self.remaining());
        let phase = if t >= self.end() {
            SegmentPhase::Done
        } else if writing > 0 {
            SegmentPhase::CheckpointWrite
        } else {
            SegmentPhase::Compute
        };
        let checkpointed =
            if phase == SegmentPhase::Done { self.total } else { self.base + done_ckpts * self.interval.unwrap_or(0) };
        SegmentState {
            phase,
            progress: self.base + compute,
            checkpointed,
            checkpoint_writing: writing,
            setup_elapsed,
            since_checkpoint: since,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(id: JobId, kind: JobKind, nodes: u32, n_min: u32, overhead: u64) -> Candidate {
        Candidate { id, kind, nodes, n_min, overhead, est_end: 1_000_000 }
    }

    #[test]
    fn overhead_formulas() {
        assert_eq!(preemption_overhead(JobKind::Rigid, 100, 300, 1800, 120), Some(210_000));
        assert_eq!(preemption_overhead(JobKind::Rigid, 100, 300, 0, 120), Some(30_000));
        assert_eq!(preemption_overhead(JobKind::Malleable, 50, 120, 999, 120), Some(12_000));
        assert_eq!(preemption_overhead(JobKind::OnDemand, 5, 0, 0, 120), None);
    }

    #[test]
    fn paa_no_preemption_when_free_suffices() {
        let c = [cand(1, JobKind::Rigid, 4, 4, 10)];
        let plan =
            handle_arrival_paa(&ArrivalInput { demand: 3, banked_idle: 0, free: 5, backfilled: &[], candidates: &c });
        assert!(plan.feasible);
        assert!(plan.victims.is_empty());
        assert_eq!(plan.take_free, 3);
    }

    #[test]
    fn paa_ascending_overhead() {
        let c = [cand(2, JobKind::Rigid, 5, 5, 50_000), cand(1, JobKind::Malleable, 3, 1, 10_000)];
        let plan =
            handle_arrival_paa(&ArrivalInput { demand: 4, banked_idle: 0, free: 0, backfilled: &[], candidates: &c });
        assert!(plan.feasible);
        let ids: Vec<_> = plan.victims.iter().map(|v| v.job).collect();
        assert_eq!(ids, [1, 2]);
        assert_eq!(plan.nodes_yielded, 8);
        assert_eq!(plan.victims[1].lent, 1);
    }

    #[test]
    fn paa_infeasible_without_preemptable_nodes() {
        let c = [cand(1, JobKind::OnDemand, 8, 8, 0)];
        let plan =
            handle_arrival_paa(&ArrivalInput { demand: 4, banked_idle: 0, free: 0, backfilled: &[], candidates: &c });
        assert!(!plan.feasible);
        assert!(plan.victims.is_empty());
    }

    #[test]
    fn paa_evicts_backfilled_first() {
        let c = [cand(1, JobKind::Malleable, 3, 1, 1)];
        let b = [BackfilledJob { id: 9, nodes: 2 }];
        let plan =
            handle_arrival_paa(&ArrivalInput { demand: 5, banked_idle: 2, free: 0, backfilled: &b, candidates: &c });
        assert_eq!(plan.victims[0].action, PreemptAction::EvictBackfilled);
        assert_eq!(plan.victims.len(), 2);
        assert_eq!(plan.victims[1].lent, 1);
    }

    #[test]
    fn spaa_shrinks_proportionally() {
        let c = [cand(1, JobKind::Malleable, 100, 20, 5), cand(2, JobKind::Malleable, 60, 12, 5)];
        let plan =
            handle_arrival_spaa(&ArrivalInput { demand: 64, banked_idle: 0, free: 0, backfilled: &[], candidates: &c });
        assert!(plan.feasible);
        assert!(plan.victims.is_empty());
        assert_eq!(
            plan.shrinks,
            vec![ShrinkStep { job: 1, from: 100, to: 60 }, ShrinkStep { job: 2, from: 60, to: 36 }]
        );
        let zero =
            handle_arrival_spaa(&ArrivalInput { demand: 0, banked_idle: 0, free: 0, backfilled: &[], candidates: &c });
        assert!(zero.feasible && zero.shrinks.is_empty() && zero.victims.is_empty());
    }

    #[test]
    fn spaa_falls_back_to_paa() {
        let c = [
            cand(1, JobKind::Malleable, 30, 10, 5),
            cand(2, JobKind::Malleable, 20, 10, 7),
            cand(3, JobKind::Rigid, 50, 50, 1),
        ];
        let input = ArrivalInput { demand: 64, banked_idle: 0, free: 0, backfilled: &[], candidates: &c };
        assert_eq!(handle_arrival_spaa(&input), handle_arrival_paa(&input));
    }

    #[test]
    fn shrink_evenly_rules() {
        assert_eq!(shrink_evenly(&[(1, 10, 4)], 6), vec![(1, 4)]);
        assert_eq!(shrink_evenly(&[(1, 100, 20), (2, 60, 12)], 64), vec![(1, 60), (2, 36)]);
        assert_eq!(shrink_evenly(&[(2, 5, 1), (1, 5, 1)], 1), vec![(1, 4)]);
    }

    #[test]
    fn notice_strategies() {
        let input = NoticeInput { target: 5, free: 2, estimated_arrival: 100, releasing: &[], candidates: &[] };
        assert_eq!(handle_notice(NoticeStrategy::N, &input), None);
        assert_eq!(handle_notice(NoticeStrategy::Cua, &input).unwrap().bank_free, 2);

        let releasing = [Forecast { id: 4, nodes: 1, est_end: 90 }];
        let c = [cand(7, JobKind::Rigid, 3, 3, 100), cand(8, JobKind::Rigid, 3, 3, 50)];
        let input = NoticeInput { target: 6, free: 2, estimated_arrival: 100, releasing: &releasing, candidates: &c };
        let plan = handle_notice(NoticeStrategy::Cup, &input).unwrap();
        assert_eq!(plan.expected_supply, 1);
        assert_eq!(plan.victims.iter().map(|v| v.job).collect::<Vec<_>>(), [8]);
    }

    #[test]
    fn completion_returns_nodes() {
        // Shrunk 60 -> 36 gets its 24 nodes back.
        let lenders = [Lender { job: 1, lent: 24, status: LenderStatus::Running { current: 36, original: 60 } }];
        let plan = handle_completion(24, 0, &lenders);
        assert_eq!(plan.actions, vec![ReturnAction::Expand { job: 1, from: 36, to: 60 }]);
        assert_eq!(plan.unclaimed, 0);

        let gone = [Lender { job: 1, lent: 4, status: LenderStatus::Gone }];
        assert_eq!(handle_completion(6, 0, &gone).unclaimed, 6);

        let waiting = [Lender { job: 2, lent: 5, status: LenderStatus::Waiting { width: Width::Fixed(8) } }];
        let plan = handle_completion(5, 3, &waiting);
        assert_eq!(plan.actions, vec![ReturnAction::Resume { job: 2, nodes: 8, from_returned: 5, from_free: 3 }]);
        assert_eq!(handle_completion(5, 2, &waiting).unclaimed, 5);
    }

    #[test]
    fn timeline_arithmetic() {
        // setup 10, 25 s compute, checkpoint every 10 s costing 2 s.
        let tl = CheckpointTimeline { start: 0, setup: 10, base: 0, total: 25, interval: Some(10), cost: 2 };
        assert_eq!(tl.checkpoints(), 2);
        assert_eq!(tl.end(), 39);
        assert_eq!(tl.checkpoint_completions(), vec![22, 34]);
        let s = tl.state_at(23);
        assert_eq!((s.progress, s.checkpointed, s.since_checkpoint), (11, 10, 1));
        let s = tl.state_at(21);
        assert_eq!((s.progress, s.checkpointed, s.checkpoint_writing), (10, 0, 1));
        assert_eq!(tl.state_at(5).phase, SegmentPhase::Setup);
        assert_eq!(tl.state_at(39).phase, SegmentPhase::Done);

        // Exactly one interval of work: no checkpoint needed.
        let tl = CheckpointTimeline { start: 0, setup: 0, base: 0, total: 10, interval: Some(10), cost: 2 };
        assert_eq!(tl.checkpoints(), 0);
        assert_eq!(tl.end(), 10);
    }
}
