//! FCFS ordering with EASY backfilling.
//!
//! [`easy_backfill`] is a pure function over a snapshot of the queue, the
//! running jobs and the free node count. It starts jobs from the head of the
//! queue while they fit, gives the first blocked job (the head) a reservation
//! at the earliest time the running jobs' estimates allow, then lets later
//! jobs start if they cannot delay that reservation. Later jobs that do not
//! fit the free pool may borrow idle nodes banked for an on-demand job.

use std::cmp::Reverse;

use crate::{JobId, Secs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    Fixed(u32),
    Range { min: u32, max: u32 },
}

impl Width {
    pub fn min(self) -> u32 {
        match self {
            Width::Fixed(n) => n,
            Width::Range { min, .. } => min,
        }
    }

    /// Largest size not above `limit`, if the job fits at all.
    pub fn fit(self, limit: u32) -> Option<u32> {
        match self {
            Width::Fixed(n) => (n <= limit).then_some(n),
            Width::Range { min, max } => (min <= limit).then(|| max.min(limit)),
        }
    }
}

/// Estimated wall time as a function of the node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DurationModel {
    Fixed(Secs),
    /// `setup + ceil(work / n)`
    Work {
        setup: Secs,
        work: u64,
    },
}

impl DurationModel {
    pub fn at(self, n: u32) -> Secs {
        match self {
            DurationModel::Fixed(d) => d,
            DurationModel::Work { setup, work } => setup + work.div_ceil(n.max(1) as u64) as Secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedJob {
    pub id: JobId,
    pub first_submit: Secs,
    /// On-demand job that could not start on arrival; it goes to the front.
    pub pinned: bool,
    pub width: Width,
    pub duration: DurationModel,
    /// Whether the job may borrow nodes banked for an on-demand job.
    pub may_use_reserved: bool,
}

/// A running job whose nodes return to the free pool when it ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunningJob {
    pub id: JobId,
    pub nodes: u32,
    pub est_end: Secs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdleReservation {
    pub owner: JobId,
    pub idle: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Placement {
    Free,
    Reserved(JobId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StartDecision {
    pub job: JobId,
    pub nodes: u32,
    pub placement: Placement,
    /// Started out of order, behind a blocked head.
    pub backfilled: bool,
    pub est_end: Secs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadReservation {
    pub job: JobId,
    /// `None` when running jobs alone can never free enough nodes.
    pub start: Option<Secs>,
    pub nodes: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PassOutcome {
    pub starts: Vec<StartDecision>,
    pub head: Option<HeadReservation>,
}

/// Sorts pinned on-demand jobs first, then everything by first submission.
///
/// Preempted jobs keep their first submission time, so they move ahead of
/// jobs submitted after them.
pub fn fcfs_order(queue: &mut [QueuedJob]) {
    queue.sort_by_key(|j| (Reverse(j.pinned), j.first_submit, j.id));
}

/// Earliest time `need` nodes are available if running jobs end at their
/// estimates, and the nodes to spare at that time.
pub fn shadow_time(now: Secs, free: u32, need: u32, running: &[RunningJob]) -> Option<(Secs, u32)> {
    if free >= need {
        return Some((now, free - need));
    }
    let mut ends: Vec<&RunningJob> = running.iter().collect();
    ends.sort_by_key(|r| (r.est_end, r.id));
    let mut avail = free;
    let mut i = 0;
    while i < ends.len() {
        let t = ends[i].est_end;
        // Every job ending at the same instant frees its nodes together.
        while i < ends.len() && ends[i].est_end == t {
            avail += ends[i].nodes;
            i += 1;
        }
        if avail >= need {
            return Some((t.max(now), avail - need));
        }
    }
    None
}

/// One scheduling pass over an FCFS-ordered queue.
pub fn easy_backfill(
    now: Secs,
    mut free: u32,
    queue: &[QueuedJob],
    running: &[RunningJob],
    reserved: &[IdleReservation],
) -> PassOutcome {
    let mut out = PassOutcome::default();
    let mut running: Vec<RunningJob> = running.to_vec();

    let mut idx = 0;
    while idx < queue.len() {
        let job = &queue[idx];
        let Some(n) = job.width.fit(free) else { break };
        let est_end = now + job.duration.at(n);
        free -= n;
        running.push(RunningJob { id: job.id, nodes: n, est_end });
        out.starts.push(StartDecision {
            job: job.id,
            nodes: n,
            placement: Placement::Free,
            backfilled: false,
            est_end,
        });
        idx += 1;
    }
    let Some(head) = queue.get(idx) else {
        return out;
    };

    let need = head.width.min();
    let shadow = shadow_time(now, free, need, &running);
    out.head = Some(HeadReservation { job: head.id, start: shadow.map(|s| s.0), nodes: need });
    let (shadow_at, mut extra) = match shadow {
        Some((t, e)) => (Some(t), e),
        None => (None, u32::MAX),
    };
    let mut reserved: Vec<IdleReservation> = reserved.to_vec();

    for job in &queue[idx + 1..] {
        let ends_in_time = |n: u32| shadow_at.is_none_or(|s| now + job.duration.at(n) <= s);
        let mut chosen = None;
        if let Some(n) = job.width.fit(free) {
            if ends_in_time(n) {
                chosen = Some((n, false));
            } else if let Some(n) = job.width.fit(free.min(extra)) {
                chosen = Some((n, true));
            }
        }
        if let Some((n, uses_extra)) = chosen {
            free -= n;
            if uses_extra && shadow_at.is_some() {
                extra -= n;
            }
            out.starts.push(StartDecision {
                job: job.id,
                nodes: n,
                placement: Placement::Free,
                backfilled: true,
                est_end: now + job.duration.at(n),
            });
            continue;
        }
        if !job.may_use_reserved {
            continue;
        }
        for r in reserved.iter_mut() {
            if let Some(n) = job.width.fit(r.idle) {
                r.idle -= n;
                out.starts.push(StartDecision {
                    job: job.id,
                    nodes: n,
                    placement: Placement::Reserved(r.owner),
                    backfilled: true,
                    est_end: now + job.duration.at(n),
                });
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rigid(id: JobId, submit: Secs, n: u32, est: Secs) -> QueuedJob {
        QueuedJob {
            id,
            first_submit: submit,
            pinned: false,
            width: Width::Fixed(n),
            duration: DurationModel::Fixed(est),
            may_use_reserved: true,
        }
    }

    #[test]
    fn fcfs_sorts_by_first_submit() {
        let mut q = vec![rigid(1, 5, 1, 1), rigid(2, 3, 1, 1), rigid(3, 9, 1, 1)];
        fcfs_order(&mut q);
        assert_eq!(q.iter().map(|j| j.first_submit).collect::<Vec<_>>(), [3, 5, 9]);

        // A preempted job keeps its first submission time.
        let mut q = vec![rigid(1, 5, 1, 1), rigid(2, 1, 1, 1)];
        fcfs_order(&mut q);
        assert_eq!(q[0].id, 2);

        let mut pinned = rigid(7, 100, 1, 1);
        pinned.pinned = true;
        let mut q = vec![rigid(1, 5, 1, 1), pinned, rigid(2, 3, 1, 1)];
        fcfs_order(&mut q);
        assert_eq!(q[0].id, 7);
    }

    #[test]
    fn empty_queue_does_nothing() {
        assert_eq!(easy_backfill(0, 4, &[], &[], &[]), PassOutcome::default());
    }

    #[test]
    fn fitting_job_starts_now() {
        let out = easy_backfill(3, 4, &[rigid(1, 0, 2, 10)], &[], &[]);
        assert_eq!(out.starts.len(), 1);
        assert_eq!(out.starts[0].est_end, 13);
        assert!(!out.starts[0].backfilled);
    }

    // 4 nodes; J0 runs on 3 until t=10; head J1 needs 4; J2 needs 1.
    #[test]
    fn short_job_backfills_behind_head() {
        let running = [RunningJob { id: 0, nodes: 3, est_end: 10 }];
        let out = easy_backfill(0, 1, &[rigid(1, 0, 4, 5), rigid(2, 1, 1, 8)], &running, &[]);
        assert_eq!(out.head, Some(HeadReservation { job: 1, start: Some(10), nodes: 4 }));
        assert_eq!(out.starts.len(), 1);
        assert_eq!(out.starts[0].job, 2);
        assert!(out.starts[0].backfilled);
    }

    #[test]
    fn long_job_does_not_backfill() {
        let running = [RunningJob { id: 0, nodes: 3, est_end: 10 }];
        let out = easy_backfill(0, 1, &[rigid(1, 0, 4, 5), rigid(2, 1, 1, 12)], &running, &[]);
        assert!(out.starts.is_empty());
    }

    #[test]
    fn borrows_idle_reserved_nodes() {
        let running = [RunningJob { id: 0, nodes: 3, est_end: 10 }];
        let reserved = [IdleReservation { owner: 50, idle: 5 }];
        let out = easy_backfill(0, 0, &[rigid(1, 0, 3, 5), rigid(3, 1, 4, 100)], &running, &reserved);
        assert_eq!(out.starts.len(), 1);
        assert_eq!(out.starts[0].placement, Placement::Reserved(50));
        assert_eq!(out.starts[0].nodes, 4);
    }

    #[test]
    fn malleable_backfills_at_largest_feasible_size() {
        let running = [RunningJob { id: 0, nodes: 4, est_end: 100 }];
        let head = rigid(1, 0, 8, 10);
        let m = QueuedJob {
            id: 2,
            first_submit: 1,
            pinned: false,
            width: Width::Range { min: 1, max: 6 },
            duration: DurationModel::Work { setup: 0, work: 1000 },
            may_use_reserved: false,
        };
        // 4 free nodes now, head needs 8 at t=100 with 0 spare: only sizes ending by t=100 are allowed.
        let out = easy_backfill(0, 4, &[head, m], &running, &[]);
        assert_eq!(out.starts.len(), 0, "1000/4 = 250 s overruns the shadow");

        let running = [RunningJob { id: 0, nodes: 4, est_end: 300 }];
        let out = easy_backfill(0, 4, &[rigid(1, 0, 8, 10), out_m()], &running, &[]);
        assert_eq!(out.starts[0].nodes, 4);

        fn out_m() -> QueuedJob {
            QueuedJob {
                id: 2,
                first_submit: 1,
                pinned: false,
                width: Width::Range { min: 1, max: 6 },
                duration: DurationModel::Work { setup: 0, work: 1000 },
                may_use_reserved: false,
            }
        }
    }

    #[test]
    fn spare_nodes_allow_long_backfill() {
        // Head needs 2; at t=10 there are 4 available, so 2 spare nodes can run past the shadow.
        let running = [RunningJob { id: 0, nodes: 3, est_end: 10 }];
        let out = easy_backfill(0, 1, &[rigid(1, 0, 2, 5), rigid(2, 1, 1, 100)], &running, &[]);
        assert_eq!(out.starts.len(), 1);
        assert_eq!(out.head.unwrap().start, Some(10));
    }
}
