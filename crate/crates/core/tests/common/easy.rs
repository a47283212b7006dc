use hybrid_sched::policy::{easy_backfill, fcfs_order, DurationModel, QueuedJob, RunningJob, StartDecision, Width};
use hybrid_sched::Secs;
use proptest::prelude::*;

const NOW: Secs = 1_000;

/// Earliest time `need` nodes are free if every job ends at its estimate
/// and nothing else starts.
fn head_start(free: u32, need: u32, busy: &[(Secs, u32)]) -> Option<Secs> {
    let mut times: Vec<Secs> = busy.iter().map(|b| b.0).chain([NOW]).collect();
    times.sort();
    times.into_iter().find(|&t| free + busy.iter().filter(|b| b.0 <= t).map(|b| b.1).sum::<u32>() >= need)
}

fn queued() -> impl Strategy<Value = QueuedJob> {
    (1u32..24, 0u32..24, any::<bool>(), 1i64..5_000, 0i64..600, 1u64..200_000).prop_map(
        |(a, b, malleable, est, setup, work)| {
            let (lo, hi) = (a.min(b.max(1)), a.max(b));
            QueuedJob {
                id: 0,
                first_submit: 0,
                pinned: false,
                width: if malleable { Width::Range { min: lo, max: hi } } else { Width::Fixed(a) },
                duration: if malleable { DurationModel::Work { setup, work } } else { DurationModel::Fixed(est) },
                may_use_reserved: false,
            }
        },
    )
}

pub type Case = (u32, Vec<(u32, Secs)>, Vec<(QueuedJob, Secs)>);

pub fn cases() -> impl Strategy<Value = Case> {
    (
        8u32..64,
        prop::collection::vec((1u32..16, 1i64..8_000), 0..10),
        prop::collection::vec((queued(), 0i64..500), 1..14),
    )
}

/// Removing any single backfilled start leaves the head's reservation where it was.
pub fn check((capacity, running, queue): Case) -> Result<(), TestCaseError> {
    let mut used = 0;
    let mut running_jobs = Vec::new();
    for (i, (n, d)) in running.into_iter().enumerate() {
        if used + n <= capacity {
            used += n;
            running_jobs.push(RunningJob { id: 1_000 + i as u64, nodes: n, est_end: NOW + d });
        }
    }
    let running = running_jobs;
    let free = capacity - used;
    let mut queue: Vec<QueuedJob> = queue
        .into_iter()
        .enumerate()
        .filter(|(_, (j, _))| j.width.min() <= capacity)
        .map(|(i, (mut j, submit))| {
            j.id = i as u64 + 1;
            j.first_submit = submit;
            j
        })
        .collect();
    fcfs_order(&mut queue);

    let out = easy_backfill(NOW, free, &queue, &running, &[]);
    let Some(head) = out.head else { return Ok(()) };
    let busy = |starts: &[&StartDecision]| -> (u32, Vec<(Secs, u32)>) {
        let mut f = free;
        let mut b: Vec<(Secs, u32)> = running.iter().map(|r| (r.est_end, r.nodes)).collect();
        for s in starts {
            f -= s.nodes;
            b.push((s.est_end, s.nodes));
        }
        (f, b)
    };
    let all: Vec<&StartDecision> = out.starts.iter().collect();
    let (f, b) = busy(&all);
    let with_all = head_start(f, head.nodes, &b);
    prop_assert_eq!(with_all, head.start);
    for skip in out.starts.iter().filter(|s| s.backfilled) {
        let rest: Vec<&StartDecision> = out.starts.iter().filter(|s| s.job != skip.job).collect();
        let (f, b) = busy(&rest);
        prop_assert_eq!(head_start(f, head.nodes, &b), with_all, "job {} moved the head", skip.job);
    }
    for s in &out.starts {
        let j = queue.iter().find(|j| j.id == s.job).unwrap();
        prop_assert_eq!(j.width.fit(s.nodes), Some(s.nodes));
    }
    Ok(())
}
