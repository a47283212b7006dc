//! Node-count accounting.
//!
//! Nodes are fungible; the ledger only tracks how many are free, allocated to
//! each job, or banked in a reservation for an on-demand job. A reservation's
//! banked nodes may be lent to backfilled jobs; those nodes are counted both as
//! the job's allocation and as `occupied` in the reservation. The ledger
//! asserts `free + allocated + (held - occupied) == capacity` after every
//! mutation.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::{JobId, Secs};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LedgerError {
    /// Not enough nodes; the ledger is unchanged.
    Insufficient { wanted: u32, available: u32 },
    /// The caller asked for something impossible: a simulator bug.
    Invariant(String),
}

impl std::fmt::Display for LedgerError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LedgerError::Insufficient { wanted, available } => {
                write!(f, "wanted {wanted} nodes, {available} available")
            }
            LedgerError::Invariant(m) => f.write_str(m),
        }
    }
}

type LedgerResult<T> = Result<T, LedgerError>;

/// Banking order among reservations: lower keys are served first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReservationPriority {
    /// 0 for jobs that already arrived and wait for their nodes, 1 for notices.
    pub class: u8,
    /// Arrival or notice time.
    pub since: Secs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReservationState {
    pub owner: JobId,
    pub target: u32,
    pub held: u32,
    /// Banked nodes currently lent to backfilled jobs.
    pub occupied: u32,
    pub expiry: Option<Secs>,
    pub priority: ReservationPriority,
}

impl ReservationState {
    pub fn idle(&self) -> u32 {
        self.held - self.occupied
    }

    pub fn missing(&self) -> u32 {
        self.target - self.held
    }
}

/// Where released nodes ended up.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Released {
    /// Per reservation owner, in banking order.
    pub banked: Vec<(JobId, u32)>,
    pub to_free: u32,
    /// Nodes that went back to the reservation a backfilled job was borrowing.
    pub returned_to_host: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditRecord {
    pub time: Secs,
    pub op: &'static str,
    pub job: JobId,
    pub nodes: u32,
    pub free: u32,
    pub allocated: u32,
    pub reserved_idle: u32,
}

#[derive(Debug, Clone)]
pub struct ClusterLedger {
    capacity: u32,
    free: u32,
    allocations: BTreeMap<JobId, u32>,
    reservations: BTreeMap<JobId, ReservationState>,
    /// backfilled job -> reservation owner whose nodes it occupies
    backfill_links: BTreeMap<JobId, JobId>,
    allocated_total: u32,
    held_total: u32,
    occupied_total: u32,
    clock: Secs,
    audit: Option<Vec<AuditRecord>>,
}

impl ClusterLedger {
    pub fn new(capacity: u32) -> Self {
        ClusterLedger {
            capacity,
            free: capacity,
            allocations: BTreeMap::new(),
            reservations: BTreeMap::new(),
            backfill_links: BTreeMap::new(),
            allocated_total: 0,
            held_total: 0,
            occupied_total: 0,
            clock: 0,
            audit: None,
        }
    }

    pub fn with_audit(mut self) -> Self {
        self.audit = Some(Vec::new());
        self
    }

    pub fn set_clock(&mut self, now: Secs) {
        self.clock = now;
    }

    pub fn take_audit(&mut self) -> Vec<AuditRecord> {
        self.audit.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn free(&self) -> u32 {
        self.free
    }

    pub fn allocated(&self) -> u32 {
        self.allocated_total
    }

    pub fn reserved_idle(&self) -> u32 {
        self.held_total - self.occupied_total
    }

    pub fn allocation(&self, job: JobId) -> u32 {
        self.allocations.get(&job).copied().unwrap_or(0)
    }

    pub fn reservation(&self, owner: JobId) -> Option<&ReservationState> {
        self.reservations.get(&owner)
    }

    pub fn backfill_host(&self, job: JobId) -> Option<JobId> {
        self.backfill_links.get(&job).copied()
    }

    /// Reservations in banking order.
    pub fn reservations_by_priority(&self) -> Vec<&ReservationState> {
        let mut v: Vec<_> = self.reservations.values().collect();
        v.sort_by_key(|r| (r.priority, r.owner));
        v
    }

    fn record(&mut self, op: &'static str, job: JobId, nodes: u32) {
        let allocated = self.allocated_total;
        let idle = self.reserved_idle();
        let free = self.free;
        if let Some(log) = self.audit.as_mut() {
            log.push(AuditRecord { time: self.clock, op, job, nodes, free, allocated, reserved_idle: idle });
        }
    }

    fn check(&self) -> LedgerResult<()> {
        let total =
            self.free as u64 + self.allocated_total as u64 + self.held_total as u64 - self.occupied_total as u64;
        if total != self.capacity as u64 {
            return Err(LedgerError::Invariant(format!(
                "conservation broken: free {} + allocated {} + reserved idle {} != capacity {}",
                self.free,
                self.allocated_total,
                self.held_total - self.occupied_total,
                self.capacity
            )));
        }
        Ok(())
    }

    fn finish(&mut self, op: &'static str, job: JobId, nodes: u32) -> LedgerResult<()> {
        self.record(op, job, nodes);
        self.check()
    }

    /// Takes `n` free nodes for `job`.
    pub fn allocate(&mut self, job: JobId, n: u32) -> LedgerResult<()> {
        if n == 0 {
            return Ok(());
        }
        if n > self.free {
            return Err(LedgerError::Insufficient { wanted: n, available: self.free });
        }
        self.free -= n;
        *self.allocations.entry(job).or_default() += n;
        self.allocated_total += n;
        self.finish("allocate", job, n)
    }

    fn take_allocation(&mut self, job: JobId, n: u32) -> LedgerResult<()> {
        let held = self.allocations.get_mut(&job);
        match held {
            Some(h) if *h >= n => {
                *h -= n;
                if *h == 0 {
                    self.allocations.remove(&job);
                }
                self.allocated_total -= n;
                Ok(())
            }
            _ => {
                Err(LedgerError::Invariant(format!("job {job} releases {n} nodes but holds {}", self.allocation(job))))
            }
        }
    }

    /// Banks `n` loose nodes into reservations in priority order; the rest become free.
    fn bank_or_free(&mut self, mut n: u32, out: &mut Released) {
        let order: Vec<JobId> = self.reservations_by_priority().iter().map(|r| r.owner).collect();
        for owner in order {
            if n == 0 {
                break;
            }
            let r = self.reservations.get_mut(&owner).unwrap();
            let take = r.missing().min(n);
            if take > 0 {
                r.held += take;
                self.held_total += take;
                n -= take;
                out.banked.push((owner, take));
            }
        }
        self.free += n;
        out.to_free += n;
    }

    /// Returns `n` of `job`'s nodes.
    ///
    /// Nodes borrowed from a reservation go back to it. Otherwise they fill the
    /// `beneficiary` reservation first, then reservations in priority order,
    /// then the free pool.
    pub fn release(&mut self, job: JobId, n: u32, beneficiary: Option<JobId>) -> LedgerResult<Released> {
        let mut out = Released::default();
        if n == 0 {
            return Ok(out);
        }
        self.take_allocation(job, n)?;
        if let Some(host) = self.backfill_links.get(&job).copied() {
            let r = self
                .reservations
                .get_mut(&host)
                .ok_or_else(|| LedgerError::Invariant(format!("job {job} linked to missing reservation {host}")))?;
            if r.occupied < n {
                return Err(LedgerError::Invariant(format!("reservation {host} lends fewer than {n} nodes")));
            }
            r.occupied -= n;
            self.occupied_total -= n;
            out.returned_to_host = n;
            if self.allocation(job) == 0 {
                self.backfill_links.remove(&job);
            }
            self.finish("release", job, n)?;
            return Ok(out);
        }
        let mut rest = n;
        if let Some(r) = beneficiary.and_then(|b| self.reservations.get_mut(&b)) {
            let take = r.missing().min(rest);
            if take > 0 {
                r.held += take;
                self.held_total += take;
                rest -= take;
                out.banked.push((r.owner, take));
            }
        }
        self.bank_or_free(rest, &mut out);
        self.finish("release", job, n)?;
        Ok(out)
    }

    /// Releases `n` nodes straight into the free pool.
    pub fn release_to_free(&mut self, job: JobId, n: u32) -> LedgerResult<()> {
        if n == 0 {
            return Ok(());
        }
        if self.backfill_links.contains_key(&job) {
            return Err(LedgerError::Invariant(format!("job {job} is backfilled; use release")));
        }
        self.take_allocation(job, n)?;
        self.free += n;
        self.finish("release_free", job, n)
    }

    /// Moves `n` nodes from one job's allocation to another's.
    pub fn transfer(&mut self, from: JobId, to: JobId, n: u32) -> LedgerResult<()> {
        if n == 0 {
            return Ok(());
        }
        if self.backfill_links.contains_key(&from) || self.backfill_links.contains_key(&to) {
            return Err(LedgerError::Invariant("transfer involving a backfilled job".into()));
        }
        self.take_allocation(from, n)?;
        *self.allocations.entry(to).or_default() += n;
        self.allocated_total += n;
        self.finish("transfer", to, n)
    }

    pub fn create_reservation(
        &mut self,
        owner: JobId,
        target: u32,
        expiry: Option<Secs>,
        priority: ReservationPriority,
    ) -> LedgerResult<()> {
        if self.reservations.contains_key(&owner) || target > self.capacity {
            return Err(LedgerError::Invariant(format!("cannot open reservation {owner} for {target} nodes")));
        }
        self.reservations.insert(owner, ReservationState { owner, target, held: 0, occupied: 0, expiry, priority });
        self.finish("reserve_open", owner, target)
    }

    /// Converts a notice reservation into one for a job that has arrived.
    pub fn promote_reservation(&mut self, owner: JobId, priority: ReservationPriority) -> LedgerResult<()> {
        let r = self
            .reservations
            .get_mut(&owner)
            .ok_or_else(|| LedgerError::Invariant(format!("no reservation for {owner}")))?;
        r.priority = priority;
        r.expiry = None;
        Ok(())
    }

    /// Moves up to `want` free nodes into `owner`'s reservation; returns how many moved.
    pub fn reserve_available(&mut self, owner: JobId, want: u32) -> LedgerResult<u32> {
        let free = self.free;
        let r = self
            .reservations
            .get_mut(&owner)
            .ok_or_else(|| LedgerError::Invariant(format!("no reservation for {owner}")))?;
        let take = want.min(free).min(r.missing());
        if take == 0 {
            return Ok(0);
        }
        r.held += take;
        self.held_total += take;
        self.free -= take;
        self.finish("reserve", owner, take)?;
        Ok(take)
    }

    /// Lends `n` idle banked nodes of `owner`'s reservation to `job`.
    pub fn backfill_on_reserved(&mut self, job: JobId, owner: JobId, n: u32) -> LedgerResult<()> {
        if n == 0 {
            return Ok(());
        }
        if self.reservations.contains_key(&job)
            || self.backfill_links.contains_key(&job)
            || self.allocations.contains_key(&job)
        {
            return Err(LedgerError::Invariant(format!("job {job} cannot be backfilled onto {owner}")));
        }
        let r = self
            .reservations
            .get_mut(&owner)
            .ok_or_else(|| LedgerError::Invariant(format!("no reservation for {owner}")))?;
        if r.idle() < n {
            return Err(LedgerError::Insufficient { wanted: n, available: r.idle() });
        }
        r.occupied += n;
        self.occupied_total += n;
        self.allocations.insert(job, n);
        self.allocated_total += n;
        self.backfill_links.insert(job, owner);
        self.finish("backfill_reserved", job, n)
    }

    /// Jobs currently borrowing `owner`'s banked nodes, in id order.
    ///
    /// Their nodes come back to the reservation as each of them is released.
    pub fn evict_backfilled(&self, owner: JobId) -> Vec<JobId> {
        self.backfill_links.iter().filter(|(_, &o)| o == owner).map(|(&j, _)| j).collect()
    }

    /// Turns a backfilled job into an ordinary one; its nodes leave the reservation.
    pub fn detach_backfilled(&mut self, job: JobId) -> LedgerResult<()> {
        let Some(owner) = self.backfill_links.remove(&job) else {
            return Ok(());
        };
        let n = self.allocation(job);
        let r = self.reservations.get_mut(&owner).unwrap();
        r.occupied -= n;
        r.held -= n;
        self.occupied_total -= n;
        self.held_total -= n;
        self.finish("detach", job, n)
    }

    /// Drops a reservation; idle banked nodes become free. Returns that count.
    pub fn dissolve_reservation(&mut self, owner: JobId) -> LedgerResult<u32> {
        for job in self.evict_backfilled(owner) {
            self.detach_backfilled(job)?;
        }
        let Some(r) = self.reservations.remove(&owner) else {
            return Ok(0);
        };
        debug_assert_eq!(r.occupied, 0);
        self.held_total -= r.held;
        self.free += r.held;
        self.finish("dissolve", owner, r.held)?;
        Ok(r.held)
    }

    /// Hands a full, unoccupied reservation to its owner as an allocation.
    pub fn claim_reservation(&mut self, owner: JobId) -> LedgerResult<u32> {
        match self.reservations.get(&owner) {
            Some(r) if r.held == r.target && r.occupied == 0 => {}
            other => return Err(LedgerError::Invariant(format!("reservation {owner} not claimable: {other:?}"))),
        }
        let r = self.reservations.remove(&owner).unwrap();
        self.held_total -= r.held;
        *self.allocations.entry(owner).or_default() += r.held;
        self.allocated_total += r.held;
        self.finish("claim", owner, r.held)?;
        Ok(r.held)
    }
}
