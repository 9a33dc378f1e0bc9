//! Dispatch policies over per-partition FIFO queues.
//!
//! Every partition owns a local queue. A query is dispatched once, on
//! arrival, and never migrates.
//!
//! ELSA predicts how long a query would wait on each partition,
//! `T_wait = Σ T_estimated(queued) + T_remaining(current)`, and turns it
//! into slack against the SLA, `slack = SLA − α·(T_wait + β·T_estimated(new))`.
//! It places the query on the smallest partition with positive slack, and
//! otherwise on the partition that would finish it soonest.
//!
//! FIFS is the heterogeneity-unaware baseline: any idle partition, else the
//! shortest queue.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::paris::BatchSegment;
use crate::profile::{PartitionSize, ProfileTable};
use crate::workload::Query;

/// SLA target and the two slack-predictor knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlaConfig {
    pub sla_target_ms: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SlaConfig {
    pub fn new(sla_target_ms: f64, alpha: f64, beta: f64) -> Result<Self> {
        let cfg = SlaConfig { sla_target_ms, alpha, beta };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `α = β = 1`.
    pub fn with_target(sla_target_ms: f64) -> Result<Self> {
        Self::new(sla_target_ms, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sla_target_ms.is_finite() && self.sla_target_ms > 0.0) {
            return Err(Error::Parameter(format!("SLA target must be positive, got {}", self.sla_target_ms)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Parameter(format!(
                "alpha and beta must be nonnegative, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueuedQuery {
    pub query_id: u64,
    pub batch: u32,
    pub est_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunningQuery {
    pub query_id: u64,
    pub batch: u32,
    pub est_ms: f64,
    pub start_ms: f64,
}

/// Live view of one partition as seen by a dispatcher.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionState {
    pub id: usize,
    pub k: PartitionSize,
    pub queued: VecDeque<QueuedQuery>,
    pub current: Option<RunningQuery>,
}

impl PartitionState {
    pub fn new(id: usize, k: PartitionSize) -> Self {
        PartitionState { id, k, queued: VecDeque::new(), current: None }
    }

    pub fn is_busy(&self) -> bool {
        self.current.is_some()
    }

    pub fn queue_len(&self) -> usize {
        self.queued.len()
    }
}

/// Predicted time before a newly enqueued query could start on `state`.
///
/// Remaining time of the running query is clamped at zero, so an
/// execution that overruns its estimate contributes nothing.
pub fn t_wait(state: &PartitionState, now_ms: f64) -> f64 {
    let queued: f64 = state.queued.iter().map(|q| q.est_ms).sum();
    let remaining = state
        .current
        .map_or(0.0, |c| (c.est_ms - (now_ms - c.start_ms)).max(0.0));
    queued + remaining
}

/// `SLA − α·(t_wait + β·t_est_new)`; negative means a predicted violation.
pub fn sla_slack(cfg: &SlaConfig, t_wait_ms: f64, t_est_new_ms: f64) -> f64 {
    cfg.sla_target_ms - cfg.alpha * (t_wait_ms + cfg.beta * t_est_new_ms)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DispatchKind {
    /// ELSA step A: smallest partition predicted to meet the SLA.
    SlackSatisfying,
    /// ELSA step B: nothing meets the SLA, fastest completion wins.
    FastestFallback,
    /// FIFS: an idle partition was available.
    Idle,
    /// FIFS: all busy, shortest queue by count.
    ShortestQueue,
}

/// Where a query goes and why.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dispatch {
    pub query_id: u64,
    pub partition: usize,
    pub kind: DispatchKind,
}

/// ELSA placement over every partition.
pub fn elsa_dispatch(
    query: &Query,
    partitions: &[PartitionState],
    table: &ProfileTable,
    cfg: &SlaConfig,
    now_ms: f64,
) -> Result<Dispatch> {
    elsa_among(query, partitions, |_| true, table, cfg, now_ms)
}

fn elsa_among(
    query: &Query,
    partitions: &[PartitionState],
    eligible: impl Fn(&PartitionState) -> bool,
    table: &ProfileTable,
    cfg: &SlaConfig,
    now_ms: f64,
) -> Result<Dispatch> {
    let mut order: Vec<(&PartitionState, f64, f64)> = Vec::with_capacity(partitions.len());
    for p in partitions.iter().filter(|p| eligible(p)) {
        let est = table.estimated_latency(p.k, query.batch)?;
        order.push((p, t_wait(p, now_ms), est));
    }
    if order.is_empty() {
        return Err(Error::Configuration("no partitions to dispatch to".into()));
    }
    order.sort_by(|a, b| a.0.k.cmp(&b.0.k).then(a.0.id.cmp(&b.0.id)));

    for &(p, wait, est) in &order {
        if cfg.sla_target_ms > cfg.alpha * (wait + cfg.beta * est) {
            return Ok(Dispatch { query_id: query.id, partition: p.id, kind: DispatchKind::SlackSatisfying });
        }
    }
    let mut best = order[0].0.id;
    let mut best_t = order[0].1 + order[0].2;
    for &(p, wait, est) in &order[1..] {
        if wait + est < best_t {
            best_t = wait + est;
            best = p.id;
        }
    }
    Ok(Dispatch { query_id: query.id, partition: best, kind: DispatchKind::FastestFallback })
}

/// FIFS placement: the largest idle partition, else the shortest queue.
pub fn fifs_dispatch(query: &Query, partitions: &[PartitionState]) -> Result<Dispatch> {
    fifs_among(query, partitions, |_| true)
}

fn fifs_among(
    query: &Query,
    partitions: &[PartitionState],
    eligible: impl Fn(&PartitionState) -> bool,
) -> Result<Dispatch> {
    let mut idle: Option<&PartitionState> = None;
    let mut shortest: Option<&PartitionState> = None;
    for p in partitions.iter().filter(|p| eligible(p)) {
        if !p.is_busy() {
            let better = idle.is_none_or(|b| p.k > b.k || (p.k == b.k && p.id < b.id));
            if better {
                idle = Some(p);
            }
        }
        let better = shortest.is_none_or(|b| {
            p.queue_len() < b.queue_len() || (p.queue_len() == b.queue_len() && p.id < b.id)
        });
        if better {
            shortest = Some(p);
        }
    }
    match (idle, shortest) {
        (Some(p), _) => Ok(Dispatch { query_id: query.id, partition: p.id, kind: DispatchKind::Idle }),
        (None, Some(p)) => Ok(Dispatch { query_id: query.id, partition: p.id, kind: DispatchKind::ShortestQueue }),
        (None, None) => Err(Error::Configuration("no partitions to dispatch to".into())),
    }
}

/// Scheduler selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    Fifs,
    Elsa,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Fifs => "fifs",
            Policy::Elsa => "elsa",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fifs" => Ok(Policy::Fifs),
            "elsa" => Ok(Policy::Elsa),
            other => Err(Error::Validation(format!("unknown scheduler '{other}', expected fifs or elsa"))),
        }
    }
}

/// A policy bound to its profile and SLA.
///
/// With `segments` set, a query is only offered to partitions whose size
/// owns the query's batch segment; if no such partition exists, all
/// partitions are candidates.
#[derive(Clone, Debug)]
pub struct Dispatcher<'a> {
    pub policy: Policy,
    pub table: &'a ProfileTable,
    pub sla: SlaConfig,
    pub segments: Option<Vec<BatchSegment>>,
}

impl<'a> Dispatcher<'a> {
    pub fn new(policy: Policy, table: &'a ProfileTable, sla: SlaConfig) -> Self {
        Dispatcher { policy, table, sla, segments: None }
    }

    pub fn with_segment_routing(mut self, segments: Vec<BatchSegment>) -> Self {
        self.segments = Some(segments);
        self
    }

    pub fn dispatch(&self, query: &Query, partitions: &[PartitionState], now_ms: f64) -> Result<Dispatch> {
        let owner = self
            .segments
            .as_ref()
            .and_then(|segs| segs.iter().find(|s| s.contains(query.batch)))
            .map(|s| s.k)
            .filter(|k| partitions.iter().any(|p| p.k == *k));
        let eligible = |p: &PartitionState| owner.is_none_or(|k| p.k == k);
        match self.policy {
            Policy::Fifs => fifs_among(query, partitions, eligible),
            Policy::Elsa => elsa_among(query, partitions, eligible, self.table, &self.sla, now_ms),
        }
    }
}
