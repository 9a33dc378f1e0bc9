//! Discrete-event simulation of a partitioned inference server.
//!
//! Arrivals are dispatched immediately by the configured policy. Each
//! partition runs one query at a time for its profiled latency and starts
//! its queue head on completion. Time is virtual; a run is a pure function
//! of its inputs.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::metrics::tail_latency;
use crate::paris::{BatchSegment, PartitionPlan};
use crate::profile::{PartitionSize, ProfileTable};
use crate::sched::{
    t_wait, Dispatch, DispatchKind, Dispatcher, PartitionState, Policy, QueuedQuery, RunningQuery, SlaConfig,
};
use crate::workload::{Query, QueryTrace};

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    /// Leading fraction of the trace duration excluded from metrics.
    pub warmup_fraction: f64,
    /// σ of a multiplicative log-normal perturbation of execution times;
    /// zero runs every query for exactly its profiled latency.
    pub noise_sigma: f64,
    pub noise_seed: u64,
    /// Cross-check the dispatcher's wait estimate against the engine's
    /// ground-truth backlog at every dispatch (only meaningful without noise).
    pub check_wait_consistency: bool,
    /// Restrict dispatch to the partition size owning each batch segment.
    pub segment_routing: Option<Vec<BatchSegment>>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            warmup_fraction: 0.1,
            noise_sigma: 0.0,
            noise_seed: 0,
            check_wait_consistency: false,
            segment_routing: None,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Parameter(format!("warmup fraction must be in [0, 1), got {}", self.warmup_fraction)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Parameter(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Trace position of the arriving query.
    Arrival(usize),
    Completion { partition: usize, slot: usize },
}

/// A scheduled simulation event; completions sort before arrivals at equal
/// times, then by insertion order.
#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub time_ms: f64,
    pub kind: EventKind,
    pub seq: u64,
}

impl Event {
    fn class(&self) -> u8 {
        match self.kind {
            EventKind::Completion { .. } => 0,
            EventKind::Arrival(_) => 1,
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time_ms
            .total_cmp(&self.time_ms)
            .then(other.class().cmp(&self.class()))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Per-query outcome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryRecord {
    pub id: u64,
    pub batch: u32,
    pub arrival_ms: f64,
    pub partition: usize,
    pub kind: DispatchKind,
    pub start_ms: f64,
    pub finish_ms: f64,
    pub latency_ms: f64,
    pub sla_met: bool,
}

/// Per-partition execution totals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionUsage {
    pub id: usize,
    pub k: PartitionSize,
    pub executions: u64,
    /// Wall-clock time spent executing.
    pub busy_ms: f64,
    /// Execution time weighted by the profiled utilization of each batch.
    pub weighted_busy_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub policy: Policy,
    pub sla: SlaConfig,
    pub seed: u64,
    pub duration_ms: f64,
    /// `max(duration_ms, last finish)`, the denominator of busy fractions.
    pub span_ms: f64,
    pub warmup_ms: f64,
    /// One record per trace query, in trace order.
    pub records: Vec<QueryRecord>,
    pub partitions: Vec<PartitionUsage>,
}

impl SimReport {
    /// Records of queries arriving after the warmup window.
    pub fn measured(&self) -> impl Iterator<Item = &QueryRecord> {
        let warmup = self.warmup_ms;
        self.records.iter().filter(move |r| r.arrival_ms >= warmup)
    }

    pub fn measured_latencies(&self) -> Vec<f64> {
        self.measured().map(|r| r.latency_ms).collect()
    }

    pub fn measured_count(&self) -> usize {
        self.measured().count()
    }

    pub fn violations(&self) -> usize {
        self.measured().filter(|r| !r.sla_met).count()
    }

    /// Tail latency of measured queries; `None` if nothing was measured.
    pub fn tail(&self, p: f64) -> Option<f64> {
        tail_latency(&self.measured_latencies(), p).ok()
    }

    pub fn usage(&self, partition: usize) -> Result<&PartitionUsage> {
        self.partitions
            .get(partition)
            .ok_or_else(|| Error::Validation(format!("no partition with id {partition}")))
    }

    /// Profile-weighted utilization: `Σ duration · util(k, b) / span`.
    pub fn busy_fraction(&self, partition: usize) -> Result<f64> {
        let u = self.usage(partition)?;
        Ok(if self.span_ms > 0.0 { u.weighted_busy_ms / self.span_ms } else { 0.0 })
    }

    /// Fraction of the span a partition spent executing, ignoring utilization.
    pub fn occupancy(&self, partition: usize) -> Result<f64> {
        let u = self.usage(partition)?;
        Ok(if self.span_ms > 0.0 { u.busy_ms / self.span_ms } else { 0.0 })
    }

    /// Mean profile-weighted utilization over all partitions, GPC-weighted.
    pub fn server_utilization(&self) -> f64 {
        let gpcs: f64 = self.partitions.iter().map(|p| p.k.gpcs() as f64).sum();
        if gpcs == 0.0 || self.span_ms <= 0.0 {
            return 0.0;
        }
        let weighted: f64 = self.partitions.iter().map(|p| p.k.gpcs() as f64 * p.weighted_busy_ms).sum();
        weighted / (gpcs * self.span_ms)
    }
}

/// Simulates `trace` on `plan` under `policy`.
pub fn run(
    plan: &PartitionPlan,
    policy: Policy,
    trace: &QueryTrace,
    table: &ProfileTable,
    sla: &SlaConfig,
    options: &SimOptions,
) -> Result<SimReport> {
    sla.validate()?;
    options.validate()?;
    if plan.is_empty() {
        return Err(Error::Configuration("plan has no partitions".into()));
    }
    let sizes = plan.partitions();
    for &k in &sizes {
        if !table.contains(k) {
            return Err(Error::Configuration(format!("profile has no entry for {k}")));
        }
    }
    if trace.max_batch() > table.b_max() {
        return Err(Error::Configuration(format!(
            "trace batch {} exceeds profiled maximum {}",
            trace.max_batch(),
            table.b_max()
        )));
    }

    let mut dispatcher = Dispatcher::new(policy, table, *sla);
    if let Some(segs) = &options.segment_routing {
        dispatcher = dispatcher.with_segment_routing(segs.clone());
    }
    let mut sim = Sim {
        table,
        states: sizes.iter().enumerate().map(|(i, &k)| PartitionState::new(i, k)).collect(),
        // actual durations, parallel to each state's queue
        backlog: vec![VecDeque::new(); sizes.len()],
        finish_at: vec![None; sizes.len()],
        usage: sizes
            .iter()
            .enumerate()
            .map(|(id, &k)| PartitionUsage { id, k, executions: 0, busy_ms: 0.0, weighted_busy_ms: 0.0 })
            .collect(),
        heap: BinaryHeap::with_capacity(trace.len() + sizes.len()),
        seq: 0,
        records: Vec::with_capacity(trace.len()),
    };

    let noise = if options.noise_sigma > 0.0 {
        Some(LogNormal::new(0.0, options.noise_sigma).map_err(|e| Error::Parameter(format!("{e}")))?)
    } else {
        None
    };
    let mut noise_rng = ChaCha8Rng::seed_from_u64(options.noise_seed ^ trace.seed.rotate_left(17));

    for (slot, q) in trace.queries.iter().enumerate() {
        sim.records.push(QueryRecord {
            id: q.id,
            batch: q.batch,
            arrival_ms: q.arrival_ms,
            partition: usize::MAX,
            kind: DispatchKind::Idle,
            start_ms: f64::NAN,
            finish_ms: f64::NAN,
            latency_ms: f64::NAN,
            sla_met: false,
        });
        sim.push(q.arrival_ms, EventKind::Arrival(slot));
    }

    let mut last_finish: f64 = 0.0;
    while let Some(ev) = sim.heap.pop() {
        let now = ev.time_ms;
        match ev.kind {
            EventKind::Arrival(slot) => {
                let query = trace.queries[slot];
                if options.check_wait_consistency && noise.is_none() {
                    sim.check_waits(now)?;
                }
                let d: Dispatch = dispatcher.dispatch(&query, &sim.states, now)?;
                let est = table.estimated_latency(sim.states[d.partition].k, query.batch)?;
                let actual = match &noise {
                    Some(n) => est * n.sample(&mut noise_rng),
                    None => est,
                };
                let rec = &mut sim.records[slot];
                rec.partition = d.partition;
                rec.kind = d.kind;
                sim.enqueue(d.partition, slot, &query, est, actual, now);
            }
            EventKind::Completion { partition, slot } => {
                let rec = &mut sim.records[slot];
                rec.finish_ms = now;
                rec.latency_ms = now - rec.arrival_ms;
                rec.sla_met = rec.latency_ms <= sla.sla_target_ms;
                last_finish = last_finish.max(now);
                sim.complete(partition, slot, now)?;
            }
        }
    }

    let span_ms = trace.duration_ms.max(last_finish);
    Ok(SimReport {
        policy,
        sla: *sla,
        seed: trace.seed,
        duration_ms: trace.duration_ms,
        span_ms,
        warmup_ms: options.warmup_fraction * trace.duration_ms,
        records: sim.records,
        partitions: sim.usage,
    })
}

struct Sim<'a> {
    table: &'a ProfileTable,
    states: Vec<PartitionState>,
    backlog: Vec<VecDeque<(usize, f64)>>,
    finish_at: Vec<Option<f64>>,
    usage: Vec<PartitionUsage>,
    heap: BinaryHeap<Event>,
    seq: u64,
    records: Vec<QueryRecord>,
}

impl Sim<'_> {
    fn push(&mut self, time_ms: f64, kind: EventKind) {
        self.heap.push(Event { time_ms, kind, seq: self.seq });
        self.seq += 1;
    }

    fn enqueue(&mut self, p: usize, slot: usize, query: &Query, est: f64, actual: f64, now: f64) {
        if self.states[p].is_busy() {
            self.states[p].queued.push_back(QueuedQuery { query_id: query.id, batch: query.batch, est_ms: est });
            self.backlog[p].push_back((slot, actual));
        } else {
            self.start(p, slot, query.id, query.batch, est, actual, now);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn start(&mut self, p: usize, slot: usize, query_id: u64, batch: u32, est: f64, actual: f64, now: f64) {
        self.states[p].current = Some(RunningQuery { query_id, batch, est_ms: est, start_ms: now });
        self.finish_at[p] = Some(now + actual);
        self.records[slot].start_ms = now;
        self.push(now + actual, EventKind::Completion { partition: p, slot });
    }

    fn complete(&mut self, p: usize, slot: usize, now: f64) -> Result<()> {
        let rec = self.records[slot];
        let k = self.states[p].k;
        let duration = now - rec.start_ms;
        let usage = &mut self.usage[p];
        usage.executions += 1;
        usage.busy_ms += duration;
        usage.weighted_busy_ms += duration * self.table.utilization(k, rec.batch)?;
        self.states[p].current = None;
        self.finish_at[p] = None;
        if let Some(next) = self.states[p].queued.pop_front() {
            let (next_slot, actual) = self.backlog[p].pop_front().expect("backlog mirrors the queue");
            self.start(p, next_slot, next.query_id, next.batch, next.est_ms, actual, now);
        }
        Ok(())
    }

    fn check_waits(&self, now: f64) -> Result<()> {
        for (p, state) in self.states.iter().enumerate() {
            let queued: f64 = self.backlog[p].iter().map(|(_, d)| d).sum();
            let truth = queued + self.finish_at[p].map_or(0.0, |f| (f - now).max(0.0));
            let predicted = t_wait(state, now);
            if (truth - predicted).abs() > 1e-9 * truth.abs().max(1.0) {
                return Err(Error::Consistency(format!(
                    "partition {p} at t={now}: backlog {truth} ms, predicted wait {predicted} ms"
                )));
            }
        }
        Ok(())
    }
}
