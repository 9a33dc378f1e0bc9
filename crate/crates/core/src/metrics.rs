//! Tail latency, SLA derivation, latency-bounded throughput and design
//! comparisons.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{run, SimOptions};
use crate::error::{Error, Result};
use crate::paris::PartitionPlan;
use crate::profile::{PartitionSize, ProfileTable};
use crate::sched::{Policy, SlaConfig};
use crate::workload::{BatchDistribution, QueryTrace};

/// Nearest-rank percentile: the `ceil(p·n)`-th smallest sample (1-based).
pub fn tail_latency(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("latency samples"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(format!("percentile must be in (0, 1), got {p}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let raw = p * n as f64;
    // snap products like 0.95 * 20 = 18.999999999999996 back onto the integer
    let nearest = libm::round(raw);
    let rank = if (raw - nearest).abs() < 1e-9 { nearest } else { libm::ceil(raw) };
    let rank = (rank as usize).clamp(1, n);
    Ok(sorted[rank - 1])
}

/// `multiplier ×` the latency of the largest batch on the largest partition.
pub fn derive_sla_target(table: &ProfileTable, b_max: u32, multiplier: f64) -> Result<f64> {
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(Error::Parameter(format!("SLA multiplier must be positive, got {multiplier}")));
    }
    Ok(multiplier * table.estimated_latency(table.largest_size(), b_max)?)
}

/// How a design's plan was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlanKind {
    Homogeneous(PartitionSize),
    Paris,
    Random(u64),
    /// Imported or hand-written.
    Fixed,
}

impl fmt::Display for PlanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanKind::Homogeneous(k) => write!(f, "{k}"),
            PlanKind::Paris => f.write_str("PARIS"),
            PlanKind::Random(seed) => write!(f, "Random({seed})"),
            PlanKind::Fixed => f.write_str("Fixed"),
        }
    }
}

/// A plan paired with a scheduler.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignPoint {
    pub label: String,
    pub kind: PlanKind,
    pub plan: PartitionPlan,
    pub policy: Policy,
}

impl DesignPoint {
    /// Labels the design `<plan>+<SCHEDULER>`, e.g. `GPU(3)+FIFS`.
    pub fn new(kind: PlanKind, plan: PartitionPlan, policy: Policy) -> Self {
        DesignPoint { label: Self::label_for(kind, policy), kind, plan, policy }
    }

    pub fn label_for(kind: PlanKind, policy: Policy) -> String {
        let sched = match policy {
            Policy::Fifs => "FIFS",
            Policy::Elsa => "ELSA",
        };
        format!("{kind}+{sched}")
    }
}

/// Fixed workload and search settings for a load sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadSearch {
    pub dist: BatchDistribution,
    pub duration_ms: f64,
    pub seeds: Vec<u64>,
    pub percentile: f64,
    /// Bisection stops when `(hi - lo) <= rel_tol * lo`.
    pub rel_tol: f64,
    pub options: SimOptions,
}

impl LoadSearch {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::EmptyInput("seeds"));
        }
        if !(self.duration_ms.is_finite() && self.duration_ms > 0.0) {
            return Err(Error::Parameter(format!("duration must be positive, got {}", self.duration_ms)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Parameter(format!("relative tolerance must be in (0, 1), got {}", self.rel_tol)));
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return Err(Error::Parameter(format!("percentile must be in (0, 1), got {}", self.percentile)));
        }
        Ok(())
    }

    /// Rough service capacity: every partition serving the whole batch mix.
    pub fn capacity_estimate(&self, plan: &PartitionPlan, table: &ProfileTable) -> Result<f64> {
        let mut qps = 0.0;
        for k in plan.partitions() {
            let mut mean = 0.0;
            for b in 1..=self.dist.b_max() {
                let p = self.dist.prob(b);
                if p > 0.0 {
                    mean += p * table.estimated_latency(k, b)?;
                }
            }
            qps += 1000.0 / mean;
        }
        Ok(qps)
    }
}

/// Mean over seeds of the measured tail latency at `rate_qps`.
///
/// A seed with no measured queries contributes zero.
pub fn mean_tail_at(
    design: &DesignPoint,
    table: &ProfileTable,
    sla: &SlaConfig,
    search: &LoadSearch,
    rate_qps: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for &seed in &search.seeds {
        let trace = QueryTrace::sample(&search.dist, rate_qps, search.duration_ms, seed)?;
        let report = run(&design.plan, design.policy, &trace, table, sla, &search.options)?;
        total += report.tail(search.percentile).unwrap_or(0.0);
    }
    Ok(total / search.seeds.len() as f64)
}

/// One evaluated load level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadProbe {
    pub rate_qps: f64,
    pub tail_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbtOutcome {
    /// Largest rate found whose mean tail latency stays within the SLA.
    pub rate_qps: f64,
    /// Set when even the minimal probed load violated the SLA.
    pub violates_at_min_load: bool,
    pub probes: Vec<LoadProbe>,
}

/// Largest arrival rate whose mean (over seeds) tail latency meets the SLA.
///
/// Brackets the rate from a minimal load upward, then bisects (geometric
/// midpoints while the bracket spans more than 2×, arithmetic after) until
/// the relative width drops below `rel_tol`.
pub fn latency_bounded_throughput(
    design: &DesignPoint,
    table: &ProfileTable,
    sla: &SlaConfig,
    search: &LoadSearch,
) -> Result<LbtOutcome> {
    search.validate()?;
    sla.validate()?;
    let capacity = search.capacity_estimate(&design.plan, table)?;
    let mut probes = Vec::new();
    let feasible = |rate: f64, probes: &mut Vec<LoadProbe>| -> Result<bool> {
        let tail_ms = mean_tail_at(design, table, sla, search, rate)?;
        probes.push(LoadProbe { rate_qps: rate, tail_ms });
        Ok(tail_ms <= sla.sla_target_ms)
    };

    // light enough to keep queueing negligible, heavy enough that the
    // percentile rests on a few hundred samples per seed
    let min_rate = (capacity * 0.02).max(50_000.0 / search.duration_ms).min(capacity);
    if !feasible(min_rate, &mut probes)? {
        return Ok(LbtOutcome { rate_qps: 0.0, violates_at_min_load: true, probes });
    }
    let mut lo = min_rate;
    let mut hi = capacity.max(min_rate * 2.0);
    let mut expansions = 0;
    while feasible(hi, &mut probes)? {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 40 {
            return Err(Error::Consistency("latency bound never violated while raising load".into()));
        }
    }
    while hi - lo > search.rel_tol * lo {
        let mid = if hi > 2.0 * lo { libm::sqrt(lo * hi) } else { 0.5 * (lo + hi) };
        if feasible(mid, &mut probes)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LbtOutcome { rate_qps: lo, violates_at_min_load: false, probes })
}

/// Measured results of one design over a fixed seed set.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignResult {
    pub label: String,
    pub kind: PlanKind,
    pub policy: Policy,
    pub seeds: Vec<u64>,
    pub lbt_qps: f64,
    /// Mean tail latency at the common comparison load.
    pub tail_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub lbt_qps: f64,
    pub lbt_normalized: f64,
    pub tail_ms: f64,
    pub tail_normalized: f64,
}

/// The best homogeneous design under FIFS.
pub fn gpu_max(results: &[DesignResult]) -> Option<&DesignResult> {
    results
        .iter()
        .filter(|r| matches!(r.kind, PlanKind::Homogeneous(_)) && r.policy == Policy::Fifs)
        .fold(None, |best: Option<&DesignResult>, r| match best {
            Some(b) if b.lbt_qps >= r.lbt_qps => Some(b),
            _ => Some(r),
        })
}

/// Absolute and baseline-normalized throughput and tail latency per design.
pub fn compare(results: &[DesignResult], baseline_label: &str) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(Error::EmptyInput("design results"));
    }
    let mut labels = BTreeSet::new();
    for r in results {
        if !labels.insert(r.label.as_str()) {
            return Err(Error::Validation(format!("design label '{}' is not unique", r.label)));
        }
        if r.seeds != results[0].seeds {
            return Err(Error::Validation(format!(
                "design '{}' ran seeds {:?}, '{}' ran {:?}",
                r.label, r.seeds, results[0].label, results[0].seeds
            )));
        }
    }
    let base = results
        .iter()
        .find(|r| r.label == baseline_label)
        .ok_or_else(|| Error::Validation(format!("normalization baseline '{baseline_label}' is missing")))?;
    Ok(results
        .iter()
        .map(|r| SummaryRow {
            label: r.label.clone(),
            lbt_qps: r.lbt_qps,
            lbt_normalized: r.lbt_qps / base.lbt_qps,
            tail_ms: r.tail_ms,
            tail_normalized: r.tail_ms / base.tail_ms,
        })
        .collect())
}
