//! Profiled (partition size, batch) lookup tables.
//!
//! A [`ProfileTable`] is a dense grid over every allowed partition size and
//! every batch in `1..=b_max`. It is the only source of execution times in
//! the crate: the planner reads throughputs from it, the dispatcher reads
//! estimates from it, and the engine executes for exactly the looked-up
//! latency (optionally perturbed by noise).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Number of GPCs making up one GPU partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitionSize(u8);

impl PartitionSize {
    /// Partition sizes offered by a 7-GPC reconfigurable GPU.
    pub const DEFAULT_SET: [u8; 5] = [1, 2, 3, 4, 7];

    pub fn new(gpcs: u32) -> Result<Self> {
        match u8::try_from(gpcs) {
            Ok(g) if g >= 1 => Ok(PartitionSize(g)),
            _ => Err(Error::Parameter(format!(
                "partition size must be in 1..=255 GPCs, got {gpcs}"
            ))),
        }
    }

    pub const fn gpcs(self) -> u32 {
        self.0 as u32
    }

    pub fn default_set() -> Vec<PartitionSize> {
        Self::DEFAULT_SET.iter().map(|&g| PartitionSize(g)).collect()
    }
}

impl fmt::Display for PartitionSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GPU({})", self.0)
    }
}

/// Sorts and deduplicates a size set, rejecting an empty one.
pub fn normalize_sizes(sizes: &[PartitionSize]) -> Result<Vec<PartitionSize>> {
    let set: BTreeSet<PartitionSize> = sizes.iter().copied().collect();
    if set.is_empty() {
        return Err(Error::EmptyInput("partition size set"));
    }
    Ok(set.into_iter().collect())
}

/// One cell of the profile grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub k: PartitionSize,
    pub batch: u32,
    pub latency_ms: f64,
    /// Fraction of the partition's compute kept busy, in `[0, 1]`.
    pub utilization: f64,
    /// Batched queries per second, `1000 / latency_ms`.
    pub throughput_qps: f64,
}

/// Raw profile measurement before the table derives throughput.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub k: PartitionSize,
    pub batch: u32,
    pub latency_ms: f64,
    pub utilization: f64,
}

/// Dense (partition size × batch) profile of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    model: String,
    sizes: Vec<PartitionSize>,
    b_max: u32,
    // row-major: size index, then batch - 1
    points: Vec<ProfilePoint>,
}

impl ProfileTable {
    /// Builds a table from measurement rows in any order.
    ///
    /// The grid is the cross product of every size and batch that appears
    /// in `rows`, with batches `1..=max`. Every cell must be present exactly
    /// once. Monotonicity is not enforced here (measured data can be noisy);
    /// call [`ProfileTable::check_monotone`] for that.
    pub fn from_rows(model: impl Into<String>, rows: &[ProfileRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("profile rows"));
        }
        let mut sizes = BTreeSet::new();
        let mut b_max = 0;
        for row in rows {
            if row.batch == 0 {
                return Err(Error::Format(format!("batch must be >= 1 (partition {})", row.k)));
            }
            if !(row.latency_ms.is_finite() && row.latency_ms > 0.0) {
                return Err(Error::Validation(format!(
                    "latency for {} batch {} must be positive and finite, got {}",
                    row.k, row.batch, row.latency_ms
                )));
            }
            if !(0.0..=1.0).contains(&row.utilization) {
                return Err(Error::Validation(format!(
                    "utilization for {} batch {} must be in [0, 1], got {}",
                    row.k, row.batch, row.utilization
                )));
            }
            sizes.insert(row.k);
            b_max = b_max.max(row.batch);
        }
        let sizes: Vec<PartitionSize> = sizes.into_iter().collect();
        let width = b_max as usize;
        let mut cells: Vec<Option<ProfilePoint>> = alloc::vec![None; sizes.len() * width];
        for row in rows {
            let si = sizes.binary_search(&row.k).expect("size collected above");
            let slot = &mut cells[si * width + (row.batch as usize - 1)];
            if slot.is_some() {
                return Err(Error::Format(format!(
                    "duplicate profile row for {} batch {}",
                    row.k, row.batch
                )));
            }
            *slot = Some(ProfilePoint {
                k: row.k,
                batch: row.batch,
                latency_ms: row.latency_ms,
                utilization: row.utilization,
                throughput_qps: 1000.0 / row.latency_ms,
            });
        }
        let mut points = Vec::with_capacity(cells.len());
        for (i, cell) in cells.into_iter().enumerate() {
            match cell {
                Some(p) => points.push(p),
                None => {
                    return Err(Error::Format(format!(
                        "profile grid is missing {} batch {}",
                        sizes[i / width],
                        i % width + 1
                    )))
                }
            }
        }
        Ok(ProfileTable { model: model.into(), sizes, b_max, points })
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    /// Partition sizes in ascending order.
    pub fn sizes(&self) -> &[PartitionSize] {
        &self.sizes
    }

    pub fn b_max(&self) -> u32 {
        self.b_max
    }

    pub fn largest_size(&self) -> PartitionSize {
        *self.sizes.last().expect("table is never empty")
    }

    pub fn points(&self) -> &[ProfilePoint] {
        &self.points
    }

    pub fn contains(&self, k: PartitionSize) -> bool {
        self.sizes.binary_search(&k).is_ok()
    }

    pub fn point(&self, k: PartitionSize, batch: u32) -> Result<&ProfilePoint> {
        let si = self.sizes.binary_search(&k).map_err(|_| Error::Lookup { k, batch })?;
        if batch == 0 || batch > self.b_max {
            return Err(Error::Lookup { k, batch });
        }
        Ok(&self.points[si * self.b_max as usize + (batch as usize - 1)])
    }

    /// Profiled execution time of one batched query, exact lookup.
    pub fn estimated_latency(&self, k: PartitionSize, batch: u32) -> Result<f64> {
        self.point(k, batch).map(|p| p.latency_ms)
    }

    pub fn effective_throughput(&self, k: PartitionSize, batch: u32) -> Result<f64> {
        self.point(k, batch).map(|p| p.throughput_qps)
    }

    pub fn utilization(&self, k: PartitionSize, batch: u32) -> Result<f64> {
        self.point(k, batch).map(|p| p.utilization)
    }

    /// Smallest batch at which partition `k` reaches `threshold` utilization.
    ///
    /// Falls back to `b_max` when the threshold is never reached so that every
    /// size still owns a batch segment.
    pub fn knee(&self, k: PartitionSize, threshold: f64) -> Result<u32> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Parameter(format!(
                "knee threshold must be in (0, 1], got {threshold}"
            )));
        }
        for b in 1..=self.b_max {
            if self.utilization(k, b)? >= threshold {
                return Ok(b);
            }
        }
        Ok(self.b_max)
    }

    /// Knee of every size, ascending by size.
    pub fn knees(&self, threshold: f64) -> Result<Vec<(PartitionSize, u32)>> {
        self.sizes.iter().map(|&k| Ok((k, self.knee(k, threshold)?))).collect()
    }

    /// Restricts the table to `sizes` (all of which must be present).
    pub fn restrict(&self, sizes: &[PartitionSize]) -> Result<ProfileTable> {
        let sizes = normalize_sizes(sizes)?;
        let mut rows = Vec::with_capacity(sizes.len() * self.b_max as usize);
        for &k in &sizes {
            for b in 1..=self.b_max {
                let p = self.point(k, b)?;
                rows.push(ProfileRow { k, batch: b, latency_ms: p.latency_ms, utilization: p.utilization });
            }
        }
        ProfileTable::from_rows(self.model.clone(), &rows)
    }

    /// Verifies the shape expected of a profiled model: latency and
    /// utilization nondecreasing in batch, latency nonincreasing in size.
    pub fn check_monotone(&self) -> Result<()> {
        for &k in &self.sizes {
            for b in 2..=self.b_max {
                let prev = self.point(k, b - 1)?;
                let cur = self.point(k, b)?;
                if cur.utilization < prev.utilization {
                    return Err(Error::Validation(format!(
                        "utilization of {k} decreases from batch {} to {b}",
                        b - 1
                    )));
                }
                if cur.latency_ms < prev.latency_ms {
                    return Err(Error::Validation(format!(
                        "latency of {k} decreases from batch {} to {b}",
                        b - 1
                    )));
                }
            }
        }
        for pair in self.sizes.windows(2) {
            for b in 1..=self.b_max {
                if self.estimated_latency(pair[1], b)? > self.estimated_latency(pair[0], b)? {
                    return Err(Error::Validation(format!(
                        "latency at batch {b} is larger on {} than on {}",
                        pair[1], pair[0]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Closed-form stand-in for measured utilization/latency curves.
///
/// Utilization grows linearly with batch until it saturates at `util_cap`:
/// `u(k, b) = min(util_cap, parallelism_per_sample * b / k)`. Latency is the
/// fixed overhead plus the batch's work spread over the busy part of the
/// partition: `F + W * b / (k * u(k, b))`. Below saturation latency is flat
/// in both batch and size; past it latency grows linearly with batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticProfileParams {
    /// W, in ms·GPC per batched sample.
    pub work_per_sample_ms: f64,
    /// F, in ms.
    pub fixed_overhead_ms: f64,
    /// γ, GPC-equivalents kept busy per sample.
    pub parallelism_per_sample: f64,
    pub util_cap: f64,
}

impl SyntheticProfileParams {
    /// Lightweight model (MobileNet-like): low per-sample work, a partition
    /// saturates only with large batches (knee near 4 samples per GPC).
    pub const LIGHT: SyntheticProfileParams = SyntheticProfileParams {
        work_per_sample_ms: 0.5,
        fixed_overhead_ms: 0.5,
        parallelism_per_sample: 0.2,
        util_cap: 0.95,
    };

    /// Medium compute intensity (ResNet-like).
    pub const MEDIUM: SyntheticProfileParams = SyntheticProfileParams {
        work_per_sample_ms: 3.0,
        fixed_overhead_ms: 2.0,
        parallelism_per_sample: 0.8,
        util_cap: 0.95,
    };

    /// Compute-heavy model (BERT-like): even small partitions saturate at
    /// batch 1, so latency grows with batch everywhere.
    pub const HEAVY: SyntheticProfileParams = SyntheticProfileParams {
        work_per_sample_ms: 8.0,
        fixed_overhead_ms: 3.0,
        parallelism_per_sample: 2.5,
        util_cap: 0.95,
    };

    pub fn preset(name: &str) -> Option<SyntheticProfileParams> {
        match name {
            "light" => Some(Self::LIGHT),
            "medium" => Some(Self::MEDIUM),
            "heavy" => Some(Self::HEAVY),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.work_per_sample_ms.is_finite()
            && self.work_per_sample_ms > 0.0
            && self.fixed_overhead_ms.is_finite()
            && self.fixed_overhead_ms >= 0.0
            && self.parallelism_per_sample.is_finite()
            && self.parallelism_per_sample > 0.0
            && self.util_cap > 0.0
            && self.util_cap <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid synthetic profile parameters {self:?}")))
        }
    }

    pub fn utilization(&self, k: PartitionSize, batch: u32) -> f64 {
        let raw = self.parallelism_per_sample * batch as f64 / k.gpcs() as f64;
        raw.min(self.util_cap)
    }

    pub fn latency_ms(&self, k: PartitionSize, batch: u32) -> f64 {
        let raw = self.parallelism_per_sample * batch as f64 / k.gpcs() as f64;
        if raw < self.util_cap {
            // b / (k · γb/k) cancels; evaluating it would leave ulp noise
            self.fixed_overhead_ms + self.work_per_sample_ms / self.parallelism_per_sample
        } else {
            self.fixed_overhead_ms + self.work_per_sample_ms * batch as f64 / (k.gpcs() as f64 * self.util_cap)
        }
    }
}

/// Synthesizes a complete profile grid from closed-form curves.
pub fn synth_profile(
    model: impl Into<String>,
    params: &SyntheticProfileParams,
    sizes: &[PartitionSize],
    b_max: u32,
) -> Result<ProfileTable> {
    params.validate()?;
    if b_max == 0 {
        return Err(Error::Parameter("b_max must be >= 1".into()));
    }
    let sizes = normalize_sizes(sizes)?;
    let mut rows = Vec::with_capacity(sizes.len() * b_max as usize);
    for &k in &sizes {
        for b in 1..=b_max {
            rows.push(ProfileRow {
                k,
                batch: b,
                latency_ms: params.latency_ms(k, b),
                utilization: params.utilization(k, b),
            });
        }
    }
    ProfileTable::from_rows(model, &rows)
}
