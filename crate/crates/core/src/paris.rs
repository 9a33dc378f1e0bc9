//! Heterogeneous partition planning.
//!
//! PARIS sizes a fleet of GPU partitions from two inputs: the knee of each
//! partition size's utilization curve and the batch-size distribution of
//! incoming queries. The knees split the batch range into one segment per
//! size (smallest segment to smallest size). Each size then needs capacity
//! proportional to the time its segment's queries keep it busy,
//! `R_k = Σ_{b in segment k} p_b / throughput(k, b)`, and the GPC budget is
//! divided in the ratio `k · R_k`.
//!
//! Homogeneous and random plans are provided as baselines.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::profile::{PartitionSize, ProfileTable};
use crate::workload::BatchDistribution;

/// Physical shape of the server and the share of it a plan may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServerSpec {
    pub num_gpus: u32,
    pub gpcs_per_gpu: u32,
    /// GPCs a plan may allocate, at most `num_gpus * gpcs_per_gpu`.
    pub gpc_budget: u32,
}

impl ServerSpec {
    /// Every GPC of every GPU is available.
    pub fn full(num_gpus: u32, gpcs_per_gpu: u32) -> Self {
        ServerSpec { num_gpus, gpcs_per_gpu, gpc_budget: num_gpus * gpcs_per_gpu }
    }

    pub fn capacity(&self) -> u32 {
        self.num_gpus * self.gpcs_per_gpu
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_gpus == 0 || self.gpcs_per_gpu == 0 {
            return Err(Error::Parameter("server needs at least one GPU with one GPC".into()));
        }
        if self.gpc_budget == 0 || self.gpc_budget > self.capacity() {
            return Err(Error::Parameter(format!(
                "GPC budget {} must be in 1..={}",
                self.gpc_budget,
                self.capacity()
            )));
        }
        Ok(())
    }
}

/// Batches in `(lo, hi]` assigned to partition size `k` for fleet sizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchSegment {
    pub k: PartitionSize,
    pub lo: u32,
    pub hi: u32,
}

impl BatchSegment {
    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, batch: u32) -> bool {
        batch > self.lo && batch <= self.hi
    }

    pub fn batches(&self) -> core::ops::RangeInclusive<u32> {
        self.lo + 1..=self.hi
    }
}

/// Splits `1..=b_max` at the knees, one segment per size in ascending order.
///
/// Segment `k` covers `(B_prev, B_k]`; the last segment is stretched to
/// `b_max`. Equal consecutive knees produce empty segments, which are kept.
pub fn segment_batches(knees: &[(PartitionSize, u32)], b_max: u32) -> Result<Vec<BatchSegment>> {
    if knees.is_empty() {
        return Err(Error::EmptyInput("knees"));
    }
    if b_max == 0 {
        return Err(Error::Parameter("b_max must be >= 1".into()));
    }
    for w in knees.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Validation(format!(
                "knees must be keyed by strictly ascending size ({} after {})",
                w[1].0, w[0].0
            )));
        }
        if w[1].1 < w[0].1 {
            return Err(Error::Validation(format!(
                "knee of {} ({}) is below knee of {} ({})",
                w[1].0, w[1].1, w[0].0, w[0].1
            )));
        }
    }
    let mut prev = 0;
    let mut segments = Vec::with_capacity(knees.len());
    for (i, &(k, knee)) in knees.iter().enumerate() {
        let hi = if i + 1 == knees.len() { b_max } else { knee.min(b_max) };
        let lo = prev.min(hi);
        segments.push(BatchSegment { k, lo, hi });
        prev = hi;
    }
    Ok(segments)
}

/// Relative instance demand per partition size, `R_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioVector {
    pub ratios: Vec<(PartitionSize, f64)>,
}

impl RatioVector {
    /// `Σ_k k · R_k`, the GPC-weighted demand.
    pub fn weighted_sum(&self) -> f64 {
        self.ratios.iter().map(|(k, r)| k.gpcs() as f64 * r).sum()
    }

    pub fn get(&self, k: PartitionSize) -> Option<f64> {
        self.ratios.iter().find(|(s, _)| *s == k).map(|(_, r)| *r)
    }
}

/// `R_k = Σ_{b in segment k} Dist(b) / Throughput(k, b)` for every segment.
pub fn instance_ratios(
    dist: &BatchDistribution,
    table: &ProfileTable,
    segments: &[BatchSegment],
) -> Result<RatioVector> {
    let covered = segments.last().map_or(0, |s| s.hi);
    if covered < dist.b_max() {
        return Err(Error::Validation(format!(
            "segments cover batches up to {covered}, distribution reaches {}",
            dist.b_max()
        )));
    }
    let mut ratios = Vec::with_capacity(segments.len());
    for seg in segments {
        let mut r = 0.0;
        for b in seg.batches() {
            let p = dist.prob(b);
            if p == 0.0 && b > table.b_max() {
                continue;
            }
            let thr = table.effective_throughput(seg.k, b)?;
            if !(thr > 0.0 && thr.is_finite()) {
                return Err(Error::ZeroThroughput { k: seg.k, batch: b });
            }
            r += p / thr;
        }
        ratios.push((seg.k, r));
    }
    Ok(RatioVector { ratios })
}

/// Real-valued instance counts before integerization.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceCounts {
    /// `Σ_k k · R_k`.
    pub sum_r: f64,
    /// `C = total_gpcs / sum_r`.
    pub normalizer: f64,
    pub total_gpcs: u32,
    /// `N_k = C · R_k`.
    pub counts: Vec<(PartitionSize, f64)>,
}

impl InstanceCounts {
    pub fn get(&self, k: PartitionSize) -> Option<f64> {
        self.counts.iter().find(|(s, _)| *s == k).map(|(_, n)| *n)
    }

    /// `Σ_k k · N_k`; equals `total_gpcs` up to rounding error.
    pub fn gpcs(&self) -> f64 {
        self.counts.iter().map(|(k, n)| k.gpcs() as f64 * n).sum()
    }
}

/// Scales ratios so the whole GPC budget is allocated.
pub fn instance_counts(ratios: &RatioVector, total_gpcs: u32) -> Result<InstanceCounts> {
    if ratios.ratios.iter().any(|(_, r)| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Validation("instance ratios must be finite and nonnegative".into()));
    }
    let sum_r = ratios.weighted_sum();
    if sum_r <= 0.0 {
        return Err(Error::Degenerate("all instance ratios are zero".into()));
    }
    let normalizer = total_gpcs as f64 / sum_r;
    let counts = ratios.ratios.iter().map(|&(k, r)| (k, normalizer * r)).collect();
    Ok(InstanceCounts { sum_r, normalizer, total_gpcs, counts })
}

/// Partition sizes placed on each physical GPU.
///
/// Partition ids are assigned GPU by GPU in placement order, see
/// [`PartitionPlan::partitions`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPlan {
    gpcs_per_gpu: u32,
    gpus: Vec<Vec<PartitionSize>>,
}

impl PartitionPlan {
    /// Checks per-GPU capacity; sizes on each GPU are stored largest first.
    pub fn new(gpcs_per_gpu: u32, mut gpus: Vec<Vec<PartitionSize>>) -> Result<Self> {
        if gpcs_per_gpu == 0 {
            return Err(Error::Parameter("gpcs_per_gpu must be >= 1".into()));
        }
        for (i, gpu) in gpus.iter_mut().enumerate() {
            let used: u32 = gpu.iter().map(|k| k.gpcs()).sum();
            if used > gpcs_per_gpu {
                return Err(Error::Infeasible(format!(
                    "GPU {i} holds {used} GPCs, capacity is {gpcs_per_gpu}"
                )));
            }
            gpu.sort_unstable_by(|a, b| b.cmp(a));
        }
        Ok(PartitionPlan { gpcs_per_gpu, gpus })
    }

    pub fn gpcs_per_gpu(&self) -> u32 {
        self.gpcs_per_gpu
    }

    pub fn num_gpus(&self) -> u32 {
        self.gpus.len() as u32
    }

    pub fn gpus(&self) -> &[Vec<PartitionSize>] {
        &self.gpus
    }

    /// Partition sizes in id order.
    pub fn partitions(&self) -> Vec<PartitionSize> {
        self.gpus.iter().flatten().copied().collect()
    }

    pub fn num_partitions(&self) -> usize {
        self.gpus.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_partitions() == 0
    }

    /// `(size, count)` for every size with at least one instance, ascending.
    pub fn instances(&self) -> Vec<(PartitionSize, u32)> {
        let mut out: Vec<(PartitionSize, u32)> = Vec::new();
        let mut sizes = self.partitions();
        sizes.sort_unstable();
        for k in sizes {
            match out.last_mut() {
                Some((s, n)) if *s == k => *n += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }

    pub fn count(&self, k: PartitionSize) -> u32 {
        self.gpus.iter().flatten().filter(|&&s| s == k).count() as u32
    }

    pub fn gpcs_used(&self) -> u32 {
        self.gpus.iter().flatten().map(|k| k.gpcs()).sum()
    }
}

/// Largest-remainder integerization of real instance counts.
///
/// Returns `(size, count)` ascending by size together with the GPC budget
/// `min(round(Σ k·N_k), capacity)`. Every count is `floor(N_k)` or
/// `floor(N_k) + 1`; the `+1`s go to the largest fractional parts while
/// they fit the budget.
pub fn round_counts(counts: &[(PartitionSize, f64)], capacity: u32) -> (Vec<(PartitionSize, u32)>, u32) {
    let real_gpcs: f64 = counts.iter().map(|(k, n)| k.gpcs() as f64 * n).sum();
    let budget = (libm::round(real_gpcs) as u32).min(capacity);
    let mut sizes: Vec<PartitionSize> = counts.iter().map(|(k, _)| *k).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut ints = vec![0u32; sizes.len()];
    let mut fracs = Vec::with_capacity(sizes.len());
    for &(k, n) in counts {
        let i = sizes.binary_search(&k).expect("collected above");
        let floor = libm::floor(n);
        ints[i] += floor as u32;
        fracs.push((n - floor, k));
    }
    let mut used: u32 = sizes.iter().zip(&ints).map(|(k, n)| k.gpcs() * n).sum();
    fracs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (frac, k) in fracs {
        if frac > 0.0 && used + k.gpcs() <= budget {
            ints[sizes.binary_search(&k).expect("collected above")] += 1;
            used += k.gpcs();
        }
    }
    (sizes.into_iter().zip(ints).collect(), budget)
}

/// Integerizes real counts and places the instances on GPUs.
///
/// Counts are floored, then rounded up in order of largest fractional part
/// while the GPC budget `round(Σ k·N_k)` allows. The resulting multiset is
/// packed exactly when possible; if it cannot be packed, instances of the
/// largest size are removed one at a time until it can. Remaining budget is
/// filled with the size carrying the most probability mass in
/// `fill_preference` (smallest size on ties) that still fits.
pub fn pack_plan(
    counts: &[(PartitionSize, f64)],
    fill_preference: &[(PartitionSize, f64)],
    num_gpus: u32,
    gpcs_per_gpu: u32,
) -> Result<PartitionPlan> {
    if num_gpus == 0 || gpcs_per_gpu == 0 {
        return Err(Error::Parameter("server needs at least one GPU with one GPC".into()));
    }
    if let Some((k, _)) = counts.iter().find(|(k, _)| k.gpcs() > gpcs_per_gpu) {
        return Err(Error::Infeasible(format!("{k} does not fit on a {gpcs_per_gpu}-GPC GPU")));
    }
    if counts.iter().any(|(_, n)| !(n.is_finite() && *n >= 0.0)) {
        return Err(Error::Validation("instance counts must be finite and nonnegative".into()));
    }
    let (rounded, budget) = round_counts(counts, num_gpus * gpcs_per_gpu);
    let sizes: Vec<PartitionSize> = rounded.iter().map(|(k, _)| *k).collect();
    let mut ints: Vec<u32> = rounded.iter().map(|(_, n)| *n).collect();

    let mut gpus = loop {
        if let Some(gpus) = pack_exact(&sizes, &ints, num_gpus, gpcs_per_gpu) {
            break gpus;
        }
        let i = ints.iter().rposition(|&n| n > 0).expect("an empty multiset always packs");
        ints[i] -= 1;
    };

    let mut used: u32 = gpus.iter().flatten().map(|k| k.gpcs()).sum();
    let mut order: Vec<(PartitionSize, f64)> = fill_preference.to_vec();
    for &k in &sizes {
        if !order.iter().any(|(s, _)| *s == k) {
            order.push((k, 0.0));
        }
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    'fill: loop {
        for &(k, _) in &order {
            if used + k.gpcs() > budget {
                continue;
            }
            if let Some(gpu) = gpus.iter_mut().find(|g| {
                g.iter().map(|s: &PartitionSize| s.gpcs()).sum::<u32>() + k.gpcs() <= gpcs_per_gpu
            }) {
                gpu.push(k);
                used += k.gpcs();
                continue 'fill;
            }
        }
        break;
    }
    PartitionPlan::new(gpcs_per_gpu, gpus)
}

/// Packs `counts[i]` instances of `sizes[i]` onto `num_gpus` bins exactly,
/// or reports that no packing exists.
fn pack_exact(
    sizes: &[PartitionSize],
    counts: &[u32],
    num_gpus: u32,
    cap: u32,
) -> Option<Vec<Vec<PartitionSize>>> {
    struct Search<'a> {
        sizes: &'a [PartitionSize],
        cap: u32,
        failed: BTreeSet<(Vec<u32>, u32)>,
    }

    impl Search<'_> {
        // Fills one bin per level. The largest remaining item must go
        // somewhere and bins are interchangeable, so it opens this bin.
        fn run(&mut self, remaining: &mut Vec<u32>, bins: u32, out: &mut Vec<Vec<PartitionSize>>) -> bool {
            let Some(top) = remaining.iter().rposition(|&n| n > 0) else {
                return true;
            };
            let need: u32 = self.sizes.iter().zip(remaining.iter()).map(|(k, n)| k.gpcs() * n).sum();
            if bins == 0 || need > bins * self.cap {
                return false;
            }
            if self.failed.contains(&(remaining.clone(), bins)) {
                return false;
            }
            remaining[top] -= 1;
            let mut bin = vec![self.sizes[top]];
            let free = self.cap - self.sizes[top].gpcs();
            if self.fill(remaining, top, free, &mut bin, bins, out) {
                return true;
            }
            remaining[top] += 1;
            self.failed.insert((remaining.clone(), bins));
            false
        }

        // Enumerates completions of `bin` using sizes at index <= `max_idx`,
        // largest first, then recurses into the next bin.
        fn fill(
            &mut self,
            remaining: &mut Vec<u32>,
            max_idx: usize,
            free: u32,
            bin: &mut Vec<PartitionSize>,
            bins: u32,
            out: &mut Vec<Vec<PartitionSize>>,
        ) -> bool {
            for i in (0..=max_idx).rev() {
                let g = self.sizes[i].gpcs();
                if remaining[i] > 0 && g <= free {
                    remaining[i] -= 1;
                    bin.push(self.sizes[i]);
                    if self.fill(remaining, i, free - g, bin, bins, out) {
                        return true;
                    }
                    bin.pop();
                    remaining[i] += 1;
                }
            }
            out.push(bin.clone());
            if self.run(remaining, bins - 1, out) {
                return true;
            }
            out.pop();
            false
        }
    }

    let mut search = Search { sizes, cap, failed: BTreeSet::new() };
    let mut remaining = counts.to_vec();
    let mut out = Vec::new();
    if !search.run(&mut remaining, num_gpus, &mut out) {
        return None;
    }
    out.resize(num_gpus as usize, Vec::new());
    Some(out)
}

/// Everything PARIS derived on the way to a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct ParisOutcome {
    pub knees: Vec<(PartitionSize, u32)>,
    pub segments: Vec<BatchSegment>,
    pub ratios: RatioVector,
    pub counts: InstanceCounts,
    pub plan: PartitionPlan,
}

impl ParisOutcome {
    /// Probability mass of each size's batch segment.
    pub fn segment_masses(&self, dist: &BatchDistribution) -> Vec<(PartitionSize, f64)> {
        self.segments.iter().map(|s| (s.k, dist.mass(s.lo, s.hi))).collect()
    }
}

/// Runs knee detection, segmentation, ratio derivation, scaling and packing.
pub fn paris_plan(
    table: &ProfileTable,
    dist: &BatchDistribution,
    server: &ServerSpec,
    knee_threshold: f64,
) -> Result<ParisOutcome> {
    server.validate()?;
    if dist.b_max() > table.b_max() {
        return Err(Error::Validation(format!(
            "distribution reaches batch {} but the profile stops at {}",
            dist.b_max(),
            table.b_max()
        )));
    }
    let knees: Vec<(PartitionSize, u32)> = table
        .knees(knee_threshold)?
        .into_iter()
        .filter(|(k, _)| k.gpcs() <= server.gpcs_per_gpu)
        .collect();
    let segments = segment_batches(&knees, dist.b_max())?;
    let ratios = instance_ratios(dist, table, &segments)?;
    let counts = instance_counts(&ratios, server.gpc_budget)?;
    let masses: Vec<(PartitionSize, f64)> = segments.iter().map(|s| (s.k, dist.mass(s.lo, s.hi))).collect();
    let plan = pack_plan(&counts.counts, &masses, server.num_gpus, server.gpcs_per_gpu)?;
    Ok(ParisOutcome { knees, segments, ratios, counts, plan })
}

/// `floor(gpcs_per_gpu / k)` instances per GPU, stopping once
/// `ceil(gpc_budget / k)` instances are placed.
pub fn homogeneous_plan(k: PartitionSize, server: &ServerSpec) -> Result<PartitionPlan> {
    server.validate()?;
    if k.gpcs() > server.gpcs_per_gpu {
        return Err(Error::Infeasible(format!("{k} does not fit on a {}-GPC GPU", server.gpcs_per_gpu)));
    }
    let per_gpu = server.gpcs_per_gpu / k.gpcs();
    let mut left = (server.num_gpus * per_gpu).min(server.gpc_budget.div_ceil(k.gpcs()));
    let mut gpus = Vec::with_capacity(server.num_gpus as usize);
    for _ in 0..server.num_gpus {
        let n = per_gpu.min(left);
        left -= n;
        gpus.push(vec![k; n as usize]);
    }
    PartitionPlan::new(server.gpcs_per_gpu, gpus)
}

/// Fills each GPU with uniform draws from the sizes that still fit, both
/// on the GPU and within the GPC budget.
pub fn random_plan(server: &ServerSpec, sizes: &[PartitionSize], seed: u64) -> Result<PartitionPlan> {
    server.validate()?;
    let sizes = crate::profile::normalize_sizes(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = server.gpc_budget;
    let mut gpus = Vec::with_capacity(server.num_gpus as usize);
    for _ in 0..server.num_gpus {
        let mut free = server.gpcs_per_gpu;
        let mut gpu = Vec::new();
        loop {
            let fitting: Vec<PartitionSize> =
                sizes.iter().copied().filter(|k| k.gpcs() <= free.min(budget)).collect();
            if fitting.is_empty() {
                break;
            }
            let k = fitting[rng.random_range(0..fitting.len())];
            free -= k.gpcs();
            budget -= k.gpcs();
            gpu.push(k);
        }
        gpus.push(gpu);
    }
    PartitionPlan::new(server.gpcs_per_gpu, gpus)
}
