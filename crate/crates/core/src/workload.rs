//! Query streams: batch-size distributions, Poisson traces and replay.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// Probability mass over batch sizes `1..=b_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchDistribution {
    pmf: Vec<f64>,
}

impl BatchDistribution {
    /// Wraps an already normalized pmf; `pmf[i]` is the probability of batch `i + 1`.
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::EmptyInput("batch distribution"));
        }
        if let Some(p) = pmf.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Validation(format!("probability {p} is not a finite nonnegative number")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(BatchDistribution { pmf })
    }

    /// Normalizes nonnegative weights into a pmf.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput("batch distribution"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Validation(format!("weight {w} is not a finite nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Degenerate("batch distribution has no mass".into()));
        }
        Ok(BatchDistribution { pmf: weights.iter().map(|w| w / total).collect() })
    }

    pub fn point_mass(batch: u32, b_max: u32) -> Result<Self> {
        if batch == 0 || batch > b_max {
            return Err(Error::Parameter(format!("batch {batch} outside 1..={b_max}")));
        }
        let mut pmf = vec![0.0; b_max as usize];
        pmf[batch as usize - 1] = 1.0;
        Ok(BatchDistribution { pmf })
    }

    /// Log-normal batch sizes discretized onto integer bins.
    ///
    /// Bin `b` receives the continuous mass on `(b - 0.5, b + 0.5]`; mass
    /// outside `[0.5, b_max + 0.5]` is dropped and the rest renormalized.
    pub fn lognormal(mu: f64, sigma: f64, b_max: u32) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) || !mu.is_finite() {
            return Err(Error::Parameter(format!("log-normal needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        if b_max == 0 {
            return Err(Error::Parameter("b_max must be >= 1".into()));
        }
        let cdf = |x: f64| 0.5 * libm::erfc(-(libm::log(x) - mu) / (sigma * core::f64::consts::SQRT_2));
        let weights: Vec<f64> = (1..=b_max)
            .map(|b| (cdf(b as f64 + 0.5) - cdf(b as f64 - 0.5)).max(0.0))
            .collect();
        Self::from_weights(&weights)
    }

    /// Relative frequency of each batch size in a trace.
    pub fn empirical(trace: &QueryTrace, b_max: u32) -> Result<Self> {
        if trace.queries.is_empty() {
            return Err(Error::EmptyInput("trace"));
        }
        let mut counts = vec![0u64; b_max as usize];
        for q in &trace.queries {
            if q.batch == 0 || q.batch > b_max {
                return Err(Error::Validation(format!("query {} has batch {} outside 1..={b_max}", q.id, q.batch)));
            }
            counts[q.batch as usize - 1] += 1;
        }
        let n = trace.queries.len() as f64;
        Ok(BatchDistribution { pmf: counts.into_iter().map(|c| c as f64 / n).collect() })
    }

    pub fn b_max(&self) -> u32 {
        self.pmf.len() as u32
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability of `batch`; zero outside the support.
    pub fn prob(&self, batch: u32) -> f64 {
        match batch {
            0 => 0.0,
            b => self.pmf.get(b as usize - 1).copied().unwrap_or(0.0),
        }
    }

    /// Mass on batches in `(lo, hi]`.
    pub fn mass(&self, lo: u32, hi: u32) -> f64 {
        (lo + 1..=hi).map(|b| self.prob(b)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// Batch with the highest probability (smallest on ties).
    pub fn mode(&self) -> u32 {
        let mut best = 0;
        for (i, p) in self.pmf.iter().enumerate() {
            if *p > self.pmf[best] {
                best = i;
            }
        }
        best as u32 + 1
    }

    pub fn l1_distance(&self, other: &BatchDistribution) -> f64 {
        let n = self.pmf.len().max(other.pmf.len()) as u32;
        (1..=n).map(|b| (self.prob(b) - other.prob(b)).abs()).sum()
    }
}

/// One batched inference request.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Query {
    pub id: u64,
    pub arrival_ms: f64,
    pub batch: u32,
}

/// Arrival-ordered queries over a fixed horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryTrace {
    pub queries: Vec<Query>,
    pub duration_ms: f64,
    pub seed: u64,
}

impl QueryTrace {
    /// Validates an imported trace: sorted arrivals, unique ids, batches >= 1.
    ///
    /// A `duration_ms` shorter than the last arrival is extended to it.
    pub fn new(queries: Vec<Query>, duration_ms: f64, seed: u64) -> Result<Self> {
        let mut ids = alloc::collections::BTreeSet::new();
        let mut last = 0.0;
        for q in &queries {
            if q.batch == 0 {
                return Err(Error::Validation(format!("query {} has batch 0", q.id)));
            }
            if !(q.arrival_ms.is_finite() && q.arrival_ms >= 0.0) {
                return Err(Error::Validation(format!("query {} has invalid arrival {}", q.id, q.arrival_ms)));
            }
            if q.arrival_ms < last {
                return Err(Error::Validation(format!("query {} arrives before its predecessor", q.id)));
            }
            if !ids.insert(q.id) {
                return Err(Error::Validation(format!("duplicate query id {}", q.id)));
            }
            last = q.arrival_ms;
        }
        if !(duration_ms.is_finite() && duration_ms >= 0.0) {
            return Err(Error::Parameter(format!("invalid trace duration {duration_ms}")));
        }
        Ok(QueryTrace { queries, duration_ms: duration_ms.max(last), seed })
    }

    /// Poisson arrivals at `rate_qps` with i.i.d. batches drawn from `dist`.
    ///
    /// For a fixed seed, the trace at rate `c * λ` is the trace at `λ`
    /// compressed in time by `c` (plus extra queries at the tail), which
    /// keeps load sweeps on common random numbers.
    pub fn sample(dist: &BatchDistribution, rate_qps: f64, duration_ms: f64, seed: u64) -> Result<Self> {
        if !(rate_qps.is_finite() && rate_qps > 0.0) {
            return Err(Error::Parameter(format!("arrival rate must be positive, got {rate_qps}")));
        }
        if !(duration_ms.is_finite() && duration_ms >= 0.0) {
            return Err(Error::Parameter(format!("invalid trace duration {duration_ms}")));
        }
        let gaps = Exp::new(rate_qps / 1000.0).map_err(|e| Error::Parameter(format!("{e}")))?;
        let batches = WeightedIndex::new(dist.pmf()).map_err(|e| Error::Degenerate(format!("{e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut queries = Vec::new();
        let mut t = 0.0;
        loop {
            t += gaps.sample(&mut rng);
            let batch = batches.sample(&mut rng) as u32 + 1;
            if t >= duration_ms {
                break;
            }
            queries.push(Query { id: queries.len() as u64, arrival_ms: t, batch });
        }
        Ok(QueryTrace { queries, duration_ms, seed })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn max_batch(&self) -> u32 {
        self.queries.iter().map(|q| q.batch).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_of(batches: &[u32]) -> QueryTrace {
        let queries = batches
            .iter()
            .enumerate()
            .map(|(i, &b)| Query { id: i as u64, arrival_ms: i as f64, batch: b })
            .collect();
        QueryTrace::new(queries, batches.len() as f64, 0).unwrap()
    }

    #[test]
    fn lognormal_single_bin() {
        let d = BatchDistribution::lognormal(3.0, 0.7, 1).unwrap();
        assert_eq!(d.pmf(), &[1.0]);
    }

    #[test]
    fn lognormal_is_normalized() {
        for (mu, sigma) in [(0.0, 0.3), (1.0, 1.0), (2.5, 1.5), (-1.0, 2.0)] {
            let d = BatchDistribution::lognormal(mu, sigma, 32).unwrap();
            let s: f64 = d.pmf().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lognormal_rejects_bad_sigma() {
        assert!(matches!(BatchDistribution::lognormal(1.0, 0.0, 32), Err(Error::Parameter(_))));
        assert!(matches!(BatchDistribution::lognormal(1.0, -1.0, 32), Err(Error::Parameter(_))));
    }

    #[test]
    fn empirical_counts() {
        let d = BatchDistribution::empirical(&trace_of(&[1, 1, 2, 4]), 4).unwrap();
        assert_eq!(d.pmf(), &[0.5, 0.25, 0.0, 0.25]);
        let d = BatchDistribution::empirical(&trace_of(&[3]), 4).unwrap();
        assert_eq!(d.pmf(), &[0.0, 0.0, 1.0, 0.0]);
        let empty = QueryTrace::new(Vec::new(), 10.0, 0).unwrap();
        assert_eq!(BatchDistribution::empirical(&empty, 4), Err(Error::EmptyInput("trace")));
    }

    #[test]
    fn zero_duration_is_empty() {
        let d = BatchDistribution::lognormal(1.0, 1.0, 32).unwrap();
        assert!(QueryTrace::sample(&d, 100.0, 0.0, 7).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = BatchDistribution::lognormal(1.0, 1.0, 32).unwrap();
        let a = QueryTrace::sample(&d, 250.0, 5_000.0, 42).unwrap();
        let b = QueryTrace::sample(&d, 250.0, 5_000.0, 42).unwrap();
        assert_eq!(a, b);
        let c = QueryTrace::sample(&d, 250.0, 5_000.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn doubling_rate_compresses_time() {
        let d = BatchDistribution::lognormal(1.0, 1.0, 32).unwrap();
        let slow = QueryTrace::sample(&d, 100.0, 10_000.0, 9).unwrap();
        let fast = QueryTrace::sample(&d, 200.0, 10_000.0, 9).unwrap();
        for (s, f) in slow.queries.iter().zip(&fast.queries) {
            assert_eq!(s.batch, f.batch);
            assert!((s.arrival_ms - 2.0 * f.arrival_ms).abs() < 1e-9 * s.arrival_ms.max(1.0));
        }
    }

    #[test]
    fn rejects_unsorted_or_duplicate_queries() {
        let q = |id, t| Query { id, arrival_ms: t, batch: 1 };
        assert!(QueryTrace::new(vec![q(0, 2.0), q(1, 1.0)], 5.0, 0).is_err());
        assert!(QueryTrace::new(vec![q(0, 1.0), q(0, 2.0)], 5.0, 0).is_err());
    }
}
