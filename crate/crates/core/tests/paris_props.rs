use migsim_core::paris::{instance_counts, instance_ratios, pack_plan, paris_plan, round_counts, segment_batches};
use migsim_core::profile::{synth_profile, PartitionSize, ProfileTable, SyntheticProfileParams};
use migsim_core::{BatchDistribution, ServerSpec};
use proptest::prelude::*;

fn size(g: u32) -> PartitionSize {
    PartitionSize::new(g).unwrap()
}

fn params() -> impl Strategy<Value = SyntheticProfileParams> {
    (0.1f64..10.0, 0.0f64..5.0, 0.05f64..2.0).prop_map(|(w, f, g)| SyntheticProfileParams {
        work_per_sample_ms: w,
        fixed_overhead_ms: f,
        parallelism_per_sample: g,
        util_cap: 0.95,
    })
}

fn pmf(b_max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, b_max).prop_filter("some mass", |w| w.iter().sum::<f64>() > 0.0)
}

/// Pre-rounding instance counts recomputed from the raw table.
fn oracle_counts(t: &ProfileTable, weights: &[f64], threshold: f64, total: f64) -> Vec<(u32, f64)> {
    let mass: f64 = weights.iter().sum();
    let b_max = weights.len() as u32;
    let mut prev = 0;
    let mut ratios = Vec::new();
    let n = t.sizes().len();
    for (i, &k) in t.sizes().iter().enumerate() {
        let knee = (1..=t.b_max()).find(|&b| t.utilization(k, b).unwrap() >= threshold).unwrap_or(t.b_max());
        let hi = if i + 1 == n { b_max } else { knee.min(b_max) };
        let mut r = 0.0;
        for b in (prev + 1)..=hi {
            r += weights[b as usize - 1] / mass * t.estimated_latency(k, b).unwrap() / 1000.0;
        }
        ratios.push((k.gpcs(), r));
        prev = prev.max(hi);
    }
    let denom: f64 = ratios.iter().map(|(k, r)| *k as f64 * r).sum();
    ratios.into_iter().map(|(k, r)| (k, total * r / denom)).collect()
}

/// Whether `items` (GPC sizes) fit into `bins` bins of `cap` by exhaustive search.
fn packable(items: &mut Vec<u32>, bins: &mut Vec<u32>, cap: u32) -> bool {
    let Some(item) = items.pop() else { return true };
    let mut tried_empty = false;
    for i in 0..bins.len() {
        if bins[i] + item > cap {
            continue;
        }
        if bins[i] == 0 {
            if tried_empty {
                continue;
            }
            tried_empty = true;
        }
        bins[i] += item;
        if packable(items, bins, cap) {
            return true;
        }
        bins[i] -= item;
    }
    items.push(item);
    false
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn counts_match_brute_force_and_conserve_gpcs(
        p in params(), weights in pmf(16), total in 1u32..120, threshold in 0.1f64..1.0,
    ) {
        let t = synth_profile("p", &p, &PartitionSize::default_set(), 16).unwrap();
        let dist = BatchDistribution::from_weights(&weights).unwrap();
        let segments = segment_batches(&t.knees(threshold).unwrap(), 16).unwrap();
        let ratios = instance_ratios(&dist, &t, &segments).unwrap();
        let counts = instance_counts(&ratios, total).unwrap();
        let sum: f64 = counts.counts.iter().map(|(k, n)| k.gpcs() as f64 * n).sum();
        prop_assert!((sum - total as f64).abs() <= 1e-9 * total as f64);
        let oracle = oracle_counts(&t, &weights, threshold, total as f64);
        for ((k, n), (ok, on)) in counts.counts.iter().zip(&oracle) {
            prop_assert_eq!(k.gpcs(), *ok);
            prop_assert!((n - on).abs() <= 1e-9 * total as f64, "{} vs {}", n, on);
        }
    }

    #[test]
    fn plans_respect_capacity_and_budget(
        p in params(), weights in pmf(32), gpus in 1u32..6, spare in 0u32..10,
    ) {
        let t = synth_profile("p", &p, &PartitionSize::default_set(), 32).unwrap();
        let dist = BatchDistribution::from_weights(&weights).unwrap();
        let budget = (gpus * 7).saturating_sub(spare).max(1);
        let server = ServerSpec { num_gpus: gpus, gpcs_per_gpu: 7, gpc_budget: budget };
        let out = paris_plan(&t, &dist, &server, 0.8).unwrap();
        prop_assert!(out.plan.num_gpus() <= gpus);
        for gpu in out.plan.gpus() {
            prop_assert!(gpu.iter().map(|k| k.gpcs()).sum::<u32>() <= 7);
        }
        prop_assert!(out.plan.gpcs_used() <= budget);
    }

    #[test]
    fn rounding_moves_each_count_by_less_than_one(
        counts in prop::collection::vec(0.0f64..12.0, 5), capacity in 1u32..100,
    ) {
        let sizes = [1, 2, 3, 4, 7];
        let real: Vec<(PartitionSize, f64)> = sizes.iter().zip(&counts).map(|(&k, &n)| (size(k), n)).collect();
        let (rounded, budget) = round_counts(&real, capacity);
        for ((k, n), (rk, rn)) in real.iter().zip(&rounded) {
            prop_assert_eq!(k, rk);
            prop_assert!((*rn as f64 - n).abs() < 1.0);
        }
        let real_gpcs: f64 = real.iter().map(|(k, n)| k.gpcs() as f64 * n).sum();
        prop_assert_eq!(budget, (real_gpcs.round() as u32).min(capacity));
        let floors: u32 = real.iter().map(|(k, n)| k.gpcs() * n.floor() as u32).sum();
        let used: u32 = rounded.iter().map(|(k, n)| k.gpcs() * n).sum();
        prop_assert!(used <= budget.max(floors));
    }

    #[test]
    fn packing_keeps_every_packable_instance(
        counts in prop::collection::vec(0u32..4, 5), gpus in 1u32..4,
    ) {
        let sizes = [1, 2, 3, 4, 7];
        let real: Vec<(PartitionSize, f64)> = sizes.iter().zip(&counts).map(|(&k, &n)| (size(k), n as f64)).collect();
        let plan = pack_plan(&real, &[], gpus, 7).unwrap();
        for gpu in plan.gpus() {
            prop_assert!(gpu.iter().map(|k| k.gpcs()).sum::<u32>() <= 7);
        }
        let mut items: Vec<u32> = sizes.iter().zip(&counts).flat_map(|(&k, &n)| std::iter::repeat_n(k, n as usize)).collect();
        items.sort_unstable();
        let demand: u32 = items.iter().sum();
        if demand <= gpus * 7 && packable(&mut items, &mut vec![0; gpus as usize], 7) {
            for (&k, &n) in sizes.iter().zip(&counts) {
                prop_assert!(plan.count(size(k)) >= n, "{:?} lost instances of {}", plan, k);
            }
            prop_assert_eq!(plan.gpcs_used(), demand);
        } else {
            prop_assert!(plan.gpcs_used() <= gpus * 7);
        }
    }

    #[test]
    fn shifting_mass_to_larger_batches_never_grows_the_smallest_count(
        p in params(), weights in pmf(32), frac in 0.0f64..=1.0, pick in any::<prop::sample::Index>(),
        dest in any::<prop::sample::Index>(),
    ) {
        let t = synth_profile("p", &p, &PartitionSize::default_set(), 32).unwrap();
        let segments = segment_batches(&t.knees(0.8).unwrap(), 32).unwrap();
        let first = segments[0];
        prop_assume!(!first.is_empty());
        let later: Vec<u32> = segments[1..].iter().flat_map(|s| s.batches()).collect();
        prop_assume!(!later.is_empty());
        let from: Vec<u32> = first.batches().collect();
        let i = from[pick.index(from.len())] as usize - 1;
        let j = later[dest.index(later.len())] as usize - 1;
        let mut moved = weights.clone();
        let delta = moved[i] * frac;
        moved[i] -= delta;
        moved[j] += delta;

        let n1 = |w: &[f64]| {
            let dist = BatchDistribution::from_weights(w).unwrap();
            let ratios = instance_ratios(&dist, &t, &segments).unwrap();
            instance_counts(&ratios, 56).unwrap().counts[0].1
        };
        let (before, after) = (n1(&weights), n1(&moved));
        prop_assert!(after <= before * (1.0 + 1e-12), "{} -> {}", before, after);
        let oracle = oracle_counts(&t, &moved, 0.8, 56.0)[0].1;
        prop_assert!((after - oracle).abs() <= 1e-9 * 56.0);
    }
}
