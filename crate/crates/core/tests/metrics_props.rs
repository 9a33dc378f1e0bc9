use migsim_core::metrics::{latency_bounded_throughput, mean_tail_at, tail_latency, PlanKind};
use migsim_core::paris::homogeneous_plan;
use migsim_core::profile::{synth_profile, PartitionSize, SyntheticProfileParams};
use migsim_core::{
    run, BatchDistribution, DesignPoint, LoadSearch, PartitionPlan, Policy, QueryTrace, ServerSpec, SimOptions,
    SlaConfig,
};
use proptest::prelude::*;

/// Smallest sample with at least `p·n` samples at or below it.
fn oracle_percentile(samples: &[f64], p: f64) -> f64 {
    let need = p * samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &x in &sorted {
        let at_or_below = samples.iter().filter(|&&s| s <= x).count() as f64;
        if at_or_below >= need - 1e-9 {
            return x;
        }
    }
    unreachable!()
}

fn k7() -> PartitionSize {
    PartitionSize::new(7).unwrap()
}

fn search(dist: BatchDistribution, duration_ms: f64) -> LoadSearch {
    LoadSearch { dist, duration_ms, seeds: vec![1, 2, 3], percentile: 0.95, rel_tol: 0.01, options: SimOptions::default() }
}

proptest! {
    #[test]
    fn percentile_is_monotone_and_order_free(
        mut samples in prop::collection::vec(0.0f64..1e4, 1..200), p in 0.01f64..0.99, q in 0.01f64..0.99,
        rot in any::<prop::sample::Index>(),
    ) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let a = tail_latency(&samples, lo).unwrap();
        let b = tail_latency(&samples, hi).unwrap();
        prop_assert!(a <= b);
        prop_assert_eq!(b, oracle_percentile(&samples, hi));
        prop_assert!(a >= samples.iter().copied().fold(f64::INFINITY, f64::min));
        let n = samples.len();
        samples.rotate_left(rot.index(n));
        samples.reverse();
        prop_assert_eq!(tail_latency(&samples, hi).unwrap(), b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fifs_violations_shrink_as_the_sla_grows(
        seed in any::<u64>(), rate in 100.0f64..4000.0, k in prop::sample::select(vec![1u32, 2, 3, 4, 7]),
        sla in 1.0f64..40.0, extra in 0.0f64..40.0,
    ) {
        let t = synth_profile("light", &SyntheticProfileParams::LIGHT, &PartitionSize::default_set(), 32).unwrap();
        let plan = homogeneous_plan(PartitionSize::new(k).unwrap(), &ServerSpec::full(2, 7)).unwrap();
        let dist = BatchDistribution::lognormal(1.0, 1.0, 32).unwrap();
        let trace = QueryTrace::sample(&dist, rate, 1_000.0, seed).unwrap();
        let opts = SimOptions::default();
        let tight = run(&plan, Policy::Fifs, &trace, &t, &SlaConfig::with_target(sla).unwrap(), &opts).unwrap();
        let loose = run(&plan, Policy::Fifs, &trace, &t, &SlaConfig::with_target(sla + extra).unwrap(), &opts).unwrap();
        prop_assert!(loose.violations() <= tight.violations());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn lbt_grows_with_the_sla(
        sla in 8.0f64..30.0, extra in 0.0f64..30.0, policy in prop_oneof![Just(Policy::Fifs), Just(Policy::Elsa)],
    ) {
        let t = synth_profile("light", &SyntheticProfileParams::LIGHT, &PartitionSize::default_set(), 32).unwrap();
        let server = ServerSpec::full(1, 7);
        let plan = homogeneous_plan(PartitionSize::new(3).unwrap(), &server).unwrap();
        let design = DesignPoint::new(PlanKind::Homogeneous(PartitionSize::new(3).unwrap()), plan, policy);
        let s = search(BatchDistribution::lognormal(1.0, 1.0, 32).unwrap(), 4_000.0);
        let a = latency_bounded_throughput(&design, &t, &SlaConfig::with_target(sla).unwrap(), &s).unwrap();
        let b = latency_bounded_throughput(&design, &t, &SlaConfig::with_target(sla + extra).unwrap(), &s).unwrap();
        // both ends carry up to rel_tol of bracket width
        prop_assert!(b.rate_qps >= a.rate_qps * (1.0 - 2.0 * s.rel_tol), "{} then {}", a.rate_qps, b.rate_qps);
    }
}

#[test]
fn lbt_matches_a_fine_load_sweep_on_a_deterministic_queue() {
    let t = synth_profile("light", &SyntheticProfileParams::LIGHT, &PartitionSize::default_set(), 32).unwrap();
    let dist = BatchDistribution::point_mass(8, 32).unwrap();
    let latency = t.estimated_latency(k7(), 8).unwrap();
    let sla = SlaConfig::with_target(5.0 * latency).unwrap();
    let plan = PartitionPlan::new(7, vec![vec![k7()]]).unwrap();
    let design = DesignPoint::new(PlanKind::Homogeneous(k7()), plan, Policy::Fifs);
    let s = search(dist, 10_000.0);
    let lbt = latency_bounded_throughput(&design, &t, &sla, &s).unwrap().rate_qps;

    // sweep in 0.5% steps of the service rate, keep the last load that meets the SLA
    let service = 1000.0 / latency;
    let mut oracle = 0.0;
    for i in 1..=200 {
        let rate = service * i as f64 * 0.005;
        if mean_tail_at(&design, &t, &sla, &s, rate).unwrap() <= sla.sla_target_ms {
            oracle = rate;
        } else {
            break;
        }
    }
    assert!(oracle > 0.0 && oracle < service);
    assert!((lbt / oracle - 1.0).abs() <= 0.10, "search {lbt}, sweep {oracle}");
}

#[test]
fn doubling_identical_partitions_doubles_lbt() {
    // a loose SLA keeps both systems near their stability limit, where
    // pooling gains between 4 and 8 servers are small
    let t = synth_profile("light", &SyntheticProfileParams::LIGHT, &PartitionSize::default_set(), 32).unwrap();
    let sla = SlaConfig::with_target(10.0 * t.estimated_latency(k7(), 32).unwrap()).unwrap();
    let s = search(BatchDistribution::lognormal(1.0, 1.0, 32).unwrap(), 20_000.0);
    let lbt = |gpus: usize| {
        let plan = PartitionPlan::new(7, vec![vec![k7()]; gpus]).unwrap();
        let design = DesignPoint::new(PlanKind::Homogeneous(k7()), plan, Policy::Fifs);
        latency_bounded_throughput(&design, &t, &sla, &s).unwrap().rate_qps
    };
    let (one, two) = (lbt(4), lbt(8));
    eprintln!("4 partitions {one:.1} q/s, 8 partitions {two:.1} q/s");
    assert!((two / one - 2.0).abs() <= 0.2, "{one} -> {two}");
}
