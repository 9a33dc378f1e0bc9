use std::collections::VecDeque;

use migsim_core::profile::{PartitionSize, ProfileRow, ProfileTable};
use migsim_core::sched::{
    elsa_dispatch, fifs_dispatch, sla_slack, t_wait, DispatchKind, PartitionState, QueuedQuery, RunningQuery,
};
use migsim_core::{Query, SlaConfig};
use proptest::prelude::*;

const SIZES: [u32; 5] = [1, 2, 3, 4, 7];
const B_MAX: u32 = 8;

/// Integer latencies keep every sum exact, so ties really tie.
fn table() -> impl Strategy<Value = ProfileTable> {
    prop::collection::vec(1u32..40, SIZES.len() * B_MAX as usize).prop_map(|lat| {
        let rows: Vec<ProfileRow> = SIZES
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| {
                let lat = lat.clone();
                (1..=B_MAX).map(move |b| ProfileRow {
                    k: PartitionSize::new(k).unwrap(),
                    batch: b,
                    latency_ms: lat[i * B_MAX as usize + b as usize - 1] as f64,
                    utilization: 0.5,
                })
            })
            .collect();
        ProfileTable::from_rows("t", &rows).unwrap()
    })
}

/// What a partition has been handed: the running query's start and
/// estimate, then the estimates still waiting.
#[derive(Clone, Debug)]
struct Log {
    k: u32,
    running: Option<(u32, u32)>,
    waiting: Vec<u32>,
}

fn log() -> impl Strategy<Value = Log> {
    (
        prop::sample::select(SIZES.to_vec()),
        prop::option::of((0u32..100, 1u32..40)),
        prop::collection::vec(1u32..40, 0..5),
    )
        .prop_map(|(k, running, waiting)| Log { k, running, waiting: if running.is_some() { waiting } else { vec![] } })
}

fn states(logs: &[Log]) -> Vec<PartitionState> {
    logs.iter()
        .enumerate()
        .map(|(id, l)| {
            let mut s = PartitionState::new(id, PartitionSize::new(l.k).unwrap());
            s.current = l.running.map(|(start, est)| RunningQuery {
                query_id: 1000 + id as u64,
                batch: 1,
                est_ms: est as f64,
                start_ms: start as f64,
            });
            s.queued = l
                .waiting
                .iter()
                .enumerate()
                .map(|(j, &e)| QueuedQuery { query_id: j as u64, batch: 1, est_ms: e as f64 })
                .collect::<VecDeque<_>>();
            s
        })
        .collect()
}

/// Time until the partition drains, from the log alone.
fn oracle_wait(l: &Log, now: f64) -> f64 {
    let mut free_at = now;
    if let Some((start, est)) = l.running {
        free_at = free_at.max(start as f64 + est as f64);
    }
    for &e in &l.waiting {
        free_at += e as f64;
    }
    free_at - now
}

/// Straight-line ELSA: ascending (size, id) scan for positive slack, else
/// the smallest predicted completion, first in scan order on ties.
fn reference_elsa(logs: &[Log], table: &ProfileTable, cfg: &SlaConfig, batch: u32, now: f64) -> (usize, bool) {
    let mut order: Vec<usize> = (0..logs.len()).collect();
    order.sort_by_key(|&i| (logs[i].k, i));
    let est = |i: usize| table.estimated_latency(PartitionSize::new(logs[i].k).unwrap(), batch).unwrap();
    for &i in &order {
        let slack = cfg.sla_target_ms - cfg.alpha * (oracle_wait(&logs[i], now) + cfg.beta * est(i));
        if slack > 0.0 {
            return (i, true);
        }
    }
    let mut best = order[0];
    for &i in &order[1..] {
        if oracle_wait(&logs[i], now) + est(i) < oracle_wait(&logs[best], now) + est(best) {
            best = i;
        }
    }
    (best, false)
}

fn quarter(range: std::ops::Range<u32>) -> impl Strategy<Value = f64> {
    range.prop_map(|q| q as f64 / 4.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn elsa_matches_literal_reference(
        t in table(), logs in prop::collection::vec(log(), 1..=5), batch in 1u32..=B_MAX,
        now in 100u32..160, sla in 1u32..120, alpha in quarter(0..12), beta in quarter(0..12),
    ) {
        let cfg = SlaConfig::new(sla as f64, alpha, beta).unwrap();
        let parts = states(&logs);
        let q = Query { id: 7, arrival_ms: now as f64, batch };
        let got = elsa_dispatch(&q, &parts, &t, &cfg, now as f64).unwrap();
        let (want, step_a) = reference_elsa(&logs, &t, &cfg, batch, now as f64);
        prop_assert_eq!(got.partition, want);
        prop_assert_eq!(got.kind == DispatchKind::SlackSatisfying, step_a);

        if got.kind == DispatchKind::SlackSatisfying {
            let chosen = &parts[got.partition];
            for p in &parts {
                if (p.k, p.id) < (chosen.k, chosen.id) {
                    let est = t.estimated_latency(p.k, batch).unwrap();
                    prop_assert!(sla_slack(&cfg, t_wait(p, now as f64), est) <= 0.0);
                }
            }
        }
    }

    #[test]
    fn scaling_alpha_and_sla_together_keeps_the_decision(
        t in table(), logs in prop::collection::vec(log(), 1..=5), batch in 1u32..=B_MAX,
        sla in 1u32..120, alpha in quarter(1..12), exp in -3i32..4,
    ) {
        // powers of two scale floats exactly
        let c = 2f64.powi(exp);
        let parts = states(&logs);
        let q = Query { id: 1, arrival_ms: 120.0, batch };
        let a = elsa_dispatch(&q, &parts, &t, &SlaConfig::new(sla as f64, alpha, 1.0).unwrap(), 120.0).unwrap();
        let b = elsa_dispatch(&q, &parts, &t, &SlaConfig::new(c * sla as f64, c * alpha, 1.0).unwrap(), 120.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn wait_matches_log_and_is_additive(logs in prop::collection::vec(log(), 1..=5), now in 0u32..160, e in 1u32..40) {
        let mut parts = states(&logs);
        for (p, l) in parts.iter_mut().zip(&logs) {
            let before = t_wait(p, now as f64);
            prop_assert_eq!(before, oracle_wait(l, now as f64));
            p.queued.push_back(QueuedQuery { query_id: 99, batch: 1, est_ms: e as f64 });
            prop_assert_eq!(t_wait(p, now as f64), before + e as f64);
        }
    }

    #[test]
    fn fifs_always_assigns(logs in prop::collection::vec(log(), 1..=5), batch in 1u32..=B_MAX) {
        let parts = states(&logs);
        let d = fifs_dispatch(&Query { id: 3, arrival_ms: 0.0, batch }, &parts).unwrap();
        prop_assert!(d.partition < parts.len());
        let idle: Vec<&PartitionState> = parts.iter().filter(|p| !p.is_busy()).collect();
        if let Some(max_k) = idle.iter().map(|p| p.k).max() {
            prop_assert_eq!(d.kind, DispatchKind::Idle);
            prop_assert_eq!(parts[d.partition].k, max_k);
        } else {
            let min_q = parts.iter().map(|p| p.queue_len()).min().unwrap();
            prop_assert_eq!(parts[d.partition].queue_len(), min_q);
        }
    }
}
