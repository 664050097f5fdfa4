use batchpoll::cyclic::{span, span_excl, span_len};
use batchpoll::numdiff::mean_from_lst;
use batchpoll::transform::TransformEngine;
use batchpoll::{solve_means, sojourn_lst_arbitrary, BatchEntry, BatchSupport, Discipline, Dist, PollingModel};
use proptest::prelude::*;

fn arb_dist() -> impl Strategy<Value = Dist> {
    prop_oneof![
        (0.1f64..2.0).prop_map(|m| Dist::exponential(m).unwrap()),
        (0.1f64..2.0).prop_map(|m| Dist::deterministic(m).unwrap()),
        (1u32..4, 0.1f64..2.0).prop_map(|(k, m)| Dist::erlang(k, m).unwrap()),
    ]
}

fn arb_model() -> impl Strategy<Value = PollingModel> {
    (1usize..=4)
        .prop_flat_map(|n| {
            let entry = (prop::collection::vec(0u32..3, n), 0.05f64..1.0);
            (
                Just(n),
                prop::collection::vec(entry, 1..4),
                prop::collection::vec(arb_dist(), n),
                prop::collection::vec(arb_dist(), n),
                0.05f64..0.9,
            )
        })
        .prop_filter_map("batch vectors must be nonzero", |(n, raw, service, switch, rho)| {
            if raw.iter().any(|(k, _)| k.iter().all(|&x| x == 0)) {
                return None;
            }
            let total: f64 = raw.iter().map(|e| e.1).sum();
            let mut entries: Vec<BatchEntry> =
                raw.iter().map(|(k, p)| BatchEntry { k: k.clone(), p: p / total }).collect();
            let head: f64 = entries[1..].iter().map(|e| e.p).sum();
            entries[0].p = 1.0 - head;
            let batch = BatchSupport::new(n, entries).ok()?;
            let m = PollingModel::new(0.0, batch, service, switch, Discipline::Exhaustive).ok()?;
            m.with_load(rho).ok()
        })
}

fn arb_discipline() -> impl Strategy<Value = Discipline> {
    prop::sample::select(Discipline::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spans_cover_the_cycle(n in 1usize..8, a in 0usize..8, b in 0usize..8) {
        let (a, b) = (a % n, b % n);
        let s: Vec<usize> = span(a, b, n).collect();
        prop_assert_eq!(s.len(), span_len(a, b, n));
        prop_assert_eq!(s[0], a);
        prop_assert_eq!(*s.last().unwrap(), b);
        prop_assert_eq!(span_excl(a, b, n).count(), (b + n - a) % n);
    }

    #[test]
    fn completion_sets_partition_the_support(m in arb_model()) {
        let n = m.n();
        for start in 0..n {
            let total: f64 = (0..n).map(|e| m.batch().completion_probability(start, e)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregation_and_little(m in arb_model(), d in arb_discipline()) {
        let m = m.with_discipline(d);
        let a = solve_means(&m).unwrap();
        let mix: f64 = m.batch().entries().iter().map(|e| e.p * a.mean_batch_sojourn_specific(&e.k).unwrap()).sum();
        prop_assert!((mix - a.mean_batch_sojourn()).abs() <= 1e-10 * mix.abs().max(1.0));
        for i in 0..m.n() {
            let l = m.arrival_rate(i) * a.mean_wait(i);
            prop_assert!((l - a.mean_queue_length(i)).abs() <= 1e-10 * l.max(1.0));
            prop_assert!(a.mean_wait(i) >= -1e-12);
        }
    }

    #[test]
    fn service_order_rotation_leaves_local_disciplines_unchanged(
        m in arb_model(),
        shift in 1usize..4,
        d in prop::sample::select(vec![Discipline::Exhaustive, Discipline::LocallyGated]),
    ) {
        let m = m.with_discipline(d);
        let r = m.rotated(shift % m.n()).unwrap();
        let (t0, t1) = (solve_means(&m).unwrap().mean_batch_sojourn(), solve_means(&r).unwrap().mean_batch_sojourn());
        prop_assert!((t0 - t1).abs() <= 1e-9 * t0);
    }

    #[test]
    fn lst_is_a_decreasing_probability(m in arb_model(), d in arb_discipline()) {
        let m = m.with_discipline(d);
        prop_assert_eq!(sojourn_lst_arbitrary(&m, 0.0).unwrap(), 1.0);
        let mut prev = 1.0;
        for w in [0.01, 0.2, 1.0, 3.0] {
            let v = sojourn_lst_arbitrary(&m, w).unwrap();
            prop_assert!(v > 0.0 && v <= prev + 1e-14, "ω={} value {}", w, v);
            prev = v;
        }
    }

    #[test]
    fn pgf_forms_agree_and_normalize(
        m in arb_model(),
        d in prop::sample::select(vec![Discipline::Exhaustive, Discipline::LocallyGated]),
        zs in prop::collection::vec(0.05f64..0.95, 4),
    ) {
        let m = m.with_discipline(d);
        let e = TransformEngine::new(&m).unwrap();
        let ones = vec![1.0; m.n()];
        prop_assert!((e.stationary_queue_pgf(&ones).unwrap() - 1.0).abs() < 1e-12);
        for i in 0..m.n() {
            prop_assert!((e.visit_begin_pgf(i, &ones).unwrap().value - 1.0).abs() < 1e-12);
        }
        let z = &zs[..m.n()];
        let x = e.stationary_queue_pgf(z).unwrap();
        let y = e.stationary_queue_pgf_by_periods(z).unwrap();
        prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
        prop_assert!(x > 0.0 && x <= 1.0 + 1e-12);
    }

    #[test]
    fn partition_routes_for_the_transform_agree(m in arb_model(), w in 0.05f64..2.0) {
        for d in [Discipline::Exhaustive, Discipline::LocallyGated] {
            let e = TransformEngine::new(&m.with_discipline(d)).unwrap();
            let a = e.sojourn_lst_arbitrary(w).unwrap();
            let b = e.sojourn_lst_by_support(w).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cycle_mean_is_discipline_free(m in arb_model()) {
        let s: f64 = (0..m.n()).map(|i| m.switch(i).mean()).sum();
        prop_assert!((m.mean_cycle() - s / (1.0 - m.total_load())).abs() < 1e-12 * m.mean_cycle());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_mean_matches_mean_value_analysis(m in arb_model(), d in arb_discipline()) {
        let m = m.with_discipline(d);
        let mva = solve_means(&m).unwrap().mean_batch_sojourn();
        let fd = mean_from_lst(|w| sojourn_lst_arbitrary(&m, w).unwrap());
        prop_assert!((fd - mva).abs() <= 1e-4 * mva, "fd {} mva {}", fd, mva);
    }
}
