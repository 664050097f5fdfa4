use batchpoll::sim::{self, SimConfig};
use batchpoll::transform::TransformEngine;
use batchpoll::{builtin, globally_gated, solve_means, Discipline};

fn cfg(seed: u64) -> SimConfig {
    SimConfig {
        replications: 10,
        batches_per_replication: 60_000,
        seed,
        lst_probe_points: vec![0.5, 1.0],
        ..SimConfig::default()
    }
}

#[test]
fn symmetric_exhaustive_against_simulation() {
    let m = builtin::sym2(0.2, 1.0, 1.0).unwrap();
    let probes = SimConfig { pgf_probe_points: vec![vec![0.5, 0.5], vec![0.2, 0.9]], ..cfg(11) };
    let est = sim::run(&m, &probes).unwrap();
    assert!(est.mean_t.contains(6.0), "{:?}", est.mean_t);
    assert!(est.mean_c.contains(m.mean_cycle()), "{:?}", est.mean_c);
    for i in 0..2 {
        assert!(est.busy_fraction[i].contains(m.rho(i)), "{:?}", est.busy_fraction[i]);
    }
    let e = TransformEngine::new(&m).unwrap();
    for (z, ci) in &est.visit_begin_pgf {
        let v = e.visit_begin_pgf(0, z).unwrap().value;
        assert!(ci.contains(v), "z={z:?}: analytic {v}, simulated {ci:?}");
    }
}

#[test]
fn globally_gated_cycle_against_simulation() {
    let m = builtin::model_b(0.6).unwrap().with_discipline(Discipline::GloballyGated);
    let est = sim::run(&m, &cfg(12)).unwrap();
    let gg = globally_gated::analyze(&m);
    assert!(est.cycle_residual.contains(gg.cycle().residual), "{:?}", est.cycle_residual);
    for (w, ci) in &est.cycle_lst {
        let v = gg.cycle_lst(*w).unwrap().value;
        assert!(ci.contains(v), "ω={w}: analytic {v}, simulated {ci:?}");
    }
}

#[test]
fn empirical_little_law() {
    let m = builtin::model_a(0.5).unwrap().with_discipline(Discipline::LocallyGated);
    let est = sim::run(&m, &cfg(13)).unwrap();
    let a = solve_means(&m).unwrap();
    for i in 0..m.n() {
        let l = est.mean_l[i].mean;
        let lw = m.arrival_rate(i) * est.mean_w[i].mean;
        assert!((l - lw).abs() <= 0.03 * l, "queue {i}: {l} vs {lw}");
        assert!(est.mean_l[i].contains(a.mean_queue_length(i)), "queue {i}: {:?}", est.mean_l[i]);
    }
}
