//! Containment curves, threshold bisection and the clique-complex comparison.

use proptest::prelude::*;

use spread_core::bipartite::BipartiteGraph;
use spread_core::percolation::{
    clique_coupling_comparison, containment_outcomes, containment_probability, estimate_threshold, loglog_slope,
    pm_normalizer, CheckerConfig, Host, Property, ThresholdConfig,
};
use spread_core::{Error, Graph, Hypergraph, SeededRng};

fn knn(n: usize) -> Host {
    Host::bipartite(format!("knn-{n}"), BipartiteGraph::complete(n, n))
}

fn threshold_cfg(trials: usize) -> ThresholdConfig {
    ThresholdConfig {
        trials,
        ..ThresholdConfig::default()
    }
}

/// At `p = (ln n + c) / n` the matching probability of `K_{n,n}(p)` tends to
/// `exp(-2 e^{-c})`, so `c = 0` sits near `e^{-2}` rather than mid-curve.
#[test]
fn knn_at_log_n_over_n_is_near_classical_limit() {
    let n = 128;
    let p = (n as f64).ln() / n as f64;
    let r = containment_probability(&knn(n), &Property::PerfectMatching, p, 400, &CheckerConfig::default(), &SeededRng::new(40))
        .unwrap();
    assert_eq!(r.trials, 400);
    let limit = (-2.0f64).exp();
    assert!((r.freq - limit).abs() <= 0.1, "{}", r.freq);
}

#[test]
fn host_without_matching_does_not_bracket() {
    let h = Host::graph("odd", Graph::complete(7));
    let err = estimate_threshold(&h, &Property::PerfectMatching, 1.0, &threshold_cfg(50), &SeededRng::new(0));
    assert!(matches!(err, Err(Error::Precondition(_))));
}

#[test]
fn dirac_host_threshold_matches_complete_graph() {
    let n = 256;
    let root = SeededRng::new(41);
    let dirac = (0..)
        .map(|s| Graph::gnp(n, 0.65, &mut root.child(s)))
        .find(|g| g.min_degree() as f64 >= 0.55 * n as f64)
        .unwrap();
    let norm = pm_normalizer(n, 2);
    let cfg = threshold_cfg(200);
    let host = Host::graph("dirac", dirac);
    let d = estimate_threshold(&host, &Property::PerfectMatching, norm, &cfg, &root.child(1000)).unwrap();
    let k = estimate_threshold(&Host::graph("kn", Graph::complete(n)), &Property::PerfectMatching, norm, &cfg, &root.child(1001))
        .unwrap();
    let ratio = d.p_hat / k.p_hat;
    assert!((1.0 / 3.0..=3.0).contains(&ratio), "dirac {} vs complete {}", d.p_hat, k.p_hat);
}

#[test]
fn coupling_aligns_for_k30() {
    let g = Graph::complete(30);
    let ps: Vec<f64> = (0..8).map(|i| 0.002 * 1.4f64.powi(i)).collect();
    let grid = [0.5, 1.0, 1.5, 2.0, 2.5];
    let cmp = clique_coupling_comparison(&g, 3, &ps, &grid, 100, &CheckerConfig::default(), &SeededRng::new(42)).unwrap();
    let a = cmp.aligned_a.expect("both curves cross 1/2 on the grid");
    assert!(0.0 < a && a < 3.0, "{a}");
    let top = clique_coupling_comparison(&g, 3, &[1.0], &[1.0], 5, &CheckerConfig::default(), &SeededRng::new(0)).unwrap();
    assert_eq!(top.complex[0].freq, 1.0);
    assert_eq!(top.factor[0].points[0].freq, 1.0);
}

#[test]
fn factor_threshold_scales_as_cube_root_of_complex_threshold() {
    let cfg = threshold_cfg(100);
    let (mut ps, mut qs) = (Vec::new(), Vec::new());
    for (i, n) in [18usize, 24, 30].into_iter().enumerate() {
        let rng = SeededRng::new(43).child(i as u64);
        let complex = Host::hyper("k3", Hypergraph::complete(n, 3).unwrap());
        let graph = Host::graph("kn", Graph::complete(n));
        ps.push(estimate_threshold(&complex, &Property::PerfectMatching, 1.0, &cfg, &rng.child(0)).unwrap().p_hat);
        qs.push(estimate_threshold(&graph, &Property::KrFactor(3), 1.0, &cfg, &rng.child(1)).unwrap().p_hat);
    }
    let slope = loglog_slope(&ps, &qs).unwrap();
    assert!((0.25..=0.5).contains(&slope), "slope {slope}: p {ps:?}, q {qs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn containment_is_monotone_under_shared_seeds(seed in any::<u64>(), p in 0.05f64..0.5, dp in 0.0f64..0.5) {
        let h = Host::hyper("k3-12", Hypergraph::complete(12, 3).unwrap());
        let cfg = CheckerConfig::default();
        let rng = SeededRng::new(seed);
        let lo = containment_outcomes(&h, &Property::PerfectMatching, p, 20, &cfg, &rng).unwrap();
        let hi = containment_outcomes(&h, &Property::PerfectMatching, (p + dp).min(1.0), 20, &cfg, &rng).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(!(a.unwrap() && !b.unwrap()));
        }
    }
}
