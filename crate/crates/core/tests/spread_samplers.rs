//! Bipartite and partite samplers: marginals, validity and weightings.

use spread_core::bipartite::{max_bipartite_matching, BipartiteGraph};
use spread_core::estimator::clopper_pearson;
use spread_core::partite_factor::{
    build_gamma_graph, fractional_clique_matching, sample_clique_regularization, sample_spread_kr_factor,
    KrFactorConfig, WeightingMode,
};
use spread_core::regularity::{generate_super_regular_pair, generate_super_regular_system, GeneratorConfig, PartiteSystem};
use spread_core::spread_bipartite::{
    sample_c_neighbor_subgraph, sample_spread_pm_bipartite, sample_spread_star_matching, SpreadPmConfig, StarDemand,
};
use spread_core::{Exact, SeededRng, Vertex};

#[test]
fn neighbour_subgraph_edge_marginal_is_closed_form() {
    let (n, c, trials) = (50usize, 10usize, 10_000u64);
    let g = BipartiteGraph::complete(n, n);
    let mut hits = [0u64; 3];
    let probes = [(0, 0), (17, 33), (49, 1)];
    for s in 0..trials {
        let h = sample_c_neighbor_subgraph(&g, c, &mut SeededRng::new(s)).unwrap();
        for (k, &(a, b)) in probes.iter().enumerate() {
            hits[k] += h.has_edge(a, b) as u64;
        }
    }
    let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(2 * c as i32);
    for h in hits {
        let (lo, hi) = clopper_pearson(h, trials, 0.999);
        assert!(lo <= expected && expected <= hi, "{h} vs {expected}");
    }
}

#[test]
fn sampled_matchings_are_perfect_in_the_host() {
    let mut rng = SeededRng::new(20);
    let (g, _) = generate_super_regular_pair(100, 0.5, &GeneratorConfig::default(), &mut rng).unwrap();
    let cfg = SpreadPmConfig::new(25);
    for s in 0..20 {
        let m = sample_spread_pm_bipartite(&g, &cfg, &SeededRng::new(s)).unwrap().matching;
        assert!(m.is_perfect() && m.is_valid_in(&g));
        assert_eq!(m.pairs().len(), 100);
    }
}

#[test]
fn star_matchings_are_disjoint_and_spread() {
    let (n, cap, big_d) = (80usize, 3usize, 30usize);
    let mut rng = SeededRng::new(21);
    let (g, _) = generate_super_regular_pair(n, 0.5, &GeneratorConfig::default(), &mut rng).unwrap();
    let mut demand = vec![0; n];
    for (a, d) in demand.iter_mut().enumerate() {
        *d = [0, 1, 0, 2, 0, 0, 1, 0][a % 8];
    }
    let demand = StarDemand::new(demand, cap);
    let total = demand.total();
    let trials = 10_000u64;
    let mut occupancy = vec![0u64; n];
    for s in 0..trials {
        let stars = sample_spread_star_matching(&g, &demand, big_d, 20, &SeededRng::new(s)).unwrap();
        let mut used = vec![false; n];
        for (a, star) in stars.iter().enumerate() {
            assert_eq!(star.len(), demand.demand[a]);
            for &b in star {
                assert!(g.has_edge(a as Vertex, b));
                assert!(!std::mem::replace(&mut used[b as usize], true));
                occupancy[b as usize] += 1;
            }
        }
    }
    // Average occupancy is total / n = 0.5; the configured C bounds the maximum.
    let max = *occupancy.iter().max().unwrap() as f64 / trials as f64;
    assert!(max <= 64.0 / n as f64, "max occupancy {max} with total demand {total}");
    let empty = StarDemand::new(vec![0; n], cap);
    let stars = sample_spread_star_matching(&g, &empty, big_d, 20, &SeededRng::new(0)).unwrap();
    assert!(stars.iter().all(Vec::is_empty));
}

#[test]
fn unit_demands_give_perfect_matchings() {
    let g = BipartiteGraph::complete(12, 12);
    let demand = StarDemand::new(vec![1; 12], 1);
    let stars = sample_spread_star_matching(&g, &demand, 4, 20, &SeededRng::new(1)).unwrap();
    let mut seen: Vec<Vertex> = stars.iter().map(|s| s[0]).collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..12).collect::<Vec<_>>());
}

#[test]
fn gamma_density_is_product_of_densities() {
    let (n, d) = (30, 0.6);
    let dens: Vec<f64> = (0..100)
        .map(|s| {
            let mut rng = SeededRng::new(s);
            let pairs = (0..3).map(|_| BipartiteGraph::random(n, n, d, &mut rng)).collect();
            let sys = PartiteSystem::new(3, n, pairs, vec![d; 3]).unwrap();
            let m1 = max_bipartite_matching(sys.pair_ref(1, 2));
            if !m1.is_perfect() {
                return f64::NAN;
            }
            let gamma = build_gamma_graph(&sys, 0, 1, 2, &m1).unwrap();
            gamma.graph.num_edges() as f64 / (n * n) as f64
        })
        .filter(|x| !x.is_nan())
        .collect();
    let k = dens.len() as f64;
    let mean = dens.iter().sum::<f64>() / k;
    let sd = (dens.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    assert!(k >= 95.0);
    assert!((mean - d * d).abs() <= 3.0 * sd / k.sqrt() + 1e-3, "mean {mean}, sd {sd}");
}

#[test]
fn factor_cliques_take_one_vertex_per_part() {
    let mut rng = SeededRng::new(22);
    let sys = generate_super_regular_system(3, 60, 0.5, &GeneratorConfig::default(), &mut rng).unwrap();
    let graph = sys.to_graph();
    let cfg = KrFactorConfig::for_density(0.5);
    let samples: Vec<_> = (0..10)
        .filter_map(|s| sample_spread_kr_factor(&sys, &cfg, &SeededRng::new(s)).ok())
        .collect();
    assert!(samples.len() >= 8);
    for f in samples.into_iter().map(|s| s.factor) {
        assert!(f.is_perfect_in(&graph, 3));
        for c in &f.cliques {
            let mut parts: Vec<usize> = c.iter().map(|&v| sys.local(v).0).collect();
            parts.sort_unstable();
            assert_eq!(parts, vec![0, 1, 2]);
        }
    }
}

/// Gadget sums are exact on every seed. With `δ = d − ε` and density within
/// 0.02 of d = 0.7, 13 of 20 weightings stay in [0, 1] (frozen).
#[test]
fn gadget_weighting_on_small_systems() {
    let gen = GeneratorConfig {
        density_tol: 0.02,
        delta_ratio: 1.0 - 0.15 / 0.7,
        max_resamples: 5000,
        ..GeneratorConfig::default()
    };
    let root = SeededRng::new(5);
    let mut in_range = 0;
    for s in 0..20 {
        let sys = generate_super_regular_system(3, 8, 0.7, &gen, &mut root.child(s)).unwrap();
        let w = fractional_clique_matching::<Exact>(&sys, WeightingMode::GadgetExact).unwrap();
        let sums = w.vertex_sums();
        assert_eq!(sums.len(), 24);
        assert!(sums.iter().all(|x| *x == w.target));
        in_range += w.in_unit_interval() as u32;
    }
    assert_eq!(in_range, 13);
}

#[test]
fn solver_sampling_stays_near_target() {
    let (n, d) = (40usize, 0.7);
    let cap = (n as f64).powf(5.0 / 3.0);
    let root = SeededRng::new(23);
    let mut within = 0;
    for s in 0..100 {
        let mut rng = root.child(s);
        let sys = generate_super_regular_system(3, n, d, &GeneratorConfig::default(), &mut rng).unwrap();
        if let Ok(w) = fractional_clique_matching::<f64>(&sys, WeightingMode::Solver) {
            within += (sample_clique_regularization(&w, &mut rng).max_deviation <= cap) as u32;
        }
    }
    assert!(within >= 90, "{within}/100");
}
