//! Exact oracles against independent enumerations, plus structural invariants.

use proptest::prelude::*;
use rand::Rng;

use spread_core::bipartite::{hall_violation, konig_cover, max_bipartite_matching, BipartiteGraph};
use spread_core::exact::{
    binomial_subgraph, binomial_subgraph_graph, clique_complex, count_kr_factors, exact_hypergraph_pm,
    exact_kr_factor, min_ell_degree, DEFAULT_BUDGET,
};
use spread_core::{Graph, Hypergraph, SeededRng, Vertex};

/// Hyperedges of a uniformly random `m`-edge 3-uniform hypergraph on `n` vertices.
fn random_triples(n: usize, m: usize, rng: &mut SeededRng) -> Hypergraph {
    let mut all = Vec::new();
    for a in 0..n as Vertex {
        for b in a + 1..n as Vertex {
            for c in b + 1..n as Vertex {
                all.push(vec![a, b, c]);
            }
        }
    }
    for i in 0..m {
        let j = rng.gen_range(i..all.len());
        all.swap(i, j);
    }
    all.truncate(m);
    Hypergraph::new(n, 3, all).unwrap()
}

/// Perfect matchings of `h` counted over all partitions into triples.
fn partitions_into_edges(h: &Hypergraph) -> u64 {
    fn go(free: &[Vertex], h: &Hypergraph) -> u64 {
        let Some((&a, rest)) = free.split_first() else {
            return 1;
        };
        let mut total = 0;
        for i in 0..rest.len() {
            for j in i + 1..rest.len() {
                if h.contains(&[a, rest[i], rest[j]]) {
                    let left: Vec<Vertex> = rest
                        .iter()
                        .enumerate()
                        .filter(|&(t, _)| t != i && t != j)
                        .map(|(_, &v)| v)
                        .collect();
                    total += go(&left, h);
                }
            }
        }
        total
    }
    go(&(0..h.n() as Vertex).collect::<Vec<_>>(), h)
}

/// Minimum vertex cover size by enumerating every vertex subset.
fn min_cover_brute(g: &BipartiteGraph) -> usize {
    let (na, nb) = (g.na(), g.nb());
    let mut best = na + nb;
    for mask in 0u32..1 << (na + nb) {
        let covered = g
            .edges()
            .iter()
            .all(|&(a, b)| mask & (1 << a) != 0 || mask & (1 << (na + b as usize)) != 0);
        if covered {
            best = best.min(mask.count_ones() as usize);
        }
    }
    best
}

#[test]
fn min_degree_matches_direct_count() {
    let mut rng = SeededRng::new(10);
    for _ in 0..20 {
        let h = random_triples(8, 30, &mut rng);
        let mut deg = [0usize; 8];
        for e in h.edges() {
            for &v in e {
                deg[v as usize] += 1;
            }
        }
        let (d1, w1) = min_ell_degree(&h, 1).unwrap();
        assert_eq!(d1, *deg.iter().min().unwrap());
        assert_eq!(deg[w1[0] as usize], d1);
        let mut pair_min = usize::MAX;
        for a in 0..8 as Vertex {
            for b in a + 1..8 {
                let c = h.edges().filter(|e| e.contains(&a) && e.contains(&b)).count();
                pair_min = pair_min.min(c);
            }
        }
        assert_eq!(min_ell_degree(&h, 2).unwrap().0, pair_min);
    }
}

#[test]
fn binomial_edge_count_is_binomial() {
    let k = Graph::complete(100).to_hypergraph();
    let (m, p) = (k.num_edges() as f64, 0.3);
    let sd = (m * p * (1.0 - p)).sqrt();
    for s in 0..100 {
        let kept = binomial_subgraph(&k, p, &mut SeededRng::new(s)).num_edges() as f64;
        assert!((kept - m * p).abs() <= 4.0 * sd, "seed {s}: {kept}");
    }
}

#[test]
fn matching_size_equals_minimum_cover() {
    let mut rng = SeededRng::new(11);
    for _ in 0..30 {
        let g = BipartiteGraph::random(6, 6, 0.4, &mut rng);
        let m = max_bipartite_matching(&g);
        assert_eq!(m.size(), min_cover_brute(&g));
    }
}

#[test]
fn exact_pm_agrees_with_partition_count() {
    let mut rng = SeededRng::new(12);
    for _ in 0..10 {
        let h = random_triples(12, 80, &mut rng);
        let brute = partitions_into_edges(&h);
        let found = exact_hypergraph_pm(&h, DEFAULT_BUDGET).unwrap();
        assert_eq!(found.is_some(), brute > 0);
        if let Some(m) = found {
            assert!(m.is_perfect_in(&h));
        }
    }
}

#[test]
fn pm_through_one_vertex_is_impossible() {
    let edges: Vec<Vec<Vertex>> = (1..6)
        .flat_map(|a| (a + 1..6).map(move |b| vec![0, a, b]))
        .collect();
    let h = Hypergraph::new(6, 3, edges).unwrap();
    assert_eq!(exact_hypergraph_pm(&h, DEFAULT_BUDGET).unwrap(), None);
}

#[test]
fn dense_graphs_on_nine_vertices_have_triangle_factors() {
    let root = SeededRng::new(13);
    let mut checked = 0;
    let mut s = 0;
    while checked < 100 {
        let g = Graph::gnp(9, 0.85, &mut root.child(s));
        s += 1;
        if g.min_degree() < 6 {
            continue;
        }
        checked += 1;
        let f = exact_kr_factor(&g, 3, DEFAULT_BUDGET).unwrap().expect("minimum degree 6 forces a factor");
        assert!(f.is_perfect_in(&g, 3));
    }
}

#[test]
fn factor_counts() {
    assert_eq!(count_kr_factors(&Graph::complete(6), 3, DEFAULT_BUDGET).unwrap(), 10);
    assert_eq!(count_kr_factors(&Graph::complete(4), 2, DEFAULT_BUDGET).unwrap(), 3);
    let k333 = Graph::complete_multipartite(&[3, 3, 3]);
    assert_eq!(count_kr_factors(&k333, 3, DEFAULT_BUDGET).unwrap(), 36);
    assert_eq!(exact_kr_factor(&Graph::cycle(6), 3, DEFAULT_BUDGET).unwrap(), None);
}

#[test]
fn triangle_complex_matches_triple_loop() {
    for s in 0..10 {
        let g = Graph::gnp(10, 0.8, &mut SeededRng::new(s));
        let mut triangles = 0;
        for a in 0..10 {
            for b in a + 1..10 {
                for c in b + 1..10 {
                    if g.has_edge(a, b) && g.has_edge(b, c) && g.has_edge(a, c) {
                        triangles += 1;
                    }
                }
            }
        }
        assert_eq!(clique_complex(&g, 3).unwrap().num_edges(), triangles);
    }
    assert_eq!(clique_complex(&Graph::complete(4), 3).unwrap().num_edges(), 4);
    assert_eq!(clique_complex(&Graph::cycle(6), 3).unwrap().num_edges(), 0);
}

#[test]
fn hall_witness_is_deficient() {
    let mut rng = SeededRng::new(14);
    let mut seen = 0;
    while seen < 20 {
        let g = BipartiteGraph::random(6, 6, 0.3, &mut rng);
        let Some(v) = hall_violation(&g).unwrap() else {
            continue;
        };
        seen += 1;
        let mut nbhd: Vec<Vertex> = v.set.iter().flat_map(|&a| g.neighbors_a(a).iter().copied()).collect();
        nbhd.sort_unstable();
        nbhd.dedup();
        assert!(nbhd.len() < v.set.len());
        assert_eq!(nbhd, v.neighbourhood);
    }
    assert_eq!(hall_violation(&BipartiteGraph::complete(4, 4)).unwrap(), None);
}

fn arb_bipartite() -> impl Strategy<Value = BipartiteGraph> {
    (1usize..9, 1usize..9).prop_flat_map(|(na, nb)| {
        proptest::collection::vec(any::<bool>(), na * nb).prop_map(move |bits| {
            let edges: Vec<(Vertex, Vertex)> = (0..na * nb)
                .filter(|&i| bits[i])
                .map(|i| ((i / nb) as Vertex, (i % nb) as Vertex))
                .collect();
            BipartiteGraph::from_edges(na, nb, &edges).unwrap()
        })
    })
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (2usize..10).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut g = Graph::new(n);
            let mut i = 0;
            for u in 0..n as Vertex {
                for v in u + 1..n as Vertex {
                    if bits[i] {
                        g.add_edge(u, v);
                    }
                    i += 1;
                }
            }
            g
        })
    })
}

proptest! {
    #[test]
    fn binomial_is_nested_subset_and_replayable(seed in any::<u64>(), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let h = Hypergraph::complete(9, 3).unwrap();
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        let small = binomial_subgraph(&h, lo, &mut SeededRng::new(seed));
        let large = binomial_subgraph(&h, hi, &mut SeededRng::new(seed));
        prop_assert!(small.edges().all(|e| large.contains(e)));
        prop_assert!(large.edges().all(|e| h.contains(e)));
        prop_assert_eq!(&small, &binomial_subgraph(&h, lo, &mut SeededRng::new(seed)));
    }

    #[test]
    fn konig_cover_has_matching_size(g in arb_bipartite()) {
        let m = max_bipartite_matching(&g);
        prop_assert!(m.is_valid_in(&g));
        let (ca, cb) = konig_cover(&g, &m);
        prop_assert_eq!(ca.len() + cb.len(), m.size());
        prop_assert!(g.edges().iter().all(|(a, b)| ca.contains(a) || cb.contains(b)));
    }

    #[test]
    fn found_matchings_are_perfect(seed in any::<u64>(), p in 0.2f64..1.0, blocks in 1usize..4) {
        let n = 3 * blocks;
        let h = binomial_subgraph(&Hypergraph::complete(n, 3).unwrap(), p, &mut SeededRng::new(seed));
        if let Some(m) = exact_hypergraph_pm(&h, DEFAULT_BUDGET).unwrap() {
            prop_assert!(m.is_perfect_in(&h));
        }
    }

    #[test]
    fn edge_complex_is_the_graph(g in arb_graph()) {
        prop_assert_eq!(clique_complex(&g, 2).unwrap(), g.to_hypergraph());
    }

    #[test]
    fn graph_percolation_is_a_subgraph(g in arb_graph(), seed in any::<u64>(), p in 0.0f64..1.0) {
        let sub = binomial_subgraph_graph(&g, p, &mut SeededRng::new(seed));
        prop_assert!(sub.edges().iter().all(|&(u, v)| g.has_edge(u, v)));
    }
}
