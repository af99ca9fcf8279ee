//! Desk-scale acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Arguments such as `A3 A7` select criteria.

use std::path::Path;
use std::time::Instant;

use rand::Rng;

use spread_core::absorption::{nibble_matching, DegreeCondition, DiracInstance, EngineConfig, NibbleConfig};
use spread_core::bipartite::{max_bipartite_matching, BipartiteGraph};
use spread_core::estimator::{clopper_pearson, estimate_spread, estimate_vertex_spread, EstimatorConfig};
use spread_core::exact::{
    binomial_subgraph, count_kr_factors, count_perfect_matchings, exact_hypergraph_pm, exact_kr_factor,
    DEFAULT_BUDGET,
};
use spread_core::hypergraph::CompleteHost;
use spread_core::partite_factor::{
    fractional_clique_matching, sample_clique_regularization, sample_spread_kr_factor, KrFactorConfig, WeightingMode,
};
use spread_core::percolation::{
    kr_factor_normalizer, pm_normalizer, scaling_experiment, Host, Property, ThresholdConfig,
};
use spread_core::regularity::{generate_super_regular_pair, generate_super_regular_system, GeneratorConfig};
use spread_core::spread_bipartite::{attempt_spread_pm, sample_spread_pm_bipartite, SpreadPmConfig};
use spread_core::tree::decomposition::{synthetic_decomposition, SyntheticConfig};
use spread_core::tree::pipeline::{embed_tree, TreeConfig};
use spread_core::tree::{generate_tree, RootedTree, TreeShape};
use spread_core::{Exact, Graph, Hypergraph, SeededRng, Vertex};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// Brute-force oracles: plain enumeration, sharing no code with the library.

/// Maximum matching size by dynamic programming over subsets of the right side.
fn brute_bipartite(g: &BipartiteGraph) -> usize {
    fn go(a: usize, used: usize, g: &BipartiteGraph, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if a == g.na() {
            return 0;
        }
        if let Some(v) = memo[a][used] {
            return v;
        }
        let mut v = go(a + 1, used, g, memo);
        for b in 0..g.nb() {
            if used & (1 << b) == 0 && g.has_edge(a as Vertex, b as Vertex) {
                v = v.max(1 + go(a + 1, used | (1 << b), g, memo));
            }
        }
        memo[a][used] = Some(v);
        v
    }
    let mut memo = vec![vec![None; 1 << g.nb()]; g.na()];
    go(0, 0, g, &mut memo)
}

/// Number of partitions of `0..n` into `k`-sets that all satisfy `block`.
fn brute_partitions(n: usize, k: usize, block: &dyn Fn(&[Vertex]) -> bool) -> u128 {
    fn go(free: &[Vertex], k: usize, block: &dyn Fn(&[Vertex]) -> bool) -> u128 {
        if free.is_empty() {
            return 1;
        }
        let mut total = 0;
        for mask in 0u32..1 << (free.len() - 1) {
            if mask.count_ones() as usize != k - 1 {
                continue;
            }
            let mut set = vec![free[0]];
            let mut rest = Vec::new();
            for (i, &v) in free[1..].iter().enumerate() {
                if mask & (1 << i) != 0 {
                    set.push(v);
                } else {
                    rest.push(v);
                }
            }
            if block(&set) {
                total += go(&rest, k, block);
            }
        }
        total
    }
    if n % k != 0 {
        return 0;
    }
    go(&(0..n as Vertex).collect::<Vec<_>>(), k, block)
}

fn is_clique(g: &Graph, set: &[Vertex]) -> bool {
    set.iter()
        .enumerate()
        .all(|(i, &u)| set[i + 1..].iter().all(|&v| g.has_edge(u, v)))
}

fn a1() -> Verdict {
    let mut fails = Vec::new();
    let k6 = count_kr_factors(&Graph::complete(6), 3, DEFAULT_BUDGET).unwrap();
    let k333 = count_kr_factors(&Graph::complete_multipartite(&[3, 3, 3]), 3, DEFAULT_BUDGET).unwrap();
    if k6 != 10 || k333 != 36 {
        fails.push(format!("fixtures K6 = {k6}, K333 = {k333}"));
    }
    let root = SeededRng::new(1);
    for i in 0..500u64 {
        let mut rng = root.child(i);
        let p: f64 = rng.gen_range(0.15..0.9);
        match i % 4 {
            0 => {
                let (na, nb) = (rng.gen_range(1..=12), rng.gen_range(1..=12));
                let g = BipartiteGraph::random(na, nb, p, &mut rng);
                let m = max_bipartite_matching(&g);
                if !m.is_valid_in(&g) || m.size() != brute_bipartite(&g) {
                    fails.push(format!("bipartite instance {i}"));
                }
            }
            1 => {
                let k = rng.gen_range(2..=3);
                let n = k * rng.gen_range(1..=12 / k);
                let h = binomial_subgraph(&Hypergraph::complete(n, k).unwrap(), p, &mut rng);
                let brute = brute_partitions(n, k, &|s| h.contains(s));
                let found = exact_hypergraph_pm(&h, DEFAULT_BUDGET).unwrap();
                let count = count_perfect_matchings(&h, DEFAULT_BUDGET).unwrap();
                let valid = found.as_ref().map_or(true, |m| m.is_perfect_in(&h));
                if found.is_some() != (brute > 0) || count != brute || !valid {
                    fails.push(format!("hypergraph instance {i}"));
                }
            }
            _ => {
                let r = rng.gen_range(2..=4);
                let n = r * rng.gen_range(1..=12 / r);
                let g = Graph::gnp(n, p, &mut rng);
                let brute = brute_partitions(n, r, &|s| is_clique(&g, s));
                let found = exact_kr_factor(&g, r, DEFAULT_BUDGET).unwrap();
                let count = count_kr_factors(&g, r, DEFAULT_BUDGET).unwrap();
                let valid = found.as_ref().map_or(true, |f| f.is_perfect_in(&g, r));
                if found.is_some() != (brute > 0) || count != brute || !valid {
                    fails.push(format!("clique instance {i}"));
                }
            }
        }
    }
    verdict(
        fails.is_empty(),
        format!("500 instances, K6 -> {k6}, K333 -> {k333}, mismatches {fails:?}"),
    )
}

fn a2() -> Verdict {
    let root = SeededRng::new(2);
    let mut ok = 0;
    for s in 0..200 {
        let mut rng = root.child(s);
        let (g, _) = generate_super_regular_pair(100, 0.5, &GeneratorConfig::default(), &mut rng).unwrap();
        if attempt_spread_pm(&g, 25, &mut rng).unwrap().is_some() {
            ok += 1;
        }
    }
    verdict(ok >= 150, format!("single-attempt success {ok}/200 (need 150)"))
}

fn a3() -> Verdict {
    let (n, c) = (100usize, 25usize);
    let mut rng = SeededRng::new(3);
    let (g, _) = generate_super_regular_pair(n, 0.5, &GeneratorConfig::default(), &mut rng).unwrap();
    let cfg = SpreadPmConfig::new(c);
    let est = estimate_spread(
        |r| {
            let s = sample_spread_pm_bipartite(&g, &cfg, r)?;
            Ok(s.matching.pairs().into_iter().map(|(a, b)| vec![a, n as Vertex + b]).collect())
        },
        10_000,
        2,
        n as f64,
        &EstimatorConfig::default(),
        &rng.child(1),
    )
    .unwrap();
    let q = 2.0 * c as f64 / n as f64;
    let width = |count: u64| {
        let (lo, hi) = clopper_pearson(count, est.trials, 0.95);
        hi - lo
    };
    let (e, p) = (est.size(1).unwrap(), est.size(2).unwrap());
    let edge_bound = 4.0 / 3.0 * q + 3.0 * width(e.max_count);
    let pair_bound = (4.0f64 / 3.0).sqrt().powi(2) * q * q + 3.0 * width(p.max_count);
    verdict(
        e.max_p <= edge_bound && p.max_p <= pair_bound,
        format!(
            "edge max {:.4} <= {edge_bound:.4}, pair max {:.5} <= {pair_bound:.4}",
            e.max_p, p.max_p
        ),
    )
}

fn a4() -> Verdict {
    let cfg = NibbleConfig {
        c: 64.0,
        eta: 0.1,
        retries: 1,
    };
    let big = CompleteHost { n: 1200, k: 3 };
    let root = SeededRng::new(4);
    let covered = (0..50)
        .filter(|&s| nibble_matching(&big, &cfg, &root.child(s)).map_or(false, |o| o.covered >= 1080))
        .count();
    let n = 600;
    let host = CompleteHost { n, k: 3 };
    let est = estimate_spread(
        |r| Ok(nibble_matching(&host, &cfg, r)?.matching.edges),
        10_000,
        1,
        1.0,
        &EstimatorConfig::default(),
        &root.child(1000),
    )
    .unwrap();
    let bound = 2.0 * cfg.c / (n * n) as f64 * 3.0;
    let max_p = est.size(1).unwrap().max_p;
    verdict(
        covered >= 48 && max_p <= bound,
        format!("coverage >= 0.9n in {covered}/50 (need 48); edge max {max_p:.2e} <= {bound:.2e}"),
    )
}

/// Systems for the weighting checks: `δ = d − ε` and densities within 0.02
/// of `d`, so that `ε` is small next to `d`.
fn weighting_generator(d: f64) -> GeneratorConfig {
    let gen = GeneratorConfig::default();
    GeneratorConfig {
        density_tol: 0.02,
        delta_ratio: 1.0 - gen.eps / d,
        max_resamples: 5000,
        ..gen
    }
}

fn a5() -> Verdict {
    let d = 0.8;
    let gen = weighting_generator(d);
    let root = SeededRng::new(5);
    let (mut exact_sums, mut in_range) = (0, 0);
    for s in 0..20 {
        let sys = generate_super_regular_system(3, 8, d, &gen, &mut root.child(s)).unwrap();
        let w = fractional_clique_matching::<Exact>(&sys, WeightingMode::GadgetExact).unwrap();
        if w.vertex_sums().iter().all(|x| *x == w.target) {
            exact_sums += 1;
        }
        if w.in_unit_interval() {
            in_range += 1;
        }
    }
    let n = 40;
    let cap = (n as f64).powf(5.0 / 3.0);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for s in 0..100 {
        let mut rng = root.child(100 + s);
        let sys = generate_super_regular_system(3, n, d, &gen, &mut rng).unwrap();
        if let Ok(w) = fractional_clique_matching::<f64>(&sys, WeightingMode::Solver) {
            let dev = sample_clique_regularization(&w, &mut rng).max_deviation;
            worst = worst.max(dev);
            if dev <= cap {
                within += 1;
            }
        }
    }
    verdict(
        exact_sums == 20 && in_range == 20 && within >= 90,
        format!(
            "d = {d}: gadget sums exact {exact_sums}/20, weights in [0, 1] {in_range}/20; \
             sampled deviation <= {cap:.0} in {within}/100 (worst {worst:.1})"
        ),
    )
}

fn a6() -> Verdict {
    let n = 150;
    let cond = DegreeCondition::new(1, 5.0 / 9.0, 0.3).unwrap();
    let complete = CompleteHost { n, k: 3 };
    let inst = DiracInstance::new(&complete, cond, EngineConfig::default()).unwrap();
    let root = SeededRng::new(6);
    let valid_complete = (0..100)
        .filter(|&s| {
            inst.sample(&root.child(s))
                .map_or(false, |p| p.matching.is_perfect_in(&Hypergraph::complete(n, 3).unwrap()))
        })
        .count();
    let floor = 0.9 * (149.0 * 148.0 / 2.0);
    let k3 = Hypergraph::complete(n, 3).unwrap();
    let mut valid_random = 0;
    for s in 0..100 {
        let mut rng = root.child(1000 + s);
        let host = loop {
            let h = binomial_subgraph(&k3, 0.95, &mut rng);
            if h.degrees().iter().all(|&d| d as f64 >= floor) {
                break h;
            }
        };
        let ok = DiracInstance::new(&host, cond, EngineConfig::default())
            .and_then(|i| i.sample(&rng.child(1)))
            .map_or(false, |p| p.matching.is_perfect_in(&host));
        if ok {
            valid_random += 1;
        }
    }
    let est = estimate_spread(
        |r| Ok(inst.sample(r)?.matching.edges),
        5000,
        1,
        (n * n) as f64,
        &EstimatorConfig::default(),
        &root.child(5000),
    )
    .unwrap();
    let c1 = est.size(1).unwrap().implied_c;
    verdict(
        valid_complete >= 90 && valid_random >= 90 && c1 <= 100.0,
        format!("valid complete {valid_complete}/100, random {valid_random}/100; c1 n^2 = {c1:.1} <= 100"),
    )
}

/// Configured bound on the triangle marginal times `n²`.
const TRIANGLE_SPREAD_BOUND: f64 = 100.0;

fn a7() -> Verdict {
    let (n, d) = (60, 0.5);
    let gen = GeneratorConfig::default();
    let cfg = KrFactorConfig::for_density(d);
    let root = SeededRng::new(7);
    let mut valid = 0;
    for s in 0..100 {
        let mut rng = root.child(s);
        let sys = generate_super_regular_system(3, n, d, &gen, &mut rng).unwrap();
        if sample_spread_kr_factor(&sys, &cfg, &rng.child(1)).map_or(false, |f| f.factor.is_perfect_in(&sys.to_graph(), 3))
        {
            valid += 1;
        }
    }
    let sys = generate_super_regular_system(3, n, d, &gen, &mut root.child(1000)).unwrap();
    let est = estimate_spread(
        |r| Ok(sample_spread_kr_factor(&sys, &cfg, r)?.factor.cliques),
        2000,
        1,
        (n * n) as f64,
        &EstimatorConfig::default(),
        &root.child(1001),
    )
    .unwrap();
    let c1 = est.size(1).unwrap().implied_c;
    verdict(
        valid >= 75 && c1 <= TRIANGLE_SPREAD_BOUND,
        format!("valid {valid}/100 (need 75); fitted c1 n^2 = {c1:.1} <= {TRIANGLE_SPREAD_BOUND}"),
    )
}

fn a8() -> Verdict {
    let cfg = ThresholdConfig {
        trials: 200,
        ..ThresholdConfig::default()
    };
    let knn = scaling_experiment(
        |n| Ok(Host::bipartite("knn", BipartiteGraph::complete(n, n))),
        &Property::PerfectMatching,
        &[64, 128, 256, 512],
        |n| pm_normalizer(n, 2),
        &cfg,
        &SeededRng::new(81),
    )
    .unwrap();
    let ratios: Vec<f64> = knn.rows.iter().map(|r| r.ratio).collect();
    let bip_ok = ratios.iter().all(|r| (0.5..=2.0).contains(r));
    let k3 = scaling_experiment(
        |n| Ok(Host::hyper("complete-3", Hypergraph::complete(n, 3)?)),
        &Property::PerfectMatching,
        &[30, 60, 120],
        |n| pm_normalizer(n, 3),
        &cfg,
        &SeededRng::new(82),
    )
    .unwrap();
    let tri = scaling_experiment(
        |n| Ok(Host::graph("complete", Graph::complete(n))),
        &Property::KrFactor(3),
        &[24, 48, 96],
        |n| kr_factor_normalizer(n, 3),
        &cfg,
        &SeededRng::new(83),
    )
    .unwrap();
    verdict(
        bip_ok && k3.drift <= 2.5 && tri.drift <= 2.5,
        format!(
            "bipartite ratios {:?} in [0.5, 2]; 3-uniform drift {:.2}, triangle drift {:.2} (<= 2.5)",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            k3.drift,
            tri.drift
        ),
    )
}

/// Configured vertex-spread constant `C` for the tree sampler.
const TREE_SPREAD_BOUND: f64 = 20.0;

fn embedding_ok(tree: &RootedTree, host: &Graph, map: &[Vertex]) -> bool {
    let mut seen = vec![false; host.n()];
    map.len() == tree.n()
        && map.iter().all(|&x| !std::mem::replace(&mut seen[x as usize], true))
        && tree.edges().iter().all(|&(u, v)| host.has_edge(map[u as usize], map[v as usize]))
}

fn a9() -> Verdict {
    let n = 200;
    let cfg = TreeConfig::default();
    let root = SeededRng::new(9);
    let instance = |s: u64| {
        let rng = root.child(s);
        let tree = generate_tree(n, 3, TreeShape::Random, &mut rng.child(0)).unwrap();
        let (host, dec) = synthetic_decomposition(&tree, &SyntheticConfig::default(), &mut rng.child(1)).unwrap();
        (tree, host, dec)
    };
    let (mut valid, mut post) = (0, 0);
    for s in 0..100 {
        let (tree, host, dec) = instance(s);
        if let Ok(e) = embed_tree(&tree, &host, &dec, &cfg, &root.child(s).child(2)) {
            valid += embedding_ok(&tree, &host, &e.map) as usize;
            post += e.trace.buffer_postconditions_hold() as usize;
        }
    }
    let (tree, host, dec) = instance(1000);
    let est = estimate_vertex_spread(
        |r| Ok(embed_tree(&tree, &host, &dec, &cfg, r)?.map),
        n,
        None,
        2000,
        &EstimatorConfig::default(),
        &root.child(1001),
    )
    .unwrap();
    let c = est.vertex.sizes[0].implied_c;
    verdict(
        valid >= 95 && post == valid && c <= TREE_SPREAD_BOUND,
        format!(
            "valid {valid}/100 (need 95); buffer postconditions {post}/{valid}; c n = {c:.1} <= {TREE_SPREAD_BOUND}"
        ),
    )
}

fn a10() -> Verdict {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let mut bad = Vec::new();
    for f in &files {
        let rec = spread_cli::ledger::read_record(f, None).unwrap();
        let replayed = pool.install(|| spread_cli::commands::outcome_of(&rec.command, &rec.config));
        if replayed != (rec.exit_code, rec.outcome.clone()) || !rec.digest_ok() {
            bad.push(f.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    verdict(
        !files.is_empty() && bad.is_empty(),
        format!("{} fixtures replayed on a 3-thread pool; mismatches {bad:?}", files.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
        ("A10", a10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == name) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        let secs = t.elapsed().as_secs_f64();
        let status = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failed.push(name);
        }
        println!("{name} {status} [{secs:.1}s] {}", v.detail);
    }
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
