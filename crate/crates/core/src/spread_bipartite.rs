//! Spread perfect matchings and star systems in dense bipartite pairs, via
//! random constant-degree subgraphs.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bipartite::{max_bipartite_matching_shuffled, BipartiteGraph, BipartiteMatching};
use crate::error::{Error, Result};
use crate::hypergraph::Vertex;
use crate::regularity::{certify_super_regular, SuperRegularParams};
use crate::rng::SeededRng;

/// Default number of fresh attempts before giving up.
pub const DEFAULT_MAX_RETRIES: u32 = 20;

/// Default `C` for density `d` while no calibration is supplied.
pub fn default_c(d: f64) -> usize {
    (25.0 / d).ceil() as usize
}

/// Every vertex draws `c` uniform neighbours with repetition; the result keeps
/// exactly the drawn edges. `P[e ∈ H] ≤ 2c / min degree` by a union bound.
pub fn sample_c_neighbor_subgraph(
    g: &BipartiteGraph,
    c: usize,
    rng: &mut SeededRng,
) -> Result<BipartiteGraph> {
    if c == 0 {
        return Err(Error::invalid("C must be at least 1"));
    }
    let mut edges = Vec::with_capacity((g.na() + g.nb()) * c);
    for a in 0..g.na() as Vertex {
        let nb = g.neighbors_a(a);
        if nb.is_empty() {
            return Err(Error::precondition(format!("vertex a{a} is isolated")));
        }
        for _ in 0..c {
            edges.push((a, nb[rng.gen_range(0..nb.len())]));
        }
    }
    for b in 0..g.nb() as Vertex {
        let na = g.neighbors_b(b);
        if na.is_empty() {
            return Err(Error::precondition(format!("vertex b{b} is isolated")));
        }
        for _ in 0..c {
            edges.push((na[rng.gen_range(0..na.len())], b));
        }
    }
    BipartiteGraph::from_edges(g.na(), g.nb(), &edges)
}

/// One attempt: draw the `C`-neighbour subgraph and look for a perfect
/// matching in it, augmenting in a random order.
pub fn attempt_spread_pm(
    g: &BipartiteGraph,
    c: usize,
    rng: &mut SeededRng,
) -> Result<Option<BipartiteMatching>> {
    let h = sample_c_neighbor_subgraph(g, c, rng)?;
    let m = max_bipartite_matching_shuffled(&h, rng);
    Ok(m.is_perfect().then_some(m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadPmConfig {
    pub c: usize,
    pub max_retries: u32,
    /// When set, the host is certified before sampling.
    pub certify: Option<SuperRegularParams>,
}

impl SpreadPmConfig {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            max_retries: DEFAULT_MAX_RETRIES,
            certify: None,
        }
    }
}

/// A sampled perfect matching and the number of attempts it took.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmSample {
    pub matching: BipartiteMatching,
    pub attempts: u32,
}

/// Perfect matching of a balanced dense pair, `O(C/n)`-spread.
///
/// Attempt `i` runs on child stream `i`, so failures are resampled from fresh
/// randomness: the output is the first success, i.e. the single-attempt law
/// conditioned on success.
pub fn sample_spread_pm_bipartite(
    g: &BipartiteGraph,
    cfg: &SpreadPmConfig,
    rng: &SeededRng,
) -> Result<PmSample> {
    if g.na() != g.nb() {
        return Err(Error::precondition(format!(
            "unbalanced pair {} x {}",
            g.na(),
            g.nb()
        )));
    }
    if let Some(params) = &cfg.certify {
        let v = certify_super_regular(g, params)?;
        if !v.passed {
            return Err(Error::precondition(format!(
                "host is not super-regular at {params:?}: {v:?}"
            )));
        }
    }
    for attempt in 0..cfg.max_retries {
        if let Some(m) = attempt_spread_pm(g, cfg.c, &mut rng.child(attempt as u64))? {
            return Ok(PmSample {
                matching: m,
                attempts: attempt + 1,
            });
        }
    }
    Err(Error::RetriesExhausted {
        attempts: cfg.max_retries,
        reason: format!("no perfect matching in {} C-neighbour subgraphs", cfg.max_retries),
    })
}

/// Star sizes `d_a` for the left side, capped by `Δ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StarDemand {
    pub demand: Vec<usize>,
    pub cap: usize,
}

impl StarDemand {
    pub fn new(demand: Vec<usize>, cap: usize) -> Self {
        Self { demand, cap }
    }

    pub fn total(&self) -> usize {
        self.demand.iter().sum()
    }

    pub fn validate(&self, g: &BipartiteGraph) -> Result<()> {
        if self.demand.len() != g.na() {
            return Err(Error::invalid("one demand per left vertex required"));
        }
        if self.demand.iter().any(|&d| d > self.cap) {
            return Err(Error::invalid(format!("a demand exceeds the cap {}", self.cap)));
        }
        if self.total() > g.nb() {
            return Err(Error::invalid(format!(
                "total demand {} exceeds |B| = {}",
                self.total(),
                g.nb()
            )));
        }
        Ok(())
    }
}

/// `H = G(D/|B|) ∪ H''`, where in `H''` every vertex of `A ∪ B` keeps `D`
/// uniformly chosen incident edges (all of them if it has fewer).
pub fn sample_star_host(g: &BipartiteGraph, big_d: usize, rng: &mut SeededRng) -> BipartiteGraph {
    let p = big_d as f64 / g.nb() as f64;
    let mut edges = Vec::new();
    for (a, b) in g.edges() {
        if rng.gen::<f64>() < p {
            edges.push((a, b));
        }
    }
    for a in 0..g.na() as Vertex {
        let nb = g.neighbors_a(a);
        for i in sample(rng, nb.len(), big_d.min(nb.len())) {
            edges.push((a, nb[i]));
        }
    }
    for b in 0..g.nb() as Vertex {
        let na = g.neighbors_b(b);
        for i in sample(rng, na.len(), big_d.min(na.len())) {
            edges.push((na[i], b));
        }
    }
    BipartiteGraph::from_edges(g.na(), g.nb(), &edges).expect("subgraph of g")
}

/// A `d⃗`-matching inside `h`: vertex `a` is split into `d_a` copies and a
/// maximum matching of the split graph is read back.
pub fn find_star_matching(
    h: &BipartiteGraph,
    demand: &StarDemand,
    rng: &mut SeededRng,
) -> Option<Vec<Vec<Vertex>>> {
    let mut owner = Vec::new();
    let mut adj = Vec::new();
    for a in 0..h.na() {
        for _ in 0..demand.demand[a] {
            owner.push(a);
            adj.push(h.neighbors_a(a as Vertex).to_vec());
        }
    }
    let split = BipartiteGraph::from_adjacency(h.nb(), adj).expect("in range");
    let m = max_bipartite_matching_shuffled(&split, rng);
    if m.size() != owner.len() {
        return None;
    }
    let mut stars = vec![Vec::new(); h.na()];
    for (copy, b) in m.pairs() {
        stars[owner[copy as usize]].push(b);
    }
    for s in &mut stars {
        s.sort_unstable();
    }
    Some(stars)
}

/// Star assignment `a ↦ d_a` distinct right vertices, globally disjoint, every
/// edge in `g`; `O(D/|B|)`-vertex-spread by the same subgraph argument as the
/// perfect matching sampler.
pub fn sample_spread_star_matching(
    g: &BipartiteGraph,
    demand: &StarDemand,
    big_d: usize,
    max_retries: u32,
    rng: &SeededRng,
) -> Result<Vec<Vec<Vertex>>> {
    demand.validate(g)?;
    for attempt in 0..max_retries {
        let mut r = rng.child(attempt as u64);
        let h = sample_star_host(g, big_d, &mut r);
        if let Some(stars) = find_star_matching(&h, demand, &mut r) {
            return Ok(stars);
        }
    }
    Err(Error::RetriesExhausted {
        attempts: max_retries,
        reason: "no d-matching in the sampled star hosts".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_one_graph_is_reproduced() {
        let g = BipartiteGraph::from_edges(3, 3, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        for s in 0..5 {
            let h = sample_c_neighbor_subgraph(&g, 7, &mut SeededRng::new(s)).unwrap();
            assert_eq!(h, g);
        }
    }

    #[test]
    fn subgraph_is_deterministic_and_contained() {
        let mut rng = SeededRng::new(2);
        let g = BipartiteGraph::random(30, 30, 0.5, &mut rng);
        let a = sample_c_neighbor_subgraph(&g, 4, &mut SeededRng::new(9)).unwrap();
        let b = sample_c_neighbor_subgraph(&g, 4, &mut SeededRng::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.edges().iter().all(|&(x, y)| g.has_edge(x, y)));
        let iso = BipartiteGraph::from_edges(2, 2, &[(0, 0)]).unwrap();
        assert!(sample_c_neighbor_subgraph(&iso, 2, &mut rng).is_err());
    }

    #[test]
    fn complete_pair_gives_perfect_matchings() {
        let g = BipartiteGraph::complete(40, 40);
        let s = sample_spread_pm_bipartite(&g, &SpreadPmConfig::new(8), &SeededRng::new(1)).unwrap();
        assert!(s.matching.is_perfect() && s.matching.is_valid_in(&g));
    }

    #[test]
    fn star_matching_basics() {
        let g = BipartiteGraph::complete(6, 6);
        let zero = StarDemand::new(vec![0; 6], 3);
        let stars = sample_spread_star_matching(&g, &zero, 4, 5, &SeededRng::new(1)).unwrap();
        assert!(stars.iter().all(Vec::is_empty));
        let ones = StarDemand::new(vec![1; 6], 3);
        let stars = sample_spread_star_matching(&g, &ones, 4, 5, &SeededRng::new(1)).unwrap();
        let mut used: Vec<_> = stars.iter().flatten().copied().collect();
        used.sort_unstable();
        assert_eq!(used, (0..6).collect::<Vec<_>>());
        let bad = StarDemand::new(vec![2, 2, 2, 2, 0, 0], 1);
        assert!(bad.validate(&g).is_err());
    }
}
