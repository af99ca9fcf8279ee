//! Iterative absorption: vortex, regularisation by matching removal or
//! fractional clique sampling, nibble, greedy cover-down, and an exact final
//! step. One engine serves plain `k`-uniform hosts and the clique complex of
//! an `r`-partite system.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binom_f64, for_each_combination};
use crate::error::{Error, Result};
use crate::exact::{clique_complex, exact_hypergraph_pm_shuffled, DEFAULT_BUDGET};
use crate::hypergraph::{edge_key, HyperHost, Hypergraph, Vertex};
use crate::matching::{Factor, Matching};
use crate::partite_factor::{fractional_clique_matching, sample_clique_regularization, WeightingMode};
use crate::regularity::PartiteSystem;
use crate::rng::SeededRng;

/// `δ_ℓ ≥ (threshold + margin) C(n - ℓ, k - ℓ)`; the threshold is supplied
/// by the caller since `δ⁺_{ℓ,k}` is unknown in general.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeCondition {
    pub ell: usize,
    pub threshold: f64,
    pub margin: f64,
}

impl DegreeCondition {
    pub fn new(ell: usize, threshold: f64, margin: f64) -> Result<Self> {
        if ell == 0 || !(0.0..=1.0).contains(&threshold) || margin <= 0.0 {
            return Err(Error::invalid(format!(
                "degree condition ℓ = {ell}, threshold = {threshold}, margin = {margin}"
            )));
        }
        Ok(Self {
            ell,
            threshold,
            margin,
        })
    }

    /// `(threshold + share · margin) C(pool, k - ℓ)`.
    pub fn floor(&self, share: f64, pool: usize, k: usize) -> f64 {
        (self.threshold + share * self.margin) * binom_f64(pool as f64, (k - self.ell) as u32)
    }
}

/// Number of `(k - |s|)`-subsets `T` of `pool ∖ s` with `s ∪ T` an edge.
pub fn degree_into<H: HyperHost + ?Sized>(host: &H, s: &[Vertex], pool: &[Vertex]) -> usize {
    let k = host.k();
    let avail: Vec<Vertex> = pool.iter().copied().filter(|v| !s.contains(v)).collect();
    let mut buf = Vec::with_capacity(k);
    let mut count = 0;
    for_each_combination(&avail, k - s.len(), |t| {
        buf.clear();
        buf.extend_from_slice(s);
        buf.extend_from_slice(t);
        buf.sort_unstable();
        if host.has_edge(&buf) {
            count += 1;
        }
    });
    count
}

/// First `ℓ`-subset of `over` whose degree into `pool` is below `floor`.
pub fn ell_degree_violation<H: HyperHost + ?Sized>(
    host: &H,
    ell: usize,
    over: &[Vertex],
    pool: &[Vertex],
    floor: f64,
) -> Option<Vec<Vertex>> {
    let mut bad = None;
    let mut sorted = over.to_vec();
    sorted.sort_unstable();
    for_each_combination(&sorted, ell, |s| {
        if bad.is_none() && (degree_into(host, s, pool) as f64) < floor {
            bad = Some(s.to_vec());
        }
    });
    bad
}

/// Minimum `ℓ`-degree of a host given only edge queries.
pub fn host_min_ell_degree<H: HyperHost + ?Sized>(host: &H, ell: usize) -> (usize, Vec<Vertex>) {
    let all: Vec<Vertex> = (0..host.n() as Vertex).collect();
    let mut best = (usize::MAX, Vec::new());
    for_each_combination(&all, ell, |s| {
        let d = degree_into(host, s, &all);
        if d < best.0 {
            best = (d, s.to_vec());
        }
    });
    best
}

/// Equal parts `[p·size, (p+1)·size)` of the vertex set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parts {
    pub r: usize,
    pub size: usize,
}

impl Parts {
    pub fn part_of(&self, v: Vertex) -> usize {
        v as usize / self.size
    }

    fn split(&self, vertices: &[Vertex]) -> Vec<Vec<Vertex>> {
        let mut out = vec![Vec::new(); self.r];
        for &v in vertices {
            out[self.part_of(v)].push(v);
        }
        out
    }

    fn balanced(&self, vertices: &[Vertex]) -> bool {
        let s = self.split(vertices);
        s.iter().all(|p| p.len() == s[0].len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularization {
    /// Union of near-perfect matchings found blockwise by exact search.
    MatchingRemoval,
    /// 0/1 sample of a fractional clique matching (partite mode only).
    FractionalSampling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Vortex rate `ε²`: each level keeps about this fraction of the last.
    pub shrink: f64,
    /// Accepted level sizes: `(1 ± size_slack) · shrink · |V_i|`.
    pub size_slack: f64,
    /// Smallest final vortex set; a level that would fall below it is not drawn.
    pub floor: usize,
    pub vortex_retries: u32,
    /// Block size `Q` of the partial-matching step (a multiple of `k`).
    pub block_size: usize,
    /// Number of matchings unioned into the regular subgraph.
    pub matchings: usize,
    /// A matching counts if it covers at least `(1 - γ)` of its ground set.
    pub gamma: f64,
    /// Nibble constant `C`.
    pub nibble_c: f64,
    pub nibble_retries: u32,
    /// Nibble coverage slack; by default the largest value that keeps the
    /// greedy spill within `shrink · |U|`.
    pub eta: Option<f64>,
    pub exact_budget: u64,
    /// Whole-pipeline restarts after a stage fails.
    pub pipeline_retries: u32,
    pub strategy: Regularization,
    /// Density slack in the partite degree conditions.
    pub partite_eps: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            shrink: 0.3,
            size_slack: 0.25,
            floor: 18,
            vortex_retries: 200,
            block_size: 12,
            matchings: 48,
            gamma: 0.15,
            nibble_c: 64.0,
            nibble_retries: 20,
            eta: None,
            exact_budget: DEFAULT_BUDGET,
            pipeline_retries: 5,
            strategy: Regularization::MatchingRemoval,
            partite_eps: 0.15,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::invalid(format!("engine config: {what}")));
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.size_slack) || !(0.0..1.0).contains(&self.gamma) {
            return bad("size_slack and gamma must lie in [0, 1)");
        }
        if self.floor < k || self.block_size == 0 || self.block_size % k != 0 {
            return bad("floor must be at least k and block_size a positive multiple of k");
        }
        if self.matchings == 0 || self.nibble_c <= 0.0 {
            return bad("matchings and nibble_c must be positive");
        }
        if let Some(eta) = self.eta {
            if !(0.0..1.0).contains(&eta) {
                return bad("eta must lie in [0, 1)");
            }
        }
        if self.floor > 60 {
            return bad("floor above 60 is beyond the exact final step");
        }
        Ok(())
    }
}

/// Nested vertex sets `V_0 ⊇ V_1 ⊇ … ⊇ V_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub levels: Vec<Vec<Vertex>>,
    pub shrink: f64,
    pub parts: Option<Parts>,
    /// Rejected draws across all levels.
    pub resamples: u32,
}

impl Vortex {
    /// `N`, the index of the final set.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// `V_i`, empty past the final set.
    pub fn level(&self, i: usize) -> &[Vertex] {
        self.levels.get(i).map_or(&[], Vec::as_slice)
    }

    pub fn final_set(&self) -> &[Vertex] {
        self.levels.last().expect("V_0 always present")
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    /// Strict nesting, the size band (exact sizes in partite mode) and equal
    /// part intersections.
    pub fn check(&self, size_slack: f64) -> Result<()> {
        for (i, w) in self.levels.windows(2).enumerate() {
            let outer: HashSet<Vertex> = w[0].iter().copied().collect();
            if w[1].len() >= w[0].len() || !w[1].iter().all(|v| outer.contains(v)) {
                return Err(Error::stage("vortex", format!("V_{} is not strictly inside V_{i}", i + 1)));
            }
            let ok = match self.parts {
                Some(p) => w[1].len() == p.r * partite_level_size(w[0].len(), self.shrink, p.r),
                None => {
                    let want = self.shrink * w[0].len() as f64;
                    (w[1].len() as f64 - want).abs() <= size_slack * want
                }
            };
            if !ok {
                return Err(Error::stage("vortex", format!("|V_{}| = {} outside its band", i + 1, w[1].len())));
            }
        }
        if let Some(p) = self.parts {
            if let Some(i) = self.levels.iter().position(|l| !p.balanced(l)) {
                return Err(Error::stage("vortex", format!("V_{i} meets the parts unequally")));
            }
        }
        Ok(())
    }
}

fn partite_level_size(total: usize, shrink: f64, r: usize) -> usize {
    (shrink * total as f64 / r as f64).ceil() as usize
}

/// Per-level trace of a cover-down step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverDownTrace {
    pub level: usize,
    pub v_size: usize,
    pub u_size: usize,
    pub regular_matchings: usize,
    pub regular_edges: usize,
    pub regular_attempts: usize,
    pub nibble_attempts: u32,
    pub nibble_covered: usize,
    pub leftovers: usize,
    /// Fewest edges available to any greedy choice.
    pub min_greedy_choices: Option<usize>,
    pub spill: usize,
    pub micros: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverDown {
    pub matching: Matching,
    pub trace: CoverDownTrace,
}

/// Regular subgraph of `H[W]`, relabelled to `0..|W|` in the order of `vertices`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularSubgraph {
    pub hypergraph: Hypergraph,
    pub vertices: Vec<Vertex>,
    pub matchings: usize,
    pub attempts: usize,
    pub max_degree: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NibbleConfig {
    pub c: f64,
    pub eta: f64,
    pub retries: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NibbleOutcome {
    pub matching: Matching,
    pub covered: usize,
    pub attempts: u32,
    pub sampled_edges: usize,
    pub pruned_edges: usize,
}

/// Subsampling rate `C / (γ n^{k-1})` with `γ = |E| / C(n, k)`, capped at 1.
pub fn nibble_rate<H: HyperHost + ?Sized>(host: &H, c: f64) -> f64 {
    let (n, k) = (host.n() as f64, host.k());
    let gamma = host.edge_count() as f64 / binom_f64(n, k as u32);
    if gamma <= 0.0 {
        return 0.0;
    }
    (c / (gamma * n.powi(k as i32 - 1))).min(1.0)
}

/// One nibble round: `L = H(p)`, prune edges at vertices of `L`-degree above
/// `C + C^{3/4}`, then a randomised greedy maximal matching of the rest.
///
/// The greedy step repeatedly takes a vertex of least positive remaining
/// degree (ties uniform) and a uniform live edge through it.
pub fn nibble_round<H: HyperHost + ?Sized, R: Rng + ?Sized>(
    host: &H,
    c: f64,
    rng: &mut R,
) -> (Matching, usize, usize) {
    let (n, k) = (host.n(), host.k());
    let p = nibble_rate(host, c);
    let ranks = crate::hypergraph::skip_sample_ranks(host.edge_count(), p, rng);
    let mut edges: Vec<Vec<Vertex>> = Vec::with_capacity(ranks.len());
    let mut buf = Vec::with_capacity(k);
    for r in ranks {
        host.edge_by_rank(r, &mut buf);
        edges.push(buf.clone());
    }
    let sampled = edges.len();
    let mut ldeg = vec![0u32; n];
    for e in &edges {
        for &v in e {
            ldeg[v as usize] += 1;
        }
    }
    let cap = c + c.powf(0.75);
    edges.retain(|e| e.iter().all(|&v| ldeg[v as usize] as f64 <= cap));
    let pruned = sampled - edges.len();
    let chosen = min_degree_greedy(n, &edges, rng);
    let m = Matching::new(chosen.into_iter().map(|i| edges[i].clone()).collect());
    (m, sampled, pruned)
}

fn min_degree_greedy<R: Rng + ?Sized>(n: usize, edges: &[Vec<Vertex>], rng: &mut R) -> Vec<usize> {
    let mut inc: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        for &v in e {
            inc[v as usize].push(i as u32);
        }
    }
    let mut alive = vec![true; edges.len()];
    let mut deg: Vec<usize> = inc.iter().map(Vec::len).collect();
    let mut chosen = Vec::new();
    let mut ties = Vec::new();
    let mut live = Vec::new();
    loop {
        let Some(min) = deg.iter().copied().filter(|&d| d > 0).min() else {
            return chosen;
        };
        ties.clear();
        ties.extend((0..n).filter(|&v| deg[v] == min));
        let v = *ties.choose(rng).expect("a vertex attains the minimum");
        live.clear();
        live.extend(inc[v].iter().copied().filter(|&i| alive[i as usize]));
        let e = *live.choose(rng).expect("positive degree") as usize;
        chosen.push(e);
        for &u in &edges[e] {
            for &f in &inc[u as usize] {
                if alive[f as usize] {
                    alive[f as usize] = false;
                    for &w in &edges[f as usize] {
                        deg[w as usize] -= 1;
                    }
                }
            }
        }
    }
}

/// Matching covering at least `(1 - η) n` vertices; round `t` draws from
/// `rng.child(t)`.
pub fn nibble_matching<H: HyperHost + ?Sized>(
    host: &H,
    cfg: &NibbleConfig,
    rng: &SeededRng,
) -> Result<NibbleOutcome> {
    if host.edge_count() == 0 {
        return Err(Error::precondition("nibble on an empty host"));
    }
    let need = ((1.0 - cfg.eta) * host.n() as f64).ceil() as usize;
    let mut best = 0;
    for t in 0..cfg.retries.max(1) {
        let (matching, sampled, pruned) = nibble_round(host, cfg.c, &mut rng.child(t as u64));
        let covered = matching.covered();
        if covered >= need {
            return Ok(NibbleOutcome {
                matching,
                covered,
                attempts: t + 1,
                sampled_edges: sampled,
                pruned_edges: pruned,
            });
        }
        best = best.max(covered);
    }
    Err(Error::RetriesExhausted {
        attempts: cfg.retries.max(1),
        reason: format!("nibble covered at most {best} of the {need} vertices required"),
    })
}

/// Host restricted to a vertex subset, relabelled to `0..|vertices|` in order.
pub fn induced_host<H: HyperHost + ?Sized>(host: &H, vertices: &[Vertex]) -> Result<Hypergraph> {
    let k = host.k();
    let mut edges = Vec::new();
    let local: Vec<Vertex> = (0..vertices.len() as Vertex).collect();
    let mut buf = Vec::with_capacity(k);
    for_each_combination(&local, k, |t| {
        buf.clear();
        buf.extend(t.iter().map(|&i| vertices[i as usize]));
        buf.sort_unstable();
        if host.has_edge(&buf) {
            edges.push(t.to_vec());
        }
    });
    Hypergraph::new(vertices.len(), k, edges)
}

/// Host plus layout: the shared iterative-absorption engine.
pub struct Engine<'a, H: HyperHost + ?Sized> {
    pub host: &'a H,
    pub cfg: EngineConfig,
    pub cond: Option<DegreeCondition>,
    pub parts: Option<Parts>,
    pub system: Option<&'a PartiteSystem>,
}

impl<'a, H: HyperHost + ?Sized> Engine<'a, H> {
    pub fn plain(host: &'a H, cfg: EngineConfig, cond: Option<DegreeCondition>) -> Result<Self> {
        cfg.validate(host.k())?;
        Ok(Self {
            host,
            cfg,
            cond,
            parts: None,
            system: None,
        })
    }

    fn k(&self) -> usize {
        self.host.k()
    }

    /// Vortex by iterated binomial (plain) or fixed-size per-part (partite)
    /// subsets, each level resampled until its size and degree checks pass.
    pub fn sample_vortex(&self, rng: &mut SeededRng) -> Result<Vortex> {
        let all: Vec<Vertex> = (0..self.host.n() as Vertex).collect();
        let mut levels = vec![all];
        let mut resamples = 0;
        loop {
            let cur = levels.last().expect("V_0");
            let want = self.cfg.shrink * cur.len() as f64;
            if want < self.cfg.floor as f64 {
                break;
            }
            let mut accepted = None;
            for _ in 0..self.cfg.vortex_retries {
                let next = match self.parts {
                    Some(p) => {
                        let per = partite_level_size(cur.len(), self.cfg.shrink, p.r);
                        let mut out = Vec::with_capacity(per * p.r);
                        for mut part in p.split(cur) {
                            part.shuffle(rng);
                            part.truncate(per);
                            out.extend(part);
                        }
                        out.sort_unstable();
                        out
                    }
                    None => cur.iter().copied().filter(|_| rng.gen::<f64>() < self.cfg.shrink).collect(),
                };
                if self.level_acceptable(cur, &next) {
                    accepted = Some(next);
                    break;
                }
                resamples += 1;
            }
            match accepted {
                Some(next) => levels.push(next),
                None => {
                    return Err(Error::RetriesExhausted {
                        attempts: self.cfg.vortex_retries,
                        reason: format!("vortex level {} never met its size and degree checks", levels.len()),
                    })
                }
            }
        }
        Ok(Vortex {
            levels,
            shrink: self.cfg.shrink,
            parts: self.parts,
            resamples,
        })
    }

    fn level_acceptable(&self, cur: &[Vertex], next: &[Vertex]) -> bool {
        if next.len() >= cur.len() || next.len() < self.k() {
            return false;
        }
        match (self.parts, self.system) {
            (Some(p), Some(sys)) => {
                // every vertex of V_i keeps (d - 2ε)|V_{i+1}|/r neighbours in each other part
                let next_parts = p.split(next);
                let per = next_parts[0].len() as f64;
                cur.iter().all(|&v| {
                    let (i, a) = (p.part_of(v), v as usize % p.size);
                    (0..p.r).filter(|&j| j != i).all(|j| {
                        let floor = (sys.declared_density(i, j) - 2.0 * self.cfg.partite_eps) * per;
                        let d = next_parts[j]
                            .iter()
                            .filter(|&&b| sys.adjacent(i, a as Vertex, j, (b as usize % p.size) as Vertex))
                            .count();
                        d as f64 >= floor
                    })
                })
            }
            _ => {
                let want = self.cfg.shrink * cur.len() as f64;
                if (next.len() as f64 - want).abs() > self.cfg.size_slack * want {
                    return false;
                }
                match &self.cond {
                    Some(c) => {
                        let all: Vec<Vertex> = (0..self.host.n() as Vertex).collect();
                        let floor = c.floor(0.5, next.len(), self.k());
                        ell_degree_violation(self.host, c.ell, &all, next, floor).is_none()
                    }
                    None => true,
                }
            }
        }
    }

    /// Union of near-perfect matchings of `H[W]` found blockwise; each
    /// accepted matching is removed from the host before the next.
    pub fn extract_regular_subgraph(&self, w: &[Vertex], rng: &mut SeededRng) -> Result<RegularSubgraph> {
        let k = self.k();
        let q = self.cfg.block_size;
        let target = self.cfg.matchings;
        let need = ((1.0 - self.cfg.gamma) * w.len() as f64).ceil() as usize;
        let mut removed: HashSet<u128> = HashSet::new();
        let mut union: Vec<Vec<Vertex>> = Vec::new();
        let mut accepted = 0;
        let mut attempts = 0;
        let cap = 2 * target + 10;
        let mut blocks: Vec<Vec<Vertex>> = Vec::new();
        while accepted < target && attempts < cap {
            attempts += 1;
            blocks.clear();
            match self.parts {
                Some(p) => {
                    let per = q / p.r;
                    let mut split = p.split(w);
                    for part in &mut split {
                        part.shuffle(rng);
                    }
                    let count = split[0].len() / per.max(1);
                    for b in 0..count {
                        let mut block: Vec<Vertex> =
                            split.iter().flat_map(|s| s[b * per..(b + 1) * per].iter().copied()).collect();
                        block.sort_unstable();
                        blocks.push(block);
                    }
                }
                None => {
                    let mut order = w.to_vec();
                    order.shuffle(rng);
                    for chunk in order.chunks_exact(q) {
                        let mut block = chunk.to_vec();
                        block.sort_unstable();
                        blocks.push(block);
                    }
                }
            }
            let mut found: Vec<Vec<Vertex>> = Vec::new();
            for block in &blocks {
                let sub = self.block_host(block, &removed)?;
                if let (Some(c), None) = (&self.cond, self.parts) {
                    let local: Vec<Vertex> = (0..block.len() as Vertex).collect();
                    let floor = c.floor(1.0 / 3.0, block.len() - c.ell, k);
                    if ell_degree_violation(&sub, c.ell, &local, &local, floor).is_some() {
                        continue;
                    }
                }
                match exact_hypergraph_pm_shuffled(&sub, self.cfg.exact_budget, rng) {
                    Ok(Some(m)) => {
                        found.extend(m.edges.into_iter().map(|e| {
                            let mut g: Vec<Vertex> = e.iter().map(|&i| block[i as usize]).collect();
                            g.sort_unstable();
                            g
                        }))
                    }
                    Ok(None) => {}
                    Err(e) if e.is_exhaustion() => {}
                    Err(e) => return Err(e),
                }
            }
            if found.len() * k >= need {
                for e in &found {
                    removed.insert(edge_key(e));
                }
                union.extend(found);
                accepted += 1;
            }
        }
        if accepted < target {
            return Err(Error::stage(
                "regularize",
                format!("only {accepted} of {target} near-perfect matchings in {attempts} attempts"),
            ));
        }
        let pos = local_positions(self.host.n(), w);
        let local: Vec<Vec<Vertex>> = union
            .iter()
            .map(|e| e.iter().map(|&v| pos[v as usize]).collect())
            .collect();
        let hypergraph = Hypergraph::new(w.len(), k, local)?;
        let max_degree = hypergraph.degrees().into_iter().max().unwrap_or(0);
        if max_degree > target || hypergraph.num_edges() * k < target * need {
            return Err(Error::stage("regularize", "degree cap or edge floor violated"));
        }
        Ok(RegularSubgraph {
            hypergraph,
            vertices: w.to_vec(),
            matchings: accepted,
            attempts,
            max_degree,
        })
    }

    fn block_host(&self, block: &[Vertex], removed: &HashSet<u128>) -> Result<Hypergraph> {
        let k = self.k();
        let local: Vec<Vertex> = (0..block.len() as Vertex).collect();
        let mut edges = Vec::new();
        let mut buf = Vec::with_capacity(k);
        for_each_combination(&local, k, |t| {
            buf.clear();
            buf.extend(t.iter().map(|&i| block[i as usize]));
            if self.host.has_edge(&buf) && !removed.contains(&edge_key(&buf)) {
                edges.push(t.to_vec());
            }
        });
        Hypergraph::new(block.len(), k, edges)
    }

    /// Clique set of `G[W]` drawn from a fractional clique matching.
    fn fractional_regular_subgraph(&self, w: &[Vertex], rng: &mut SeededRng) -> Result<RegularSubgraph> {
        let (Some(p), Some(sys)) = (self.parts, self.system) else {
            return Err(Error::precondition("fractional sampling needs a partite system"));
        };
        let split = p.split(w);
        let locals: Vec<Vec<Vertex>> = split
            .iter()
            .map(|s| s.iter().map(|&v| (v as usize % p.size) as Vertex).collect())
            .collect();
        let sub = sys.induced(&locals)?;
        let weights = fractional_clique_matching::<f64>(&sub, WeightingMode::Solver)?;
        let sample = sample_clique_regularization(&weights, rng);
        let m = sub.n();
        let pos = local_positions(self.host.n(), w);
        let edges: Vec<Vec<Vertex>> = sample
            .cliques
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&g| {
                        let (part, j) = (g as usize / m, g as usize % m);
                        pos[split[part][j] as usize]
                    })
                    .collect()
            })
            .collect();
        let hypergraph = Hypergraph::new(w.len(), self.k(), edges)?;
        let max_degree = hypergraph.degrees().into_iter().max().unwrap_or(0);
        Ok(RegularSubgraph {
            hypergraph,
            vertices: w.to_vec(),
            matchings: 0,
            attempts: 1,
            max_degree,
        })
    }

    fn check_u_degrees(&self, vertices: &[Vertex], u: &[Vertex]) -> Result<()> {
        match (self.parts, self.system) {
            (Some(p), Some(sys)) => {
                let u_parts = p.split(u);
                let per = u_parts[0].len() as f64;
                for &v in vertices {
                    let (i, a) = (p.part_of(v), (v as usize % p.size) as Vertex);
                    for j in (0..p.r).filter(|&j| j != i) {
                        let floor = (sys.declared_density(i, j) - self.cfg.partite_eps) * per;
                        let d = u_parts[j]
                            .iter()
                            .filter(|&&b| sys.adjacent(i, a, j, (b as usize % p.size) as Vertex))
                            .count();
                        if (d as f64) < floor {
                            return Err(Error::precondition(format!(
                                "vertex {v} has {d} neighbours in U ∩ A_{j}, below {floor:.1}"
                            )));
                        }
                    }
                }
                Ok(())
            }
            _ => match &self.cond {
                Some(c) => {
                    let floor = c.floor(1.0 / 3.0, u.len(), self.k());
                    match ell_degree_violation(self.host, c.ell, vertices, u, floor) {
                        Some(s) => Err(Error::precondition(format!(
                            "{s:?} has fewer than {floor:.1} edges into U"
                        ))),
                        None => Ok(()),
                    }
                }
                None => Ok(()),
            },
        }
    }

    /// Matching covering `vertices ∖ U` and at most `shrink · |U|` of `U`.
    ///
    /// Regularise `H[vertices ∖ U]`, nibble it, then give every leftover
    /// vertex a uniformly random edge with its other `k - 1` vertices in the
    /// still-free part of `U`. Streams: `child(0)` regularisation, `child(1)`
    /// nibble, `child(2)` greedy.
    pub fn cover_down(&self, vertices: &[Vertex], u: &[Vertex], rng: &SeededRng) -> Result<CoverDown> {
        let start = Instant::now();
        let k = self.k();
        let n = self.host.n();
        let mut in_u = vec![false; n];
        for &x in u {
            in_u[x as usize] = true;
        }
        let w: Vec<Vertex> = vertices.iter().copied().filter(|&v| !in_u[v as usize]).collect();
        let mut trace = CoverDownTrace {
            v_size: vertices.len(),
            u_size: u.len(),
            ..Default::default()
        };
        if !u.is_empty() {
            self.check_u_degrees(vertices, u)?;
        }
        let mut matching = Matching::default();
        if !w.is_empty() {
            let reg = match self.cfg.strategy {
                Regularization::MatchingRemoval => self.extract_regular_subgraph(&w, &mut rng.child(0))?,
                Regularization::FractionalSampling => self.fractional_regular_subgraph(&w, &mut rng.child(0))?,
            };
            trace.regular_matchings = reg.matchings;
            trace.regular_edges = reg.hypergraph.num_edges();
            trace.regular_attempts = reg.attempts;
            let eta = self.cfg.eta.unwrap_or_else(|| {
                (self.cfg.shrink * u.len() as f64 / ((k - 1) as f64 * w.len() as f64)).min(0.99)
            });
            let nib = nibble_matching(
                &reg.hypergraph,
                &NibbleConfig {
                    c: self.cfg.nibble_c,
                    eta,
                    retries: self.cfg.nibble_retries,
                },
                &rng.child(1),
            )?;
            trace.nibble_attempts = nib.attempts;
            trace.nibble_covered = nib.covered;
            matching = Matching::new(
                nib.matching
                    .edges
                    .iter()
                    .map(|e| e.iter().map(|&i| w[i as usize]).collect())
                    .collect(),
            );
        }
        let mut used = vec![false; n];
        for e in &matching.edges {
            for &v in e {
                used[v as usize] = true;
            }
        }
        let leftovers: Vec<Vertex> = w.iter().copied().filter(|&v| !used[v as usize]).collect();
        trace.leftovers = leftovers.len();
        if u.is_empty() && !leftovers.is_empty() {
            return Err(Error::precondition(format!(
                "U is empty but {} vertices stay uncovered",
                leftovers.len()
            )));
        }
        let mut grng = rng.child(2);
        let mut cands: Vec<Vec<Vertex>> = Vec::new();
        let mut buf = Vec::with_capacity(k);
        for &v in &leftovers {
            let free: Vec<Vertex> = u.iter().copied().filter(|&x| !used[x as usize]).collect();
            cands.clear();
            for_each_combination(&free, k - 1, |t| {
                buf.clear();
                buf.push(v);
                buf.extend_from_slice(t);
                buf.sort_unstable();
                if self.host.has_edge(&buf) {
                    cands.push(buf.clone());
                }
            });
            trace.min_greedy_choices = Some(trace.min_greedy_choices.map_or(cands.len(), |m| m.min(cands.len())));
            let Some(e) = cands.choose(&mut grng).cloned() else {
                return Err(Error::stage(
                    "cover-down greedy",
                    format!(
                        "no free edge through vertex {v} with {} vertices in U ({} of {} U-vertices free, {} leftovers)",
                        k - 1,
                        free.len(),
                        u.len(),
                        leftovers.len()
                    ),
                ));
            };
            for &x in &e {
                used[x as usize] = true;
            }
            matching.edges.push(e);
        }
        trace.spill = u.iter().filter(|&&x| used[x as usize]).count();
        // C1: everything outside U is covered; C2: spill into U is small
        if let Some(v) = w.iter().find(|&&v| !used[v as usize]) {
            return Err(Error::stage("cover-down", format!("vertex {v} outside U left uncovered")));
        }
        if trace.spill as f64 > self.cfg.shrink * u.len() as f64 {
            return Err(Error::stage(
                "cover-down",
                format!("spill {} exceeds {:.1}", trace.spill, self.cfg.shrink * u.len() as f64),
            ));
        }
        for e in &matching.edges {
            let outside = e.iter().filter(|&&x| !in_u[x as usize]).count();
            if outside != k && outside != 1 {
                return Err(Error::stage("cover-down", format!("edge {e:?} meets U in {} vertices", k - outside)));
            }
        }
        trace.micros = start.elapsed().as_micros() as u64;
        Ok(CoverDown { matching, trace })
    }

    /// Level `i` of the pipeline: cover `V_i' ∖ V_{i+1}` where
    /// `V_i' = V_i ∖ (V(M_i) ∪ V_{i+2})`, with `U = V_i' ∩ V_{i+1}`.
    pub fn run_level(&self, vortex: &Vortex, prefix: &Matching, level: usize, rng: &SeededRng) -> Result<CoverDown> {
        let n = self.host.n();
        let mut blocked = vec![false; n];
        for e in &prefix.edges {
            for &v in e {
                blocked[v as usize] = true;
            }
        }
        for &v in vortex.level(level + 2) {
            blocked[v as usize] = true;
        }
        let vi: Vec<Vertex> = vortex.level(level).iter().copied().filter(|&v| !blocked[v as usize]).collect();
        let mut next = vec![false; n];
        for &v in vortex.level(level + 1) {
            next[v as usize] = true;
        }
        let u: Vec<Vertex> = vi.iter().copied().filter(|&v| next[v as usize]).collect();
        let mut out = self.cover_down(&vi, &u, rng)?;
        out.trace.level = level;
        Ok(out)
    }

    /// One full pass: vortex, cover-down per level, exact final step.
    fn attempt(&self, rng: &SeededRng, trace: &mut PipelineTrace) -> Result<Matching> {
        let n = self.host.n();
        let vortex = self.sample_vortex(&mut rng.child(0))?;
        vortex.check(self.cfg.size_slack)?;
        trace.vortex_sizes = vortex.sizes();
        trace.vortex_resamples = vortex.resamples;
        trace.levels.clear();
        let mut m = Matching::default();
        for i in 0..vortex.depth() {
            let step = self
                .run_level(&vortex, &m, i, &rng.child(1 + i as u64))
                .map_err(|e| Error::stage(format!("level {i}"), e.to_string()))?;
            trace.levels.push(step.trace);
            m.extend(step.matching);
            // the proof's invariants for M_{i+1}
            let cov = m.coverage(n)?;
            let vi1 = vortex.level(i + 1);
            let mut inside = vec![false; n];
            for &v in vi1 {
                inside[v as usize] = true;
            }
            if (0..n).any(|v| !inside[v] && !cov[v]) {
                return Err(Error::stage(format!("level {i}"), "M misses a vertex outside V_{i+1}"));
            }
            let spill = vi1.iter().filter(|&&v| cov[v as usize]).count();
            if spill as f64 > 2.0 * self.cfg.shrink * vi1.len() as f64 {
                return Err(Error::stage(format!("level {i}"), format!("spill {spill} into V_{}", i + 1)));
            }
            if vortex.level(i + 2).iter().any(|&v| cov[v as usize]) {
                return Err(Error::stage(format!("level {i}"), "M meets V_{i+2}"));
            }
        }
        let cov = m.coverage(n)?;
        let rest: Vec<Vertex> = (0..n as Vertex).filter(|&v| !cov[v as usize]).collect();
        trace.final_size = rest.len();
        let sub = induced_host(self.host, &rest)?;
        let last = exact_hypergraph_pm_shuffled(&sub, self.cfg.exact_budget, &mut rng.child(1000))
            .map_err(|e| Error::stage("final", e.to_string()))?
            .ok_or_else(|| Error::stage("final", format!("no perfect matching on the {} remaining vertices", rest.len())))?;
        m.extend(Matching::new(
            last.edges
                .iter()
                .map(|e| e.iter().map(|&i| rest[i as usize]).collect())
                .collect(),
        ));
        Ok(m.canonical())
    }

    /// Perfect matching, restarting the pipeline (attempt `a` on
    /// `rng.child(a)`) when a stage fails.
    pub fn sample(&self, rng: &SeededRng) -> Result<PipelineSample> {
        if self.host.n() % self.k() != 0 {
            return Err(Error::precondition(format!("{} does not divide n = {}", self.k(), self.host.n())));
        }
        let mut trace = PipelineTrace::default();
        let tries = self.cfg.pipeline_retries.max(1);
        for a in 0..tries {
            trace.attempts = a + 1;
            match self.attempt(&rng.child(a as u64), &mut trace) {
                Ok(matching) => return Ok(PipelineSample { matching, trace }),
                Err(e) => trace.failures.push(e.to_string()),
            }
        }
        Err(Error::RetriesExhausted {
            attempts: tries,
            reason: trace.failures.last().cloned().unwrap_or_default(),
        })
    }
}

fn local_positions(n: usize, w: &[Vertex]) -> Vec<Vertex> {
    let mut pos = vec![Vertex::MAX; n];
    for (i, &v) in w.iter().enumerate() {
        pos[v as usize] = i as Vertex;
    }
    pos
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub attempts: u32,
    pub vortex_sizes: Vec<usize>,
    pub vortex_resamples: u32,
    pub levels: Vec<CoverDownTrace>,
    pub final_size: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSample {
    pub matching: Matching,
    pub trace: PipelineTrace,
}

/// A host whose degree condition has been verified once, for repeated draws.
pub struct DiracInstance<'a, H: HyperHost + ?Sized> {
    engine: Engine<'a, H>,
    pub min_degree: usize,
}

impl<'a, H: HyperHost + ?Sized> DiracInstance<'a, H> {
    /// Checks `k | n` and `δ_ℓ(H) ≥ (threshold + margin) C(n - ℓ, k - ℓ)`.
    pub fn new(host: &'a H, cond: DegreeCondition, cfg: EngineConfig) -> Result<Self> {
        let (n, k) = (host.n(), host.k());
        if cond.ell >= k {
            return Err(Error::invalid(format!("ℓ = {} must be below k = {k}", cond.ell)));
        }
        if n % k != 0 {
            return Err(Error::precondition(format!("{k} does not divide n = {n}")));
        }
        let (min_degree, witness) = host_min_ell_degree(host, cond.ell);
        let need = cond.floor(1.0, n - cond.ell, k);
        if (min_degree as f64) < need {
            return Err(Error::precondition(format!(
                "δ_{} = {min_degree} at {witness:?} is below {need:.1}",
                cond.ell
            )));
        }
        Ok(Self {
            engine: Engine::plain(host, cfg, Some(cond))?,
            min_degree,
        })
    }

    pub fn engine(&self) -> &Engine<'a, H> {
        &self.engine
    }

    pub fn sample(&self, rng: &SeededRng) -> Result<PipelineSample> {
        self.engine.sample(rng)
    }
}

/// Spread perfect matching of a Dirac host (degree condition checked first).
pub fn sample_spread_pm_dirac<H: HyperHost + ?Sized>(
    host: &H,
    cond: DegreeCondition,
    cfg: &EngineConfig,
    rng: &SeededRng,
) -> Result<PipelineSample> {
    DiracInstance::new(host, cond, cfg.clone())?.sample(rng)
}

/// The engine in partite mode over the triangle/clique complex of a system.
pub struct PartiteInstance<'a> {
    pub system: &'a PartiteSystem,
    pub host: Hypergraph,
    pub cfg: EngineConfig,
}

impl<'a> PartiteInstance<'a> {
    pub fn new(system: &'a PartiteSystem, cfg: EngineConfig) -> Result<Self> {
        cfg.validate(system.r())?;
        if cfg.block_size % system.r() != 0 {
            return Err(Error::invalid("block size must be a multiple of r"));
        }
        let host = clique_complex(&system.to_graph(), system.r())?;
        Ok(Self { system, host, cfg })
    }

    pub fn engine(&self) -> Engine<'_, Hypergraph> {
        Engine {
            host: &self.host,
            cfg: self.cfg.clone(),
            cond: None,
            parts: Some(Parts {
                r: self.system.r(),
                size: self.system.n(),
            }),
            system: Some(self.system),
        }
    }

    /// `K_r`-factor as cliques of global vertex ids.
    pub fn sample(&self, rng: &SeededRng) -> Result<(Factor, PipelineTrace)> {
        let s = self.engine().sample(rng)?;
        Ok((Factor::new(s.matching.edges).canonical(), s.trace))
    }
}
