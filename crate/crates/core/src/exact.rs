//! Exact (exponential-time) oracles: degrees, perfect matchings, clique factors.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::combinatorics::{binom, for_each_combination};
use crate::error::{Error, Result};
use crate::hypergraph::{edge_key, Graph, Hypergraph, Vertex};
use crate::matching::{Factor, Matching};

/// Default node-expansion budget for exact searches.
pub const DEFAULT_BUDGET: u64 = 5_000_000;

/// `δ_ℓ(H)` together with a lexicographically first minimising `ℓ`-set.
pub fn min_ell_degree(h: &Hypergraph, ell: usize) -> Result<(usize, Vec<Vertex>)> {
    if ell == 0 || ell >= h.k() {
        return Err(Error::invalid(format!(
            "ℓ = {ell} outside 1..{} for k = {}",
            h.k(),
            h.k()
        )));
    }
    if h.n() < h.k() {
        return Err(Error::precondition(format!(
            "n = {} smaller than k = {}",
            h.n(),
            h.k()
        )));
    }
    if ell == 1 {
        let d = h.degrees();
        let (v, &m) = d
            .iter()
            .enumerate()
            .min_by_key(|&(i, &x)| (x, i))
            .expect("n >= k >= 2");
        return Ok((m, vec![v as Vertex]));
    }
    let mut counts: HashMap<u128, usize> = HashMap::new();
    for e in h.edges() {
        for_each_combination(e, ell, |s| *counts.entry(edge_key(s)).or_default() += 1);
    }
    let all: Vec<Vertex> = (0..h.n() as Vertex).collect();
    let mut best: Option<(usize, Vec<Vertex>)> = None;
    let untouched_exists = (counts.len() as u128) < binom(h.n() as u64, ell as u64);
    for_each_combination(&all, ell, |s| {
        if best.as_ref().is_some_and(|b| b.0 == 0) {
            return;
        }
        let d = counts.get(&edge_key(s)).copied().unwrap_or(0);
        if untouched_exists && d != 0 {
            return;
        }
        if best.as_ref().is_none_or(|b| d < b.0) {
            best = Some((d, s.to_vec()));
        }
    });
    Ok(best.expect("at least one ℓ-set"))
}

/// `H(p)`: each edge kept independently with probability `p`.
///
/// One uniform is drawn per edge in canonical edge order and the edge is kept
/// iff it falls below `p`, so two calls with the same stream and `p ≤ p'`
/// return nested edge sets.
pub fn binomial_subgraph<R: Rng + ?Sized>(h: &Hypergraph, p: f64, rng: &mut R) -> Hypergraph {
    h.filter_edges(|_, _| rng.gen::<f64>() < p)
}

/// Graph analogue of [`binomial_subgraph`], edges in lexicographic order.
pub fn binomial_subgraph_graph<R: Rng + ?Sized>(g: &Graph, p: f64, rng: &mut R) -> Graph {
    let mut out = Graph::new(g.n());
    for (u, v) in g.edges() {
        if rng.gen::<f64>() < p {
            out.add_edge(u, v);
        }
    }
    out
}

/// Backtracking exact cover of the vertex set by hyperedges.
///
/// Pivots on the uncovered vertex with the fewest live edges (ties: lowest id,
/// or random when shuffling), with incremental live-edge counts so dead ends
/// are detected as soon as some vertex loses its last edge.
struct ExactCover<'a, R: Rng + ?Sized> {
    h: &'a Hypergraph,
    inc: Vec<Vec<u32>>,
    alive: Vec<bool>,
    live: Vec<u32>,
    covered: Vec<bool>,
    trail: Vec<u32>,
    chosen: Vec<u32>,
    nodes: u64,
    budget: u64,
    rng: Option<&'a mut R>,
}

enum Flow {
    Stop,
    Continue,
}

impl<'a, R: Rng + ?Sized> ExactCover<'a, R> {
    fn new(h: &'a Hypergraph, budget: u64, rng: Option<&'a mut R>) -> Self {
        let inc = h.incidence();
        let live = inc.iter().map(|l| l.len() as u32).collect();
        Self {
            h,
            inc,
            alive: vec![true; h.num_edges()],
            live,
            covered: vec![false; h.n()],
            trail: Vec::new(),
            chosen: Vec::new(),
            nodes: 0,
            budget,
            rng,
        }
    }

    fn take(&mut self, e: u32) {
        let k = self.h.k();
        for i in 0..k {
            let u = self.h.edge(e as usize)[i];
            self.covered[u as usize] = true;
            for j in 0..self.inc[u as usize].len() {
                let f = self.inc[u as usize][j];
                if self.alive[f as usize] {
                    self.alive[f as usize] = false;
                    self.trail.push(f);
                    for &w in self.h.edge(f as usize) {
                        self.live[w as usize] -= 1;
                    }
                }
            }
        }
        self.chosen.push(e);
    }

    fn untake(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let f = self.trail.pop().expect("trail above mark");
            self.alive[f as usize] = true;
            for &w in self.h.edge(f as usize) {
                self.live[w as usize] += 1;
            }
        }
        let e = self.chosen.pop().expect("an edge was taken");
        for &u in self.h.edge(e as usize) {
            self.covered[u as usize] = false;
        }
    }

    fn pivot(&mut self) -> Option<Vertex> {
        let mut best: Option<(u32, Vertex)> = None;
        let mut ties = 0u32;
        for v in 0..self.h.n() {
            if self.covered[v] {
                continue;
            }
            let c = self.live[v];
            match best {
                Some((b, _)) if c > b => {}
                Some((b, _)) if c == b => {
                    ties += 1;
                    if let Some(rng) = self.rng.as_deref_mut() {
                        if rng.gen_range(0..ties + 1) == 0 {
                            best = Some((c, v as Vertex));
                        }
                    }
                }
                _ => {
                    best = Some((c, v as Vertex));
                    ties = 0;
                }
            }
        }
        best.map(|(_, v)| v)
    }

    /// Visits every perfect matching; `visit` returns whether to stop.
    fn search<F: FnMut(&[u32]) -> Flow>(&mut self, visit: &mut F) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExhausted {
                budget: self.budget,
            });
        }
        let Some(v) = self.pivot() else {
            return Ok(matches!(visit(&self.chosen), Flow::Stop));
        };
        if self.live[v as usize] == 0 {
            return Ok(false);
        }
        let mut cands: Vec<u32> = self.inc[v as usize]
            .iter()
            .copied()
            .filter(|&f| self.alive[f as usize])
            .collect();
        if let Some(rng) = self.rng.as_deref_mut() {
            cands.shuffle(rng);
        }
        for e in cands {
            let mark = self.trail.len();
            self.take(e);
            let stop = self.search(visit)?;
            self.untake(mark);
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

fn matching_from(h: &Hypergraph, ids: &[u32]) -> Matching {
    Matching::new(ids.iter().map(|&i| h.edge(i as usize).to_vec()).collect()).canonical()
}

fn check_divisible(n: usize, k: usize) -> Result<()> {
    if n % k != 0 {
        return Err(Error::precondition(format!("{k} does not divide n = {n}")));
    }
    Ok(())
}

/// A perfect matching if one exists. `Ok(None)` only after exhausting the
/// search tree; running out of `budget` node expansions is an error.
pub fn exact_hypergraph_pm(h: &Hypergraph, budget: u64) -> Result<Option<Matching>> {
    exact_pm_inner::<rand::rngs::ThreadRng>(h, budget, None)
}

/// As [`exact_hypergraph_pm`], with pivot ties and branch order randomised,
/// so the returned matching depends on the stream rather than on vertex ids.
pub fn exact_hypergraph_pm_shuffled<R: Rng + ?Sized>(
    h: &Hypergraph,
    budget: u64,
    rng: &mut R,
) -> Result<Option<Matching>> {
    exact_pm_inner(h, budget, Some(rng))
}

fn exact_pm_inner<R: Rng + ?Sized>(
    h: &Hypergraph,
    budget: u64,
    rng: Option<&mut R>,
) -> Result<Option<Matching>> {
    check_divisible(h.n(), h.k())?;
    let mut found = None;
    let mut search = ExactCover::new(h, budget, rng);
    search.search(&mut |ids| {
        found = Some(matching_from(h, ids));
        Flow::Stop
    })?;
    Ok(found)
}

/// Number of perfect matchings of `h`.
pub fn count_perfect_matchings(h: &Hypergraph, budget: u64) -> Result<u128> {
    check_divisible(h.n(), h.k())?;
    let mut count = 0u128;
    let mut search = ExactCover::<rand::rngs::ThreadRng>::new(h, budget, None);
    search.search(&mut |_| {
        count += 1;
        Flow::Continue
    })?;
    Ok(count)
}

/// The `r`-clique complex: an `r`-uniform hypergraph whose edges are the
/// vertex sets of `r`-cliques of `g`.
pub fn clique_complex(g: &Graph, r: usize) -> Result<Hypergraph> {
    if r < 2 {
        return Err(Error::invalid(format!("clique size {r} < 2")));
    }
    let n = g.n();
    let mut flat = Vec::new();
    let mut stack = Vec::with_capacity(r);
    fn extend(
        g: &Graph,
        r: usize,
        cand: &FixedBitSet,
        stack: &mut Vec<Vertex>,
        flat: &mut Vec<Vertex>,
    ) {
        if stack.len() == r {
            flat.extend_from_slice(stack);
            return;
        }
        for u in cand.ones() {
            let mut next = cand.clone();
            next.intersect_with(g.adjacency(u as Vertex));
            next.set_range(..u + 1, false);
            if next.count_ones(..) + stack.len() + 1 < r {
                continue;
            }
            stack.push(u as Vertex);
            extend(g, r, &next, stack, flat);
            stack.pop();
        }
    }
    let mut all = FixedBitSet::with_capacity(n);
    all.insert_range(..);
    extend(g, r, &all, &mut stack, &mut flat);
    Hypergraph::empty(n, r)?;
    Ok(Hypergraph::from_sorted_flat(n, r, flat))
}

/// A perfect `K_r`-factor of `g` if one exists (same outcome contract as
/// [`exact_hypergraph_pm`]).
pub fn exact_kr_factor(g: &Graph, r: usize, budget: u64) -> Result<Option<Factor>> {
    check_divisible(g.n(), r)?;
    let cx = clique_complex(g, r)?;
    Ok(exact_hypergraph_pm(&cx, budget)?.map(|m| Factor::new(m.edges)))
}

/// Randomised-order variant of [`exact_kr_factor`].
pub fn exact_kr_factor_shuffled<R: Rng + ?Sized>(
    g: &Graph,
    r: usize,
    budget: u64,
    rng: &mut R,
) -> Result<Option<Factor>> {
    check_divisible(g.n(), r)?;
    let cx = clique_complex(g, r)?;
    Ok(exact_hypergraph_pm_shuffled(&cx, budget, rng)?.map(|m| Factor::new(m.edges)))
}

/// Exact number of perfect `K_r`-factors of `g`.
pub fn count_kr_factors(g: &Graph, r: usize, budget: u64) -> Result<u128> {
    check_divisible(g.n(), r)?;
    count_perfect_matchings(&clique_complex(g, r)?, budget)
}
