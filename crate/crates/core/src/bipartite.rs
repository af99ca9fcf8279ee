//! Bipartite graphs, Hopcroft–Karp matching, König covers and Hall witnesses.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Vertex;

const NIL: u32 = u32::MAX;

/// Bipartite graph with sides `A = [0, na)` and `B = [0, nb)` numbered separately.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    na: usize,
    nb: usize,
    adj_a: Vec<Vec<Vertex>>,
    adj_b: Vec<Vec<Vertex>>,
}

impl BipartiteGraph {
    pub fn new(na: usize, nb: usize) -> Self {
        Self {
            na,
            nb,
            adj_a: vec![Vec::new(); na],
            adj_b: vec![Vec::new(); nb],
        }
    }

    /// Builds from `(a, b)` pairs; duplicates collapse, lists end up sorted.
    pub fn from_edges(na: usize, nb: usize, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let mut g = Self::new(na, nb);
        for &(a, b) in edges {
            if a as usize >= na || b as usize >= nb {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) outside {na} x {nb}"
                )));
            }
            g.adj_a[a as usize].push(b);
            g.adj_b[b as usize].push(a);
        }
        g.normalise();
        Ok(g)
    }

    pub fn complete(na: usize, nb: usize) -> Self {
        Self {
            na,
            nb,
            adj_a: vec![(0..nb as Vertex).collect(); na],
            adj_b: vec![(0..na as Vertex).collect(); nb],
        }
    }

    /// Each of the `na * nb` pairs independently with probability `p`.
    pub fn random<R: Rng + ?Sized>(na: usize, nb: usize, p: f64, rng: &mut R) -> Self {
        let mut g = Self::new(na, nb);
        for a in 0..na {
            for b in 0..nb {
                if rng.gen::<f64>() < p {
                    g.adj_a[a].push(b as Vertex);
                    g.adj_b[b].push(a as Vertex);
                }
            }
        }
        g
    }

    /// Builds from per-`A` adjacency lists.
    pub fn from_adjacency(nb: usize, adj_a: Vec<Vec<Vertex>>) -> Result<Self> {
        let na = adj_a.len();
        let mut edges = Vec::new();
        for (a, list) in adj_a.iter().enumerate() {
            edges.extend(list.iter().map(|&b| (a as Vertex, b)));
        }
        Self::from_edges(na, nb, &edges)
    }

    fn normalise(&mut self) {
        for l in self.adj_a.iter_mut().chain(self.adj_b.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn num_edges(&self) -> usize {
        self.adj_a.iter().map(Vec::len).sum()
    }

    pub fn neighbors_a(&self, a: Vertex) -> &[Vertex] {
        &self.adj_a[a as usize]
    }

    pub fn neighbors_b(&self, b: Vertex) -> &[Vertex] {
        &self.adj_b[b as usize]
    }

    pub fn has_edge(&self, a: Vertex, b: Vertex) -> bool {
        self.adj_a[a as usize].binary_search(&b).is_ok()
    }

    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for (a, l) in self.adj_a.iter().enumerate() {
            out.extend(l.iter().map(|&b| (a as Vertex, b)));
        }
        out
    }

    /// The bipartite complement inside `K_{A,B}`.
    pub fn complement(&self) -> BipartiteGraph {
        let adj_a = self
            .adj_a
            .iter()
            .map(|l| {
                (0..self.nb as Vertex)
                    .filter(|b| l.binary_search(b).is_err())
                    .collect()
            })
            .collect();
        Self::from_adjacency(self.nb, adj_a).expect("complement stays in range")
    }

    /// Same graph with the sides exchanged.
    pub fn transpose(&self) -> BipartiteGraph {
        BipartiteGraph {
            na: self.nb,
            nb: self.na,
            adj_a: self.adj_b.clone(),
            adj_b: self.adj_a.clone(),
        }
    }

    /// Subgraph induced on `xa ⊆ A`, `xb ⊆ B`, relabelled in the given orders.
    pub fn induced(&self, xa: &[Vertex], xb: &[Vertex]) -> BipartiteGraph {
        let mut pos_b = vec![NIL; self.nb];
        for (i, &b) in xb.iter().enumerate() {
            pos_b[b as usize] = i as u32;
        }
        let adj_a = xa
            .iter()
            .map(|&a| {
                self.adj_a[a as usize]
                    .iter()
                    .filter_map(|&b| (pos_b[b as usize] != NIL).then_some(pos_b[b as usize]))
                    .collect()
            })
            .collect();
        Self::from_adjacency(xb.len(), adj_a).expect("relabelled vertices stay in range")
    }
}

/// A matching in a [`BipartiteGraph`], with mate arrays for both sides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteMatching {
    mate_a: Vec<u32>,
    mate_b: Vec<u32>,
}

impl BipartiteMatching {
    pub fn size(&self) -> usize {
        self.mate_a.iter().filter(|&&m| m != NIL).count()
    }

    pub fn mate_of_a(&self, a: Vertex) -> Option<Vertex> {
        let m = self.mate_a[a as usize];
        (m != NIL).then_some(m)
    }

    pub fn mate_of_b(&self, b: Vertex) -> Option<Vertex> {
        let m = self.mate_b[b as usize];
        (m != NIL).then_some(m)
    }

    /// Matched pairs `(a, b)` ordered by `a`.
    pub fn pairs(&self) -> Vec<(Vertex, Vertex)> {
        self.mate_a
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != NIL)
            .map(|(a, &b)| (a as Vertex, b))
            .collect()
    }

    pub fn is_perfect(&self) -> bool {
        self.mate_a.len() == self.mate_b.len() && self.size() == self.mate_a.len()
    }

    /// Checks that the pairs are edges of `g` and the mate arrays agree.
    pub fn is_valid_in(&self, g: &BipartiteGraph) -> bool {
        self.mate_a.len() == g.na()
            && self.mate_b.len() == g.nb()
            && self.pairs().iter().all(|&(a, b)| {
                g.has_edge(a, b) && self.mate_b[b as usize] == a
            })
            && self.mate_b.iter().filter(|&&m| m != NIL).count() == self.size()
    }
}

struct HopcroftKarp<'a> {
    g: &'a BipartiteGraph,
    order: &'a [Vertex],
    mate_a: Vec<u32>,
    mate_b: Vec<u32>,
    dist: Vec<u32>,
}

impl HopcroftKarp<'_> {
    fn bfs(&mut self) -> bool {
        let mut queue = VecDeque::new();
        for &a in self.order {
            if self.mate_a[a as usize] == NIL {
                self.dist[a as usize] = 0;
                queue.push_back(a);
            } else {
                self.dist[a as usize] = NIL;
            }
        }
        let mut found = false;
        while let Some(a) = queue.pop_front() {
            for &b in &self.g.adj_a[a as usize] {
                let m = self.mate_b[b as usize];
                if m == NIL {
                    found = true;
                } else if self.dist[m as usize] == NIL {
                    self.dist[m as usize] = self.dist[a as usize] + 1;
                    queue.push_back(m);
                }
            }
        }
        found
    }

    fn dfs(&mut self, a: Vertex, adj: &[Vec<Vertex>]) -> bool {
        for &b in &adj[a as usize] {
            let m = self.mate_b[b as usize];
            let ok = m == NIL
                || (self.dist[m as usize] == self.dist[a as usize] + 1 && self.dfs(m, adj));
            if ok {
                self.mate_a[a as usize] = b;
                self.mate_b[b as usize] = a;
                return true;
            }
        }
        self.dist[a as usize] = NIL;
        false
    }
}

fn hopcroft_karp(g: &BipartiteGraph, order: &[Vertex], adj: &[Vec<Vertex>]) -> BipartiteMatching {
    let mut hk = HopcroftKarp {
        g,
        order,
        mate_a: vec![NIL; g.na],
        mate_b: vec![NIL; g.nb],
        dist: vec![NIL; g.na],
    };
    while hk.bfs() {
        for &a in order {
            if hk.mate_a[a as usize] == NIL {
                hk.dfs(a, adj);
            }
        }
    }
    BipartiteMatching {
        mate_a: hk.mate_a,
        mate_b: hk.mate_b,
    }
}

/// Maximum-cardinality matching by Hopcroft–Karp, scanning vertices and
/// neighbours in ascending id order, so the result is a function of `g`.
pub fn max_bipartite_matching(g: &BipartiteGraph) -> BipartiteMatching {
    let order: Vec<Vertex> = (0..g.na as Vertex).collect();
    hopcroft_karp(g, &order, &g.adj_a)
}

/// Maximum matching with augmentations explored in a random order.
pub fn max_bipartite_matching_shuffled<R: Rng + ?Sized>(
    g: &BipartiteGraph,
    rng: &mut R,
) -> BipartiteMatching {
    let mut order: Vec<Vertex> = (0..g.na as Vertex).collect();
    order.shuffle(rng);
    let mut adj = g.adj_a.clone();
    for l in &mut adj {
        l.shuffle(rng);
    }
    hopcroft_karp(g, &order, &adj)
}

/// Vertices reachable from unmatched `A` vertices along alternating paths.
fn alternating_reach(g: &BipartiteGraph, m: &BipartiteMatching) -> (Vec<bool>, Vec<bool>) {
    let mut za = vec![false; g.na];
    let mut zb = vec![false; g.nb];
    let mut stack: Vec<Vertex> = (0..g.na as Vertex)
        .filter(|&a| m.mate_a[a as usize] == NIL)
        .collect();
    for &a in &stack {
        za[a as usize] = true;
    }
    while let Some(a) = stack.pop() {
        for &b in &g.adj_a[a as usize] {
            if !zb[b as usize] {
                zb[b as usize] = true;
                let a2 = m.mate_b[b as usize];
                if a2 != NIL && !za[a2 as usize] {
                    za[a2 as usize] = true;
                    stack.push(a2);
                }
            }
        }
    }
    (za, zb)
}

/// Minimum vertex cover `(cover ∩ A, cover ∩ B)` from a maximum matching (König).
pub fn konig_cover(g: &BipartiteGraph, m: &BipartiteMatching) -> (Vec<Vertex>, Vec<Vertex>) {
    let (za, zb) = alternating_reach(g, m);
    let ca = (0..g.na as Vertex).filter(|&a| !za[a as usize]).collect();
    let cb = (0..g.nb as Vertex).filter(|&b| zb[b as usize]).collect();
    (ca, cb)
}

/// A set violating Hall's condition, with its (too small) neighbourhood.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallViolation {
    pub set: Vec<Vertex>,
    pub neighbourhood: Vec<Vertex>,
}

/// `None` iff the balanced graph has a perfect matching; otherwise a set
/// `S ⊆ A` with `|N(S)| < |S|`, read off the alternating-reachability cut of
/// a maximum matching.
pub fn hall_violation(g: &BipartiteGraph) -> Result<Option<HallViolation>> {
    if g.na != g.nb {
        return Err(Error::precondition(format!(
            "unbalanced parts {} and {}",
            g.na, g.nb
        )));
    }
    let m = max_bipartite_matching(g);
    if m.is_perfect() {
        return Ok(None);
    }
    let (za, zb) = alternating_reach(g, &m);
    Ok(Some(HallViolation {
        set: (0..g.na as Vertex).filter(|&a| za[a as usize]).collect(),
        neighbourhood: (0..g.nb as Vertex).filter(|&b| zb[b as usize]).collect(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn four_cycle_and_star() {
        let c4 = BipartiteGraph::complete(2, 2);
        assert_eq!(max_bipartite_matching(&c4).size(), 2);
        let star = BipartiteGraph::from_edges(1, 3, &[(0, 0), (0, 1), (0, 2)]).unwrap();
        assert_eq!(max_bipartite_matching(&star).size(), 1);
    }

    #[test]
    fn konig_cover_is_a_cover_of_matching_size() {
        let mut rng = SeededRng::new(5);
        for _ in 0..200 {
            let g = BipartiteGraph::random(7, 6, 0.3, &mut rng);
            let m = max_bipartite_matching(&g);
            assert!(m.is_valid_in(&g));
            let (ca, cb) = konig_cover(&g, &m);
            assert_eq!(ca.len() + cb.len(), m.size());
            for (a, b) in g.edges() {
                assert!(ca.contains(&a) || cb.contains(&b));
            }
        }
    }

    #[test]
    fn shuffled_matching_is_maximum() {
        let mut rng = SeededRng::new(9);
        for _ in 0..100 {
            let g = BipartiteGraph::random(10, 10, 0.25, &mut rng);
            let a = max_bipartite_matching(&g);
            let b = max_bipartite_matching_shuffled(&g, &mut rng);
            assert!(b.is_valid_in(&g));
            assert_eq!(a.size(), b.size());
        }
    }

    #[test]
    fn hall_witness_for_isolated_vertex() {
        let g = BipartiteGraph::from_edges(3, 3, &[(0, 0), (0, 1), (1, 1), (1, 2)]).unwrap();
        let v = hall_violation(&g).unwrap().unwrap();
        assert!(v.neighbourhood.len() < v.set.len());
        assert!(v.set.contains(&2));
        assert_eq!(hall_violation(&BipartiteGraph::complete(4, 4)).unwrap(), None);
        assert!(hall_violation(&BipartiteGraph::complete(3, 4)).is_err());
    }

    #[test]
    fn complement_and_induced() {
        let g = BipartiteGraph::from_edges(2, 3, &[(0, 0), (1, 2)]).unwrap();
        let c = g.complement();
        assert_eq!(c.num_edges(), 4);
        assert!(!c.has_edge(0, 0) && c.has_edge(0, 1));
        let s = g.induced(&[1], &[2, 0]);
        assert_eq!(s.edges(), vec![(0, 0)]);
        assert_eq!(g.transpose().neighbors_a(2), &[1]);
    }
}
