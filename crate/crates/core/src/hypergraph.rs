//! Hypergraphs, graphs and implicit complete hosts.

use std::collections::HashMap;
use std::sync::OnceLock;

use fixedbitset::FixedBitSet;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binom, for_each_combination, unrank_colex};
use crate::error::{Error, Result};

pub type Vertex = u32;

/// Largest vertex count supported by the packed edge index.
pub const MAX_VERTICES: usize = 1 << 16;
/// Largest uniformity supported by the packed edge index.
pub const MAX_UNIFORMITY: usize = 8;

/// Packs a sorted edge into one integer key, 16 bits per vertex.
pub fn edge_key(edge: &[Vertex]) -> u128 {
    edge.iter().fold(0u128, |acc, &v| (acc << 16) | v as u128)
}

/// A `k`-uniform hypergraph on `[0, n)`.
///
/// Edges are stored flat, each one sorted ascending and the list sorted
/// lexicographically, so two hypergraphs with the same edge set compare equal
/// and iterate identically.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "HypergraphRepr", into = "HypergraphRepr")]
pub struct Hypergraph {
    n: usize,
    k: usize,
    flat: Vec<Vertex>,
    index: OnceLock<HashMap<u128, u32>>,
}

#[derive(Serialize, Deserialize)]
struct HypergraphRepr {
    n: usize,
    k: usize,
    edges: Vec<Vec<Vertex>>,
}

impl TryFrom<HypergraphRepr> for Hypergraph {
    type Error = Error;

    fn try_from(r: HypergraphRepr) -> Result<Self> {
        Hypergraph::new(r.n, r.k, r.edges)
    }
}

impl From<Hypergraph> for HypergraphRepr {
    fn from(h: Hypergraph) -> Self {
        HypergraphRepr {
            n: h.n,
            k: h.k,
            edges: h.to_nested(),
        }
    }
}

impl PartialEq for Hypergraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k && self.flat == other.flat
    }
}

impl Eq for Hypergraph {}

fn check_shape(n: usize, k: usize) -> Result<()> {
    if !(2..=MAX_UNIFORMITY).contains(&k) {
        return Err(Error::invalid(format!(
            "uniformity {k} outside 2..={MAX_UNIFORMITY}"
        )));
    }
    if n > MAX_VERTICES {
        return Err(Error::invalid(format!(
            "{n} vertices exceeds the supported maximum {MAX_VERTICES}"
        )));
    }
    Ok(())
}

impl Hypergraph {
    /// Builds a hypergraph, sorting each edge and the edge list.
    ///
    /// Repeated edges collapse to one; an edge with a repeated or out-of-range
    /// vertex is rejected.
    pub fn new(n: usize, k: usize, edges: Vec<Vec<Vertex>>) -> Result<Self> {
        check_shape(n, k)?;
        let mut sorted = Vec::with_capacity(edges.len());
        for mut e in edges {
            if e.len() != k {
                return Err(Error::invalid(format!(
                    "edge {e:?} has {} vertices, expected {k}",
                    e.len()
                )));
            }
            e.sort_unstable();
            if e.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("edge {e:?} repeats a vertex")));
            }
            if e.last().is_some_and(|&v| v as usize >= n) {
                return Err(Error::invalid(format!("edge {e:?} leaves [0, {n})")));
            }
            sorted.push(e);
        }
        sorted.sort_unstable();
        sorted.dedup();
        Ok(Self::from_sorted_flat(n, k, sorted.concat()))
    }

    /// Caller guarantees sorted, distinct, in-range edges in lexicographic order.
    pub(crate) fn from_sorted_flat(n: usize, k: usize, flat: Vec<Vertex>) -> Self {
        Self {
            n,
            k,
            flat,
            index: OnceLock::new(),
        }
    }

    /// Builds from edges that are each already sorted ascending.
    pub(crate) fn from_sorted_edges(n: usize, k: usize, mut edges: Vec<Vec<Vertex>>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Self::from_sorted_flat(n, k, edges.concat())
    }

    pub fn empty(n: usize, k: usize) -> Result<Self> {
        check_shape(n, k)?;
        Ok(Self::from_sorted_flat(n, k, Vec::new()))
    }

    /// The complete `k`-uniform hypergraph `K^(k)_n`.
    pub fn complete(n: usize, k: usize) -> Result<Self> {
        check_shape(n, k)?;
        let items: Vec<Vertex> = (0..n as Vertex).collect();
        let mut flat = Vec::with_capacity(binom(n as u64, k as u64) as usize * k);
        for_each_combination(&items, k, |c| flat.extend_from_slice(c));
        Ok(Self::from_sorted_flat(n, k, flat))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_edges(&self) -> usize {
        self.flat.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn edge(&self, i: usize) -> &[Vertex] {
        &self.flat[i * self.k..(i + 1) * self.k]
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = &[Vertex]> + '_ {
        self.flat.chunks_exact(self.k)
    }

    pub fn to_nested(&self) -> Vec<Vec<Vertex>> {
        self.edges().map(|e| e.to_vec()).collect()
    }

    fn index(&self) -> &HashMap<u128, u32> {
        self.index.get_or_init(|| {
            self.edges()
                .enumerate()
                .map(|(i, e)| (edge_key(e), i as u32))
                .collect()
        })
    }

    /// Position of the edge with vertex set `set` (any order), if present.
    pub fn edge_index(&self, set: &[Vertex]) -> Option<usize> {
        if set.len() != self.k {
            return None;
        }
        let mut buf = [0 as Vertex; MAX_UNIFORMITY];
        let buf = &mut buf[..self.k];
        buf.copy_from_slice(set);
        buf.sort_unstable();
        self.index().get(&edge_key(buf)).map(|&i| i as usize)
    }

    pub fn contains(&self, set: &[Vertex]) -> bool {
        self.edge_index(set).is_some()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &v in &self.flat {
            d[v as usize] += 1;
        }
        d
    }

    /// `deg_H(S)`: number of edges containing every vertex of `set`.
    pub fn degree_of(&self, set: &[Vertex]) -> usize {
        self.edges()
            .filter(|e| set.iter().all(|v| e.binary_search(v).is_ok()))
            .count()
    }

    /// For each vertex, the indices of edges containing it.
    pub fn incidence(&self) -> Vec<Vec<u32>> {
        let mut inc = vec![Vec::new(); self.n];
        for (i, e) in self.edges().enumerate() {
            for &v in e {
                inc[v as usize].push(i as u32);
            }
        }
        inc
    }

    /// The sub-hypergraph induced on `vertices`, relabelled to `[0, m)` in the
    /// given order. Returns the relabelled hypergraph and the map new → old.
    pub fn induced(&self, vertices: &[Vertex]) -> (Hypergraph, Vec<Vertex>) {
        let mut relabel = vec![u32::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            relabel[v as usize] = i as u32;
        }
        let mut edges = Vec::new();
        for e in self.edges() {
            if e.iter().all(|&v| relabel[v as usize] != u32::MAX) {
                let mut f: Vec<Vertex> = e.iter().map(|&v| relabel[v as usize]).collect();
                f.sort_unstable();
                edges.push(f);
            }
        }
        (
            Self::from_sorted_edges(vertices.len(), self.k, edges),
            vertices.to_vec(),
        )
    }

    /// Same vertex set, only edges whose vertices all satisfy `keep`.
    pub fn restrict_to(&self, keep: &[bool]) -> Hypergraph {
        let flat = self
            .edges()
            .filter(|e| e.iter().all(|&v| keep[v as usize]))
            .flatten()
            .copied()
            .collect();
        Self::from_sorted_flat(self.n, self.k, flat)
    }

    /// Same vertex set, edges selected by index predicate.
    pub fn filter_edges<F: FnMut(usize, &[Vertex]) -> bool>(&self, mut keep: F) -> Hypergraph {
        let mut flat = Vec::new();
        for (i, e) in self.edges().enumerate() {
            if keep(i, e) {
                flat.extend_from_slice(e);
            }
        }
        Self::from_sorted_flat(self.n, self.k, flat)
    }

    /// Union of edge sets on the same vertex set.
    pub fn union(&self, other: &Hypergraph) -> Result<Hypergraph> {
        if self.n != other.n || self.k != other.k {
            return Err(Error::invalid("union of hypergraphs with different shapes"));
        }
        let edges = self.edges().chain(other.edges()).map(|e| e.to_vec()).collect();
        Ok(Self::from_sorted_edges(self.n, self.k, edges))
    }
}

/// A host whose edges can be addressed by rank without materialising them.
pub trait HyperHost: Sync {
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn edge_count(&self) -> u128;
    fn edge_by_rank(&self, rank: u128, out: &mut Vec<Vertex>);
    fn has_edge(&self, sorted: &[Vertex]) -> bool;
}

impl HyperHost for Hypergraph {
    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.k
    }

    fn edge_count(&self) -> u128 {
        self.num_edges() as u128
    }

    fn edge_by_rank(&self, rank: u128, out: &mut Vec<Vertex>) {
        out.clear();
        out.extend_from_slice(self.edge(rank as usize));
    }

    fn has_edge(&self, sorted: &[Vertex]) -> bool {
        self.contains(sorted)
    }
}

/// `K^(k)_n` without storing its edges, for hosts too large to materialise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompleteHost {
    pub n: usize,
    pub k: usize,
}

impl HyperHost for CompleteHost {
    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.k
    }

    fn edge_count(&self) -> u128 {
        binom(self.n as u64, self.k as u64)
    }

    fn edge_by_rank(&self, rank: u128, out: &mut Vec<Vertex>) {
        unrank_colex(rank, self.n, self.k, out);
    }

    fn has_edge(&self, sorted: &[Vertex]) -> bool {
        sorted.len() == self.k
            && sorted.windows(2).all(|w| w[0] < w[1])
            && sorted.last().is_none_or(|&v| (v as usize) < self.n)
    }
}

/// Ranks of a `p`-random subset of `[0, total)`, by geometric skipping.
///
/// Exact Bernoulli(p) marginals in time proportional to the output size.
pub fn skip_sample_ranks<R: Rng + ?Sized>(total: u128, p: f64, rng: &mut R) -> Vec<u128> {
    let mut out = Vec::new();
    if p <= 0.0 || total == 0 {
        return out;
    }
    if p >= 1.0 {
        return (0..total).collect();
    }
    let log_q = (-p).ln_1p();
    let mut pos: u128 = 0;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let skip = (u.ln() / log_q).floor();
        if !skip.is_finite() || skip >= (total - pos) as f64 {
            return out;
        }
        pos += skip as u128;
        out.push(pos);
        pos += 1;
        if pos >= total {
            return out;
        }
    }
}

/// A simple undirected graph with bitset adjacency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<FixedBitSet>,
    m: usize,
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HypergraphRepr {
            n: self.n,
            k: 2,
            edges: self.edges().into_iter().map(|(u, v)| vec![u, v]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let h = Hypergraph::deserialize(d)?;
        Graph::from_hypergraph(&h).map_err(serde::de::Error::custom)
    }
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![FixedBitSet::with_capacity(n); n],
            m: 0,
        }
    }

    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let mut g = Self::new(n);
        for &(u, v) in edges {
            if u == v || u as usize >= n || v as usize >= n {
                return Err(Error::invalid(format!("bad edge ({u}, {v}) for n = {n}")));
            }
            g.add_edge(u, v);
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::new(n);
        for u in 0..n as Vertex {
            for v in u + 1..n as Vertex {
                g.add_edge(u, v);
            }
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Self::new(n);
        for u in 0..n {
            g.add_edge(u as Vertex, ((u + 1) % n) as Vertex);
        }
        g
    }

    /// Complete multipartite graph on consecutive blocks of the given sizes.
    pub fn complete_multipartite(sizes: &[usize]) -> Self {
        let n = sizes.iter().sum();
        let mut part = Vec::with_capacity(n);
        for (i, &s) in sizes.iter().enumerate() {
            part.extend(std::iter::repeat_n(i, s));
        }
        let mut g = Self::new(n);
        for u in 0..n {
            for v in u + 1..n {
                if part[u] != part[v] {
                    g.add_edge(u as Vertex, v as Vertex);
                }
            }
        }
        g
    }

    /// `G(n, p)`.
    pub fn gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut g = Self::new(n);
        for u in 0..n as Vertex {
            for v in u + 1..n as Vertex {
                if rng.gen::<f64>() < p {
                    g.add_edge(u, v);
                }
            }
        }
        g
    }

    pub fn from_hypergraph(h: &Hypergraph) -> Result<Self> {
        if h.k() != 2 {
            return Err(Error::invalid(format!("expected a graph, got k = {}", h.k())));
        }
        let mut g = Self::new(h.n());
        for e in h.edges() {
            g.add_edge(e[0], e[1]);
        }
        Ok(g)
    }

    pub fn to_hypergraph(&self) -> Hypergraph {
        let flat = self.edges().into_iter().flat_map(|(u, v)| [u, v]).collect();
        Hypergraph::from_sorted_flat(self.n, 2, flat)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.m
    }

    pub fn add_edge(&mut self, u: Vertex, v: Vertex) {
        if u != v && !self.adj[u as usize].contains(v as usize) {
            self.adj[u as usize].insert(v as usize);
            self.adj[v as usize].insert(u as usize);
            self.m += 1;
        }
    }

    pub fn remove_edge(&mut self, u: Vertex, v: Vertex) {
        if self.adj[u as usize].contains(v as usize) {
            self.adj[u as usize].set(v as usize, false);
            self.adj[v as usize].set(u as usize, false);
            self.m -= 1;
        }
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.adj[u as usize].contains(v as usize)
    }

    pub fn adjacency(&self, v: Vertex) -> &FixedBitSet {
        &self.adj[v as usize]
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.adj[v as usize].ones().map(|u| u as Vertex)
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v as usize].count_ones(..)
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n as Vertex).map(|v| self.degree(v)).min().unwrap_or(0)
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::with_capacity(self.m);
        for u in 0..self.n {
            for v in self.adj[u].ones().filter(|&v| v > u) {
                out.push((u as Vertex, v as Vertex));
            }
        }
        out
    }

    /// Whether every pair in `set` is adjacent.
    pub fn is_clique(&self, set: &[Vertex]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &u)| set[i + 1..].iter().all(|&v| self.has_edge(u, v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn construction_canonicalises() {
        let h = Hypergraph::new(5, 3, vec![vec![4, 1, 2], vec![0, 1, 2], vec![2, 1, 4]]).unwrap();
        assert_eq!(h.to_nested(), vec![vec![0, 1, 2], vec![1, 2, 4]]);
        assert!(h.contains(&[2, 4, 1]));
        assert!(!h.contains(&[0, 1, 3]));
        assert_eq!(h.degrees(), vec![1, 2, 2, 0, 1]);
        assert_eq!(h.degree_of(&[1, 2]), 2);
    }

    #[test]
    fn construction_rejects_malformed_edges() {
        assert!(Hypergraph::new(5, 3, vec![vec![0, 1]]).is_err());
        assert!(Hypergraph::new(5, 3, vec![vec![0, 1, 1]]).is_err());
        assert!(Hypergraph::new(5, 3, vec![vec![0, 1, 5]]).is_err());
        assert!(Hypergraph::new(5, 9, vec![]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let h = Hypergraph::new(6, 3, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"{"n":6,"k":3,"edges":[[0,1,2],[3,4,5]]}"#);
        let back: Hypergraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
        assert!(serde_json::from_str::<Hypergraph>(r#"{"n":2,"k":2,"edges":[[0,2]]}"#).is_err());
    }

    #[test]
    fn complete_and_induced() {
        let h = Hypergraph::complete(6, 3).unwrap();
        assert_eq!(h.num_edges(), 20);
        let (sub, map) = h.induced(&[5, 0, 3, 2]);
        assert_eq!(sub.num_edges(), 4);
        assert_eq!(map, vec![5, 0, 3, 2]);
        for e in sub.edges() {
            let orig: Vec<_> = e.iter().map(|&v| map[v as usize]).collect();
            assert!(h.contains(&orig));
        }
    }

    #[test]
    fn complete_host_ranks_match_materialised_set() {
        let host = CompleteHost { n: 8, k: 3 };
        let h = Hypergraph::complete(8, 3).unwrap();
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for r in 0..host.edge_count() {
            host.edge_by_rank(r, &mut out);
            assert!(h.contains(&out));
            assert!(host.has_edge(&out));
            seen.insert(out.clone());
        }
        assert_eq!(seen.len(), h.num_edges());
    }

    #[test]
    fn skip_sampling_has_binomial_mean() {
        let mut rng = SeededRng::new(3);
        let total = 100_000u128;
        let p = 0.01;
        let mut sum = 0usize;
        let reps = 50;
        for _ in 0..reps {
            let r = skip_sample_ranks(total, p, &mut rng);
            assert!(r.windows(2).all(|w| w[0] < w[1]));
            sum += r.len();
        }
        let mean = sum as f64 / reps as f64;
        let sd = (total as f64 * p * (1.0 - p) / reps as f64).sqrt();
        assert!((mean - 1000.0).abs() < 5.0 * sd, "mean {mean}");
        assert_eq!(skip_sample_ranks(10, 1.0, &mut rng).len(), 10);
        assert!(skip_sample_ranks(10, 0.0, &mut rng).is_empty());
    }

    #[test]
    fn graph_basics() {
        let g = Graph::complete_multipartite(&[3, 3, 3]);
        assert_eq!(g.num_edges(), 27);
        assert!(g.is_clique(&[0, 3, 6]));
        assert!(!g.is_clique(&[0, 1, 6]));
        let c = Graph::cycle(6);
        assert_eq!(c.min_degree(), 2);
        let h = c.to_hypergraph();
        assert_eq!(Graph::from_hypergraph(&h).unwrap(), c);
        let s = serde_json::to_string(&c).unwrap();
        let back: Graph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
