//! Bounded-degree spanning trees and their spread embeddings.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Graph, Vertex};
use crate::rng::SeededRng;

pub mod decomposition;
pub mod paths;
pub mod pipeline;
pub mod precursor;

pub use decomposition::{synthetic_decomposition, ClusterDecomposition, PairCase, SpecialSets, SyntheticConfig};
pub use paths::sample_path_system;
pub use pipeline::{embed_tree, embed_tree_dense, DenseConfig, TreeConfig, TreeEmbedding, TreeTrace};
pub use precursor::{random_greedy_embed, BipartiteForest, PrecursorConfig, PrecursorInput, PrecursorOutcome};

/// A tree on `[0, n)` rooted at vertex 0, with a degree cap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct RootedTree {
    parent: Vec<Option<Vertex>>,
    children: Vec<Vec<Vertex>>,
    max_degree: usize,
}

#[derive(Serialize, Deserialize)]
struct TreeRepr {
    parent: Vec<Option<Vertex>>,
    max_degree: usize,
}

impl TryFrom<TreeRepr> for RootedTree {
    type Error = Error;
    fn try_from(r: TreeRepr) -> Result<Self> {
        RootedTree::new(r.parent, r.max_degree)
    }
}

impl From<RootedTree> for TreeRepr {
    fn from(t: RootedTree) -> Self {
        TreeRepr {
            parent: t.parent,
            max_degree: t.max_degree,
        }
    }
}

impl RootedTree {
    /// Validates a parent array: only vertex 0 has no parent, every vertex
    /// reaches the root, and no degree exceeds `max_degree`.
    pub fn new(parent: Vec<Option<Vertex>>, max_degree: usize) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::invalid("a tree needs at least one vertex"));
        }
        if parent[0].is_some() {
            return Err(Error::invalid("vertex 0 must be the root"));
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate().skip(1) {
            let p = p.ok_or_else(|| Error::invalid(format!("vertex {v} has no parent")))?;
            if p as usize >= n || p as usize == v {
                return Err(Error::invalid(format!("vertex {v} has parent {p}")));
            }
            children[p as usize].push(v as Vertex);
        }
        let t = Self {
            parent,
            children,
            max_degree,
        };
        if t.bfs_order().len() != n {
            return Err(Error::invalid("parent array contains a cycle"));
        }
        if let Some(v) = (0..n as Vertex).find(|&v| t.degree(v) > max_degree) {
            return Err(Error::invalid(format!(
                "vertex {v} has degree {} above the cap {max_degree}",
                t.degree(v)
            )));
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn root(&self) -> Vertex {
        0
    }

    pub fn parent(&self, v: Vertex) -> Option<Vertex> {
        self.parent[v as usize]
    }

    pub fn parents(&self) -> &[Option<Vertex>] {
        &self.parent
    }

    pub fn children(&self, v: Vertex) -> &[Vertex] {
        &self.children[v as usize]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.children[v as usize].len() + usize::from(self.parent[v as usize].is_some())
    }

    pub fn neighbors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.parent[v as usize]
            .into_iter()
            .chain(self.children[v as usize].iter().copied())
    }

    /// `(parent, child)` pairs.
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        (0..self.n() as Vertex)
            .filter_map(|v| self.parent(v).map(|p| (p, v)))
            .collect()
    }

    pub fn is_leaf(&self, v: Vertex) -> bool {
        self.children[v as usize].is_empty()
    }

    /// A non-leaf all of whose children are leaves.
    pub fn is_secondary_leaf(&self, v: Vertex) -> bool {
        !self.is_leaf(v) && self.children(v).iter().all(|&c| self.is_leaf(c))
    }

    pub fn leaves(&self) -> Vec<Vertex> {
        (0..self.n() as Vertex).filter(|&v| self.is_leaf(v)).collect()
    }

    pub fn secondary_leaves(&self) -> Vec<Vertex> {
        (0..self.n() as Vertex)
            .filter(|&v| self.is_secondary_leaf(v))
            .collect()
    }

    /// Breadth-first order from the root.
    pub fn bfs_order(&self) -> Vec<Vertex> {
        let mut order = Vec::with_capacity(self.n());
        let mut seen = vec![false; self.n()];
        let mut queue = VecDeque::from([0 as Vertex]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in self.children(v) {
                if !std::mem::replace(&mut seen[c as usize], true) {
                    queue.push_back(c);
                }
            }
        }
        order
    }

    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.n()];
        for v in self.bfs_order() {
            if let Some(p) = self.parent(v) {
                depth[v as usize] = depth[p as usize] + 1;
            }
        }
        depth
    }

    /// Subtree sizes.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut size = vec![1; self.n()];
        for &v in self.bfs_order().iter().rev() {
            if let Some(p) = self.parent(v) {
                size[p as usize] += size[v as usize];
            }
        }
        size
    }

    pub fn to_graph(&self) -> Graph {
        Graph::from_edges(self.n(), &self.edges()).expect("tree edges are in range")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeShape {
    /// Each new vertex attaches to a uniform earlier vertex with spare degree.
    Random,
    /// A spine with up to `Δ - 2` random legs per spine vertex.
    Caterpillar,
    /// A path ending in `Δ - 1` leaves.
    Broom,
    Path,
    Star,
}

impl std::str::FromStr for TreeShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "caterpillar" => Ok(Self::Caterpillar),
            "broom" => Ok(Self::Broom),
            "path" => Ok(Self::Path),
            "star" => Ok(Self::Star),
            _ => Err(Error::invalid(format!("unknown tree shape `{s}`"))),
        }
    }
}

pub fn generate_tree(
    n: usize,
    max_degree: usize,
    shape: TreeShape,
    rng: &mut SeededRng,
) -> Result<RootedTree> {
    if n == 0 {
        return Err(Error::invalid("a tree needs at least one vertex"));
    }
    if max_degree < 2 {
        return Err(Error::invalid("the degree cap must be at least 2"));
    }
    let mut parent: Vec<Option<Vertex>> = vec![None; n];
    match shape {
        TreeShape::Path => {
            for v in 1..n {
                parent[v] = Some(v as Vertex - 1);
            }
        }
        TreeShape::Star => {
            if n > 1 && max_degree < n - 1 {
                return Err(Error::invalid(format!(
                    "a star on {n} vertices needs degree cap {}",
                    n - 1
                )));
            }
            for p in parent.iter_mut().skip(1) {
                *p = Some(0);
            }
        }
        TreeShape::Broom => {
            let bristles = (max_degree - 1).min(n - 1);
            let handle = n - bristles;
            for v in 1..handle {
                parent[v] = Some(v as Vertex - 1);
            }
            for p in parent.iter_mut().skip(handle) {
                *p = Some(handle as Vertex - 1);
            }
        }
        TreeShape::Caterpillar => {
            let mut spine_end: Vertex = 0;
            let mut v = 1;
            while v < n {
                let legs = rng.gen_range(0..=max_degree - 2);
                for _ in 0..legs {
                    if v == n - 1 {
                        break;
                    }
                    parent[v] = Some(spine_end);
                    v += 1;
                }
                parent[v] = Some(spine_end);
                spine_end = v as Vertex;
                v += 1;
            }
        }
        TreeShape::Random => {
            let mut degree = vec![0usize; n];
            let mut open: Vec<Vertex> = vec![0];
            for v in 1..n {
                let i = rng.gen_range(0..open.len());
                let p = open[i];
                parent[v] = Some(p);
                degree[p as usize] += 1;
                degree[v] = 1;
                if degree[p as usize] == max_degree {
                    open.swap_remove(i);
                }
                open.push(v as Vertex);
            }
        }
    }
    RootedTree::new(parent, max_degree)
}

/// An injective partial map from tree vertices to host vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialEmbedding {
    map: Vec<Option<Vertex>>,
    occupied: Vec<Option<Vertex>>,
}

impl PartialEmbedding {
    pub fn new(tree_n: usize, host_n: usize) -> Self {
        Self {
            map: vec![None; tree_n],
            occupied: vec![None; host_n],
        }
    }

    pub fn get(&self, v: Vertex) -> Option<Vertex> {
        self.map[v as usize]
    }

    /// The tree vertex sitting on host vertex `x`.
    pub fn preimage(&self, x: Vertex) -> Option<Vertex> {
        self.occupied[x as usize]
    }

    pub fn is_occupied(&self, x: Vertex) -> bool {
        self.occupied[x as usize].is_some()
    }

    pub fn place(&mut self, v: Vertex, x: Vertex) -> Result<()> {
        if let Some(old) = self.map[v as usize] {
            return Err(Error::invalid(format!("tree vertex {v} already sits on {old}")));
        }
        if let Some(w) = self.occupied[x as usize] {
            return Err(Error::invalid(format!("host vertex {x} already holds {w}")));
        }
        self.map[v as usize] = Some(x);
        self.occupied[x as usize] = Some(v);
        Ok(())
    }

    pub fn embedded(&self) -> usize {
        self.map.iter().filter(|x| x.is_some()).count()
    }

    pub fn is_total(&self) -> bool {
        self.map.iter().all(Option::is_some)
    }

    pub fn as_slice(&self) -> &[Option<Vertex>] {
        &self.map
    }

    /// Every mapped tree edge is a host edge.
    pub fn check_partial(&self, tree: &RootedTree, host: &Graph) -> Result<()> {
        if self.map.len() != tree.n() || self.occupied.len() != host.n() {
            return Err(Error::invalid("embedding sized for another tree or host"));
        }
        for (p, c) in tree.edges() {
            if let (Some(x), Some(y)) = (self.get(p), self.get(c)) {
                if !host.has_edge(x, y) {
                    return Err(Error::invalid(format!(
                        "tree edge {p}-{c} maps to non-edge {x}-{y}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total, injective and edge-preserving.
    pub fn check_total(&self, tree: &RootedTree, host: &Graph) -> Result<()> {
        if let Some(v) = self.map.iter().position(Option::is_none) {
            return Err(Error::invalid(format!("tree vertex {v} is not embedded")));
        }
        self.check_partial(tree, host)
    }

    /// Image of every tree vertex, when total.
    pub fn to_vec(&self) -> Option<Vec<Vertex>> {
        self.map.iter().copied().collect()
    }
}

/// Uniform element of a non-empty slice.
pub(crate) fn pick<R: Rng + ?Sized>(items: &[Vertex], rng: &mut R) -> Option<Vertex> {
    items.choose(rng).copied()
}
