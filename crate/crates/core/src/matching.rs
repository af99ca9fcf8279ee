//! Matchings and clique factors, the sampled objects.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{Graph, Hypergraph, Vertex};

/// A set of hyperedges, each stored sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matching {
    pub edges: Vec<Vec<Vertex>>,
}

impl Matching {
    pub fn new(mut edges: Vec<Vec<Vertex>>) -> Self {
        for e in &mut edges {
            e.sort_unstable();
        }
        Self { edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Number of vertices covered (assuming disjointness).
    pub fn covered(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Coverage mask over `[0, n)`, or an error naming a repeated vertex.
    pub fn coverage(&self, n: usize) -> Result<Vec<bool>> {
        let mut seen = vec![false; n];
        for e in &self.edges {
            for &v in e {
                let slot = seen
                    .get_mut(v as usize)
                    .ok_or_else(|| Error::invalid(format!("vertex {v} outside [0, {n})")))?;
                if *slot {
                    return Err(Error::invalid(format!("vertex {v} covered twice")));
                }
                *slot = true;
            }
        }
        Ok(seen)
    }

    /// Disjoint edges, all present in `h`.
    pub fn check_in(&self, h: &Hypergraph) -> Result<()> {
        self.coverage(h.n())?;
        for e in &self.edges {
            if !h.contains(e) {
                return Err(Error::invalid(format!("{e:?} is not an edge of the host")));
            }
        }
        Ok(())
    }

    pub fn is_matching_in(&self, h: &Hypergraph) -> bool {
        self.check_in(h).is_ok()
    }

    pub fn is_perfect_in(&self, h: &Hypergraph) -> bool {
        self.is_matching_in(h) && self.covered() == h.n()
    }

    /// Edges sorted lexicographically, for canonical output.
    pub fn canonical(mut self) -> Self {
        for e in &mut self.edges {
            e.sort_unstable();
        }
        self.edges.sort_unstable();
        self
    }

    pub fn extend(&mut self, other: Matching) {
        self.edges.extend(other.edges);
    }
}

/// A set of vertex-disjoint cliques.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub cliques: Vec<Vec<Vertex>>,
}

impl Factor {
    pub fn new(mut cliques: Vec<Vec<Vertex>>) -> Self {
        for c in &mut cliques {
            c.sort_unstable();
        }
        Self { cliques }
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn canonical(mut self) -> Self {
        self.cliques.sort_unstable();
        self
    }

    /// Disjoint `r`-cliques of `g`.
    pub fn check_in(&self, g: &Graph, r: usize) -> Result<()> {
        let as_matching = Matching {
            edges: self.cliques.clone(),
        };
        as_matching.coverage(g.n())?;
        for c in &self.cliques {
            if c.len() != r || !g.is_clique(c) {
                return Err(Error::invalid(format!("{c:?} is not an {r}-clique")));
            }
        }
        Ok(())
    }

    pub fn is_perfect_in(&self, g: &Graph, r: usize) -> bool {
        self.check_in(g, r).is_ok() && self.cliques.len() * r == g.n()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_validation() {
        let h = Hypergraph::complete(6, 3).unwrap();
        assert!(Matching::new(vec![vec![2, 0, 1], vec![3, 4, 5]]).is_perfect_in(&h));
        assert!(!Matching::new(vec![vec![0, 1, 2], vec![2, 4, 5]]).is_matching_in(&h));
        assert!(!Matching::new(vec![vec![0, 1, 2]]).is_perfect_in(&h));
        let sparse = Hypergraph::new(6, 3, vec![vec![0, 1, 2]]).unwrap();
        assert!(!Matching::new(vec![vec![3, 4, 5]]).is_matching_in(&sparse));
    }

    #[test]
    fn factor_validation() {
        let g = Graph::complete(6);
        assert!(Factor::new(vec![vec![0, 1, 2], vec![3, 4, 5]]).is_perfect_in(&g, 3));
        let c6 = Graph::cycle(6);
        assert!(!Factor::new(vec![vec![0, 1, 2], vec![3, 4, 5]]).is_perfect_in(&c6, 3));
    }
}
