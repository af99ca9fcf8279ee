//! Spread embeddings of disjoint length-3 paths into four-layer graphs.

use crate::bipartite::BipartiteGraph;
use crate::error::{Error, Result};
use crate::hypergraph::Vertex;
use crate::partite_factor::{sample_spread_kr_factor, KrFactorConfig};
use crate::regularity::PartiteSystem;
use crate::rng::SeededRng;

/// The tripartite graph on `V1, V2, V3` obtained by identifying `V1` with
/// `V4` through `π`: `V1–V2` and `V2–V3` are kept, and `x ∈ V1` is joined to
/// `y ∈ V3` when `π(x) y` is an edge of `V3–V4`.
pub fn identify_through(four: &PartiteSystem, pi: &[Vertex]) -> Result<PartiteSystem> {
    let n = four.n();
    if four.r() != 4 {
        return Err(Error::invalid("a four-layer system is required"));
    }
    let mut seen = vec![false; n];
    if pi.len() != n || pi.iter().any(|&y| y as usize >= n || std::mem::replace(&mut seen[y as usize], true)) {
        return Err(Error::invalid("π is not a bijection V1 → V4"));
    }
    let g34 = four.pair_ref(2, 3);
    let adj: Vec<Vec<Vertex>> = pi
        .iter()
        .map(|&y| g34.neighbors_b(y).to_vec())
        .collect();
    let g13 = BipartiteGraph::from_adjacency(n, adj)?;
    let d = [
        four.declared_density(0, 1),
        four.declared_density(2, 3),
        four.declared_density(1, 2),
    ];
    PartiteSystem::new(
        3,
        n,
        vec![four.pair(0, 1), g13, four.pair(1, 2)],
        d.to_vec(),
    )
}

/// `n` disjoint paths `v1 v2 v3 π(v1)`, one per `v1 ∈ V1`, from a spread
/// triangle factor of the identified tripartite graph. Entry `x` of the result
/// is the path whose `V1` end is `x`, as layer-local indices.
pub fn sample_path_system(
    four: &PartiteSystem,
    pi: &[Vertex],
    cfg: &KrFactorConfig,
    rng: &SeededRng,
) -> Result<Vec<[Vertex; 4]>> {
    let tri = identify_through(four, pi)?;
    let n = four.n();
    let sample = sample_spread_kr_factor(&tri, cfg, rng)?;
    let mut paths = vec![[0; 4]; n];
    for c in &sample.factor.cliques {
        let (_, x) = tri.local(c[0]);
        let (_, v2) = tri.local(c[1]);
        let (_, v3) = tri.local(c[2]);
        paths[x as usize] = [x, v2, v3, pi[x as usize]];
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularity::{generate_four_layer, GeneratorConfig};
    use rand::seq::SliceRandom;

    fn complete_four(n: usize) -> PartiteSystem {
        let mut sys = PartiteSystem::new(4, n, vec![BipartiteGraph::new(n, n); 6], vec![0.0; 6]).unwrap();
        for i in 0..3 {
            sys.set_pair(i, i + 1, BipartiteGraph::complete(n, n), 1.0);
        }
        sys
    }

    #[test]
    fn identified_complete_layers_have_n_cubed_triangles() {
        let n = 5;
        let pi: Vec<Vertex> = (0..n as Vertex).collect();
        let tri = identify_through(&complete_four(n), &pi).unwrap();
        let mut count = 0;
        for x in 0..n as Vertex {
            for y in 0..n as Vertex {
                for z in 0..n as Vertex {
                    if tri.adjacent(0, x, 1, y) && tri.adjacent(1, y, 2, z) && tri.adjacent(0, x, 2, z) {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, n * n * n);
    }

    #[test]
    fn paths_use_layer_edges() {
        let n = 12;
        let mut rng = SeededRng::new(3);
        let four = generate_four_layer(n, 0.7, &GeneratorConfig::default(), &mut rng.child(0)).unwrap();
        let mut pi: Vec<Vertex> = (0..n as Vertex).collect();
        pi.shuffle(&mut rng);
        let cfg = KrFactorConfig {
            gate: None,
            ..KrFactorConfig::for_density(0.7)
        };
        let paths = sample_path_system(&four, &pi, &cfg, &SeededRng::new(5)).unwrap();
        let mut used = [vec![false; n], vec![false; n]];
        for (x, p) in paths.iter().enumerate() {
            assert_eq!(p[0] as usize, x);
            assert_eq!(p[3], pi[x]);
            for i in 0..3 {
                assert!(four.adjacent(i, p[i], i + 1, p[i + 1]), "{p:?}");
            }
            assert!(!std::mem::replace(&mut used[0][p[1] as usize], true));
            assert!(!std::mem::replace(&mut used[1][p[2] as usize], true));
        }
    }

    #[test]
    fn complete_layers_always_succeed() {
        let four = complete_four(6);
        let pi: Vec<Vertex> = vec![3, 1, 0, 5, 4, 2];
        let cfg = KrFactorConfig::for_density(1.0);
        for seed in 0..10 {
            let paths = sample_path_system(&four, &pi, &cfg, &SeededRng::new(seed)).unwrap();
            assert!(paths.iter().enumerate().all(|(x, p)| p[0] as usize == x && p[3] == pi[x]));
        }
    }
}
