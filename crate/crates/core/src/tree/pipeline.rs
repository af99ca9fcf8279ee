//! End-to-end spread embedding of a spanning tree.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::decomposition::{ClusterDecomposition, PairCase};
use super::paths::sample_path_system;
use super::precursor::{random_greedy_embed, BipartiteForest, PrecursorConfig, PrecursorInput, PrecursorTrace};
use super::{pick, PartialEmbedding, RootedTree};
use crate::bipartite::BipartiteGraph;
use crate::error::{Error, Result};
use crate::hypergraph::{Graph, Vertex};
use crate::partite_factor::KrFactorConfig;
use crate::regularity::{PartiteSystem, Side};
use crate::rng::SeededRng;
use crate::spread_bipartite::{sample_spread_star_matching, StarDemand};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub eps: f64,
    /// Slack `α` required by the buffered greedy stage. The special sets
    /// leave only about `α|C|/2` free vertices per cluster, so the default
    /// checks `|C| ≤ |A|` alone.
    pub precursor_alpha: f64,
    /// `D` of the star-matching host.
    pub star_d: usize,
    pub star_retries: u32,
    pub path: KrFactorConfig,
    pub path_retries: u32,
    pub buffer_retries: u32,
    pub run_retries: u32,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            precursor_alpha: 0.0,
            star_d: 8,
            star_retries: 20,
            path: KrFactorConfig {
                gate: None,
                ..KrFactorConfig::for_density(0.75)
            },
            path_retries: 5,
            buffer_retries: 100,
            run_retries: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTrace {
    pub case: PairCase,
    pub buffer_draws: u32,
    pub precursor: PrecursorTrace,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TreeTrace {
    pub attempts: u32,
    /// `stage: reason` of every failed attempt.
    pub failures: Vec<String>,
    /// Candidate counts when placing `S` (or, in dense mode, the greedy stage).
    pub bridge_candidates: Vec<usize>,
    /// `δ n / (8M)`, the proof's lower bound on the bridge candidates.
    pub bridge_floor: f64,
    pub pairs: Vec<PairTrace>,
}

impl TreeTrace {
    /// Candidate-set sizes per stage, as `size -> count`.
    pub fn candidate_histograms(&self) -> BTreeMap<String, BTreeMap<usize, usize>> {
        let mut out: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
        for &c in &self.bridge_candidates {
            *out.entry("bridge".into()).or_default().entry(c).or_default() += 1;
        }
        for p in &self.pairs {
            for &c in &p.precursor.candidates {
                *out.entry("precursor".into()).or_default().entry(c).or_default() += 1;
            }
        }
        out
    }

    pub fn buffer_postconditions_hold(&self) -> bool {
        self.pairs.iter().all(|p| p.precursor.postconditions_hold())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEmbedding {
    /// Host vertex of every tree vertex.
    pub map: Vec<Vertex>,
    pub trace: TreeTrace,
}

impl TreeEmbedding {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self.map)
    }
}

fn host_pair(host: &Graph, xa: &[Vertex], xb: &[Vertex]) -> BipartiteGraph {
    let mut pos = vec![u32::MAX; host.n()];
    for (i, &y) in xb.iter().enumerate() {
        pos[y as usize] = i as u32;
    }
    let adj = xa
        .iter()
        .map(|&x| {
            let mut v: Vec<Vertex> = host
                .neighbors(x)
                .filter_map(|y| (pos[y as usize] != u32::MAX).then_some(pos[y as usize]))
                .collect();
            v.sort_unstable();
            v
        })
        .collect();
    BipartiteGraph::from_adjacency(xb.len(), adj).expect("positions are in range")
}

fn stage_err(stage: &str, e: Error) -> Error {
    match e {
        Error::Stage { .. } | Error::Invalid(_) => e,
        other => Error::stage(stage, other.to_string()),
    }
}

/// Places the children named in `demand_of` onto the free host vertices
/// `targets` with a spread star matching from their embedded parents.
fn complete_stars(
    host: &Graph,
    emb: &mut PartialEmbedding,
    children: &[(Vertex, Vertex)],
    targets: &[Vertex],
    cap: usize,
    cfg: &TreeConfig,
    rng: &SeededRng,
) -> Result<()> {
    let mut parents: Vec<Vertex> = children.iter().map(|&(p, _)| p).collect();
    parents.sort_unstable();
    parents.dedup();
    let images: Vec<Vertex> = parents.iter().map(|&p| emb.get(p).expect("parent embedded")).collect();
    let mut demand = vec![0; parents.len()];
    for &(p, _) in children {
        demand[parents.binary_search(&p).expect("listed")] += 1;
    }
    let g = host_pair(host, &images, targets);
    let stars = sample_spread_star_matching(&g, &StarDemand::new(demand, cap), cfg.star_d, cfg.star_retries, rng)
        .map_err(|e| stage_err("star", e))?;
    for (i, &p) in parents.iter().enumerate() {
        let kids = children.iter().filter(|&&(q, _)| q == p).map(|&(_, c)| c);
        for (c, &b) in kids.zip(&stars[i]) {
            emb.place(c, targets[b as usize])?;
        }
    }
    Ok(())
}

struct Attempt<'a> {
    tree: &'a RootedTree,
    host: &'a Graph,
    dec: &'a ClusterDecomposition,
    cfg: &'a TreeConfig,
    cluster_of_host: Vec<usize>,
}

impl Attempt<'_> {
    fn deg_into(&self, x: Vertex, cluster: usize) -> usize {
        self.host
            .neighbors(x)
            .filter(|&y| self.cluster_of_host[y as usize] == cluster)
            .count()
    }

    fn place_bridge(&self, emb: &mut PartialEmbedding, trace: &mut TreeTrace, rng: &mut SeededRng) -> Result<()> {
        let pos: Vec<usize> = {
            let mut p = vec![0; self.tree.n()];
            for (i, v) in self.tree.bfs_order().into_iter().enumerate() {
                p[v as usize] = i;
            }
            p
        };
        let mut bridge = self.dec.bridge.clone();
        bridge.sort_by_key(|&s| pos[s as usize]);
        let delta = self.dec.density;
        for s in bridge {
            let c = self.dec.assignment[s as usize];
            let cands: Vec<Vertex> = self.dec.clusters[c]
                .iter()
                .copied()
                .filter(|&x| {
                    !emb.is_occupied(x)
                        && self.tree.neighbors(s).all(|u| {
                            let cu = self.dec.assignment[u as usize];
                            let near = emb.get(u).is_none_or(|y| self.host.has_edge(x, y));
                            near && self.deg_into(x, cu) as f64 >= delta * self.dec.clusters[cu].len() as f64 / 3.0
                        })
                })
                .collect();
            trace.bridge_candidates.push(cands.len());
            let x = pick(&cands, rng)
                .ok_or_else(|| Error::stage("bridge", format!("no candidate for bridge vertex {s}")))?;
            emb.place(s, x)?;
        }
        Ok(())
    }

    fn choose_buffers(
        &self,
        emb: &PartialEmbedding,
        cl: [&[Vertex]; 2],
        sizes: [[usize; 2]; 2],
        rng: &mut SeededRng,
    ) -> Result<([Vec<Vertex>; 2], [Vec<Vertex>; 2], u32)> {
        let third = self.dec.density / 3.0;
        for draw in 1..=self.cfg.buffer_retries {
            let mut b1: [Vec<Vertex>; 2] = Default::default();
            let mut b2: [Vec<Vertex>; 2] = Default::default();
            for side in 0..2 {
                let mut pool: Vec<Vertex> = cl[side].iter().copied().filter(|&x| !emb.is_occupied(x)).collect();
                pool.shuffle(rng);
                b1[side] = pool[..sizes[0][side]].to_vec();
                b2[side] = pool[sizes[0][side]..sizes[0][side] + sizes[1][side]].to_vec();
            }
            let dense = |xs: &[Vertex], ys: &[Vertex]| {
                xs.iter().all(|&x| {
                    let d = ys.iter().filter(|&&y| self.host.has_edge(x, y)).count();
                    d as f64 >= third * ys.len() as f64 - 1e-9
                })
            };
            let ok = [&b1[0], &b2[0]].iter().all(|xs| {
                [&b1[1], &b2[1]]
                    .iter()
                    .all(|ys| dense(xs, ys) && dense(ys, xs))
            });
            if ok {
                return Ok((b1, b2, draw));
            }
        }
        Err(Error::stage(
            "buffers",
            format!("no buffer choice passed the degree check in {} draws", self.cfg.buffer_retries),
        ))
    }

    fn embed_pair(&self, p: usize, emb: &mut PartialEmbedding, rng: &SeededRng) -> Result<PairTrace> {
        let (left, right) = self.dec.pairs[p];
        let cl = [self.dec.clusters[left].as_slice(), self.dec.clusters[right].as_slice()];
        let sp = &self.dec.special[p];
        let n = self.tree.n();
        let side_of = |v: Vertex| usize::from(self.dec.assignment[v as usize] != left);
        let mut in_f2 = vec![false; n];
        for &v in &sp.f2 {
            in_f2[v as usize] = true;
        }
        let members: Vec<Vertex> = self
            .dec
            .pair_vertices(p)
            .into_iter()
            .filter(|&v| !in_f2[v as usize])
            .collect();
        let mut local = vec![u32::MAX; n];
        for (i, &v) in members.iter().enumerate() {
            local[v as usize] = i as u32;
        }
        let sides = members
            .iter()
            .map(|&v| if side_of(v) == 0 { Side::A } else { Side::B })
            .collect();
        let edges: Vec<(Vertex, Vertex)> = members
            .iter()
            .filter_map(|&v| {
                let q = self.tree.parent(v)?;
                (local[q as usize] != u32::MAX).then(|| (local[q as usize], local[v as usize]))
            })
            .collect();
        let forest = BipartiteForest::new(sides, &edges)?;
        let mut host_pos = vec![u32::MAX; n];
        for (i, &x) in cl[0].iter().enumerate() {
            host_pos[x as usize] = i as u32;
        }
        for (i, &x) in cl[1].iter().enumerate() {
            host_pos[x as usize] = (cl[0].len() + i) as u32;
        }
        let fixed: Vec<(Vertex, Vertex)> = members
            .iter()
            .filter_map(|&v| emb.get(v).map(|x| (local[v as usize], host_pos[x as usize])))
            .collect();

        let mut sizes = [[0usize; 2]; 2];
        for &v in &sp.f1 {
            sizes[0][side_of(v)] += 1;
        }
        for &v in &sp.f2 {
            sizes[1][side_of(v)] += 1;
        }
        let mut buf_rng = rng.child(0);
        let (b1, b2, buffer_draws) = self.choose_buffers(emb, cl, sizes, &mut buf_rng)?;
        let b1p: Vec<Vertex> = b1.iter().flatten().map(|&x| host_pos[x as usize]).collect();
        let b2p: Vec<Vertex> = b2.iter().flatten().map(|&x| host_pos[x as usize]).collect();
        let f: Vec<Vertex> = sp.f1.iter().map(|&v| local[v as usize]).collect();
        let g = host_pair(self.host, cl[0], cl[1]);
        let pcfg = PrecursorConfig {
            eps: self.cfg.eps,
            d: self.dec.density,
            max_degree: self.tree.max_degree(),
            k: self.dec.k_bound,
            alpha: self.cfg.precursor_alpha,
            component_cap: None,
        };
        let input = PrecursorInput {
            forest: &forest,
            g: &g,
            fixed: &fixed,
            f: &f,
            b1: &b1p,
            b2: &b2p,
        };
        let out = random_greedy_embed(&input, &pcfg, &mut rng.child(1)).map_err(|e| stage_err("precursor", e))?;
        let na = cl[0].len();
        for (i, &v) in members.iter().enumerate() {
            if emb.get(v).is_none() {
                let x = out.map[i] as usize;
                let hx = if x < na { cl[0][x] } else { cl[1][x - na] };
                emb.place(v, hx)?;
            }
        }

        let free = |emb: &PartialEmbedding, side: usize| -> Vec<Vertex> {
            cl[side].iter().copied().filter(|&x| !emb.is_occupied(x)).collect()
        };
        let cap = self.tree.max_degree();
        let done = rng.child(2);
        match sp.case {
            PairCase::Leaves => {
                for (step, side) in [0usize, 1].into_iter().enumerate() {
                    let kids: Vec<(Vertex, Vertex)> = sp
                        .f2
                        .iter()
                        .filter(|&&v| side_of(v) == side)
                        .map(|&v| (self.tree.parent(v).expect("leaf"), v))
                        .collect();
                    let targets = free(emb, side);
                    complete_stars(self.host, emb, &kids, &targets, cap, self.cfg, &done.child(step as u64))?;
                }
            }
            PairCase::SecondaryLeft | PairCase::SecondaryRight => {
                let side = usize::from(sp.case == PairCase::SecondaryRight);
                let sec: Vec<Vertex> = sp.f2.iter().copied().filter(|&v| side_of(v) == side).collect();
                let first: Vec<(Vertex, Vertex)> = sec.iter().map(|&s| (self.tree.parent(s).expect("non-root"), s)).collect();
                let targets = free(emb, side);
                complete_stars(self.host, emb, &first, &targets, cap, self.cfg, &done.child(0))?;
                let second: Vec<(Vertex, Vertex)> = sec
                    .iter()
                    .flat_map(|&s| self.tree.children(s).iter().map(move |&c| (s, c)))
                    .collect();
                let targets = free(emb, 1 - side);
                complete_stars(self.host, emb, &second, &targets, cap, self.cfg, &done.child(1))?;
            }
            PairCase::Paths => {
                let m = sp.paths.len();
                let v1: Vec<Vertex> = sp.paths.iter().map(|q| emb.get(q[0]).expect("end embedded")).collect();
                let v4: Vec<Vertex> = sp.paths.iter().map(|q| emb.get(q[3]).expect("end embedded")).collect();
                let v2 = free(emb, 1);
                let v3 = free(emb, 0);
                if v2.len() != m || v3.len() != m {
                    return Err(Error::invalid("free space does not match the path count"));
                }
                let mut four = PartiteSystem::new(4, m, vec![BipartiteGraph::new(m, m); 6], vec![0.0; 6])?;
                four.set_pair(0, 1, host_pair(self.host, &v1, &v2), self.dec.density);
                four.set_pair(1, 2, host_pair(self.host, &v2, &v3), self.dec.density);
                four.set_pair(2, 3, host_pair(self.host, &v3, &v4), self.dec.density);
                let pi: Vec<Vertex> = (0..m as Vertex).collect();
                let mut last = None;
                let mut found = None;
                for t in 0..self.cfg.path_retries {
                    match sample_path_system(&four, &pi, &self.cfg.path, &done.child(t as u64)) {
                        Ok(paths) => {
                            found = Some(paths);
                            break;
                        }
                        Err(e) => last = Some(e),
                    }
                }
                let paths = found.ok_or_else(|| {
                    Error::stage("paths", format!("path system not found: {last:?}"))
                })?;
                for (i, q) in sp.paths.iter().enumerate() {
                    emb.place(q[1], v2[paths[i][1] as usize])?;
                    emb.place(q[2], v3[paths[i][2] as usize])?;
                }
            }
        }
        Ok(PairTrace {
            case: sp.case,
            buffer_draws,
            precursor: out.trace,
        })
    }

    fn run(&self, rng: &SeededRng, trace: &mut TreeTrace) -> Result<Vec<Vertex>> {
        let mut emb = PartialEmbedding::new(self.tree.n(), self.host.n());
        self.place_bridge(&mut emb, trace, &mut rng.child(0))?;
        for p in 0..self.dec.pairs.len() {
            let pt = self.embed_pair(p, &mut emb, &rng.child(1 + p as u64))?;
            trace.pairs.push(pt);
        }
        emb.check_total(self.tree, self.host)?;
        Ok(emb.to_vec().expect("total"))
    }
}

/// Spread embedding of `tree` into `host` along a cluster decomposition.
///
/// Bridge vertices are placed first by random greedy. Each cluster pair then
/// gets disjoint buffers `B1`, `B2` on both sides (sized by `F¹` and `F²`),
/// the buffered greedy stage embeds everything but `F²`, and `F²` is
/// completed by spread star matchings (leaves, secondary leaves) or a spread
/// path system. A failed stage restarts the whole run on a fresh stream:
/// attempt `t` uses `rng.child(t)`.
pub fn embed_tree(
    tree: &RootedTree,
    host: &Graph,
    dec: &ClusterDecomposition,
    cfg: &TreeConfig,
    rng: &SeededRng,
) -> Result<TreeEmbedding> {
    if host.n() != tree.n() {
        return Err(Error::invalid("host and tree sizes differ"));
    }
    dec.validate(tree, Some(host))?;
    let mut cluster_of_host = vec![0; host.n()];
    for (c, cl) in dec.clusters.iter().enumerate() {
        for &x in cl {
            cluster_of_host[x as usize] = c;
        }
    }
    let att = Attempt {
        tree,
        host,
        dec,
        cfg,
        cluster_of_host,
    };
    let mut failures = Vec::new();
    for t in 0..cfg.run_retries {
        let mut trace = TreeTrace {
            bridge_floor: dec.density * tree.n() as f64 / (8 * dec.clusters.len()) as f64,
            ..Default::default()
        };
        match att.run(&rng.child(t as u64), &mut trace) {
            Ok(map) => {
                trace.attempts = t + 1;
                trace.failures = failures;
                return Ok(TreeEmbedding { map, trace });
            }
            Err(e @ Error::Invalid(_)) => return Err(e),
            Err(e) => failures.push(e.to_string()),
        }
    }
    Err(Error::RetriesExhausted {
        attempts: cfg.run_retries,
        reason: failures.last().cloned().unwrap_or_default(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseConfig {
    pub star_d: usize,
    pub star_retries: u32,
    pub run_retries: u32,
}

impl Default for DenseConfig {
    fn default() -> Self {
        Self {
            star_d: 16,
            star_retries: 20,
            run_retries: 50,
        }
    }
}

/// Single-stage embedding for dense hosts without a decomposition: internal
/// vertices by random greedy in breadth-first order (each needs enough free
/// neighbours for its children), then all leaves at once by a spread star
/// matching onto the remaining vertices.
pub fn embed_tree_dense(tree: &RootedTree, host: &Graph, cfg: &DenseConfig, rng: &SeededRng) -> Result<TreeEmbedding> {
    let n = tree.n();
    if host.n() != n {
        return Err(Error::invalid("host and tree sizes differ"));
    }
    let mut failures = Vec::new();
    'attempt: for t in 0..cfg.run_retries {
        let arng = rng.child(t as u64);
        let mut r = arng.child(0);
        let mut emb = PartialEmbedding::new(n, n);
        let mut trace = TreeTrace::default();
        let internal: Vec<Vertex> = tree
            .bfs_order()
            .into_iter()
            .filter(|&v| v == tree.root() || !tree.is_leaf(v))
            .collect();
        for v in internal {
            let kids = tree.children(v).len();
            let free_deg = |x: Vertex, emb: &PartialEmbedding| host.neighbors(x).filter(|&y| !emb.is_occupied(y)).count();
            let cands: Vec<Vertex> = match tree.parent(v) {
                None => (0..n as Vertex).filter(|&x| host.degree(x) >= kids).collect(),
                Some(p) => {
                    let px = emb.get(p).expect("parent first");
                    host.neighbors(px)
                        .filter(|&x| !emb.is_occupied(x) && free_deg(x, &emb) >= kids)
                        .collect()
                }
            };
            trace.bridge_candidates.push(cands.len());
            match pick(&cands, &mut r) {
                Some(x) => emb.place(v, x)?,
                None => {
                    failures.push(format!("greedy: no candidate for vertex {v}"));
                    continue 'attempt;
                }
            }
        }
        let kids: Vec<(Vertex, Vertex)> = (0..n as Vertex)
            .filter(|&v| v != tree.root() && tree.is_leaf(v))
            .map(|v| (tree.parent(v).expect("non-root"), v))
            .collect();
        if !kids.is_empty() {
            let targets: Vec<Vertex> = (0..n as Vertex).filter(|&x| !emb.is_occupied(x)).collect();
            let tcfg = TreeConfig {
                star_d: cfg.star_d,
                star_retries: cfg.star_retries,
                ..TreeConfig::default()
            };
            if let Err(e) = complete_stars(host, &mut emb, &kids, &targets, tree.max_degree(), &tcfg, &arng.child(1)) {
                failures.push(e.to_string());
                continue;
            }
        }
        emb.check_total(tree, host)?;
        trace.attempts = t + 1;
        trace.failures = failures;
        return Ok(TreeEmbedding {
            map: emb.to_vec().expect("total"),
            trace,
        });
    }
    Err(Error::RetriesExhausted {
        attempts: cfg.run_retries,
        reason: failures.last().cloned().unwrap_or_default(),
    })
}
