//! Cluster decompositions of a tree against a host made of regular pairs.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::RootedTree;
use crate::bipartite::BipartiteGraph;
use crate::error::{Error, Result};
use crate::hypergraph::{Graph, Vertex};
use crate::regularity::{certify_super_regular, GeneratorConfig};
use crate::rng::SeededRng;

/// How the special sets `F¹`, `F²` of a cluster pair are formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairCase {
    /// `F²`: leaves, split evenly between the two clusters; `F¹`: their parents.
    Leaves,
    /// `F²`: secondary leaves in the left cluster and their children; `F¹`: their parents.
    SecondaryLeft,
    /// As [`PairCase::SecondaryLeft`] with the right cluster.
    SecondaryRight,
    /// `F²`: inner vertices of disjoint length-3 paths; `F¹`: their ends.
    Paths,
}

impl PairCase {
    pub const ALL: [PairCase; 4] = [
        PairCase::Leaves,
        PairCase::SecondaryLeft,
        PairCase::SecondaryRight,
        PairCase::Paths,
    ];
}

impl std::str::FromStr for PairCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaves" => Ok(Self::Leaves),
            "secondary-left" => Ok(Self::SecondaryLeft),
            "secondary-right" => Ok(Self::SecondaryRight),
            "paths" => Ok(Self::Paths),
            _ => Err(Error::invalid(format!("unknown pair case `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialSets {
    pub case: PairCase,
    pub f1: Vec<Vertex>,
    pub f2: Vec<Vertex>,
    /// For [`PairCase::Paths`]: `(a, b, c, e)` with `a` in the left cluster.
    pub paths: Vec<[Vertex; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDecomposition {
    /// Host vertices of each cluster.
    pub clusters: Vec<Vec<Vertex>>,
    /// The matching of clusters into pairs `(left, right)`.
    pub pairs: Vec<(usize, usize)>,
    /// Cluster of each tree vertex.
    pub assignment: Vec<usize>,
    /// Bridge set `S`.
    pub bridge: Vec<Vertex>,
    /// Special sets, one per pair.
    pub special: Vec<SpecialSets>,
    /// Density of the host pairs.
    pub density: f64,
    pub alpha: f64,
    pub k_bound: usize,
}

impl ClusterDecomposition {
    /// Pair index of a cluster and whether it is the left cluster.
    pub fn pair_of(&self, cluster: usize) -> (usize, bool) {
        self.pairs
            .iter()
            .enumerate()
            .find_map(|(i, &(l, r))| {
                if l == cluster {
                    Some((i, true))
                } else if r == cluster {
                    Some((i, false))
                } else {
                    None
                }
            })
            .expect("every cluster is matched")
    }

    /// Tree vertices assigned to the clusters of pair `p`.
    pub fn pair_vertices(&self, p: usize) -> Vec<Vertex> {
        let (l, r) = self.pairs[p];
        (0..self.assignment.len() as Vertex)
            .filter(|&v| {
                let c = self.assignment[v as usize];
                c == l || c == r
            })
            .collect()
    }

    pub fn in_bridge(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &s in &self.bridge {
            m[s as usize] = true;
        }
        m
    }

    /// Checks the decomposition contract against `tree` and, if given, the host.
    pub fn validate(&self, tree: &RootedTree, host: Option<&Graph>) -> Result<()> {
        let n = tree.n();
        let m = self.clusters.len();
        if self.assignment.len() != n {
            return Err(Error::invalid("assignment does not cover the tree"));
        }
        let mut load = vec![0usize; m];
        for &c in &self.assignment {
            *load.get_mut(c).ok_or_else(|| Error::invalid(format!("cluster {c} does not exist")))? += 1;
        }
        let mut seen = vec![false; n];
        for (c, cl) in self.clusters.iter().enumerate() {
            if load[c] != cl.len() {
                return Err(Error::invalid(format!(
                    "cluster {c} holds {} host vertices but {} tree vertices",
                    cl.len(),
                    load[c]
                )));
            }
            if (cl.len() as f64) < n as f64 / (2 * m) as f64 || cl.len() as f64 > 2.0 * n as f64 / m as f64 {
                return Err(Error::invalid(format!("cluster {c} of size {} out of range", cl.len())));
            }
            for &x in cl {
                if x as usize >= n || std::mem::replace(&mut seen[x as usize], true) {
                    return Err(Error::invalid("clusters do not partition the host"));
                }
            }
        }
        let mut matched = vec![0; m];
        for &(l, r) in &self.pairs {
            if l >= m || r >= m {
                return Err(Error::invalid("pair names a missing cluster"));
            }
            matched[l] += 1;
            matched[r] += 1;
        }
        if matched.iter().any(|&x| x != 1) {
            return Err(Error::invalid("pairs are not a perfect matching of the clusters"));
        }
        if self.bridge.len() > self.k_bound {
            return Err(Error::invalid(format!(
                "|S| = {} exceeds K = {}",
                self.bridge.len(),
                self.k_bound
            )));
        }
        let in_s = self.in_bridge(n);
        if in_s.iter().filter(|&&x| x).count() != self.bridge.len() {
            return Err(Error::invalid("S has repeats"));
        }
        let cluster_of_host = {
            let mut c = vec![0; n];
            for (i, cl) in self.clusters.iter().enumerate() {
                for &x in cl {
                    c[x as usize] = i;
                }
            }
            c
        };
        for (u, v) in tree.edges() {
            let (cu, cv) = (self.assignment[u as usize], self.assignment[v as usize]);
            if cu == cv {
                return Err(Error::invalid(format!("edge {u}-{v} inside cluster {cu}")));
            }
            let matched = self.pairs.iter().any(|&(l, r)| (l, r) == (cu, cv) || (r, l) == (cu, cv));
            if !matched && !(in_s[u as usize] && in_s[v as usize]) {
                return Err(Error::invalid(format!(
                    "edge {u}-{v} crosses unmatched clusters outside S"
                )));
            }
            if let Some(g) = host {
                let joined = self.clusters[cu]
                    .iter()
                    .any(|&x| g.neighbors(x).any(|y| cluster_of_host[y as usize] == cv));
                if !joined {
                    return Err(Error::invalid(format!("clusters {cu} and {cv} are not joined in the host")));
                }
            }
        }
        if self.special.len() != self.pairs.len() {
            return Err(Error::invalid("one special-set record per pair required"));
        }
        for (p, sp) in self.special.iter().enumerate() {
            self.validate_special(tree, p, sp, &in_s)?;
        }
        Ok(())
    }

    fn validate_special(&self, tree: &RootedTree, p: usize, sp: &SpecialSets, in_s: &[bool]) -> Result<()> {
        let (left, right) = self.pairs[p];
        let bad = |msg: &str| Error::invalid(format!("pair {p} ({:?}): {msg}", sp.case));
        let in_pair = |v: Vertex| {
            let c = self.assignment[v as usize];
            c == left || c == right
        };
        let f1: BTreeSet<Vertex> = sp.f1.iter().copied().collect();
        let f2: BTreeSet<Vertex> = sp.f2.iter().copied().collect();
        if f1.len() != sp.f1.len() || f2.len() != sp.f2.len() || !f1.is_disjoint(&f2) {
            return Err(bad("F¹ and F² must be repeat-free and disjoint"));
        }
        if f2.is_empty() {
            return Err(bad("F² is empty"));
        }
        if sp.f1.iter().chain(&sp.f2).any(|&v| !in_pair(v) || in_s[v as usize]) {
            return Err(bad("special vertex outside the pair or inside S"));
        }
        let is_left = |v: Vertex| self.assignment[v as usize] == left;
        match sp.case {
            PairCase::Leaves => {
                let parents: BTreeSet<Vertex> = f2.iter().filter_map(|&v| tree.parent(v)).collect();
                if f2.iter().any(|&v| !tree.is_leaf(v) || tree.parent(v).is_none()) || parents != f1 {
                    return Err(bad("F² must be leaves and F¹ their parents"));
                }
                let l = f2.iter().filter(|&&v| is_left(v)).count();
                if 2 * l != f2.len() {
                    return Err(bad("leaves are not split evenly"));
                }
            }
            PairCase::SecondaryLeft | PairCase::SecondaryRight => {
                let want_left = sp.case == PairCase::SecondaryLeft;
                let sec: Vec<Vertex> = f2.iter().copied().filter(|&v| is_left(v) == want_left).collect();
                let mut expect: BTreeSet<Vertex> = sec.iter().copied().collect();
                for &s in &sec {
                    if !tree.is_secondary_leaf(s) || tree.parent(s).is_none() {
                        return Err(bad("not a secondary leaf"));
                    }
                    expect.extend(tree.children(s));
                }
                let parents: BTreeSet<Vertex> = sec.iter().filter_map(|&s| tree.parent(s)).collect();
                if expect != f2 || parents != f1 {
                    return Err(bad("F² must be secondary leaves with children, F¹ their parents"));
                }
            }
            PairCase::Paths => {
                let mut ends = BTreeSet::new();
                let mut inner = BTreeSet::new();
                for &[a, b, c, e] in &sp.paths {
                    let adj = |x: Vertex, y: Vertex| tree.parent(x) == Some(y) || tree.parent(y) == Some(x);
                    if !(adj(a, b) && adj(b, c) && adj(c, e)) || tree.degree(b) != 2 || tree.degree(c) != 2 {
                        return Err(bad("not a length-3 path with degree-2 inner vertices"));
                    }
                    if !is_left(a) {
                        return Err(bad("path must start in the left cluster"));
                    }
                    ends.extend([a, e]);
                    inner.extend([b, c]);
                }
                if ends.len() != 2 * sp.paths.len() || inner.len() != 2 * sp.paths.len() || ends != f1 || inner != f2 {
                    return Err(bad("paths must be disjoint with F¹ = ends and F² = inner vertices"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Number of clusters `M` (even).
    pub clusters: usize,
    /// Edge density of every host pair.
    pub density: f64,
    pub alpha: f64,
    pub k_bound: usize,
    /// Case per pair, cycled; empty picks the first feasible case per pair,
    /// rotating the starting case with the pair index.
    pub cases: Vec<PairCase>,
    pub generator: GeneratorConfig,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            clusters: 4,
            density: 0.75,
            alpha: 0.05,
            k_bound: 8,
            cases: Vec::new(),
            generator: GeneratorConfig::default(),
        }
    }
}

/// Cuts `parts - 1` tree edges, each time choosing the edge whose lower
/// side (within its current piece) is closest to `n / parts`. Returns the
/// piece index of every vertex and the cut edges.
fn split_tree(tree: &RootedTree, parts: usize) -> (Vec<usize>, Vec<(Vertex, Vertex)>) {
    let n = tree.n();
    let target = n as f64 / parts as f64;
    let mut is_piece_root = vec![false; n];
    is_piece_root[0] = true;
    let mut cuts = Vec::new();
    let order = tree.bfs_order();
    for _ in 1..parts {
        let mut size = vec![1usize; n];
        for &v in order.iter().rev() {
            if let Some(p) = tree.parent(v) {
                if !is_piece_root[v as usize] {
                    size[p as usize] += size[v as usize];
                }
            }
        }
        let best = (1..n)
            .filter(|&v| !is_piece_root[v])
            .min_by(|&a, &b| {
                let da = (size[a] as f64 - target).abs();
                let db = (size[b] as f64 - target).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            });
        let Some(v) = best else { break };
        is_piece_root[v] = true;
        cuts.push((tree.parent(v as Vertex).expect("non-root"), v as Vertex));
    }
    let mut piece = vec![0; n];
    let mut next = 0;
    for &v in &order {
        if is_piece_root[v as usize] {
            piece[v as usize] = next;
            next += 1;
        } else {
            piece[v as usize] = piece[tree.parent(v).expect("non-root") as usize];
        }
    }
    (piece, cuts)
}

fn leaves_case(
    tree: &RootedTree,
    members: &[Vertex],
    is_left: &dyn Fn(Vertex) -> bool,
    in_s: &[bool],
    per_side: usize,
    rng: &mut SeededRng,
) -> Option<SpecialSets> {
    let mut f2 = Vec::new();
    for want_left in [true, false] {
        let mut cand: Vec<Vertex> = members
            .iter()
            .copied()
            .filter(|&v| {
                is_left(v) == want_left
                    && tree.is_leaf(v)
                    && !in_s[v as usize]
                    && tree.parent(v).is_some_and(|p| !in_s[p as usize])
            })
            .collect();
        if cand.len() < per_side {
            return None;
        }
        cand.shuffle(rng);
        f2.extend_from_slice(&cand[..per_side]);
    }
    let f1: BTreeSet<Vertex> = f2.iter().map(|&v| tree.parent(v).expect("leaf has a parent")).collect();
    f2.sort_unstable();
    Some(SpecialSets {
        case: PairCase::Leaves,
        f1: f1.into_iter().collect(),
        f2,
        paths: Vec::new(),
    })
}

fn secondary_case(
    tree: &RootedTree,
    members: &[Vertex],
    left_side: bool,
    is_left: &dyn Fn(Vertex) -> bool,
    in_s: &[bool],
    count: usize,
    rng: &mut SeededRng,
) -> Option<SpecialSets> {
    let mut cand: Vec<Vertex> = members
        .iter()
        .copied()
        .filter(|&v| {
            is_left(v) == left_side
                && tree.is_secondary_leaf(v)
                && !in_s[v as usize]
                && tree.children(v).iter().all(|&c| !in_s[c as usize])
                && tree.parent(v).is_some_and(|p| !in_s[p as usize])
        })
        .collect();
    if cand.len() < count {
        return None;
    }
    cand.shuffle(rng);
    let sec = &cand[..count];
    let mut f2: Vec<Vertex> = sec.to_vec();
    for &s in sec {
        f2.extend_from_slice(tree.children(s));
    }
    f2.sort_unstable();
    let f1: BTreeSet<Vertex> = sec.iter().map(|&s| tree.parent(s).expect("non-root")).collect();
    Some(SpecialSets {
        case: if left_side {
            PairCase::SecondaryLeft
        } else {
            PairCase::SecondaryRight
        },
        f1: f1.into_iter().collect(),
        f2,
        paths: Vec::new(),
    })
}

fn paths_case(
    tree: &RootedTree,
    members: &[Vertex],
    is_left: &dyn Fn(Vertex) -> bool,
    in_s: &[bool],
    count: usize,
    rng: &mut SeededRng,
) -> Option<SpecialSets> {
    let mut inner: Vec<(Vertex, Vertex)> = members
        .iter()
        .copied()
        .filter_map(|c| tree.parent(c).map(|b| (b, c)))
        .filter(|&(b, c)| tree.degree(b) == 2 && tree.degree(c) == 2 && !in_s[b as usize] && !in_s[c as usize])
        .collect();
    inner.shuffle(rng);
    let mut used = vec![false; tree.n()];
    let mut paths = Vec::new();
    for (b, c) in inner {
        if paths.len() == count {
            break;
        }
        let a = tree.neighbors(b).find(|&x| x != c).expect("degree 2");
        let e = tree.neighbors(c).find(|&x| x != b).expect("degree 2");
        let path = [a, b, c, e];
        if path.iter().any(|&x| used[x as usize] || in_s[x as usize]) {
            continue;
        }
        for &x in &path {
            used[x as usize] = true;
        }
        paths.push(if is_left(a) { path } else { [e, c, b, a] });
    }
    if paths.len() < count {
        return None;
    }
    let mut f1: Vec<Vertex> = paths.iter().flat_map(|p| [p[0], p[3]]).collect();
    let mut f2: Vec<Vertex> = paths.iter().flat_map(|p| [p[1], p[2]]).collect();
    f1.sort_unstable();
    f2.sort_unstable();
    Some(SpecialSets {
        case: PairCase::Paths,
        f1,
        f2,
        paths,
    })
}

/// Independent edges of density `d` between two vertex sets, resampled until
/// the pair passes the generator's super-regularity check.
fn certified_pair(na: usize, nb: usize, d: f64, gen: &GeneratorConfig, rng: &mut SeededRng) -> Result<BipartiteGraph> {
    let params = gen.params(d);
    for _ in 0..gen.max_resamples {
        let g = BipartiteGraph::random(na, nb, d, rng);
        if certify_super_regular(&g, &params)?.passed {
            return Ok(g);
        }
    }
    Err(Error::RetriesExhausted {
        attempts: gen.max_resamples,
        reason: format!("no certified {na} x {nb} pair at density {d}"),
    })
}

/// A host graph made of certified regular pairs together with a cluster
/// decomposition of `tree` against it.
///
/// The tree is cut into `M/2` connected pieces; each piece is 2-coloured by
/// depth parity and its colour classes become a matched cluster pair of the
/// same sizes. Endpoints of the cut edges form `S`, and the clusters they
/// join are linked by a random pair as well.
pub fn synthetic_decomposition(
    tree: &RootedTree,
    cfg: &SyntheticConfig,
    rng: &mut SeededRng,
) -> Result<(Graph, ClusterDecomposition)> {
    let n = tree.n();
    let m = cfg.clusters;
    if m < 2 || m % 2 == 1 {
        return Err(Error::invalid("the cluster count must be even and at least 2"));
    }
    if n < 2 * m {
        return Err(Error::invalid(format!("{n} tree vertices cannot fill {m} clusters")));
    }
    let (piece, cuts) = split_tree(tree, m / 2);
    let depth = tree.depths();
    let mut assignment = vec![0; n];
    for v in 0..n {
        assignment[v] = 2 * piece[v] + depth[v] % 2;
    }
    let mut sizes = vec![0usize; m];
    for &c in &assignment {
        sizes[c] += 1;
    }
    if let Some(c) = (0..m).find(|&c| (sizes[c] as f64) < n as f64 / (2 * m) as f64 || sizes[c] as f64 > 2.0 * n as f64 / m as f64) {
        return Err(Error::invalid(format!(
            "tree shape incompatible: cluster {c} would hold {} of {n} vertices",
            sizes[c]
        )));
    }
    let bridge: Vec<Vertex> = cuts
        .iter()
        .flat_map(|&(p, c)| [p, c])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if bridge.len() > cfg.k_bound {
        return Err(Error::invalid(format!(
            "tree shape incompatible: {} bridge vertices exceed K = {}",
            bridge.len(),
            cfg.k_bound
        )));
    }
    let mut in_s = vec![false; n];
    for &s in &bridge {
        in_s[s as usize] = true;
    }

    let mut clusters = Vec::with_capacity(m);
    let mut next = 0 as Vertex;
    for &s in &sizes {
        clusters.push((next..next + s as Vertex).collect::<Vec<_>>());
        next += s as Vertex;
    }
    let pairs: Vec<(usize, usize)> = (0..m / 2).map(|j| (2 * j, 2 * j + 1)).collect();

    let mut special = Vec::with_capacity(pairs.len());
    for (j, &(left, _)) in pairs.iter().enumerate() {
        let members: Vec<Vertex> = (0..n as Vertex).filter(|&v| piece[v as usize] == j).collect();
        let is_left = |v: Vertex| assignment[v as usize] == left;
        let base = ((cfg.alpha * sizes[left] as f64).round() as usize).max(1);
        let per_side = base.div_ceil(2).max(1);
        let order: Vec<PairCase> = if cfg.cases.is_empty() {
            (0..4).map(|i| PairCase::ALL[(j + i) % 4]).collect()
        } else {
            vec![cfg.cases[j % cfg.cases.len()]]
        };
        let mut r = rng.child(j as u64);
        let chosen = order.iter().find_map(|&case| match case {
            PairCase::Leaves => leaves_case(tree, &members, &is_left, &in_s, per_side, &mut r),
            PairCase::SecondaryLeft => secondary_case(tree, &members, true, &is_left, &in_s, base, &mut r),
            PairCase::SecondaryRight => secondary_case(tree, &members, false, &is_left, &in_s, base, &mut r),
            PairCase::Paths => paths_case(tree, &members, &is_left, &in_s, base, &mut r),
        });
        special.push(chosen.ok_or_else(|| {
            Error::invalid(format!("tree shape incompatible with case mix {order:?} in pair {j}"))
        })?);
    }

    let mut host = Graph::new(n);
    let mut slot = 0u64;
    let mut link = |ca: usize, cb: usize, host: &mut Graph| -> Result<()> {
        slot += 1;
        let g = certified_pair(
            clusters[ca].len(),
            clusters[cb].len(),
            cfg.density,
            &cfg.generator,
            &mut rng.child(1000 + slot),
        )?;
        for (a, b) in g.edges() {
            host.add_edge(clusters[ca][a as usize], clusters[cb][b as usize]);
        }
        Ok(())
    };
    for &(l, r) in &pairs {
        link(l, r, &mut host)?;
    }
    let mut linked = BTreeSet::new();
    for &(p, c) in &cuts {
        let (cp, cc) = (assignment[p as usize], assignment[c as usize]);
        let key = (cp.min(cc), cp.max(cc));
        if linked.insert(key) {
            link(key.0, key.1, &mut host)?;
        }
    }
    let dec = ClusterDecomposition {
        clusters,
        pairs,
        assignment,
        bridge,
        special,
        density: cfg.density,
        alpha: cfg.alpha,
        k_bound: cfg.k_bound,
    };
    dec.validate(tree, Some(&host))?;
    Ok((host, dec))
}
