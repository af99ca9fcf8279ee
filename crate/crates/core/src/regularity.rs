//! Densities, regularity certificates, pair surgery and synthetic
//! super-regular systems.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bipartite::BipartiteGraph;
use crate::error::{Error, Result};
use crate::hypergraph::{Graph, Vertex};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Exhaustive certification is refused above this many vertices per side.
pub const EXHAUSTIVE_CAP: usize = 16;

/// Default largest `ε / d` ratio accepted where a proof assumes `ε ≪ d`.
pub const DEFAULT_EPS_RATIO: f64 = 0.1;

/// `d(X1, X2) = e(X1, X2) / (|X1| |X2|)` for `X1 ⊆ A`, `X2 ⊆ B`.
pub fn pair_density<T: Scalar>(g: &BipartiteGraph, x1: &[Vertex], x2: &[Vertex]) -> Result<T> {
    if x1.is_empty() || x2.is_empty() {
        return Err(Error::invalid("density of an empty vertex set"));
    }
    let mut in_x2 = vec![false; g.nb()];
    for &b in x2 {
        in_x2[b as usize] = true;
    }
    let e: usize = x1
        .iter()
        .map(|&a| g.neighbors_a(a).iter().filter(|&&b| in_x2[b as usize]).count())
        .sum();
    Ok(T::from_ratio(e as i128, (x1.len() * x2.len()) as i128))
}

/// [`pair_density`] for two disjoint vertex sets of an ordinary graph.
pub fn graph_pair_density<T: Scalar>(g: &Graph, x1: &[Vertex], x2: &[Vertex]) -> Result<T> {
    if x1.is_empty() || x2.is_empty() {
        return Err(Error::invalid("density of an empty vertex set"));
    }
    if x1.iter().any(|v| x2.contains(v)) {
        return Err(Error::invalid("density of overlapping vertex sets"));
    }
    let e: usize = x1
        .iter()
        .map(|&u| x2.iter().filter(|&&v| g.has_edge(u, v)).count())
        .sum();
    Ok(T::from_ratio(e as i128, (x1.len() * x2.len()) as i128))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularityMethod {
    /// Every qualifying subset pair; exact but exponential.
    Exhaustive,
    /// Normalised codegree deviation, polynomial time.
    Codegree,
}

/// Subset pair attaining the reported deviation (exhaustive mode).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityWitness {
    pub x1: Vec<Vertex>,
    pub x2: Vec<Vertex>,
    pub deviation: f64,
}

/// Measured regularity data for one bipartite pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCertificate<T> {
    pub method: RegularityMethod,
    /// `ε` the score was computed for (sets the subset size floor).
    pub epsilon: f64,
    pub density: T,
    /// Exhaustive: worst `|d(A1,A2) - d(X1,X2)|`. Codegree: normalised score `s`.
    pub epsilon_hat: f64,
    /// Smallest `deg(v) / |other side|` over both sides.
    pub min_degree_fraction: f64,
    pub witness: Option<RegularityWitness>,
    /// Codegree mode: `s^{1/4} / ε`, a rigorous upper bound on the exhaustive score.
    pub exhaustive_bound: Option<f64>,
}

impl<T> PairCertificate<T> {
    /// Whether the score clears `ε` (for codegree scores this is the
    /// calibrated pass rule, see [`codegree_score`]).
    pub fn is_regular(&self) -> bool {
        self.epsilon_hat <= self.epsilon
    }
}

fn min_degree_fraction(g: &BipartiteGraph) -> (f64, Option<(Side, Vertex)>) {
    let mut best = (f64::INFINITY, None);
    for a in 0..g.na() as Vertex {
        let f = g.neighbors_a(a).len() as f64 / g.nb() as f64;
        if f < best.0 {
            best = (f, Some((Side::A, a)));
        }
    }
    for b in 0..g.nb() as Vertex {
        let f = g.neighbors_b(b).len() as f64 / g.na() as f64;
        if f < best.0 {
            best = (f, Some((Side::B, b)));
        }
    }
    best
}

fn min_subset_size(eps: f64, n: usize) -> usize {
    ((eps * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Exhaustive regularity score with a witness.
///
/// For each `X1`, the extreme densities over `|X2| = t` come from the `t`
/// largest and `t` smallest values of `|N(b) ∩ X1|`, so only `A` is enumerated.
fn exhaustive_score(g: &BipartiteGraph, eps: f64) -> (f64, Option<RegularityWitness>) {
    let (na, nb) = (g.na(), g.nb());
    let d = g.num_edges() as f64 / (na * nb) as f64;
    let (t1, t2) = (min_subset_size(eps, na), min_subset_size(eps, nb));
    let nbr_mask: Vec<u32> = (0..nb as Vertex)
        .map(|b| g.neighbors_b(b).iter().fold(0u32, |m, &a| m | (1 << a)))
        .collect();
    let mut best = (0.0f64, None::<(u32, Vec<usize>)>);
    let mut counts: Vec<(u32, usize)> = vec![(0, 0); nb];
    for mask in 1u32..(1u32 << na) {
        let s1 = mask.count_ones() as usize;
        if s1 < t1 {
            continue;
        }
        for (b, slot) in counts.iter_mut().enumerate() {
            *slot = ((nbr_mask[b] & mask).count_ones(), b);
        }
        counts.sort_unstable_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        let (mut top, mut bottom) = (0u32, 0u32);
        for t in 1..=nb {
            top += counts[t - 1].0;
            bottom += counts[nb - t].0;
            if t < t2 {
                continue;
            }
            let denom = (s1 * t) as f64;
            let hi = (top as f64 / denom - d).abs();
            let lo = (bottom as f64 / denom - d).abs();
            if hi > best.0 + 1e-12 {
                best = (hi, Some((mask, counts[..t].iter().map(|c| c.1).collect())));
            }
            if lo > best.0 + 1e-12 {
                best = (lo, Some((mask, counts[nb - t..].iter().map(|c| c.1).collect())));
            }
        }
    }
    let witness = best.1.map(|(mask, mut x2)| {
        x2.sort_unstable();
        RegularityWitness {
            x1: (0..na as Vertex).filter(|&a| mask & (1 << a) != 0).collect(),
            x2: x2.into_iter().map(|b| b as Vertex).collect(),
            deviation: best.0,
        }
    });
    (best.0, witness)
}

/// Normalised codegree deviation of a pair, maximised over both sides:
///
/// `s = Σ_{u,v ∈ A} |Σ_{b ∈ B} (M_ub - d)(M_vb - d)| / (|A|² |B|)`.
///
/// Computed exactly in integers after scaling by `|A||B|`. Writing `N = M - dJ`,
/// `‖N‖₂⁴ ≤ ‖NNᵀ‖_F² ≤ |B| Σ|NNᵀ| = s |A|²|B|²`, so every qualifying pair has
/// `|d - d(X1,X2)| ≤ ‖N‖₂ / sqrt(|X1||X2|) ≤ s^{1/4} / ε`.
pub fn codegree_score(g: &BipartiteGraph) -> f64 {
    fn one_side(rows: usize, cols: usize, adj: &dyn Fn(usize) -> Vec<Vertex>, e: i64) -> f64 {
        let scale = (rows * cols) as i64;
        let mut m = vec![-e; rows * cols];
        for u in 0..rows {
            for b in adj(u) {
                m[u * cols + b as usize] += scale;
            }
        }
        let mut total: i128 = 0;
        for u in 0..rows {
            let ru = &m[u * cols..(u + 1) * cols];
            for v in 0..rows {
                let rv = &m[v * cols..(v + 1) * cols];
                let dot: i128 = ru.iter().zip(rv).map(|(&x, &y)| x as i128 * y as i128).sum();
                total += dot.abs();
            }
        }
        let s2 = (scale as f64) * (scale as f64);
        total as f64 / s2 / ((rows * rows * cols) as f64)
    }
    let e = g.num_edges() as i64;
    let a = one_side(g.na(), g.nb(), &|u| g.neighbors_a(u as Vertex).to_vec(), e);
    let b = one_side(g.nb(), g.na(), &|u| g.neighbors_b(u as Vertex).to_vec(), e);
    a.max(b)
}

/// Regularity certificate for the pair `(A, B)` of `g`.
pub fn certify_regularity<T: Scalar>(
    g: &BipartiteGraph,
    eps: f64,
    method: RegularityMethod,
) -> Result<PairCertificate<T>> {
    if g.na() == 0 || g.nb() == 0 {
        return Err(Error::invalid("regularity of a pair with an empty side"));
    }
    let density = T::from_ratio(g.num_edges() as i128, (g.na() * g.nb()) as i128);
    let (mdf, _) = min_degree_fraction(g);
    match method {
        RegularityMethod::Exhaustive => {
            if g.na() > EXHAUSTIVE_CAP || g.nb() > EXHAUSTIVE_CAP {
                return Err(Error::precondition(format!(
                    "exhaustive regularity refused for {} x {} (cap {EXHAUSTIVE_CAP})",
                    g.na(),
                    g.nb()
                )));
            }
            let (score, witness) = exhaustive_score(g, eps);
            Ok(PairCertificate {
                method,
                epsilon: eps,
                density,
                epsilon_hat: score,
                min_degree_fraction: mdf,
                witness,
                exhaustive_bound: None,
            })
        }
        RegularityMethod::Codegree => {
            let s = codegree_score(g);
            Ok(PairCertificate {
                method,
                epsilon: eps,
                density,
                epsilon_hat: s,
                min_degree_fraction: mdf,
                witness: None,
                exhaustive_bound: Some(s.powf(0.25) / eps),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Target parameters for a `(d, ε, δ)`-super-regularity check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperRegularParams {
    pub d: f64,
    pub eps: f64,
    pub delta: f64,
    /// Accepted `|d(A, B) - d|`; exact equality is hopeless for random pairs.
    pub density_tol: f64,
    pub method: RegularityMethod,
}

impl SuperRegularParams {
    /// `(d, ε, δ)` with density tolerance `ε`, codegree method.
    pub fn new(d: f64, eps: f64, delta: f64) -> Self {
        Self {
            d,
            eps,
            delta,
            density_tol: eps,
            method: RegularityMethod::Codegree,
        }
    }

    /// `(d, ε)`-super-regular, i.e. `δ = d - ε`.
    pub fn standard(d: f64, eps: f64) -> Self {
        Self::new(d, eps, d - eps)
    }

    pub fn with_density_tol(mut self, tol: f64) -> Self {
        self.density_tol = tol;
        self
    }

    pub fn with_method(mut self, method: RegularityMethod) -> Self {
        self.method = method;
        self
    }
}

/// Outcome of [`certify_super_regular`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperRegularVerdict {
    pub passed: bool,
    pub density_ok: bool,
    pub regular: bool,
    pub degrees_ok: bool,
    /// Lowest-degree vertex, reported when the degree floor fails.
    pub worst_vertex: Option<(Side, Vertex)>,
    pub certificate: PairCertificate<f64>,
}

/// `(d, ε, δ)`-super-regularity: density within tolerance of `d`, regularity
/// score at most `ε`, and every vertex with at least `δ` of the other side.
pub fn certify_super_regular(
    g: &BipartiteGraph,
    params: &SuperRegularParams,
) -> Result<SuperRegularVerdict> {
    let cert = certify_regularity::<f64>(g, params.eps, params.method)?;
    let (_, worst) = min_degree_fraction(g);
    let floor_a = params.delta * g.nb() as f64 - 1e-9;
    let floor_b = params.delta * g.na() as f64 - 1e-9;
    let degrees_ok = (0..g.na() as Vertex).all(|a| g.neighbors_a(a).len() as f64 >= floor_a)
        && (0..g.nb() as Vertex).all(|b| g.neighbors_b(b).len() as f64 >= floor_b);
    let density_ok = (cert.density - params.d).abs() <= params.density_tol + 1e-12;
    let regular = cert.is_regular();
    Ok(SuperRegularVerdict {
        passed: density_ok && regular && degrees_ok,
        density_ok,
        regular,
        degrees_ok,
        worst_vertex: if degrees_ok { None } else { worst },
        certificate: cert,
    })
}

/// `r` disjoint parts of `n` vertices with bipartite graphs between pairs.
///
/// Vertex `j` of part `i` has global id `i * n + j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartiteSystem {
    r: usize,
    n: usize,
    /// Pair `(i, j)`, `i < j`, at index [`PartiteSystem::pair_slot`]; side `A` is part `i`.
    pairs: Vec<BipartiteGraph>,
    densities: Vec<f64>,
}

impl PartiteSystem {
    fn pair_slot(r: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < r);
        i * r - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Builds from the `r(r-1)/2` pair graphs in `(0,1), (0,2), …, (r-2,r-1)` order.
    pub fn new(r: usize, n: usize, pairs: Vec<BipartiteGraph>, densities: Vec<f64>) -> Result<Self> {
        let m = r * (r.saturating_sub(1)) / 2;
        if r < 2 || pairs.len() != m || densities.len() != m {
            return Err(Error::invalid(format!(
                "partite system with r = {r} needs {m} pairs and densities"
            )));
        }
        if pairs.iter().any(|p| p.na() != n || p.nb() != n) {
            return Err(Error::invalid("pair graphs must be n x n"));
        }
        Ok(Self {
            r,
            n,
            pairs,
            densities,
        })
    }

    pub fn complete(r: usize, n: usize) -> Self {
        let m = r * (r - 1) / 2;
        Self::new(r, n, vec![BipartiteGraph::complete(n, n); m], vec![1.0; m])
            .expect("consistent shapes")
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The graph between parts `i` and `j`, with part `i` as side `A`.
    pub fn pair(&self, i: usize, j: usize) -> BipartiteGraph {
        if i < j {
            self.pairs[Self::pair_slot(self.r, i, j)].clone()
        } else {
            self.pairs[Self::pair_slot(self.r, j, i)].transpose()
        }
    }

    pub fn pair_ref(&self, i: usize, j: usize) -> &BipartiteGraph {
        assert!(i < j, "pair_ref takes i < j");
        &self.pairs[Self::pair_slot(self.r, i, j)]
    }

    pub fn set_pair(&mut self, i: usize, j: usize, g: BipartiteGraph, density: f64) {
        let (g, i, j) = if i < j { (g, i, j) } else { (g.transpose(), j, i) };
        let s = Self::pair_slot(self.r, i, j);
        self.pairs[s] = g;
        self.densities[s] = density;
    }

    pub fn declared_density(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        self.densities[Self::pair_slot(self.r, i, j)]
    }

    /// Whether vertex `a` of part `i` is adjacent to vertex `b` of part `j`.
    pub fn adjacent(&self, i: usize, a: Vertex, j: usize, b: Vertex) -> bool {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.pairs[Self::pair_slot(self.r, i, j)].has_edge(a, b),
            std::cmp::Ordering::Greater => self.pairs[Self::pair_slot(self.r, j, i)].has_edge(b, a),
            std::cmp::Ordering::Equal => false,
        }
    }

    pub fn global(&self, part: usize, v: Vertex) -> Vertex {
        (part * self.n) as Vertex + v
    }

    pub fn local(&self, global: Vertex) -> (usize, Vertex) {
        (global as usize / self.n, global % self.n as Vertex)
    }

    /// The whole system as one graph on `r n` vertices.
    pub fn to_graph(&self) -> Graph {
        let mut g = Graph::new(self.r * self.n);
        for i in 0..self.r {
            for j in i + 1..self.r {
                for (a, b) in self.pair_ref(i, j).edges() {
                    g.add_edge(self.global(i, a), self.global(j, b));
                }
            }
        }
        g
    }

    /// Sub-system on parts `parts` (in that order).
    pub fn restrict_parts(&self, parts: &[usize]) -> PartiteSystem {
        let mut pairs = Vec::new();
        let mut dens = Vec::new();
        for (x, &i) in parts.iter().enumerate() {
            for &j in &parts[x + 1..] {
                pairs.push(self.pair(i, j));
                dens.push(self.declared_density(i, j));
            }
        }
        PartiteSystem::new(parts.len(), self.n, pairs, dens).expect("consistent restriction")
    }

    /// Sub-system on `subsets[i] ⊆ A_i` (equal sizes), relabelled in order.
    pub fn induced(&self, subsets: &[Vec<Vertex>]) -> Result<PartiteSystem> {
        if subsets.len() != self.r {
            return Err(Error::invalid("one subset per part required"));
        }
        let m = subsets[0].len();
        if subsets.iter().any(|s| s.len() != m) {
            return Err(Error::invalid("subsets must have equal sizes"));
        }
        let mut pairs = Vec::new();
        let mut dens = Vec::new();
        for i in 0..self.r {
            for j in i + 1..self.r {
                pairs.push(self.pair_ref(i, j).induced(&subsets[i], &subsets[j]));
                dens.push(self.declared_density(i, j));
            }
        }
        PartiteSystem::new(self.r, m, pairs, dens)
    }
}

/// Counting-lemma comparison for one pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingAudit {
    pub observed: u64,
    pub predicted: f64,
    pub band: (f64, f64),
    pub within_band: bool,
}

/// Homomorphism count of `pattern` (vertex `i` into `X_i ⊆ A_i`) against the
/// counting-lemma prediction `∏ d_ij ∏|X_i| ± C_H ε ∏|A_i|`.
pub fn counting_lemma_audit(
    system: &PartiteSystem,
    pattern: &Graph,
    subsets: &[Vec<Vertex>],
    eps: f64,
    c_h: f64,
) -> Result<CountingAudit> {
    let h = pattern.n();
    if h > 4 || h > system.r() || subsets.len() != h {
        return Err(Error::invalid(
            "pattern needs at most 4 vertices, one subset each, and enough parts",
        ));
    }
    let floor = eps * system.n() as f64 - 1e-9;
    if subsets.iter().any(|x| (x.len() as f64) < floor || x.is_empty()) {
        return Err(Error::precondition(format!(
            "subsets must have at least ε|A_i| = {floor:.2} vertices"
        )));
    }
    let pedges = pattern.edges();
    let mut img = vec![0 as Vertex; h];
    let mut observed = 0u64;
    fn rec(
        depth: usize,
        system: &PartiteSystem,
        pedges: &[(Vertex, Vertex)],
        subsets: &[Vec<Vertex>],
        img: &mut Vec<Vertex>,
        observed: &mut u64,
    ) {
        if depth == subsets.len() {
            *observed += 1;
            return;
        }
        for &x in &subsets[depth] {
            let ok = pedges.iter().all(|&(u, v)| {
                let (u, v) = (u as usize, v as usize);
                if v == depth && u < depth {
                    system.adjacent(u, img[u], depth, x)
                } else if u == depth && v < depth {
                    system.adjacent(v, img[v], depth, x)
                } else {
                    true
                }
            });
            if ok {
                img[depth] = x;
                rec(depth + 1, system, pedges, subsets, img, observed);
            }
        }
    }
    rec(0, system, &pedges, subsets, &mut img, &mut observed);
    let predicted = pedges
        .iter()
        .map(|&(u, v)| system.declared_density(u as usize, v as usize))
        .product::<f64>()
        * subsets.iter().map(|x| x.len() as f64).product::<f64>();
    let slack = c_h * eps * (system.n() as f64).powi(h as i32);
    let band = (predicted - slack, predicted + slack);
    Ok(CountingAudit {
        observed,
        predicted,
        band,
        within_band: (observed as f64) >= band.0 && (observed as f64) <= band.1,
    })
}

/// What [`inner_regular_split`] changed, plus certificates for both halves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub high_a: Vec<Vertex>,
    pub high_b: Vec<Vertex>,
    pub removed_edges: usize,
    /// Largest degree change among vertices outside the high sets.
    pub max_regular_degree_change: usize,
    pub kept: PairCertificate<f64>,
    pub complement: PairCertificate<f64>,
}

fn check_ratio(eps: f64, d: f64, ratio: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= ratio * d) {
        return Err(Error::precondition(format!(
            "need 0 < ε ≤ {ratio} d, got ε = {eps}, d = {d}"
        )));
    }
    Ok(())
}

/// Spanning `G' ⊆ G` such that `G'` and its bipartite complement are both
/// super-regular: vertices of degree at least `(d + 2ε)n` form high sets,
/// edges between the two high sets are deleted, and each high vertex then
/// keeps `round(d n)` uniformly chosen edges.
pub fn inner_regular_split(
    g: &BipartiteGraph,
    d: f64,
    eps: f64,
    rng: &mut SeededRng,
) -> Result<(BipartiteGraph, SplitReport)> {
    if d > 2.0 / 3.0 {
        return Err(Error::precondition(format!("inner-regular split needs d ≤ 2/3, got {d}")));
    }
    check_ratio(eps, d, DEFAULT_EPS_RATIO)?;
    let (na, nb) = (g.na(), g.nb());
    let high_a: Vec<bool> = (0..na as Vertex)
        .map(|a| g.neighbors_a(a).len() as f64 >= (d + 2.0 * eps) * nb as f64)
        .collect();
    let high_b: Vec<bool> = (0..nb as Vertex)
        .map(|b| g.neighbors_b(b).len() as f64 >= (d + 2.0 * eps) * na as f64)
        .collect();
    let mut adj: Vec<Vec<Vertex>> = (0..na as Vertex)
        .map(|a| {
            g.neighbors_a(a)
                .iter()
                .copied()
                .filter(|&b| !(high_a[a as usize] && high_b[b as usize]))
                .collect()
        })
        .collect();
    let target_a = (d * nb as f64).round() as usize;
    for (a, list) in adj.iter_mut().enumerate() {
        if high_a[a] && list.len() > target_a {
            list.shuffle(rng);
            list.truncate(target_a);
        }
    }
    let mut tmp = BipartiteGraph::from_adjacency(nb, adj)?.transpose();
    let target_b = (d * na as f64).round() as usize;
    let mut badj: Vec<Vec<Vertex>> = (0..nb as Vertex).map(|b| tmp.neighbors_a(b).to_vec()).collect();
    for (b, list) in badj.iter_mut().enumerate() {
        if high_b[b] && list.len() > target_b {
            list.shuffle(rng);
            list.truncate(target_b);
        }
    }
    tmp = BipartiteGraph::from_adjacency(na, badj)?;
    let out = tmp.transpose();
    let mut change = 0;
    for a in 0..na {
        if !high_a[a] {
            change = change.max(g.neighbors_a(a as Vertex).len() - out.neighbors_a(a as Vertex).len());
        }
    }
    for b in 0..nb {
        if !high_b[b] {
            change = change.max(g.neighbors_b(b as Vertex).len() - out.neighbors_b(b as Vertex).len());
        }
    }
    let relaxed = eps.powf(1.0 / 3.0);
    let report = SplitReport {
        high_a: (0..na as Vertex).filter(|&a| high_a[a as usize]).collect(),
        high_b: (0..nb as Vertex).filter(|&b| high_b[b as usize]).collect(),
        removed_edges: g.num_edges() - out.num_edges(),
        max_regular_degree_change: change,
        kept: certify_regularity(&out, relaxed, RegularityMethod::Codegree)?,
        complement: certify_regularity(&out.complement(), relaxed, RegularityMethod::Codegree)?,
    };
    Ok((out, report))
}

/// Spanning `G' ⊆ G` with every degree near `δ n`: edges between typical
/// vertices (degree in `(d ± 2ε)n`) are kept with probability `δ/d`, edges
/// between two exceptional vertices are deleted, and each exceptional vertex
/// keeps `⌈δ n⌉` of its edges chosen uniformly.
pub fn boost_to_super_regular(
    g: &BipartiteGraph,
    d: f64,
    eps: f64,
    delta: f64,
    rng: &mut SeededRng,
) -> Result<BipartiteGraph> {
    if !(delta > 0.0 && delta <= d && d <= 1.0) {
        return Err(Error::precondition(format!("need 0 < δ ≤ d ≤ 1, got δ = {delta}, d = {d}")));
    }
    if !(eps >= 0.0 && eps < delta) {
        return Err(Error::precondition(format!("need 0 ≤ ε < δ, got ε = {eps}, δ = {delta}")));
    }
    let (na, nb) = (g.na(), g.nb());
    let typical = |deg: usize, other: usize| {
        let x = deg as f64;
        x >= (d - 2.0 * eps) * other as f64 && x <= (d + 2.0 * eps) * other as f64
    };
    let exc_a: Vec<bool> = (0..na as Vertex)
        .map(|a| !typical(g.neighbors_a(a).len(), nb))
        .collect();
    let exc_b: Vec<bool> = (0..nb as Vertex)
        .map(|b| !typical(g.neighbors_b(b).len(), na))
        .collect();
    let keep_p = delta / d;
    let mut edges = Vec::new();
    for (a, b) in g.edges() {
        if !exc_a[a as usize] && !exc_b[b as usize] && rng.gen::<f64>() < keep_p {
            edges.push((a, b));
        }
    }
    for a in (0..na as Vertex).filter(|&a| exc_a[a as usize]) {
        let mut cand: Vec<Vertex> = g
            .neighbors_a(a)
            .iter()
            .copied()
            .filter(|&b| !exc_b[b as usize])
            .collect();
        cand.shuffle(rng);
        cand.truncate((delta * nb as f64).ceil() as usize);
        edges.extend(cand.into_iter().map(|b| (a, b)));
    }
    for b in (0..nb as Vertex).filter(|&b| exc_b[b as usize]) {
        let mut cand: Vec<Vertex> = g
            .neighbors_b(b)
            .iter()
            .copied()
            .filter(|&a| !exc_a[a as usize])
            .collect();
        cand.shuffle(rng);
        cand.truncate((delta * na as f64).ceil() as usize);
        edges.extend(cand.into_iter().map(|a| (a, b)));
    }
    BipartiteGraph::from_edges(na, nb, &edges)
}

/// Acceptance rule used by the generators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub density_tol: f64,
    pub eps: f64,
    /// Degree floor as a fraction of `d`.
    pub delta_ratio: f64,
    pub max_resamples: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            density_tol: 0.05,
            eps: 0.15,
            delta_ratio: 0.5,
            max_resamples: 100,
        }
    }
}

impl GeneratorConfig {
    pub fn params(&self, d: f64) -> SuperRegularParams {
        SuperRegularParams::new(d, self.eps, self.delta_ratio * d).with_density_tol(self.density_tol)
    }
}

/// One `n x n` pair with independent edges of probability `d`, resampled
/// until it passes the configured super-regularity check. Returns the pair
/// and the number of draws used.
pub fn generate_super_regular_pair(
    n: usize,
    d: f64,
    cfg: &GeneratorConfig,
    rng: &mut SeededRng,
) -> Result<(BipartiteGraph, u32)> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::invalid(format!("density {d} outside (0, 1]")));
    }
    let params = cfg.params(d);
    for attempt in 1..=cfg.max_resamples {
        let g = BipartiteGraph::random(n, n, d, rng);
        if certify_super_regular(&g, &params)?.passed {
            return Ok((g, attempt));
        }
    }
    Err(Error::RetriesExhausted {
        attempts: cfg.max_resamples,
        reason: format!("no certified {n} x {n} pair at density {d}"),
    })
}

/// `r`-partite system of `n`-vertex parts, every pair generated by
/// [`generate_super_regular_pair`] from its own child stream.
pub fn generate_super_regular_system(
    r: usize,
    n: usize,
    d: f64,
    cfg: &GeneratorConfig,
    rng: &mut SeededRng,
) -> Result<PartiteSystem> {
    let m = r * (r - 1) / 2;
    let pairs = (0..m as u64)
        .map(|slot| generate_super_regular_pair(n, d, cfg, &mut rng.child(slot)).map(|(g, _)| g))
        .collect::<Result<Vec<_>>>()?;
    PartiteSystem::new(r, n, pairs, vec![d; m])
}

/// Four layers `V1..V4` with certified pairs between consecutive layers and
/// no edges otherwise.
pub fn generate_four_layer(
    n: usize,
    d: f64,
    cfg: &GeneratorConfig,
    rng: &mut SeededRng,
) -> Result<PartiteSystem> {
    let mut sys = PartiteSystem::new(4, n, vec![BipartiteGraph::new(n, n); 6], vec![0.0; 6])?;
    for i in 0..3 {
        let (g, _) = generate_super_regular_pair(n, d, cfg, &mut rng.child(i as u64))?;
        sys.set_pair(i, i + 1, g, d);
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn densities() {
        let k = BipartiteGraph::complete(3, 3);
        let all = [0, 1, 2];
        assert_eq!(pair_density::<Ratio<i128>>(&k, &all, &all).unwrap(), Ratio::from(1));
        let e = BipartiteGraph::new(3, 3);
        assert_eq!(pair_density::<f64>(&e, &all, &all).unwrap(), 0.0);
        let g = BipartiteGraph::from_edges(3, 3, &[(0, 0), (0, 1), (1, 1), (2, 0), (2, 2)]).unwrap();
        assert_eq!(pair_density::<Ratio<i128>>(&g, &all, &all).unwrap(), Ratio::new(5, 9));
        assert!(pair_density::<f64>(&g, &[], &all).is_err());
        let gg = Graph::complete_multipartite(&[2, 2]);
        assert_eq!(graph_pair_density::<f64>(&gg, &[0, 1], &[2, 3]).unwrap(), 1.0);
        assert!(graph_pair_density::<f64>(&gg, &[0, 1], &[1, 3]).is_err());
    }

    #[test]
    fn complete_pair_is_perfectly_regular() {
        let k = BipartiteGraph::complete(8, 8);
        let c = certify_regularity::<f64>(&k, 0.1, RegularityMethod::Exhaustive).unwrap();
        assert_eq!(c.epsilon_hat, 0.0);
        assert_eq!(codegree_score(&k), 0.0);
        let big = BipartiteGraph::complete(17, 4);
        assert!(certify_regularity::<f64>(&big, 0.1, RegularityMethod::Exhaustive).is_err());
    }

    #[test]
    fn two_blocks_are_irregular() {
        let mut edges = Vec::new();
        for a in 0..8u32 {
            for b in 0..8u32 {
                if (a < 4) == (b < 4) {
                    edges.push((a, b));
                }
            }
        }
        let g = BipartiteGraph::from_edges(8, 8, &edges).unwrap();
        let c = certify_regularity::<f64>(&g, 0.15, RegularityMethod::Exhaustive).unwrap();
        assert!(c.epsilon_hat >= 0.5);
        let w = c.witness.unwrap();
        let dw: f64 = pair_density(&g, &w.x1, &w.x2).unwrap();
        assert!(((dw - 0.5).abs() - w.deviation).abs() < 1e-12);
        let s = codegree_score(&g);
        assert!((s - 0.25).abs() < 1e-12, "s = {s}");
        assert!(c.epsilon_hat <= s.powf(0.25) / 0.15);
    }

    #[test]
    fn super_regular_degree_witness() {
        let k = BipartiteGraph::complete(8, 8);
        let p = SuperRegularParams::new(1.0, 0.1, 0.9).with_method(RegularityMethod::Exhaustive);
        assert!(certify_super_regular(&k, &p).unwrap().passed);
        let edges: Vec<_> = k.edges().into_iter().filter(|&(a, _)| a != 3).collect();
        let g = BipartiteGraph::from_edges(8, 8, &edges).unwrap();
        let p = SuperRegularParams::new(56.0 / 64.0, 0.5, 0.5);
        let v = certify_super_regular(&g, &p).unwrap();
        assert!(!v.passed && !v.degrees_ok);
        assert_eq!(v.worst_vertex, Some((Side::A, 3)));
    }

    #[test]
    fn partite_indexing() {
        let mut rng = SeededRng::new(1);
        let sys = generate_super_regular_system(3, 10, 1.0, &GeneratorConfig::default(), &mut rng).unwrap();
        assert_eq!(sys.to_graph().num_edges(), 300);
        assert!(sys.adjacent(2, 3, 0, 4));
        assert!(!sys.adjacent(1, 3, 1, 4));
        assert_eq!(sys.local(sys.global(2, 7)), (2, 7));
        let sub = sys.restrict_parts(&[2, 0]);
        assert_eq!(sub.r(), 2);
    }

    #[test]
    fn counting_trivial_cases() {
        let sys = PartiteSystem::complete(3, 5);
        let tri = Graph::complete(3);
        let all: Vec<Vertex> = (0..5).collect();
        let a = counting_lemma_audit(&sys, &tri, &[all.clone(), all.clone(), all.clone()], 0.1, 1.0).unwrap();
        assert_eq!(a.observed, 125);
        assert!(a.within_band);
        let edge = Graph::complete(2);
        let a = counting_lemma_audit(&sys, &edge, &[vec![0, 1], vec![2, 3, 4]], 0.1, 1.0).unwrap();
        assert_eq!(a.observed, 6);
        assert!(counting_lemma_audit(&sys, &edge, &[vec![], vec![1]], 0.1, 1.0).is_err());
    }

    #[test]
    fn split_and_boost_preconditions() {
        let mut rng = SeededRng::new(3);
        let k = BipartiteGraph::complete(8, 8);
        assert!(inner_regular_split(&k, 1.0, 0.05, &mut rng).is_err());
        let boosted = boost_to_super_regular(&k, 1.0, 0.05, 1.0, &mut rng).unwrap();
        assert_eq!(boosted, k);
    }

    #[test]
    fn regular_degrees_leave_split_untouched() {
        // 12 x 12 circulant, every degree 6 = d n with d = 1/2
        let mut edges = Vec::new();
        for a in 0..12u32 {
            for s in 0..6u32 {
                edges.push((a, (a + s) % 12));
            }
        }
        let g = BipartiteGraph::from_edges(12, 12, &edges).unwrap();
        let (out, rep) = inner_regular_split(&g, 0.5, 0.05, &mut SeededRng::new(1)).unwrap();
        assert_eq!(out, g);
        assert_eq!(rep.removed_edges, 0);
    }

    #[test]
    fn boost_keeps_floor_for_low_vertex() {
        // circulant with every degree 24 = 0.6 n, then vertex 0 cut down to 14
        let mut edges = Vec::new();
        for a in 0..40u32 {
            for s in 0..24u32 {
                let b = (a + s) % 40;
                if a != 0 || b < 14 {
                    edges.push((a, b));
                }
            }
        }
        let g = BipartiteGraph::from_edges(40, 40, &edges).unwrap();
        let out = boost_to_super_regular(&g, 0.6, 0.02, 0.3, &mut SeededRng::new(8)).unwrap();
        assert_eq!(out.neighbors_a(0).len(), 12);
        assert!(out.edges().iter().all(|&(a, b)| g.has_edge(a, b)));
    }

    #[test]
    fn four_layer_shape() {
        let mut rng = SeededRng::new(4);
        let sys = generate_four_layer(30, 0.5, &GeneratorConfig::default(), &mut rng).unwrap();
        assert_eq!(sys.pair_ref(0, 2).num_edges(), 0);
        assert_eq!(sys.pair_ref(0, 3).num_edges(), 0);
        assert_eq!(sys.pair_ref(1, 3).num_edges(), 0);
        let p = GeneratorConfig::default().params(0.5);
        for i in 0..3 {
            assert!(certify_super_regular(sys.pair_ref(i, i + 1), &p).unwrap().passed);
        }
    }
}
