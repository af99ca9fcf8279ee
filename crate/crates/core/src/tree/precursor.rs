//! Buffered random-greedy embedding of a bipartite forest into a regular pair.
//!
//! Host vertices of the pair `(A, B)` use one index space: `x < |A|` is
//! `x ∈ A`, and `|A| + y` is `y ∈ B`.

use std::collections::VecDeque;

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bipartite::BipartiteGraph;
use crate::error::{Error, Result};
use crate::hypergraph::Vertex;
use crate::regularity::Side;
use crate::rng::SeededRng;

/// A forest with a fixed 2-colouring; side `A` vertices embed into `A`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteForest {
    side: Vec<Side>,
    adj: Vec<Vec<Vertex>>,
}

impl BipartiteForest {
    pub fn new(side: Vec<Side>, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let n = side.len();
        let mut adj = vec![Vec::new(); n];
        let mut root: Vec<usize> = (0..n).collect();
        fn find(root: &mut [usize], mut v: usize) -> usize {
            while root[v] != v {
                root[v] = root[root[v]];
                v = root[v];
            }
            v
        }
        for &(u, v) in edges {
            let (ui, vi) = (u as usize, v as usize);
            if ui >= n || vi >= n {
                return Err(Error::invalid(format!("edge {u}-{v} outside [0, {n})")));
            }
            if side[ui] == side[vi] {
                return Err(Error::invalid(format!("edge {u}-{v} inside one side")));
            }
            let (ru, rv) = (find(&mut root, ui), find(&mut root, vi));
            if ru == rv {
                return Err(Error::invalid(format!("edge {u}-{v} closes a cycle")));
            }
            root[ru] = rv;
            adj[ui].push(v);
            adj[vi].push(u);
        }
        Ok(Self { side, adj })
    }

    pub fn n(&self) -> usize {
        self.side.len()
    }

    pub fn side(&self, v: Vertex) -> Side {
        self.side[v as usize]
    }

    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adj[v as usize]
    }

    pub fn count(&self, s: Side) -> usize {
        self.side.iter().filter(|&&x| x == s).count()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Connected components, each listed in breadth-first order from its
    /// smallest vertex.
    pub fn components(&self) -> Vec<Vec<Vertex>> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for s in 0..self.n() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([s as Vertex]);
            while let Some(v) = queue.pop_front() {
                comp.push(v);
                for &w in self.neighbors(v) {
                    if !std::mem::replace(&mut seen[w as usize], true) {
                        queue.push_back(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecursorConfig {
    pub eps: f64,
    /// Pair density `d` of the `(d⁺, ε)`-regular host pair.
    pub d: f64,
    pub max_degree: usize,
    /// Bound on `|S|`.
    pub k: usize,
    /// Required slack `|C| ≤ (1 - α)|A|`, `|D| ≤ (1 - α)|B|`.
    pub alpha: f64,
    /// Component-size cap; `None` skips the check (the `ε²n` cap is below
    /// one vertex at desk scale).
    pub component_cap: Option<usize>,
}

impl Default for PrecursorConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            d: 0.5,
            max_degree: 3,
            k: 8,
            alpha: 0.05,
            component_cap: None,
        }
    }
}

impl PrecursorConfig {
    fn root_eps_n(&self, n: usize) -> usize {
        ((self.eps.sqrt() * n as f64).floor() as usize).max(1)
    }

    /// `ε^{1/3} n`, the bound in both postconditions.
    pub fn post_bound(&self, n: usize) -> f64 {
        self.eps.cbrt() * n as f64
    }

    /// `ε² n` floored at one vertex.
    pub fn candidate_floor(&self, n: usize) -> usize {
        ((self.eps * self.eps * n as f64).floor() as usize).max(1)
    }

    /// `√ε (d/2)^Δ n / (2Δk)` floored at one vertex.
    pub fn root_target_size(&self, n: usize) -> usize {
        let x = self.eps.sqrt() * (self.d / 2.0).powi(self.max_degree as i32) * n as f64
            / (2.0 * self.max_degree as f64 * self.k.max(1) as f64);
        (x.floor() as usize).max(1)
    }
}

pub struct PrecursorInput<'a> {
    pub forest: &'a BipartiteForest,
    pub g: &'a BipartiteGraph,
    /// `φ0` on `S`: forest vertex and its host vertex (pair index).
    pub fixed: &'a [(Vertex, Vertex)],
    pub f: &'a [Vertex],
    pub b1: &'a [Vertex],
    pub b2: &'a [Vertex],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecursorTrace {
    /// Embedding order (excludes `S`).
    pub order: Vec<Vertex>,
    /// `|X_i|` at each placement, aligned with `order`.
    pub candidates: Vec<usize>,
    pub candidate_floor: usize,
    /// `|Z_1 ∩ A|` (= `|Z_1 ∩ B|` = `|Z_2 ∩ A|` = `|Z_2 ∩ B|` when room allows).
    pub zone_sizes: [usize; 4],
    pub root_target_size: usize,
    pub b2_occupied: usize,
    pub f_missed: usize,
    pub post_bound: f64,
}

impl PrecursorTrace {
    pub fn postconditions_hold(&self) -> bool {
        self.b2_occupied as f64 <= self.post_bound && self.f_missed as f64 <= self.post_bound
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecursorOutcome {
    /// Host vertex (pair index) of each forest vertex.
    pub map: Vec<Vertex>,
    pub trace: PrecursorTrace,
}

struct Pair {
    na: usize,
    nbr: Vec<FixedBitSet>,
    side_mask: [FixedBitSet; 2],
}

impl Pair {
    fn new(g: &BipartiteGraph) -> Self {
        let (na, nb) = (g.na(), g.nb());
        let total = na + nb;
        let mut nbr = vec![FixedBitSet::with_capacity(total); total];
        for (a, b) in g.edges() {
            nbr[a as usize].insert(na + b as usize);
            nbr[na + b as usize].insert(a as usize);
        }
        let mut a_mask = FixedBitSet::with_capacity(total);
        a_mask.insert_range(..na);
        let mut b_mask = FixedBitSet::with_capacity(total);
        b_mask.insert_range(na..);
        Self {
            na,
            nbr,
            side_mask: [a_mask, b_mask],
        }
    }

    fn total(&self) -> usize {
        self.nbr.len()
    }

    fn mask(&self, s: Side) -> &FixedBitSet {
        &self.side_mask[usize::from(s == Side::B)]
    }

    fn side_of(&self, x: usize) -> Side {
        if x < self.na {
            Side::A
        } else {
            Side::B
        }
    }
}

fn to_set(total: usize, items: &[Vertex]) -> FixedBitSet {
    let mut s = FixedBitSet::with_capacity(total);
    for &x in items {
        s.insert(x as usize);
    }
    s
}

struct State<'a> {
    forest: &'a BipartiteForest,
    pair: &'a Pair,
    phi: Vec<Option<Vertex>>,
    free: FixedBitSet,
}

impl State<'_> {
    /// `A(φ, v)`: unoccupied vertices on `v`'s side adjacent to the images of
    /// all embedded neighbours of `v`.
    fn available(&self, v: Vertex) -> FixedBitSet {
        let mut s = self.free.clone();
        s.intersect_with(self.pair.mask(self.forest.side(v)));
        for &w in self.forest.neighbors(v) {
            if let Some(x) = self.phi[w as usize] {
                s.intersect_with(&self.pair.nbr[x as usize]);
            }
        }
        s
    }

    fn place(&mut self, v: Vertex, x: Vertex) {
        self.phi[v as usize] = Some(x);
        self.free.set(x as usize, false);
    }
}

fn check_inputs(input: &PrecursorInput<'_>, cfg: &PrecursorConfig, pair: &Pair) -> Result<()> {
    let h = input.forest;
    let (na, nb) = (input.g.na(), input.g.nb());
    let total = na + nb;
    let (nc, nd) = (h.count(Side::A), h.count(Side::B));
    if nc as f64 > (1.0 - cfg.alpha) * na as f64 + 1e-9 || nd as f64 > (1.0 - cfg.alpha) * nb as f64 + 1e-9 {
        return Err(Error::precondition(format!(
            "forest sides {nc} / {nd} exceed (1 - α) of the pair {na} x {nb}"
        )));
    }
    if h.max_degree() > cfg.max_degree {
        return Err(Error::precondition(format!(
            "forest degree {} exceeds Δ = {}",
            h.max_degree(),
            cfg.max_degree
        )));
    }
    if let Some(cap) = cfg.component_cap {
        if let Some(c) = h.components().iter().find(|c| c.len() > cap) {
            return Err(Error::precondition(format!(
                "component of {} vertices above the cap {cap}",
                c.len()
            )));
        }
    }
    if input.fixed.len() > cfg.k {
        return Err(Error::precondition(format!(
            "|S| = {} exceeds k = {}",
            input.fixed.len(),
            cfg.k
        )));
    }
    for &x in input.b1.iter().chain(input.b2).chain(input.fixed.iter().map(|p| &p.1)) {
        if x as usize >= total {
            return Err(Error::invalid(format!("host vertex {x} outside the pair")));
        }
    }
    let b1 = to_set(total, input.b1);
    let b2 = to_set(total, input.b2);
    if b1.len() != total || b1.count_ones(..) != input.b1.len() || b2.count_ones(..) != input.b2.len() {
        return Err(Error::invalid("buffer sets contain repeats"));
    }
    if !b1.is_disjoint(&b2) {
        return Err(Error::precondition("B1 and B2 intersect"));
    }
    let count = |set: &FixedBitSet, s: Side| set.intersection(pair.mask(s)).count();
    let f_side = |s: Side| input.f.iter().filter(|&&v| h.side(v) == s).count();
    if f_side(Side::A) != count(&b1, Side::A) || f_side(Side::B) != count(&b1, Side::B) {
        return Err(Error::precondition("|F ∩ C| = |B1 ∩ A| or |F ∩ D| = |B1 ∩ B| fails"));
    }
    if count(&b2, Side::A) != na - nc || count(&b2, Side::B) != nb - nd {
        return Err(Error::precondition("|B2 ∩ A| = |A| - |C| or |B2 ∩ B| = |B| - |D| fails"));
    }
    if input.f.iter().any(|&v| v as usize >= h.n()) {
        return Err(Error::invalid("F names a vertex outside the forest"));
    }
    let mut seen_host = vec![false; total];
    let mut seen_tree = vec![false; h.n()];
    for &(v, x) in input.fixed {
        if v as usize >= h.n() {
            return Err(Error::invalid(format!("fixed vertex {v} outside the forest")));
        }
        if std::mem::replace(&mut seen_host[x as usize], true) || std::mem::replace(&mut seen_tree[v as usize], true) {
            return Err(Error::invalid("φ0 is not injective"));
        }
        if pair.side_of(x as usize) != h.side(v) {
            return Err(Error::invalid(format!("φ0 puts {v} on the wrong side")));
        }
    }
    Ok(())
}

/// Extends `φ0` to the whole forest by random greedy placement into target
/// sets, keeping `B2` mostly free and steering `F` into `B1`.
///
/// Zones `Z1`, `Z2 ⊆ B2` of `√ε n` vertices per side are opened to the
/// embedding. Each neighbour `v` of `S` gets a private random target set
/// `X(v) ⊆ A(φ0, v) \ (Z1 ∪ Z2)`; other vertices of `F` target
/// `(B1 \ Z3) ∪ Z1`, and the rest target `V \ (B1 ∪ B2 ∪ Z3) ∪ Z2`.
/// Components are embedded one after another. Each vertex goes to a uniform
/// candidate of `A(φ, v) ∩ X(v)` that keeps, for every unembedded neighbour
/// `u`, at least a `d/2` fraction of `A(φ, u) ∩ X(u)`.
pub fn random_greedy_embed(
    input: &PrecursorInput<'_>,
    cfg: &PrecursorConfig,
    rng: &mut SeededRng,
) -> Result<PrecursorOutcome> {
    let pair = Pair::new(input.g);
    check_inputs(input, cfg, &pair)?;
    let h = input.forest;
    let total = pair.total();
    let n = input.g.na().min(input.g.nb());
    let mut state = State {
        forest: h,
        pair: &pair,
        phi: vec![None; h.n()],
        free: {
            let mut f = FixedBitSet::with_capacity(total);
            f.insert_range(..);
            f
        },
    };
    for &(v, x) in input.fixed {
        state.place(v, x);
    }
    for (p, c) in (0..h.n() as Vertex).flat_map(|v| h.neighbors(v).iter().map(move |&w| (v, w))) {
        if let (Some(x), Some(y)) = (state.phi[p as usize], state.phi[c as usize]) {
            if !pair.nbr[x as usize].contains(y as usize) {
                return Err(Error::invalid(format!("φ0 maps edge {p}-{c} to a non-edge")));
            }
        }
    }
    let avail_floor = (cfg.d / 2.0).powi(cfg.max_degree as i32) * n as f64;
    for v in 0..h.n() as Vertex {
        if state.phi[v as usize].is_none() {
            let a = state.available(v).count_ones(..);
            if (a as f64) < avail_floor - 1e-9 {
                return Err(Error::precondition(format!(
                    "|A(φ0, {v})| = {a} below (d/2)^Δ n = {avail_floor:.2}"
                )));
            }
        }
    }

    let b1 = to_set(total, input.b1);
    let b2 = to_set(total, input.b2);
    let z = cfg.root_eps_n(n);
    let mut z1 = FixedBitSet::with_capacity(total);
    let mut z2 = FixedBitSet::with_capacity(total);
    let mut zone_sizes = [0; 4];
    for (si, s) in [Side::A, Side::B].into_iter().enumerate() {
        let mut pool: Vec<usize> = b2.intersection(pair.mask(s)).filter(|&x| state.free.contains(x)).collect();
        pool.shuffle(rng);
        let take = z.min(pool.len() / 2);
        for &x in &pool[..take] {
            z1.insert(x);
        }
        for &x in &pool[take..2 * take] {
            z2.insert(x);
        }
        zone_sizes[si] = take;
        zone_sizes[2 + si] = take;
    }

    let in_s: Vec<bool> = {
        let mut m = vec![false; h.n()];
        for &(v, _) in input.fixed {
            m[v as usize] = true;
        }
        m
    };
    let mut in_ns = vec![false; h.n()];
    for &(v, _) in input.fixed {
        for &w in h.neighbors(v) {
            if !in_s[w as usize] {
                in_ns[w as usize] = true;
            }
        }
    }
    let in_f = {
        let mut m = vec![false; h.n()];
        for &v in input.f {
            m[v as usize] = true;
        }
        m
    };

    let t = cfg.root_target_size(n);
    let mut z3 = FixedBitSet::with_capacity(total);
    let mut targets: Vec<FixedBitSet> = vec![FixedBitSet::with_capacity(total); h.n()];
    let mut zones = z1.clone();
    zones.union_with(&z2);
    for v in (0..h.n() as Vertex).filter(|&v| in_ns[v as usize]) {
        let mut pool = state.available(v);
        pool.difference_with(&zones);
        pool.difference_with(&z3);
        let mut pool: Vec<usize> = pool.ones().collect();
        if pool.len() < t {
            return Err(Error::stage(
                "precursor",
                format!("no room for a target set of {t} for neighbour {v} of S"),
            ));
        }
        pool.shuffle(rng);
        for &x in &pool[..t] {
            targets[v as usize].insert(x);
            z3.insert(x);
        }
    }
    let mut f_zone = b1.clone();
    f_zone.difference_with(&z3);
    f_zone.union_with(&z1);
    let mut rest_zone = FixedBitSet::with_capacity(total);
    rest_zone.insert_range(..);
    rest_zone.difference_with(&b1);
    rest_zone.difference_with(&b2);
    rest_zone.difference_with(&z3);
    rest_zone.union_with(&z2);
    for v in 0..h.n() {
        if in_s[v] || in_ns[v] {
            continue;
        }
        let zone = if in_f[v] { &f_zone } else { &rest_zone };
        let mut x = zone.clone();
        x.intersect_with(pair.mask(h.side(v as Vertex)));
        targets[v] = x;
    }

    let mut order = Vec::with_capacity(h.n());
    let mut queued = in_s.clone();
    for comp in h.components() {
        let mut queue: VecDeque<Vertex> = comp.iter().copied().filter(|&v| in_s[v as usize]).collect();
        if queue.is_empty() {
            queue.push_back(comp[0]);
            queued[comp[0] as usize] = true;
        }
        while let Some(v) = queue.pop_front() {
            if !in_s[v as usize] {
                order.push(v);
            }
            for &w in h.neighbors(v) {
                if !std::mem::replace(&mut queued[w as usize], true) {
                    queue.push_back(w);
                }
            }
        }
    }

    let floor = cfg.candidate_floor(n);
    let mut candidates = Vec::with_capacity(order.len());
    for &v in &order {
        let mut x = state.available(v);
        x.intersect_with(&targets[v as usize]);
        let forward: Vec<FixedBitSet> = h
            .neighbors(v)
            .iter()
            .filter(|&&u| state.phi[u as usize].is_none())
            .map(|&u| {
                let mut s = state.available(u);
                s.intersect_with(&targets[u as usize]);
                s
            })
            .collect();
        let cands: Vec<Vertex> = x
            .ones()
            .filter(|&c| {
                forward.iter().all(|tu| {
                    let need = cfg.d / 2.0 * tu.count_ones(..) as f64;
                    pair.nbr[c].intersection(tu).count() as f64 >= need - 1e-9
                })
            })
            .map(|c| c as Vertex)
            .collect();
        if cands.len() < floor {
            return Err(Error::stage(
                "precursor",
                format!(
                    "vertex {v} has {} candidates (floor {floor}); {} of {} placed, |A(φ,v) ∩ X(v)| = {}",
                    cands.len(),
                    candidates.len(),
                    order.len(),
                    x.count_ones(..)
                ),
            ));
        }
        candidates.push(cands.len());
        let c = super::pick(&cands, rng).expect("non-empty");
        state.place(v, c);
    }

    let map: Vec<Vertex> = state.phi.iter().map(|x| x.expect("all placed")).collect();
    let b2_occupied = b2.ones().filter(|&x| !state.free.contains(x)).count();
    let f_missed = input.f.iter().filter(|&&v| !b1.contains(map[v as usize] as usize)).count();
    let trace = PrecursorTrace {
        order,
        candidates,
        candidate_floor: floor,
        zone_sizes,
        root_target_size: t,
        b2_occupied,
        f_missed,
        post_bound: cfg.post_bound(n),
    };
    if !trace.postconditions_hold() {
        return Err(Error::stage(
            "precursor",
            format!(
                "postcondition failed: {b2_occupied} of B2 occupied, {f_missed} of F outside B1, bound {:.2}",
                trace.post_bound
            ),
        ));
    }
    Ok(PrecursorOutcome { map, trace })
}
