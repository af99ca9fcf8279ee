//! Spread `K_r`-factors in super-regular partite systems: induction on `r`
//! through the matched-pair graph Γ, and fractional clique weightings with
//! equal vertex sums.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bipartite::{BipartiteGraph, BipartiteMatching};
use crate::error::{Error, Result};
use crate::exact::clique_complex;
use crate::hypergraph::{edge_key, Vertex};
use crate::matching::Factor;
use crate::regularity::{
    boost_to_super_regular, certify_super_regular, PartiteSystem, RegularityMethod,
    SuperRegularParams, SuperRegularVerdict,
};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::spread_bipartite::{default_c, sample_spread_pm_bipartite, SpreadPmConfig};

/// Γ for a perfect matching `M1` between parts `p` and `q` and a third part `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaGraph {
    /// Side `A` is part `i`; side `B` vertex `a` is the matched edge `(a, M1(a))`.
    pub graph: BipartiteGraph,
    pub isolated_matched_edges: Vec<Vertex>,
    pub isolated_vertices: Vec<Vertex>,
}

/// Γ: vertex `x` of part `i` is joined to matched edge `{a, b}` iff `x` is
/// adjacent to both `a` and `b`.
pub fn build_gamma_graph(
    system: &PartiteSystem,
    i: usize,
    p: usize,
    q: usize,
    m1: &BipartiteMatching,
) -> Result<GammaGraph> {
    if !m1.is_perfect() || m1.pairs().len() != system.n() {
        return Err(Error::precondition("M1 must be a perfect matching of parts p, q"));
    }
    if i == p || i == q || p == q {
        return Err(Error::invalid("Γ needs three distinct parts"));
    }
    let n = system.n();
    let pairs = m1.pairs();
    let mut adj = vec![Vec::new(); n];
    for (x, row) in adj.iter_mut().enumerate() {
        for &(a, b) in &pairs {
            if system.adjacent(i, x as Vertex, p, a) && system.adjacent(i, x as Vertex, q, b) {
                row.push(a);
            }
        }
    }
    let graph = BipartiteGraph::from_adjacency(n, adj)?;
    let isolated_vertices = (0..n as Vertex)
        .filter(|&x| graph.neighbors_a(x).is_empty())
        .collect();
    let isolated_matched_edges = (0..n as Vertex)
        .filter(|&a| graph.neighbors_b(a).is_empty())
        .collect();
    Ok(GammaGraph {
        graph,
        isolated_matched_edges,
        isolated_vertices,
    })
}

/// Acceptance rule for Γ before recursing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaGate {
    pub eps: f64,
    pub density_tol: f64,
    /// Degree floor as a fraction of the expected Γ density `d_ip d_iq`.
    pub delta_ratio: f64,
    /// Pass Γ through the super-regularity boost (to `δ = delta_ratio d_ip d_iq`).
    pub boost: bool,
}

impl Default for GammaGate {
    fn default() -> Self {
        Self {
            eps: 0.15,
            density_tol: 0.1,
            delta_ratio: 0.5,
            boost: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrFactorConfig {
    /// Bipartite matching sampler (its `C` and per-call retries).
    pub pm: SpreadPmConfig,
    /// Full-round retries (fresh `M1`) when some Γ fails the gate.
    pub round_retries: u32,
    /// `None` accepts every Γ; the matching sampler still needs a perfect matching.
    pub gate: Option<GammaGate>,
}

impl KrFactorConfig {
    pub fn for_density(d: f64) -> Self {
        Self {
            pm: SpreadPmConfig::new(default_c(d)),
            round_retries: 20,
            gate: Some(GammaGate::default()),
        }
    }
}

/// A sampled factor plus the per-level round counts it needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrFactorSample {
    pub factor: Factor,
    pub rounds: Vec<u32>,
    /// Gate verdicts that caused retries (last failure per level, if any).
    pub gate_failures: Vec<SuperRegularVerdict>,
}

fn recurse(
    sys: &PartiteSystem,
    cfg: &KrFactorConfig,
    rng: &SeededRng,
    rounds: &mut Vec<u32>,
    failures: &mut Vec<SuperRegularVerdict>,
) -> Result<Vec<Vec<Vertex>>> {
    let (r, n) = (sys.r(), sys.n());
    let (p, q) = (r - 2, r - 1);
    if r == 2 {
        let s = sample_spread_pm_bipartite(sys.pair_ref(0, 1), &cfg.pm, &rng.child(0))?;
        rounds.push(1);
        return Ok(s.matching.pairs().into_iter().map(|(a, b)| vec![a, b]).collect());
    }
    let mut last_failure = None;
    for round in 0..cfg.round_retries {
        let round_rng = rng.child(round as u64);
        let m1 = sample_spread_pm_bipartite(sys.pair_ref(p, q), &cfg.pm, &round_rng.child(0))?.matching;
        let mut pairs = Vec::new();
        let mut dens = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                pairs.push(sys.pair(i, j));
                dens.push(sys.declared_density(i, j));
            }
        }
        let mut ok = true;
        let mut gammas = Vec::with_capacity(p);
        for i in 0..p {
            let gamma = build_gamma_graph(sys, i, p, q, &m1)?;
            let expect = sys.declared_density(i, p) * sys.declared_density(i, q);
            let Some(gate) = cfg.gate else {
                gammas.push((gamma.graph, expect));
                continue;
            };
            let params = SuperRegularParams::new(expect, gate.eps, gate.delta_ratio * expect)
                .with_density_tol(gate.density_tol)
                .with_method(RegularityMethod::Codegree);
            let verdict = certify_super_regular(&gamma.graph, &params)?;
            if !verdict.passed {
                ok = false;
                last_failure = Some(verdict);
                break;
            }
            let g = if gate.boost {
                let measured = verdict.certificate.density;
                let delta = (gate.delta_ratio * expect).min(measured);
                boost_to_super_regular(
                    &gamma.graph,
                    measured,
                    0.0,
                    delta,
                    &mut round_rng.child(2 + i as u64),
                )?
            } else {
                gamma.graph
            };
            gammas.push((g, expect));
        }
        if !ok {
            continue;
        }
        // pair order of PartiteSystem::new: (0,1), …, (0,p), (1,2), …, (p-1,p)
        let mut all_pairs = Vec::new();
        let mut all_dens = Vec::new();
        let mut inner = pairs.into_iter().zip(dens);
        for i in 0..p {
            for _j in i + 1..p {
                let (g, d) = inner.next().expect("inner pair");
                all_pairs.push(g);
                all_dens.push(d);
            }
            let (g, d) = gammas[i].clone();
            all_pairs.push(g);
            all_dens.push(d);
        }
        let reduced = PartiteSystem::new(p + 1, n, all_pairs, all_dens)?;
        rounds.push(round + 1);
        let sub = recurse(&reduced, cfg, &round_rng.child(1), rounds, failures)?;
        let lifted = sub
            .into_iter()
            .map(|mut c| {
                let a = c[p];
                c.push(m1.mate_of_a(a).expect("perfect M1"));
                c
            })
            .collect();
        if let Some(f) = last_failure {
            failures.push(f);
        }
        return Ok(lifted);
    }
    Err(Error::RetriesExhausted {
        attempts: cfg.round_retries,
        reason: format!("Γ failed the gate in every round at r = {r}: {last_failure:?}"),
    })
}

/// Spread `K_r`-factor of an `r`-partite system.
///
/// `r = 2` is the bipartite matching sampler. For `r > 2`, a spread perfect
/// matching `M1` between the last two parts is drawn, each earlier part `i`
/// is joined to `M1` through Γ, and the `(r-1)`-partite system (earlier
/// pairs unchanged, Γ graphs towards the merged part) is solved recursively
/// and lifted back through `M1`. Cliques are returned as global vertex ids.
///
/// Streams: round `t` at the top level uses `rng.child(t)`; its `M1` is drawn
/// from `child(t).child(0)` and the recursion from `child(t).child(1)`.
pub fn sample_spread_kr_factor(
    system: &PartiteSystem,
    cfg: &KrFactorConfig,
    rng: &SeededRng,
) -> Result<KrFactorSample> {
    let mut rounds = Vec::new();
    let mut failures = Vec::new();
    let cliques = recurse(system, cfg, rng, &mut rounds, &mut failures)?;
    let global = cliques
        .into_iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .map(|(part, &v)| system.global(part, v))
                .collect()
        })
        .collect();
    Ok(KrFactorSample {
        factor: Factor::new(global).canonical(),
        rounds,
        gate_failures: failures,
    })
}

/// Weights on the partite cliques of a system (global ids, part order).
#[derive(Clone, Debug, PartialEq)]
pub struct CliqueWeighting<T> {
    pub r: usize,
    pub n: usize,
    pub cliques: Vec<Vec<Vertex>>,
    pub weights: Vec<T>,
    /// Common vertex sum aimed for, `½ n^{r-1} ∏ d_ij`.
    pub target: T,
}

impl<T: Scalar> CliqueWeighting<T> {
    /// `Σ_{H ∋ v} ω(H)` for every global vertex.
    pub fn vertex_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.r * self.n];
        for (c, w) in self.cliques.iter().zip(&self.weights) {
            for &v in c {
                sums[v as usize] += w.clone();
            }
        }
        sums
    }

    pub fn in_unit_interval(&self) -> bool {
        self.weights
            .iter()
            .all(|w| *w >= T::zero() && *w <= T::one())
    }

    pub fn max_deviation(&self) -> f64 {
        self.vertex_sums()
            .iter()
            .map(|s| (s.clone() - self.target.clone()).abs().to_f64_lossy())
            .fold(0.0, f64::max)
    }

    /// Sparse JSON: clique ids joined by `-` mapped to the weight's display
    /// form (`num/den` for rationals).
    pub fn to_json(&self) -> serde_json::Value {
        let weights: serde_json::Map<String, serde_json::Value> = self
            .cliques
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| !w.is_zero())
            .map(|(c, w)| {
                let key = c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-");
                (key, serde_json::Value::String(w.to_string()))
            })
            .collect();
        serde_json::json!({
            "r": self.r,
            "n": self.n,
            "target": self.target.to_string(),
            "weights": weights,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingMode {
    /// Uniform `½` corrected by weight-shifting gadgets; `r = 3`, `n ≤ 12`.
    GadgetExact,
    /// Iterative proportional fitting to the common target.
    Solver,
}

/// Largest part size accepted by the gadget construction.
pub const GADGET_MAX_N: usize = 12;

fn partite_cliques(system: &PartiteSystem) -> Result<Vec<Vec<Vertex>>> {
    let cx = clique_complex(&system.to_graph(), system.r())?;
    Ok(cx.edges().map(|e| e.to_vec()).collect())
}

fn target_sum<T: Scalar>(system: &PartiteSystem) -> T {
    let n = system.n() as i128;
    let mut t = T::from_ratio(n.pow(system.r() as u32 - 1), 2);
    for i in 0..system.r() {
        for j in i + 1..system.r() {
            let e = system.pair_ref(i, j).num_edges() as i128;
            t *= T::from_ratio(e, n * n);
        }
    }
    t
}

/// Weighting `ω: cliques → [0, 1]` with every vertex sum equal to
/// `½ n^{r-1} ∏ d_ij` (`d_ij` the actual pair densities).
pub fn fractional_clique_matching<T: Scalar>(
    system: &PartiteSystem,
    mode: WeightingMode,
) -> Result<CliqueWeighting<T>> {
    let cliques = partite_cliques(system)?;
    let mut deg = vec![0usize; system.r() * system.n()];
    for c in &cliques {
        for &v in c {
            deg[v as usize] += 1;
        }
    }
    if let Some(v) = deg.iter().position(|&d| d == 0) {
        return Err(Error::precondition(format!("vertex {v} lies in no clique")));
    }
    let w = match mode {
        WeightingMode::GadgetExact => gadget_weighting(system, cliques, &deg)?,
        WeightingMode::Solver => ipf_weighting(system, cliques, 1e-12, 10_000)?,
    };
    Ok(w)
}

/// Weight-shifting gadgets for `r = 3`.
///
/// For an ordered pair `v1 ≠ v2` of part `ℓ` (other parts `p < q`), a gadget is
/// `(x1, y1, x2, y2, w)` of distinct vertices, `x ∈ A_p`, `y ∈ A_q`, `w ∈ A_ℓ`,
/// with `v1x1y1`, `wx1y1`, `v2x2y2`, `wx2y2` all cliques. With
/// `c = (D_{v1} - D_{v2}) / (2n|R_{v1,v2}|)` and `D_v = deg(v) - |E|/n`, each
/// gadget adds `-c` to `v1x1y1` and `wx2y2` and `+c` to `wx1y1` and `v2x2y2`.
/// The final weight is `τ / (|E|/n) · (1 + Σ shifts)`.
fn gadget_weighting<T: Scalar>(
    system: &PartiteSystem,
    cliques: Vec<Vec<Vertex>>,
    deg: &[usize],
) -> Result<CliqueWeighting<T>> {
    let (r, n) = (system.r(), system.n());
    if r != 3 || n > GADGET_MAX_N {
        return Err(Error::precondition(format!(
            "gadget weighting needs r = 3 and n ≤ {GADGET_MAX_N}, got r = {r}, n = {n}"
        )));
    }
    let index: HashMap<u128, usize> = cliques
        .iter()
        .enumerate()
        .map(|(i, c)| (edge_key(c), i))
        .collect();
    let m = cliques.len() as i128;
    let nn = n as i128;
    // D_v scaled by n to stay integral: n D_v = n deg(v) - |E|
    let dn: Vec<i128> = deg.iter().map(|&d| nn * d as i128 - m).collect();
    let mut shift: Vec<T> = vec![T::zero(); cliques.len()];
    let clique_id = |a: Vertex, b: Vertex, c: Vertex| -> Option<usize> {
        let mut k = [a, b, c];
        k.sort_unstable();
        index.get(&edge_key(&k)).copied()
    };
    for ell in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&x| x != ell).collect();
        let (p, q) = (others[0], others[1]);
        // triangles through each vertex of part ℓ, as (x, y) local pairs
        let mut through: Vec<Vec<(Vertex, Vertex)>> = vec![Vec::new(); n];
        for (v, list) in through.iter_mut().enumerate() {
            let gv = system.global(ell, v as Vertex);
            for x in 0..n as Vertex {
                for y in 0..n as Vertex {
                    if clique_id(gv, system.global(p, x), system.global(q, y)).is_some() {
                        list.push((x, y));
                    }
                }
            }
        }
        let mut in_set = vec![vec![false; n * n]; n];
        for v in 0..n {
            for &(x, y) in &through[v] {
                in_set[v][x as usize * n + y as usize] = true;
            }
        }
        for v1 in 0..n {
            for v2 in 0..n {
                if v1 == v2 {
                    continue;
                }
                // per-clique gadget counts for this ordered pair
                let mut counts: HashMap<usize, i128> = HashMap::new();
                let mut total: i128 = 0;
                for w in (0..n).filter(|&w| w != v1 && w != v2) {
                    let s1: Vec<(Vertex, Vertex)> = through[v1]
                        .iter()
                        .copied()
                        .filter(|&(x, y)| in_set[w][x as usize * n + y as usize])
                        .collect();
                    let s2: Vec<(Vertex, Vertex)> = through[v2]
                        .iter()
                        .copied()
                        .filter(|&(x, y)| in_set[w][x as usize * n + y as usize])
                        .collect();
                    if s1.is_empty() || s2.is_empty() {
                        continue;
                    }
                    let tally = |s: &[(Vertex, Vertex)]| {
                        let mut bx = vec![0i128; n];
                        let mut by = vec![0i128; n];
                        for &(x, y) in s {
                            bx[x as usize] += 1;
                            by[y as usize] += 1;
                        }
                        (bx, by)
                    };
                    let (s1x, s1y) = tally(&s1);
                    let (s2x, s2y) = tally(&s2);
                    let mark1: Vec<bool> = {
                        let mut m = vec![false; n * n];
                        for &(x, y) in &s1 {
                            m[x as usize * n + y as usize] = true;
                        }
                        m
                    };
                    let mark2: Vec<bool> = {
                        let mut m = vec![false; n * n];
                        for &(x, y) in &s2 {
                            m[x as usize * n + y as usize] = true;
                        }
                        m
                    };
                    let (gv1, gv2, gw) = (
                        system.global(ell, v1 as Vertex),
                        system.global(ell, v2 as Vertex),
                        system.global(ell, w as Vertex),
                    );
                    for &(x1, y1) in &s1 {
                        // second halves compatible with (x1, y1)
                        let c = s2.len() as i128 - s2x[x1 as usize] - s2y[y1 as usize]
                            + mark2[x1 as usize * n + y1 as usize] as i128;
                        if c == 0 {
                            continue;
                        }
                        total += c;
                        let (gx, gy) = (system.global(p, x1), system.global(q, y1));
                        *counts.entry(clique_id(gv1, gx, gy).expect("in S1")).or_default() -= c;
                        *counts.entry(clique_id(gw, gx, gy).expect("in S1")).or_default() += c;
                    }
                    for &(x2, y2) in &s2 {
                        let c = s1.len() as i128 - s1x[x2 as usize] - s1y[y2 as usize]
                            + mark1[x2 as usize * n + y2 as usize] as i128;
                        if c == 0 {
                            continue;
                        }
                        let (gx, gy) = (system.global(p, x2), system.global(q, y2));
                        *counts.entry(clique_id(gv2, gx, gy).expect("in S2")).or_default() += c;
                        *counts.entry(clique_id(gw, gx, gy).expect("in S2")).or_default() -= c;
                    }
                }
                if total == 0 {
                    return Err(Error::precondition(format!(
                        "no weight-shifting gadget for vertices {v1}, {v2} of part {ell}"
                    )));
                }
                let diff = dn[system.global(ell, v1 as Vertex) as usize]
                    - dn[system.global(ell, v2 as Vertex) as usize];
                if diff == 0 {
                    continue;
                }
                // c = (D1 - D2) / (2 n |R|) = diff / (2 n² |R|)
                let unit = T::from_ratio(diff, 2 * nn * nn * total);
                let mut entries: Vec<(usize, i128)> = counts.into_iter().filter(|e| e.1 != 0).collect();
                entries.sort_unstable();
                for (cid, c) in entries {
                    shift[cid] += unit.clone() * T::from_i128(c);
                }
            }
        }
    }
    let target: T = target_sum(system);
    let scale = target.clone() * T::from_ratio(nn, m);
    let weights = shift
        .into_iter()
        .map(|s| scale.clone() * (T::one() + s))
        .collect();
    Ok(CliqueWeighting {
        r: 3,
        n,
        cliques,
        weights,
        target,
    })
}

/// Scale `s` with `Σ min(1, s x_i) = t`, or `None` when fewer than `t`
/// weights are available.
fn capped_scale(xs: &mut [f64], t: f64) -> Option<f64> {
    if (xs.len() as f64) < t {
        return None;
    }
    xs.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut rest: f64 = xs.iter().sum();
    for (k, &x) in xs.iter().enumerate() {
        // the k largest are capped at 1
        let s = (t - k as f64) / rest;
        if s * x <= 1.0 {
            return Some(s);
        }
        rest -= x;
    }
    Some(f64::INFINITY)
}

/// Iterative proportional fitting with weights capped at 1: the cliques
/// through each vertex of one part are rescaled so the vertex sum hits the
/// target (each clique meets a part exactly once, so one part is fitted
/// exactly per step), cycling over the parts until every sum is within
/// `tol` relative error.
fn ipf_weighting<T: Scalar>(
    system: &PartiteSystem,
    cliques: Vec<Vec<Vertex>>,
    tol: f64,
    max_sweeps: usize,
) -> Result<CliqueWeighting<T>> {
    let (r, n) = (system.r(), system.n());
    let target: T = target_sum(system);
    let t = target.to_f64_lossy();
    let mut through = vec![Vec::new(); r * n];
    for (i, c) in cliques.iter().enumerate() {
        for &v in c {
            through[v as usize].push(i);
        }
    }
    let mut w = vec![0.5f64; cliques.len()];
    let mut buf = Vec::new();
    for _ in 0..max_sweeps {
        for part in 0..r {
            for v in 0..n {
                let ids = &through[system.global(part, v as Vertex) as usize];
                buf.clear();
                buf.extend(ids.iter().map(|&i| w[i]));
                let s = capped_scale(&mut buf, t).ok_or_else(|| {
                    Error::precondition(format!("vertex {v} of part {part} has fewer cliques than the target sum"))
                })?;
                for &i in ids {
                    w[i] = (w[i] * s).min(1.0);
                }
            }
        }
        let worst = through
            .iter()
            .map(|ids| (ids.iter().map(|&i| w[i]).sum::<f64>() - t).abs() / t)
            .fold(0.0, f64::max);
        if worst < tol {
            let weights = w.iter().map(|&x| approx_scalar::<T>(x)).collect();
            return Ok(CliqueWeighting {
                r,
                n,
                cliques,
                weights,
                target,
            });
        }
    }
    Err(Error::stage("fractional-matching", "proportional fitting did not converge"))
}

fn approx_scalar<T: Scalar>(x: f64) -> T {
    const DEN: i128 = 1 << 52;
    T::from_ratio((x * DEN as f64).round() as i128, DEN)
}

/// A 0/1 weighting drawn from `ω` and its vertex sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliqueSample {
    pub cliques: Vec<Vec<Vertex>>,
    pub vertex_sums: Vec<u64>,
    pub target: f64,
    pub max_deviation: f64,
}

/// Keeps each clique independently with probability `ω(H)`.
pub fn sample_clique_regularization<T: Scalar>(
    w: &CliqueWeighting<T>,
    rng: &mut SeededRng,
) -> CliqueSample {
    let mut kept = Vec::new();
    let mut sums = vec![0u64; w.r * w.n];
    for (c, x) in w.cliques.iter().zip(&w.weights) {
        if rng.gen::<f64>() < x.to_f64_lossy() {
            for &v in c {
                sums[v as usize] += 1;
            }
            kept.push(c.clone());
        }
    }
    let target = w.target.to_f64_lossy();
    let max_deviation = sums
        .iter()
        .map(|&s| (s as f64 - target).abs())
        .fold(0.0, f64::max);
    CliqueSample {
        cliques: kept,
        vertex_sums: sums,
        target,
        max_deviation,
    }
}
