//! Monte Carlo estimates of spread constants with confidence bounds.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::hypergraph::Vertex;
use crate::rng::SeededRng;

/// Quantile of `Beta(a, b)` by bisection on its CDF.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let dist = Beta::new(a, b).expect("positive shape");
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided Clopper–Pearson interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let tail = (1.0 - confidence) / 2.0;
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        beta_quantile(x, n - x + 1.0, tail)
    };
    let hi = if successes == trials {
        1.0
    } else {
        beta_quantile(x + 1.0, n - x, 1.0 - tail)
    };
    (lo, hi)
}

/// One-sided Clopper–Pearson upper bound.
pub fn clopper_pearson_upper(successes: u64, trials: u64, confidence: f64) -> f64 {
    clopper_pearson(successes, trials, 2.0 * confidence - 1.0).1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Confidence of the one-sided upper bounds.
    pub confidence: f64,
    /// Pairs are counted among this many most frequent singletons.
    pub top_k: usize,
    /// Largest tolerated fraction of failed sampler calls.
    pub max_failure_fraction: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            confidence: 0.95,
            top_k: 64,
            max_failure_fraction: 0.5,
        }
    }
}

/// A tracked set and its empirical frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetRow {
    pub set: Vec<Vec<Vertex>>,
    pub count: u64,
    pub p_hat: f64,
    pub upper: f64,
}

/// Statistics for sets of one size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeStat {
    pub size: usize,
    pub max_count: u64,
    pub max_p: f64,
    pub upper: f64,
    /// `max_p^{1/size} · normalizer`.
    pub implied_c: f64,
    /// Rows sorted by decreasing count (at most `top_k`).
    pub rows: Vec<SetRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadEstimate {
    pub trials: u64,
    pub failures: u64,
    pub seed: u64,
    pub normalizer: f64,
    pub ci_method: String,
    pub confidence: f64,
    pub sizes: Vec<SizeStat>,
}

impl SpreadEstimate {
    pub fn size(&self, s: usize) -> Option<&SizeStat> {
        self.sizes.iter().find(|x| x.size == s)
    }

    /// One row per tracked set: `size,set,count,trials,p_hat,upper`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,set,count,trials,p_hat,upper\n");
        for st in &self.sizes {
            for r in &st.rows {
                let set: Vec<String> = r
                    .set
                    .iter()
                    .map(|e| e.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("-"))
                    .collect();
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    st.size,
                    set.join("|"),
                    r.count,
                    self.trials,
                    r.p_hat,
                    r.upper
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain data")
    }
}

/// Frequencies of items (and of pairs of frequent items) across samples.
struct Tally {
    items: Vec<Vec<Vertex>>,
    samples: Vec<Vec<u32>>,
    failures: u64,
}

fn run_trials<F>(trials: u64, rng: &SeededRng, sampler: F) -> Result<Tally>
where
    F: Fn(&SeededRng) -> Result<Vec<Vec<Vertex>>> + Sync,
{
    let outcomes: Vec<Result<Vec<Vec<Vertex>>>> = (0..trials)
        .into_par_iter()
        .map(|t| sampler(&rng.child(t)))
        .collect();
    let mut index: HashMap<Vec<Vertex>, u32> = HashMap::new();
    let mut tally = Tally {
        items: Vec::new(),
        samples: Vec::with_capacity(trials as usize),
        failures: 0,
    };
    for out in outcomes {
        match out {
            Ok(sets) => {
                let mut ids: Vec<u32> = sets
                    .into_iter()
                    .map(|mut e| {
                        e.sort_unstable();
                        let next = index.len() as u32;
                        *index.entry(e.clone()).or_insert_with(|| {
                            tally.items.push(e);
                            next
                        })
                    })
                    .collect();
                ids.sort_unstable();
                ids.dedup();
                tally.samples.push(ids);
            }
            Err(e @ Error::Invalid(_)) => return Err(e),
            Err(_) => tally.failures += 1,
        }
    }
    Ok(tally)
}

fn summarise(
    tally: &Tally,
    max_set_size: usize,
    normalizer: f64,
    cfg: &EstimatorConfig,
    trials: u64,
    seed: u64,
    ordered: bool,
) -> Result<SpreadEstimate> {
    let ok = tally.samples.len() as u64;
    if ok == 0 || tally.failures as f64 > cfg.max_failure_fraction * trials as f64 {
        return Err(Error::RetriesExhausted {
            attempts: trials as u32,
            reason: format!("sampler failed in {} of {trials} trials", tally.failures),
        });
    }
    let mut single = vec![0u64; tally.items.len()];
    for s in &tally.samples {
        for &i in s {
            single[i as usize] += 1;
        }
    }
    let mut order: Vec<u32> = (0..single.len() as u32).collect();
    order.sort_by(|&a, &b| single[b as usize].cmp(&single[a as usize]).then(a.cmp(&b)));
    let row = |set: Vec<Vec<Vertex>>, count: u64| SetRow {
        set,
        count,
        p_hat: count as f64 / ok as f64,
        upper: clopper_pearson_upper(count, ok, cfg.confidence),
    };
    let stat = |size: usize, rows: Vec<SetRow>| {
        let max_count = rows.first().map_or(0, |r| r.count);
        let max_p = max_count as f64 / ok as f64;
        SizeStat {
            size,
            max_count,
            max_p,
            upper: clopper_pearson_upper(max_count, ok, cfg.confidence),
            implied_c: max_p.powf(1.0 / size as f64) * normalizer,
            rows,
        }
    };
    let top: Vec<u32> = order.iter().copied().take(cfg.top_k).collect();
    let mut sizes = vec![stat(
        1,
        top.iter()
            .map(|&i| row(vec![tally.items[i as usize].clone()], single[i as usize]))
            .collect(),
    )];
    if max_set_size >= 2 {
        let mut slot = vec![usize::MAX; tally.items.len()];
        for (j, &i) in top.iter().enumerate() {
            slot[i as usize] = j;
        }
        let k = top.len();
        let mut pair = vec![0u64; k * k];
        for s in &tally.samples {
            let hot: Vec<usize> = s.iter().map(|&i| slot[i as usize]).filter(|&j| j != usize::MAX).collect();
            for (x, &a) in hot.iter().enumerate() {
                for &b in &hot[x + 1..] {
                    pair[a.min(b) * k + a.max(b)] += 1;
                }
            }
        }
        let mut rows: Vec<(u64, usize, usize)> = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                let (ea, eb) = (&tally.items[top[a] as usize], &tally.items[top[b] as usize]);
                let overlap = if ordered {
                    ea.iter().zip(eb).any(|(x, y)| x == y)
                } else {
                    ea.iter().any(|v| eb.contains(v))
                };
                if overlap {
                    continue;
                }
                rows.push((pair[a * k + b], a, b));
            }
        }
        rows.sort_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        rows.truncate(cfg.top_k);
        sizes.push(stat(
            2,
            rows.into_iter()
                .map(|(c, a, b)| {
                    row(
                        vec![tally.items[top[a] as usize].clone(), tally.items[top[b] as usize].clone()],
                        c,
                    )
                })
                .collect(),
        ));
    }
    Ok(SpreadEstimate {
        trials: ok,
        failures: tally.failures,
        seed,
        normalizer,
        ci_method: "clopper-pearson one-sided".into(),
        confidence: cfg.confidence,
        sizes,
    })
}

/// Spread estimate of a sampler of edge sets.
///
/// Trial `t` calls `sampler(rng.child(t))`. Every edge is counted; disjoint
/// pairs are counted among the `top_k` most frequent edges (all pairs would
/// not fit in memory at the sizes of interest). `normalizer` turns the largest
/// marginal into a constant, e.g. `n^{k-1}`.
pub fn estimate_spread<F>(
    sampler: F,
    trials: u64,
    max_set_size: usize,
    normalizer: f64,
    cfg: &EstimatorConfig,
    rng: &SeededRng,
) -> Result<SpreadEstimate>
where
    F: Fn(&SeededRng) -> Result<Vec<Vec<Vertex>>> + Sync,
{
    if trials < 100 {
        return Err(Error::invalid("at least 100 trials are required"));
    }
    if !(1..=2).contains(&max_set_size) {
        return Err(Error::invalid("only set sizes 1 and 2 are tracked"));
    }
    let tally = run_trials(trials, rng, sampler)?;
    summarise(&tally, max_set_size, normalizer, cfg, trials, rng.seed(), false)
}

/// Vertex-spread of an embedding sampler plus the spread of the image edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSpreadEstimate {
    /// Sets are `[x, y]`, meaning `φ(x) = y`; normalizer `n`.
    pub vertex: SpreadEstimate,
    /// Host edges `φ(u) φ(v)` over the given graph edges; normalizer `n`.
    pub image_edges: Option<SpreadEstimate>,
}

impl VertexSpreadEstimate {
    /// Largest image-edge marginal allowed by the vertex-spread estimate:
    /// `Δ q² n` with `q` the largest vertex marginal.
    pub fn edge_bound(&self, max_degree: usize, n: usize) -> f64 {
        let q = self.vertex.sizes[0].max_p;
        max_degree as f64 * q * q * n as f64
    }
}

/// Estimates `max P[φ(x) = y]` (sets of size 1 and, among the `top_k`
/// hottest assignments, size 2). With `edges`, also the single-edge marginals
/// of the image of those edges.
pub fn estimate_vertex_spread<F>(
    sampler: F,
    n: usize,
    edges: Option<&[(Vertex, Vertex)]>,
    trials: u64,
    cfg: &EstimatorConfig,
    rng: &SeededRng,
) -> Result<VertexSpreadEstimate>
where
    F: Fn(&SeededRng) -> Result<Vec<Vertex>> + Sync,
{
    if trials < 100 {
        return Err(Error::invalid("at least 100 trials are required"));
    }
    let maps: Vec<Result<Vec<Vertex>>> = (0..trials).into_par_iter().map(|t| sampler(&rng.child(t))).collect();
    let as_sets = |f: &dyn Fn(&[Vertex]) -> Vec<Vec<Vertex>>| {
        let sets: Vec<Result<Vec<Vec<Vertex>>>> = maps
            .iter()
            .map(|m| match m {
                Ok(m) => Ok(f(m)),
                Err(e) => Err(Error::stage("sampler", e.to_string())),
            })
            .collect();
        let mut index: HashMap<Vec<Vertex>, u32> = HashMap::new();
        let mut tally = Tally {
            items: Vec::new(),
            samples: Vec::new(),
            failures: 0,
        };
        for s in sets {
            match s {
                Ok(sets) => {
                    let mut ids: Vec<u32> = sets
                        .into_iter()
                        .map(|e| {
                            let next = index.len() as u32;
                            *index.entry(e.clone()).or_insert_with(|| {
                                tally.items.push(e);
                                next
                            })
                        })
                        .collect();
                    ids.sort_unstable();
                    ids.dedup();
                    tally.samples.push(ids);
                }
                Err(_) => tally.failures += 1,
            }
        }
        tally
    };
    if let Some(Err(Error::Invalid(msg))) = maps.iter().find(|m| matches!(m, Err(Error::Invalid(_)))) {
        return Err(Error::invalid(msg.clone()));
    }
    // assignments are ordered pairs; the first entry is the tree vertex
    let vt = as_sets(&|m| m.iter().enumerate().map(|(x, &y)| vec![x as Vertex, y]).collect());
    let vertex = summarise(&vt, 2, n as f64, cfg, trials, rng.seed(), true)?;
    let image_edges = match edges {
        Some(edges) => {
            let et = as_sets(&|m| {
                edges
                    .iter()
                    .map(|&(u, v)| {
                        let (a, b) = (m[u as usize], m[v as usize]);
                        vec![a.min(b), a.max(b)]
                    })
                    .collect()
            });
            Some(summarise(&et, 1, n as f64, cfg, trials, rng.seed(), false)?)
        }
        None => None,
    };
    Ok(VertexSpreadEstimate { vertex, image_edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    #[test]
    fn interval_edges() {
        let (lo, hi) = clopper_pearson(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-6);
        let (lo, hi) = clopper_pearson(10, 10, 0.95);
        assert!((lo - 0.025f64.powf(0.1)).abs() < 1e-6);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(50, 100, 0.95);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-6);
    }

    #[test]
    fn point_mass_has_q_one() {
        let est = estimate_spread(
            |_| Ok(vec![vec![0, 1], vec![2, 3]]),
            100,
            2,
            1.0,
            &EstimatorConfig::default(),
            &SeededRng::new(0),
        )
        .unwrap();
        assert_eq!(est.sizes[0].max_p, 1.0);
        assert_eq!(est.sizes[1].max_p, 1.0);
        assert_eq!(est.sizes[0].implied_c, 1.0);
    }

    #[test]
    fn identity_embedding_has_max_one() {
        let est = estimate_vertex_spread(|_| Ok(vec![0, 1, 2]), 3, None, 100, &EstimatorConfig::default(), &SeededRng::new(0)).unwrap();
        assert_eq!(est.vertex.sizes[0].max_p, 1.0);
    }

    #[test]
    fn uniform_bijection_marginals() {
        let n = 10;
        let est = estimate_vertex_spread(
            |r| {
                let mut p: Vec<Vertex> = (0..n as Vertex).collect();
                p.shuffle(&mut r.clone());
                Ok(p)
            },
            n,
            None,
            4000,
            &EstimatorConfig::default(),
            &SeededRng::new(1),
        )
        .unwrap();
        let rows = &est.vertex.sizes[0].rows;
        assert!(rows.iter().all(|r| r.upper >= 1.0 / n as f64));
        assert!(est.vertex.sizes[0].max_p < 0.14);
    }

    #[test]
    fn pair_counts_never_exceed_singles() {
        let est = estimate_spread(
            |r| {
                let mut p: Vec<Vertex> = (0..6).collect();
                p.shuffle(&mut r.clone());
                Ok((0..6).map(|a| vec![a, 6 + p[a as usize]]).collect())
            },
            500,
            2,
            6.0,
            &EstimatorConfig::default(),
            &SeededRng::new(2),
        )
        .unwrap();
        let single: HashMap<Vec<Vertex>, u64> = est.sizes[0].rows.iter().map(|r| (r.set[0].clone(), r.count)).collect();
        for r in &est.sizes[1].rows {
            assert!(r.count <= single[&r.set[0]].min(single[&r.set[1]]));
        }
        assert!(est.to_csv().lines().count() > 1);
    }

    #[test]
    fn persistent_failure_is_an_error() {
        let r = estimate_spread(
            |_| Err(Error::stage("x", "always")),
            100,
            1,
            1.0,
            &EstimatorConfig::default(),
            &SeededRng::new(0),
        );
        assert!(r.is_err());
    }
}
