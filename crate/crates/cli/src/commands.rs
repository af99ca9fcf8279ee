//! Command implementations. Every command is a pure function of its resolved
//! configuration, which is what makes `replay` possible.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use spread_core::absorption::{sample_spread_pm_dirac, DegreeCondition, EngineConfig, PartiteInstance};
use spread_core::bipartite::BipartiteGraph;
use spread_core::estimator::{clopper_pearson, estimate_spread, estimate_vertex_spread, EstimatorConfig};
use spread_core::exact::binomial_subgraph;
use spread_core::hypergraph::CompleteHost;
use spread_core::partite_factor::{sample_spread_kr_factor, KrFactorConfig};
use spread_core::percolation::{
    clique_coupling_comparison, estimate_threshold, kr_factor_normalizer, pm_normalizer, scaling_experiment,
    to_csv, CheckerConfig, Host, Property, ScalingTable, ThresholdConfig,
};
use spread_core::regularity::{
    generate_super_regular_pair, generate_super_regular_system, GeneratorConfig, PartiteSystem,
};
use spread_core::spread_bipartite::{
    attempt_spread_pm, default_c, sample_spread_pm_bipartite, sample_spread_star_matching, SpreadPmConfig,
    StarDemand,
};
use spread_core::tree::{
    embed_tree, embed_tree_dense, generate_tree, synthetic_decomposition, ClusterDecomposition, DenseConfig,
    RootedTree, SyntheticConfig, TreeConfig, TreeShape,
};
use spread_core::{Graph, Hypergraph, SeededRng, Vertex};

use crate::config::Config;
use crate::doc::{host_doc, load_host, load_structure, schema_tag, verify, HostData, Structure, Verdict};
use crate::{CliError, EXIT_NEGATIVE, EXIT_OK};

type Res<T> = Result<T, CliError>;

const GENERATE: &[(&str, &str)] = &[
    ("kind", "host"),
    ("host", "complete"),
    ("n", "30"),
    ("k", "3"),
    ("r", "3"),
    ("d", "0.5"),
    ("threshold", "0.55"),
    ("shape", "random"),
    ("max-degree", "3"),
    ("seed", "0"),
    ("out", ""),
];

const SAMPLER_KEYS: &[(&str, &str)] = &[
    ("sampler", "pm-bipartite"),
    ("host", "random"),
    ("n", "100"),
    ("k", "3"),
    ("r", "3"),
    ("d", "auto"),
    ("c", "0"),
    ("big-d", "0"),
    ("threshold", "auto"),
    ("margin", "0.3"),
    ("shape", "random"),
    ("max-degree", "3"),
    ("retries", "auto"),
    ("seed", "0"),
];

const PERCOLATION_KEYS: &[(&str, &str)] = &[
    ("k", "2"),
    ("property", "pm"),
    ("d", "0.75"),
    ("threshold", "0.55"),
    ("trials", "200"),
    ("target", "0.5"),
    ("width", "0.1"),
    ("budget", "5000000"),
    ("seed", "0"),
    ("out", ""),
];

/// Keys and default values accepted by `command`.
pub fn defaults(command: &str) -> &'static [(&'static str, &'static str)] {
    use std::sync::OnceLock;
    static TABLES: OnceLock<Vec<(&'static str, Vec<(&'static str, &'static str)>)>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        let join = |a: &[(&'static str, &'static str)], b: &[(&'static str, &'static str)]| {
            let mut v = a.to_vec();
            v.extend_from_slice(b);
            v
        };
        vec![
            ("generate", GENERATE.to_vec()),
            ("sample", join(SAMPLER_KEYS, &[("trace", "false"), ("out", ""), ("host-out", "")])),
            ("verify", vec![("structure", ""), ("host", "")]),
            (
                "estimate-spread",
                join(
                    SAMPLER_KEYS,
                    &[("trials", "1000"), ("set-size", "2"), ("confidence", "0.95"), ("top-k", "64"), ("out", "")],
                ),
            ),
            ("threshold", join(&[("host", "knn"), ("n", "128")], PERCOLATION_KEYS)),
            ("scaling", {
                let mut v = join(&[("host", "complete"), ("ns", "30,60,120")], PERCOLATION_KEYS);
                v.iter_mut().filter(|(k, _)| *k == "k").for_each(|e| e.1 = "3");
                v
            }),
            (
                "couple",
                vec![
                    ("n", "30"),
                    ("r", "3"),
                    ("ps", "auto"),
                    ("a-grid", "0.5,1,1.5,2,2.5,3"),
                    ("trials", "100"),
                    ("budget", "5000000"),
                    ("seed", "0"),
                    ("out", ""),
                ],
            ),
            (
                "calibrate",
                vec![
                    ("sampler", "pm-bipartite"),
                    ("n", "100"),
                    ("d", "0.5"),
                    ("max-degree", "3"),
                    ("cs", "1,2,4,8,16,25,32"),
                    ("trials", "200"),
                    ("target", "0.75"),
                    ("seed", "0"),
                    ("out", ""),
                ],
            ),
            ("replay", vec![("record", ""), ("index", "")]),
        ]
    });
    tables
        .iter()
        .find(|(name, _)| *name == command)
        .map(|(_, t)| t.as_slice())
        .unwrap_or(&[])
}

/// Result of a command: the ledger payload, text for stdout, files keyed by
/// the configuration key that names their path, and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub payload: Value,
    pub text: String,
    pub files: Vec<(&'static str, String)>,
    pub code: i32,
}

impl Outcome {
    fn ok(payload: Value, text: String) -> Self {
        Self {
            payload,
            text,
            files: Vec::new(),
            code: EXIT_OK,
        }
    }

    fn file(mut self, key: &'static str, content: String) -> Self {
        self.files.push((key, content));
        self
    }

    /// Prints the text and writes every file whose path is configured.
    pub fn emit(&self, cfg: &Config) -> Res<Vec<String>> {
        if !self.text.is_empty() {
            print!("{}", self.text);
            if !self.text.ends_with('\n') {
                println!();
            }
        }
        let mut written = Vec::new();
        for (key, content) in &self.files {
            let path = cfg.get_str(key);
            if path.is_empty() {
                continue;
            }
            fs::write(path, content).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
            written.push(path.to_string());
        }
        Ok(written)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Exit code and ledger payload of running `command` under `cfg`.
pub fn outcome_of(command: &str, cfg: &Config) -> (i32, Value) {
    match execute(command, cfg) {
        Ok(o) => (o.code, o.payload),
        Err(e) => (e.exit_code(), json!({ "error": e.to_string() })),
    }
}

pub fn execute(command: &str, cfg: &Config) -> Res<Outcome> {
    match command {
        "generate" => generate(cfg),
        "sample" => sample(cfg),
        "verify" => verify_cmd(cfg),
        "estimate-spread" => estimate(cfg),
        "threshold" => threshold(cfg),
        "scaling" => scaling(cfg),
        "couple" => couple(cfg),
        "calibrate" => calibrate(cfg),
        "replay" => replay(cfg),
        other => Err(CliError::Usage(format!("unknown command `{other}`"))),
    }
}

fn master(cfg: &Config) -> Res<SeededRng> {
    Ok(SeededRng::new(cfg.get("seed")?))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Resolves `auto` to `fallback`.
fn get_or<T: std::str::FromStr>(cfg: &Config, key: &str, fallback: T) -> Res<T> {
    if cfg.get_str(key) == "auto" {
        Ok(fallback)
    } else {
        cfg.get(key)
    }
}

fn dirac_threshold(cfg: &Config, k: usize) -> Res<f64> {
    let fallback = match k {
        2 => 0.5,
        3 => 5.0 / 9.0,
        _ => return cfg.get("threshold").map_err(|_| usage("set --threshold for k ≥ 4")),
    };
    get_or(cfg, "threshold", fallback)
}

/// `G(n, d)` redrawn until its minimum degree is at least `threshold · n`.
fn dirac_graph(n: usize, d: f64, threshold: f64, rng: &mut SeededRng) -> Res<Graph> {
    let need = (threshold * n as f64).ceil() as usize;
    for _ in 0..1000 {
        let g = Graph::gnp(n, d, rng);
        if g.min_degree() >= need {
            return Ok(g);
        }
    }
    Err(spread_core::Error::RetriesExhausted {
        attempts: 1000,
        reason: format!("G({n}, {d}) never reached minimum degree {need}"),
    }
    .into())
}

fn generate(cfg: &Config) -> Res<Outcome> {
    let mut rng = master(cfg)?;
    let (n, k, r, d): (usize, usize, usize, f64) = (cfg.get("n")?, cfg.get("k")?, cfg.get("r")?, cfg.get("d")?);
    let doc = match cfg.get_str("kind") {
        "host" => {
            let host = match cfg.get_str("host") {
                "complete" if k == 2 => HostData::Graph(Graph::complete(n)),
                "complete" => HostData::Hypergraph(Hypergraph::complete(n, k)?),
                "knn" => HostData::Bipartite(BipartiteGraph::complete(n, n)),
                "gnp" => HostData::Graph(Graph::gnp(n, d, &mut rng)),
                "dirac" => HostData::Graph(dirac_graph(n, d, cfg.get("threshold")?, &mut rng)?),
                "random" => HostData::Hypergraph(binomial_subgraph(&Hypergraph::complete(n, k)?, d, &mut rng)),
                "pair" => HostData::Bipartite(generate_super_regular_pair(n, d, &GeneratorConfig::default(), &mut rng)?.0),
                other => return Err(usage(format!("unknown host `{other}`"))),
            };
            host_doc(&host)
        }
        "tree" => {
            let shape: TreeShape = cfg.get_str("shape").parse()?;
            let tree = generate_tree(n, cfg.get("max-degree")?, shape, &mut rng)?;
            json!({ "schema": schema_tag("tree"), "tree": tree })
        }
        "system" => host_doc(&HostData::System(generate_super_regular_system(
            r,
            n,
            d,
            &GeneratorConfig::default(),
            &mut rng,
        )?)),
        other => return Err(usage(format!("unknown kind `{other}`"))),
    };
    let text = pretty(&doc);
    let payload = json!({ "kind": cfg.get_str("kind"), "sha256": sha256_hex(text.as_bytes()) });
    let stdout = if cfg.get_str("out").is_empty() { text.clone() } else { String::new() };
    Ok(Outcome::ok(payload, stdout).file("out", text))
}

enum DiracHost {
    Complete(CompleteHost),
    Random(Hypergraph),
}

/// A sampler with its host fixed, ready for repeated draws.
enum Instance {
    PmBipartite {
        g: BipartiteGraph,
        pm: SpreadPmConfig,
    },
    PmDirac {
        host: DiracHost,
        cond: DegreeCondition,
        engine: EngineConfig,
    },
    KrFactor {
        sys: PartiteSystem,
        kr: KrFactorConfig,
    },
    KrAbsorb {
        sys: PartiteSystem,
        engine: EngineConfig,
    },
    Tree {
        tree: RootedTree,
        host: Graph,
        dec: Box<ClusterDecomposition>,
        tc: TreeConfig,
    },
    TreeDense {
        tree: RootedTree,
        host: Graph,
        dc: DenseConfig,
    },
}

impl Instance {
    fn build(cfg: &Config, rng: &mut SeededRng) -> Res<Self> {
        let sampler = cfg.get_str("sampler");
        let n: usize = cfg.get("n")?;
        let default_d = match sampler {
            "pm-dirac" => 0.95,
            "kr-absorb" => 0.9,
            "tree" | "tree-dense" => 0.75,
            _ => 0.5,
        };
        let d: f64 = get_or(cfg, "d", default_d)?;
        let c: usize = cfg.get("c")?;
        let c = if c == 0 { default_c(d) } else { c };
        let retries: Option<u32> = match cfg.get_str("retries") {
            "auto" => None,
            _ => Some(cfg.get("retries")?),
        };
        let host_kind = cfg.get_str("host");
        let gen = GeneratorConfig::default();
        Ok(match sampler {
            "pm-bipartite" => {
                let g = match host_kind {
                    "complete" => BipartiteGraph::complete(n, n),
                    "random" => generate_super_regular_pair(n, d, &gen, rng)?.0,
                    other => return Err(usage(format!("pm-bipartite hosts are complete or random, not `{other}`"))),
                };
                let mut pm = SpreadPmConfig::new(c);
                pm.max_retries = retries.unwrap_or(pm.max_retries);
                Instance::PmBipartite { g, pm }
            }
            "pm-dirac" => {
                let k: usize = cfg.get("k")?;
                let host = match host_kind {
                    "complete" => DiracHost::Complete(CompleteHost { n, k }),
                    "random" => DiracHost::Random(binomial_subgraph(&Hypergraph::complete(n, k)?, d, rng)),
                    other => return Err(usage(format!("pm-dirac hosts are complete or random, not `{other}`"))),
                };
                let cond = DegreeCondition::new(1, dirac_threshold(cfg, k)?, cfg.get("margin")?)?;
                let mut engine = EngineConfig::default();
                engine.pipeline_retries = retries.unwrap_or(engine.pipeline_retries);
                Instance::PmDirac { host, cond, engine }
            }
            "kr-factor" | "kr-absorb" => {
                let sys = generate_super_regular_system(cfg.get("r")?, n, d, &gen, rng)?;
                if sampler == "kr-factor" {
                    let mut kr = KrFactorConfig::for_density(d);
                    kr.pm.c = c;
                    kr.round_retries = retries.unwrap_or(kr.round_retries);
                    Instance::KrFactor { sys, kr }
                } else {
                    let mut engine = EngineConfig {
                        partite_eps: cfg.get("margin")?,
                        ..EngineConfig::default()
                    };
                    engine.pipeline_retries = retries.unwrap_or(engine.pipeline_retries);
                    Instance::KrAbsorb { sys, engine }
                }
            }
            "tree" | "tree-dense" => {
                let shape: TreeShape = cfg.get_str("shape").parse()?;
                let tree = generate_tree(n, cfg.get("max-degree")?, shape, &mut rng.child(0))?;
                let big_d: usize = cfg.get("big-d")?;
                if sampler == "tree" {
                    let syn = SyntheticConfig {
                        density: d,
                        ..SyntheticConfig::default()
                    };
                    let (host, dec) = synthetic_decomposition(&tree, &syn, &mut rng.child(1))?;
                    let mut tc = TreeConfig::default();
                    tc.run_retries = retries.unwrap_or(tc.run_retries);
                    if big_d > 0 {
                        tc.star_d = big_d;
                    }
                    Instance::Tree {
                        tree,
                        host,
                        dec: Box::new(dec),
                        tc,
                    }
                } else {
                    let host = Graph::gnp(n, d, &mut rng.child(1));
                    let mut dc = DenseConfig::default();
                    dc.run_retries = retries.unwrap_or(dc.run_retries);
                    if big_d > 0 {
                        dc.star_d = big_d;
                    }
                    Instance::TreeDense { tree, host, dc }
                }
            }
            other => return Err(usage(format!("unknown sampler `{other}`"))),
        })
    }

    fn draw(&self, rng: &SeededRng) -> Res<(Structure, Value)> {
        Ok(match self {
            Instance::PmBipartite { g, pm } => {
                let s = sample_spread_pm_bipartite(g, pm, rng)?;
                (
                    Structure::BipartiteMatching {
                        pairs: s.matching.pairs(),
                    },
                    json!({ "attempts": s.attempts }),
                )
            }
            Instance::PmDirac { host, cond, engine } => {
                let s = match host {
                    DiracHost::Complete(h) => sample_spread_pm_dirac(h, *cond, engine, rng)?,
                    DiracHost::Random(h) => sample_spread_pm_dirac(h, *cond, engine, rng)?,
                };
                (
                    Structure::HypergraphMatching {
                        edges: s.matching.edges,
                    },
                    serde_json::to_value(&s.trace).expect("traces serialize"),
                )
            }
            Instance::KrFactor { sys, kr } => {
                let s = sample_spread_kr_factor(sys, kr, rng)?;
                (
                    Structure::Factor {
                        r: sys.r(),
                        cliques: s.factor.cliques,
                    },
                    json!({ "rounds": s.rounds }),
                )
            }
            Instance::KrAbsorb { sys, engine } => {
                let (f, trace) = PartiteInstance::new(sys, engine.clone())?.sample(rng)?;
                (
                    Structure::Factor {
                        r: sys.r(),
                        cliques: f.cliques,
                    },
                    serde_json::to_value(&trace).expect("traces serialize"),
                )
            }
            Instance::Tree { tree, host, dec, tc } => {
                let e = embed_tree(tree, host, dec, tc, rng)?;
                (
                    Structure::TreeEmbedding {
                        tree: tree.clone(),
                        map: e.map.clone(),
                    },
                    e.to_json(),
                )
            }
            Instance::TreeDense { tree, host, dc } => {
                let e = embed_tree_dense(tree, host, dc, rng)?;
                (
                    Structure::TreeEmbedding {
                        tree: tree.clone(),
                        map: e.map.clone(),
                    },
                    e.to_json(),
                )
            }
        })
    }

    fn host_data(&self) -> Res<HostData> {
        Ok(match self {
            Instance::PmBipartite { g, .. } => HostData::Bipartite(g.clone()),
            Instance::PmDirac { host, .. } => HostData::Hypergraph(match host {
                DiracHost::Complete(h) => Hypergraph::complete(h.n, h.k)?,
                DiracHost::Random(h) => h.clone(),
            }),
            Instance::KrFactor { sys, .. } | Instance::KrAbsorb { sys, .. } => HostData::System(sys.clone()),
            Instance::Tree { host, .. } | Instance::TreeDense { host, .. } => HostData::Graph(host.clone()),
        })
    }

    /// Sets fed to the estimator and the normaliser `1/q` of the expected spread.
    fn sets(&self, s: &Structure) -> Vec<Vec<Vertex>> {
        match (self, s) {
            (Instance::PmBipartite { g, .. }, Structure::BipartiteMatching { pairs }) => {
                let na = g.na() as Vertex;
                pairs.iter().map(|&(a, b)| vec![a, na + b]).collect()
            }
            (_, Structure::HypergraphMatching { edges }) => edges.clone(),
            (_, Structure::Factor { cliques, .. }) => cliques.clone(),
            _ => Vec::new(),
        }
    }

    fn normalizer(&self) -> f64 {
        match self {
            Instance::PmBipartite { g, .. } => g.na() as f64,
            Instance::PmDirac { host, .. } => {
                let (n, k) = match host {
                    DiracHost::Complete(h) => (h.n, h.k),
                    DiracHost::Random(h) => (h.n(), h.k()),
                };
                (n as f64).powi(k as i32 - 1)
            }
            Instance::KrFactor { sys, .. } | Instance::KrAbsorb { sys, .. } => (sys.n() as f64).powi(sys.r() as i32 - 1),
            Instance::Tree { tree, .. } | Instance::TreeDense { tree, .. } => tree.n() as f64,
        }
    }
}

fn sample(cfg: &Config) -> Res<Outcome> {
    let rng = master(cfg)?;
    let inst = Instance::build(cfg, &mut rng.child(0))?;
    let (structure, trace) = inst.draw(&rng.child(1))?;
    let host = inst.host_data()?;
    let verdict = verify(&structure, &host)?;
    let mut doc = json!({
        "schema": schema_tag("structure"),
        "sampler": cfg.get_str("sampler"),
        "seed": rng.seed(),
        "structure": structure,
        "verdict": verdict.as_str(),
    });
    if cfg.get_bool("trace")? {
        doc["trace"] = trace;
    }
    let text = pretty(&doc);
    let payload = json!({
        "sampler": cfg.get_str("sampler"),
        "verdict": verdict.as_str(),
        "sha256": sha256_hex(text.as_bytes()),
    });
    let stdout = if cfg.get_str("out").is_empty() {
        text.clone()
    } else {
        format!("{}\n", verdict.as_str())
    };
    let mut out = Outcome::ok(payload, stdout).file("out", text);
    if !cfg.get_str("host-out").is_empty() {
        out = out.file("host-out", pretty(&host_doc(&host)));
    }
    if verdict == Verdict::Invalid {
        out.code = EXIT_NEGATIVE;
    }
    Ok(out)
}

fn read_json(path: &str) -> Res<Value> {
    if path.is_empty() {
        return Err(usage("a file path is required"));
    }
    let text = fs::read_to_string(Path::new(path)).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{path}: {e}")))
}

fn verify_cmd(cfg: &Config) -> Res<Outcome> {
    let structure = load_structure(&read_json(cfg.get_str("structure"))?)?;
    let host = load_host(&read_json(cfg.get_str("host"))?)?;
    let verdict = verify(&structure, &host)?;
    let mut out = Outcome::ok(json!({ "verdict": verdict.as_str() }), format!("{}\n", verdict.as_str()));
    if verdict == Verdict::Invalid {
        out.code = EXIT_NEGATIVE;
    }
    Ok(out)
}

fn estimate(cfg: &Config) -> Res<Outcome> {
    let rng = master(cfg)?;
    let inst = Instance::build(cfg, &mut rng.child(0))?;
    let trials: u64 = cfg.get("trials")?;
    let ecfg = EstimatorConfig {
        confidence: cfg.get("confidence")?,
        top_k: cfg.get("top-k")?,
        ..EstimatorConfig::default()
    };
    let srng = rng.child(1);
    let out_path = cfg.get_str("out");
    let (payload, file) = match &inst {
        Instance::Tree { tree, .. } | Instance::TreeDense { tree, .. } => {
            let edges = tree.edges();
            let est = estimate_vertex_spread(
                |r| match inst.draw(r) {
                    Ok((Structure::TreeEmbedding { map, .. }, _)) => Ok(map),
                    Ok(_) => unreachable!("tree samplers return embeddings"),
                    Err(CliError::Core(e)) => Err(e),
                    Err(e) => Err(spread_core::Error::invalid(e.to_string())),
                },
                tree.n(),
                Some(&edges),
                trials,
                &ecfg,
                &srng,
            )?;
            let v = &est.vertex.sizes[0];
            let payload = json!({
                "trials": trials,
                "vertex_max_p": v.max_p,
                "vertex_upper": v.upper,
                "implied_c": v.implied_c,
                "edge_bound": est.edge_bound(tree.max_degree(), tree.n()),
                "image_edge_max_p": est.image_edges.as_ref().map(|e| e.sizes[0].max_p),
            });
            let file = if out_path.ends_with(".csv") {
                est.vertex.to_csv()
            } else {
                pretty(&json!({ "vertex": est.vertex.to_json(), "image_edges": est.image_edges.map(|e| e.to_json()) }))
            };
            (payload, file)
        }
        _ => {
            let est = estimate_spread(
                |r| match inst.draw(r) {
                    Ok((s, _)) => Ok(inst.sets(&s)),
                    Err(CliError::Core(e)) => Err(e),
                    Err(e) => Err(spread_core::Error::invalid(e.to_string())),
                },
                trials,
                cfg.get("set-size")?,
                inst.normalizer(),
                &ecfg,
                &srng,
            )?;
            let sizes: Vec<Value> = est
                .sizes
                .iter()
                .map(|s| json!({ "size": s.size, "max_p": s.max_p, "upper": s.upper, "implied_c": s.implied_c }))
                .collect();
            let payload = json!({ "trials": trials, "failures": est.failures, "normalizer": est.normalizer, "sizes": sizes });
            let file = if out_path.ends_with(".csv") { est.to_csv() } else { pretty(&est.to_json()) };
            (payload, file)
        }
    };
    Ok(Outcome::ok(payload.clone(), pretty(&payload)).file("out", file))
}

fn parse_property(s: &str) -> Res<Property> {
    match s {
        "pm" => Ok(Property::PerfectMatching),
        "triangle-factor" => Ok(Property::KrFactor(3)),
        _ => s
            .strip_prefix('k')
            .and_then(|t| t.strip_suffix("-factor"))
            .and_then(|r| r.parse().ok())
            .filter(|&r: &usize| r >= 2)
            .map(Property::KrFactor)
            .ok_or_else(|| usage(format!("unknown property `{s}` (pm, kR-factor)"))),
    }
}

/// The host and the normaliser of its threshold.
fn percolation_host(cfg: &Config, n: usize, prop: &Property, rng: &mut SeededRng) -> Res<(Host, f64)> {
    let k: usize = cfg.get("k")?;
    let name = cfg.get_str("host");
    let host = match name {
        "knn" => Host::bipartite(name, BipartiteGraph::complete(n, n)),
        "kn" => Host::graph(name, Graph::complete(n)),
        "complete" if k == 2 => Host::graph(name, Graph::complete(n)),
        "complete" => Host::hyper(name, Hypergraph::complete(n, k)?),
        "dirac" => Host::graph(name, dirac_graph(n, cfg.get("d")?, cfg.get("threshold")?, rng)?),
        other => return Err(usage(format!("unknown host `{other}` (knn, kn, complete, dirac)"))),
    };
    let norm = match prop {
        Property::PerfectMatching => match &host.structure {
            spread_core::percolation::HostStructure::Hyper(h) => pm_normalizer(n, h.k()),
            _ => pm_normalizer(n, 2),
        },
        Property::KrFactor(r) => kr_factor_normalizer(n, *r),
        Property::ContainsTree(_) => 1.0,
    };
    Ok((host, norm))
}

fn threshold_config(cfg: &Config) -> Res<ThresholdConfig> {
    Ok(ThresholdConfig {
        target: cfg.get("target")?,
        trials: cfg.get("trials")?,
        rel_width: cfg.get("width")?,
        initial: None,
        checker: CheckerConfig {
            budget: cfg.get("budget")?,
            ..CheckerConfig::default()
        },
    })
}

fn threshold(cfg: &Config) -> Res<Outcome> {
    let rng = master(cfg)?;
    let n: usize = cfg.get("n")?;
    let prop = parse_property(cfg.get_str("property"))?;
    let (host, norm) = percolation_host(cfg, n, &prop, &mut rng.child(0))?;
    let tc = ThresholdConfig {
        initial: Some(norm.min(0.5)),
        ..threshold_config(cfg)?
    };
    let est = estimate_threshold(&host, &prop, norm, &tc, &rng.child(1))?;
    let table = ScalingTable {
        drift: 1.0,
        rows: vec![est.clone()],
    };
    let payload = serde_json::to_value(&est).expect("estimates serialize");
    Ok(Outcome::ok(payload, table.to_csv()).file("out", to_csv(&est.points)))
}

fn scaling(cfg: &Config) -> Res<Outcome> {
    let rng = master(cfg)?;
    let ns: Vec<usize> = cfg.get_list("ns")?;
    let prop = parse_property(cfg.get_str("property"))?;
    let norm_of = |n: usize| percolation_host(cfg, n, &prop, &mut rng.child(0).child(n as u64)).map(|x| x.1);
    let norms: Vec<f64> = ns.iter().map(|&n| norm_of(n)).collect::<Res<_>>()?;
    let table = scaling_experiment(
        |n| {
            percolation_host(cfg, n, &prop, &mut rng.child(0).child(n as u64))
                .map(|x| x.0)
                .map_err(|e| match e {
                    CliError::Core(c) => c,
                    other => spread_core::Error::invalid(other.to_string()),
                })
        },
        &prop,
        &ns,
        |n| norms[ns.iter().position(|&m| m == n).expect("n from the list")],
        &threshold_config(cfg)?,
        &rng.child(1),
    )?;
    let payload = serde_json::to_value(&table).expect("tables serialize");
    let csv = table.to_csv();
    let text = format!("{csv}# drift {}\n", table.drift);
    Ok(Outcome::ok(payload, text).file("out", csv))
}

fn couple(cfg: &Config) -> Res<Outcome> {
    let rng = master(cfg)?;
    let n: usize = cfg.get("n")?;
    let r: usize = cfg.get("r")?;
    let ps: Vec<f64> = if cfg.get_str("ps") == "auto" {
        let base = pm_normalizer(n, r);
        (0..12).map(|i| (base * 0.5 * 32f64.powf(i as f64 / 11.0)).min(1.0)).collect()
    } else {
        cfg.get_list("ps")?
    };
    let a_grid: Vec<f64> = cfg.get_list("a-grid")?;
    let checker = CheckerConfig {
        budget: cfg.get("budget")?,
        ..CheckerConfig::default()
    };
    let cmp = clique_coupling_comparison(&Graph::complete(n), r, &ps, &a_grid, cfg.get("trials")?, &checker, &rng)?;
    let mut csv = String::from("curve,a,p,trials,successes,freq,ci_lo,ci_hi\n");
    let mut row = |curve: &str, a: f64, c: &spread_core::percolation::ContainmentResult| {
        csv.push_str(&format!("{curve},{a},{:e},{},{},{},{},{}\n", c.p, c.trials, c.successes, c.freq, c.ci_lo, c.ci_hi));
    };
    for c in &cmp.complex {
        row("complex", 0.0, c);
    }
    for curve in &cmp.factor {
        for c in &curve.points {
            row("factor", curve.a, c);
        }
    }
    let text = format!(
        "complex_p_half={}\naligned_a={}\n",
        cmp.complex_p_half.map_or("none".into(), |p| format!("{p:e}")),
        cmp.aligned_a.map_or("none".into(), |a| a.to_string())
    );
    let payload = serde_json::to_value(&cmp).expect("comparisons serialize");
    Ok(Outcome::ok(payload, text).file("out", csv))
}

fn calibrate(cfg: &Config) -> Res<Outcome> {
    let rng = master(cfg)?;
    let n: usize = cfg.get("n")?;
    let d: f64 = cfg.get("d")?;
    let cs: Vec<usize> = cfg.get_list("cs")?;
    let trials: u64 = cfg.get("trials")?;
    let target: f64 = cfg.get("target")?;
    let sampler = cfg.get_str("sampler");
    let trial_rng = rng.child(1);
    let success: Box<dyn Fn(usize, u64) -> Res<bool>> = match sampler {
        "pm-bipartite" => {
            let (g, _) = generate_super_regular_pair(n, d, &GeneratorConfig::default(), &mut rng.child(0))?;
            Box::new(move |c, t| Ok(attempt_spread_pm(&g, c, &mut trial_rng.child(t))?.is_some()))
        }
        "star" => {
            let delta: usize = cfg.get("max-degree")?;
            let na = (n / delta).max(1);
            let g = BipartiteGraph::random(na, n, d, &mut rng.child(0));
            let demand = StarDemand::new(vec![delta; na], delta);
            Box::new(move |c, t| match sample_spread_star_matching(&g, &demand, c, 1, &trial_rng.child(t)) {
                Ok(_) => Ok(true),
                Err(e) if e.is_exhaustion() => Ok(false),
                Err(e) => Err(e.into()),
            })
        }
        other => return Err(usage(format!("calibrate supports pm-bipartite and star, not `{other}`"))),
    };
    let mut rows = Vec::new();
    let mut csv = String::from("sampler,constant,trials,successes,rate,ci_lo,ci_hi\n");
    for &c in &cs {
        let mut s = 0u64;
        for t in 0..trials {
            s += success(c, t)? as u64;
        }
        let rate = s as f64 / trials as f64;
        let (lo, hi) = clopper_pearson(s, trials, 0.95);
        csv.push_str(&format!("{sampler},{c},{trials},{s},{rate},{lo},{hi}\n"));
        rows.push(json!({ "constant": c, "successes": s, "rate": rate, "ci_lo": lo, "ci_hi": hi }));
    }
    let chosen = cs
        .iter()
        .zip(&rows)
        .find(|(_, r)| r["rate"].as_f64().unwrap_or(0.0) >= target)
        .map(|(&c, _)| c);
    let payload = json!({ "sampler": sampler, "target": target, "rows": rows, "chosen": chosen });
    let text = format!("{csv}# chosen {}\n", chosen.map_or("none".into(), |c| c.to_string()));
    let mut out = Outcome::ok(payload, text).file("out", csv);
    if chosen.is_none() {
        out.code = EXIT_NEGATIVE;
    }
    Ok(out)
}

fn replay(cfg: &Config) -> Res<Outcome> {
    let path = cfg.get_str("record");
    if path.is_empty() {
        return Err(usage("replay needs a record or ledger path"));
    }
    let index = match cfg.get_str("index") {
        "" => None,
        _ => Some(cfg.get("index")?),
    };
    let rec = crate::ledger::read_record(Path::new(path), index)?;
    let (code, payload) = outcome_of(&rec.command, &rec.config);
    let reproduced = code == rec.exit_code && payload == rec.outcome;
    let digest_ok = rec.digest_ok();
    let verdict = if reproduced && digest_ok { "reproduced" } else { "mismatch" };
    let mut out = Outcome::ok(
        json!({ "command": rec.command, "digest": rec.digest, "digest_ok": digest_ok, "reproduced": reproduced }),
        format!("{verdict}\n"),
    );
    if verdict != "reproduced" {
        out.code = EXIT_NEGATIVE;
    }
    Ok(out)
}
