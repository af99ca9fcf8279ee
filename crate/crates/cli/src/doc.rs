//! Schema-versioned JSON documents for hosts and sampled structures.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use spread_core::bipartite::BipartiteGraph;
use spread_core::matching::{Factor, Matching};
use spread_core::regularity::PartiteSystem;
use spread_core::tree::{PartialEmbedding, RootedTree};
use spread_core::{Graph, Hypergraph, Vertex};

use crate::CliError;

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_MINOR: u32 = 0;

pub fn schema_tag(name: &str) -> String {
    format!("spread.{name}/{SCHEMA_MAJOR}.{SCHEMA_MINOR}")
}

/// Accepts `spread.<name>/<major>.<minor>` with the supported major version.
pub fn check_schema(doc: &Value, name: &str) -> Result<(), CliError> {
    let tag = doc
        .get("schema")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::Usage("document has no schema tag".into()))?;
    let prefix = format!("spread.{name}/");
    let version = tag
        .strip_prefix(&prefix)
        .ok_or_else(|| CliError::Usage(format!("expected a `{name}` document, found `{tag}`")))?;
    let major: u32 = version
        .split('.')
        .next()
        .and_then(|m| m.parse().ok())
        .ok_or_else(|| CliError::Usage(format!("malformed schema version `{tag}`")))?;
    if major != SCHEMA_MAJOR {
        return Err(CliError::Usage(format!(
            "unsupported major version {major} of `{name}` (this build reads {SCHEMA_MAJOR})"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "kebab-case")]
pub enum HostData {
    Hypergraph(Hypergraph),
    Graph(Graph),
    Bipartite(BipartiteGraph),
    System(PartiteSystem),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Structure {
    HypergraphMatching { edges: Vec<Vec<Vertex>> },
    BipartiteMatching { pairs: Vec<(Vertex, Vertex)> },
    Factor { r: usize, cliques: Vec<Vec<Vertex>> },
    TreeEmbedding { tree: RootedTree, map: Vec<Vertex> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Valid => "valid",
            Verdict::Invalid => "invalid",
        }
    }
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Valid
        } else {
            Verdict::Invalid
        }
    }
}

fn bipartite_pm_valid(g: &BipartiteGraph, pairs: &[(Vertex, Vertex)]) -> bool {
    if g.na() != g.nb() || pairs.len() != g.na() {
        return false;
    }
    let mut used = (vec![false; g.na()], vec![false; g.nb()]);
    pairs.iter().all(|&(a, b)| {
        (a as usize) < g.na()
            && (b as usize) < g.nb()
            && g.has_edge(a, b)
            && !std::mem::replace(&mut used.0[a as usize], true)
            && !std::mem::replace(&mut used.1[b as usize], true)
    })
}

fn embedding_valid(tree: &RootedTree, map: &[Vertex], g: &Graph) -> bool {
    if map.len() != tree.n() || g.n() != tree.n() {
        return false;
    }
    let mut emb = PartialEmbedding::new(tree.n(), g.n());
    for (v, &x) in map.iter().enumerate() {
        if (x as usize) >= g.n() || emb.place(v as Vertex, x).is_err() {
            return false;
        }
    }
    tree.edges().iter().all(|&(u, v)| g.has_edge(map[u as usize], map[v as usize]))
}

/// Whether `s` is a spanning structure of the right kind in `host`.
pub fn verify(s: &Structure, host: &HostData) -> Result<Verdict, CliError> {
    let ok = match (s, host) {
        (Structure::HypergraphMatching { edges }, HostData::Hypergraph(h)) => {
            Matching::new(edges.clone()).is_perfect_in(h)
        }
        (Structure::HypergraphMatching { edges }, HostData::Graph(g)) => {
            Matching::new(edges.clone()).is_perfect_in(&g.to_hypergraph())
        }
        (Structure::BipartiteMatching { pairs }, HostData::Bipartite(g)) => bipartite_pm_valid(g, pairs),
        (Structure::Factor { r, cliques }, HostData::Graph(g)) => Factor::new(cliques.clone()).is_perfect_in(g, *r),
        (Structure::Factor { r, cliques }, HostData::System(sys)) => {
            *r == sys.r() && Factor::new(cliques.clone()).is_perfect_in(&sys.to_graph(), *r)
        }
        (Structure::TreeEmbedding { tree, map }, HostData::Graph(g)) => embedding_valid(tree, map, g),
        _ => return Err(CliError::Usage("structure and host types do not match".into())),
    };
    Ok(ok.into())
}

pub fn host_doc(host: &HostData) -> Value {
    serde_json::json!({ "schema": schema_tag("host"), "host": host })
}

pub fn load_host(doc: &Value) -> Result<HostData, CliError> {
    check_schema(doc, "host")?;
    serde_json::from_value(doc["host"].clone()).map_err(|e| CliError::Usage(format!("bad host document: {e}")))
}

pub fn load_structure(doc: &Value) -> Result<Structure, CliError> {
    check_schema(doc, "structure")?;
    serde_json::from_value(doc["structure"].clone())
        .map_err(|e| CliError::Usage(format!("bad structure document: {e}")))
}
