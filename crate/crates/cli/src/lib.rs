//! The `spread` command line: configuration, experiment commands and the run ledger.

pub mod commands;
pub mod config;
pub mod doc;
pub mod ledger;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{parse_config_file, Config};
use crate::ledger::{append, ledger_dir, now_ms, RunRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Negative(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] spread_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use spread_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Negative(_) => EXIT_NEGATIVE,
            CliError::Io(_) => EXIT_IO,
            CliError::Core(E::Invalid(_)) => EXIT_USAGE,
            CliError::Core(E::Precondition(_)) => EXIT_NEGATIVE,
            CliError::Core(_) => EXIT_EXHAUSTED,
        }
    }
}

macro_rules! params {
    ($($field:ident),* $(,)?) => {
        /// Configuration keys settable by flag; each command accepts a subset.
        #[derive(Args, Debug, Default, Clone)]
        pub struct Params {
            $(#[arg(long)] pub $field: Option<String>,)*
            /// Attach per-stage traces to the output.
            #[arg(long)]
            pub trace: bool,
        }

        impl Params {
            pub fn pairs(&self) -> Vec<(String, String)> {
                let mut out = Vec::new();
                $(if let Some(v) = &self.$field {
                    out.push((stringify!($field).replace('_', "-"), v.clone()));
                })*
                if self.trace {
                    out.push(("trace".into(), "true".into()));
                }
                out
            }
        }
    };
}

params!(
    host, n, k, r, d, c, big_d, threshold, margin, shape, max_degree, property, trials, target, width,
    budget, ns, ps, a_grid, cs, set_size, confidence, top_k, retries, seed, out, host_out, structure, index,
);

#[derive(Parser, Debug)]
#[command(name = "spread", version, about = "Spread samplers, exact oracles and threshold experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` file applied before flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ledger directory (default: $SPREAD_LEDGER_DIR, else ./spread-runs).
    #[arg(long, global = true)]
    pub ledger: Option<PathBuf>,
    #[arg(long, global = true)]
    pub no_ledger: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a host, tree or partite system as JSON.
    Generate {
        kind: Option<String>,
        #[command(flatten)]
        p: Params,
    },
    /// Draw one structure from a sampler and check it.
    Sample {
        sampler: Option<String>,
        #[command(flatten)]
        p: Params,
    },
    /// Check a structure document against a host document.
    Verify {
        #[command(flatten)]
        p: Params,
    },
    /// Empirical marginals of a sampler.
    EstimateSpread {
        sampler: Option<String>,
        #[command(flatten)]
        p: Params,
    },
    /// Bisect the containment curve to its 1/2 crossing.
    Threshold {
        #[command(flatten)]
        p: Params,
    },
    /// Thresholds along a list of sizes, normalised.
    Scaling {
        #[command(flatten)]
        p: Params,
    },
    /// Clique-complex versus graph containment curves.
    Couple {
        #[command(flatten)]
        p: Params,
    },
    /// Success rates over a grid of sampler constants.
    Calibrate {
        sampler: Option<String>,
        #[command(flatten)]
        p: Params,
    },
    /// Re-run a recorded run and compare outcomes.
    Replay {
        record: Option<String>,
        #[command(flatten)]
        p: Params,
    },
}

impl Command {
    fn split(&self) -> (&'static str, Vec<(String, String)>) {
        let with = |key: &str, pos: &Option<String>, p: &Params| {
            let mut v: Vec<(String, String)> = pos.iter().map(|s| (key.to_string(), s.clone())).collect();
            v.extend(p.pairs());
            v
        };
        match self {
            Command::Generate { kind, p } => ("generate", with("kind", kind, p)),
            Command::Sample { sampler, p } => ("sample", with("sampler", sampler, p)),
            Command::Verify { p } => ("verify", p.pairs()),
            Command::EstimateSpread { sampler, p } => ("estimate-spread", with("sampler", sampler, p)),
            Command::Threshold { p } => ("threshold", p.pairs()),
            Command::Scaling { p } => ("scaling", p.pairs()),
            Command::Couple { p } => ("couple", p.pairs()),
            Command::Calibrate { sampler, p } => ("calibrate", with("sampler", sampler, p)),
            Command::Replay { record, p } => ("replay", with("record", record, p)),
        }
    }
}

/// Defaults, then `--config`, then flags.
pub fn resolve(cli: &Cli) -> Result<(&'static str, Config), CliError> {
    let (name, flags) = cli.command.split();
    let mut cfg = Config::from_defaults(commands::defaults(name));
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        cfg.overlay(parse_config_file(&text)?, "config file")?;
    }
    cfg.overlay(flags, "flags")?;
    Ok((name, cfg))
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let (name, cfg) = match resolve(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("spread: {e}");
            return e.exit_code();
        }
    };
    let started_ms = now_ms();
    let (code, outcome, artifacts) = match commands::execute(name, &cfg).and_then(|o| o.emit(&cfg).map(|a| (o, a))) {
        Ok((o, artifacts)) => (o.code, o.payload, artifacts),
        Err(e) => {
            eprintln!("spread: {e}");
            (e.exit_code(), json!({ "error": e.to_string() }), Vec::new())
        }
    };
    if !cli.no_ledger {
        let record = RunRecord {
            schema: doc::schema_tag("run"),
            command: name.to_string(),
            digest: cfg.digest(name),
            seed: cfg.get("seed").unwrap_or(0),
            config: cfg,
            started_ms,
            finished_ms: now_ms(),
            exit_code: code,
            outcome,
            artifacts,
        };
        if let Err(e) = append(&ledger_dir(cli.ledger.as_deref()), &record) {
            eprintln!("spread: {e}");
            return EXIT_IO;
        }
    }
    code
}
