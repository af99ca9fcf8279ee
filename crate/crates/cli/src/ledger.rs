//! Append-only JSON-lines ledger of runs.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Config;
use crate::doc::check_schema;
use crate::CliError;

/// Directory holding `ledger.jsonl` when `--ledger` is not given.
pub const LEDGER_ENV: &str = "SPREAD_LEDGER_DIR";
pub const LEDGER_FILE: &str = "ledger.jsonl";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub schema: String,
    pub command: String,
    pub config: Config,
    pub digest: String,
    pub seed: u64,
    /// Unix milliseconds.
    pub started_ms: u128,
    pub finished_ms: u128,
    pub exit_code: i32,
    pub outcome: Value,
    pub artifacts: Vec<String>,
}

impl RunRecord {
    /// Whether the stored digest matches the stored configuration.
    pub fn digest_ok(&self) -> bool {
        self.config.digest(&self.command) == self.digest
    }

    pub fn from_value(v: Value) -> Result<Self, CliError> {
        check_schema(&v, "run")?;
        serde_json::from_value(v).map_err(|e| CliError::Usage(format!("bad run record: {e}")))
    }
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// `--ledger`, else the environment variable, else `./spread-runs`.
pub fn ledger_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(LEDGER_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("spread-runs"))
}

pub fn append(dir: &Path, record: &RunRecord) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(LEDGER_FILE);
    let mut line = serde_json::to_string(record).expect("records serialize");
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(line.as_bytes())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Reads a single-record JSON file, or line `index` of a ledger (the last
/// line by default; negative values count from the end).
pub fn read_record(path: &Path, index: Option<i64>) -> Result<RunRecord, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return RunRecord::from_value(v);
    }
    let lines: Vec<&str> = trimmed.lines().filter(|l| !l.trim().is_empty()).collect();
    let i = index.unwrap_or(-1);
    let idx = if i < 0 { lines.len() as i64 + i } else { i };
    let line = usize::try_from(idx)
        .ok()
        .and_then(|k| lines.get(k))
        .ok_or_else(|| CliError::Usage(format!("no record {i} in {}", path.display())))?;
    let v: Value = serde_json::from_str(line).map_err(|e| CliError::Usage(format!("bad record: {e}")))?;
    RunRecord::from_value(v)
}
