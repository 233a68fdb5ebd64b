//! Key-value run configuration.
//!
//! Grammar: one `key = value` per line, `#` starts a comment, blank lines are
//! ignored, later lines override earlier ones. Command-line flags are applied
//! on top of the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use grain_core::rational::{parse_rational, Rational};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every key the tool understands.
pub const KNOWN_KEYS: &[&str] = &[
    "registry",
    "max_level",
    "budget",
    "machine",
    "input",
    "count",
    "game",
    "agent1",
    "agent2",
    "steps",
    "gamma",
    "eps",
    "eps_plan",
    "eps_resample",
    "eps_gap",
    "tie_level",
    "gap_every",
    "equilibrium_depth",
    "max_deadline",
    "lambda",
    "experiment",
    "seed",
    "seeds",
    "out_dir",
];

/// Keys that select where results go rather than what is computed; they do
/// not enter the config hash.
const UNHASHED: &[&str] = &["out_dir"];

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Directory relative paths in the file are resolved against.
    base: PathBuf,
    /// Output directory given on the command line.
    out_dir_flag: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Config, CliError> {
        let mut cfg = Config { values: BTreeMap::new(), base: base.to_path_buf(), out_dir_flag: None };
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected `key = value`", ln + 1)))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| CliError::Config(format!("config line {}: {e}", ln + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config { values: BTreeMap::new(), base: PathBuf::from("."), out_dir_flag: None });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::parse(&text, &base)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::Config(format!("missing `{key}`")))
    }

    pub fn num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn rational(&self, key: &str, default: Rational) -> Result<Rational, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_rational(v).map_err(|e| CliError::Config(format!("`{key}`: {e}"))),
        }
    }

    /// A path value, resolved against the config file's directory.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.base.join(v))
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        self.out_dir_flag = Some(dir);
    }

    /// Output directory: the flag, else `out_dir` from the file, else `.`.
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir_flag.clone().or_else(|| self.path("out_dir")).unwrap_or_else(|| PathBuf::from("."))
    }

    /// Seeds from `seeds` (`a..b` half-open, or a comma list, possibly
    /// empty), else the single `seed`, else seed 0. Returned sorted and
    /// deduplicated.
    pub fn seeds(&self) -> Result<Vec<u64>, CliError> {
        let bad = |v: &str| CliError::Config(format!("`seeds`: cannot parse `{v}`"));
        let mut out: Vec<u64> = match self.get("seeds") {
            Some(v) if v.contains("..") => {
                let (a, b) = v.split_once("..").unwrap();
                let a: u64 = a.trim().parse().map_err(|_| bad(v))?;
                let b: u64 = b.trim().parse().map_err(|_| bad(v))?;
                (a..b).collect()
            }
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| bad(v)))
                .collect::<Result<_, _>>()?,
            None => vec![self.num("seed", 0u64)?],
        };
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Canonical text of the effective configuration.
    pub fn canonical(&self) -> String {
        self.values.iter().filter(|(k, _)| !UNHASHED.contains(&k.as_str())).map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Truncated SHA-256 of [`Config::canonical`], prefixed by the command.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(self.canonical().as_bytes());
        hex::encode(&h.finalize()[..16])
    }
}
