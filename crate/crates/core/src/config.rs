//! Declarative run configuration: one `key = value` pair per line, `#`
//! comments, unknown keys rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::engines::{Construction, Scope};
use crate::machine::Fallback;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub construction: Construction,
    /// Number of stages executed after initialization.
    pub horizon: u64,
    /// Candidates examined when searching for auxiliary extenders.
    pub aux_budget: u64,
    /// Step budget for equivalence and extension checks.
    pub eq_budget: u64,
    /// Trailing stages that must be quiet for a snapshot to count as stable.
    pub window: u64,
    pub scope: Scope,
    pub opponents: Fallback,
    /// Adversary script files, resolved relative to the config file.
    pub scripts: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            construction: Construction::Single,
            horizon: 1000,
            aux_budget: 1 << 20,
            eq_budget: 64,
            window: 100,
            scope: Scope::TriggerRow,
            opponents: Fallback::Programs,
            scripts: Vec::new(),
        }
    }
}

pub const KEYS: [&str; 8] = [
    "construction",
    "horizon",
    "aux_budget",
    "eq_budget",
    "window",
    "scope",
    "opponents",
    "scripts",
];

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        msg: e.to_string(),
    })
}

impl RunConfig {
    /// Sets one key. Paths in `scripts` are kept as written.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "construction" => self.construction = parse_value(key, value)?,
            "horizon" => self.horizon = parse_value(key, value)?,
            "aux_budget" => self.aux_budget = parse_value(key, value)?,
            "eq_budget" => self.eq_budget = parse_value(key, value)?,
            "window" => self.window = parse_value(key, value)?,
            "scope" => self.scope = parse_value(key, value)?,
            "opponents" => self.opponents = parse_value(key, value)?,
            "scripts" => {
                self.scripts = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                msg: "expected `key = value`".into(),
            })?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative script paths are resolved against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.scripts {
            if s.is_relative() {
                *s = base.join(&*s);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        Ok(())
    }

    /// The single-line form stored in trace headers; script paths are left
    /// out because traces embed the scripts themselves.
    pub fn header(&self) -> String {
        format!(
            "construction={} horizon={} aux_budget={} eq_budget={} window={} scope={} opponents={}",
            self.construction,
            self.horizon,
            self.aux_budget,
            self.eq_budget,
            self.window,
            self.scope,
            self.opponents
        )
    }

    pub fn from_header(line: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for tok in line.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: 1,
                msg: format!("bad token `{tok}`"),
            })?;
            if k == "scripts" {
                return Err(ConfigError::UnknownKey(k.into()));
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
