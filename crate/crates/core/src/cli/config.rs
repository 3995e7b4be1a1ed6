//! Experiment-grid config files.
//!
//! ```text
//! seed = 7
//! reps = 2000
//!
//! [baseline]
//! dgp = baseline
//! n = 100, 200, 500, 1000
//! d = 0, 0.1, 0.2, 0.25, 0.3
//! mode = size, power
//! ```
//!
//! Keys before the first section are defaults for every section. If the file
//! has no sections the defaults form a single grid. Lists are comma separated;
//! `#` and `;` start comments. Overrides (`key=value` or `section.key=value`)
//! take precedence over the file.

use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::depgraph::Convention;
use crate::dgp::DgpKind;
use crate::montecarlo::{Centring, Mode, SimConfig, DEFAULT_LEVELS, DEFAULT_REPS};

pub const KNOWN_KEYS: [&str; 12] = [
    "seed",
    "dgp",
    "n",
    "d",
    "mode",
    "reps",
    "levels",
    "p_edge",
    "gamma_spill",
    "p_treat",
    "convention",
    "centring",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line, when the problem comes from the file.
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, field: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            line,
            field: field.map(str::to_owned),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.field {
            write!(f, "field `{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

type Entries = BTreeMap<String, (String, Option<usize>)>;

#[derive(Debug, Clone, PartialEq, Default)]
struct Section {
    name: String,
    entries: Entries,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridConfig {
    globals: Entries,
    sections: Vec<Section>,
    overrides: Vec<(Option<String>, String, String)>,
}

fn check_key(key: &str, line: Option<usize>) -> Result<(), ConfigError> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(ConfigError::new(line, Some(key), "unknown key"))
    }
}

impl GridConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = GridConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        ConfigError::new(Some(line_no), None, "unterminated section header")
                    })?
                    .trim();
                if name.is_empty() || name.contains('.') {
                    return Err(ConfigError::new(
                        Some(line_no),
                        None,
                        format!("bad section name `{name}`"),
                    ));
                }
                if cfg.sections.iter().any(|s| s.name == name) {
                    return Err(ConfigError::new(
                        Some(line_no),
                        None,
                        format!("duplicate section `{name}`"),
                    ));
                }
                cfg.sections.push(Section {
                    name: name.to_owned(),
                    entries: Entries::new(),
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(Some(line_no), None, "expected `key = value`"))?;
            let key = key.trim();
            check_key(key, Some(line_no))?;
            let in_section = !cfg.sections.is_empty();
            if key == "seed" && in_section {
                return Err(ConfigError::new(
                    Some(line_no),
                    Some(key),
                    "seed must precede all sections",
                ));
            }
            let entries = match cfg.sections.last_mut() {
                Some(s) => &mut s.entries,
                None => &mut cfg.globals,
            };
            if entries
                .insert(key.to_owned(), (value.trim().to_owned(), Some(line_no)))
                .is_some()
            {
                return Err(ConfigError::new(Some(line_no), Some(key), "duplicate key"));
            }
        }
        Ok(cfg)
    }

    /// Applies `key=value` or `section.key=value`.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (lhs, value) = assignment.split_once('=').ok_or_else(|| {
            ConfigError::new(
                None,
                None,
                format!("override `{assignment}` is not key=value"),
            )
        })?;
        let lhs = lhs.trim();
        let (section, key) = match lhs.split_once('.') {
            Some((s, k)) => {
                if !self.sections.iter().any(|sec| sec.name == s) {
                    return Err(ConfigError::new(
                        None,
                        Some(lhs),
                        format!("no section `{s}`"),
                    ));
                }
                (Some(s.to_owned()), k.trim())
            }
            None => (None, lhs),
        };
        check_key(key, None)?;
        if key == "seed" && section.is_some() {
            return Err(ConfigError::new(None, Some(lhs), "seed is global"));
        }
        self.overrides
            .push((section, key.to_owned(), value.trim().to_owned()));
        Ok(())
    }

    /// Seed from the file or a global override.
    pub fn seed(&self) -> Result<Option<u64>, ConfigError> {
        let over = self
            .overrides
            .iter()
            .rev()
            .find(|(s, k, _)| s.is_none() && k == "seed")
            .map(|(_, _, v)| (v.clone(), None));
        match over.or_else(|| self.globals.get("seed").cloned()) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<u64>()
                .map(Some)
                .map_err(|_| ConfigError::new(line, Some("seed"), format!("`{v}` is not a u64"))),
        }
    }

    /// Effective key-value map of every grid, in file order.
    fn resolved(&self) -> Vec<(String, Entries)> {
        let bases: Vec<Section> = if self.sections.is_empty() {
            if self.globals.keys().all(|k| k == "seed")
                && self.overrides.iter().all(|o| o.1 == "seed")
            {
                Vec::new()
            } else {
                vec![Section {
                    name: "default".into(),
                    entries: Entries::new(),
                }]
            }
        } else {
            self.sections.clone()
        };
        bases
            .into_iter()
            .map(|sec| {
                let mut m: Entries = self
                    .globals
                    .iter()
                    .filter(|(k, _)| k.as_str() != "seed")
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                m.extend(sec.entries.clone());
                for (s, k, v) in self.overrides.iter().filter(|o| o.0.is_none()) {
                    if s.is_none() && k != "seed" {
                        m.insert(k.clone(), (v.clone(), None));
                    }
                }
                for (s, k, v) in &self.overrides {
                    if s.as_deref() == Some(sec.name.as_str()) {
                        m.insert(k.clone(), (v.clone(), None));
                    }
                }
                (sec.name, m)
            })
            .collect()
    }

    /// SHA-256 over the resolved grids with keys sorted; independent of the
    /// order of keys and of the seed.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, entries) in self.resolved() {
            h.update(format!("[{name}]\n"));
            for (k, (v, _)) in &entries {
                let canon: Vec<&str> = v.split(',').map(str::trim).collect();
                h.update(format!("{k}={}\n", canon.join(",")));
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Expands every grid over `dgp x n x d x mode`, in that nesting order.
    pub fn expand(&self, master_seed: u64) -> Result<Vec<SimConfig>, ConfigError> {
        let grids = self.resolved();
        if grids.is_empty() {
            return Err(ConfigError::new(
                None,
                None,
                "empty grid: no experiments configured",
            ));
        }
        let mut out = Vec::new();
        for (name, e) in grids {
            let dgps: Vec<DgpKind> = list(&e, "dgp", Some("baseline"))?;
            let ns: Vec<usize> = list(&e, "n", None)?;
            let ds: Vec<f64> = list(&e, "d", Some("0"))?;
            let modes: Vec<Mode> = list(&e, "mode", Some("size"))?;
            let levels: Vec<f64> = match e.get("levels") {
                Some(_) => list(&e, "levels", None)?,
                None => DEFAULT_LEVELS.to_vec(),
            };
            let base = SimConfig {
                reps: scalar(&e, "reps", DEFAULT_REPS)?,
                levels,
                p_edge: scalar(&e, "p_edge", 0.1)?,
                gamma_spill: scalar(&e, "gamma_spill", 0.5)?,
                p_treat: scalar(&e, "p_treat", 0.5)?,
                convention: scalar(&e, "convention", Convention::Closed)?,
                centring: scalar(&e, "centring", Centring::Rpo)?,
                master_seed,
                ..SimConfig::default()
            };
            for &dgp in &dgps {
                for &n in &ns {
                    for &d in &ds {
                        for &mode in &modes {
                            let cfg = SimConfig {
                                dgp,
                                n,
                                d,
                                mode,
                                ..base.clone()
                            };
                            cfg.validate().map_err(|err| {
                                ConfigError::new(None, None, format!("grid `{name}`: {err}"))
                            })?;
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn list<T: std::str::FromStr>(
    e: &Entries,
    key: &str,
    default: Option<&str>,
) -> Result<Vec<T>, ConfigError> {
    let (raw, line) = match (e.get(key), default) {
        (Some((v, l)), _) => (v.as_str(), *l),
        (None, Some(d)) => (d, None),
        (None, None) => return Err(ConfigError::new(None, Some(key), "missing required key")),
    };
    let items: Vec<&str> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(ConfigError::new(
            line,
            Some(key),
            "empty grid: list has no values",
        ));
    }
    items
        .into_iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| ConfigError::new(line, Some(key), format!("cannot parse `{s}`")))
        })
        .collect()
}

fn scalar<T: std::str::FromStr>(e: &Entries, key: &str, default: T) -> Result<T, ConfigError> {
    match e.get(key) {
        None => Ok(default),
        Some((v, line)) => v
            .parse::<T>()
            .map_err(|_| ConfigError::new(*line, Some(key), format!("cannot parse `{v}`"))),
    }
}
