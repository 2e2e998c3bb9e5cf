//! Flat `key = value` configuration with optional `[section]` blocks.
//!
//! Top-level keys describe the model and frozen state; sections hold
//! per-command defaults that command-line flags override. Unknown keys and
//! sections are errors. `#` and `;` start comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use mhdlab_core::{BasicState, ModelKind};

const STATE_KEYS: [&str; 10] = [
    "model",
    "rho_hat",
    "c_hat",
    "H_plasma_2",
    "H_plasma_3",
    "H_vacuum_2",
    "H_vacuum_3",
    "a_hat",
    "a0_hat",
    "a1_hat",
];

const SECTIONS: [(&str, &[&str]); 4] = [
    ("classify", &["numeric", "seed", "omega_samples"]),
    ("roots", &["n", "omega"]),
    ("sweep", &["grid", "jobs", "max_points", "numeric"]),
    ("hadamard", &["n_list", "t", "out", "omega", "fields"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError { line: Some(l), message } => write!(f, "line {l}: {message}"),
            ConfigError { line: None, message } => f.write_str(message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// Values of one `[section]`, already checked against its key list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    entries: BTreeMap<String, Entry>,
}

impl Section {
    pub fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| err(Some(e.line), format!("`{key}`: cannot parse `{}`", e.value))),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                other => Err(err(
                    Some(e.line),
                    format!("`{key}`: expected true or false, got `{other}`"),
                )),
            },
        }
    }

    /// Comma or whitespace separated list.
    pub fn get_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse()
                    .map_err(|_| err(Some(e.line), format!("`{key}`: cannot parse `{t}`")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model: ModelKind,
    pub state: BasicState,
    sections: BTreeMap<String, Section>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(None, format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut top: BTreeMap<String, Entry> = BTreeMap::new();
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<(String, &[&str])> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split(['#', ';']).next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(Some(line), format!("malformed section header `{body}`")))?
                    .trim();
                let keys = SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .ok_or_else(|| err(Some(line), format!("unknown section `[{name}]`")))?
                    .1;
                if sections.contains_key(name) {
                    return Err(err(Some(line), format!("section `[{name}]` given twice")));
                }
                sections.insert(name.to_string(), Section::default());
                current = Some((name.to_string(), keys));
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| err(Some(line), format!("expected `key = value`, got `{body}`")))?;
            let key = key.trim();
            let value = value.trim().to_string();
            let entry = Entry { value, line };
            let target = match &current {
                None => {
                    if !STATE_KEYS.contains(&key) {
                        return Err(err(Some(line), format!("unknown key `{key}`")));
                    }
                    &mut top
                }
                Some((name, keys)) => {
                    if !keys.contains(&key) {
                        return Err(err(Some(line), format!("unknown key `{key}` in section `[{name}]`")));
                    }
                    &mut sections.get_mut(name).unwrap().entries
                }
            };
            if target.contains_key(key) {
                return Err(err(Some(line), format!("key `{key}` given twice")));
            }
            target.insert(key.to_string(), entry);
        }

        let model_entry = top
            .get("model")
            .ok_or_else(|| err(None, "missing required key `model`"))?;
        let model = ModelKind::parse(&model_entry.value).ok_or_else(|| {
            let names: Vec<_> = ModelKind::ALL.iter().map(|m| m.name()).collect();
            err(
                Some(model_entry.line),
                format!(
                    "`model`: unknown model `{}` (expected one of {})",
                    model_entry.value,
                    names.join(", ")
                ),
            )
        })?;

        let num = |key: &str, default: f64| -> Result<f64, ConfigError> {
            match top.get(key) {
                None => Ok(default),
                Some(e) => e
                    .value
                    .parse::<f64>()
                    .map_err(|_| err(Some(e.line), format!("`{key}`: `{}` is not a number", e.value))),
            }
        };
        let d = BasicState::default();
        let state = BasicState {
            rho_hat: num("rho_hat", d.rho_hat)?,
            c_hat: num("c_hat", d.c_hat)?,
            h_plasma: [num("H_plasma_2", 0.0)?, num("H_plasma_3", 0.0)?],
            h_vacuum: [num("H_vacuum_2", 0.0)?, num("H_vacuum_3", 0.0)?],
            a_hat: num("a_hat", d.a_hat)?,
            a0_hat: num("a0_hat", d.a0_hat)?,
            a1_hat: num("a1_hat", d.a1_hat)?,
        };
        if let Err(e) = state.validate(model) {
            let line = match &e {
                mhdlab_core::Error::InvalidState { field, .. } => {
                    top.iter().find(|(k, _)| k.starts_with(field)).map(|(_, v)| v.line)
                }
                _ => None,
            };
            return Err(err(line, e.to_string()));
        }
        Ok(Config { model, state, sections })
    }

    /// The named section, empty when absent.
    pub fn section(&self, name: &str) -> Section {
        self.sections.get(name).cloned().unwrap_or_default()
    }
}
