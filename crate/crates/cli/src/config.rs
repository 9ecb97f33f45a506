//! Flat `key=value` experiment configuration.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored. Every
//! file names its `experiment`; all other keys are checked against that
//! experiment's parameter table and unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::experiments::Experiment;
use crate::CliError;

/// Keys accepted by every experiment.
pub const COMMON_KEYS: [&str; 3] = ["experiment", "seed", "output_dir"];

/// Where a configuration entry came from, for error messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Line(usize),
    Override(usize),
    Default,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Line(n) => write!(f, "line {n}"),
            Source::Override(n) => write!(f, "--set #{n}"),
            Source::Default => write!(f, "default"),
        }
    }
}

/// Type and valid range of a parameter.
#[derive(Clone, Copy, Debug)]
pub enum Kind {
    Float { min: f64, max: f64 },
    Int { min: u64, max: u64 },
    /// Power of two within the bounds.
    PowerOfTwo { min: u64, max: u64 },
    /// Comma-separated floats, each within the bounds.
    FloatList { min: f64, max: f64 },
    Choice(&'static [&'static str]),
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Float { min, max } => write!(f, "real in [{min}, {max}]"),
            Kind::Int { min, max } => write!(f, "integer in [{min}, {max}]"),
            Kind::PowerOfTwo { min, max } => write!(f, "power of two in [{min}, {max}]"),
            Kind::FloatList { min, max } => write!(f, "comma-separated reals in [{min}, {max}]"),
            Kind::Choice(c) => write!(f, "one of {}", c.join(", ")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    List(Vec<f64>),
    Text(String),
}

impl fmt::Display for Value {
    /// Canonical text form, used for the config echo.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(v) => write!(f, "{v:e}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::List(vs) => {
                let parts: Vec<String> = vs.iter().map(|v| format!("{v:e}")).collect();
                write!(f, "{}", parts.join(","))
            }
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}

fn parse_float(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl Kind {
    fn parse(&self, raw: &str) -> Result<Value, String> {
        let bad = || format!("expected {self}, got `{raw}`");
        match *self {
            Kind::Float { min, max } => {
                let v = parse_float(raw).ok_or_else(bad)?;
                (min..=max).contains(&v).then_some(Value::Float(v)).ok_or_else(bad)
            }
            Kind::Int { min, max } => {
                let v: u64 = raw.parse().map_err(|_| bad())?;
                (min..=max).contains(&v).then_some(Value::Int(v)).ok_or_else(bad)
            }
            Kind::PowerOfTwo { min, max } => {
                let v: u64 = raw.parse().map_err(|_| bad())?;
                (v.is_power_of_two() && (min..=max).contains(&v))
                    .then_some(Value::Int(v))
                    .ok_or_else(bad)
            }
            Kind::FloatList { min, max } => {
                let vs = raw
                    .split(',')
                    .map(|s| parse_float(s.trim()).filter(|v| (min..=max).contains(v)))
                    .collect::<Option<Vec<f64>>>()
                    .ok_or_else(bad)?;
                Ok(Value::List(vs))
            }
            Kind::Choice(choices) => choices
                .iter()
                .find(|c| **c == raw)
                .map(|c| Value::Text(c.to_string()))
                .ok_or_else(bad),
        }
    }
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    params: BTreeMap<&'static str, Value>,
}

/// One raw `key=value` entry.
#[derive(Clone, Debug)]
struct Entry {
    source: Source,
    key: String,
    value: String,
}

fn config_err(source: Source, message: impl Into<String>) -> CliError {
    CliError::Config {
        location: source.to_string(),
        message: message.into(),
    }
}

fn split_entry(text: &str, source: Source) -> Result<Entry, CliError> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| config_err(source, format!("expected key=value, got `{text}`")))?;
    let (key, value) = (key.trim(), value.trim());
    if key.is_empty() {
        return Err(config_err(source, "empty key"));
    }
    Ok(Entry {
        source,
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_lines(text: &str) -> Result<Vec<Entry>, CliError> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let entry = split_entry(line, Source::Line(i + 1))?;
        if let Some(prev) = entries.iter().find(|e| e.key == entry.key) {
            return Err(config_err(
                entry.source,
                format!("duplicate key `{}` (first set on {})", entry.key, prev.source),
            ));
        }
        entries.push(entry);
    }
    Ok(entries)
}

impl ExperimentConfig {
    /// Parses config text and applies `--set` overrides (later ones win).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut entries = parse_lines(text)?;
        for (i, o) in overrides.iter().enumerate() {
            let entry = split_entry(o.trim(), Source::Override(i + 1))?;
            entries.retain(|e| e.key != entry.key);
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(CliError::Usage("the configuration is empty".into()));
        }
        let exp_entry = entries
            .iter()
            .find(|e| e.key == "experiment")
            .ok_or_else(|| config_err(Source::Line(1), "missing `experiment` key"))?;
        let experiment = Experiment::from_name(&exp_entry.value).ok_or_else(|| {
            config_err(
                exp_entry.source,
                format!(
                    "unknown experiment `{}` (expected one of {})",
                    exp_entry.value,
                    Experiment::ALL.map(|e| e.name()).join(", ")
                ),
            )
        })?;
        let specs = experiment.params();
        let mut params = BTreeMap::new();
        for spec in specs {
            let v = spec
                .kind
                .parse(spec.default)
                .map_err(|m| config_err(Source::Default, format!("{}: {m}", spec.key)))?;
            params.insert(spec.key, v);
        }
        let mut seed = 0;
        let mut output_dir = PathBuf::from("out");
        for e in &entries {
            match e.key.as_str() {
                "experiment" => {}
                "seed" => {
                    seed = e
                        .value
                        .parse()
                        .map_err(|_| config_err(e.source, format!("seed must be a 64-bit unsigned integer, got `{}`", e.value)))?
                }
                "output_dir" => {
                    if e.value.is_empty() {
                        return Err(config_err(e.source, "output_dir is empty"));
                    }
                    output_dir = PathBuf::from(&e.value);
                }
                key => {
                    let spec = specs.iter().find(|s| s.key == key).ok_or_else(|| {
                        config_err(e.source, format!("unknown key `{key}` for experiment {}", experiment.name()))
                    })?;
                    let v = spec.kind.parse(&e.value).map_err(|m| config_err(e.source, format!("{key}: {m}")))?;
                    params.insert(spec.key, v);
                }
            }
        }
        let config = Self {
            experiment,
            seed,
            output_dir,
            params,
        };
        experiment.validate(&config)?;
        Ok(config)
    }

    pub fn with_output_dir(mut self, dir: PathBuf) -> Self {
        self.output_dir = dir;
        self
    }

    fn get(&self, key: &str) -> &Value {
        self.params
            .get(key)
            .unwrap_or_else(|| panic!("parameter `{key}` is not declared for {}", self.experiment.name()))
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            other => panic!("parameter `{key}` is {other:?}, not a real"),
        }
    }

    pub fn int(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Int(v) => *v as usize,
            other => panic!("parameter `{key}` is {other:?}, not an integer"),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::List(v) => v,
            other => panic!("parameter `{key}` is {other:?}, not a list"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(v) => v,
            other => panic!("parameter `{key}` is {other:?}, not text"),
        }
    }

    /// Resolved configuration as sorted `key=value` pairs, defaults included.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("experiment".to_string(), self.experiment.name().to_string()),
            ("seed".to_string(), self.seed.to_string()),
        ];
        out.extend(self.params.iter().map(|(k, v)| (k.to_string(), v.to_string())));
        out
    }

    /// Error for a cross-parameter constraint.
    pub fn invalid(&self, message: impl Into<String>) -> CliError {
        config_err(Source::Default, message)
    }
}
