//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment. Every experiment owns a fixed
//! parameter table; keys outside it (and outside the reserved `experiment`,
//! `seed`, `output` and `sweep.*` keys) are rejected with the offending line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Relax,
    Otto,
    Carnot,
    Catalysis,
    Bounds,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Relax => "relax",
            Experiment::Otto => "otto",
            Experiment::Carnot => "carnot",
            Experiment::Catalysis => "catalysis",
            Experiment::Bounds => "bounds",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, false).ok()
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Kind {
    Float,
    /// A finite float or the literal `auto`.
    FloatOrAuto,
    Count,
    Flag,
    Choice(&'static [&'static str]),
}

/// One entry of an experiment's parameter table. Defaults are stored as
/// text and go through the same parser as user input.
#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
}

const fn p(key: &'static str, kind: Kind, default: &'static str) -> ParamSpec {
    ParamSpec { key, kind, default }
}

use Kind::{Choice, Count, Flag, Float, FloatOrAuto};

const RELAX: &[ParamSpec] = &[
    p("omega", Float, "1"),
    p("kappa", Float, "1"),
    p("n_bar", Float, "0"),
    p("r", Float, "0.5"),
    p("fock_dim", Count, "30"),
    p(
        "initial",
        Choice(&["vacuum", "fock", "thermal", "coherent", "squeezed"]),
        "vacuum",
    ),
    p("initial_value", Float, "0"),
    p("t_end", Float, "8"),
    p("dt", Float, "0.05"),
    // tail populations feed the ergotropy through large level energies
    p("rel_tol", Float, "1e-10"),
    p("abs_tol", Float, "1e-13"),
];

const OTTO: &[ParamSpec] = &[
    p("omega_h", Float, "1"),
    p("omega_ratio", Float, "0.5"),
    p("t_c", Float, "0.03"),
    p("t_h", Float, "0.09"),
    p("r", Float, "0.5"),
    p("delta_n_c", FloatOrAuto, "auto"),
    p("extraction", Flag, "true"),
    p("hot_bath", Choice(&["squeezed", "second_kind"]), "squeezed"),
    p("backend", Choice(&["analytic", "fock", "gaussian"]), "analytic"),
    p("cycle", Choice(&["otto", "hybrid"]), "otto"),
    p("kappa", Float, "1"),
    p("stroke_time", Float, "14"),
    p("fock_dim", Count, "41"),
    p("store_every", Float, "0.1"),
];

const CARNOT: &[ParamSpec] = &[
    p("omega0", Float, "25"),
    p("ramp_rate", Float, "0.05"),
    p("t_h", Float, "5"),
    p("r", Float, "0.2"),
    p("kappa", Float, "1"),
    p("fock_dim", Count, "41"),
    p("t_end", Float, "80"),
    p("dt", Float, "0.5"),
    p("rel_tol", Float, "1e-8"),
    p("abs_tol", Float, "1e-10"),
];

const CATALYSIS: &[ParamSpec] = &[
    p("subfigure", Choice(&["a", "b", "c"]), "b"),
    p("omega0", Float, "1"),
    p("nu", Float, "0.5"),
    p("g", Float, "0.1"),
    p("t_h", Float, "1"),
    p("t_c", Float, "0.6"),
    p("pump", Choice(&["none", "linear", "quadratic"]), "quadratic"),
    p("kappa_ratio", Float, "0.1"),
    p("alpha0_sq", Float, "1"),
    p("spectrum", Choice(&["preset", "lorentzian"]), "preset"),
    p("hot_center", Float, "1.5"),
    p("cold_center", Float, "1"),
    p("width", Float, "0.1"),
    p("populations", Choice(&["derive", "explicit"]), "derive"),
    p("p_excited", Float, "0.25"),
    p("t_end_gamma", Float, "5"),
    p("points", Count, "51"),
    p("t_eval_gamma", Float, "3"),
    p("nu_start", Float, "0.5"),
    p("nu_stop", Float, "0.66"),
    p("nu_points", Count, "17"),
];

const BOUNDS: &[ParamSpec] = &[
    p("system", Choice(&["qubit", "oscillator"]), "qubit"),
    p("omega", Float, "1"),
    p("kappa", Float, "1"),
    p("n_bar", Float, "0.3"),
    p("r", Float, "0"),
    p("fock_dim", Count, "30"),
    p(
        "initial",
        Choice(&["thermal", "fock", "inverted", "coherent", "squeezed", "random"]),
        "inverted",
    ),
    p("initial_value", Float, "0.8"),
    p("t_end", Float, "15"),
    p("dt", Float, "0.05"),
    p("rel_tol", Float, "1e-8"),
    p("abs_tol", Float, "1e-10"),
];

pub fn param_table(e: Experiment) -> &'static [ParamSpec] {
    match e {
        Experiment::Relax => RELAX,
        Experiment::Otto => OTTO,
        Experiment::Carnot => CARNOT,
        Experiment::Catalysis => CATALYSIS,
        Experiment::Bounds => BOUNDS,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Auto,
    Count(usize),
    Flag(bool),
    Choice(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // shortest representation that parses back to the same bits
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Auto => f.write_str("auto"),
            Value::Count(n) => write!(f, "{n}"),
            Value::Flag(b) => write!(f, "{b}"),
            Value::Choice(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            origin: String::new(),
            line: None,
            key: None,
            message: message.into(),
        }
    }

    fn at(origin: &str, line: usize, key: &str, message: impl Into<String>) -> Self {
        Self {
            origin: origin.to_string(),
            line: Some(line),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub fn for_key(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            ..Self::new(message)
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.origin.is_empty() {
            write!(f, "{}", self.origin)?;
            if let Some(l) = self.line {
                write!(f, ":{l}")?;
            }
            f.write_str(": ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "key `{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn parse_value(kind: Kind, text: &str) -> Result<Value, String> {
    match kind {
        Float => parse_float(text).map(Value::Float),
        FloatOrAuto if text == "auto" => Ok(Value::Auto),
        FloatOrAuto => parse_float(text).map(Value::Float),
        Count => text
            .parse::<usize>()
            .map(Value::Count)
            .map_err(|_| format!("expected a non-negative integer, got `{text}`")),
        Flag => match text {
            "true" => Ok(Value::Flag(true)),
            "false" => Ok(Value::Flag(false)),
            _ => Err(format!("expected `true` or `false`, got `{text}`")),
        },
        Choice(options) => {
            if options.contains(&text) {
                Ok(Value::Choice(text.to_string()))
            } else {
                Err(format!("expected one of {}, got `{text}`", options.join(", ")))
            }
        }
    }
}

fn parse_float(text: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(_) => Err(format!("value `{text}` is not finite")),
        Err(_) => Err(format!("expected a number, got `{text}`")),
    }
}

/// One `key = value` line with its position in the source.
#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

#[derive(Clone, Debug)]
pub struct Source {
    origin: String,
    entries: Vec<Entry>,
}

impl Source {
    pub fn parse(origin: &str, text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    origin: origin.to_string(),
                    line: Some(line),
                    key: None,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::at(origin, line, key, "empty key"));
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(ConfigError::at(
                    origin,
                    line,
                    key,
                    format!("duplicate key (first set on line {})", prev.line),
                ));
            }
            entries.push(Entry {
                line,
                key: key.to_string(),
                value: value.to_string(),
            });
        }
        Ok(Self {
            origin: origin.to_string(),
            entries,
        })
    }

    fn err(&self, e: &Entry, message: impl Into<String>) -> ConfigError {
        ConfigError::at(&self.origin, e.line, &e.key, message)
    }
}

/// Resolved parameter values in table order.
#[derive(Clone, Debug)]
pub struct Params {
    values: BTreeMap<&'static str, Value>,
    table: &'static [ParamSpec],
}

impl PartialEq for Params {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl Params {
    pub fn defaults(e: Experiment) -> Self {
        let table = param_table(e);
        let values = table
            .iter()
            .map(|s| (s.key, parse_value(s.kind, s.default).expect("valid default")))
            .collect();
        Self { values, table }
    }

    fn spec(&self, key: &str) -> Option<&'static ParamSpec> {
        self.table.iter().find(|s| s.key == key)
    }

    pub fn f(&self, key: &str) -> f64 {
        match self.values.get(key) {
            Some(Value::Float(x)) => *x,
            other => panic!("parameter {key} is not a float: {other:?}"),
        }
    }

    pub fn opt_f(&self, key: &str) -> Option<f64> {
        match self.values.get(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Auto) => None,
            other => panic!("parameter {key} is not a float: {other:?}"),
        }
    }

    pub fn count(&self, key: &str) -> usize {
        match self.values.get(key) {
            Some(Value::Count(n)) => *n,
            other => panic!("parameter {key} is not a count: {other:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.values.get(key) {
            Some(Value::Flag(b)) => *b,
            other => panic!("parameter {key} is not a flag: {other:?}"),
        }
    }

    pub fn choice(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(Value::Choice(s)) => s,
            other => panic!("parameter {key} is not a choice: {other:?}"),
        }
    }

    /// Copy with one float parameter replaced (sweep points).
    pub fn with_float(&self, key: &str, x: f64) -> Self {
        let mut out = self.clone();
        let k = self.spec(key).expect("known key").key;
        out.values.insert(k, Value::Float(x));
        out
    }

    /// `(key, value)` pairs in table order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        self.table
            .iter()
            .map(|s| (s.key, self.values[s.key].to_string()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: Params,
    pub sweep: Option<Sweep>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
}

const SWEEP_KEYS: [&str; 5] = [
    "sweep.param",
    "sweep.values",
    "sweep.start",
    "sweep.stop",
    "sweep.points",
];

impl ExperimentConfig {
    /// Resolves `sources` in order over the experiment defaults; later
    /// sources override earlier ones key by key.
    pub fn resolve(experiment: Experiment, sources: &[Source]) -> Result<Self, ConfigError> {
        let mut params = Params::defaults(experiment);
        let mut seed = 0u64;
        let mut output_path = None;
        let mut sweep_raw: BTreeMap<&'static str, (String, &Source, Entry)> = BTreeMap::new();
        for src in sources {
            for e in &src.entries {
                match e.key.as_str() {
                    "experiment" => match Experiment::parse(&e.value) {
                        Some(x) if x == experiment => {}
                        Some(x) => {
                            return Err(src.err(
                                e,
                                format!("config is for `{}` but `{}` was requested", x.name(), experiment.name()),
                            ))
                        }
                        None => return Err(src.err(e, format!("unknown experiment `{}`", e.value))),
                    },
                    "seed" => {
                        seed = e
                            .value
                            .parse()
                            .map_err(|_| src.err(e, format!("expected a non-negative integer, got `{}`", e.value)))?
                    }
                    "output" => {
                        if e.value.is_empty() {
                            return Err(src.err(e, "empty output path"));
                        }
                        output_path = Some(PathBuf::from(&e.value));
                    }
                    k if SWEEP_KEYS.contains(&k) => {
                        let k = SWEEP_KEYS.iter().find(|s| **s == k).copied().unwrap();
                        sweep_raw.insert(k, (e.value.clone(), src, e.clone()));
                    }
                    k => {
                        let Some(spec) = params.spec(k) else {
                            return Err(src.err(e, format!("unknown key for experiment `{}`", experiment.name())));
                        };
                        let v = parse_value(spec.kind, &e.value).map_err(|m| src.err(e, m))?;
                        params.values.insert(spec.key, v);
                    }
                }
            }
        }
        let sweep = resolve_sweep(&params, &sweep_raw)?;
        Ok(Self {
            experiment,
            params,
            sweep,
            output_path,
            seed,
        })
    }

    /// Canonical config text; feeding it back reproduces the run.
    pub fn echo(&self) -> String {
        let mut out = format!("experiment = {}\nseed = {}\n", self.experiment.name(), self.seed);
        for (k, v) in self.params.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        if let Some(s) = &self.sweep {
            let vals: Vec<String> = s.values.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&format!(
                "sweep.param = {}\nsweep.values = {}\n",
                s.param,
                vals.join(", ")
            ));
        }
        out
    }
}

fn resolve_sweep(
    params: &Params,
    raw: &BTreeMap<&'static str, (String, &Source, Entry)>,
) -> Result<Option<Sweep>, ConfigError> {
    if raw.is_empty() {
        return Ok(None);
    }
    let Some((name, src, entry)) = raw.get("sweep.param") else {
        let (_, src, e) = raw.values().next().unwrap();
        return Err(src.err(e, "sweep keys given without `sweep.param`"));
    };
    match params.spec(name) {
        Some(ParamSpec { kind: Float, key, .. }) => {
            let values = if let Some((text, src, e)) = raw.get("sweep.values") {
                if ["sweep.start", "sweep.stop", "sweep.points"]
                    .iter()
                    .any(|k| raw.contains_key(k))
                {
                    return Err(src.err(e, "give either `sweep.values` or `sweep.start/stop/points`, not both"));
                }
                text.split(',')
                    .map(|t| parse_float(t.trim()).map_err(|m| src.err(e, m)))
                    .collect::<Result<Vec<_>, _>>()?
            } else {
                let get = |k: &str| {
                    raw.get(k)
                        .ok_or_else(|| src.err(entry, format!("sweep needs `sweep.values` or `{k}`")))
                };
                let (start_t, s1, e1) = get("sweep.start")?;
                let (stop_t, s2, e2) = get("sweep.stop")?;
                let (n_t, s3, e3) = get("sweep.points")?;
                let start = parse_float(start_t).map_err(|m| s1.err(e1, m))?;
                let stop = parse_float(stop_t).map_err(|m| s2.err(e2, m))?;
                let n: usize = n_t
                    .parse()
                    .map_err(|_| s3.err(e3, format!("expected a positive integer, got `{n_t}`")))?;
                if n == 0 {
                    return Err(s3.err(e3, "sweep grid is empty"));
                }
                linspace(start, stop, n)
            };
            if values.is_empty() {
                return Err(src.err(entry, "sweep grid is empty"));
            }
            if let Some(x) = values.iter().find(|x| !x.is_finite()) {
                return Err(src.err(entry, format!("sweep grid contains non-finite value {x}")));
            }
            Ok(Some(Sweep {
                param: key.to_string(),
                values,
            }))
        }
        Some(_) => Err(src.err(entry, format!("parameter `{name}` is not a float and cannot be swept"))),
        None => Err(src.err(entry, format!("unknown sweep parameter `{name}`"))),
    }
}

pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let step = (stop - start) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { stop } else { start + k as f64 * step })
        .collect()
}
