//! Experiment drivers. Each one turns resolved parameters into CSV rows
//! for a single sweep point; [`run`] fans the sweep out and reassembles the
//! rows in grid order.

mod bounds;
mod carnot;
mod catalysis;
mod otto;
mod relax;

use std::fmt;

use qmachine_core::gaussian::{to_fock, GaussianState};
use qmachine_core::lindblad::IntegrationConfig;
use qmachine_core::par;
use qmachine_core::quantum_core::{
    bose_temperature, gibbs_state, squeeze_state, DensityOperator, HilbertSpace, Operator,
};

use crate::config::{ConfigError, Experiment, ExperimentConfig, Params};
use crate::output::{col, Cell, Column, Row, RunFlags, Table};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Guard(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Guard(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Guard(m) => write!(f, "numerical guard: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<qmachine_core::Error> for Failure {
    fn from(e: qmachine_core::Error) -> Self {
        if e.is_numerical_guard() {
            Failure::Guard(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

pub(crate) fn bad(key: &str, msg: impl Into<String>) -> Failure {
    ConfigError::for_key(key, msg).into()
}

/// Rows of one sweep point plus its run-level flags.
pub struct PointOutput {
    pub rows: Vec<Row>,
    pub flags: RunFlags,
}

struct Layout {
    comments: Vec<String>,
    columns: Vec<Column>,
}

fn layout(cfg: &ExperimentConfig) -> Layout {
    let p = &cfg.params;
    let (comments, columns) = match cfg.experiment {
        Experiment::Relax => relax::layout(),
        Experiment::Otto => otto::layout(p),
        Experiment::Carnot => carnot::layout(),
        Experiment::Catalysis => catalysis::layout(p),
        Experiment::Bounds => bounds::layout(),
    };
    let mut head = vec![format!("experiment: {}", cfg.experiment.name())];
    head.push("units: hbar = k_B = 1, rates in units of kappa".into());
    head.extend(comments);
    Layout {
        comments: head,
        columns,
    }
}

fn run_point(e: Experiment, p: &Params, seed: u64) -> Result<PointOutput, Failure> {
    match e {
        Experiment::Relax => relax::run(p),
        Experiment::Otto => otto::run(p),
        Experiment::Carnot => carnot::run(p),
        Experiment::Catalysis => catalysis::run(p),
        Experiment::Bounds => bounds::run(p, seed),
    }
}

/// Runs every sweep point (in parallel when enabled) and assembles the
/// table in grid order. The first failing point, in grid order, aborts.
pub fn run(cfg: &ExperimentConfig) -> Result<(Table, Vec<RunFlags>), Failure> {
    let Layout { comments, mut columns } = layout(cfg);
    let points: Vec<(Option<f64>, Params)> = match &cfg.sweep {
        Some(s) => s
            .values
            .iter()
            .map(|&v| (Some(v), cfg.params.with_float(&s.param, v)))
            .collect(),
        None => vec![(None, cfg.params.clone())],
    };
    let results = par::map(&points, |(_, p)| run_point(cfg.experiment, p, cfg.seed));
    // otto always reports the swept value; the others only under a sweep
    let sweep_column = cfg.sweep.is_some() || cfg.experiment == Experiment::Otto;
    if sweep_column {
        let unit = match &cfg.sweep {
            Some(_) => "value of the swept parameter",
            None => "empty without a sweep",
        };
        columns.insert(0, col("sweep_value", unit));
    }
    let mut comments = comments;
    if let Some(s) = &cfg.sweep {
        comments.push(format!("sweep: {} over {} points", s.param, s.values.len()));
    }
    let mut rows = vec![];
    let mut flags = vec![];
    for (index, ((value, _), res)) in points.iter().zip(results).enumerate() {
        let mut out = res?;
        out.flags.index = index;
        out.flags.sweep_value = *value;
        let tokens = out.flags.row_tokens();
        for mut r in out.rows {
            if sweep_column {
                r.cells.insert(0, value.map_or(Cell::Empty, Cell::Num));
            }
            r.flags.extend(tokens.iter().cloned());
            rows.push(r);
        }
        flags.push(out.flags);
    }
    Ok((
        Table {
            comments,
            columns,
            rows,
        },
        flags,
    ))
}

/// Initial oscillator states shared by `relax` and `bounds`.
pub(crate) fn oscillator_initial(
    kind: &str,
    value: f64,
    h: &Operator,
    omega: f64,
    space: HilbertSpace,
) -> Result<DensityOperator, Failure> {
    Ok(match kind {
        "vacuum" => DensityOperator::fock(space, 0)?,
        "fock" => DensityOperator::fock(space, fock_level(value, space.dim())?)?,
        "thermal" if value == 0.0 => DensityOperator::fock(space, 0)?,
        "thermal" if value > 0.0 => gibbs_state(h, bose_temperature(omega, value))?,
        "thermal" => return Err(bad("initial_value", "thermal occupation must be non-negative")),
        "coherent" => to_fock(&GaussianState::coherent(value, 0.0), space)?,
        "squeezed" => squeeze_state(&DensityOperator::fock(space, 0)?, value)?,
        other => return Err(bad("initial", format!("`{other}` is not available for an oscillator"))),
    })
}

pub(crate) fn fock_level(value: f64, dim: usize) -> Result<usize, Failure> {
    if value < 0.0 || value.fract() != 0.0 || value >= dim as f64 {
        return Err(bad(
            "initial_value",
            format!("Fock level must be an integer in [0, {}), got {value}", dim),
        ));
    }
    Ok(value as usize)
}

pub(crate) fn integration(p: &Params) -> Result<IntegrationConfig, Failure> {
    positive(p, &["dt", "rel_tol", "abs_tol"])?;
    let mut cfg = IntegrationConfig::default().with_store_every(p.f("dt"));
    cfg.rel_tol = p.f("rel_tol");
    cfg.abs_tol = p.f("abs_tol");
    Ok(cfg)
}

pub(crate) fn positive(p: &Params, keys: &[&str]) -> Result<(), Failure> {
    for k in keys {
        if !(p.f(k) > 0.0) {
            return Err(bad(k, format!("must be positive, got {}", p.f(k))));
        }
    }
    Ok(())
}
