//! Modified Otto cycle: closed-form efficiencies and bounds, optionally
//! checked against a full cycle simulation.

use qmachine_core::cycles::{
    eta_carnot, run_equivalent_hybrid, run_modified_otto, Backend, HotBath, OttoConfig, Regime,
};
use qmachine_core::Error;

use super::{Failure, PointOutput};
use crate::config::Params;
use crate::output::{col, Cell, Column, Row, RunFlags};

fn numeric(p: &Params) -> bool {
    p.choice("backend") != "analytic"
}

pub fn layout(p: &Params) -> (Vec<String>, Vec<Column>) {
    let mut comments = vec![format!(
        "omega_c = omega_ratio * omega_h; efficiencies are dimensionless; backend: {}",
        p.choice("backend")
    )];
    if !p.flag("extraction") {
        comments.push("no ergotropy-extraction stroke: eta is the plain Otto value 1 - omega_c/omega_h".into());
    }
    let mut columns = vec![
        col("eta", "closed-form efficiency"),
        col("eta_max", "closed-form bound from the passive heat"),
        col("eta_sigma", "closed-form bound from the entropy-production condition"),
        col("eta_carnot", "1 - T_c/T_h"),
        col("regime", "engine | engine_and_refrigerator | second_kind | no_engine"),
        col(
            "net_work",
            "closed-form net work per cycle [omega_h units], negative when delivered",
        ),
    ];
    if numeric(p) {
        columns.push(col("eta_numeric", "efficiency of the simulated cycle"));
        columns.push(col("net_work_numeric", "net work of the simulated cycle"));
    }
    (comments, columns)
}

fn otto_config(p: &Params) -> Result<OttoConfig, Failure> {
    let omega_h = p.f("omega_h");
    let mut cfg = OttoConfig::new(p.f("omega_ratio") * omega_h, omega_h, p.f("t_c"), p.f("t_h"), p.f("r"));
    cfg.kappa = p.f("kappa");
    cfg.stroke_time = p.f("stroke_time");
    cfg.fock_dim = p.count("fock_dim");
    cfg.store_every = p.f("store_every");
    cfg.extraction = p.flag("extraction");
    cfg.delta_n_c = p.opt_f("delta_n_c");
    cfg.hot_bath = match p.choice("hot_bath") {
        "second_kind" => HotBath::SecondKind,
        _ => HotBath::Squeezed,
    };
    cfg.backend = match p.choice("backend") {
        "gaussian" => Backend::Gaussian,
        _ => Backend::Fock,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(p: &Params) -> Result<PointOutput, Failure> {
    let cfg = otto_config(p)?;
    let an = cfg.analytic();
    let mut flags = RunFlags::default();
    let mut row_flags = vec![];
    let nan = f64::NAN;
    let (eta, eta_max, eta_sigma, regime) = match an.efficiencies(&cfg) {
        Ok(e) => {
            if e.sigma_unphysical {
                row_flags.push("eta_sigma_above_one".to_string());
            }
            let eta = if cfg.extraction {
                e.eta
            } else {
                1.0 - cfg.omega_c / cfg.omega_h
            };
            (eta, e.eta_max, e.eta_sigma, e.regime)
        }
        Err(Error::Regime(m)) => {
            flags.notes.push(m);
            row_flags.push("no_engine".to_string());
            (nan, nan, nan, Regime::NoEngine)
        }
        Err(e) => return Err(e.into()),
    };
    let mut cells: Vec<Cell> = vec![
        eta.into(),
        eta_max.into(),
        eta_sigma.into(),
        eta_carnot(cfg.t_c, cfg.t_h).into(),
        Cell::Text(regime.label().into()),
        an.net_work(&cfg, cfg.extraction).into(),
    ];
    flags.regime = Some(regime.label().into());
    if numeric(p) {
        let res = match p.choice("cycle") {
            "hybrid" => run_equivalent_hybrid(&cfg),
            _ => run_modified_otto(&cfg),
        };
        match res {
            Ok(c) => {
                flags.truncation_weight = c.flags.truncation_weight;
                flags.positivity_repair = c.flags.positivity_repair;
                flags.slow_driving_violated = c.flags.slow_driving_violated;
                flags.regime = Some(c.regime.label().into());
                cells.push(c.efficiency.into());
                cells.push(c.net_work.into());
            }
            Err(Error::Regime(m)) => {
                flags.notes.push(m);
                row_flags.push("numeric_regime".to_string());
                cells.push(nan.into());
                cells.push(nan.into());
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut row = Row::new(cells);
    row.flags = row_flags;
    Ok(PointOutput { rows: vec![row], flags })
}
