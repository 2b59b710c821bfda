//! Qubit-catalysed piston engine. Sub-figure `a` scans the piston
//! frequency, `b` follows the efficiency in time, `c` the ergotropy gain of
//! the pumped pistons over the unpumped one.

use qmachine_core::catalysis::{
    drift_diffusion, evolve_piston, BathSpectrum, CatalysisConfig, EnginePoint, PistonRun, QubitPopulations,
};
use qmachine_core::gaussian::GaussianState;
use qmachine_core::lindblad::PumpKind;

use super::{bad, Failure, PointOutput};
use crate::config::{linspace, Params};
use crate::output::{col, Column, Row, RunFlags};

const PUMPS: [PumpKind; 3] = [PumpKind::None, PumpKind::Linear, PumpKind::Quadratic];

pub fn layout(p: &Params) -> (Vec<String>, Vec<Column>) {
    let spectrum = match p.choice("spectrum") {
        "lorentzian" => "Lorentzian bath spectra centred at hot_center / cold_center",
        _ => "preset spectra: hot bath at omega0 + nu, cold bath at omega0, none at omega0 - nu",
    };
    let mut comments = vec![
        spectrum.to_string(),
        "pump rate |kappa| = kappa_ratio |Gamma|, piston starts coherent with |alpha(0)|^2 = alpha0_sq".into(),
        "identity: relative residual of d<H_P>/dt - W_pump = (nu/omega_+) Q_h, maximum over the runs in the row".into(),
    ];
    let columns = match p.choice("subfigure") {
        "a" => {
            comments.push(format!("powers evaluated at t = {} / |Gamma|", p.f("t_eval_gamma")));
            vec![
                col("nu", "piston frequency [omega0 units]"),
                col("power_none", "maximal power, no pump"),
                col("power_linear", "maximal power, linear pump"),
                col("power_quadratic", "maximal power, quadratic pump"),
                col("identity", "relative residual"),
            ]
        }
        "c" => vec![
            col("t", "time [1/kappa units of the bath spectra]"),
            col("ergotropy_ratio_linear", "ergotropy, linear pump / no pump"),
            col("ergotropy_ratio_quadratic", "ergotropy, quadratic pump / no pump"),
            col("identity", "relative residual"),
        ],
        _ => vec![
            col("t", "time [1/kappa units of the bath spectra]"),
            col("eta_pumped", "efficiency with the configured pump"),
            col("eta_unpumped", "efficiency without pump"),
            col("eta_max_ref", "nu / omega_+"),
            col("identity", "relative residual"),
        ],
    };
    (comments, columns)
}

fn lorentzian(center: f64, width: f64) -> impl Fn(f64) -> f64 {
    move |w| 1.0 / (1.0 + ((w - center) / width).powi(2))
}

fn build(p: &Params, nu: f64, pump: PumpKind) -> Result<CatalysisConfig, Failure> {
    let w0 = p.f("omega0");
    let (wp, wm) = (w0 + nu, w0 - nu);
    let (hot, cold) = match p.choice("spectrum") {
        "lorentzian" => {
            if !(p.f("width") > 0.0) {
                return Err(bad("width", "must be positive"));
            }
            let gh = lorentzian(p.f("hot_center"), p.f("width"));
            let gc = lorentzian(p.f("cold_center"), p.f("width"));
            (
                BathSpectrum::from_positive(p.f("t_h"), &[(wp, gh(wp)), (w0, gh(w0)), (wm, gh(wm))])?,
                BathSpectrum::from_positive(p.f("t_c"), &[(wp, gc(wp)), (w0, gc(w0)), (wm, gc(wm))])?,
            )
        }
        _ => (
            BathSpectrum::from_positive(p.f("t_h"), &[(wp, 1.0), (w0, 0.01), (wm, 0.0)])?,
            BathSpectrum::from_positive(p.f("t_c"), &[(wp, 0.01), (w0, 1.0), (wm, 0.0)])?,
        ),
    };
    let populations = match p.choice("populations") {
        "explicit" => QubitPopulations::Explicit(1.0 - p.f("p_excited"), p.f("p_excited")),
        _ => QubitPopulations::Derive,
    };
    let mut cfg = CatalysisConfig {
        omega0: w0,
        nu,
        g: p.f("g"),
        kappa_pump: 0.0,
        pump_kind: pump,
        hot,
        cold,
        populations,
    };
    if pump != PumpKind::None {
        cfg.kappa_pump = p.f("kappa_ratio") * drift_diffusion(&cfg)?.0.abs();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn initial(p: &Params) -> Result<GaussianState, Failure> {
    let a2 = p.f("alpha0_sq");
    if !(a2 >= 0.0) {
        return Err(bad("alpha0_sq", "must be non-negative"));
    }
    Ok(GaussianState::coherent(a2.sqrt(), 0.0))
}

fn gamma_time(gamma: f64, multiple: f64) -> Result<f64, Failure> {
    if gamma == 0.0 {
        return Err(Failure::Config("Gamma = 0: the piston has no time scale".into()));
    }
    Ok(multiple / gamma.abs())
}

pub fn run(p: &Params) -> Result<PointOutput, Failure> {
    match p.choice("subfigure") {
        "a" => frequency_scan(p),
        sub => time_series(p, sub == "c"),
    }
}

fn frequency_scan(p: &Params) -> Result<PointOutput, Failure> {
    let n = p.count("nu_points");
    if n == 0 {
        return Err(bad("nu_points", "frequency grid is empty"));
    }
    let s0 = initial(p)?;
    let flags = RunFlags::default();
    let mut rows = vec![];
    for nu in linspace(p.f("nu_start"), p.f("nu_stop"), n) {
        let base = build(p, nu, PumpKind::None)?;
        let (gamma, _) = drift_diffusion(&base)?;
        let t = gamma_time(gamma, p.f("t_eval_gamma"))?;
        let mut cells = vec![nu.into()];
        let mut worst = 0.0f64;
        let mut row_flags = vec![];
        for pump in PUMPS {
            let run = evolve_piston(&build(p, nu, pump)?, &s0, &[t])?;
            match run.points.first() {
                Some(pt) => {
                    cells.push(pt.power_max.into());
                    worst = worst.max(pt.identity_residual);
                }
                None => {
                    cells.push(f64::NAN.into());
                    row_flags.push(format!("occupation_cap_{}", pump_name(pump)));
                }
            }
        }
        if gamma > 0.0 {
            row_flags.push("no_gain".into());
        }
        cells.push(worst.into());
        let mut row = Row::new(cells);
        row.flags = row_flags;
        rows.push(row);
    }
    Ok(PointOutput { rows, flags })
}

fn pump_name(k: PumpKind) -> &'static str {
    match k {
        PumpKind::None => "none",
        PumpKind::Linear => "linear",
        PumpKind::Quadratic => "quadratic",
    }
}

fn time_series(p: &Params, ergotropy: bool) -> Result<PointOutput, Failure> {
    let nu = p.f("nu");
    let base = build(p, nu, PumpKind::None)?;
    let (gamma, _) = drift_diffusion(&base)?;
    let n = p.count("points");
    if n < 2 {
        return Err(bad("points", "need at least two time points"));
    }
    let grid = linspace(0.0, gamma_time(gamma, p.f("t_end_gamma"))?, n);
    let s0 = initial(p)?;
    let pumps: Vec<PumpKind> = if ergotropy {
        PUMPS.to_vec()
    } else {
        let pumped = match p.choice("pump") {
            "none" => PumpKind::None,
            "linear" => PumpKind::Linear,
            _ => PumpKind::Quadratic,
        };
        vec![pumped, PumpKind::None]
    };
    let runs: Vec<PistonRun> = pumps
        .iter()
        .map(|&k| Ok(evolve_piston(&build(p, nu, k)?, &s0, &grid)?))
        .collect::<Result<_, Failure>>()?;
    let mut flags = RunFlags::default();
    flags.notes.push(format!("Gamma = {gamma:e}"));
    if gamma > 0.0 {
        flags.notes.push("no gain: the piston decays".into());
    }
    for (k, r) in pumps.iter().zip(&runs) {
        if let Some(t) = r.capped_at {
            flags.notes.push(format!("{} pump capped at t = {t}", pump_name(*k)));
        }
    }
    let eta_max = base.eta_max();
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let pts: Vec<Option<&EnginePoint>> = runs.iter().map(|r| r.points.get(i)).collect();
            let identity = pts.iter().flatten().fold(0.0f64, |a, q| a.max(q.identity_residual));
            let get = |j: usize, f: fn(&EnginePoint) -> f64| pts[j].map_or(f64::NAN, f);
            let mut row = if ergotropy {
                let none = get(0, |q| q.ergotropy);
                Row::nums(&[
                    t,
                    get(1, |q| q.ergotropy) / none,
                    get(2, |q| q.ergotropy) / none,
                    identity,
                ])
            } else {
                Row::nums(&[t, get(0, |q| q.eta), get(1, |q| q.eta), eta_max, identity])
            };
            if pts.iter().any(|q| q.is_none()) {
                row = row.flag("occupation_cap");
            }
            if gamma > 0.0 {
                row = row.flag("no_gain");
            }
            row
        })
        .collect();
    Ok(PointOutput { rows, flags })
}
