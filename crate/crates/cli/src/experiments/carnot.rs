//! Energizing isotherm of the modified Carnot cycle: entropy change of the
//! working fluid against the two entropy bounds, as a function of the
//! stroke duration.

use std::sync::Arc;

use qmachine_core::entropy_bounds::{auxiliary_passive_path, bound_profile};
use qmachine_core::lindblad::{integrate, squeezed_bath_ramp};
use qmachine_core::quantum_core::{gibbs_state, HilbertSpace};

use super::{bad, integration, positive, Failure, PointOutput};
use crate::config::Params;
use crate::output::{col, Column, Row, RunFlags};

pub fn layout() -> (Vec<String>, Vec<Column>) {
    (
        vec!["omega(t) = omega0 - ramp_rate * t, start in the Gibbs state of H(0) at T_h".into()],
        vec![
            col("t", "stroke duration [1/kappa]"),
            col("delta_S", "entropy change of the working fluid [k_B]"),
            col(
                "E_d_over_T",
                "second-law bound: squeezed-frame dissipative energy / T_h [k_B]",
            ),
            col(
                "Q_prime_over_T",
                "tight bound: passive heat of the thermal counterpart / T_h [k_B]",
            ),
        ],
    )
}

pub fn run(p: &Params) -> Result<PointOutput, Failure> {
    positive(p, &["omega0", "t_h", "kappa", "t_end", "dt"])?;
    let (w0, rate, t_end) = (p.f("omega0"), p.f("ramp_rate"), p.f("t_end"));
    if !(w0 - rate * t_end > 0.0) {
        return Err(bad(
            "t_end",
            format!("omega(t) reaches {} before t_end", w0 - rate * t_end),
        ));
    }
    let space = HilbertSpace::new(p.count("fock_dim"))?;
    let omega = Arc::new(move |t: f64| w0 - rate * t);
    let gen = squeezed_bath_ramp(p.f("kappa"), p.f("t_h"), p.f("r"), omega, space, "isotherm")?;
    let rho0 = gibbs_state(&gen.hamiltonian_at(0.0), p.f("t_h"))?;
    let icfg = integration(p)?;
    let traj = integrate(&gen, &rho0, (0.0, t_end), &icfg)?;
    let aux = auxiliary_passive_path(&traj, &gen, &icfg)?;
    let rows = bound_profile(&traj, &aux, &gen)?
        .iter()
        .map(|b| Row::nums(&[b.t, b.delta_s, b.second_law, b.tight]))
        .collect();
    let mut flags = RunFlags::default();
    flags.absorb(&traj.meta.flags);
    flags.absorb(&aux.meta.flags);
    Ok(PointOutput { rows, flags })
}
