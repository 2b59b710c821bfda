//! Oscillator relaxing under a squeezed thermal bath: energy split into
//! passive energy and ergotropy, plus the von Neumann entropy.

use qmachine_core::lindblad::{integrate, squeezed_bath_generator};
use qmachine_core::passivity::passive_state;
use qmachine_core::quantum_core::{von_neumann_entropy, HilbertSpace};

use super::{integration, oscillator_initial, positive, Failure, PointOutput};
use crate::config::Params;
use crate::output::{col, Column, Row, RunFlags};

pub fn layout() -> (Vec<String>, Vec<Column>) {
    (
        vec!["oscillator in a squeezed thermal bath, energies measured with H = omega a^dagger a".into()],
        vec![
            col("t", "time [1/kappa]"),
            col("energy", "<H> [omega units]"),
            col("passive_energy", "energy of the passive state [omega units]"),
            col("ergotropy", "energy minus passive energy [omega units]"),
            col("entropy", "von Neumann entropy [nats]"),
            col("trace_error", "|Tr rho - 1|"),
        ],
    )
}

pub fn run(p: &Params) -> Result<PointOutput, Failure> {
    positive(p, &["omega", "kappa", "t_end", "dt"])?;
    let space = HilbertSpace::new(p.count("fock_dim"))?;
    let omega = p.f("omega");
    let gen = squeezed_bath_generator(p.f("kappa"), p.f("n_bar"), p.f("r"), omega, space)?;
    let h = gen.hamiltonian_at(0.0);
    let rho0 = oscillator_initial(p.choice("initial"), p.f("initial_value"), &h, omega, space)?;
    let icfg = integration(p)?;
    let traj = integrate(&gen, &rho0, (0.0, p.f("t_end")), &icfg)?;
    let mut rows = Vec::with_capacity(traj.len());
    for (t, rho) in traj.times().iter().zip(traj.states()) {
        let d = passive_state(rho, &h)?;
        rows.push(Row::nums(&[
            *t,
            d.total_energy,
            d.passive_energy,
            d.ergotropy,
            von_neumann_entropy(rho)?,
            (rho.trace() - 1.0).abs(),
        ]));
    }
    let mut flags = RunFlags::default();
    flags.absorb(&traj.meta.flags);
    Ok(PointOutput { rows, flags })
}
