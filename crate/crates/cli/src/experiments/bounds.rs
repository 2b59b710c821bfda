//! Entropy change against the second-law and tight bounds for a static
//! relaxation, with the Spohn entropy-production rate.

use nalgebra::DMatrix;
use qmachine_core::entropy_bounds::{auxiliary_passive_path, bound_profile, spohn_trace};
use qmachine_core::lindblad::{integrate, qubit_thermal_generator, squeezed_bath_generator, steady_state};
use qmachine_core::quantum_core::{bose_temperature, gibbs_state, DensityOperator, HilbertSpace, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bad, fock_level, integration, oscillator_initial, positive, Failure, PointOutput};
use crate::config::Params;
use crate::output::{col, Column, Row, RunFlags};

/// Spohn rates below this count as violations and are flagged.
const SIGMA_FLOOR: f64 = -1e-9;
/// Random initial states live on the lowest few levels.
const RANDOM_LEVELS: usize = 4;

pub fn layout() -> (Vec<String>, Vec<Column>) {
    (
        vec!["static generator; bounds are running values for the prefix [0, t]".into()],
        vec![
            col("t", "time [1/kappa]"),
            col("delta_S", "entropy change [k_B]"),
            col("bound_second_law", "E_d / T, or E~_d / T for a squeezed bath [k_B]"),
            col("bound_tight", "Q' / T [k_B]"),
            col("sigma", "entropy-production rate toward the steady state [k_B kappa]"),
        ],
    )
}

fn random_state(dim: usize, seed: u64) -> Result<DensityOperator, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = dim.min(RANDOM_LEVELS);
    let a = DMatrix::from_fn(k, k, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let small = &a * a.adjoint();
    let tr = small.trace().re;
    let mut m = DMatrix::zeros(dim, dim);
    m.view_mut((0, 0), (k, k)).copy_from(&(small / C64::new(tr, 0.0)));
    Ok(DensityOperator::new(m)?)
}

pub fn run(p: &Params, seed: u64) -> Result<PointOutput, Failure> {
    positive(p, &["omega", "kappa", "t_end", "dt"])?;
    let (omega, n_bar, r) = (p.f("omega"), p.f("n_bar"), p.f("r"));
    let value = p.f("initial_value");
    let initial = p.choice("initial");
    let (gen, rho0) = match p.choice("system") {
        "qubit" => {
            if r != 0.0 {
                return Err(bad("r", "the qubit bath is thermal; r must be 0"));
            }
            let gen = qubit_thermal_generator(p.f("kappa"), n_bar, omega)?;
            let h = gen.hamiltonian_at(0.0);
            let rho0 = match initial {
                "inverted" if (0.0..=1.0).contains(&value) => DensityOperator::from_populations(&[1.0 - value, value])?,
                "inverted" => return Err(bad("initial_value", "excited population must lie in [0, 1]")),
                "fock" => DensityOperator::fock(HilbertSpace::qubit(), fock_level(value, 2)?)?,
                "thermal" if value > 0.0 => gibbs_state(&h, bose_temperature(omega, value))?,
                "thermal" => DensityOperator::fock(HilbertSpace::qubit(), 0)?,
                "random" => random_state(2, seed)?,
                other => return Err(bad("initial", format!("`{other}` is not available for a qubit"))),
            };
            (gen, rho0)
        }
        _ => {
            let space = HilbertSpace::new(p.count("fock_dim"))?;
            let gen = squeezed_bath_generator(p.f("kappa"), n_bar, r, omega, space)?;
            let h = gen.hamiltonian_at(0.0);
            let rho0 = match initial {
                "random" => random_state(space.dim(), seed)?,
                other => oscillator_initial(other, value, &h, omega, space)?,
            };
            (gen, rho0)
        }
    };
    let icfg = integration(p)?;
    let traj = integrate(&gen, &rho0, (0.0, p.f("t_end")), &icfg)?;
    let rho_ss = steady_state(&gen, 0.0)?;
    let sigma = spohn_trace(&traj, &gen, &rho_ss)?;
    let aux = auxiliary_passive_path(&traj, &gen, &icfg)?;
    let profile = bound_profile(&traj, &aux, &gen)?;
    let rows = profile
        .iter()
        .zip(&sigma)
        .map(|(b, (_, s))| {
            let row = Row::nums(&[b.t, b.delta_s, b.second_law, b.tight, *s]);
            if *s < SIGMA_FLOOR {
                row.flag("sigma_negative")
            } else {
                row
            }
        })
        .collect();
    let mut flags = RunFlags::default();
    flags.absorb(&traj.meta.flags);
    flags.absorb(&aux.meta.flags);
    Ok(PointOutput { rows, flags })
}
