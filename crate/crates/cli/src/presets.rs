//! Built-in configurations for the published figures. A preset is plain
//! config text; a user config given alongside it overrides it key by key.

use clap::ValueEnum;

use crate::config::Experiment;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig5a,
    Fig5b,
    Fig6,
    Fig7,
    Fig8,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig5a => "fig5a",
            Preset::Fig5b => "fig5b",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
        }
    }

    pub fn experiment(self) -> Experiment {
        match self {
            Preset::Fig5a | Preset::Fig5b => Experiment::Otto,
            Preset::Fig6 => Experiment::Relax,
            Preset::Fig7 => Experiment::Catalysis,
            Preset::Fig8 => Experiment::Carnot,
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            // T_h = 3 T_c, r = 0.5, efficiency against omega_c / omega_h
            Preset::Fig5a => {
                "omega_h = 1\nt_c = 0.03\nt_h = 0.09\nr = 0.5\n\
                 sweep.param = omega_ratio\nsweep.start = 0.05\nsweep.stop = 0.95\nsweep.points = 20\n"
            }
            // T_h = 3 T_c, omega_c = omega_h / 2, efficiency against r; at
            // the fig5a temperatures the thermal occupations vanish and every
            // curve sits at 1, so this sweep runs at T_c = omega_h
            Preset::Fig5b => {
                "omega_h = 1\nomega_ratio = 0.5\nt_c = 1\nt_h = 3\n\
                 sweep.param = r\nsweep.start = 0\nsweep.stop = 1.5\nsweep.points = 31\n"
            }
            // vacuum relaxing under a squeezed-vacuum bath
            Preset::Fig6 => {
                "omega = 1\nkappa = 1\nn_bar = 0\nr = 0.5\ninitial = vacuum\nfock_dim = 30\nt_end = 8\ndt = 0.05\n"
            }
            Preset::Fig7 => "subfigure = b\nt_h = 1\nt_c = 0.6\nkappa_ratio = 0.1\nalpha0_sq = 1\nspectrum = preset\n",
            // omega(t) = 25 - 0.05 t, T_h = 5, r = 0.2
            Preset::Fig8 => {
                "omega0 = 25\nramp_rate = 0.05\nt_h = 5\nr = 0.2\nkappa = 1\nfock_dim = 41\nt_end = 80\ndt = 0.5\n"
            }
        }
    }
}
