//! Coupling and cutoff sweeps of the extrapolated energy.

use serde::{Deserialize, Serialize};

use super::{
    ensemble_seed, energy_from_actions, extrapolate_energy, sample_actions, table_for, ActionEnsemble,
    EnergyCurve, EstimatorError, McOptions, Purpose,
};
use crate::kernels::KernelEvaluator;
use crate::paths::PathGrid;

/// Horizons, time step and ensemble settings shared by the sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub mc: McOptions,
}

impl SweepSettings {
    fn validate(&self) -> Result<(), EstimatorError> {
        self.mc.validate()?;
        if self.horizons.len() < 3 {
            return Err(EstimatorError::Domain("sweeps need at least 3 horizons".into()));
        }
        if self.horizons.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(EstimatorError::Domain("horizons must be strictly increasing".into()));
        }
        Ok(())
    }
}

fn ensembles(ev: &KernelEvaluator, settings: &SweepSettings) -> Result<Vec<ActionEnsemble>, EstimatorError> {
    settings
        .horizons
        .iter()
        .map(|&t| {
            let grid = PathGrid::from_dt(t, settings.dt)?;
            let table = table_for(ev, &grid)?;
            let seed = ensemble_seed(settings.mc.seed, Purpose::Energy, t);
            sample_actions(&table, grid, seed, &settings.mc)
        })
        .collect()
}

fn curve_at(g: f64, ens: &[ActionEnsemble], n_blocks: usize) -> Result<EnergyCurve, EstimatorError> {
    let est: Vec<_> = ens
        .iter()
        .map(|e| energy_from_actions(e.grid.big_t(), g, &e.actions, n_blocks))
        .collect();
    extrapolate_energy(&est)
}

/// Extrapolated energy at the evaluator's coupling.
pub fn energy_curve(ev: &KernelEvaluator, settings: &SweepSettings) -> Result<EnergyCurve, EstimatorError> {
    settings.validate()?;
    let ens = ensembles(ev, settings)?;
    curve_at(ev.params().g, &ens, settings.mc.n_blocks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GSweepRow {
    pub g: f64,
    pub e_inf: Option<f64>,
    pub stderr: Option<f64>,
    pub fit_residual: Option<f64>,
    /// `E_∞ / g²`; absent at `g = 0`.
    pub ratio: Option<f64>,
    pub g2_e_ren: Option<f64>,
    pub difference: Option<f64>,
    pub curve: Option<EnergyCurve>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GSweep {
    pub e_ren: f64,
    pub tau: f64,
    /// `c(τ)/4`, the small-coupling residual scale.
    pub c_quarter: f64,
    pub rows: Vec<GSweepRow>,
}

/// Extrapolated energies for every coupling in `g_list`, all evaluated on
/// the same path ensembles.
pub fn sweep_g(ev: &KernelEvaluator, g_list: &[f64], settings: &SweepSettings) -> Result<GSweep, EstimatorError> {
    settings.validate()?;
    let e_ren = ev.renorm_energy()?.value;
    let tau = ev.params().tau;
    let c_quarter = 0.25 * ev.c_tau_at(tau)?.value;
    let ens = ensembles(ev, settings)?;
    let rows = g_list
        .iter()
        .map(|&g| {
            if g == 0.0 {
                return GSweepRow {
                    g,
                    e_inf: Some(0.0),
                    stderr: Some(0.0),
                    fit_residual: Some(0.0),
                    ratio: None,
                    g2_e_ren: None,
                    difference: None,
                    curve: None,
                    error: None,
                };
            }
            match curve_at(g, &ens, settings.mc.n_blocks) {
                Ok(c) => GSweepRow {
                    g,
                    e_inf: Some(c.extrapolated),
                    stderr: Some(c.extrapolated_stderr),
                    fit_residual: Some(c.fit_residual),
                    ratio: Some(c.extrapolated / (g * g)),
                    g2_e_ren: Some(g * g * e_ren),
                    difference: Some(c.extrapolated - g * g * e_ren),
                    curve: Some(c),
                    error: None,
                },
                Err(e) => GSweepRow {
                    g,
                    e_inf: None,
                    stderr: None,
                    fit_residual: None,
                    ratio: None,
                    g2_e_ren: Some(g * g * e_ren),
                    difference: None,
                    curve: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(GSweep {
        e_ren,
        tau,
        c_quarter,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSweepRow {
    pub eps: f64,
    pub e_ren: Option<f64>,
    pub e_inf: Option<f64>,
    pub stderr: Option<f64>,
    pub g2_e_ren: Option<f64>,
    pub difference: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSweep {
    pub g: f64,
    pub rows: Vec<EpsSweepRow>,
}

/// Extrapolated energy against the diverging counterterm `g² E_ren(ε)` for
/// each cutoff in `eps_list`. Every cutoff reuses the same random paths.
pub fn sweep_eps(ev: &KernelEvaluator, eps_list: &[f64], settings: &SweepSettings) -> Result<EpsSweep, EstimatorError> {
    settings.validate()?;
    let g = ev.params().g;
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let run = || -> Result<(f64, EnergyCurve), EstimatorError> {
                let ev_eps = KernelEvaluator::new(ev.params().with_eps(eps), *ev.quad())?;
                let e_ren = ev_eps.renorm_energy()?.value;
                let ens = ensembles(&ev_eps, settings)?;
                Ok((e_ren, curve_at(g, &ens, settings.mc.n_blocks)?))
            };
            match run() {
                Ok((e_ren, c)) => EpsSweepRow {
                    eps,
                    e_ren: Some(e_ren),
                    e_inf: Some(c.extrapolated),
                    stderr: Some(c.extrapolated_stderr),
                    g2_e_ren: Some(g * g * e_ren),
                    difference: Some(c.extrapolated - g * g * e_ren),
                    error: None,
                },
                Err(e) => EpsSweepRow {
                    eps,
                    e_ren: None,
                    e_inf: None,
                    stderr: None,
                    g2_e_ren: None,
                    difference: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(EpsSweep { g, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ModelParams;
    use crate::quadrature::QuadratureConfig;

    fn setup(g: f64) -> (KernelEvaluator, SweepSettings) {
        let ev = KernelEvaluator::new(
            ModelParams::new(0.2, 1.0, g, 1.0, 0.5).unwrap(),
            QuadratureConfig::default(),
        )
        .unwrap();
        let s = SweepSettings {
            horizons: vec![1.0, 1.5, 2.0],
            dt: 0.1,
            mc: McOptions::new(200, 3),
        };
        (ev, s)
    }

    #[test]
    fn g_sweep_is_even_and_handles_zero() {
        let (ev, s) = setup(0.3);
        let sw = sweep_g(&ev, &[0.3, -0.3, 0.0], &s).unwrap();
        assert_eq!(sw.rows[0].e_inf, sw.rows[1].e_inf);
        assert_eq!(sw.rows[2].e_inf, Some(0.0));
        assert!(sw.rows[2].ratio.is_none() && sw.rows[2].difference.is_none());
        assert!(sw.c_quarter > 0.0);
    }

    #[test]
    fn eps_sweep_rows_and_failed_row() {
        let (ev, s) = setup(0.0);
        let sw = sweep_eps(&ev, &[0.2, -1.0], &s).unwrap();
        assert_eq!(sw.rows[0].difference, Some(0.0));
        assert!(sw.rows[1].error.is_some());
    }

    #[test]
    fn sweeps_reject_short_horizon_lists() {
        let (ev, mut s) = setup(0.3);
        s.horizons.pop();
        assert!(sweep_g(&ev, &[0.3], &s).is_err());
    }
}
