//! Ensemble cross-checks: the mean action against its quadrature value,
//! the Itô decomposition under step refinement, and the growth of the
//! renormalized exponential moment.

use serde::Serialize;

use super::{ensemble_seed, leave_block_out_lme, map_paths, sample_actions, table_for, EstimatorError, McOptions, Purpose};
use crate::kernels::KernelEvaluator;
use crate::paths::{s_decomposed, s_full, sample_path, BrownianPath, PathGrid};
use crate::rng::RandomStream;
use crate::stats::{jackknife_means, jackknife_stderr, log_mean_exp, mean, pairwise_sum};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DysonCheck {
    pub big_t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub mc_mean: f64,
    pub stderr: f64,
    pub quadrature: f64,
}

impl DysonCheck {
    /// Deviation of the ensemble mean from the quadrature value in units of
    /// its standard error.
    pub fn sigmas(&self) -> f64 {
        (self.mc_mean - self.quadrature) / self.stderr
    }
}

/// Ensemble mean of `S` against `𝔼[S]` from quadrature.
pub fn dyson_check(ev: &KernelEvaluator, grid: PathGrid, mc: &McOptions) -> Result<DysonCheck, EstimatorError> {
    let table = table_for(ev, &grid)?;
    let seed = ensemble_seed(mc.seed, Purpose::Dyson, grid.big_t());
    let ens = sample_actions(&table, grid, seed, mc)?;
    let reps = jackknife_means(&ens.actions, mc.n_blocks);
    Ok(DysonCheck {
        big_t: grid.big_t(),
        dt: grid.dt(),
        n_paths: mc.n_paths,
        mc_mean: mean(&ens.actions),
        stderr: jackknife_stderr(&reps),
        quadrature: ev.mean_s_quadrature(grid.big_t())?.value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItoLevel {
    pub dt: f64,
    pub n_paths: usize,
    /// RMS over paths of `S - (S_ren + 4T ϱ(0,0))`.
    pub rms_defect: f64,
    pub mean_y: f64,
    pub stderr_y: f64,
    pub max_abs_z: f64,
    /// `|Z|` of the constant path, which dominates `|Z|` of every path.
    pub frozen_z_bound: f64,
    /// `2 ∫_0^{2T} ϱ(0,u) du`.
    pub quadrature_z_bound: f64,
    /// Paths whose `|Z|` exceeds `quadrature_z_bound`.
    pub quadrature_bound_exceeded: usize,
}

/// Decomposes every path of an ensemble at each step in `dts`.
pub fn ito_refinement(
    ev: &KernelEvaluator,
    big_t: f64,
    tau: f64,
    dts: &[f64],
    mc: &McOptions,
) -> Result<Vec<ItoLevel>, EstimatorError> {
    mc.validate()?;
    let seed = ensemble_seed(mc.seed, Purpose::Ito, big_t);
    let quadrature_z_bound = 2.0 * ev.rho_time_integral(2.0 * big_t)?.value;
    dts.iter()
        .map(|&dt| {
            let grid = PathGrid::from_dt(big_t, dt)?;
            let table = table_for(ev, &grid)?;
            let four_t_rho = 4.0 * big_t * table.rho_origin();
            let per_path = map_paths(mc.n_paths, mc.n_workers, |i| {
                let path = sample_path(grid, RandomStream::new(seed, i));
                Ok(s_decomposed(&path, &table, tau)?)
            })?;
            let sq: Vec<f64> = per_path
                .iter()
                .map(|f| (f.s_full - (f.s_ren + four_t_rho)).powi(2))
                .collect();
            let ys: Vec<f64> = per_path.iter().map(|f| f.y_ito).collect();
            let frozen = s_decomposed(&BrownianPath::frozen(grid), &table, tau)?;
            let abs_z: Vec<f64> = per_path.iter().map(|f| f.z_boundary.abs()).collect();
            Ok(ItoLevel {
                dt: grid.dt(),
                n_paths: mc.n_paths,
                rms_defect: (pairwise_sum(&sq) / per_path.len() as f64).sqrt(),
                mean_y: mean(&ys),
                stderr_y: jackknife_stderr(&jackknife_means(&ys, mc.n_blocks)),
                max_abs_z: abs_z.iter().cloned().fold(0.0, f64::max),
                frozen_z_bound: frozen.z_boundary.abs(),
                quadrature_z_bound,
                quadrature_bound_exceeded: abs_z.iter().filter(|&&z| z > quadrature_z_bound).count(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub big_t: f64,
    /// `log 𝔼[exp((g²/2)(S - 4T ϱ(0,0)))]`.
    pub log_moment: f64,
    pub stderr: f64,
}

/// Growth in `T` of the exponential moment of the renormalized action,
/// with `S_ren` taken as `S - 4T ϱ(0,0)`.
pub fn renormalized_growth(
    ev: &KernelEvaluator,
    horizons: &[f64],
    dt: f64,
    mc: &McOptions,
) -> Result<Vec<GrowthPoint>, EstimatorError> {
    mc.validate()?;
    let half_g2 = 0.5 * ev.params().g.powi(2);
    horizons
        .iter()
        .map(|&big_t| {
            let grid = PathGrid::from_dt(big_t, dt)?;
            let table = table_for(ev, &grid)?;
            let shift = 4.0 * big_t * table.rho_origin();
            let seed = ensemble_seed(mc.seed, Purpose::Growth, big_t);
            let v = map_paths(mc.n_paths, mc.n_workers, |i| {
                let path = sample_path(grid, RandomStream::new(seed, i));
                Ok(half_g2 * (s_full(&path, &table)? - shift))
            })?;
            Ok(GrowthPoint {
                big_t,
                log_moment: log_mean_exp(&v),
                stderr: jackknife_stderr(&leave_block_out_lme(&v, mc.n_blocks)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ModelParams;
    use crate::quadrature::QuadratureConfig;

    #[test]
    fn ito_levels_are_consistent() {
        let ev = KernelEvaluator::new(ModelParams::new(0.1, 1.0, 0.3, 1.0, 0.5).unwrap(), QuadratureConfig::default())
            .unwrap();
        let levels = ito_refinement(&ev, 1.0, 0.5, &[0.1, 0.05], &McOptions::new(200, 4)).unwrap();
        for l in &levels {
            assert!(l.max_abs_z <= l.frozen_z_bound * (1.0 + 1e-12));
            assert!(l.mean_y.abs() <= 3.0 * l.stderr_y, "{} ± {}", l.mean_y, l.stderr_y);
        }
        assert!(levels[1].rms_defect < levels[0].rms_defect);
    }
}
