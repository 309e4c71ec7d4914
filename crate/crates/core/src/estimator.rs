//! Monte Carlo estimation of the finite-horizon energy
//! `Ê_T = -(1/2T) log 𝔼[exp((g²/2) S)]`, its extrapolation in `1/T`, and
//! the sweeps and overlaps built on top of it.
//!
//! The action `S` of a path does not depend on `g`, so every ensemble is
//! sampled once and stored as its per-path actions; any number of couplings
//! can then be evaluated on it. Per-path values are kept in path-index order
//! and reduced in a fixed order, so results do not depend on the worker
//! count.

mod checks;
mod overlap;
mod sweep;

pub use checks::{dyson_check, ito_refinement, renormalized_growth, DysonCheck, GrowthPoint, ItoLevel};
pub use overlap::{estimate_gamma, OverlapEstimate};
pub use sweep::{energy_curve, sweep_eps, sweep_g, EpsSweep, EpsSweepRow, GSweep, GSweepRow, SweepSettings};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelError, KernelEvaluator, LagTable, TableError};
use crate::paths::{s_full, sample_path, PathError, PathGrid};
use crate::rng::{derive_seed, RandomStream};
use crate::stats::{
    block_ranges, effective_sample_size, jackknife_stderr, log_mean_exp, pairwise_sum,
};

/// Minimum ensemble size accepted by the estimators.
pub const MIN_PATHS: usize = 100;
/// Below this effective sample size an estimate is flagged as degenerate.
pub const ESS_FLOOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("invalid estimator input: {0}")]
    Domain(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Ensemble size, base seed and parallelism of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McOptions {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub n_workers: usize,
    #[serde(default = "default_blocks")]
    pub n_blocks: usize,
}

fn default_workers() -> usize {
    1
}

fn default_blocks() -> usize {
    50
}

impl McOptions {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            n_workers: 1,
            n_blocks: 50,
        }
    }

    pub fn with_workers(self, n_workers: usize) -> Self {
        Self { n_workers, ..self }
    }

    pub fn with_paths(self, n_paths: usize) -> Self {
        Self { n_paths, ..self }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.n_paths < MIN_PATHS {
            return Err(EstimatorError::Domain(format!(
                "n_paths must be at least {MIN_PATHS}, got {}",
                self.n_paths
            )));
        }
        if self.n_workers == 0 {
            return Err(EstimatorError::Domain("n_workers must be positive".into()));
        }
        if self.n_blocks < 2 {
            return Err(EstimatorError::Domain("n_blocks must be at least 2".into()));
        }
        Ok(())
    }
}

/// Labels separating the random streams of different ensemble kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Energy = 1,
    OverlapNumerator = 2,
    OverlapDenominator = 3,
    Dyson = 4,
    Ito = 5,
    Growth = 6,
}

/// Seed of the ensemble of kind `purpose` at horizon `big_t`. The seed does
/// not depend on `ε` or `g`, so sweeps use common random numbers.
pub fn ensemble_seed(seed: u64, purpose: Purpose, big_t: f64) -> u64 {
    derive_seed(derive_seed(seed, purpose as u64), big_t.to_bits())
}

/// Evaluates `f(path_index)` for every path on a pool of `n_workers`
/// threads, returning results in index order.
pub(crate) fn map_paths<T, F>(n_paths: usize, n_workers: usize, f: F) -> Result<Vec<T>, EstimatorError>
where
    T: Send,
    F: Fn(u64) -> Result<T, EstimatorError> + Sync + Send,
{
    if n_workers <= 1 {
        return (0..n_paths as u64).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build()
        .map_err(|e| EstimatorError::Pool(e.to_string()))?;
    pool.install(|| (0..n_paths as u64).into_par_iter().map(f).collect())
}

/// Kernel table covering every lag of `grid`.
pub fn table_for(ev: &KernelEvaluator, grid: &PathGrid) -> Result<LagTable, EstimatorError> {
    Ok(ev.tabulate(grid.dt(), grid.n_steps())?)
}

/// Per-path actions `S` of one ensemble, in path-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEnsemble {
    pub grid: PathGrid,
    pub seed: u64,
    pub actions: Vec<f64>,
}

pub fn sample_actions(
    table: &LagTable,
    grid: PathGrid,
    seed: u64,
    mc: &McOptions,
) -> Result<ActionEnsemble, EstimatorError> {
    mc.validate()?;
    let actions = map_paths(mc.n_paths, mc.n_workers, |i| {
        let path = sample_path(grid, RandomStream::new(seed, i));
        Ok(s_full(&path, table)?)
    })?;
    Ok(ActionEnsemble { grid, seed, actions })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub big_t: f64,
    pub g: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub ess: f64,
    pub max_log_weight: f64,
    /// Set when the effective sample size falls below [`ESS_FLOOR`].
    pub degenerate: bool,
    /// Leave-one-block-out values of the estimate.
    #[serde(skip)]
    pub replicates: Vec<f64>,
}

/// `log mean exp(v)` with each contiguous block left out in turn.
pub(crate) fn leave_block_out_lme(v: &[f64], n_blocks: usize) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ranges = block_ranges(v.len(), n_blocks);
    let sums: Vec<f64> = ranges
        .iter()
        .map(|r| {
            let e: Vec<f64> = v[r.clone()].iter().map(|x| (x - m).exp()).collect();
            pairwise_sum(&e)
        })
        .collect();
    (0..ranges.len())
        .map(|k| {
            let rest: Vec<f64> = sums
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, s)| *s)
                .collect();
            let count = v.len() - ranges[k].len();
            m + (pairwise_sum(&rest) / count as f64).ln()
        })
        .collect()
}

/// Energy estimate at coupling `g` from stored actions.
pub fn energy_from_actions(big_t: f64, g: f64, actions: &[f64], n_blocks: usize) -> EnergyEstimate {
    let half_g2 = 0.5 * g * g;
    let v: Vec<f64> = actions.iter().map(|s| half_g2 * s).collect();
    let scale = -1.0 / (2.0 * big_t);
    // adding 0.0 turns a -0.0 at g = 0 into +0.0
    let value = scale * log_mean_exp(&v) + 0.0;
    let replicates: Vec<f64> = leave_block_out_lme(&v, n_blocks)
        .into_iter()
        .map(|x| scale * x + 0.0)
        .collect();
    let ess = effective_sample_size(&v);
    EnergyEstimate {
        big_t,
        g,
        value,
        stderr: jackknife_stderr(&replicates),
        n_paths: actions.len(),
        ess,
        max_log_weight: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        degenerate: ess < ESS_FLOOR,
        replicates,
    }
}

/// `Ê_T` at the evaluator's coupling for the horizon of `grid`.
pub fn estimate_energy(
    ev: &KernelEvaluator,
    grid: PathGrid,
    mc: &McOptions,
) -> Result<EnergyEstimate, EstimatorError> {
    mc.validate()?;
    let table = table_for(ev, &grid)?;
    let seed = ensemble_seed(mc.seed, Purpose::Energy, grid.big_t());
    let ens = sample_actions(&table, grid, seed, mc)?;
    Ok(energy_from_actions(grid.big_t(), ev.params().g, &ens.actions, mc.n_blocks))
}

/// Mean of `exp(i P·(B_T - B_{-T})) exp((g²/2) S)` relative to the largest
/// weight, for a nonzero total momentum `P`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumEstimate {
    pub big_t: f64,
    pub momentum: [f64; 3],
    /// Real and imaginary parts of the mean, scaled by `exp(-max log weight)`.
    pub mean_re: f64,
    pub mean_im: f64,
    pub max_log_weight: f64,
    /// `-(1/2T) log Re(mean)`, when the real part is positive.
    pub value: Option<f64>,
}

pub fn estimate_energy_at_momentum(
    ev: &KernelEvaluator,
    grid: PathGrid,
    momentum: [f64; 3],
    mc: &McOptions,
) -> Result<MomentumEstimate, EstimatorError> {
    mc.validate()?;
    let table = table_for(ev, &grid)?;
    let seed = ensemble_seed(mc.seed, Purpose::Energy, grid.big_t());
    let half_g2 = 0.5 * ev.params().g.powi(2);
    let per_path = map_paths(mc.n_paths, mc.n_workers, |i| {
        let path = sample_path(grid, RandomStream::new(seed, i));
        let end = path.positions()[grid.n_steps()];
        let phase = momentum[0] * end[0] + momentum[1] * end[1] + momentum[2] * end[2];
        Ok((half_g2 * s_full(&path, &table)?, phase))
    })?;
    let m = per_path.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let re: Vec<f64> = per_path.iter().map(|(v, ph)| (v - m).exp() * ph.cos()).collect();
    let im: Vec<f64> = per_path.iter().map(|(v, ph)| (v - m).exp() * ph.sin()).collect();
    let n = per_path.len() as f64;
    let (mean_re, mean_im) = (pairwise_sum(&re) / n, pairwise_sum(&im) / n);
    let value = (mean_re > 0.0).then(|| -(m + mean_re.ln()) / (2.0 * grid.big_t()));
    Ok(MomentumEstimate {
        big_t: grid.big_t(),
        momentum,
        mean_re,
        mean_im,
        max_log_weight: m,
        value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyCurve {
    pub estimates: Vec<EnergyEstimate>,
    pub extrapolated: f64,
    pub extrapolated_stderr: f64,
    /// Coefficient `a` of the `a/T` correction.
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub fit_residual: f64,
}

fn wls_fit(ts: &[f64], ys: &[f64], ws: &[f64]) -> Result<(f64, f64, [f64; 3]), EstimatorError> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((t, y), w) in ts.iter().zip(ys).zip(ws) {
        let x = 1.0 / t;
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        t0 += w * y;
        t1 += w * x * y;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det.abs() > 1e-14 * s0 * s2) {
        return Err(EstimatorError::Domain("singular 1/T fit".into()));
    }
    let e = (s2 * t0 - s1 * t1) / det;
    let a = (s0 * t1 - s1 * t0) / det;
    // inverse normal matrix [var(E), cov, var(a)]
    Ok((e, a, [s2 / det, -s1 / det, s0 / det]))
}

/// Weighted least-squares fit of `Ê_T = E + a/T`.
///
/// The standard error of `E` is a jackknife over refits on the
/// leave-one-block-out replicates when every estimate carries the same
/// number of them, and the fit covariance otherwise.
pub fn extrapolate_energy(estimates: &[EnergyEstimate]) -> Result<EnergyCurve, EstimatorError> {
    if estimates.len() < 3 {
        return Err(EstimatorError::Domain(format!(
            "extrapolation needs at least 3 horizons, got {}",
            estimates.len()
        )));
    }
    if estimates.iter().any(|e| !e.value.is_finite() || !(e.big_t > 0.0)) {
        return Err(EstimatorError::Domain("non-finite estimate in extrapolation".into()));
    }
    if estimates.windows(2).any(|w| !(w[1].big_t > w[0].big_t)) {
        return Err(EstimatorError::Domain("horizons must be strictly increasing".into()));
    }
    let ts: Vec<f64> = estimates.iter().map(|e| e.big_t).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let weighted = estimates.iter().all(|e| e.stderr > 0.0);
    let ws: Vec<f64> = estimates
        .iter()
        .map(|e| if weighted { 1.0 / (e.stderr * e.stderr) } else { 1.0 })
        .collect();
    let (e, a, cov) = wls_fit(&ts, &ys, &ws)?;
    let sq: Vec<f64> = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (y - e - a / t).powi(2))
        .collect();
    let fit_residual = (pairwise_sum(&sq) / ts.len() as f64).sqrt();

    let n_rep = estimates[0].replicates.len();
    let stderr = if n_rep >= 2 && estimates.iter().all(|x| x.replicates.len() == n_rep) {
        let reps = (0..n_rep)
            .map(|b| {
                let yb: Vec<f64> = estimates.iter().map(|x| x.replicates[b]).collect();
                wls_fit(&ts, &yb, &ws).map(|f| f.0)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        jackknife_stderr(&reps)
    } else if weighted {
        cov[0].sqrt()
    } else {
        0.0
    };
    Ok(EnergyCurve {
        estimates: estimates.to_vec(),
        extrapolated: e,
        extrapolated_stderr: stderr,
        slope: a,
        fit_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ModelParams;
    use crate::quadrature::QuadratureConfig;

    fn synthetic(t: f64, v: f64, se: f64) -> EnergyEstimate {
        EnergyEstimate {
            big_t: t,
            g: 1.0,
            value: v,
            stderr: se,
            n_paths: 100,
            ess: 100.0,
            max_log_weight: 0.0,
            degenerate: false,
            replicates: vec![],
        }
    }

    #[test]
    fn exact_model_is_recovered() {
        let pts: Vec<_> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&t| synthetic(t, -1.0 + 2.0 / t, 0.0))
            .collect();
        let c = extrapolate_energy(&pts).unwrap();
        assert!((c.extrapolated + 1.0).abs() < 1e-13);
        assert!((c.slope - 2.0).abs() < 1e-12);
        assert!(c.fit_residual < 1e-14);
    }

    #[test]
    fn extrapolation_rejects_bad_inputs() {
        let two = [synthetic(1.0, 0.0, 0.1), synthetic(2.0, 0.0, 0.1)];
        assert!(matches!(extrapolate_energy(&two), Err(EstimatorError::Domain(_))));
        let same = [synthetic(1.0, 0.0, 0.1), synthetic(1.0, 0.0, 0.1), synthetic(1.0, 0.0, 0.1)];
        assert!(extrapolate_energy(&same).is_err());
    }

    #[test]
    fn weighted_fit_stderr_is_sane() {
        let pts: Vec<_> = [4.0, 8.0, 12.0]
            .iter()
            .map(|&t| synthetic(t, -5.0 + 1.0 / t, 0.01))
            .collect();
        let c = extrapolate_energy(&pts).unwrap();
        assert!(c.extrapolated_stderr >= 0.01 / 3f64.sqrt());
    }

    #[test]
    fn leave_block_out_matches_direct_evaluation() {
        let v: Vec<f64> = (0..20).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        let reps = leave_block_out_lme(&v, 4);
        let rest: Vec<f64> = v[..5].iter().chain(&v[10..]).cloned().collect();
        assert!((reps[1] - log_mean_exp(&rest)).abs() < 1e-13);
    }

    #[test]
    fn zero_coupling_gives_zero_energy() {
        let e = energy_from_actions(3.0, 0.0, &[1.0, 50.0, 7.0, 3.0], 2);
        assert_eq!(e.value, 0.0);
        assert!(e.value.is_sign_positive());
        assert_eq!(e.stderr, 0.0);
        assert_eq!(e.ess, 4.0);
    }

    #[test]
    fn jensen_bound_and_worker_independence() {
        let ev = KernelEvaluator::new(
            ModelParams::new(0.1, 1.0, 0.5, 1.0, 0.5).unwrap(),
            QuadratureConfig::default(),
        )
        .unwrap();
        let grid = PathGrid::new(1.0, 20).unwrap();
        let mc = McOptions::new(400, 9);
        let a = estimate_energy(&ev, grid, &mc).unwrap();
        let b = estimate_energy(&ev, grid, &mc.with_workers(3)).unwrap();
        assert_eq!(a, b);
        let jensen = -0.5 * 0.25 * ev.mean_s_quadrature(1.0).unwrap().value / 2.0;
        assert!(a.value <= jensen + 3.0 * a.stderr, "{} vs {jensen}", a.value);
        assert!(a.value < 0.0);
        assert!(a.ess <= 400.0 && !a.degenerate);
    }
}
