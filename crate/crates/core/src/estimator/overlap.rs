//! The overlap `γ(T) = 𝔼[e^{(g²/2) S_{[0,T]}}]² / 𝔼[e^{(g²/2) S_{[-T,T]}}]`.

use serde::Serialize;

use super::{ensemble_seed, leave_block_out_lme, sample_actions, table_for, EstimatorError, McOptions, Purpose};
use crate::kernels::KernelEvaluator;
use crate::paths::PathGrid;
use crate::stats::{effective_sample_size, jackknife_stderr, log_mean_exp};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapEstimate {
    pub big_t: f64,
    pub gamma: f64,
    pub stderr: f64,
    /// `exp(-g² I(ε, λ))`.
    pub lower_bound: f64,
    pub ess_numerator: f64,
    pub ess_denominator: f64,
}

/// `γ̂(T)` for the horizon `T` of `grid`. The numerator uses an independent
/// ensemble of paths of length `T` on the same step.
pub fn estimate_gamma(ev: &KernelEvaluator, grid: PathGrid, mc: &McOptions) -> Result<OverlapEstimate, EstimatorError> {
    mc.validate()?;
    let big_t = grid.big_t();
    let half = if grid.n_steps() % 4 == 0 {
        PathGrid::new(0.5 * big_t, grid.n_steps() / 2)?
    } else {
        PathGrid::from_dt(0.5 * big_t, grid.dt())?
    };
    let table = table_for(ev, &grid)?;
    let num = if half.dt() == grid.dt() {
        sample_actions(&table, half, ensemble_seed(mc.seed, Purpose::OverlapNumerator, big_t), mc)?
    } else {
        let t_half = table_for(ev, &half)?;
        sample_actions(&t_half, half, ensemble_seed(mc.seed, Purpose::OverlapNumerator, big_t), mc)?
    };
    let den = sample_actions(&table, grid, ensemble_seed(mc.seed, Purpose::OverlapDenominator, big_t), mc)?;

    let half_g2 = 0.5 * ev.params().g.powi(2);
    let vn: Vec<f64> = num.actions.iter().map(|s| half_g2 * s).collect();
    let vd: Vec<f64> = den.actions.iter().map(|s| half_g2 * s).collect();
    let gamma = (2.0 * log_mean_exp(&vn) - log_mean_exp(&vd)).exp();
    let reps: Vec<f64> = leave_block_out_lme(&vn, mc.n_blocks)
        .into_iter()
        .zip(leave_block_out_lme(&vd, mc.n_blocks))
        .map(|(a, b)| (2.0 * a - b).exp())
        .collect();
    let exponent = ev.gamma_bound_exponent()?.value;
    Ok(OverlapEstimate {
        big_t,
        gamma,
        stderr: jackknife_stderr(&reps),
        lower_bound: (-ev.params().g.powi(2) * exponent).exp(),
        ess_numerator: effective_sample_size(&vn),
        ess_denominator: effective_sample_size(&vd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ModelParams;
    use crate::quadrature::QuadratureConfig;

    fn ev(g: f64) -> KernelEvaluator {
        KernelEvaluator::new(ModelParams::new(0.1, 1.0, g, 1.0, 0.5).unwrap(), QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn zero_coupling_is_exactly_one() {
        let grid = PathGrid::new(1.0, 20).unwrap();
        let o = estimate_gamma(&ev(0.0), grid, &McOptions::new(100, 1)).unwrap();
        assert_eq!(o.gamma, 1.0);
        assert_eq!(o.stderr, 0.0);
        assert_eq!(o.lower_bound, 1.0);
    }

    #[test]
    fn overlap_sits_between_bound_and_one() {
        let grid = PathGrid::new(1.0, 20).unwrap();
        let o = estimate_gamma(&ev(0.3), grid, &McOptions::new(400, 2)).unwrap();
        assert!(o.gamma <= 1.0 + 3.0 * o.stderr);
        assert!(o.gamma >= o.lower_bound - 3.0 * o.stderr);
    }
}
