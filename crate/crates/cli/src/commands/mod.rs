//! One module per subcommand. Each takes the run configuration and a
//! [`RunContext`] to write into.

pub mod estimate;
pub mod fock;
pub mod gamma;
pub mod kernels;
pub mod sweeps;
pub mod verify;

use nelson_core::estimator::SweepSettings;
use nelson_core::KernelEvaluator;

use crate::config::RunConfig;

pub const UNITS: &str = "units: hbar = m = 1; energies and momenta in the model's natural units, times in inverse energy";

pub fn evaluator(cfg: &RunConfig) -> anyhow::Result<KernelEvaluator> {
    Ok(KernelEvaluator::new(cfg.model, cfg.quad)?)
}

pub fn sweep_settings(cfg: &RunConfig) -> SweepSettings {
    SweepSettings {
        horizons: cfg.sweeps.horizons.clone(),
        dt: cfg.grid.dt,
        mc: cfg.mc,
    }
}

/// What a finished subcommand reports back to `main`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// `verify` ran to completion but at least one tolerance failed.
    ChecksFailed,
}
