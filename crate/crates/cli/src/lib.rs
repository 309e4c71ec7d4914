//! Command-line driver: configuration, output bookkeeping and one module
//! per subcommand.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::estimate::EstimateArgs;

#[derive(Debug, Parser)]
#[command(name = "nelson-lab", version, about = "Path-integral laboratory for the renormalized Nelson model")]
pub struct Cli {
    /// TOML run configuration; built-in defaults are used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set model.eps=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Base seed (required unless the config sets `mc.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Paths per ensemble (default 10000).
    #[arg(long, global = true)]
    pub n_paths: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output root; each subcommand writes into `<out>/<subcommand>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel profiles, c(tau) and the scalar constants.
    Kernels,
    /// Monte Carlo ground-state energy.
    Estimate(EstimateArgs),
    /// Extrapolated energies over `sweeps.g_list`.
    SweepG,
    /// Extrapolated energies over `sweeps.eps_list`.
    SweepEps,
    /// Vacuum overlap estimates over `sweeps.gamma_horizons`.
    Gamma,
    /// Truncated Fock-space diagonalization.
    Fock {
        /// Also write the Hamiltonian at the first coupling in COO format.
        #[arg(long)]
        export_matrix: bool,
    },
    /// Run every cross-check and write `checks.csv`.
    Verify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernels => "kernels",
            Command::Estimate(_) => "estimate",
            Command::SweepG => "sweep-g",
            Command::SweepEps => "sweep-eps",
            Command::Gamma => "gamma",
            Command::Fock { .. } => "fock",
            Command::Verify => "verify",
        }
    }
}

impl Cli {
    /// Config overrides implied by the shorthand flags, applied after `--set`.
    pub fn all_overrides(&self) -> Vec<String> {
        let mut v = self.overrides.clone();
        if let Some(n) = self.n_paths {
            v.push(format!("mc.n_paths={n}"));
        }
        if let Some(w) = self.workers {
            v.push(format!("mc.n_workers={w}"));
        }
        if let Some(out) = &self.out {
            v.push(format!("output.dir={}", toml::Value::String(out.display().to_string())));
        }
        v
    }
}
