//! Path-integral laboratory for the ultraviolet renormalization of the
//! Nelson model at zero total momentum.
//!
//! * [`kernels`]: radial quadratures for the pair potential and its relatives.
//! * [`paths`]: Brownian paths on `[-T, T]` and their action functionals.
//! * [`estimator`]: Monte Carlo ground-state energies, sweeps and overlaps.
//! * [`fock`]: truncated Fock-space diagonalization used as an independent check.

pub mod estimator;
pub mod fock;
pub mod kernels;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use kernels::{KernelEvaluator, ModelParams};
pub use quadrature::QuadratureConfig;
