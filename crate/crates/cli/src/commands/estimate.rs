use std::io::Write;

use anyhow::{bail, Result};
use nelson_core::estimator::{
    ensemble_seed, estimate_energy, estimate_energy_at_momentum, extrapolate_energy, renormalized_growth,
    Purpose,
};
use nelson_core::paths::{sample_path, write_paths, PathGrid};
use nelson_core::rng::RandomStream;

use super::{evaluator, Outcome, UNITS};
use crate::config::RunConfig;
use crate::output::{gnuplot, num, opt, RunContext, Table};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct EstimateArgs {
    /// Estimate on every horizon in sweeps.horizons and extrapolate in 1/T.
    #[arg(long)]
    pub extrapolate: bool,
    /// Also report log E[exp((g^2/2)(S - 4T rho(0,0)))] against T.
    #[arg(long)]
    pub growth: bool,
    /// Write the first N paths of the ensemble at model.big_t to paths.bin.
    #[arg(long, value_name = "N")]
    pub dump_paths: Option<usize>,
    /// Advanced: total momentum P = px,py,pz for the phase-weighted estimate.
    #[arg(long, value_name = "PX,PY,PZ", value_delimiter = ',', hide_short_help = true)]
    pub momentum: Option<Vec<f64>>,
}

pub fn run(cfg: &RunConfig, args: &EstimateArgs, ctx: &mut RunContext) -> Result<Outcome> {
    let ev = evaluator(cfg)?;
    let p = cfg.model;
    let horizons = if args.extrapolate {
        cfg.sweeps.horizons.clone()
    } else {
        vec![p.big_t]
    };
    let mut table = Table::new(&[
        "big_t", "dt", "n_steps", "n_paths", "g", "energy", "stderr", "ess", "max_log_weight", "degenerate",
    ])
    .comment(UNITS)
    .comment(format!("eps = {}, lambda = {}, seed = {}", p.eps, p.lambda, cfg.mc.seed))
    .comment("energy: -(1/2T) log mean exp((g^2/2) S); stderr: block jackknife; ess: effective sample size of the weights");
    let mut estimates = Vec::new();
    for &t in &horizons {
        let grid = PathGrid::from_dt(t, cfg.grid.dt)?;
        let e = ctx.task(&format!("energy T={t}"), || estimate_energy(&ev, grid, &cfg.mc))?;
        table.push(vec![
            num(t),
            num(grid.dt()),
            grid.n_steps().to_string(),
            e.n_paths.to_string(),
            num(p.g),
            num(e.value),
            num(e.stderr),
            num(e.ess),
            num(e.max_log_weight),
            e.degenerate.to_string(),
        ]);
        estimates.push(e);
    }
    ctx.write_table("energy.csv", &table)?;

    if args.extrapolate {
        let curve = extrapolate_energy(&estimates)?;
        let e_ren = ev.renorm_energy()?.value;
        let g2 = p.g * p.g;
        let mut t = Table::new(&["g", "e_inf", "stderr", "slope", "fit_residual", "e_ren", "g2_e_ren", "difference"])
            .comment(UNITS)
            .comment("fit energy(T) = e_inf + slope/T; difference = e_inf - g^2 e_ren");
        t.push(vec![
            num(p.g),
            num(curve.extrapolated),
            num(curve.extrapolated_stderr),
            num(curve.slope),
            num(curve.fit_residual),
            num(e_ren),
            num(g2 * e_ren),
            num(curve.extrapolated - g2 * e_ren),
        ]);
        ctx.write_table("extrapolation.csv", &t)?;
        let pts: Vec<_> = estimates.iter().map(|e| (1.0 / e.big_t, e.value)).collect();
        ctx.write("energy_vs_inv_t.dat", &gnuplot("1/T  energy(T)", &pts))?;
    }

    if args.growth {
        let pts = ctx.task("growth", || renormalized_growth(&ev, &cfg.sweeps.horizons, cfg.grid.dt, &cfg.mc))?;
        let mut t = Table::new(&["big_t", "log_moment", "stderr", "log_moment_over_t"])
            .comment(UNITS)
            .comment("log_moment: log E[exp((g^2/2)(S - 4T rho(0,0)))]");
        for g in &pts {
            t.push(vec![num(g.big_t), num(g.log_moment), num(g.stderr), num(g.log_moment / g.big_t)]);
        }
        ctx.write_table("growth.csv", &t)?;
    }

    if let Some(m) = &args.momentum {
        let [px, py, pz] = m[..] else { bail!("--momentum needs three components") };
        let grid = PathGrid::from_dt(p.big_t, cfg.grid.dt)?;
        let est = ctx.task("momentum", || estimate_energy_at_momentum(&ev, grid, [px, py, pz], &cfg.mc))?;
        let mut t = Table::new(&["big_t", "px", "py", "pz", "mean_re", "mean_im", "max_log_weight", "energy"])
            .comment(UNITS)
            .comment("mean_*: mean of exp(i P.(B_T - B_-T)) exp((g^2/2) S - max_log_weight); energy: -(1/2T) log Re(mean), empty if Re <= 0");
        t.push(vec![
            num(est.big_t),
            num(px),
            num(py),
            num(pz),
            num(est.mean_re),
            num(est.mean_im),
            num(est.max_log_weight),
            opt(est.value),
        ]);
        ctx.write_table("momentum.csv", &t)?;
    }

    if let Some(n) = args.dump_paths {
        let grid = PathGrid::from_dt(p.big_t, cfg.grid.dt)?;
        let seed = ensemble_seed(cfg.mc.seed, Purpose::Energy, p.big_t);
        let paths: Vec<_> = (0..n.min(cfg.mc.n_paths) as u64)
            .map(|i| (i, sample_path(grid, RandomStream::new(seed, i))))
            .collect();
        ctx.write_with("paths.bin", |w: &mut dyn Write| {
            write_paths(w, &grid, seed, &paths).map_err(std::io::Error::other)
        })?;
    }
    Ok(Outcome::Success)
}
