use anyhow::Result;
use nelson_core::estimator::{estimate_gamma, OverlapEstimate};
use nelson_core::paths::PathGrid;

use super::{evaluator, Outcome, UNITS};
use crate::config::RunConfig;
use crate::output::{gnuplot, num, RunContext, Table};

pub fn overlap_table(rows: &[OverlapEstimate], g: f64) -> Table {
    let mut t = Table::new(&["big_t", "gamma", "stderr", "lower_bound", "ess_numerator", "ess_denominator"])
        .comment(UNITS)
        .comment(format!("g = {}; gamma = E[exp((g^2/2) S_[0,T])]^2 / E[exp((g^2/2) S_[-T,T])]; lower_bound = exp(-g^2 I)", num(g)));
    for o in rows {
        t.push(vec![
            num(o.big_t),
            num(o.gamma),
            num(o.stderr),
            num(o.lower_bound),
            num(o.ess_numerator),
            num(o.ess_denominator),
        ]);
    }
    t
}

pub fn run(cfg: &RunConfig, ctx: &mut RunContext) -> Result<Outcome> {
    let ev = evaluator(cfg)?;
    let mut rows = Vec::new();
    for &t in &cfg.sweeps.gamma_horizons {
        let grid = PathGrid::from_dt(t, cfg.grid.dt)?;
        rows.push(ctx.task(&format!("gamma T={t}"), || estimate_gamma(&ev, grid, &cfg.mc))?);
    }
    ctx.write_table("overlap.csv", &overlap_table(&rows, cfg.model.g))?;
    let pts: Vec<_> = rows.iter().map(|o| (o.big_t, o.gamma)).collect();
    ctx.write("gamma_vs_t.dat", &gnuplot("T  gamma(T)", &pts))?;
    Ok(Outcome::Success)
}
