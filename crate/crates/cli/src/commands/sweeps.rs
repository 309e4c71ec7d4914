use anyhow::Result;
use nelson_core::estimator::{sweep_eps, sweep_g, EpsSweep, GSweep};

use super::{evaluator, sweep_settings, Outcome, UNITS};
use crate::config::RunConfig;
use crate::output::{gnuplot, num, opt, RunContext, Table};

pub fn g_table(sw: &GSweep) -> Table {
    let mut t = Table::new(&["g", "e_inf", "stderr", "fit_residual", "ratio", "g2_e_ren", "difference", "error"])
        .comment(UNITS)
        .comment(format!("e_ren = {} (coupling-free), tau = {}, c(tau)/4 = {}", num(sw.e_ren), num(sw.tau), num(sw.c_quarter)))
        .comment("e_inf: energy extrapolated in 1/T; ratio = e_inf/g^2; difference = e_inf - g^2 e_ren; empty cells are suppressed or failed");
    for r in &sw.rows {
        t.push(vec![
            num(r.g),
            opt(r.e_inf),
            opt(r.stderr),
            opt(r.fit_residual),
            opt(r.ratio),
            opt(r.g2_e_ren),
            opt(r.difference),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn g_estimates_table(sw: &GSweep) -> Table {
    let mut t = Table::new(&["g", "big_t", "energy", "stderr", "ess", "degenerate"])
        .comment(UNITS)
        .comment("finite-horizon estimates entering each extrapolation");
    for r in &sw.rows {
        if let Some(c) = &r.curve {
            for e in &c.estimates {
                t.push(vec![num(r.g), num(e.big_t), num(e.value), num(e.stderr), num(e.ess), e.degenerate.to_string()]);
            }
        }
    }
    t
}

pub fn eps_table(sw: &EpsSweep) -> Table {
    let mut t = Table::new(&["eps", "e_ren", "e_inf", "stderr", "g2_e_ren", "difference", "error"])
        .comment(UNITS)
        .comment(format!("g = {}; difference = e_inf - g^2 e_ren(eps)", num(sw.g)));
    for r in &sw.rows {
        t.push(vec![
            num(r.eps),
            opt(r.e_ren),
            opt(r.e_inf),
            opt(r.stderr),
            opt(r.g2_e_ren),
            opt(r.difference),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    t
}

pub fn run_g(cfg: &RunConfig, ctx: &mut RunContext) -> Result<Outcome> {
    let ev = evaluator(cfg)?;
    let sw = ctx.task("sweep", || sweep_g(&ev, &cfg.sweeps.g_list, &sweep_settings(cfg)))?;
    ctx.write_table("sweep.csv", &g_table(&sw))?;
    ctx.write_table("estimates.csv", &g_estimates_table(&sw))?;
    let pts: Vec<_> = sw.rows.iter().filter_map(|r| r.ratio.map(|x| (r.g, x))).collect();
    ctx.write(
        "ratio_vs_g.dat",
        &gnuplot(&format!("g  e_inf/g^2\nreference e_ren = {}", num(sw.e_ren)), &pts),
    )?;
    Ok(Outcome::Success)
}

pub fn run_eps(cfg: &RunConfig, ctx: &mut RunContext) -> Result<Outcome> {
    let ev = evaluator(cfg)?;
    let sw = ctx.task("sweep", || sweep_eps(&ev, &cfg.sweeps.eps_list, &sweep_settings(cfg)))?;
    ctx.write_table("sweep.csv", &eps_table(&sw))?;
    let diff: Vec<_> = sw.rows.iter().filter_map(|r| r.difference.map(|d| (r.eps, d))).collect();
    let counter: Vec<_> = sw.rows.iter().filter_map(|r| r.g2_e_ren.map(|d| (r.eps, d))).collect();
    ctx.write("difference_vs_eps.dat", &gnuplot("eps  e_inf - g^2 e_ren", &diff))?;
    ctx.write("counterterm_vs_eps.dat", &gnuplot("eps  g^2 e_ren", &counter))?;
    Ok(Outcome::Success)
}
