use anyhow::Result;
use nelson_core::kernels::c_tau_with;

use super::{evaluator, Outcome, UNITS};
use crate::config::RunConfig;
use crate::output::{gnuplot, num, RunContext, Table};

pub fn run(cfg: &RunConfig, ctx: &mut RunContext) -> Result<Outcome> {
    let ev = evaluator(cfg)?;
    let p = cfg.model;
    let k = &cfg.kernels;

    let mut profile = Table::new(&["t", "w_origin", "w_origin_err", "rho_origin", "rho_origin_err", "mean_w"])
        .comment(UNITS)
        .comment(format!("eps = {}, lambda = {}", p.eps, p.lambda))
        .comment("t: time lag; w_origin: W(0,t); rho_origin: rho(0,t); mean_w: E[W(B_t,t)] for Brownian B; *_err: quadrature error bounds");
    let (mut w_pts, mut r_pts) = (Vec::new(), Vec::new());
    ctx.task("profiles", || -> Result<()> {
        for i in 0..k.n_t {
            let t = k.t_max * i as f64 / (k.n_t - 1) as f64;
            let w = ev.w_kernel(0.0, t)?;
            let r = ev.rho_kernel(0.0, t)?;
            let m = ev.mean_w(t)?;
            profile.push(vec![num(t), num(w.value), num(w.error), num(r.value), num(r.error), num(m.value)]);
            w_pts.push((t, w.value));
            r_pts.push((t, r.value));
        }
        Ok(())
    })?;
    ctx.write_table("profiles.csv", &profile)?;
    ctx.write("w_origin.dat", &gnuplot("t  W(0,t)", &w_pts))?;
    ctx.write("rho_origin.dat", &gnuplot("t  rho(0,t)", &r_pts))?;

    let mut ct = Table::new(&["tau", "c_tau", "c_tau_err", "eps0_limit"])
        .comment(UNITS)
        .comment("c_tau: 8*pi * int_lambda^inf exp(-eps r^2 - tau r) dr; eps0_limit: 8*pi*exp(-tau*lambda)/tau");
    let mut c_pts = Vec::new();
    ctx.task("c_tau", || -> Result<()> {
        for &tau in &k.tau_list {
            let c = ev.c_tau_at(tau)?;
            let lim = c_tau_with(0.0, p.lambda, tau, &cfg.quad)?;
            ct.push(vec![num(tau), num(c.value), num(c.error), num(lim.value)]);
            c_pts.push((tau, c.value));
        }
        Ok(())
    })?;
    ctx.write_table("c_tau.csv", &ct)?;
    ctx.write("c_tau.dat", &gnuplot("tau  c(tau)", &c_pts))?;

    let mut consts = Table::new(&["quantity", "value", "abs_error"])
        .comment(UNITS)
        .comment(format!("eps = {}, lambda = {}, g = {}, T = {}, tau = {}", p.eps, p.lambda, p.g, p.big_t, p.tau))
        .comment("e_ren is coupling-free (multiply by g^2); gamma_lower_bound = exp(-g^2 I); mean_s = E[S] on [-T,T]");
    ctx.task("constants", || -> Result<()> {
        let rho = ev.rho_origin()?;
        let e = ev.renorm_energy()?;
        let ed = ev.renorm_energy_direct()?;
        let i = ev.gamma_bound_exponent()?;
        let c = ev.c_tau()?;
        let ms = ev.mean_s_quadrature(p.big_t)?;
        let rows = [
            ("rho_origin", rho.value, rho.error),
            ("e_ren", e.value, e.error),
            ("e_ren_direct", ed.value, ed.error),
            ("gamma_bound_exponent", i.value, i.error),
            ("gamma_lower_bound", (-p.g * p.g * i.value).exp(), 0.0),
            ("c_tau", c.value, c.error),
            ("mean_s", ms.value, ms.error),
            ("mean_s_over_4t", ms.value / (4.0 * p.big_t), ms.error / (4.0 * p.big_t)),
        ];
        for (name, v, err) in rows {
            consts.push(vec![name.to_string(), num(v), num(err)]);
        }
        Ok(())
    })?;
    ctx.write_table("constants.csv", &consts)?;
    Ok(Outcome::Success)
}
