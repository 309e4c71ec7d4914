//! The cross-check suite. Every check appends rows to `checks.csv`; a
//! check that errors counts as failed and the run continues.

use std::time::Instant;

use anyhow::Result;
use nelson_core::estimator::{dyson_check, estimate_gamma, ito_refinement, sweep_eps, sweep_g};
use nelson_core::kernels::c_tau_with;
use nelson_core::paths::PathGrid;
use nelson_core::{KernelEvaluator, ModelParams};

use super::{evaluator, fock, gamma, sweep_settings, sweeps, Outcome, UNITS};
use crate::config::RunConfig;
use crate::output::{num, ErrorRecord, RunContext, Table};

pub const CHECKS: [&str; 8] = ["dual_route", "ito", "dyson", "g_sweep", "eps_sweep", "fock", "gamma", "c_tau"];

struct Report {
    table: Table,
    failed: usize,
    errors: Vec<String>,
}

impl Report {
    fn row(&mut self, check: &str, item: impl Into<String>, value: f64, reference: f64, tolerance: &str, pass: bool) {
        if !pass {
            self.failed += 1;
        }
        self.table.push(vec![
            check.to_string(),
            item.into(),
            num(value),
            num(reference),
            tolerance.to_string(),
            pass.to_string(),
        ]);
    }
}

fn range(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

fn dual_route(cfg: &RunConfig, rep: &mut Report) -> Result<()> {
    for &eps in &cfg.verify.dual_eps {
        for &lambda in &cfg.verify.dual_lambda {
            let ev = KernelEvaluator::new(ModelParams { eps, lambda, ..cfg.model }, cfg.quad)?;
            let a = ev.renorm_energy_direct()?.value;
            let b = ev.renorm_energy()?.value;
            let rel = ((a - b) / b).abs();
            rep.row("dual_route", format!("eps={eps} lambda={lambda} rel_dev"), rel, b, "<= 1e-10", rel <= 1e-10);
        }
    }
    Ok(())
}

fn ito(cfg: &RunConfig, ctx: &mut RunContext, rep: &mut Report) -> Result<()> {
    let ev = evaluator(cfg)?;
    let v = &cfg.verify;
    let mc = cfg.mc.with_paths(v.ito_paths);
    let levels = ito_refinement(&ev, cfg.model.big_t, cfg.model.tau, &v.ito_dts, &mc)?;
    let mut t = Table::new(&[
        "dt", "n_paths", "rms_defect", "mean_y", "stderr_y", "max_abs_z", "frozen_z_bound", "quadrature_z_bound",
        "quadrature_bound_exceeded",
    ])
    .comment(UNITS)
    .comment(format!("T = {}, tau = {}; defect = S - (S_ren + 4T rho(0,0))", cfg.model.big_t, cfg.model.tau));
    for l in &levels {
        t.push(vec![
            num(l.dt),
            l.n_paths.to_string(),
            num(l.rms_defect),
            num(l.mean_y),
            num(l.stderr_y),
            num(l.max_abs_z),
            num(l.frozen_z_bound),
            num(l.quadrature_z_bound),
            l.quadrature_bound_exceeded.to_string(),
        ]);
        rep.row("ito", format!("dt={} |mean Y|/stderr", num(l.dt)), (l.mean_y / l.stderr_y).abs(), 0.0, "<= 3", l.mean_y.abs() <= 3.0 * l.stderr_y);
        rep.row("ito", format!("dt={} max|Z|", num(l.dt)), l.max_abs_z, l.frozen_z_bound, "<= |Z(constant path)|", l.max_abs_z <= l.frozen_z_bound * (1.0 + 1e-12));
    }
    for w in levels.windows(2) {
        let ratio = w[0].rms_defect / w[1].rms_defect;
        rep.row(
            "ito",
            format!("rms ratio dt={} -> {}", num(w[0].dt), num(w[1].dt)),
            ratio,
            v.ito_min_ratio,
            &format!(">= {}", v.ito_min_ratio),
            ratio >= v.ito_min_ratio,
        );
    }
    ctx.write_table("ito.csv", &t)?;
    Ok(())
}

fn dyson(cfg: &RunConfig, rep: &mut Report) -> Result<()> {
    let ev = evaluator(cfg)?;
    let grid = PathGrid::from_dt(cfg.model.big_t, cfg.verify.dyson_dt)?;
    let d = dyson_check(&ev, grid, &cfg.mc.with_paths(cfg.verify.dyson_paths))?;
    rep.row("dyson", "mean S", d.mc_mean, d.quadrature, &format!("within 3 stderr ({})", num(d.stderr)), d.sigmas().abs() <= 3.0);
    Ok(())
}

fn g_sweep(cfg: &RunConfig, ctx: &mut RunContext, rep: &mut Report) -> Result<()> {
    let ev = evaluator(cfg)?;
    let mut gs = cfg.sweeps.g_list.clone();
    gs.retain(|g| *g != 0.0);
    gs.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let sw = sweep_g(&ev, &gs, &sweep_settings(cfg))?;
    ctx.write_table("g_sweep.csv", &sweeps::g_table(&sw))?;
    let devs: Vec<Option<f64>> = sw.rows.iter().map(|r| r.ratio.map(|x| (x - sw.e_ren).abs())).collect();
    for (w, r) in devs.windows(2).zip(sw.rows.iter().skip(1)) {
        let pass = matches!(w, [Some(a), Some(b)] if b <= a);
        rep.row("g_sweep", format!("g={} |ratio - e_ren| non-increasing", num(r.g)), w[1].unwrap_or(f64::NAN), w[0].unwrap_or(f64::NAN), "<= previous", pass);
    }
    if let Some(last) = sw.rows.last() {
        let g2 = last.g * last.g;
        let allowed = (3.0 * last.stderr.unwrap_or(f64::NAN) / g2).max(sw.c_quarter + last.fit_residual.unwrap_or(f64::NAN));
        let dev = devs.last().copied().flatten().unwrap_or(f64::NAN);
        rep.row("g_sweep", format!("g={} |ratio - e_ren|", num(last.g)), dev, allowed, "<= max(3 stderr/g^2, c(tau)/4 + fit residual)", dev <= allowed);
    }
    Ok(())
}

fn eps_sweep(cfg: &RunConfig, ctx: &mut RunContext, rep: &mut Report) -> Result<()> {
    let ev = evaluator(cfg)?;
    let mut eps = cfg.sweeps.eps_list.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let sw = sweep_eps(&ev, &eps, &sweep_settings(cfg))?;
    ctx.write_table("eps_sweep.csv", &sweeps::eps_table(&sw))?;
    let ok = sw.rows.iter().all(|r| r.error.is_none());
    let diff = range(sw.rows.iter().filter_map(|r| r.difference));
    let counter = range(sw.rows.iter().filter_map(|r| r.g2_e_ren.map(f64::abs)));
    rep.row("eps_sweep", "range of e_inf - g^2 e_ren", diff, 0.5 * counter, "<= half the range of |g^2 e_ren|", ok && diff <= 0.5 * counter);
    let e: Vec<f64> = sw.rows.iter().filter_map(|r| r.e_ren.map(f64::abs)).collect();
    let increasing = ok && e.windows(2).all(|w| w[1] > w[0]);
    rep.row("eps_sweep", "|e_ren| strictly increasing as eps decreases", e.last().copied().unwrap_or(f64::NAN), e.first().copied().unwrap_or(f64::NAN), "strict", increasing);
    Ok(())
}

fn fock_check(cfg: &RunConfig, ctx: &mut RunContext, rep: &mut Report) -> Result<()> {
    let r = fock::compute(cfg, ctx, false)?;
    let (coeff, gs) = fock::tables(&r, cfg);
    ctx.write_table("fock_coefficients.csv", &coeff)?;
    ctx.write_table("fock_ground_states.csv", &gs)?;
    let c = &r.check;
    let rel = ((c.a2_grid - r.e_ren) / r.e_ren).abs();
    rep.row("fock", "grid a2 vs e_ren rel_dev", rel, r.e_ren, "<= 0.02", rel <= 0.02);
    rep.row("fock", "fitted a2 vs grid a2 rel_dev", c.relative_deviation(), c.a2_grid, "<= 0.01", c.relative_deviation() <= 0.01);
    let min_overlap = c.states.iter().map(|s| s.vacuum_overlap).fold(f64::INFINITY, f64::min);
    rep.row("fock", "min vacuum overlap", min_overlap, 0.0, "> 0", min_overlap > 0.0);
    Ok(())
}

fn gamma_check(cfg: &RunConfig, ctx: &mut RunContext, rep: &mut Report) -> Result<()> {
    let g = cfg.verify.gamma_g;
    let ev = KernelEvaluator::new(cfg.model.with_g(g), cfg.quad)?;
    let mut rows = Vec::new();
    for &t in &cfg.sweeps.gamma_horizons {
        let o = estimate_gamma(&ev, PathGrid::from_dt(t, cfg.grid.dt)?, &cfg.mc)?;
        rep.row("gamma", format!("T={} gamma >= bound - 3 stderr", num(t)), o.gamma, o.lower_bound, "", o.gamma >= o.lower_bound - 3.0 * o.stderr);
        rep.row("gamma", format!("T={} gamma <= 1 + 3 stderr", num(t)), o.gamma, 1.0, "", o.gamma <= 1.0 + 3.0 * o.stderr);
        rows.push(o);
    }
    ctx.write_table("gamma.csv", &gamma::overlap_table(&rows, g))?;
    Ok(())
}

fn c_tau(cfg: &RunConfig, rep: &mut Report) -> Result<()> {
    let ev = evaluator(cfg)?;
    let lambda = cfg.model.lambda;
    let taus: Vec<f64> = (1..=16).map(|i| 0.5 * i as f64).collect();
    let cs = taus.iter().map(|&t| ev.c_tau_at(t).map(|q| q.value)).collect::<Result<Vec<_>, _>>()?;
    let decreasing = cs.windows(2).all(|w| w[1] < w[0]);
    rep.row("c_tau", "strictly decreasing on tau = 0.5..8", cs[cs.len() - 1], cs[0], "strict", decreasing);
    let ratio = ev.c_tau_at(8.0)?.value / ev.c_tau_at(1.0)?.value;
    rep.row("c_tau", "c(8)/c(1)", ratio, 1e-2, "< 1e-2", ratio < 1e-2);
    for tau in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let lim = c_tau_with(0.0, lambda, tau, &cfg.quad)?.value;
        let exact = 8.0 * std::f64::consts::PI * (-tau * lambda).exp() / tau;
        let rel = ((lim - exact) / exact).abs();
        rep.row("c_tau", format!("tau={} eps->0 limit rel_dev", num(tau)), rel, exact, "<= 1e-8", rel <= 1e-8);
    }
    Ok(())
}

pub fn run(cfg: &RunConfig, ctx: &mut RunContext) -> Result<(Outcome, Option<ErrorRecord>)> {
    for s in &cfg.verify.skip {
        if !CHECKS.contains(&s.as_str()) {
            anyhow::bail!("unknown check `{s}` in verify.skip; known: {}", CHECKS.join(", "));
        }
    }
    let mut rep = Report {
        table: Table::new(&["check", "item", "value", "reference", "tolerance", "pass"])
            .comment(UNITS)
            .comment(format!("seed = {}, n_paths = {}, dt = {}", cfg.mc.seed, cfg.mc.n_paths, cfg.grid.dt)),
        failed: 0,
        errors: Vec::new(),
    };
    for name in CHECKS {
        if cfg.verify.skip.iter().any(|s| s == name) {
            continue;
        }
        let t = Instant::now();
        let res = match name {
            "dual_route" => dual_route(cfg, &mut rep),
            "ito" => ito(cfg, ctx, &mut rep),
            "dyson" => dyson(cfg, &mut rep),
            "g_sweep" => g_sweep(cfg, ctx, &mut rep),
            "eps_sweep" => eps_sweep(cfg, ctx, &mut rep),
            "fock" => fock_check(cfg, ctx, &mut rep),
            "gamma" => gamma_check(cfg, ctx, &mut rep),
            _ => c_tau(cfg, &mut rep),
        };
        ctx.record(name, t.elapsed().as_secs_f64());
        if let Err(e) = res {
            rep.row(name, format!("error: {e}"), f64::NAN, f64::NAN, "", false);
            rep.errors.push(format!("{name}: {e}"));
        }
    }
    ctx.write_table("checks.csv", &rep.table)?;
    let error = (!rep.errors.is_empty()).then(|| ErrorRecord {
        kind: "check_error".into(),
        message: rep.errors.join("; "),
    });
    let outcome = if rep.failed == 0 { Outcome::Success } else { Outcome::ChecksFailed };
    Ok((outcome, error))
}
