use std::io::Write;

use anyhow::Result;
use nelson_core::fock::{build_hamiltonian, perturbation_check, MomentumGrid, PerturbationCheck, TruncatedFockSpace};

use super::{evaluator, Outcome, UNITS};
use crate::config::RunConfig;
use crate::output::{num, RunContext, Table};

pub struct FockRun {
    pub check: PerturbationCheck,
    pub e_ren: f64,
    pub n_modes: usize,
    pub dimension: usize,
    pub nnz: usize,
}

pub fn compute(cfg: &RunConfig, ctx: &mut RunContext, export: bool) -> Result<FockRun> {
    let ev = evaluator(cfg)?;
    let f = &cfg.fock;
    let grid = MomentumGrid::spherical(cfg.model.lambda, cfg.model.eps, &f.resolution)?;
    let space = TruncatedFockSpace::new(grid.len(), f.n_max)?;
    let h = ctx.task("assemble", || build_hamiltonian(&grid, &space, &cfg.model, cfg.mc.n_workers))?;
    let check = ctx.task("eigensolve", || perturbation_check(&h, &grid, &cfg.model, &f.g_list, &f.lanczos))?;
    if export {
        let g0 = f.g_list[0];
        let hg = h.with_coupling(g0);
        ctx.write_with("hamiltonian.coo", |w: &mut dyn Write| hg.write_coo(w))?;
    }
    Ok(FockRun {
        check,
        e_ren: ev.renorm_energy()?.value,
        n_modes: grid.len(),
        dimension: h.dimension(),
        nnz: h.nnz(),
    })
}

pub fn tables(run: &FockRun, cfg: &RunConfig) -> (Table, Table) {
    let c = &run.check;
    let mut coeff = Table::new(&[
        "n_modes", "n_max", "dimension", "nnz", "a2_grid", "e_ren", "a2_grid_rel_dev", "a2_fit", "a2_fit_rel_dev", "a4_fit",
        "residual_quadratic", "residual_quartic",
    ])
    .comment(UNITS)
    .comment(format!("eps = {}, lambda = {}", cfg.model.eps, cfg.model.lambda))
    .comment("a2_grid: -sum_j c_j^2/(|k_j| + |k_j|^2/2); a2_fit, a4_fit: fit of E(g)/g^2 = a2 + a4 g^2; rel_dev relative to e_ren and a2_grid");
    coeff.push(vec![
        run.n_modes.to_string(),
        cfg.fock.n_max.to_string(),
        run.dimension.to_string(),
        run.nnz.to_string(),
        num(c.a2_grid),
        num(run.e_ren),
        num(((c.a2_grid - run.e_ren) / run.e_ren).abs()),
        num(c.a2_fit),
        num(c.relative_deviation()),
        num(c.a4_fit),
        num(c.residual_quadratic),
        num(c.residual_quartic),
    ]);
    let mut gs = Table::new(&["g", "energy", "energy_over_g2", "residual", "vacuum_overlap", "cycles", "matvecs"])
        .comment(UNITS)
        .comment("energy: lowest eigenvalue of the truncated Hamiltonian; residual: ||Hv - Ev|| for unit v");
    for s in &c.states {
        gs.push(vec![
            num(s.g),
            num(s.energy),
            num(s.energy / (s.g * s.g)),
            num(s.residual),
            num(s.vacuum_overlap),
            s.cycles.to_string(),
            s.matvecs.to_string(),
        ]);
    }
    (coeff, gs)
}

pub fn run(cfg: &RunConfig, export: bool, ctx: &mut RunContext) -> Result<Outcome> {
    let r = compute(cfg, ctx, export || cfg.fock.export_matrix)?;
    let (coeff, gs) = tables(&r, cfg);
    ctx.write_table("coefficients.csv", &coeff)?;
    ctx.write_table("ground_states.csv", &gs)?;
    Ok(Outcome::Success)
}
