//! Discretized Brownian paths on `[-T, T]` and the functionals built from
//! the pair potential along them.
//!
//! Paths start at the origin at time `-T`. All functionals depend on
//! increments only. Kernels are read from a [`LagTable`] built for the
//! path's step, since every time difference on the grid is a whole lag.

mod dump;

pub use dump::{read_paths, write_paths, DumpError, PathDump};

use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::kernels::{KernelError, LagTable};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("time {0} is not a grid point")]
    OffGrid(f64),
    #[error("kernel table does not match the path grid: {0}")]
    TableMismatch(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Uniform grid `t_i = -T + i·dt`, `i = 0..=n_steps`, with `dt = 2T/n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PathGrid {
    big_t: f64,
    n_steps: usize,
}

impl PathGrid {
    pub fn new(big_t: f64, n_steps: usize) -> Result<Self, PathError> {
        if !(big_t > 0.0 && big_t.is_finite()) {
            return Err(PathError::Grid(format!("horizon must be positive, got {big_t}")));
        }
        if n_steps < 2 || n_steps % 2 != 0 {
            return Err(PathError::Grid(format!("n_steps must be even and >= 2, got {n_steps}")));
        }
        Ok(Self { big_t, n_steps })
    }

    /// Grid with step as close to `dt` as the even-step constraint allows.
    pub fn from_dt(big_t: f64, dt: f64) -> Result<Self, PathError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PathError::Grid(format!("dt must be positive, got {dt}")));
        }
        let half = (big_t / dt).round().max(1.0) as usize;
        Self::new(big_t, 2 * half)
    }

    pub fn big_t(&self) -> f64 {
        self.big_t
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.big_t / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        -self.big_t + i as f64 * self.dt()
    }

    /// Index of grid time `t`, allowing for rounding in `t`.
    pub fn index_of(&self, t: f64) -> Result<usize, PathError> {
        let s = (t + self.big_t) / self.dt();
        let i = s.round();
        if (s - i).abs() > 1e-9 * s.abs().max(1.0) || i < 0.0 || i as usize > self.n_steps {
            return Err(PathError::OffGrid(t));
        }
        Ok(i as usize)
    }

    /// Number of whole steps in a duration that must be a grid multiple.
    pub fn steps_in(&self, duration: f64) -> Result<usize, PathError> {
        let s = duration / self.dt();
        let k = s.round();
        if (s - k).abs() > 1e-9 * s.abs().max(1.0) || k < 0.0 {
            return Err(PathError::OffGrid(duration));
        }
        Ok(k as usize)
    }

    /// Trapezoid weight of node `i` over the whole grid, in units of `dt`.
    #[inline]
    fn end_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_steps {
            0.5
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: PathGrid,
    increments: Vec<[f64; 3]>,
    positions: Vec<[f64; 3]>,
}

impl BrownianPath {
    pub fn from_increments(grid: PathGrid, increments: Vec<[f64; 3]>) -> Result<Self, PathError> {
        if increments.len() != grid.n_steps() {
            return Err(PathError::Grid(format!(
                "expected {} increments, got {}",
                grid.n_steps(),
                increments.len()
            )));
        }
        let mut positions = Vec::with_capacity(increments.len() + 1);
        let mut b = [0.0; 3];
        positions.push(b);
        for d in &increments {
            for c in 0..3 {
                b[c] += d[c];
            }
            positions.push(b);
        }
        Ok(Self {
            grid,
            increments,
            positions,
        })
    }

    /// The constant path.
    pub fn frozen(grid: PathGrid) -> Self {
        Self::from_increments(grid, vec![[0.0; 3]; grid.n_steps()]).expect("length matches")
    }

    /// Time reversal: increments negated and taken in reverse order.
    pub fn reversed(&self) -> Self {
        let inc = self
            .increments
            .iter()
            .rev()
            .map(|d| [-d[0], -d[1], -d[2]])
            .collect();
        Self::from_increments(self.grid, inc).expect("length matches")
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn increments(&self) -> &[[f64; 3]] {
        &self.increments
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    #[inline]
    fn separation(&self, i: usize, j: usize) -> ([f64; 3], f64) {
        let a = &self.positions[i];
        let b = &self.positions[j];
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        (d, (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt())
    }
}

/// Draws a path with i.i.d. `Normal(0, dt)` increment components.
pub fn sample_path(grid: PathGrid, stream: RandomStream) -> BrownianPath {
    let mut rng = stream.rng();
    let sd = grid.dt().sqrt();
    let increments = (0..grid.n_steps())
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            [sd * x, sd * y, sd * z]
        })
        .collect();
    BrownianPath::from_increments(grid, increments).expect("length matches")
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PathFunctionals {
    pub s_full: f64,
    pub s_od: f64,
    pub y_ito: f64,
    pub z_boundary: f64,
    pub s_ren: f64,
}

fn check_table(path: &BrownianPath, table: &LagTable) -> Result<(), PathError> {
    let g = path.grid();
    if (table.dt() - g.dt()).abs() > 1e-12 * g.dt() {
        return Err(PathError::TableMismatch(format!(
            "table step {} vs grid step {}",
            table.dt(),
            g.dt()
        )));
    }
    if table.n_lags() < g.n_steps() {
        return Err(PathError::TableMismatch(format!(
            "table has {} lags, grid needs {}",
            table.n_lags(),
            g.n_steps()
        )));
    }
    Ok(())
}

#[inline]
fn w_at(table: &LagTable, lag: usize, r: f64) -> Result<f64, PathError> {
    match table.w_tabulated(lag, r) {
        Some(v) => Ok(v),
        None => Ok(table.w(lag, r)?),
    }
}

#[inline]
fn rho_at(table: &LagTable, lag: usize, r: f64) -> Result<f64, PathError> {
    match table.rho_tabulated(lag, r) {
        Some(v) => Ok(v),
        None => Ok(table.rho(lag, r)?),
    }
}

#[inline]
fn drho_at(table: &LagTable, lag: usize, r: f64) -> Result<f64, PathError> {
    match table.drho_tabulated(lag, r) {
        Some(v) => Ok(v),
        None => Ok(table.drho(lag, r)?),
    }
}

/// Two-dimensional trapezoid sum of `W(B_t - B_s, t - s)` over the grid.
pub fn s_full(path: &BrownianPath, table: &LagTable) -> Result<f64, PathError> {
    check_table(path, table)?;
    let g = path.grid();
    let n = g.n_steps();
    let dt = g.dt();
    // diagonal: every node pairs with itself at zero separation
    let diag: f64 = (0..=n).map(|i| g.end_weight(i).powi(2)).sum();
    let mut total = diag * w_at(table, 0, 0.0)?;
    let mut off = 0.0;
    for lag in 1..=n {
        let mut row = 0.0;
        for i in 0..=(n - lag) {
            let j = i + lag;
            let (_, r) = path.separation(i, j);
            row += g.end_weight(i) * g.end_weight(j) * w_at(table, lag, r)?;
        }
        off += row;
    }
    total += 2.0 * off;
    Ok(dt * dt * total)
}

/// Splits the double integral at `t = [s + τ]` into the off-diagonal part,
/// the forward-point Itô sum and the boundary term.
pub fn s_decomposed(path: &BrownianPath, table: &LagTable, tau: f64) -> Result<PathFunctionals, PathError> {
    check_table(path, table)?;
    let g = path.grid();
    if !(tau > 0.0 && tau < g.big_t()) {
        return Err(PathError::Grid(format!("tau must lie in (0, T), got {tau}")));
    }
    let k_tau = g.steps_in(tau)?;
    let n = g.n_steps();
    let dt = g.dt();
    let (mut full, mut od, mut ito, mut z) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..=n {
        let m = (i + k_tau).min(n);
        let c = g.end_weight(i);
        let mut near = 0.0;
        let mut far = 0.0;
        if m > i {
            near += 0.5 * w_at(table, 0, 0.0)?;
            for j in (i + 1)..m {
                let (_, r) = path.separation(i, j);
                near += w_at(table, j - i, r)?;
            }
            let (_, r) = path.separation(i, m);
            near += 0.5 * w_at(table, m - i, r)?;
        }
        if n > m {
            let (_, r) = path.separation(i, m);
            far += 0.5 * w_at(table, m - i, r)?;
            for j in (m + 1)..n {
                let (_, r) = path.separation(i, j);
                far += w_at(table, j - i, r)?;
            }
            let (_, r) = path.separation(i, n);
            far += 0.5 * w_at(table, n - i, r)?;
        }
        // j = i contributes nothing: the gradient vanishes at the origin
        let mut stoch = 0.0;
        for j in (i + 1)..m {
            let (d, r) = path.separation(i, j);
            if r > 0.0 {
                let inc = &path.increments[j];
                let proj = (d[0] * inc[0] + d[1] * inc[1] + d[2] * inc[2]) / r;
                stoch += drho_at(table, j - i, r)? * proj;
            }
        }
        let (_, r) = path.separation(i, m);
        let boundary = rho_at(table, m - i, r)?;
        full += c * (near + far);
        od += c * far;
        ito += c * stoch;
        z += c * boundary;
    }
    let s_od = 2.0 * dt * dt * od;
    let y_ito = 2.0 * dt * ito;
    let z_boundary = -2.0 * dt * z;
    Ok(PathFunctionals {
        s_full: 2.0 * dt * dt * full,
        s_od,
        y_ito,
        z_boundary,
        s_ren: s_od + y_ito + z_boundary,
    })
}

/// Both sides of the single-slice Itô identity between grid times `s ≤ S`:
/// `∫_s^S W dt` and `ϱ(0,0) − ϱ(B_S − B_s, S − s) + ∫_s^S ∇ϱ · dB`.
pub fn ito_identity_check(
    path: &BrownianPath,
    table: &LagTable,
    s: f64,
    big_s: f64,
) -> Result<(f64, f64), PathError> {
    check_table(path, table)?;
    let g = path.grid();
    let i = g.index_of(s)?;
    let k = g.index_of(big_s)?;
    if k < i {
        return Err(PathError::Grid(format!("need s <= S, got {s} > {big_s}")));
    }
    if k == i {
        return Ok((0.0, 0.0));
    }
    let dt = g.dt();
    let mut lhs = 0.5 * w_at(table, 0, 0.0)?;
    for j in (i + 1)..k {
        let (_, r) = path.separation(i, j);
        lhs += w_at(table, j - i, r)?;
    }
    let (_, r) = path.separation(i, k);
    lhs += 0.5 * w_at(table, k - i, r)?;
    let mut stoch = 0.0;
    for j in (i + 1)..k {
        let (d, r) = path.separation(i, j);
        if r > 0.0 {
            let inc = &path.increments[j];
            stoch += drho_at(table, j - i, r)? * (d[0] * inc[0] + d[1] * inc[1] + d[2] * inc[2]) / r;
        }
    }
    let rhs = table.rho_origin() - rho_at(table, k - i, r)? + stoch;
    Ok((dt * lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelEvaluator, ModelParams};
    use crate::quadrature::QuadratureConfig;

    fn table(big_t: f64, n: usize) -> (PathGrid, LagTable) {
        let grid = PathGrid::new(big_t, n).unwrap();
        let ev = KernelEvaluator::new(
            ModelParams::new(0.1, 1.0, 0.3, big_t, big_t / 2.0).unwrap(),
            QuadratureConfig::default(),
        )
        .unwrap();
        let t = ev.tabulate(grid.dt(), n).unwrap();
        (grid, t)
    }

    #[test]
    fn grid_rules() {
        assert!(PathGrid::new(1.0, 3).is_err());
        assert!(PathGrid::new(1.0, 0).is_err());
        assert!(PathGrid::new(-1.0, 2).is_err());
        let g = PathGrid::new(2.0, 2).unwrap();
        assert_eq!(g.dt(), 2.0);
        assert_eq!(sample_path(g, RandomStream::new(1, 0)).increments().len(), 2);
        let g = PathGrid::from_dt(4.0, 0.05).unwrap();
        assert_eq!(g.n_steps(), 160);
        assert_eq!(g.index_of(0.0).unwrap(), 80);
        assert!(g.index_of(0.01).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = PathGrid::new(1.0, 20).unwrap();
        let a = sample_path(g, RandomStream::new(3, 9));
        let b = sample_path(g, RandomStream::new(3, 9));
        let c = sample_path(g, RandomStream::new(3, 10));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn slices_reassemble_the_double_sum() {
        let (g, t) = table(1.0, 20);
        for idx in 0..5 {
            let p = sample_path(g, RandomStream::new(11, idx));
            let s = s_full(&p, &t).unwrap();
            let f = s_decomposed(&p, &t, 0.5).unwrap();
            assert!((s - f.s_full).abs() < 1e-12 * s, "{s} vs {}", f.s_full);
            assert_eq!(f.s_ren, f.s_od + f.y_ito + f.z_boundary);
        }
    }

    #[test]
    fn frozen_path_has_no_ito_term_and_od_shrinks_with_tau() {
        let (g, t) = table(1.0, 20);
        let p = BrownianPath::frozen(g);
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let f = s_decomposed(&p, &t, k as f64 * g.dt()).unwrap();
            assert_eq!(f.y_ito, 0.0);
            assert!(f.s_od < prev);
            prev = f.s_od;
        }
        assert!(s_full(&p, &t).unwrap() > 0.0);
    }

    #[test]
    fn reversal_leaves_s_unchanged() {
        let (g, t) = table(1.0, 20);
        let p = sample_path(g, RandomStream::new(5, 1));
        let a = s_full(&p, &t).unwrap();
        let b = s_full(&p.reversed(), &t).unwrap();
        assert!((a - b).abs() <= 1e-13 * a);
    }

    #[test]
    fn identity_check_edge_cases() {
        let (g, t) = table(1.0, 20);
        let p = sample_path(g, RandomStream::new(5, 2));
        assert_eq!(ito_identity_check(&p, &t, 0.0, 0.0).unwrap(), (0.0, 0.0));
        assert!(ito_identity_check(&p, &t, 0.01, 0.5).is_err());
        assert!(s_decomposed(&p, &t, 0.33).is_err());
        let (_, t2) = table(1.0, 10);
        assert!(matches!(s_full(&p, &t2), Err(PathError::TableMismatch(_))));
    }
}
