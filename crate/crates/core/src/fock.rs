//! Truncated Fock-space diagonalization of the zero-momentum fiber
//! Hamiltonian on a discretized momentum shell.
//!
//! With modes `k_j` of quadrature weight `w_j`, the matrix in the
//! occupation basis is
//!
//! ```text
//! H = ½|Σ_j k_j n_j|² + Σ_j |k_j| n_j + g Σ_j c_j (a_j + a_j†),
//! c_j = e^{-ε|k_j|²/2} √w_j / √(2|k_j|).
//! ```
//!
//! The field at the origin carries no phase, so the matrix is real
//! symmetric in the plane-wave occupation basis itself.

mod basis;
mod lanczos;

pub use basis::{TruncatedFockSpace, MAX_DIMENSION};
pub use lanczos::{lowest_eigenpair, Eigenpair, LanczosOptions};

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::ModelParams;
use crate::quadrature::gauss_legendre_on;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FockError {
    #[error("invalid Fock configuration: {0}")]
    Config(String),
    #[error("eigensolver did not converge after {cycles} cycles (value {value}, residual {residual:e})")]
    NotConverged { value: f64, residual: f64, cycles: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub k: [f64; 3],
    pub weight: f64,
}

impl Mode {
    pub fn norm(&self) -> f64 {
        (self.k[0] * self.k[0] + self.k[1] * self.k[1] + self.k[2] * self.k[2]).sqrt()
    }
}

/// Resolution of the spherical product grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridResolution {
    pub n_radial: usize,
    /// Total number of directions; must be even.
    pub n_directions: usize,
    /// Outer radius; by default `e^{-ε k_max²} = 10⁻⁸`.
    #[serde(default)]
    pub k_max: Option<f64>,
}

impl Default for GridResolution {
    /// The 2000-mode reference grid.
    fn default() -> Self {
        Self {
            n_radial: 20,
            n_directions: 100,
            k_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    modes: Vec<Mode>,
    lambda: f64,
    k_max: f64,
}

/// Default outer radius for the cutoff `ε`.
pub fn default_k_max(eps: f64) -> f64 {
    (1e8f64.ln() / eps).sqrt()
}

impl MomentumGrid {
    /// Gauss–Legendre radii (weight `r²`) on `[λ, k_max]` times equal-area
    /// directions on the upper hemisphere and their antipodes.
    pub fn spherical(lambda: f64, eps: f64, res: &GridResolution) -> Result<Self, FockError> {
        if res.n_radial == 0 || res.n_directions < 2 || res.n_directions % 2 != 0 {
            return Err(FockError::Config(format!(
                "need n_radial >= 1 and an even n_directions >= 2, got {} and {}",
                res.n_radial, res.n_directions
            )));
        }
        if !(lambda > 0.0 && eps > 0.0) {
            return Err(FockError::Config("lambda and eps must be positive".into()));
        }
        let k_max = res.k_max.unwrap_or_else(|| default_k_max(eps));
        if !(k_max > lambda) {
            return Err(FockError::Config(format!("k_max {k_max} must exceed lambda {lambda}")));
        }
        let half = res.n_directions / 2;
        let golden = PI * (3.0 - 5f64.sqrt());
        let dirs: Vec<[f64; 3]> = (0..half)
            .map(|i| {
                let z = (i as f64 + 0.5) / half as f64;
                let s = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                [s * phi.cos(), s * phi.sin(), z]
            })
            .collect();
        let omega = 4.0 * PI / res.n_directions as f64;
        let mut modes = Vec::with_capacity(res.n_radial * res.n_directions);
        for (r, wr) in gauss_legendre_on(res.n_radial, lambda, k_max) {
            let weight = wr * r * r * omega;
            for sign in [1.0, -1.0] {
                for d in &dirs {
                    modes.push(Mode {
                        k: [sign * r * d[0], sign * r * d[1], sign * r * d[2]],
                        weight,
                    });
                }
            }
        }
        Ok(Self { modes, lambda, k_max })
    }

    /// Arbitrary modes, all required to lie in the shell `|k| ≥ λ`.
    pub fn from_modes(modes: Vec<Mode>, lambda: f64) -> Result<Self, FockError> {
        if modes.is_empty() {
            return Err(FockError::Config("no modes".into()));
        }
        if modes.iter().any(|m| m.norm() < lambda || !(m.weight > 0.0)) {
            return Err(FockError::Config("modes must satisfy |k| >= lambda with positive weight".into()));
        }
        let k_max = modes.iter().map(Mode::norm).fold(0.0, f64::max);
        Ok(Self { modes, lambda, k_max })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn total_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.weight).sum()
    }

    /// Coupling amplitudes `c_j`.
    pub fn amplitudes(&self, eps: f64) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| {
                let r = m.norm();
                (-0.5 * eps * r * r).exp() * m.weight.sqrt() / (2.0 * r).sqrt()
            })
            .collect()
    }
}

/// `a₂ = -Σ_j c_j² / (|k_j| + |k_j|²/2)`.
pub fn second_order_coefficient(grid: &MomentumGrid, params: &ModelParams) -> f64 {
    let c = grid.amplitudes(params.eps);
    -grid
        .modes()
        .iter()
        .zip(&c)
        .map(|(m, c)| {
            let r = m.norm();
            c * c / (r + 0.5 * r * r)
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
struct Interaction {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

/// Sparse `H` stored as its diagonal and the coupling-free interaction
/// pattern, so the coupling can be changed without reassembly.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    diagonal: Arc<Vec<f64>>,
    interaction: Arc<Interaction>,
    g: f64,
    n_workers: usize,
}

fn row_entries(
    space: &TruncatedFockSpace,
    modes: &[Mode],
    amps: &[f64],
    index: usize,
    cols: &mut Vec<u32>,
    vals: &mut Vec<f64>,
) -> f64 {
    let st = space.unrank(index);
    let mut p = [0.0; 3];
    let mut hf = 0.0;
    for &a in &st {
        let m = &modes[a as usize];
        for c in 0..3 {
            p[c] += m.k[c];
        }
        hf += m.norm();
    }
    let start = cols.len();
    // annihilate one boson of each occupied mode
    let mut i = 0;
    while i < st.len() {
        let a = st[i];
        let mut n = 1;
        while i + n < st.len() && st[i + n] == a {
            n += 1;
        }
        let mut rest = st.clone();
        rest.remove(i);
        cols.push(space.rank(&rest) as u32);
        vals.push(amps[a as usize] * (n as f64).sqrt());
        i += n;
    }
    // create one boson in any mode
    if st.len() < space.n_max() {
        let mut bigger = Vec::with_capacity(st.len() + 1);
        for (j, amp) in amps.iter().enumerate() {
            let j = j as u32;
            let pos = st.partition_point(|&a| a <= j);
            let n_before = st.iter().filter(|&&a| a == j).count();
            bigger.clear();
            bigger.extend_from_slice(&st[..pos]);
            bigger.push(j);
            bigger.extend_from_slice(&st[pos..]);
            cols.push(space.rank(&bigger) as u32);
            vals.push(amp * ((n_before + 1) as f64).sqrt());
        }
    }
    // column order within the row
    let mut pairs: Vec<(u32, f64)> = cols[start..].iter().cloned().zip(vals[start..].iter().cloned()).collect();
    pairs.sort_by_key(|p| p.0);
    for (k, (c, v)) in pairs.into_iter().enumerate() {
        cols[start + k] = c;
        vals[start + k] = v;
    }
    0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) + hf
}

fn pool(n_workers: usize) -> Result<rayon::ThreadPool, FockError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers.max(1))
        .build()
        .map_err(|e| FockError::Pool(e.to_string()))
}

const CHUNK: usize = 8192;

/// Assembles `H` at the coupling `params.g`.
pub fn build_hamiltonian(
    grid: &MomentumGrid,
    space: &TruncatedFockSpace,
    params: &ModelParams,
    n_workers: usize,
) -> Result<HamiltonianMatrix, FockError> {
    if grid.len() != space.n_modes() {
        return Err(FockError::Config(format!(
            "grid has {} modes but the space expects {}",
            grid.len(),
            space.n_modes()
        )));
    }
    if !(params.eps > 0.0) {
        return Err(FockError::Config("eps must be positive".into()));
    }
    let amps = grid.amplitudes(params.eps);
    let dim = space.dimension();
    let n_chunks = dim.div_ceil(CHUNK);
    let build_chunk = |c: usize| {
        let (mut cols, mut vals, mut lens, mut diag) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in (c * CHUNK)..((c + 1) * CHUNK).min(dim) {
            let before = cols.len();
            diag.push(row_entries(space, grid.modes(), &amps, i, &mut cols, &mut vals));
            lens.push(cols.len() - before);
        }
        (cols, vals, lens, diag)
    };
    let chunks: Vec<_> = pool(n_workers)?.install(|| (0..n_chunks).into_par_iter().map(build_chunk).collect());
    let nnz: usize = chunks.iter().map(|c| c.0.len()).sum();
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    let mut diagonal = Vec::with_capacity(dim);
    row_ptr.push(0);
    for (c, v, lens, d) in chunks {
        for l in lens {
            row_ptr.push(row_ptr.last().unwrap() + l);
        }
        cols.extend(c);
        vals.extend(v);
        diagonal.extend(d);
    }
    Ok(HamiltonianMatrix {
        diagonal: Arc::new(diagonal),
        interaction: Arc::new(Interaction { row_ptr, cols, vals }),
        g: params.g,
        n_workers: n_workers.max(1),
    })
}

impl HamiltonianMatrix {
    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    pub fn coupling(&self) -> f64 {
        self.g
    }

    /// Number of stored nonzeros including the diagonal.
    pub fn nnz(&self) -> usize {
        self.interaction.cols.len() + self.diagonal.len()
    }

    /// The same operator at another coupling; shares storage.
    pub fn with_coupling(&self, g: f64) -> Self {
        Self { g, ..self.clone() }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Entries `(row, col, value)` in row-major order, diagonal first in
    /// each row; off-diagonal entries are scaled by the coupling.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let it = &self.interaction;
        (0..self.dimension()).flat_map(move |r| {
            std::iter::once((r, r, self.diagonal[r])).chain(
                (it.row_ptr[r]..it.row_ptr[r + 1]).map(move |k| (r, it.cols[k] as usize, self.g * it.vals[k])),
            )
        })
    }

    fn apply_rows(&self, x: &[f64], out: &mut [f64], first: usize) {
        let it = &self.interaction;
        for (o, r) in out.iter_mut().zip(first..) {
            let mut s = 0.0;
            for k in it.row_ptr[r]..it.row_ptr[r + 1] {
                s += it.vals[k] * x[it.cols[k] as usize];
            }
            *o = self.diagonal[r] * x[r] + self.g * s;
        }
    }

    /// `out = H x`. Rows are independent, so the result does not depend on
    /// the worker count.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        if self.n_workers <= 1 || self.dimension() < 4 * CHUNK {
            self.apply_rows(x, out, 0);
        } else {
            out.par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(c, o)| self.apply_rows(x, o, c * CHUNK));
        }
    }

    /// Dense copy for small matrices.
    pub fn to_dense(&self) -> Result<Vec<Vec<f64>>, FockError> {
        let n = self.dimension();
        if n > 4096 {
            return Err(FockError::Config(format!("dimension {n} too large for a dense copy")));
        }
        let mut a = vec![vec![0.0; n]; n];
        for (r, c, v) in self.entries() {
            a[r][c] += v;
        }
        Ok(a)
    }

    /// Writes `row col value` lines preceded by a `%` header.
    pub fn write_coo<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "% dimension {} nnz {}", self.dimension(), self.nnz())?;
        for (r, c, v) in self.entries() {
            if v != 0.0 || r == c {
                writeln!(out, "{r} {c} {v:e}")?;
            }
        }
        out.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundState {
    pub g: f64,
    pub energy: f64,
    pub residual: f64,
    /// `|⟨Ω, ψ⟩|` for the normalized ground vector `ψ`.
    pub vacuum_overlap: f64,
    pub cycles: usize,
    pub matvecs: usize,
}

/// Lowest eigenvalue of `H`, started from the vacuum.
pub fn ground_energy(matrix: &HamiltonianMatrix, opts: &LanczosOptions) -> Result<GroundState, FockError> {
    let mut start = vec![0.0; matrix.dimension()];
    start[0] = 1.0;
    let run = || lowest_eigenpair(&|x: &[f64], y: &mut [f64]| matrix.apply(x, y), &start, opts);
    let e = if matrix.n_workers > 1 {
        pool(matrix.n_workers)?.install(run)?
    } else {
        run()?
    };
    Ok(GroundState {
        g: matrix.g,
        energy: e.value,
        residual: e.residual,
        vacuum_overlap: e.vector[0].abs(),
        cycles: e.cycles,
        matvecs: e.matvecs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationCheck {
    pub a2_grid: f64,
    pub a2_fit: f64,
    pub a4_fit: f64,
    /// RMS residual of `E/g² = a₂`.
    pub residual_quadratic: f64,
    /// RMS residual of `E/g² = a₂ + a₄ g²`.
    pub residual_quartic: f64,
    pub states: Vec<GroundState>,
}

impl PerturbationCheck {
    pub fn relative_deviation(&self) -> f64 {
        ((self.a2_fit - self.a2_grid) / self.a2_grid).abs()
    }
}

/// Ground energies at each coupling and the fit `E/g² = a₂ + a₄ g²`.
pub fn perturbation_check(
    matrix: &HamiltonianMatrix,
    grid: &MomentumGrid,
    params: &ModelParams,
    g_list: &[f64],
    opts: &LanczosOptions,
) -> Result<PerturbationCheck, FockError> {
    if g_list.len() < 2 || g_list.iter().any(|&g| g == 0.0) {
        return Err(FockError::Config("need at least two nonzero couplings".into()));
    }
    let states = g_list
        .iter()
        .map(|&g| ground_energy(&matrix.with_coupling(g), opts))
        .collect::<Result<Vec<_>, _>>()?;
    let xs: Vec<f64> = g_list.iter().map(|g| g * g).collect();
    let ys: Vec<f64> = states.iter().zip(&xs).map(|(s, x)| s.energy / x).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if !(sxx > 0.0) {
        return Err(FockError::Config("couplings must have distinct magnitudes".into()));
    }
    let a4 = sxy / sxx;
    let a2 = mean_y - a4 * mean_x;
    let rms = |f: &dyn Fn(f64) -> f64| {
        (xs.iter().zip(&ys).map(|(x, y)| (y - f(*x)).powi(2)).sum::<f64>() / n).sqrt()
    };
    Ok(PerturbationCheck {
        a2_grid: second_order_coefficient(grid, params),
        a2_fit: a2,
        a4_fit: a4,
        residual_quadratic: rms(&|_| mean_y),
        residual_quartic: rms(&|x| a2 + a4 * x),
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(g: f64) -> ModelParams {
        ModelParams::new(0.1, 1.0, g, 4.0, 2.0).unwrap()
    }

    fn small_grid() -> MomentumGrid {
        MomentumGrid::spherical(
            1.0,
            0.1,
            &GridResolution {
                n_radial: 3,
                n_directions: 4,
                k_max: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn grid_is_symmetric_and_fills_the_shell() {
        let grid = MomentumGrid::spherical(1.0, 0.1, &GridResolution::default()).unwrap();
        assert_eq!(grid.len(), 2000);
        let vol = 4.0 * PI / 3.0 * (grid.k_max().powi(3) - 1.0);
        assert!((grid.total_weight() / vol - 1.0).abs() < 1e-10);
        for (i, m) in grid.modes().iter().enumerate() {
            assert!(m.norm() >= 1.0);
            let found = grid.modes().iter().any(|o| {
                (0..3).all(|c| (o.k[c] + m.k[c]).abs() < 1e-12) && o.weight == m.weight
            });
            assert!(found, "mode {i} has no antipode");
        }
    }

    #[test]
    fn single_mode_matches_two_by_two_closed_form() {
        let k = [0.3, -1.2, 0.8];
        let grid = MomentumGrid::from_modes(vec![Mode { k, weight: 0.7 }], 1.0).unwrap();
        let space = TruncatedFockSpace::new(1, 1).unwrap();
        let g = 0.4;
        let h = build_hamiltonian(&grid, &space, &params(g), 1).unwrap();
        let a = h.to_dense().unwrap();
        let r = grid.modes()[0].norm();
        let c = grid.amplitudes(0.1)[0];
        let e1 = r + 0.5 * r * r;
        assert_eq!(a[0][0], 0.0);
        assert!((a[1][1] - e1).abs() < 1e-14);
        assert!((a[0][1] - g * c).abs() < 1e-15 && a[0][1] == a[1][0]);
        let mid = 0.5 * e1;
        let exact = mid - (mid * mid + g * g * c * c).sqrt();
        let gs = ground_energy(&h, &LanczosOptions::default()).unwrap();
        assert!((gs.energy - exact).abs() < 1e-13);
        // small-coupling expansion of the closed form
        let a2 = second_order_coefficient(&grid, &params(g));
        assert!((a2 + c * c / e1).abs() < 1e-15);
        let tiny = 1e-4;
        let e_tiny = mid - (mid * mid + tiny * tiny * c * c).sqrt();
        assert!((e_tiny / (tiny * tiny) - a2).abs() < 1e-6 * a2.abs());
    }

    #[test]
    fn matrix_is_symmetric_and_diagonal_at_zero_coupling() {
        let grid = small_grid();
        let space = TruncatedFockSpace::new(grid.len(), 3).unwrap();
        let h = build_hamiltonian(&grid, &space, &params(0.7), 1).unwrap();
        let a = h.to_dense().unwrap();
        for i in 0..a.len() {
            for j in 0..a.len() {
                assert_eq!(a[i][j], a[j][i]);
            }
        }
        let h0 = h.with_coupling(0.0);
        let gs = ground_energy(&h0, &LanczosOptions::default()).unwrap();
        assert_eq!(gs.energy, 0.0);
        assert_eq!(gs.vacuum_overlap, 1.0);
        assert!(h0.diagonal()[1..].iter().all(|&d| d > 0.0));
    }

    #[test]
    fn ground_energy_is_even_monotone_and_variational() {
        let grid = small_grid();
        let opts = LanczosOptions::default();
        let space2 = TruncatedFockSpace::new(grid.len(), 2).unwrap();
        let space1 = TruncatedFockSpace::new(grid.len(), 1).unwrap();
        let h2 = build_hamiltonian(&grid, &space2, &params(0.5), 2).unwrap();
        let h1 = build_hamiltonian(&grid, &space1, &params(0.5), 1).unwrap();
        let e = ground_energy(&h2, &opts).unwrap();
        let e_neg = ground_energy(&h2.with_coupling(-0.5), &opts).unwrap();
        assert!((e.energy - e_neg.energy).abs() < 1e-12);
        assert!(e.energy <= ground_energy(&h1, &opts).unwrap().energy + 1e-12);
        assert!(e.vacuum_overlap > 0.0);
        let mut prev = 0.0;
        for g in [0.1, 0.2, 0.4, 0.8] {
            let v = ground_energy(&h2.with_coupling(g), &opts).unwrap().energy;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn fitted_coefficient_matches_grid_sum() {
        let grid = small_grid();
        let space = TruncatedFockSpace::new(grid.len(), 2).unwrap();
        let p = params(0.1);
        let h = build_hamiltonian(&grid, &space, &p, 1).unwrap();
        let pc = perturbation_check(&h, &grid, &p, &[0.05, 0.1, 0.2], &LanczosOptions::default()).unwrap();
        assert!(pc.a2_grid < 0.0);
        assert!(pc.relative_deviation() < 1e-2);
        assert!(pc.residual_quartic <= pc.residual_quadratic);
    }

    #[test]
    fn oversized_spaces_are_rejected() {
        assert!(matches!(TruncatedFockSpace::new(5000, 2), Err(FockError::Config(_))));
    }

    #[test]
    fn coo_export_lists_every_entry() {
        let grid = small_grid();
        let space = TruncatedFockSpace::new(grid.len(), 1).unwrap();
        let h = build_hamiltonian(&grid, &space, &params(0.3), 1).unwrap();
        let mut buf = Vec::new();
        h.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + h.nnz());
    }
}
