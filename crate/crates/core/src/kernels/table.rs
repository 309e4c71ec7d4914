//! Lag-indexed radial tables of `W`, `ϱ` and `∂_{|x|}ϱ`.
//!
//! Path functionals only ever evaluate the kernels at time differences that
//! are multiples of the grid step, so each lag gets its own radial profile on
//! a uniform `|x|` grid, filled by one vector-valued adaptive Gauss–Kronrod
//! pass over the momentum shell. Lookups use four-point Lagrange
//! interpolation with the even (`W`, `ϱ`) or odd (`∂ϱ`) extension below zero.
//! Distances beyond a profile fall back to the direct evaluator.

use std::f64::consts::PI;

use thiserror::Error;

use super::{KernelError, KernelEvaluator};
use crate::quadrature::{gauss7_weights_aligned, kronrod15_nodes, Majorant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("invalid table request: {0}")]
    Invalid(String),
    #[error("radial profile at lag {lag} did not converge (error {error:e})")]
    NotConverged { lag: usize, error: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Number of Brownian standard deviations (per unit `√u`) covered by a
/// profile before falling back to direct quadrature.
const COVERAGE: f64 = 7.5;
const REL_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
struct Profile {
    /// Samples at `x = (i - 1) h`, `i = 0..len`; index 0 is the ghost point at `-h`.
    w: Vec<f64>,
    rho: Vec<f64>,
    drho: Vec<f64>,
    /// Largest `|x|` that can be interpolated.
    reach: f64,
}

#[derive(Debug, Clone)]
pub struct LagTable {
    evaluator: KernelEvaluator,
    dt: f64,
    h: f64,
    rho_origin: f64,
    profiles: Vec<Profile>,
}

#[inline]
fn lagrange4(f: &[f64], i: usize, t: f64) -> f64 {
    // stencil at x_{i-1}, x_i, x_{i+1}, x_{i+2}; stored with a +1 ghost offset
    let tm1 = t - 1.0;
    let tm2 = t - 2.0;
    let tp1 = t + 1.0;
    let a = -t * tm1 * tm2 / 6.0;
    let b = tp1 * tm1 * tm2 * 0.5;
    let c = -tp1 * t * tm2 * 0.5;
    let d = tp1 * t * tm1 / 6.0;
    a * f[i] + b * f[i + 1] + c * f[i + 2] + d * f[i + 3]
}

impl Profile {
    #[inline]
    fn locate(&self, h: f64, x: f64) -> Option<(usize, f64)> {
        if x > self.reach {
            return None;
        }
        let s = x / h;
        let i = s as usize;
        Some((i, s - i as f64))
    }
}

struct Accum<'a> {
    xs: &'a [f64],
    eps: f64,
    u: f64,
}

impl Accum<'_> {
    /// Adds `weight · integrand(k)` for every grid point into the three
    /// output arrays.
    fn add_node(&self, k: f64, weight: f64, w: &mut [f64], rho: &mut [f64], drho: &mut [f64]) {
        let damp = weight * (-self.eps * k * k - k * self.u).exp();
        let beta_ratio = 1.0 / (1.0 + 0.5 * k);
        let cw = k * damp;
        let cr = damp * beta_ratio;
        let cd = -k * damp * beta_ratio;
        if self.xs.len() < 2 {
            w[0] += cw;
            rho[0] += cr;
            return;
        }
        let h = self.xs[1] - self.xs[0];
        let (sh, ch) = (k * h).sin_cos();
        let (mut s, mut c) = (0.0f64, 1.0f64);
        for i in 0..self.xs.len() {
            let z = k * self.xs[i];
            let (j0, j1) = if z < 1e-2 {
                let z2 = z * z;
                (
                    1.0 - z2 / 6.0 * (1.0 - z2 / 20.0),
                    z / 3.0 * (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0)),
                )
            } else {
                let j0 = s / z;
                (j0, (j0 - c) / z)
            };
            w[i] += cw * j0;
            rho[i] += cr * j0;
            drho[i] += cd * j1;
            let s_next = s * ch + c * sh;
            c = c * ch - s * sh;
            s = s_next;
        }
    }
}

impl LagTable {
    pub(super) fn build(evaluator: &KernelEvaluator, dt: f64, n_lags: usize) -> Result<Self, TableError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TableError::Invalid(format!("dt must be positive, got {dt}")));
        }
        let eps = evaluator.params().eps;
        let h = (0.1 * eps.sqrt()).min(0.02);
        let rho_origin = evaluator.rho_origin()?.value;
        let mut profiles = Vec::with_capacity(n_lags + 1);
        for lag in 0..=n_lags {
            profiles.push(Self::build_profile(evaluator, lag, lag as f64 * dt, h)?);
        }
        Ok(Self {
            evaluator: evaluator.clone(),
            dt,
            h,
            rho_origin,
            profiles,
        })
    }

    fn build_profile(evaluator: &KernelEvaluator, lag: usize, u: f64, h: f64) -> Result<Profile, TableError> {
        let p = evaluator.params();
        let lambda = p.lambda;
        let reach = if lag == 0 { 0.0 } else { COVERAGE * u.sqrt() };
        let n_pts = (reach / h).ceil() as usize + 3;
        let xs: Vec<f64> = (0..n_pts).map(|i| i as f64 * h).collect();

        // scales at the origin set the absolute tolerances
        let w0 = evaluator.w_kernel(0.0, u)?.value;
        let r0 = evaluator.rho_kernel(0.0, u)?.value;
        let tol_w = REL_TOL * w0 / (2.0 * PI) + 1e-300;
        let tol_r = REL_TOL * r0 / (2.0 * PI) + 1e-300;
        let cut = |power, target: f64| {
            Majorant {
                amplitude: 1.0,
                power,
                gauss: p.eps,
                linear: u,
            }
            .cut_for(lambda, 0.1 * target)
        };
        let cut = match (cut(1, tol_w), cut(0, tol_r)) {
            (Some(a), Some(b)) => a.max(b),
            _ => return Err(TableError::NotConverged { lag, error: f64::INFINITY }),
        };

        let acc = Accum { xs: &xs, eps: p.eps, u };
        let n = xs.len();
        let mut w = vec![0.0; n];
        let mut rho = vec![0.0; n];
        let mut drho = vec![0.0; n];
        let x_max = xs[n - 1].max(1e-9);
        let width = (PI / x_max).min(1.0);
        let n_panels = ((cut - lambda) / width).ceil().max(1.0) as usize;
        let span = cut - lambda;
        let mut stack: Vec<(f64, f64, u32)> = (0..n_panels)
            .rev()
            .map(|i| {
                let a = lambda + span * i as f64 / n_panels as f64;
                let b = lambda + span * (i + 1) as f64 / n_panels as f64;
                (a, b, 0)
            })
            .collect();
        let mut kw = vec![0.0; n];
        let mut kr = vec![0.0; n];
        let mut kd = vec![0.0; n];
        let mut gw = vec![0.0; n];
        let mut gr = vec![0.0; n];
        let mut gd = vec![0.0; n];
        while let Some((a, b, depth)) = stack.pop() {
            for v in [&mut kw, &mut kr, &mut kd, &mut gw, &mut gr, &mut gd] {
                v.iter_mut().for_each(|x| *x = 0.0);
            }
            let nodes = kronrod15_nodes(a, b);
            let gweights = gauss7_weights_aligned(a, b);
            for (j, &(k, wk)) in nodes.iter().enumerate() {
                acc.add_node(k, wk, &mut kw, &mut kr, &mut kd);
                if gweights[j] != 0.0 {
                    acc.add_node(k, gweights[j], &mut gw, &mut gr, &mut gd);
                }
            }
            let frac = (b - a) / span;
            let err_ok = |k: &[f64], g: &[f64], tol: f64| {
                k.iter().zip(g).all(|(x, y)| (x - y).abs() <= tol * frac)
            };
            if err_ok(&kw, &gw, tol_w) && err_ok(&kr, &gr, tol_r) && err_ok(&kd, &gd, tol_r) {
                for i in 0..n {
                    w[i] += kw[i];
                    rho[i] += kr[i];
                    drho[i] += kd[i];
                }
            } else if depth >= 30 {
                let error = kw.iter().zip(&gw).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                return Err(TableError::NotConverged { lag, error });
            } else {
                let m = 0.5 * (a + b);
                stack.push((m, b, depth + 1));
                stack.push((a, m, depth + 1));
            }
        }
        let scale = |v: Vec<f64>, sign: f64| -> Vec<f64> {
            let ghost = if n > 1 { sign * v[1] } else { v[0] };
            std::iter::once(ghost * 2.0 * PI)
                .chain(v.iter().map(|x| x * 2.0 * PI))
                .collect()
        };
        Ok(Profile {
            w: scale(w, 1.0),
            rho: scale(rho, 1.0),
            drho: scale(drho, -1.0),
            reach: if lag == 0 { 0.0 } else { (n_pts - 3) as f64 * h },
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_lags(&self) -> usize {
        self.profiles.len() - 1
    }

    pub fn evaluator(&self) -> &KernelEvaluator {
        &self.evaluator
    }

    /// Exact `ϱ_ε(0,0)` from the evaluator.
    pub fn rho_origin(&self) -> f64 {
        self.rho_origin
    }

    /// Radial spacing of the profiles.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    fn check_lag(&self, lag: usize) -> Result<&Profile, KernelError> {
        self.profiles.get(lag).ok_or_else(|| {
            KernelError::Domain(format!("lag {lag} beyond table of {} lags", self.n_lags()))
        })
    }

    #[inline]
    fn lookup(&self, profile: &Profile, data: &[f64], x: f64) -> Option<f64> {
        if x == 0.0 {
            return Some(data[1]);
        }
        profile
            .locate(self.h, x)
            .map(|(i, t)| lagrange4(data, i, t))
    }

    /// `W(x, lag·dt)` from the table, or `None` beyond the profile.
    #[inline]
    pub fn w_tabulated(&self, lag: usize, x: f64) -> Option<f64> {
        let p = &self.profiles[lag];
        self.lookup(p, &p.w, x)
    }

    #[inline]
    pub fn rho_tabulated(&self, lag: usize, x: f64) -> Option<f64> {
        let p = &self.profiles[lag];
        self.lookup(p, &p.rho, x)
    }

    #[inline]
    pub fn drho_tabulated(&self, lag: usize, x: f64) -> Option<f64> {
        let p = &self.profiles[lag];
        if x == 0.0 {
            return Some(0.0);
        }
        self.lookup(p, &p.drho, x)
    }

    pub fn w(&self, lag: usize, x: f64) -> Result<f64, KernelError> {
        let p = self.check_lag(lag)?;
        match self.lookup(p, &p.w, x) {
            Some(v) => Ok(v),
            None => Ok(self.evaluator.w_kernel(x, lag as f64 * self.dt)?.value),
        }
    }

    pub fn rho(&self, lag: usize, x: f64) -> Result<f64, KernelError> {
        let p = self.check_lag(lag)?;
        match self.lookup(p, &p.rho, x) {
            Some(v) => Ok(v),
            None => Ok(self.evaluator.rho_kernel(x, lag as f64 * self.dt)?.value),
        }
    }

    pub fn drho(&self, lag: usize, x: f64) -> Result<f64, KernelError> {
        let p = self.check_lag(lag)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        match self.lookup(p, &p.drho, x) {
            Some(v) => Ok(v),
            None => Ok(self
                .evaluator
                .rho_radial_derivative(x, lag as f64 * self.dt)?
                .value),
        }
    }

    /// Largest deviation between table and direct quadrature, relative to
    /// each kernel's value at the origin of the same lag, over
    /// `per_lag` points placed between grid nodes on every `stride`-th lag.
    pub fn validate(&self, stride: usize, per_lag: usize) -> Result<f64, KernelError> {
        let mut worst = 0.0f64;
        for lag in (1..self.profiles.len()).step_by(stride.max(1)) {
            let p = &self.profiles[lag];
            let u = lag as f64 * self.dt;
            let w0 = p.w[1].abs();
            let r0 = p.rho[1].abs();
            for j in 0..per_lag {
                let frac = (j as f64 + 0.5) / per_lag as f64;
                let x = ((frac * p.reach / self.h).floor() + 0.37) * self.h;
                if x > p.reach {
                    continue;
                }
                let e = &self.evaluator;
                let dw = (self.w(lag, x)? - e.w_kernel(x, u)?.value).abs() / w0;
                let dr = (self.rho(lag, x)? - e.rho_kernel(x, u)?.value).abs() / r0;
                let dd = (self.drho(lag, x)? - e.rho_radial_derivative(x, u)?.value).abs() / r0;
                worst = worst.max(dw).max(dr).max(dd);
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ModelParams;
    use crate::quadrature::QuadratureConfig;

    fn table(eps: f64, dt: f64, lags: usize) -> LagTable {
        let k = KernelEvaluator::new(
            ModelParams::new(eps, 1.0, 0.3, 4.0, 2.0).unwrap(),
            QuadratureConfig::default(),
        )
        .unwrap();
        k.tabulate(dt, lags).unwrap()
    }

    #[test]
    fn table_matches_direct_quadrature() {
        for eps in [0.1, 0.02] {
            let t = table(eps, 0.05, 80);
            let err = t.validate(7, 5).unwrap();
            assert!(err < 1e-5, "eps={eps}: {err:e}");
        }
    }

    #[test]
    fn origin_values_are_exact_nodes() {
        let t = table(0.1, 0.1, 10);
        let e = t.evaluator().clone();
        for lag in [0usize, 1, 5, 10] {
            let u = lag as f64 * 0.1;
            let w = t.w(lag, 0.0).unwrap();
            let exact = e.w_kernel(0.0, u).unwrap().value;
            assert!((w - exact).abs() < 1e-9 * exact, "lag {lag}: {w} vs {exact}");
            let r = t.rho(lag, 0.0).unwrap();
            let exact = e.rho_kernel(0.0, u).unwrap().value;
            assert!((r - exact).abs() < 1e-9 * exact);
        }
        assert!((t.rho_origin() - e.rho_origin().unwrap().value).abs() == 0.0);
    }

    #[test]
    fn far_points_fall_back_to_quadrature() {
        let t = table(0.1, 0.1, 4);
        assert!(t.w_tabulated(2, 50.0).is_none());
        let v = t.w(2, 50.0).unwrap();
        let e = t.evaluator().w_kernel(50.0, 0.2).unwrap().value;
        assert_eq!(v, e);
        assert!(t.w(5, 0.0).is_err());
    }
}
