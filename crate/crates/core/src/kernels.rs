//! Momentum-space kernels of the regularized Nelson model.
//!
//! Every kernel is an integral over the shell `|k| ≥ λ` with the plain
//! Lebesgue measure `dk` and the Gaussian form factor `e^{-ε|k|²}`. Using the
//! angular average `∫dΩ e^{-ik·x} = 4π j₀(|k||x|)` they all reduce to
//! one-dimensional radial integrals:
//!
//! ```text
//! W(x,t)        = 2π ∫_λ^∞ r j₀(r|x|) e^{-εr² - r|t|} dr
//! ϱ(x,t)        = 2π ∫_λ^∞ j₀(r|x|) e^{-εr² - r|t|} / (1 + r/2) dr
//! ∂_|x| ϱ(x,t)  = -2π ∫_λ^∞ r j₁(r|x|) e^{-εr² - r|t|} / (1 + r/2) dr
//! ```
//!
//! with `ω(k) = |k|` and `β(k) = 1/(ω(k) + |k|²/2)`.

mod table;

use std::cell::Cell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{
    exp_sinh, gauss_legendre, integrate, integrate_radial, Majorant, Quad, QuadError,
    QuadratureConfig, RadialOptions,
};

pub use table::{LagTable, TableError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid model parameter {name} = {value}: {reason}")]
    Invalid {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Physical parameters of one run: UV regularization `eps`, infrared cutoff
/// `lambda`, coupling `g`, horizon `big_t` (paths live on `[-T, T]`) and the
/// Itô split `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub eps: f64,
    pub lambda: f64,
    pub g: f64,
    pub big_t: f64,
    pub tau: f64,
}

impl ModelParams {
    pub fn new(eps: f64, lambda: f64, g: f64, big_t: f64, tau: f64) -> Result<Self, ParamError> {
        let p = Self {
            eps,
            lambda,
            g,
            big_t,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let bad = |name, value, reason| Err(ParamError::Invalid { name, value, reason });
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", self.eps, "must be positive and finite");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda, "must be positive and finite");
        }
        if !self.g.is_finite() {
            return bad("g", self.g, "must be finite");
        }
        if !(self.big_t > 0.0 && self.big_t.is_finite()) {
            return bad("big_t", self.big_t, "must be positive and finite");
        }
        if !(self.tau > 0.0 && self.tau < self.big_t) {
            return bad("tau", self.tau, "must satisfy 0 < tau < big_t");
        }
        Ok(())
    }

    pub fn with_g(self, g: f64) -> Self {
        Self { g, ..self }
    }

    pub fn with_eps(self, eps: f64) -> Self {
        Self { eps, ..self }
    }

    /// Same physics on another horizon; `tau` is rescaled to keep `tau/T`.
    pub fn with_horizon(self, big_t: f64) -> Self {
        Self {
            big_t,
            tau: self.tau * big_t / self.big_t,
            ..self
        }
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            eps: 0.1,
            lambda: 1.0,
            g: 0.3,
            big_t: 4.0,
            tau: 2.0,
        }
    }
}

/// `β(k) = 1/(ω(k) + |k|²/2)` as a function of `r = |k|`.
pub fn beta(r: f64) -> f64 {
    1.0 / (r + 0.5 * r * r)
}

/// Spherical Bessel `j₀(z) = sin z / z`.
pub fn sph_j0(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        let z2 = z * z;
        1.0 - z2 / 6.0 * (1.0 - z2 / 20.0)
    } else {
        z.sin() / z
    }
}

/// Spherical Bessel `j₁(z) = sin z / z² - cos z / z`.
pub fn sph_j1(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        let z2 = z * z;
        z / 3.0 * (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0))
    } else {
        (z.sin() / z - z.cos()) / z
    }
}

/// `c(τ) = 8π ∫_λ^∞ e^{-εr²} e^{-τr} dr` for any `ε ≥ 0`.
pub fn c_tau_with(eps: f64, lambda: f64, tau: f64, quad: &QuadratureConfig) -> Result<Quad, KernelError> {
    if !(eps >= 0.0 && lambda > 0.0 && tau > 0.0) {
        return Err(KernelError::Domain(format!(
            "c(tau) needs eps >= 0, lambda > 0, tau > 0 (got {eps}, {lambda}, {tau})"
        )));
    }
    let m = Majorant {
        amplitude: 1.0,
        power: 0,
        gauss: eps,
        linear: tau,
    };
    let q = integrate_radial(
        |r| (-eps * r * r - tau * r).exp(),
        lambda,
        m,
        RadialOptions { frequency: 0.0 },
        quad,
    )?;
    Ok(q.scale(8.0 * PI))
}

/// Quadrature-backed evaluator of the model's kernels. Immutable and `Sync`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEvaluator {
    params: ModelParams,
    quad: QuadratureConfig,
}

impl KernelEvaluator {
    pub fn new(params: ModelParams, quad: QuadratureConfig) -> Result<Self, KernelError> {
        params.validate()?;
        quad.validate()?;
        Ok(Self { params, quad })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn quad(&self) -> &QuadratureConfig {
        &self.quad
    }

    fn check_point(x_norm: f64, t: f64) -> Result<(), KernelError> {
        if !x_norm.is_finite() || x_norm < 0.0 || !t.is_finite() {
            return Err(KernelError::Domain(format!(
                "kernel argument out of domain: |x| = {x_norm}, t = {t}"
            )));
        }
        Ok(())
    }

    fn radial(
        &self,
        integrand: impl Fn(f64) -> f64,
        amplitude: f64,
        power: i32,
        linear: f64,
        frequency: f64,
    ) -> Result<Quad, KernelError> {
        let m = Majorant {
            amplitude,
            power,
            gauss: self.params.eps,
            linear,
        };
        Ok(integrate_radial(
            integrand,
            self.params.lambda,
            m,
            RadialOptions { frequency },
            &self.quad,
        )?)
    }

    /// Pair potential `W_ε(x, t)` as a function of `|x|` and `t`.
    pub fn w_kernel(&self, x_norm: f64, t: f64) -> Result<Quad, KernelError> {
        Self::check_point(x_norm, t)?;
        let eps = self.params.eps;
        let u = t.abs();
        let q = self.radial(
            |r| r * sph_j0(r * x_norm) * (-eps * r * r - r * u).exp(),
            1.0,
            1,
            u,
            x_norm,
        )?;
        Ok(q.scale(2.0 * PI))
    }

    /// `ϱ_ε(x, t)`: the pair potential weighted by `β`.
    pub fn rho_kernel(&self, x_norm: f64, t: f64) -> Result<Quad, KernelError> {
        Self::check_point(x_norm, t)?;
        let eps = self.params.eps;
        let u = t.abs();
        let q = self.radial(
            |r| sph_j0(r * x_norm) * (-eps * r * r - r * u).exp() / (1.0 + 0.5 * r),
            1.0,
            0,
            u,
            x_norm,
        )?;
        Ok(q.scale(2.0 * PI))
    }

    /// Radial derivative `∂_{|x|} ϱ_ε(x, t)`; vanishes at `|x| = 0`.
    pub fn rho_radial_derivative(&self, x_norm: f64, t: f64) -> Result<Quad, KernelError> {
        Self::check_point(x_norm, t)?;
        if x_norm == 0.0 {
            return Ok(Quad {
                value: 0.0,
                error: 0.0,
            });
        }
        let eps = self.params.eps;
        let u = t.abs();
        // |r j₁(rx)/(1 + r/2)| ≤ 2 · 0.44
        let q = self.radial(
            |r| r * sph_j1(r * x_norm) * (-eps * r * r - r * u).exp() / (1.0 + 0.5 * r),
            1.0,
            0,
            u,
            x_norm,
        )?;
        Ok(q.scale(-2.0 * PI))
    }

    /// `∇ϱ_ε(x, t) = (x/|x|) ∂_{|x|} ϱ_ε`; the zero vector at `x = 0`.
    pub fn grad_rho(&self, x: [f64; 3], t: f64) -> Result<([f64; 3], f64), KernelError> {
        let norm = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let d = self.rho_radial_derivative(norm, t)?;
        if norm == 0.0 {
            return Ok(([0.0; 3], 0.0));
        }
        let s = d.value / norm;
        Ok(([x[0] * s, x[1] * s, x[2] * s], d.error))
    }

    /// `ϱ_ε(0, 0)`.
    pub fn rho_origin(&self) -> Result<Quad, KernelError> {
        self.rho_kernel(0.0, 0.0)
    }

    /// Coupling-free renormalization energy `E_ε^ren = -ϱ_ε(0,0)`. Multiply
    /// by `g²` wherever it is compared with an energy.
    pub fn renorm_energy(&self) -> Result<Quad, KernelError> {
        Ok(self.rho_origin()?.neg())
    }

    /// `E_ε^ren` with unit coupling computed from its three-dimensional
    /// definition `-∫_{|k|>λ} e^{-ε|k|²} β(k) / (2ω(k)) dk`: a spherical
    /// product rule whose angular part evaluates the integrand at explicit
    /// momentum vectors and whose radial part is a double-exponential rule.
    /// Shares no code path with [`Self::renorm_energy`].
    pub fn renorm_energy_direct(&self) -> Result<Quad, KernelError> {
        let eps = self.params.eps;
        let integrand = |k: [f64; 3]| -> f64 {
            let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let w = kk.sqrt();
            -(-eps * kk).exp() / (2.0 * w) / (w + 0.5 * kk)
        };
        let polar = gauss_legendre(4);
        let n_phi = 8;
        let radial = |r: f64| -> f64 {
            let mut acc = 0.0;
            for &(ct, wt) in &polar {
                let st = (1.0 - ct * ct).sqrt();
                for j in 0..n_phi {
                    let phi = 2.0 * PI * j as f64 / n_phi as f64;
                    let k = [r * st * phi.cos(), r * st * phi.sin(), r * ct];
                    acc += wt * (2.0 * PI / n_phi as f64) * integrand(k);
                }
            }
            r * r * acc
        };
        let q = exp_sinh(radial, self.params.lambda, 1e-14)?;
        Ok(q)
    }

    /// `∫_0^U ϱ_ε(0, u) du = 2π ∫_λ^∞ e^{-εr²} (1 - e^{-Ur}) / (r (1 + r/2)) dr`.
    pub fn rho_time_integral(&self, upper: f64) -> Result<Quad, KernelError> {
        if !(upper >= 0.0 && upper.is_finite()) {
            return Err(KernelError::Domain(format!("upper limit must be >= 0, got {upper}")));
        }
        let eps = self.params.eps;
        let q = self.radial(
            |r| (-eps * r * r).exp() * -(-upper * r).exp_m1() / (r * (1.0 + 0.5 * r)),
            1.0,
            -1,
            0.0,
            0.0,
        )?;
        Ok(q.scale(2.0 * PI))
    }

    /// `c(τ)` at the configured `τ`.
    pub fn c_tau(&self) -> Result<Quad, KernelError> {
        self.c_tau_at(self.params.tau)
    }

    pub fn c_tau_at(&self, tau: f64) -> Result<Quad, KernelError> {
        c_tau_with(self.params.eps, self.params.lambda, tau, &self.quad)
    }

    /// `I(ε, λ) = ∫_{|k|≥λ} e^{-ε|k|²} / |k|³ dk = 4π ∫_λ^∞ e^{-εr²}/r dr`; the
    /// overlap lower bound is `exp(-g² I)`.
    pub fn gamma_bound_exponent(&self) -> Result<Quad, KernelError> {
        let eps = self.params.eps;
        let q = self.radial(|r| (-eps * r * r).exp() / r, 1.0, -1, 0.0, 0.0)?;
        Ok(q.scale(4.0 * PI))
    }

    /// `w̄(u) = 𝔼[W_ε(B_u, u)] = ∫ e^{-ε|k|²} e^{-(ω + |k|²/2)u} / (2ω) dk` for
    /// `u ≥ 0`, using the Gaussian characteristic function of a Brownian
    /// increment.
    pub fn mean_w(&self, u: f64) -> Result<Quad, KernelError> {
        if !(u >= 0.0 && u.is_finite()) {
            return Err(KernelError::Domain(format!("lag must be >= 0, got {u}")));
        }
        let eps = self.params.eps;
        let m = Majorant {
            amplitude: 1.0,
            power: 1,
            gauss: eps + 0.5 * u,
            linear: u,
        };
        let q = integrate_radial(
            |r| r * (-eps * r * r - (r + 0.5 * r * r) * u).exp(),
            self.params.lambda,
            m,
            RadialOptions { frequency: 0.0 },
            &self.quad,
        )?;
        Ok(q.scale(2.0 * PI))
    }

    /// Integrates `weight(u) · w̄(u)` over `[0, upper]` with nested adaptive
    /// quadrature. The inner errors are folded into the result as
    /// `max inner error · ∫|weight|`.
    fn integrate_mean_w(
        &self,
        weight: impl Fn(f64) -> f64,
        upper: f64,
        weight_mass: f64,
    ) -> Result<Quad, KernelError> {
        let inner_err = Cell::new(0.0f64);
        let failure: Cell<Option<KernelError>> = Cell::new(None);
        let f = |u: f64| match self.mean_w(u) {
            Ok(q) => {
                inner_err.set(inner_err.get().max(q.error));
                weight(u) * q.value
            }
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        };
        let outer = integrate(f, 0.0, upper, &self.quad);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let outer = outer?;
        Ok(Quad {
            value: outer.value,
            error: outer.error + inner_err.get() * weight_mass,
        })
    }

    /// `𝔼[S_ε] = 2 ∫_0^{2T} (2T - u) w̄(u) du` for horizon `T ≥ 0`.
    pub fn mean_s_quadrature(&self, big_t: f64) -> Result<Quad, KernelError> {
        if !(big_t >= 0.0 && big_t.is_finite()) {
            return Err(KernelError::Domain(format!("horizon must be >= 0, got {big_t}")));
        }
        if big_t == 0.0 {
            return Ok(Quad {
                value: 0.0,
                error: 0.0,
            });
        }
        let len = 2.0 * big_t;
        let q = self.integrate_mean_w(|u| len - u, len, 0.5 * len * len)?;
        Ok(q.scale(2.0))
    }

    /// `∫_0^∞ w̄(u) du`, which equals `ϱ_ε(0,0)` after exchanging the order
    /// of integration.
    pub fn mean_w_integral(&self) -> Result<Quad, KernelError> {
        // w̄(u) ≤ W(0,0) e^{-(λ + λ²/2) u}
        let lam = self.params.lambda;
        let rate = lam + 0.5 * lam * lam;
        let w00 = self.w_kernel(0.0, 0.0)?.value;
        let target = 0.1 * self.quad.abs_tol;
        let upper = ((w00 / (rate * target)).ln() / rate).max(1.0);
        let tail = w00 * (-rate * upper).exp() / rate;
        let q = self.integrate_mean_w(|_| 1.0, upper, upper)?;
        Ok(Quad {
            value: q.value,
            error: q.error + tail,
        })
    }

    /// Tabulates `W`, `ϱ` and `∂_{|x|}ϱ` on the lags `m·dt`, `m = 0..=n_lags`.
    pub fn tabulate(&self, dt: f64, n_lags: usize) -> Result<LagTable, TableError> {
        LagTable::build(self, dt, n_lags)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(eps: f64, lambda: f64) -> KernelEvaluator {
        KernelEvaluator::new(
            ModelParams::new(eps, lambda, 1.0, 4.0, 2.0).unwrap(),
            QuadratureConfig::default(),
        )
        .unwrap()
    }

    /// Brute-force three-dimensional product quadrature of
    /// `∫_{|k|≥λ} f(|k|) e^{-ik·x} dk` in spherical coordinates with the
    /// phase evaluated at explicit momentum vectors (no angular reduction).
    /// Returns (real part, imaginary part).
    fn direct_3d(lambda: f64, r_max: f64, x: [f64; 3], f: impl Fn(f64) -> f64) -> (f64, f64) {
        let radial_panels = 400;
        let gl_r = gauss_legendre(8);
        let gl_c = gauss_legendre(48);
        let n_phi = 48;
        let h = (r_max - lambda) / radial_panels as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for p in 0..radial_panels {
            let a = lambda + p as f64 * h;
            for &(xr, wr) in &gl_r {
                let r = a + 0.5 * h * (xr + 1.0);
                let wr = 0.5 * h * wr;
                let fr = f(r) * r * r;
                for &(ct, wc) in &gl_c {
                    let st = (1.0 - ct * ct).sqrt();
                    for j in 0..n_phi {
                        let phi = 2.0 * PI * (j as f64 + 0.5) / n_phi as f64;
                        let k = [r * st * phi.cos(), r * st * phi.sin(), r * ct];
                        let kx = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                        let w = wr * wc * 2.0 * PI / n_phi as f64;
                        re += w * fr * kx.cos();
                        im -= w * fr * kx.sin();
                    }
                }
            }
        }
        (re, im)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn params_reject_invalid_values() {
        assert!(ModelParams::new(0.0, 1.0, 0.1, 4.0, 2.0).is_err());
        assert!(ModelParams::new(0.1, -1.0, 0.1, 4.0, 2.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.1, 4.0, 4.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, f64::NAN, 4.0, 2.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.0, 4.0, 2.0).is_ok());
        assert!(ModelParams::new(0.1, 1.0, -3.0, 4.0, 0.5).is_ok());
    }

    #[test]
    fn beta_at_two() {
        assert_eq!(beta(2.0), 0.25);
    }

    #[test]
    fn w_kernel_matches_direct_3d_quadrature() {
        let k = eval(0.1, 1.0);
        let (re, im) = direct_3d(1.0, 20.0, [0.0; 3], |r| (-0.1 * r * r).exp() / (2.0 * r));
        let w = k.w_kernel(0.0, 0.0).unwrap();
        assert!(rel(w.value, re) < 5e-5, "{} vs {re}", w.value);
        assert!(im.abs() < 1e-12);
        // off-origin point exercises the angular reduction
        let x = [0.3, -0.4, 0.5];
        let xn = (0.5f64).sqrt();
        let (re, im) = direct_3d(1.0, 20.0, x, |r| (-0.1 * r * r - 0.7 * r).exp() / (2.0 * r));
        let w = k.w_kernel(xn, 0.7).unwrap();
        assert!(rel(w.value, re) < 5e-5, "{} vs {re}", w.value);
        assert!(im.abs() < 1e-8 * re.abs());
    }

    #[test]
    fn rho_kernel_matches_direct_3d_quadrature() {
        let k = eval(0.1, 1.0);
        let (re, _) = direct_3d(1.0, 20.0, [0.0; 3], |r| (-0.1 * r * r).exp() / (2.0 * r) * beta(r));
        let v = k.rho_kernel(0.0, 0.0).unwrap();
        assert!(rel(v.value, re) < 5e-5, "{} vs {re}", v.value);
        let x = [1.1, 0.2, 0.0];
        let xn = (1.25f64).sqrt();
        let (re, _) = direct_3d(1.0, 20.0, x, |r| (-0.1 * r * r - 0.2 * r).exp() / (2.0 * r) * beta(r));
        let v = k.rho_kernel(xn, -0.2).unwrap();
        assert!(rel(v.value, re) < 5e-5, "{} vs {re}", v.value);
    }

    #[test]
    fn gamma_exponent_matches_direct_3d_quadrature() {
        let k = eval(0.1, 1.0);
        let (re, _) = direct_3d(1.0, 20.0, [0.0; 3], |r| (-0.1 * r * r).exp() / (r * r * r));
        let v = k.gamma_bound_exponent().unwrap();
        assert!(rel(v.value, re) < 5e-5, "{} vs {re}", v.value);
    }

    #[test]
    fn kernels_depend_on_t_through_its_modulus() {
        let k = eval(0.1, 1.0);
        for &(x, u) in &[(0.0, 0.4), (0.8, 1.3), (3.0, 0.05)] {
            assert_eq!(k.w_kernel(x, u).unwrap().value, k.w_kernel(x, -u).unwrap().value);
            assert_eq!(k.rho_kernel(x, u).unwrap().value, k.rho_kernel(x, -u).unwrap().value);
        }
    }

    #[test]
    fn w_at_origin_vanishes_as_eps_grows() {
        let mut prev = f64::INFINITY;
        for &eps in &[0.1, 1.0, 10.0, 100.0, 400.0] {
            let v = eval(eps, 1.0).w_kernel(0.0, 0.0).unwrap().value;
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        assert!(prev < 1e-150);
    }

    #[test]
    fn rho_on_axis_decreases_in_time() {
        let k = eval(0.1, 1.0);
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let v = k.rho_kernel(0.0, 0.25 * i as f64).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn rho_time_integral_matches_nested_quadrature() {
        let k = eval(0.1, 1.0);
        let nested = integrate(
            |u| k.rho_kernel(0.0, u).unwrap().value,
            0.0,
            8.0,
            &QuadratureConfig::default(),
        )
        .unwrap()
        .value;
        assert!(rel(k.rho_time_integral(8.0).unwrap().value, nested) < 1e-9);
        assert_eq!(k.rho_time_integral(0.0).unwrap().value, 0.0);
    }

    #[test]
    fn grad_rho_matches_finite_difference() {
        let k = eval(0.1, 1.0);
        let (g, _) = k.grad_rho([0.5, 0.0, 0.0], 0.3).unwrap();
        let h = 1e-4;
        let fd = (k.rho_kernel(0.5 + h, 0.3).unwrap().value - k.rho_kernel(0.5 - h, 0.3).unwrap().value)
            / (2.0 * h);
        assert!(rel(g[0], fd) < 1e-5, "{} vs {fd}", g[0]);
        assert_eq!(g[1], 0.0);
        assert_eq!(g[2], 0.0);
        let (z, _) = k.grad_rho([0.0; 3], 0.7).unwrap();
        assert_eq!(z, [0.0; 3]);
    }

    #[test]
    fn grad_rho_is_odd() {
        let k = eval(0.05, 0.5);
        let x = [0.3, -1.2, 0.7];
        let (a, _) = k.grad_rho(x, 0.2).unwrap();
        let (b, _) = k.grad_rho([-x[0], -x[1], -x[2]], 0.2).unwrap();
        for i in 0..3 {
            assert_eq!(a[i], -b[i]);
        }
    }

    #[test]
    fn renorm_energy_is_negative_and_diverges() {
        let mut prev = 0.0;
        for &eps in &[0.2, 0.1, 0.05] {
            let e = eval(eps, 1.0).renorm_energy().unwrap().value;
            assert!(e < 0.0);
            assert!(e.abs() > prev);
            prev = e.abs();
        }
    }

    #[test]
    fn renorm_energy_dual_route() {
        for &(eps, lam) in &[(0.1, 1.0), (0.02, 0.5)] {
            let k = eval(eps, lam);
            let a = k.renorm_energy().unwrap();
            let b = k.renorm_energy_direct().unwrap();
            assert!(rel(a.value, b.value) < 1e-10, "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn c_tau_limits() {
        let q = QuadratureConfig::default();
        let c0 = c_tau_with(0.0, 1.0, 1.0, &q).unwrap().value;
        assert!(rel(c0, 8.0 * PI * (-1.0f64).exp()) < 1e-12);
        assert!((c0 - 9.245_819).abs() < 1e-5);
        let k = eval(0.1, 1.0);
        let c01 = k.c_tau_at(1.0).unwrap().value;
        assert!(c01 < c0);
        let mut prev = f64::INFINITY;
        for tau in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let c = k.c_tau_at(tau).unwrap().value;
            assert!(c >= 0.0 && c < prev);
            prev = c;
        }
        assert!(prev < 1e-13);
        assert!(k.c_tau_at(0.0).is_err());
    }

    #[test]
    fn gamma_exponent_positive_and_decreasing_in_lambda() {
        let mut prev = f64::INFINITY;
        for lam in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let i = eval(0.1, lam).gamma_bound_exponent().unwrap().value;
            assert!(i > 0.0 && i < prev);
            prev = i;
        }
    }

    #[test]
    fn mean_w_integrates_to_rho_origin() {
        let k = eval(0.1, 1.0);
        let lhs = k.mean_w_integral().unwrap().value;
        let rhs = k.rho_origin().unwrap().value;
        assert!(rel(lhs, rhs) < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn mean_s_matches_swapped_order_closed_form() {
        // Integrating over the lag first in closed form:
        // 2 ∫_0^{2T} (2T-u) e^{-a u} du = 2 (L/a - (1 - e^{-aL})/a²), a = r + r²/2
        let k = eval(0.1, 1.0);
        let big_t = 4.0;
        let l = 2.0 * big_t;
        let cfg = QuadratureConfig::default();
        let oracle = integrate(
            |r| {
                let a = r + 0.5 * r * r;
                2.0 * PI * r * (-0.1 * r * r).exp() * 2.0 * (l / a - (1.0 - (-a * l).exp()) / (a * a))
            },
            1.0,
            30.0,
            &cfg,
        )
        .unwrap()
        .value;
        let v = k.mean_s_quadrature(big_t).unwrap().value;
        assert!(rel(v, oracle) < 1e-9, "{v} vs {oracle}");
        assert_eq!(k.mean_s_quadrature(0.0).unwrap().value, 0.0);
    }

    #[test]
    fn mean_s_per_unit_time_approaches_rho_origin() {
        let k = eval(0.1, 1.0);
        let rho = k.rho_origin().unwrap().value;
        let mut defects = Vec::new();
        for big_t in [4.0, 8.0, 16.0] {
            let m = k.mean_s_quadrature(big_t).unwrap().value / (4.0 * big_t);
            defects.push((rho - m, big_t));
        }
        for &(d, t) in &defects {
            assert!(d > 0.0);
            // O(1/T): T · defect is nearly constant
            let scaled = d * t;
            assert!((scaled - defects[2].0 * defects[2].1).abs() < 0.05 * scaled);
        }
    }

    #[test]
    fn error_estimates_respect_tolerance() {
        let k = eval(0.05, 1.0);
        let tol = |v: f64| k.quad().abs_tol + 2.0 * PI * k.quad().rel_tol * v.abs() * 10.0;
        for q in [
            k.w_kernel(0.0, 0.0).unwrap(),
            k.w_kernel(12.0, 0.1).unwrap(),
            k.rho_kernel(2.5, 0.3).unwrap(),
            k.rho_radial_derivative(0.7, 0.0).unwrap(),
            k.c_tau().unwrap(),
        ] {
            assert!(q.error <= tol(q.value), "{q:?}");
        }
    }

    #[test]
    fn non_finite_arguments_are_domain_errors() {
        let k = eval(0.1, 1.0);
        assert!(matches!(k.w_kernel(f64::NAN, 0.0), Err(KernelError::Domain(_))));
        assert!(matches!(k.rho_kernel(-1.0, 0.0), Err(KernelError::Domain(_))));
        assert!(matches!(k.w_kernel(0.0, f64::INFINITY), Err(KernelError::Domain(_))));
    }
}
