//! Lowest eigenpair of a large sparse symmetric operator by restarted
//! Lanczos. Each cycle runs the three-term recurrence twice: once for the
//! tridiagonal coefficients, once more to assemble the Ritz vector, so no
//! Krylov basis is stored.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FockError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LanczosOptions {
    pub steps_per_cycle: usize,
    pub max_cycles: usize,
    /// Target for `‖Av - θv‖ / ‖v‖`.
    pub tolerance: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            steps_per_cycle: 80,
            max_cycles: 200,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub cycles: usize,
    pub matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// One pass of the recurrence from the unit vector `start`. With `ritz`
/// given, accumulates `Σ ritz[i] v_i` into `acc` instead of returning new
/// coefficients.
fn recurrence(
    apply: &dyn Fn(&[f64], &mut [f64]),
    start: &[f64],
    steps: usize,
    ritz: Option<(&[f64], &mut [f64])>,
) -> (Vec<f64>, Vec<f64>) {
    let n = start.len();
    let mut v = start.to_vec();
    let mut v_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let (coef, mut acc) = match ritz {
        Some((c, a)) => (Some(c), Some(a)),
        None => (None, None),
    };
    let limit = coef.map_or(steps, |c| c.len());
    let mut beta_prev = 0.0;
    for i in 0..limit {
        if let (Some(c), Some(a)) = (coef, acc.as_deref_mut()) {
            a.iter_mut().zip(&v).for_each(|(x, vi)| *x += c[i] * vi);
            if i + 1 == limit {
                break;
            }
        }
        apply(&v, &mut w);
        let a = dot(&w, &v);
        for j in 0..n {
            w[j] -= a * v[j] + beta_prev * v_prev[j];
        }
        let b = norm(&w);
        alpha.push(a);
        if b <= 1e-14 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        std::mem::swap(&mut v_prev, &mut v);
        for j in 0..n {
            v[j] = w[j] / b;
        }
        beta_prev = b;
    }
    (alpha, beta)
}

/// Smallest eigenpair of the symmetric operator `apply`, started from `start`.
pub fn lowest_eigenpair(
    apply: &dyn Fn(&[f64], &mut [f64]),
    start: &[f64],
    opts: &LanczosOptions,
) -> Result<Eigenpair, FockError> {
    let n = start.len();
    let s = norm(start);
    if !(s > 0.0) {
        return Err(FockError::Config("start vector must be nonzero".into()));
    }
    let mut x: Vec<f64> = start.iter().map(|v| v / s).collect();
    let mut ax = vec![0.0; n];
    let mut matvecs = 0;
    let mut residual = f64::INFINITY;
    let mut theta = 0.0;
    for cycle in 1..=opts.max_cycles {
        let (alpha, beta) = recurrence(apply, &x, opts.steps_per_cycle, None);
        let m = alpha.len();
        matvecs += m;
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let imin = (0..m)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .expect("nonempty");
        let y: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
        let mut next = vec![0.0; n];
        recurrence(apply, &x, m, Some((&y, &mut next)));
        matvecs += m.saturating_sub(1);
        let nn = norm(&next);
        next.iter_mut().for_each(|v| *v /= nn);
        x = next;
        apply(&x, &mut ax);
        matvecs += 1;
        theta = dot(&x, &ax);
        let r: f64 = ax.iter().zip(&x).map(|(a, v)| (a - theta * v).powi(2)).sum();
        residual = r.sqrt();
        if residual <= opts.tolerance {
            return Ok(Eigenpair {
                value: theta,
                vector: x,
                residual,
                cycles: cycle,
                matvecs,
            });
        }
    }
    Err(FockError::NotConverged {
        value: theta,
        residual,
        cycles: opts.max_cycles,
    })
}
