//! Jacobi-preconditioned conjugate gradients for `(αI − βΔ_h) x = b`.
//!
//! With mirror ghosts the discrete Laplacian is symmetric negative
//! semidefinite, so the operator is SPD for any `α > 0, β ≥ 0`.

use crate::grid::{self, Field};

use super::{SimError, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn apply(x: &Field, alpha: f64, beta: f64) -> Field {
    let mut out = grid::laplacian(x);
    for (o, &xi) in out.values_mut().iter_mut().zip(x.values()) {
        *o = alpha * xi - beta * *o;
    }
    out
}

fn diagonal(b: &Field, alpha: f64, beta: f64) -> Vec<f64> {
    let grid = b.grid();
    let mut diag = vec![alpha; grid.len()];
    for (axis, &h) in grid.spacing().iter().enumerate() {
        let w = beta / (h * h);
        grid.for_each_face(axis, |l, r| {
            diag[l] += w;
            diag[r] += w;
        });
    }
    diag
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `(αI − βΔ_h) x = b` until `‖b − Ax‖∞ ≤ tol·max(1, ‖b‖∞)`.
pub fn solve_helmholtz(
    b: &Field,
    alpha: f64,
    beta: f64,
    guess: Option<&Field>,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, SolveStats), SimError> {
    assert!(alpha > 0.0 && beta >= 0.0);
    let target = tol * inf_norm(b.values()).max(1.0);
    let diag = diagonal(b, alpha, beta);

    let mut x = match guess {
        Some(g) => g.clone(),
        None => b.map(|v| v / alpha),
    };
    let residual_of = |x: &Field| -> Vec<f64> {
        let ax = apply(x, alpha, beta);
        b.values().iter().zip(ax.values()).map(|(bi, ai)| bi - ai).collect()
    };
    let mut r = residual_of(&x);
    let mut res = inf_norm(&r);
    if !res.is_finite() {
        return Err(SimError::NoConvergence {
            iterations: 0,
            residual: res,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = Field::from_values(b.grid(), z.clone()).expect("same grid");
    let mut rz = dot(&r, &z);

    for iteration in 0..=max_iter {
        if res <= target {
            // Guard against drift of the recursive residual.
            let true_r = residual_of(&x);
            let true_res = inf_norm(&true_r);
            if true_res <= target {
                return Ok((
                    x,
                    SolveStats {
                        iterations: iteration,
                        residual: true_res,
                    },
                ));
            }
            r = true_r;
            z = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
            rz = dot(&r, &z);
            p.values_mut().copy_from_slice(&z);
        }
        if iteration == max_iter {
            break;
        }
        let ap = apply(&p, alpha, beta);
        let pap = dot(p.values(), ap.values());
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        for (xi, pi) in x.values_mut().iter_mut().zip(p.values()) {
            *xi += step * pi;
        }
        for (ri, api) in r.iter_mut().zip(ap.values()) {
            *ri -= step * api;
        }
        res = inf_norm(&r);
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&diag) {
            *zi = ri / di;
        }
        let rz_next = dot(&r, &z);
        let ratio = rz_next / rz;
        rz = rz_next;
        for (pi, zi) in p.values_mut().iter_mut().zip(&z) {
            *pi = zi + ratio * *pi;
        }
    }
    Err(SimError::NoConvergence {
        iterations: max_iter,
        residual: inf_norm(&residual_of(&x)),
    })
}

/// Solves `(I − Δ_h) v = u` with zero-flux closure.
///
/// For nonnegative `u` the exact discrete solution is nonnegative; entries
/// that the iteration leaves below zero are within the solve tolerance and
/// are set to zero.
pub fn solve_elliptic(u: &Field, cfg: &SolverConfig) -> Result<Field, SimError> {
    solve_elliptic_from(u, None, cfg)
}

pub(crate) fn solve_elliptic_from(
    u: &Field,
    guess: Option<&Field>,
    cfg: &SolverConfig,
) -> Result<Field, SimError> {
    let (mut v, _) = solve_helmholtz(u, 1.0, 1.0, guess, cfg.elliptic_tol, cfg.elliptic_max_iter)?;
    if u.values().iter().all(|&x| x >= 0.0) {
        for x in v.values_mut() {
            *x = x.max(0.0);
        }
    }
    Ok(v)
}
