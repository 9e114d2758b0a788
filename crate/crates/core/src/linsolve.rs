//! Matrix-free conjugate gradients for `(alpha I - beta Δ_h) x = b`.
//!
//! With Neumann ghosts the operator is a symmetric M-matrix for `alpha > 0`,
//! `beta >= 0`, so its inverse is entrywise nonnegative and CG converges.

use crate::error::{Error, Result};
use crate::grid::{laplacian_into, Grid};

pub(crate) struct Helmholtz<'a> {
    grid: &'a Grid,
    alpha: f64,
    beta: f64,
}

impl<'a> Helmholtz<'a> {
    pub(crate) fn new(grid: &'a Grid, alpha: f64, beta: f64) -> Self {
        debug_assert!(alpha > 0.0 && beta >= 0.0);
        Helmholtz { grid, alpha, beta }
    }

    fn apply(&self, x: &[f64], lap: &mut [f64], out: &mut [f64]) {
        laplacian_into(self.grid, x, lap);
        for ((o, &xi), &li) in out.iter_mut().zip(x).zip(lap.iter()) {
            *o = self.alpha * xi - self.beta * li;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        (0..g.len())
            .map(|i| {
                let mut d = self.alpha;
                for a in 0..g.dim() {
                    let inv_h2 = 1.0 / (g.spacing()[a] * g.spacing()[a]);
                    let nb = g.upper(i, a).is_some() as u32 + g.lower(i, a).is_some() as u32;
                    d += self.beta * nb as f64 * inv_h2;
                }
                d
            })
            .collect()
    }

    /// Jacobi-preconditioned CG; stops when ‖r‖₂ <= tol·‖b‖₂.
    pub(crate) fn solve(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
        let n = b.len();
        let b_norm = norm(b);
        if b_norm == 0.0 {
            return Ok((vec![0.0; n], 0));
        }
        let target = tol * b_norm;
        let inv_diag: Vec<f64> = self.diagonal().iter().map(|d| 1.0 / d).collect();
        let mut x: Vec<f64> = b.iter().map(|v| v / self.alpha).collect();
        let mut lap = vec![0.0; n];
        let mut ap = vec![0.0; n];
        self.apply(&x, &mut lap, &mut ap);
        let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
        let mut res = norm(&r);
        if res <= target {
            return Ok((x, 0));
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for it in 1..=max_iter {
            self.apply(&p, &mut lap, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let step = rz / pap;
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi += step * pi;
            }
            for (ri, ai) in r.iter_mut().zip(&ap) {
                *ri -= step * ai;
            }
            res = norm(&r);
            if res <= target {
                return Ok((x, it));
            }
            for ((zi, ri), di) in z.iter_mut().zip(&r).zip(&inv_diag) {
                *zi = ri * di;
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        Err(Error::LinearSolver {
            iterations: max_iter,
            residual: res / b_norm,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
