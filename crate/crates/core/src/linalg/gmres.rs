//! Restarted GMRES with left preconditioning.
//!
//! Fallback path for interface systems too large to materialize densely. The
//! operator and preconditioner are closures; the Hessenberg least-squares
//! problem is solved with Givens rotations.

use crate::error::{Error, Result};

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves A x = b where `apply` computes A v and `precond` applies an
/// approximate inverse M⁻¹. Convergence is on the preconditioned residual,
/// relative to the preconditioned right-hand side.
pub fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    restart: usize,
    max_outer: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = x0.to_vec();
    let mb = precond(b);
    let target = tol * norm(&mb).max(1e-300);

    for _ in 0..max_outer {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let mut r = precond(&r);
        let beta = norm(&r);
        if beta <= target {
            return Ok(x);
        }
        for v in &mut r {
            *v /= beta;
        }

        let m = restart;
        let mut basis: Vec<Vec<f64>> = vec![r];
        let mut h = vec![vec![0.0f64; m]; m + 1]; // h[i][j]
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for j in 0..m {
            let mut w = precond(&apply(&basis[j]));
            // modified Gram–Schmidt
            for i in 0..=j {
                let hij: f64 = w.iter().zip(&basis[i]).map(|(a, b)| a * b).sum();
                h[i][j] = hij;
                for (wv, bv) in w.iter_mut().zip(&basis[i]) {
                    *wv -= hij * bv;
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;
            // apply accumulated rotations to the new column
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + hnext * hnext).sqrt();
            if denom < 1e-300 {
                k_used = j;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = hnext / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            k_used = j + 1;

            let resid = g[j + 1].abs();
            if resid <= target || hnext < 1e-300 {
                break;
            }
            for v in &mut w {
                *v /= hnext;
            }
            basis.push(w);
        }

        // back substitution for the projected system
        let mut y = vec![0.0f64; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * basis[j][i];
            }
        }

        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        if norm(&precond(&r)) <= target {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        what: "gmres",
        iterations: max_outer,
    })
}
