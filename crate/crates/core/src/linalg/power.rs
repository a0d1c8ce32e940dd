//! Spectral-radius estimation.
//!
//! Power iteration on a matrix-free operator, with the estimate taken as the
//! geometric mean of the last few norm-growth ratios. The averaging damps the
//! oscillation caused by complex-conjugate dominant eigenvalue pairs, for
//! which the raw per-step ratio never settles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Window length for the geometric-mean damping of growth ratios.
const RATIO_WINDOW: usize = 10;
/// Number of consecutive damped estimates inspected for convergence.
const ESTIMATE_WINDOW: usize = 5;

#[derive(Debug, Clone)]
pub struct SpectralRadiusEstimate {
    pub value: f64,
    /// Relative spread of the damped estimate over the last few iterations.
    pub variation: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn geometric_mean(window: &[f64]) -> f64 {
    let s: f64 = window.iter().map(|r| r.ln()).sum();
    (s / window.len() as f64).exp()
}

/// Estimates the spectral radius of the operator `apply` acting on vectors of
/// length `dim`. Starts from a seeded random vector; if the iteration does not
/// settle within `max_it` applications the best estimate is returned with
/// `converged == false`.
pub fn spectral_radius(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    dim: usize,
    tol: f64,
    max_it: usize,
    seed: u64,
) -> SpectralRadiusEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nx = norm(&x);
    for v in &mut x {
        *v /= nx;
    }

    let mut ratios: Vec<f64> = Vec::new();
    let mut estimates: Vec<f64> = Vec::new();
    let mut iterations = 0;
    while iterations < max_it {
        iterations += 1;
        let y = apply(&x);
        let a = norm(&y);
        if !a.is_finite() || a < 1e-300 {
            // the operator annihilated the iterate: nilpotent or zero action
            return SpectralRadiusEstimate {
                value: 0.0,
                variation: 0.0,
                iterations,
                converged: a.is_finite(),
            };
        }
        x = y;
        for v in &mut x {
            *v /= a;
        }
        ratios.push(a);
        let lo = ratios.len().saturating_sub(RATIO_WINDOW);
        let est = geometric_mean(&ratios[lo..]);
        estimates.push(est);
        if ratios.len() >= RATIO_WINDOW && estimates.len() >= ESTIMATE_WINDOW {
            let recent = &estimates[estimates.len() - ESTIMATE_WINDOW..];
            let max = recent.iter().cloned().fold(f64::MIN, f64::max);
            let min = recent.iter().cloned().fold(f64::MAX, f64::min);
            let variation = (max - min) / est.max(1e-300);
            if variation <= tol {
                return SpectralRadiusEstimate {
                    value: est,
                    variation,
                    iterations,
                    converged: true,
                };
            }
        }
    }
    let value = *estimates.last().unwrap_or(&0.0);
    let variation = if estimates.len() >= ESTIMATE_WINDOW {
        let recent = &estimates[estimates.len() - ESTIMATE_WINDOW..];
        let max = recent.iter().cloned().fold(f64::MIN, f64::max);
        let min = recent.iter().cloned().fold(f64::MAX, f64::min);
        (max - min) / value.max(1e-300)
    } else {
        f64::INFINITY
    };
    SpectralRadiusEstimate {
        value,
        variation,
        iterations,
        converged: false,
    }
}

/// Exact spectral radius of a dense matrix via its complex eigenvalues.
/// Reserved for materialized desk-scale operators and brute-force oracles.
pub fn dense_spectral_radius(a: &nalgebra::DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}
