//! Derivative-free simplex minimization.
//!
//! Standard Nelder–Mead with reflection 1, expansion 2, contraction 0.5 and
//! shrink 0.5, plus one unconditional restart from the best point with a
//! fresh simplex. The restart costs little at the dimensions used here (one
//! or two parameters) and reliably escapes the collapsed-simplex stalls that
//! min-max objectives tend to cause.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex, in optimization coordinates.
    pub scale: f64,
    /// Convergence threshold on the simplex diameter.
    pub tol: f64,
    /// Evaluation budget per pass (the restart gets the same budget).
    pub max_eval: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            scale: 0.5,
            tol: 1e-9,
            max_eval: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

// reflection / expansion / contraction / shrink
const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const BETA: f64 = 0.5;
const SIGMA: f64 = 0.5;

struct Pass<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> f64,
    evaluations: usize,
}

impl<'a> Pass<'a> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn run(
        &mut self,
        x0: &[f64],
        opts: &NelderMeadOptions,
    ) -> Result<(Vec<f64>, f64, bool)> {
        let n = x0.len();
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += opts.scale;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| self.eval(v)).collect();
        if values.iter().all(|v| !v.is_finite()) {
            return Err(Error::ObjectiveNotFinite);
        }

        let budget = self.evaluations + opts.max_eval;
        let mut converged = false;
        loop {
            // order best..worst
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
            let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
            let revalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
            simplex = reordered;
            values = revalues;

            let diameter = simplex[1..]
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(&simplex[0])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0f64, f64::max);
            if diameter <= opts.tol {
                converged = true;
                break;
            }
            if self.evaluations >= budget {
                break;
            }

            // centroid of all but the worst
            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let worst = values[n];
            let second_worst = values[n - 1];
            let best = values[0];

            let reflect: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + ALPHA * (c - w))
                .collect();
            let fr = self.eval(&reflect);

            if fr < best {
                let expand: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + GAMMA * (c - w))
                    .collect();
                let fe = self.eval(&expand);
                if fe < fr {
                    simplex[n] = expand;
                    values[n] = fe;
                } else {
                    simplex[n] = reflect;
                    values[n] = fr;
                }
            } else if fr < second_worst {
                simplex[n] = reflect;
                values[n] = fr;
            } else {
                // contraction, outside or inside depending on the reflection
                let (base, fbase) = if fr < worst {
                    (reflect.clone(), fr)
                } else {
                    (simplex[n].clone(), worst)
                };
                let contract: Vec<f64> = centroid
                    .iter()
                    .zip(&base)
                    .map(|(c, w)| c + BETA * (w - c))
                    .collect();
                let fc = self.eval(&contract);
                if fc < fbase {
                    simplex[n] = contract;
                    values[n] = fc;
                } else {
                    // shrink toward the best vertex
                    for i in 1..=n {
                        let shrunk: Vec<f64> = simplex[0]
                            .iter()
                            .zip(&simplex[i])
                            .map(|(b, v)| b + SIGMA * (v - b))
                            .collect();
                        values[i] = self.eval(&shrunk);
                        simplex[i] = shrunk;
                    }
                }
            }
        }

        let mut best_idx = 0;
        for i in 1..=n {
            if values[i] < values[best_idx] {
                best_idx = i;
            }
        }
        Ok((simplex[best_idx].clone(), values[best_idx], converged))
    }
}

/// Minimizes `f` starting from `x0`. NaN objective values are treated as +inf
/// (worst); an initial simplex that is non-finite everywhere is an error.
/// After the first pass converges or exhausts its budget, one restart from
/// the best point with a fresh simplex of half the original scale is run.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Result<NelderMeadResult> {
    let mut pass = Pass { f, evaluations: 0 };
    let (x1, v1, c1) = pass.run(x0, opts)?;
    let restart_opts = NelderMeadOptions {
        scale: opts.scale * 0.5,
        ..opts.clone()
    };
    let (x2, v2, c2) = pass.run(&x1, &restart_opts)?;
    let (x, value, converged) = if v2 <= v1 { (x2, v2, c2) } else { (x1, v1, c1) };
    Ok(NelderMeadResult {
        x,
        value,
        evaluations: pass.evaluations,
        converged,
    })
}
