//! The alternating interface iteration and its convergence diagnostics.
//!
//! Given transmission operators (Σ̃₁, Σ̃₂) the double-sweep iteration reads
//!   (Σ̃₁ + Σ₁) λ^{n+1/2} = μ + (Σ̃₁ − Σ₂) λ^n
//!   (Σ̃₂ + Σ₂) λ^{n+1}   = μ + (Σ̃₂ − Σ₁) λ^{n+1/2},
//! whose fixed point solves the condensed problem (Σ₁ + Σ₂) λ = μ and whose
//! error contracts by T = (Σ̃₂+Σ₂)⁻¹(Σ̃₂−Σ₁)(Σ̃₁+Σ₁)⁻¹(Σ̃₁−Σ₂) per sweep.
//! Σ̃₁ = Σ₂ annihilates T, i.e. the iteration finishes in a single sweep —
//! the ideal the fitted transmission conditions chase.
//!
//! Small interfaces are materialized and iterated densely (with the exact
//! reference solution available for error tracking); larger ones run matrix
//! free, solving each half sweep with restarted GMRES preconditioned by the
//! transmission operator itself.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{gmres, spectral_radius, SpectralRadiusEstimate};
use crate::schur::InterfaceProblem;
use crate::transmission::TransmissionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceMode {
    /// Track ‖λⁿ − λ*‖ against the exact interface solution.
    ErrorToReference,
    /// Track the condensed residual ‖(Σ₁+Σ₂)λⁿ − μ‖.
    Residual,
}

#[derive(Debug, Clone)]
pub struct OsmOptions {
    /// Stop when the tracked quantity falls below `tol` times its initial
    /// value.
    pub tol: f64,
    pub max_iterations: usize,
    pub mode: ConvergenceMode,
    /// Interfaces up to this size are materialized and iterated densely.
    pub dense_guard: usize,
    /// Declare divergence when the tracked quantity exceeds this multiple of
    /// its running minimum.
    pub divergence_factor: f64,
}

impl Default for OsmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 200,
            mode: ConvergenceMode::ErrorToReference,
            dense_guard: 600,
            divergence_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    /// Full double sweeps executed.
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// Tracked quantity relative to its initial value, entry per iteration
    /// starting at 1.0.
    pub error_history: Vec<f64>,
    /// Geometric mean of the last few contraction ratios.
    pub rho_estimate: Option<f64>,
    /// Subdomain solves spent inside this run.
    pub solve_count_delta: u64,
    pub final_error: f64,
}

struct DensePath {
    sigma1: DMatrix<f64>,
    sigma2: DMatrix<f64>,
    c1: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    c2: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    coupled: DMatrix<f64>,
    reference: DVector<f64>,
}

/// Runs and measures the double-sweep iteration for one realized
/// transmission pair.
pub struct OsmEngine<'a> {
    problem: &'a InterfaceProblem,
    t1: TransmissionMatrix,
    t2: TransmissionMatrix,
    options: OsmOptions,
    mu: Vec<f64>,
    dense: Option<DensePath>,
    /// Reference interface solution when running matrix-free in
    /// error-to-reference mode.
    iterative_reference: Option<Vec<f64>>,
}

impl<'a> OsmEngine<'a> {
    pub fn new(
        problem: &'a InterfaceProblem,
        t1: TransmissionMatrix,
        t2: TransmissionMatrix,
        options: OsmOptions,
    ) -> Result<Self> {
        let n = problem.dim();
        if t1.dim() != n || t2.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "transmission operator size",
                expected: n,
                got: t1.dim().min(t2.dim()),
            });
        }
        let mu = problem.mu();
        let mut dense = None;
        let mut iterative_reference = None;
        if n <= options.dense_guard {
            let sigma1 = problem.sigma1.materialize(options.dense_guard)?;
            let sigma2 = problem.sigma2.materialize(options.dense_guard)?;
            let c1 = (t1.to_dense() + &sigma1).lu();
            let c2 = (t2.to_dense() + &sigma2).lu();
            let coupled = &sigma1 + &sigma2;
            let reference = coupled
                .clone()
                .lu()
                .solve(&DVector::from_column_slice(&mu))
                .ok_or(Error::SingularNeumannOperator {
                    side: 0,
                    detail: "condensed interface matrix is singular".into(),
                })?;
            dense = Some(DensePath {
                sigma1,
                sigma2,
                c1,
                c2,
                coupled,
                reference,
            });
        } else if options.mode == ConvergenceMode::ErrorToReference {
            // one-time iterative reference solve
            let sol = gmres(
                |v| {
                    let mut y = problem.sigma1.apply(v);
                    for (a, b) in y.iter_mut().zip(problem.sigma2.apply(v)) {
                        *a += b;
                    }
                    y
                },
                |r| t1.solve(r).unwrap_or_else(|_| r.to_vec()),
                &mu,
                &vec![0.0; n],
                (options.tol * 1e-3).max(1e-13),
                30,
                200,
            )?;
            iterative_reference = Some(sol);
        }
        Ok(Self {
            problem,
            t1,
            t2,
            options,
            mu,
            dense,
            iterative_reference,
        })
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// Exact solution of the condensed interface problem, when available
    /// without extra work.
    pub fn reference_interface(&self) -> Option<Vec<f64>> {
        if let Some(d) = &self.dense {
            Some(d.reference.iter().cloned().collect())
        } else {
            self.iterative_reference.clone()
        }
    }

    fn half_sweep(
        &self,
        first: bool,
        lambda: &[f64],
        homogeneous: bool,
    ) -> Result<Vec<f64>> {
        let n = lambda.len();
        let (tm, own, other) = if first {
            (&self.t1, &self.problem.sigma1, &self.problem.sigma2)
        } else {
            (&self.t2, &self.problem.sigma2, &self.problem.sigma1)
        };
        // rhs = μ + (Σ̃ − Σ_other) λ
        let mut rhs = tm.apply(lambda);
        if let Some(d) = &self.dense {
            let other_d = if first { &d.sigma2 } else { &d.sigma1 };
            let ol = other_d * DVector::from_column_slice(lambda);
            for i in 0..n {
                rhs[i] -= ol[i];
                if !homogeneous {
                    rhs[i] += self.mu[i];
                }
            }
            let lu = if first { &d.c1 } else { &d.c2 };
            let sol = lu
                .solve(&DVector::from_column_slice(&rhs))
                .ok_or(Error::SingularNeumannOperator {
                    side: if first { 1 } else { 2 },
                    detail: "transmission-shifted interface matrix is singular".into(),
                })?;
            Ok(sol.iter().cloned().collect())
        } else {
            let ol = other.apply(lambda);
            for i in 0..n {
                rhs[i] -= ol[i];
                if !homogeneous {
                    rhs[i] += self.mu[i];
                }
            }
            gmres(
                |v| {
                    let mut y = tm.apply(v);
                    for (a, b) in y.iter_mut().zip(own.apply(v)) {
                        *a += b;
                    }
                    y
                },
                |r| tm.solve(r).unwrap_or_else(|_| r.to_vec()),
                &rhs,
                lambda,
                (self.options.tol * 1e-2).max(1e-13),
                30,
                100,
            )
        }
    }

    /// One application of the error-propagation operator T (the homogeneous
    /// double sweep).
    pub fn iteration_operator_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let half = self.half_sweep(true, v, true)?;
        self.half_sweep(false, &half, true)
    }

    /// Dense T, available on the materialized path.
    pub fn dense_iteration_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.dense.as_ref().ok_or(Error::MaterializeGuard {
            dim: self.problem.dim(),
            guard: self.options.dense_guard,
        })?;
        dense_iteration_matrix_from(&d.sigma1, &d.sigma2, &self.t1, &self.t2)
    }

    /// Power-iteration estimate of ρ(T); on the matrix-free path every
    /// iteration spends subdomain solves.
    pub fn estimated_spectral_radius(
        &self,
        tol: f64,
        max_iterations: usize,
        seed: u64,
    ) -> Result<SpectralRadiusEstimate> {
        let n = self.problem.dim();
        let mut failure: Option<Error> = None;
        let est = spectral_radius(
            |v| match self.iteration_operator_apply(v) {
                Ok(y) => y,
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![f64::NAN; v.len()]
                }
            },
            n,
            tol,
            max_iterations,
            seed,
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(est),
        }
    }

    fn tracked_error(&self, lambda: &[f64]) -> f64 {
        match self.options.mode {
            ConvergenceMode::ErrorToReference => {
                let reference = if let Some(d) = &self.dense {
                    d.reference.as_slice()
                } else {
                    self.iterative_reference
                        .as_deref()
                        .expect("reference exists in error mode")
                };
                lambda
                    .iter()
                    .zip(reference)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            }
            ConvergenceMode::Residual => {
                if let Some(d) = &self.dense {
                    let r = &d.coupled * DVector::from_column_slice(lambda)
                        - DVector::from_column_slice(&self.mu);
                    r.norm()
                } else {
                    let mut r = self.problem.sigma1.apply(lambda);
                    let s2 = self.problem.sigma2.apply(lambda);
                    r.iter_mut()
                        .zip(s2.iter().zip(&self.mu))
                        .map(|(a, (b, m))| {
                            *a += b - m;
                            *a * *a
                        })
                        .sum::<f64>()
                        .sqrt()
                }
            }
        }
    }

    /// Iterates from `lambda0` until the tracked error drops below tol
    /// relative to its starting value, the budget runs out, or divergence is
    /// detected.
    pub fn run(&self, lambda0: &[f64]) -> Result<IterationReport> {
        let n = self.problem.dim();
        if lambda0.len() != n {
            return Err(Error::DimensionMismatch {
                context: "initial interface iterate",
                expected: n,
                got: lambda0.len(),
            });
        }
        let counter = self.problem.sigma1.counter().clone();
        let solves_at_start = counter.get();
        let mut lambda = lambda0.to_vec();
        let e0 = self.tracked_error(&lambda);
        let mut history = vec![1.0f64];
        if e0 <= 1e-300 {
            return Ok(IterationReport {
                iterations: 0,
                converged: true,
                diverged: false,
                error_history: history,
                rho_estimate: None,
                solve_count_delta: counter.get() - solves_at_start,
                final_error: 0.0,
            });
        }
        let mut converged = false;
        let mut diverged = false;
        let mut iterations = 0;
        let mut running_min = 1.0f64;
        while iterations < self.options.max_iterations {
            let half = self.half_sweep(true, &lambda, false)?;
            lambda = self.half_sweep(false, &half, false)?;
            iterations += 1;
            let rel = self.tracked_error(&lambda) / e0;
            history.push(rel);
            if !rel.is_finite() || rel > self.options.divergence_factor * running_min {
                diverged = true;
                break;
            }
            running_min = running_min.min(rel);
            if rel <= self.options.tol {
                converged = true;
                break;
            }
        }
        let final_error = *history.last().unwrap();
        let mut ratios = Vec::new();
        for w in history.windows(2) {
            if w[0] > 0.0 && w[1] > 0.0 {
                let r = w[1] / w[0];
                if r.is_finite() {
                    ratios.push(r);
                }
            }
        }
        let tail = ratios.len().min(5);
        let rho_estimate = if tail == 0 {
            None
        } else {
            let log_mean = ratios[ratios.len() - tail..]
                .iter()
                .map(|r| r.ln())
                .sum::<f64>()
                / tail as f64;
            Some(log_mean.exp())
        };
        Ok(IterationReport {
            iterations,
            converged,
            diverged,
            error_history: history,
            rho_estimate,
            solve_count_delta: counter.get() - solves_at_start,
            final_error,
        })
    }
}

/// Builds the dense error-propagation matrix T from already materialized
/// interface operators; the workhorse of parameter sweeps, where the two
/// materializations are paid once and every grid point reuses them.
pub fn dense_iteration_matrix_from(
    sigma1: &DMatrix<f64>,
    sigma2: &DMatrix<f64>,
    t1: &TransmissionMatrix,
    t2: &TransmissionMatrix,
) -> Result<DMatrix<f64>> {
    let c1 = (t1.to_dense() + sigma1).lu();
    let c2 = (t2.to_dense() + sigma2).lu();
    let d1 = t1.to_dense() - sigma2;
    let d2 = t2.to_dense() - sigma1;
    let inner = c1.solve(&d1).ok_or(Error::SingularNeumannOperator {
        side: 1,
        detail: "transmission-shifted interface matrix is singular".into(),
    })?;
    c2.solve(&(d2 * inner)).ok_or(Error::SingularNeumannOperator {
        side: 2,
        detail: "transmission-shifted interface matrix is singular".into(),
    })
}

/// Reconstructs the full nodal field from a converged interface iterate:
/// interior values by one solve per subdomain, interface values by undoing
/// the interface normalization.
pub fn recover_field(
    mesh: &crate::mesh::StructuredMesh,
    system: &crate::assembly::BlockSystem,
    problem: &InterfaceProblem,
    lambda: &[f64],
) -> Result<Vec<f64>> {
    if lambda.len() != system.n_interface() {
        return Err(Error::DimensionMismatch {
            context: "interface values",
            expected: system.n_interface(),
            got: lambda.len(),
        });
    }
    let mut field = vec![0.0f64; mesh.nodes.len()];
    let u1 = problem.sigma1.interior_solve(lambda);
    let u2 = problem.sigma2.interior_solve(lambda);
    for (idx, &node) in system.interior1.iter().enumerate() {
        field[node] = u1[idx];
    }
    for (idx, &node) in system.interior2.iter().enumerate() {
        field[node] = u2[idx];
    }
    for (idx, &node) in system.interface.iter().enumerate() {
        field[node] = lambda[idx] / system.interface_weights[idx].sqrt();
    }
    Ok(field)
}
