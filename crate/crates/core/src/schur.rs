//! Interface Schur-complement operators and the reduced interface problem.
//!
//! Eliminating the interior unknowns of subdomain i condenses the coupled
//! system onto the interface: Σᵢ = AᵢΓΓ − AᵢΓI (AᵢII)⁻¹ AᵢIΓ together with the
//! condensed load μᵢ = fᵢΓ − AᵢΓI (AᵢII)⁻¹ fᵢ, and the coupled solution
//! satisfies (Σ₁ + Σ₂) u_Γ = μ₁ + μ₂. Thanks to the interface normalization
//! applied during assembly, Σᵢ approximates the subdomain
//! Dirichlet-to-Neumann map, with eigenvalues on the kπ frequency scale.
//!
//! Both the forward action (one interior Dirichlet-type solve) and the
//! inverse action (one subdomain solve with free interface) are exposed; a
//! shared [`SolveCounter`] tallies every subdomain solve so algorithms built
//! on top can report their exact cost.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::assembly::{assemble_neumann_variant, BlockSystem, SubdomainOperator};
use crate::error::{Error, Result};
use crate::linalg::{Factorization, SparseMatrix};

/// Shared tally of subdomain solves. Clones observe the same count.
#[derive(Clone, Default)]
pub struct SolveCounter(Arc<AtomicU64>);

impl SolveCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
}

/// One subdomain's interface operator Σᵢ with its factorized solvers.
pub struct SchurOperator {
    pub side: u8,
    a_ig: SparseMatrix,
    a_gi: SparseMatrix,
    a_gg: SparseMatrix,
    interior_fact: Factorization,
    neumann: SubdomainOperator,
    f_i: Vec<f64>,
    f_g: Vec<f64>,
    counter: SolveCounter,
}

impl SchurOperator {
    pub fn new(system: &BlockSystem, side: u8, counter: SolveCounter) -> Result<Self> {
        let (a_ii, a_ig, a_gi, a_gg) = system.blocks(side);
        let interior_fact = Factorization::new(a_ii)?;
        let neumann = assemble_neumann_variant(system, side)?;
        Ok(Self {
            side,
            a_ig: a_ig.clone(),
            a_gi: a_gi.clone(),
            a_gg: a_gg.clone(),
            interior_fact,
            neumann,
            f_i: system.interior_load(side).to_vec(),
            f_g: system.interface_load(side).to_vec(),
            counter,
        })
    }

    /// Interface dimension.
    pub fn dim(&self) -> usize {
        self.a_gg.nrows()
    }

    pub fn counter(&self) -> &SolveCounter {
        &self.counter
    }

    /// Σ x. Costs one interior solve.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.counter.bump();
        let t = self.a_ig.matvec(x);
        let w = self.interior_fact.solve(&t);
        let mut y = self.a_gg.matvec(x);
        self.a_gi.matvec_sub(&w, &mut y);
        y
    }

    /// Σ⁻¹ y via one subdomain solve with a free (flux-loaded) interface.
    pub fn apply_inverse(&self, y: &[f64]) -> Vec<f64> {
        self.counter.bump();
        let n = self.neumann.matrix.nrows();
        let mut rhs = vec![0.0; n];
        for (idx, &pos) in self.neumann.interface_pos.iter().enumerate() {
            rhs[pos] = y[idx];
        }
        self.neumann.factorization.solve_in_place(&mut rhs);
        self.neumann
            .interface_pos
            .iter()
            .map(|&pos| rhs[pos])
            .collect()
    }

    /// Condensed interface load μ = f_Γ − A_ΓI A_II⁻¹ f_I. One interior solve.
    pub fn interface_load(&self) -> Vec<f64> {
        self.counter.bump();
        let w = self.interior_fact.solve(&self.f_i);
        let mut mu = self.f_g.clone();
        self.a_gi.matvec_sub(&w, &mut mu);
        mu
    }

    /// Interior field given interface values (in the normalized interface
    /// basis): u_I = A_II⁻¹ (f_I − A_IΓ λ). One interior solve.
    pub fn interior_solve(&self, lambda: &[f64]) -> Vec<f64> {
        self.counter.bump();
        let mut rhs = self.f_i.clone();
        self.a_ig.matvec_sub(lambda, &mut rhs);
        self.interior_fact.solve(&rhs)
    }

    /// Interior field of the homogeneous problem (f = 0) given interface
    /// values; used when iterating on the error equation. One interior solve.
    pub fn interior_solve_homogeneous(&self, lambda: &[f64]) -> Vec<f64> {
        self.counter.bump();
        let t = self.a_ig.matvec(lambda);
        let mut u = self.interior_fact.solve(&t);
        for v in u.iter_mut() {
            *v = -*v;
        }
        u
    }

    /// Dense Σ, built column by column (costs `dim` interior solves). Guarded
    /// so huge interfaces are not materialized by accident.
    pub fn materialize(&self, guard: usize) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if n > guard {
            return Err(Error::MaterializeGuard { dim: n, guard });
        }
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        Ok(m)
    }
}

/// The condensed two-sided interface problem (Σ₁ + Σ₂) u_Γ = μ₁ + μ₂.
pub struct InterfaceProblem {
    pub sigma1: SchurOperator,
    pub sigma2: SchurOperator,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
}

impl InterfaceProblem {
    pub fn dim(&self) -> usize {
        self.sigma1.dim()
    }

    pub fn sigma(&self, side: u8) -> &SchurOperator {
        match side {
            1 => &self.sigma1,
            2 => &self.sigma2,
            _ => panic!("side must be 1 or 2"),
        }
    }

    /// Combined load μ₁ + μ₂.
    pub fn mu(&self) -> Vec<f64> {
        self.mu1
            .iter()
            .zip(&self.mu2)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Builds both Schur operators over a shared counter and condenses the loads
/// (two interior solves).
pub fn build_interface_problem(
    system: &BlockSystem,
    counter: &SolveCounter,
) -> Result<InterfaceProblem> {
    let sigma1 = SchurOperator::new(system, 1, counter.clone())?;
    let sigma2 = SchurOperator::new(system, 2, counter.clone())?;
    let mu1 = sigma1.interface_load();
    let mu2 = sigma2.interface_load();
    Ok(InterfaceProblem {
        sigma1,
        sigma2,
        mu1,
        mu2,
    })
}

/// Closed-form eigenvalues of the normalized interface operator for the
/// five-point discretization of −Δ on a unit-height strip of square cells
/// (`nx` horizontal intervals on the subdomain, vertical spacing `h`).
/// The eigenvectors are the interface sine modes sin(kπ·jh).
pub fn strip_laplace_eigenvalue(k: usize, nx: usize, h: f64) -> f64 {
    let xi = (2.0 - (k as f64 * std::f64::consts::PI * h).cos()).acosh();
    xi.sinh() / (nx as f64 * xi).tanh() / h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_blocks, assemble_monolithic, PdeCoefficients};
    use crate::mesh::{build_strip_mesh, InterfaceGeometry};

    fn laplace_problem(n: usize) -> (crate::mesh::StructuredMesh, BlockSystem) {
        let geo = InterfaceGeometry::Straight { samples: n - 1 };
        let mesh = build_strip_mesh(-1.0, 1.0, &geo, n, n).unwrap();
        let system = assemble_blocks(&mesh, &PdeCoefficients::laplace()).unwrap();
        (mesh, system)
    }

    #[test]
    fn sine_modes_are_exact_eigenvectors() {
        let n = 16;
        let (_, system) = laplace_problem(n);
        let counter = SolveCounter::new();
        let h = 1.0 / n as f64;
        for side in [1u8, 2] {
            let sigma = SchurOperator::new(&system, side, counter.clone()).unwrap();
            for k in 1..n {
                let v: Vec<f64> = (1..n)
                    .map(|j| (k as f64 * std::f64::consts::PI * j as f64 * h).sin())
                    .collect();
                let sv = sigma.apply(&v);
                let lambda = strip_laplace_eigenvalue(k, n, h);
                for (a, b) in sv.iter().zip(&v) {
                    assert!(
                        (a - lambda * b).abs() < 1e-9 * lambda,
                        "side {side} mode {k}: {a} vs {}",
                        lambda * b
                    );
                }
            }
        }
    }

    #[test]
    fn eigenvalues_approach_the_continuous_frequency_scale() {
        // λ_k → kπ coth(kπ) ≈ kπ as h → 0 on the width-1 subdomain
        let n = 128;
        let h = 1.0 / n as f64;
        for k in [1usize, 4, 16] {
            let lambda = strip_laplace_eigenvalue(k, n, h);
            let kpi = k as f64 * std::f64::consts::PI;
            let target = kpi / kpi.tanh();
            assert!(
                (lambda - target).abs() < 0.02 * target,
                "k = {k}: {lambda} vs {target}"
            );
        }
    }

    #[test]
    fn advective_interface_responses_split_by_flow_direction() {
        // constant ν = 1, a = (5, 0), η = 0 on both halves of the strip: the
        // decaying half-space mode e^{λx} sin(κy) gives interface responses
        // √(κ² + a₁²/4) + a₁/2 on the left subdomain and − a₁/2 on the right,
        // so the two Schur operators must separate by a₁ on a sine probe.
        let n = 48;
        let geo = InterfaceGeometry::Straight { samples: n - 1 };
        let mesh = build_strip_mesh(-1.0, 1.0, &geo, n, n).unwrap();
        let side = || crate::assembly::SideCoefficients::constant(1.0, [5.0, 0.0], 0.0, 0.0);
        let coeffs = PdeCoefficients {
            side1: side(),
            side2: side(),
        };
        let system = assemble_blocks(&mesh, &coeffs).unwrap();
        let counter = SolveCounter::new();
        let s1 = SchurOperator::new(&system, 1, counter.clone()).unwrap();
        let s2 = SchurOperator::new(&system, 2, counter.clone()).unwrap();

        let h = 1.0 / n as f64;
        let k = 3usize;
        let kappa = k as f64 * std::f64::consts::PI;
        let v: Vec<f64> = (1..n).map(|j| (kappa * j as f64 * h).sin()).collect();
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let rayleigh = |sv: &[f64]| sv.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / vv;
        let q1 = rayleigh(&s1.apply(&v));
        let q2 = rayleigh(&s2.apply(&v));

        let root = (kappa * kappa + 6.25).sqrt();
        let left = root + 2.5;
        let right = root - 2.5;
        assert!(
            (q1 - left).abs() < 0.05 * left,
            "side 1 response {q1} vs half-space value {left}"
        );
        assert!(
            (q2 - right).abs() < 0.05 * right,
            "side 2 response {q2} vs half-space value {right}"
        );
        assert!(
            ((q1 - q2) - 5.0).abs() < 0.5,
            "advective split {} should be ≈ a₁ = 5",
            q1 - q2
        );
    }

    #[test]
    fn inverse_round_trips_through_forward_action() {
        let (_, system) = laplace_problem(12);
        let counter = SolveCounter::new();
        for side in [1u8, 2] {
            let sigma = SchurOperator::new(&system, side, counter.clone()).unwrap();
            let y: Vec<f64> = (0..sigma.dim()).map(|j| (j as f64 * 0.7).cos()).collect();
            let x = sigma.apply_inverse(&y);
            let yy = sigma.apply(&x);
            for (a, b) in yy.iter().zip(&y) {
                assert!((a - b).abs() < 1e-9, "side {side}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn materialized_operator_is_symmetric_with_closed_form_spectrum() {
        let n = 16;
        let (_, system) = laplace_problem(n);
        let sigma = SchurOperator::new(&system, 1, SolveCounter::new()).unwrap();
        let m = sigma.materialize(100).unwrap();
        let asym = (&m - m.transpose()).abs().max();
        assert!(asym < 1e-10, "asymmetry {asym}");
        let mut eigs: Vec<f64> = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = 1.0 / n as f64;
        let mut expected: Vec<f64> = (1..n).map(|k| strip_laplace_eigenvalue(k, n, h)).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eigs.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn materialize_guard_rejects_large_interfaces() {
        let (_, system) = laplace_problem(8);
        let sigma = SchurOperator::new(&system, 1, SolveCounter::new()).unwrap();
        match sigma.materialize(4) {
            Err(Error::MaterializeGuard { dim, guard }) => {
                assert_eq!(dim, 7);
                assert_eq!(guard, 4);
            }
            _ => panic!("guard did not trigger"),
        }
    }

    #[test]
    fn solve_counter_tallies_every_subdomain_solve() {
        let (_, system) = laplace_problem(8);
        let counter = SolveCounter::new();
        let sigma = SchurOperator::new(&system, 1, counter.clone()).unwrap();
        assert_eq!(counter.get(), 0);
        let x = vec![1.0; sigma.dim()];
        sigma.apply(&x);
        assert_eq!(counter.get(), 1);
        sigma.apply_inverse(&x);
        assert_eq!(counter.get(), 2);
        sigma.interface_load();
        assert_eq!(counter.get(), 3);
        sigma.interior_solve(&x);
        assert_eq!(counter.get(), 4);
        sigma.materialize(100).unwrap();
        assert_eq!(counter.get(), 4 + sigma.dim() as u64);
        counter.reset();
        assert_eq!(counter.get(), 0);
    }

    #[test]
    fn condensed_problem_matches_monolithic_trace() {
        let n = 12;
        let geo = InterfaceGeometry::Straight { samples: n - 1 };
        let mesh = build_strip_mesh(-1.0, 1.0, &geo, n, n).unwrap();
        let coeffs = PdeCoefficients::laplace();
        let system = assemble_blocks(&mesh, &coeffs).unwrap();
        let problem = build_interface_problem(&system, &SolveCounter::new()).unwrap();

        let mono = assemble_monolithic(&mesh, &coeffs).unwrap();
        let field = mono.solve_field(mesh.nodes.len()).unwrap();
        let weights = mesh.interface_weights();
        // the condensed unknown carries the D^{1/2} normalization
        let u_gamma: Vec<f64> = mesh
            .interface_order
            .iter()
            .zip(&weights)
            .map(|(&node, d)| field[node] * d.sqrt())
            .collect();

        let mut residual = problem.sigma1.apply(&u_gamma);
        let s2 = problem.sigma2.apply(&u_gamma);
        let mu = problem.mu();
        let mut norm_mu = 0.0f64;
        let mut norm_res = 0.0f64;
        for i in 0..u_gamma.len() {
            residual[i] += s2[i] - mu[i];
            norm_res += residual[i] * residual[i];
            norm_mu += mu[i] * mu[i];
        }
        assert!(
            norm_res.sqrt() <= 1e-10 * norm_mu.sqrt(),
            "relative interface residual {}",
            norm_res.sqrt() / norm_mu.sqrt()
        );
    }
}
