//! Experiment configuration and the four packaged workflows.
//!
//! A JSON config picks a benchmark preset, interface resolution, probe seeds
//! and a transmission family; [`Workbench::build`] turns it into a live
//! problem. On top of that sit four workflows mirroring the CLI subcommands:
//!
//! * **probe** — run the probing algorithm, report fitted parameters and the
//!   exact solve bill;
//! * **sweep** — map the iteration's spectral radius over a parameter grid
//!   (the brute-force calibration the probing algorithm is judged against);
//! * **solve** — run the interface iteration with explicit parameters and
//!   report its convergence history;
//! * **compare** — benchmark the classical frequency calibration against the
//!   probed fits on equal footing.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_blocks, BlockSystem, PdeCoefficients, SideCoefficients,
};
use crate::error::{Error, Result};
use crate::linalg::dense_spectral_radius;
use crate::mesh::{build_strip_mesh, InterfaceGeometry, StructuredMesh};
use crate::osm::{
    dense_iteration_matrix_from, recover_field, ConvergenceMode, IterationReport, OsmEngine,
    OsmOptions,
};
use crate::probing::{
    random_pm_seeds, run_algorithm1, sine_probes, Algorithm1Config, ProbeReport, ProbeVector,
    SeedTag,
};
use crate::schur::{build_interface_problem, InterfaceProblem, SolveCounter};
use crate::transmission::{fourier_estimate, PhysicsConstants, TransmissionFamily};

/// Built-in benchmark problems.
///
/// JSON configs spell these in snake_case; the kebab-case spellings used by
/// the CLI `--preset` flag are accepted as aliases when reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// −Δu = 1 on two unit boxes with a straight interface; the interface
    /// operators are exactly sine-diagonalizable.
    #[serde(alias = "laplace-strip")]
    LaplaceStrip,
    /// Advection–diffusion–reaction with a 100:1 diffusion contrast across a
    /// sine-shaped interface; nothing commutes, the stress test.
    #[serde(alias = "curved-advection")]
    CurvedAdvection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    #[serde(alias = "robin_single")]
    RobinSingle,
    #[serde(alias = "robin_double")]
    RobinDouble,
    #[serde(alias = "second_order")]
    SecondOrder,
    #[serde(alias = "physics_rescaled")]
    PhysicsRescaled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeSpec {
    /// Low / middle / high interface sine modes, no enrichment needed.
    Sines3,
    /// Two random ±1 seeds (one low-, one high-tagged), enriched.
    Pm {
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Explicit probe vectors with tags "low" | "high" | "pass".
    Custom {
        vectors: Vec<Vec<f64>>,
        tags: Vec<String>,
    },
}

fn default_seed() -> u64 {
    1
}
fn default_enrich() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iterations() -> usize {
    200
}
fn default_dense_guard() -> usize {
    600
}
fn default_fourier_samples() -> usize {
    200
}
fn default_probes() -> ProbeSpec {
    ProbeSpec::Sines3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Number of interior interface nodes N_h.
    pub interface_nodes: usize,
    /// Horizontal intervals per subdomain; defaults to square-ish cells.
    #[serde(default)]
    pub nx_per_side: Option<usize>,
    pub family: FamilyKind,
    #[serde(default = "default_probes")]
    pub probes: ProbeSpec,
    #[serde(default = "default_enrich")]
    pub enrich_iterations: usize,
    #[serde(default)]
    pub dedupe: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_dense_guard")]
    pub dense_guard: usize,
    #[serde(default = "default_fourier_samples")]
    pub fourier_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn validate(&self) -> Result<()> {
        if self.interface_nodes < 3 {
            return Err(Error::Config(format!(
                "need at least 3 interface nodes, got {}",
                self.interface_nodes
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tol
            )));
        }
        if let ProbeSpec::Custom { vectors, tags } = &self.probes {
            if vectors.len() != tags.len() {
                return Err(Error::Config(format!(
                    "{} probe vectors but {} tags",
                    vectors.len(),
                    tags.len()
                )));
            }
        }
        Ok(())
    }

    /// Quick-start config for a preset at a given interface resolution.
    pub fn preset_default(preset: Preset, interface_nodes: usize) -> Self {
        let family = match preset {
            Preset::LaplaceStrip => FamilyKind::RobinDouble,
            Preset::CurvedAdvection => FamilyKind::PhysicsRescaled,
        };
        Self {
            preset,
            interface_nodes,
            nx_per_side: None,
            family,
            probes: default_probes(),
            enrich_iterations: default_enrich(),
            dedupe: false,
            tol: default_tol(),
            max_iterations: default_max_iterations(),
            dense_guard: default_dense_guard(),
            fourier_samples: default_fourier_samples(),
            seed: default_seed(),
        }
    }
}

/// PDE coefficients of a named preset (callers may swap the forcing fields
/// to study different right-hand sides on the same operators).
pub fn preset_coefficients(preset: Preset) -> PdeCoefficients {
    match preset {
        Preset::LaplaceStrip => PdeCoefficients::laplace(),
        Preset::CurvedAdvection => PdeCoefficients {
            side1: SideCoefficients {
                nu: Arc::new(|_, _| 1.0),
                advection: Arc::new(|x, y| [10.0 * (y + x * x), 0.0]),
                eta: Arc::new(|x, y| 0.1 * (x * x + y * y)),
                forcing: Arc::new(|x, y| x * x + y * y),
            },
            side2: SideCoefficients {
                nu: Arc::new(|_, _| 100.0),
                advection: Arc::new(|x, _| [10.0 * (1.0 - x), x]),
                eta: Arc::new(|_, _| 0.0),
                forcing: Arc::new(|x, y| x * x + y * y),
            },
        },
    }
}

/// Interface geometry of a named preset at the given resolution.
pub fn preset_geometry(preset: Preset, interface_nodes: usize) -> InterfaceGeometry {
    match preset {
        Preset::LaplaceStrip => InterfaceGeometry::Straight {
            samples: interface_nodes,
        },
        Preset::CurvedAdvection => InterfaceGeometry::SineCurve {
            amplitude: 0.4,
            frequency: 6,
            samples: interface_nodes,
        },
    }
}

/// Scalar interface symbol κ ↦ σ(κ), boxed so presets can close over
/// sampled coefficients.
pub type SymbolFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A built problem: mesh, block system, condensed interface problem and the
/// transmission family under study, sharing one solve counter.
pub struct Workbench {
    pub config: ExperimentConfig,
    pub mesh: StructuredMesh,
    pub system: BlockSystem,
    pub problem: InterfaceProblem,
    pub coefficients: PdeCoefficients,
    pub family: TransmissionFamily,
    pub counter: SolveCounter,
}

impl Workbench {
    pub fn build(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let ny = config.interface_nodes + 1;
        let nx = config.nx_per_side.unwrap_or(ny);
        let geometry = preset_geometry(config.preset, config.interface_nodes);
        let mesh = build_strip_mesh(-1.0, 1.0, &geometry, nx, ny)?;
        let coefficients = preset_coefficients(config.preset);
        let system = assemble_blocks(&mesh, &coefficients)?;
        let counter = SolveCounter::new();
        let problem = build_interface_problem(&system, &counter)?;

        let h = 1.0 / ny as f64;
        let x_mid = geometry.curve_x(0.5);
        let family = match config.family {
            FamilyKind::RobinSingle => TransmissionFamily::ScalarIdentitySingle,
            FamilyKind::RobinDouble => TransmissionFamily::ScalarIdentityDouble,
            FamilyKind::SecondOrder => TransmissionFamily::SecondOrder { h },
            FamilyKind::PhysicsRescaled => TransmissionFamily::PhysicsRescaled {
                side1: PhysicsConstants::sample(&coefficients.side1, x_mid, 0.5),
                side2: PhysicsConstants::sample(&coefficients.side2, x_mid, 0.5),
            },
        };
        Ok(Self {
            config,
            mesh,
            system,
            problem,
            coefficients,
            family,
            counter,
        })
    }

    pub fn interface_dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn seeds(&self) -> Result<Vec<ProbeVector>> {
        let n = self.interface_dim();
        match &self.config.probes {
            ProbeSpec::Sines3 => Ok(sine_probes(n)),
            ProbeSpec::Pm { seed } => Ok(random_pm_seeds(n, *seed)),
            ProbeSpec::Custom { vectors, tags } => {
                let mut seeds = Vec::with_capacity(vectors.len());
                for (v, t) in vectors.iter().zip(tags) {
                    if v.len() != n {
                        return Err(Error::DimensionMismatch {
                            context: "custom probe length",
                            expected: n,
                            got: v.len(),
                        });
                    }
                    let tag = match t.as_str() {
                        "low" => SeedTag::Low,
                        "high" => SeedTag::High,
                        "pass" => SeedTag::Pass,
                        other => {
                            return Err(Error::Config(format!(
                                "unknown probe tag {other:?} (expected low/high/pass)"
                            )))
                        }
                    };
                    seeds.push(ProbeVector {
                        values: v.clone(),
                        tag,
                    });
                }
                Ok(seeds)
            }
        }
    }

    pub fn algorithm_config(&self) -> Algorithm1Config {
        Algorithm1Config {
            enrich_iterations: self.config.enrich_iterations,
            dedupe: self.config.dedupe,
            ..Algorithm1Config::default()
        }
    }

    pub fn osm_options(&self) -> OsmOptions {
        OsmOptions {
            tol: self.config.tol,
            max_iterations: self.config.max_iterations,
            mode: ConvergenceMode::ErrorToReference,
            dense_guard: self.config.dense_guard,
            ..OsmOptions::default()
        }
    }

    /// Frequency band resolved by the interface grid.
    pub fn frequency_band(&self) -> (f64, f64) {
        let h = 1.0 / (self.interface_dim() as f64 + 1.0);
        (std::f64::consts::PI, std::f64::consts::PI / h)
    }

    /// Per-side interface symbols used by the classical calibration: the flat
    /// Laplace benchmark exposes the exact κ scale, the curved benchmark the
    /// frozen-coefficient physics of each side.
    pub fn fourier_symbols(&self) -> (SymbolFn, SymbolFn) {
        match self.config.preset {
            Preset::LaplaceStrip => (Box::new(|k| k), Box::new(|k| k)),
            Preset::CurvedAdvection => {
                let x_mid = preset_geometry(self.config.preset, self.config.interface_nodes)
                    .curve_x(0.5);
                let c1 = PhysicsConstants::sample(&self.coefficients.side1, x_mid, 0.5);
                let c2 = PhysicsConstants::sample(&self.coefficients.side2, x_mid, 0.5);
                (
                    Box::new(move |k| c1.symbol_left(k)),
                    Box::new(move |k| c2.symbol_right(k)),
                )
            }
        }
    }

    /// Deterministic random start for iteration runs.
    pub fn random_start(&self, offset: u64) -> Vec<f64> {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(offset));
        (0..self.interface_dim())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect()
    }
}

/// Probe workflow output.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeOutcome {
    pub report: ProbeReport,
    pub param_names: Vec<String>,
}

pub fn cmd_probe(bench: &Workbench) -> Result<ProbeOutcome> {
    let seeds = bench.seeds()?;
    let report = run_algorithm1(
        &bench.problem.sigma1,
        &bench.problem.sigma2,
        &seeds,
        &bench.family,
        &bench.algorithm_config(),
    )?;
    Ok(ProbeOutcome {
        report,
        param_names: bench
            .family
            .param_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Per-parameter lower bounds (log-spaced grid).
    pub min: Vec<f64>,
    /// Per-parameter upper bounds.
    pub max: Vec<f64>,
    /// Grid points per parameter.
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub best_params: Vec<f64>,
    pub best_rho: f64,
}

/// Maps the dense spectral radius of the iteration operator over a log grid
/// of family parameters. The interface operators are materialized once.
pub fn cmd_sweep(bench: &Workbench, spec: &SweepSpec) -> Result<SweepResult> {
    let d = bench.family.param_count();
    if spec.min.len() != d || spec.max.len() != d {
        return Err(Error::DimensionMismatch {
            context: "sweep bounds arity",
            expected: d,
            got: spec.min.len().min(spec.max.len()),
        });
    }
    if spec.points < 2 {
        return Err(Error::Config(format!(
            "sweep needs at least 2 points per parameter, got {}",
            spec.points
        )));
    }
    for i in 0..d {
        if !(spec.min[i] > 0.0 && spec.max[i] > spec.min[i]) {
            return Err(Error::Config(format!(
                "sweep bounds must satisfy 0 < min < max, got [{}, {}]",
                spec.min[i], spec.max[i]
            )));
        }
    }
    let guard = bench.config.dense_guard;
    let sigma1 = bench.problem.sigma1.materialize(guard)?;
    let sigma2 = bench.problem.sigma2.materialize(guard)?;
    let n = bench.interface_dim();

    let total = spec.points.pow(d as u32);
    let rows: Vec<SweepRow> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut params = Vec::with_capacity(d);
            let mut rest = flat;
            for i in 0..d {
                let idx = rest % spec.points;
                rest /= spec.points;
                let t = idx as f64 / (spec.points - 1) as f64;
                params.push(spec.min[i] * (spec.max[i] / spec.min[i]).powf(t));
            }
            let rho = match bench.family.realize(&params, n) {
                Ok((t1, t2)) => {
                    match dense_iteration_matrix_from(&sigma1, &sigma2, &t1, &t2) {
                        Ok(t) => dense_spectral_radius(&t),
                        Err(_) => f64::NAN,
                    }
                }
                Err(_) => f64::NAN,
            };
            SweepRow { params, rho }
        })
        .collect();

    let mut best_params = Vec::new();
    let mut best_rho = f64::INFINITY;
    for row in &rows {
        if row.rho.is_finite() && row.rho < best_rho {
            best_rho = row.rho;
            best_params = row.params.clone();
        }
    }
    if best_params.is_empty() {
        return Err(Error::ObjectiveNotFinite);
    }
    Ok(SweepResult {
        rows,
        best_params,
        best_rho,
    })
}

/// Exact spectral radius of the interface iteration operator at the given
/// family parameters (materializes both interface operators, dense
/// eigenvalue oracle — intended for validation, not production runs).
pub fn exact_spectral_radius(bench: &Workbench, params: &[f64]) -> Result<f64> {
    let guard = bench.config.dense_guard;
    let sigma1 = bench.problem.sigma1.materialize(guard)?;
    let sigma2 = bench.problem.sigma2.materialize(guard)?;
    let (t1, t2) = bench.family.realize(params, bench.interface_dim())?;
    let t = dense_iteration_matrix_from(&sigma1, &sigma2, &t1, &t2)?;
    Ok(dense_spectral_radius(&t))
}

/// Solve workflow output: the convergence report plus the reconstructed
/// nodal field.
#[derive(Debug, Clone, Serialize)]
pub struct SolveOutcome {
    pub params: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub rho_estimate: Option<f64>,
    pub solve_count: u64,
    pub error_history: Vec<f64>,
    #[serde(skip)]
    pub field: Vec<f64>,
}

pub fn cmd_solve(bench: &Workbench, params: &[f64]) -> Result<SolveOutcome> {
    let (t1, t2) = bench.family.realize(params, bench.interface_dim())?;
    let engine = OsmEngine::new(&bench.problem, t1, t2, bench.osm_options())?;
    let report = engine.run(&bench.random_start(17))?;
    let lambda = match engine.reference_interface() {
        Some(reference) if report.converged => reference,
        _ => return field_from_report(report, params),
    };
    let field = recover_field(&bench.mesh, &bench.system, &bench.problem, &lambda)?;
    Ok(SolveOutcome {
        params: params.to_vec(),
        iterations: report.iterations,
        converged: report.converged,
        diverged: report.diverged,
        rho_estimate: report.rho_estimate,
        solve_count: report.solve_count_delta,
        error_history: report.error_history,
        field,
    })
}

fn field_from_report(report: IterationReport, params: &[f64]) -> Result<SolveOutcome> {
    Ok(SolveOutcome {
        params: params.to_vec(),
        iterations: report.iterations,
        converged: report.converged,
        diverged: report.diverged,
        rho_estimate: report.rho_estimate,
        solve_count: report.solve_count_delta,
        error_history: report.error_history,
        field: Vec::new(),
    })
}

/// One line of the method comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub params: Vec<f64>,
    /// Subdomain solves spent calibrating the parameters.
    pub calibration_solves: u64,
    /// What the calibration itself predicts for the contraction factor.
    pub predicted_rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Contraction observed while iterating.
    pub observed_rho: Option<f64>,
}

/// Benchmarks the classical frequency-domain calibration against probed fits
/// (frequency-targeted sine probes and enriched random seeds) on the same
/// problem, same family, same iteration settings.
pub fn cmd_compare(bench: &Workbench) -> Result<Vec<CompareRow>> {
    let (kmin, kmax) = bench.frequency_band();
    let (s1, s2) = bench.fourier_symbols();
    let mut rows = Vec::new();

    let fourier = fourier_estimate(
        &bench.family,
        s1.as_ref(),
        s2.as_ref(),
        kmin,
        kmax,
        bench.config.fourier_samples,
    )?;
    rows.push(run_comparison_row(
        bench,
        "fourier",
        fourier.params,
        0,
        fourier.rho,
    )?);

    for (label, seeds) in [
        ("probe-sines3", sine_probes(bench.interface_dim())),
        (
            "probe-pm",
            random_pm_seeds(bench.interface_dim(), bench.config.seed),
        ),
    ] {
        let before = bench.counter.get();
        let report = run_algorithm1(
            &bench.problem.sigma1,
            &bench.problem.sigma2,
            &seeds,
            &bench.family,
            &bench.algorithm_config(),
        )?;
        debug_assert_eq!(report.total_solves(), bench.counter.get() - before);
        let calibration_solves = report.total_solves();
        rows.push(run_comparison_row(
            bench,
            label,
            report.params,
            calibration_solves,
            report.objective,
        )?);
    }
    Ok(rows)
}

fn run_comparison_row(
    bench: &Workbench,
    method: &str,
    params: Vec<f64>,
    calibration_solves: u64,
    predicted_rho: f64,
) -> Result<CompareRow> {
    let (t1, t2) = bench.family.realize(&params, bench.interface_dim())?;
    let engine = OsmEngine::new(&bench.problem, t1, t2, bench.osm_options())?;
    let report = engine.run(&bench.random_start(101))?;
    Ok(CompareRow {
        method: method.to_string(),
        params,
        calibration_solves,
        predicted_rho,
        iterations: report.iterations,
        converged: report.converged,
        observed_rho: report.rho_estimate,
    })
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{:.12e}", v)
    } else {
        String::from("nan")
    }
}

/// RFC-4180-style CSV: comma separated, CRLF line endings, quotes only where
/// needed (none of the emitted fields need them).
fn write_csv_line(w: &mut impl Write, fields: &[String]) -> std::io::Result<()> {
    write!(w, "{}\r\n", fields.join(","))
}

pub fn sweep_to_csv(bench: &Workbench, result: &SweepResult, w: &mut impl Write) -> Result<()> {
    let mut header: Vec<String> = bench
        .family
        .param_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.push("rho".into());
    write_csv_line(w, &header)?;
    for row in &result.rows {
        let mut fields: Vec<String> = row.params.iter().map(|p| fmt_float(*p)).collect();
        fields.push(fmt_float(row.rho));
        write_csv_line(w, &fields)?;
    }
    Ok(())
}

pub fn history_to_csv(outcome: &SolveOutcome, w: &mut impl Write) -> Result<()> {
    write_csv_line(w, &["iteration".into(), "relative_error".into()])?;
    for (i, e) in outcome.error_history.iter().enumerate() {
        write_csv_line(w, &[i.to_string(), fmt_float(*e)])?;
    }
    Ok(())
}

pub fn compare_to_csv(rows: &[CompareRow], w: &mut impl Write) -> Result<()> {
    write_csv_line(
        w,
        &[
            "method".into(),
            "params".into(),
            "calibration_solves".into(),
            "predicted_rho".into(),
            "iterations".into(),
            "converged".into(),
            "observed_rho".into(),
        ],
    )?;
    for row in rows {
        let params = row
            .params
            .iter()
            .map(|p| fmt_float(*p))
            .collect::<Vec<_>>()
            .join(";");
        write_csv_line(
            w,
            &[
                row.method.clone(),
                params,
                row.calibration_solves.to_string(),
                fmt_float(row.predicted_rho),
                row.iterations.to_string(),
                row.converged.to_string(),
                row.observed_rho.map_or("nan".into(), fmt_float),
            ],
        )?;
    }
    Ok(())
}

/// Nodal field dump: `x y value` per mesh node.
pub fn field_to_text(mesh: &StructuredMesh, field: &[f64], w: &mut impl Write) -> Result<()> {
    if field.len() != mesh.nodes.len() {
        return Err(Error::DimensionMismatch {
            context: "field length",
            expected: mesh.nodes.len(),
            got: field.len(),
        });
    }
    writeln!(w, "# x y value")?;
    for (p, v) in mesh.nodes.iter().zip(field) {
        writeln!(w, "{:.12e} {:.12e} {:.12e}", p[0], p[1], v)?;
    }
    Ok(())
}
