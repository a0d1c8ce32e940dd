//! Cross-module invariants and randomized property suites: probe-order
//! invariance of the fitted parameters, the zero-solve cost of the fitting
//! stage, interface-operator round trips, linearity of the iteration
//! operator, and deterministic data output.

use std::sync::OnceLock;

use proptest::prelude::*;

use osmprobe_core::assembly::{
    assemble_blocks, assemble_monolithic, PdeCoefficients, SideCoefficients,
};
use osmprobe_core::experiment::{ExperimentConfig, Preset, Workbench};
use osmprobe_core::mesh::{build_strip_mesh, InterfaceGeometry};
use osmprobe_core::osm::{OsmEngine, OsmOptions};
use osmprobe_core::probing::{
    objective_opt1, random_pm_seeds, run_algorithm1, sine_probes, Algorithm1Config, ProbeVector,
};
use osmprobe_core::schur::{build_interface_problem, SolveCounter};
use osmprobe_core::transmission::TransmissionFamily;

fn flat_bench() -> &'static Workbench {
    static BENCH: OnceLock<Workbench> = OnceLock::new();
    BENCH.get_or_init(|| {
        Workbench::build(ExperimentConfig::preset_default(Preset::LaplaceStrip, 18)).unwrap()
    })
}

fn curved_bench() -> &'static Workbench {
    static BENCH: OnceLock<Workbench> = OnceLock::new();
    BENCH.get_or_init(|| {
        Workbench::build(ExperimentConfig::preset_default(Preset::CurvedAdvection, 14)).unwrap()
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn condensed_interface_matches_monolithic_solve_with_variable_coefficients() {
    // smooth non-constant coefficients on a flat strip: the condensed
    // interface problem and the one-pass monolithic assembly must agree on
    // the interface trace
    let n = 14;
    let geo = InterfaceGeometry::Straight { samples: n - 1 };
    let mesh = build_strip_mesh(-1.0, 1.0, &geo, n, n).unwrap();
    let coeffs = PdeCoefficients {
        side1: SideCoefficients {
            nu: std::sync::Arc::new(|x, y| 1.0 + 0.3 * (x * y).sin()),
            advection: std::sync::Arc::new(|x, y| [2.0 * y, -1.5 * x]),
            eta: std::sync::Arc::new(|x, _| 0.2 + 0.1 * x * x),
            forcing: std::sync::Arc::new(|x, y| (2.0 * x + y).cos()),
        },
        side2: SideCoefficients {
            nu: std::sync::Arc::new(|_, y| 2.0 + y),
            advection: std::sync::Arc::new(|_, _| [-1.0, 0.5]),
            eta: std::sync::Arc::new(|_, _| 0.0),
            forcing: std::sync::Arc::new(|x, y| x - y),
        },
    };
    let system = assemble_blocks(&mesh, &coeffs).unwrap();
    let problem = build_interface_problem(&system, &SolveCounter::new()).unwrap();

    let mono = assemble_monolithic(&mesh, &coeffs).unwrap();
    let field = mono.solve_field(mesh.nodes.len()).unwrap();
    let weights = mesh.interface_weights();
    let u_gamma: Vec<f64> = mesh
        .interface_order
        .iter()
        .zip(&weights)
        .map(|(&node, &w)| field[node] * w.sqrt())
        .collect();

    let lhs: Vec<f64> = problem
        .sigma1
        .apply(&u_gamma)
        .iter()
        .zip(problem.sigma2.apply(&u_gamma))
        .map(|(a, b)| a + b)
        .collect();
    let mu = problem.mu();
    let defect: f64 = lhs
        .iter()
        .zip(&mu)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(
        defect <= 1e-9 * norm(&mu),
        "interface defect {defect:.3e} vs load norm {:.3e}",
        norm(&mu)
    );
}

#[test]
fn fitted_parameters_ignore_probe_ordering() {
    let bench = flat_bench();
    let n = bench.interface_dim();
    let family = TransmissionFamily::ScalarIdentityDouble;
    let config = Algorithm1Config::default();

    let mut seeds: Vec<ProbeVector> = sine_probes(n);
    seeds.extend(random_pm_seeds(n, 5));

    let reference = run_algorithm1(
        &bench.problem.sigma1,
        &bench.problem.sigma2,
        &seeds,
        &family,
        &config,
    )
    .unwrap();

    // a few fixed shuffles plus full reversal
    let orders: Vec<Vec<usize>> = vec![
        vec![4, 2, 0, 3, 1],
        vec![1, 3, 4, 0, 2],
        (0..seeds.len()).rev().collect(),
    ];
    for order in orders {
        let shuffled: Vec<ProbeVector> = order.iter().map(|&i| seeds[i].clone()).collect();
        let report = run_algorithm1(
            &bench.problem.sigma1,
            &bench.problem.sigma2,
            &shuffled,
            &family,
            &config,
        )
        .unwrap();
        assert!(
            (report.objective - reference.objective).abs()
                <= 1e-12 * reference.objective.abs().max(1e-30),
            "objective changed under reordering: {} vs {}",
            report.objective,
            reference.objective
        );
        for (a, b) in report.params.iter().zip(&reference.params) {
            assert!(
                (a - b).abs() <= 1e-9 * b.abs(),
                "params changed under reordering: {:?} vs {:?}",
                report.params,
                reference.params
            );
        }
    }
}

#[test]
fn fitting_stage_costs_no_subdomain_solves() {
    let bench = flat_bench();
    let n = bench.interface_dim();
    let family = TransmissionFamily::ScalarIdentityDouble;

    let counter = &bench.counter;
    let before = counter.get();
    let report = run_algorithm1(
        &bench.problem.sigma1,
        &bench.problem.sigma2,
        &random_pm_seeds(n, 3),
        &family,
        &Algorithm1Config::default(),
    )
    .unwrap();
    let spent = counter.get() - before;
    assert_eq!(report.solves_step3, 0);
    assert_eq!(
        spent,
        report.solves_step1 + report.solves_step2,
        "all counted solves must come from enrichment and responses"
    );

    // replaying the objective at arbitrary parameters reuses stored
    // responses: the counter must not move
    let probes: Vec<Vec<f64>> = sine_probes(n).into_iter().map(|p| p.values).collect();
    let r1: Vec<Vec<f64>> = probes.iter().map(|p| bench.problem.sigma1.apply(p)).collect();
    let r2: Vec<Vec<f64>> = probes.iter().map(|p| bench.problem.sigma2.apply(p)).collect();
    let frozen = counter.get();
    for i in 1..=50 {
        let s = i as f64;
        let value = objective_opt1(&family, &[s, 2.0 * s], &probes, &r1, &r2);
        assert!(value.is_finite());
    }
    assert_eq!(counter.get(), frozen, "objective evaluation took solves");
}

#[test]
fn cli_outputs_are_byte_reproducible() {
    use std::process::Command;
    let exe = env!("CARGO_BIN_EXE_osmprobe");
    let dir = tempfile::tempdir().unwrap();

    let run = |args: &[&str], out: &std::path::Path| {
        let status = Command::new(exe)
            .args(args)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "command {:?} failed: {}",
            args,
            String::from_utf8_lossy(&status.stderr)
        );
        std::fs::read(out).unwrap()
    };

    let sweep_args = [
        "sweep",
        "--preset",
        "laplace-strip",
        "--interface-nodes",
        "12",
        "--min",
        "2,2",
        "--max",
        "60,60",
        "--points",
        "6",
    ];
    let a = run(&sweep_args, &dir.path().join("sweep-a.csv"));
    let b = run(&sweep_args, &dir.path().join("sweep-b.csv"));
    assert!(!a.is_empty() && a == b, "sweep CSV not reproducible");

    let probe_args = ["probe", "--preset", "laplace-strip", "--interface-nodes", "12"];
    let a = run(&probe_args, &dir.path().join("probe-a.json"));
    let b = run(&probe_args, &dir.path().join("probe-b.json"));
    assert!(!a.is_empty() && a == b, "probe JSON not reproducible");

    let compare_args = ["compare", "--preset", "laplace-strip", "--interface-nodes", "12"];
    let a = run(&compare_args, &dir.path().join("compare-a.csv"));
    let b = run(&compare_args, &dir.path().join("compare-b.csv"));
    assert!(!a.is_empty() && a == b, "compare CSV not reproducible");
}

#[test]
fn cli_rejects_bad_input_with_distinct_exit_codes() {
    use std::process::Command;
    let exe = env!("CARGO_BIN_EXE_osmprobe");

    // wrong parameter arity for the family: configuration error
    let out = Command::new(exe)
        .args(["solve", "--preset", "laplace-strip", "--interface-nodes", "10", "--params", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // unreadable config file: I/O error
    let out = Command::new(exe)
        .args(["probe", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    })]

    #[test]
    fn interface_operators_round_trip(seed in 0u64..1000) {
        use rand::Rng;
        use rand::SeedableRng;
        for bench in [flat_bench(), curved_bench()] {
            let n = bench.interface_dim();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            for side in [1u8, 2] {
                let sigma = bench.problem.sigma(side);
                let there = sigma.apply_inverse(&y);
                let back = sigma.apply(&there);
                let defect: f64 = back
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                prop_assert!(
                    defect <= 1e-9 * norm(&y).max(1e-30),
                    "side {} round-trip defect {:.3e}",
                    side,
                    defect
                );
            }
        }
    }

    #[test]
    fn iteration_operator_is_linear(
        seed in 0u64..1000,
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        use rand::Rng;
        use rand::SeedableRng;
        let bench = flat_bench();
        let n = bench.interface_dim();
        let (t1, t2) = TransmissionFamily::ScalarIdentityDouble
            .realize(&[6.0, 30.0], n)
            .unwrap();
        let engine = OsmEngine::new(&bench.problem, t1, t2, OsmOptions::default()).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();

        let tx = engine.iteration_operator_apply(&x).unwrap();
        let ty = engine.iteration_operator_apply(&y).unwrap();
        let tmixed = engine.iteration_operator_apply(&mixed).unwrap();

        let scale = norm(&tx).max(norm(&ty)).max(1.0);
        for i in 0..n {
            let expected = alpha * tx[i] + beta * ty[i];
            prop_assert!(
                (tmixed[i] - expected).abs() <= 1e-12 * scale.max(expected.abs()),
                "nonlinearity at {}: {} vs {}",
                i,
                tmixed[i],
                expected
            );
        }
    }

    #[test]
    fn sweep_csv_is_deterministic_in_process(points in 3usize..6) {
        use osmprobe_core::experiment::{cmd_sweep, sweep_to_csv, SweepSpec};
        let bench = flat_bench();
        let spec = SweepSpec {
            min: vec![2.0, 2.0],
            max: vec![80.0, 80.0],
            points,
        };
        let mut first = Vec::new();
        sweep_to_csv(bench, &cmd_sweep(bench, &spec).unwrap(), &mut first).unwrap();
        let mut second = Vec::new();
        sweep_to_csv(bench, &cmd_sweep(bench, &spec).unwrap(), &mut second).unwrap();
        prop_assert!(first == second, "parallel sweep produced different bytes");
    }
}
