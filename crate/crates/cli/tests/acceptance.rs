//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one pass/fail line (visible with `--nocapture`); a failing criterion fails
//! its test.
//!
//! Criteria 1-2 reproduce the worked two-by-two instance end to end, 3 pins
//! the stochastic closed form, 4 the duality equality, 5-6 randomized kernel
//! and marginal invariants, 7-8 the law of large numbers for both samplers,
//! 9 the uniform convergence of the iterated operator, and 10 the preimage
//! enumeration oracle against the matrix route.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ergotrans::elton::{classical_chain, plan_chain, run_birkhoff_many};
use ergotrans::oracle;
use ergotrans::symbolic::{Alphabet, WindowState, Word};
use ergotrans::testfn::TestFunction;
use ergotrans::transfer::{
    build_transfer_matrix, dominant_eigenpair, normalize_potential, transfer_iterate,
    LocallyConstantPotential,
};
use ergotrans::transport::{
    build_plan_kernel, conic_coefficients, plan_pressure, recover_marginal_weight, solve_dual,
    CostPair, PlanKernel,
};

fn ab2() -> Alphabet {
    Alphabet::new(2).unwrap()
}

fn window(symbols: &[u8]) -> WindowState {
    WindowState::new(ab2(), symbols.to_vec()).unwrap()
}

/// The worked cost instance with its reconstructed marginal weight.
fn sample_costs() -> CostPair {
    CostPair::new([[3.0, 5.0], [2.0, 4.0]], [[2.0, 1.0], [4.0, 3.0]], 0.7).unwrap()
}

fn sample_kernel() -> PlanKernel {
    let costs = sample_costs();
    let dual = solve_dual(&costs).unwrap();
    build_plan_kernel(&costs, &dual.solution).unwrap()
}

/// `e^A = [[1,2],[3,4]]`, the running classical example.
fn potential_1234() -> LocallyConstantPotential {
    LocallyConstantPotential::from_exp_matrix(ab2(), &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap()
}

fn assert_runtime(start: Instant, budget: Duration, criterion: &str) {
    let elapsed = start.elapsed();
    assert!(
        elapsed <= budget,
        "{criterion}: runtime {elapsed:?} exceeded budget {budget:?}"
    );
}

/// Deterministic positive cost pairs with entries `e^U[-1,1]`, keeping the
/// first `count` instances the dual solver finds feasible (in practice all
/// draws are; the cap documents the conditioning).
fn random_feasible_instances(
    seed: u64,
    count: usize,
) -> Vec<(CostPair, ergotrans::transport::DualSolution)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(count);
    for _ in 0..count + 50 {
        let mut draw = || rng.random_range(-1.0..1.0f64).exp();
        let c1 = [[draw(), draw()], [draw(), draw()]];
        let c2 = [[draw(), draw()], [draw(), draw()]];
        let p = rng.random_range(0.05..0.95);
        let costs = CostPair::new(c1, c2, p).unwrap();
        if let Ok(outcome) = solve_dual(&costs) {
            instances.push((costs, outcome.solution));
            if instances.len() == count {
                break;
            }
        }
    }
    assert_eq!(instances.len(), count, "not enough feasible instances");
    instances
}

#[test]
fn criterion_01_dual_solve_reproduces_known_solution() {
    let start = Instant::now();

    // The instance does not pin mu; recover p from the known (z1, z2), which
    // makes the Lagrange conic an equation linear in p.
    let coeffs = conic_coefficients(&sample_costs());
    let recovered = recover_marginal_weight(&coeffs, 0.101972, 0.0568922)
        .expect("Lagrange equation solvable for p");
    assert!(
        (recovered - 0.7).abs() < 1e-3,
        "reconstructed p = {recovered}, expected 0.7"
    );

    let dual = solve_dual(&sample_costs()).unwrap();
    assert!(
        (dual.solution.z1 - 0.101972).abs() < 1e-5,
        "z1 = {}",
        dual.solution.z1
    );
    assert!(
        (dual.solution.z2 - 0.0568922).abs() < 1e-5,
        "z2 = {}",
        dual.solution.z2
    );

    // Same numbers through the CLI front door.
    let config = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/cost_sample.json"
    );
    let output = Command::new(env!("CARGO_BIN_EXE_ergotrans"))
        .args(["et-solve", config])
        .output()
        .expect("et-solve runs");
    assert!(
        output.status.success(),
        "et-solve exited {:?}",
        output.status
    );
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        stdout.contains("0.101972") && stdout.contains("0.056892"),
        "{stdout}"
    );

    assert_runtime(start, Duration::from_secs(1), "criterion 1");
    println!("CRITERION 1 PASS: dual solve recovers (0.101972, 0.0568922) at p = 0.7");
}

#[test]
fn criterion_02_kernel_reproduces_known_matrices() {
    let start = Instant::now();
    let kernel = sample_kernel();

    let b_expected = [[0.4197, 0.566751], [0.431512, 0.578563]];
    let h_expected = [0.596709, 0.802458];
    let cbar1_expected = [[0.3059, 0.379132], [0.274264, 0.407887]];
    let cbar2_expected = [[0.113784, 0.0423052], [0.306036, 0.170677]];
    let h_norm: f64 = kernel.h().iter().map(|v| v * v).sum();
    assert!((h_norm - 1.0).abs() < 1e-12, "h is l2-normalized");
    for i in 0..2 {
        assert!(
            (kernel.h()[i] - h_expected[i]).abs() < 1e-5,
            "h[{i}] = {}",
            kernel.h()[i]
        );
        for j in 0..2 {
            assert!((kernel.b_matrix()[i][j] - b_expected[i][j]).abs() < 1e-4);
            assert!((kernel.cbar(0)[i][j] - cbar1_expected[i][j]).abs() < 1e-4);
            assert!((kernel.cbar(1)[i][j] - cbar2_expected[i][j]).abs() < 1e-4);
        }
    }

    assert_runtime(start, Duration::from_secs(1), "criterion 2");
    println!("CRITERION 2 PASS: B, h, Cbar1, Cbar2 match the reference values");
}

#[test]
fn criterion_03_stochastic_closed_form() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for instance in 0..10 {
        let mut draw = || rng.random_range(0.05..0.95f64);
        let u1 = [draw(), draw()];
        let u2 = [draw(), draw()];
        for p in [0.1, 0.3, 0.5, 0.9] {
            let costs = CostPair::new(
                [[u1[0], u1[1]], [1.0 - u1[0], 1.0 - u1[1]]],
                [[u2[0], u2[1]], [1.0 - u2[0], 1.0 - u2[1]]],
                p,
            )
            .unwrap();
            let dual = solve_dual(&costs).unwrap().solution;
            assert!(
                (dual.z1 - p).abs() <= 1e-9 && (dual.z2 - (1.0 - p)).abs() <= 1e-9,
                "instance {instance}, p = {p}: z = ({}, {})",
                dual.z1,
                dual.z2
            );
            let entropy = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
            assert!(
                (dual.objective - entropy).abs() <= 1e-9,
                "instance {instance}, p = {p}: objective {} vs {entropy}",
                dual.objective
            );
        }
    }
    assert_runtime(start, Duration::from_secs(1), "criterion 3");
    println!("CRITERION 3 PASS: column-stochastic pairs solve to (p, 1-p) with entropy objective");
}

#[test]
fn criterion_04_duality_equality() {
    let start = Instant::now();
    let costs = sample_costs();
    let dual = solve_dual(&costs).unwrap().solution;
    let kernel = build_plan_kernel(&costs, &dual).unwrap();
    let dist = oracle::stationary(&oracle::plan_finite_chain(&kernel, 2).unwrap()).unwrap();
    assert_eq!(dist.states().len(), 8);
    let pressure = plan_pressure(&costs, &kernel, &dist).unwrap();
    assert!(
        (pressure - dual.objective).abs() <= 1e-9,
        "pressure {pressure} vs dual objective {}",
        dual.objective
    );
    assert!(
        (pressure - 2.45812).abs() < 5e-5,
        "pressure {pressure} should be near 2.45812"
    );
    assert_runtime(start, Duration::from_secs(1), "criterion 4");
    println!("CRITERION 4 PASS: exact pressure equals the dual objective ({pressure:.6})");
}

#[test]
fn criterion_05_kernel_normalization_on_random_instances() {
    let start = Instant::now();
    for (k, (costs, dual)) in random_feasible_instances(5, 100).iter().enumerate() {
        let kernel = build_plan_kernel(costs, dual).unwrap();
        assert!(
            kernel.normalization_deviation() <= 1e-9,
            "instance {k}: stacked column sums deviate by {:e}",
            kernel.normalization_deviation()
        );
    }
    assert_runtime(start, Duration::from_secs(10), "criterion 5");
    println!("CRITERION 5 PASS: stacked column sums equal 1 within 1e-9 on 100 random instances");
}

#[test]
fn criterion_06_marginals_on_random_instances() {
    let start = Instant::now();
    for (k, (costs, dual)) in random_feasible_instances(5, 100).iter().enumerate() {
        let kernel = build_plan_kernel(costs, dual).unwrap();
        let dist = oracle::stationary(&oracle::plan_finite_chain(&kernel, 2).unwrap()).unwrap();

        let x_marginal = dist.x_marginal().unwrap();
        assert!(
            (x_marginal[0] - costs.p()).abs() <= 1e-9
                && (x_marginal[1] - (1.0 - costs.p())).abs() <= 1e-9,
            "instance {k}: x-marginal {x_marginal:?} vs p = {}",
            costs.p()
        );

        let pair = dist.word_marginal(ab2());
        for j in 0..2 {
            let mass_as_second: f64 = (0..2).map(|i| pair[i * 2 + j]).sum();
            let mass_as_first: f64 = (0..2).map(|l| pair[j * 2 + l]).sum();
            assert!(
                (mass_as_second - mass_as_first).abs() <= 1e-9,
                "instance {k}: pair marginal not shift-consistent at {j}"
            );
        }
    }
    assert_runtime(start, Duration::from_secs(10), "criterion 6");
    println!("CRITERION 6 PASS: exact x-marginal (p, 1-p) and shift-consistent pair marginal");
}

#[test]
fn criterion_07_classical_law_of_large_numbers() {
    let start = Instant::now();
    let normalized = normalize_potential(&potential_1234()).unwrap();
    let dist =
        oracle::stationary(&oracle::classical_finite_chain(&normalized, 1).unwrap()).unwrap();
    let fns = [
        TestFunction::Cylinder(Word::new(vec![1])),
        TestFunction::Cylinder(Word::new(vec![2])),
    ];
    let exact: Vec<f64> = fns
        .iter()
        .map(|f| oracle::exact_integral(&dist, f).unwrap())
        .collect();

    let spec = classical_chain(&normalized, window(&[1]), 0, 1_000_000).unwrap();
    let passes: Vec<bool> = (0u64..20)
        .into_par_iter()
        .map(|seed| {
            let estimates = run_birkhoff_many(&spec.clone().with_seed(seed), &fns).unwrap();
            estimates
                .iter()
                .zip(&exact)
                .all(|(est, &target)| (est.mean - target).abs() <= 3.0 * est.ci_halfwidth)
        })
        .collect();
    let passed = passes.iter().filter(|&&ok| ok).count();
    assert!(
        passed >= 19,
        "only {passed}/20 seeds within 3 CI halfwidths"
    );
    assert_runtime(start, Duration::from_secs(30), "criterion 7");
    println!("CRITERION 7 PASS: classical sampler within 3 CI of the oracle for {passed}/20 seeds");
}

#[test]
fn criterion_08_transport_law_of_large_numbers() {
    let start = Instant::now();
    let kernel = sample_kernel();
    let dist = oracle::stationary(&oracle::plan_finite_chain(&kernel, 2).unwrap()).unwrap();
    let fns = [
        TestFunction::XIndicator(1),
        TestFunction::Cylinder(Word::new(vec![1])),
        TestFunction::Cylinder(Word::new(vec![1, 2])),
    ];
    let exact: Vec<f64> = fns
        .iter()
        .map(|f| oracle::exact_integral(&dist, f).unwrap())
        .collect();
    // The x-marginal of this instance is the reconstructed mu.
    assert!((exact[0] - 0.7).abs() <= 1e-9);

    let spec = plan_chain(&kernel, 1, window(&[1, 1]), 0, 1_000_000)
        .unwrap()
        .with_burn_in(1_000);
    let results: Vec<(bool, f64, f64)> = (0u64..20)
        .into_par_iter()
        .map(|seed| {
            let estimates = run_birkhoff_many(&spec.clone().with_seed(seed), &fns).unwrap();
            let ok = estimates
                .iter()
                .zip(&exact)
                .all(|(est, &target)| (est.mean - target).abs() <= 3.0 * est.ci_halfwidth);
            (ok, estimates[0].mean, estimates[0].ci_halfwidth)
        })
        .collect();
    let passed = results.iter().filter(|(ok, _, _)| *ok).count();
    assert!(
        passed >= 19,
        "only {passed}/20 seeds within 3 CI halfwidths"
    );
    for (_, mean, ci) in &results {
        assert!(
            (mean - 0.7).abs() <= 3.0 * ci,
            "x-frequency {mean} not consistent with 0.7 (ci {ci})"
        );
    }
    assert_runtime(start, Duration::from_secs(60), "criterion 8");
    println!("CRITERION 8 PASS: plan sampler within 3 CI of the oracle for {passed}/20 seeds");
}

#[test]
fn criterion_09_operator_convergence() {
    let start = Instant::now();
    let pot = potential_1234();
    for (label, table) in [("cyl:1", vec![1.0, 0.0]), ("cyl:2", vec![0.0, 1.0])] {
        let u = LocallyConstantPotential::new(ab2(), 1, table).unwrap();
        let distances: Vec<f64> = (3..=20)
            .map(|n| transfer_iterate(&pot, &u, n).unwrap().sup_distance)
            .collect();
        for (k, pair) in distances.windows(2).enumerate() {
            assert!(
                pair[1] <= pair[0] || pair.iter().all(|&d| d < 1e-12),
                "{label}: distance rose at n = {} ({:?})",
                k + 4,
                pair
            );
        }
        let last = *distances.last().unwrap();
        assert!(last < 1e-6, "{label}: distance {last:e} at n = 20");
    }
    assert_runtime(start, Duration::from_secs(1), "criterion 9");
    println!("CRITERION 9 PASS: scaled operator iterates converge monotonically to the limit");
}

#[test]
fn criterion_10_preimage_enumeration_matches_matrix_power() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for m in [2usize, 3] {
        for instance in 0..10 {
            // Entry spread kept moderate so the 1e-10 comparison is absolute.
            let values: Vec<f64> = (0..ab2().word_count(m))
                .map(|_| rng.random_range(-0.5..0.5))
                .collect();
            let pot = LocallyConstantPotential::new(ab2(), m, values).unwrap();
            let u_values: Vec<f64> = (0..ab2().word_count(m - 1))
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let u = LocallyConstantPotential::new(ab2(), m - 1, u_values).unwrap();
            let lambda = dominant_eigenpair(&build_transfer_matrix(&pot).unwrap())
                .unwrap()
                .lambda;
            for n in 1..=6 {
                let it = transfer_iterate(&pot, &u, n).unwrap();
                for (c, y) in ab2().words(m - 1).enumerate() {
                    let naive = oracle::naive_transfer_power(&pot, &u, n, &y).unwrap();
                    let matrix_route = it.table.values()[c] * lambda.powi(n as i32);
                    assert!(
                        (naive - matrix_route).abs() <= 1e-10,
                        "m = {m}, instance {instance}, n = {n}, y = {y}: \
                         naive {naive} vs matrix {matrix_route}"
                    );
                }
            }
        }
    }
    assert_runtime(start, Duration::from_secs(10), "criterion 10");
    println!("CRITERION 10 PASS: preimage enumeration agrees with the matrix route within 1e-10");
}
