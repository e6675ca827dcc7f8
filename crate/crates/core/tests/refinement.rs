use seqstop::regions::lower_bound_region;
use seqstop::solver::{solve_1d_qd, solve_1d_st};
use seqstop::suite::{solve_problem, verify_problem, VerifyOptions, DEFAULT_QD_LAMBDA};
use seqstop::{build_grid, build_penalty, ModelParams, ProblemKind, ProblemSpec, SolverOptions};

// On (A, 1−A) the value is (2c/μ²)·ψ + const with ψ = (1−2π)·ln(π/(1−π)),
// ψ'' = −1/(π(1−π))²; smooth fit at A gives (2c/μ²)·ψ'(A) = 1.
fn st_reference_threshold(mu: f64, c: f64) -> f64 {
    let lam = 2.0 * c / (mu * mu);
    let dpsi = |x: f64| -2.0 * (x / (1.0 - x)).ln() + (1.0 - 2.0 * x) / (x * (1.0 - x));
    let slope = |a: f64| lam * dpsi(a) - 1.0;
    let (mut lo, mut hi) = (1e-9, 0.5 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn st_threshold_converges_under_refinement() {
    let exact = st_reference_threshold(1.0, 0.2);
    let mut errs = Vec::new();
    for nodes in [101, 201, 401] {
        let s = solve_1d_st(1.0, 0.2, &build_grid(1, nodes).unwrap()).unwrap();
        errs.push((s.threshold_low - exact).abs());
    }
    assert!(errs[2] <= 2.0 / 400.0, "errors {errs:?} vs exact {exact}");
    assert!(errs[2] <= errs[0] + 1e-12, "errors {errs:?}");
}

#[test]
fn qd_threshold_is_stable_under_refinement() {
    let coarse = solve_1d_qd(1.0, 0.5, 1.0, &build_grid(1, 201).unwrap()).unwrap();
    let fine = solve_1d_qd(1.0, 0.5, 1.0, &build_grid(1, 801).unwrap()).unwrap();
    assert!((coarse.threshold_low - fine.threshold_low).abs() <= 0.01);
    // stopping at π ≥ B* must beat the lower bound λ/(λ+c) of the continuation set
    assert!(fine.threshold_low >= 0.5 / 1.5 - 1.0 / 800.0);
}

#[test]
fn qd_lower_bound_region_is_nonempty() {
    for kind in [ProblemKind::Qd1, ProblemKind::Qd2, ProblemKind::Qd3, ProblemKind::Qd1d] {
        let n = if kind == ProblemKind::Qd1d { 1 } else { 2 };
        let spec = ProblemSpec::new(kind, ModelParams::new(vec![1.0; n], vec![DEFAULT_QD_LAMBDA; n], 1.0, vec![0.0; n]), None).unwrap();
        let pen = build_penalty(&spec, None).unwrap();
        let region = lower_bound_region(&spec.params, &pen, &build_grid(n, 41).unwrap()).unwrap();
        assert!(region.iter().any(|&b| b), "{kind}: empty lower-bound region");
    }
}

#[test]
fn two_d_values_converge_under_refinement() {
    let spec = ProblemSpec::new(ProblemKind::St1, ModelParams::new(vec![1.0, 1.0], vec![0.0, 0.0], 0.2, vec![0.5, 0.5]), None).unwrap();
    let at = |nodes: usize| {
        let s = solve_problem(&spec, nodes, &SolverOptions::default()).unwrap();
        s.solution.field.evaluate_coords(&[0.5, 0.5]).unwrap()
    };
    let (a, b, c) = (at(41), at(81), at(161));
    assert!((b - c).abs() <= (a - b).abs() + 1e-9, "{a} {b} {c}");
    assert!((b - c).abs() <= 5e-3);
}

#[test]
fn every_catalog_problem_verifies_on_a_moderate_grid() {
    for (kind, gamma) in [(ProblemKind::St2, None), (ProblemKind::St3, Some(0.8)), (ProblemKind::Qd2, None)] {
        let (lambda, c) = if kind.is_testing() { (0.0, 0.2) } else { (DEFAULT_QD_LAMBDA, 1.0) };
        let spec = ProblemSpec::new(kind, ModelParams::new(vec![1.0, 1.0], vec![lambda, lambda], c, vec![0.5, 0.5]), gamma).unwrap();
        let solved = solve_problem(&spec, 101, &SolverOptions::default()).unwrap();
        let failed: Vec<_> = verify_problem(&solved, &VerifyOptions::default()).unwrap().into_iter().filter(|r| !r.passed).collect();
        assert!(failed.is_empty(), "{kind}: {failed:?}");
    }
}
