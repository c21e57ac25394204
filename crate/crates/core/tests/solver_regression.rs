//! Problems that once tripped the interior-point solver.

use boundloc::conic::{solve, verify_solution, SdpProblem, SolveStatus, SolverSettings};

/// Three-qubit state step with PPT blocks on every cut. The Schur complement
/// loses definiteness one iteration before convergence.
#[test]
fn degenerate_state_step_converges() {
    let text = include_str!("data/degenerate_state_sdp.json");
    let problem = SdpProblem::from_json(text).unwrap();
    let sol = solve(&problem, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    // Optimum from an independent conic solver (Clarabel via cvxpy).
    assert!((sol.primal_objective + 3.018_565_181_7).abs() < 1e-6, "{}", sol.primal_objective);
    let report = verify_solution(&problem, &sol, 1e-6);
    assert!(report.passed, "{:?}", report.findings);
}
