use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::model::HermitianTerm;
use super::*;
use crate::hermlin::Operator;

/// minimize x subject to [[x, 1], [1, x]] ⪰ 0.
fn two_by_two() -> SdpProblem {
    let mut off = SymCoeff::new();
    off.push(0, 1, 0.5);
    let mut diff = SymCoeff::diagonal(0, 1.0);
    diff.push(1, 1, -1.0);
    SdpProblem {
        blocks: vec![BlockSpec { kind: BlockKind::Psd, size: 2 }],
        objective: vec![(0, SymCoeff::diagonal(0, 1.0))],
        constraints: vec![
            Constraint { terms: vec![(0, off)], rhs: 1.0 },
            Constraint { terms: vec![(0, diff)], rhs: 0.0 },
        ],
    }
}

#[test]
fn psd_condition_gives_unit_optimum() {
    let p = two_by_two();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.primal_objective - 1.0).abs() < 1e-7, "{}", sol.primal_objective);
    let report = verify_solution(&p, &sol, 1e-7);
    assert!(report.passed, "{:?}", report.findings);
}

#[test]
fn trace_constraint_fixes_objective() {
    let mut mb = ModelBuilder::new();
    let rho = mb.add_hermitian(2);
    let id = Operator::identity(&[2]);
    mb.add_objective_hermitian(rho, &id.scale(-1.0));
    mb.add_row(vec![(rho, hermitian_coeff(&id))], 1.0);
    let p = mb.build();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((-sol.primal_objective - 1.0).abs() < 1e-8);
    let z = extract_hermitian(&sol.x[rho], &[2]);
    assert!((z.trace().re - 1.0).abs() < 1e-8);
}

#[test]
fn negative_trace_is_primal_infeasible() {
    let mut id = SymCoeff::diagonal(0, 1.0);
    id.push(1, 1, 1.0);
    let p = SdpProblem {
        blocks: vec![BlockSpec { kind: BlockKind::Psd, size: 2 }],
        objective: vec![],
        constraints: vec![Constraint { terms: vec![(0, id)], rhs: -1.0 }],
    };
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
}

#[test]
fn unbounded_objective_is_dual_infeasible() {
    // minimize −x₀ subject to x₀ − x₁ = 0, x ≥ 0.
    let mut diff = SymCoeff::diagonal(0, 1.0);
    diff.push(1, 1, -1.0);
    let p = SdpProblem {
        blocks: vec![BlockSpec { kind: BlockKind::Diagonal, size: 2 }],
        objective: vec![(0, SymCoeff::diagonal(0, -1.0))],
        constraints: vec![Constraint { terms: vec![(0, diff)], rhs: 0.0 }],
    };
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::DualInfeasible);
}

#[test]
fn verification_rejects_tampering() {
    let p = two_by_two();
    let sol = solve(&p, &SolverSettings::default()).unwrap();

    let mut bad = sol.clone();
    // X = [[1,1],[1,1]] − 1e-3·I has min eigenvalue −1e-3.
    bad.x[0].data = vec![1.0 - 1e-3, 1.0, 1.0, 1.0 - 1e-3];
    let report = verify_solution(&p, &bad, 1e-7);
    assert!(!report.passed);
    assert!(report.findings.iter().any(|f| f.contains("negative eigenvalue")));

    let mut shifted = p.clone();
    shifted.constraints[0].rhs += 1e-2;
    let report = verify_solution(&shifted, &sol, 1e-7);
    assert!(!report.passed);
    assert!(report.findings.iter().any(|f| f.contains("primal residual")));
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let p = random_feasible(&mut ChaCha8Rng::seed_from_u64(11), 3);
    let a = solve(&p, &SolverSettings::default()).unwrap();
    let b = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.primal_objective.to_bits(), b.primal_objective.to_bits());
    assert_eq!(a.dual_objective.to_bits(), b.dual_objective.to_bits());
}

#[test]
fn invalid_problems_are_rejected() {
    let mut p = two_by_two();
    p.constraints[0].terms[0].1.entries.push((1, 0, 1.0));
    assert!(matches!(solve(&p, &SolverSettings::default()), Err(SolverError::InvalidProblem(_))));
    let mut p = two_by_two();
    p.constraints.clear();
    assert!(p.validate().is_err());
    let s = SolverSettings { step_fraction: 1.0, ..Default::default() };
    assert!(s.validate().is_err());
}

#[test]
fn problem_dump_round_trips() {
    let p = two_by_two();
    assert_eq!(SdpProblem::from_json(&p.to_json()).unwrap(), p);
}

#[test]
fn hermitian_equality_rows_solve() {
    // Find ρ ⪰ 0 on a qubit with ρ = target, minimizing nothing.
    let target = Operator::from_fn(&[2], |r, c| match (r, c) {
        (0, 0) => 0.7.into(),
        (1, 1) => 0.3.into(),
        (0, 1) => num_complex::Complex64::new(0.1, -0.2),
        _ => num_complex::Complex64::new(0.1, 0.2),
    });
    let mut mb = ModelBuilder::new();
    let rho = mb.add_hermitian(2);
    let identity = |h: &Operator| h.clone();
    mb.add_hermitian_equality(&[2], &[HermitianTerm::Map { block: rho, adjoint: &identity }], &target);
    assert_eq!(mb.reduce_dependent_rows().unwrap(), 0);
    let p = mb.build();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(extract_hermitian(&sol.x[rho], &[2]).max_abs_diff(&target) < 1e-7);
}

/// Strictly feasible primal and dual by construction.
fn random_feasible(rng: &mut ChaCha8Rng, m: usize) -> SdpProblem {
    let sizes = [rng.random_range(1..5usize), rng.random_range(1..4usize)];
    let blocks = vec![
        BlockSpec { kind: BlockKind::Psd, size: sizes[0] },
        BlockSpec { kind: BlockKind::Diagonal, size: sizes[1] },
    ];
    let vars = sizes[0] * (sizes[0] + 1) / 2 + sizes[1];
    let m = m.min(vars);
    let mut gauss = || -> f64 { rng.sample(StandardNormal) };
    let random_coeff = |spec: &BlockSpec, g: &mut dyn FnMut() -> f64| {
        let mut c = SymCoeff::new();
        for i in 0..spec.size {
            for j in i..spec.size {
                if spec.kind == BlockKind::Psd || i == j {
                    c.push(i, j, g());
                }
            }
        }
        c
    };
    let interior = |spec: &BlockSpec, g: &mut dyn FnMut() -> f64| {
        let mut x = BlockMatrix::zeros(*spec);
        match spec.kind {
            BlockKind::Psd => {
                let n = spec.size;
                let f: Vec<f64> = (0..n * n).map(|_| g()).collect();
                for i in 0..n {
                    for j in 0..n {
                        x.data[i * n + j] =
                            (0..n).map(|k| f[i * n + k] * f[j * n + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 };
                    }
                }
            }
            BlockKind::Diagonal => x.data.iter_mut().for_each(|v| *v = 0.5 + g().abs()),
        }
        x
    };
    let x0: Vec<BlockMatrix> = blocks.iter().map(|s| interior(s, &mut gauss)).collect();
    let s0: Vec<BlockMatrix> = blocks.iter().map(|s| interior(s, &mut gauss)).collect();
    let y0: Vec<f64> = (0..m).map(|_| gauss()).collect();
    let constraints: Vec<Constraint> = (0..m)
        .map(|_| {
            let terms: Vec<(usize, SymCoeff)> =
                blocks.iter().enumerate().map(|(b, s)| (b, random_coeff(s, &mut gauss))).collect();
            let rhs = terms.iter().map(|(b, c)| x0[*b].dot(c)).sum();
            Constraint { terms, rhs }
        })
        .collect();
    // C = A*(y0) + S0
    let mut objective = Vec::new();
    for (b, spec) in blocks.iter().enumerate() {
        let mut c = BlockMatrix::zeros(*spec);
        c.data.copy_from_slice(&s0[b].data);
        for (con, y) in constraints.iter().zip(&y0) {
            for (blk, coeff) in &con.terms {
                if *blk == b {
                    c.add_coeff(*y, coeff);
                }
            }
        }
        let mut coeff = SymCoeff::new();
        for i in 0..spec.size {
            for j in i..spec.size {
                if spec.kind == BlockKind::Psd || i == j {
                    coeff.push(i, j, c.get(i, j));
                }
            }
        }
        objective.push((b, coeff));
    }
    SdpProblem { blocks, objective, constraints }
}

#[test]
fn random_feasible_instances_verify() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let m = rng.random_range(1..6usize);
        let p = random_feasible(&mut rng, m);
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let report = verify_solution(&p, &sol, 1e-7);
        assert!(report.passed, "{:?}", report.findings);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn weak_duality_on_optimal_exit(seed in any::<u64>(), m in 1usize..6) {
        let p = random_feasible(&mut ChaCha8Rng::seed_from_u64(seed), m);
        let settings = SolverSettings::default();
        let sol = solve(&p, &settings).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!(sol.primal_objective >= sol.dual_objective - settings.gap_tolerance * (1.0 + sol.primal_objective.abs()));
    }
}
