use super::*;
use crate::hermlin::random::{random_bloch, random_density, random_operator};
use crate::hermlin::{eigenvalues_hermitian, kron};
use crate::states::{check_ppt, rho_nl, COMPUTED_PSD_TOL};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_povm(rng: &mut ChaCha8Rng) -> Povm {
    // {E, 1 − E} with E = G†G rescaled into [0, 1].
    let g = random_operator(rng, &[2]);
    let e = HermitianOperator::project(&g.adjoint() * &g);
    let top = eigenvalues_hermitian(&e).unwrap()[0];
    let e = e.scale(1.0 / top);
    Povm::new(vec![e.clone(), &Operator::identity(&[2]) - &e]).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng) -> MeasurementSet {
    MeasurementSet::new((0..3).map(|_| (0..2).map(|_| random_povm(rng)).collect()).collect()).unwrap()
}

fn projective_set(rng: &mut ChaCha8Rng) -> MeasurementSet {
    MeasurementSet::new(
        (0..3).map(|_| (0..2).map(|_| Povm::projective(random_bloch(rng)).unwrap()).collect()).collect(),
    )
    .unwrap()
}

fn chsh() -> BellInequality {
    let t = |c: f64, s: [usize; 2]| BellTerm { coeff: c, settings: s.to_vec() };
    BellInequality {
        scenario: Scenario { parties: 2, settings: 2, outcomes: 2 },
        terms: vec![t(1.0, [1, 1]), t(1.0, [1, 2]), t(1.0, [2, 1]), t(-1.0, [2, 2])],
        local_bound: 2.0,
    }
}

/// `Tr[(M₁ ⊗ M₂ ⊗ M₃) ρ]` by explicit index sums.
fn born_oracle(rho: &Operator, e: [&Operator; 3]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..8 {
        for c in 0..8 {
            let bit = |i: usize, k: usize| (i >> (2 - k)) & 1;
            let mut v = Complex64::new(1.0, 0.0);
            for (k, op) in e.iter().enumerate() {
                v *= op.get(bit(r, k), bit(c, k));
            }
            acc += v * rho.get(c, r);
        }
    }
    acc.re
}

#[test]
fn maximally_mixed_gives_uniform_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = correlations(&Operator::maximally_mixed(&[2, 2, 2]), &projective_set(&mut rng)).unwrap();
    assert_eq!(t.probs.len(), 64);
    assert!(t.probs.iter().all(|p| (p - 0.125).abs() < 1e-15));
}

#[test]
fn product_state_is_deterministic() {
    let mut psi = vec![Complex64::new(0.0, 0.0); 8];
    psi[0b010] = 1.0.into();
    let rho = Operator::outer(&[2, 2, 2], &psi, &psi);
    let z = Povm::projective([0.0, 0.0, 1.0]).unwrap();
    let m = MeasurementSet::new(vec![vec![z.clone()], vec![z.clone()], vec![z]]).unwrap();
    let t = correlations(&rho, &m).unwrap();
    for a in tuples(&[2, 2, 2]) {
        let want = if a == [0, 1, 0] { 1.0 } else { 0.0 };
        assert_eq!(t.get(&a, &[0, 0, 0]), want);
    }
}

#[test]
fn born_rule_matches_index_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let rho = random_density(&mut rng, &[2, 2, 2]);
        let m = random_set(&mut rng);
        let t = correlations(&rho, &m).unwrap();
        for x in tuples(&[2, 2, 2]) {
            for a in tuples(&[2, 2, 2]) {
                let e = [0, 1, 2].map(|k| &m.povm(k, x[k]).elements()[a[k]]);
                assert!((t.get(&a, &x) - born_oracle(&rho, e)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dimension_mismatch_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = projective_set(&mut rng);
    assert!(matches!(correlations(&Operator::maximally_mixed(&[2, 4]), &m), Err(BellError::DimensionMismatch(_))));
}

#[test]
fn invalid_povms_rejected() {
    let half = Operator::identity(&[2]).scale(0.5);
    assert!(Povm::new(vec![half.clone()]).is_err());
    assert!(Povm::new(vec![half.scale(3.0), half.scale(-1.0)]).is_err());
    assert!(Povm::new(vec![pauli::x(), &Operator::identity(&[2]) - &pauli::x()]).is_err());
    assert!(Povm::new(vec![half.clone(), half]).is_ok());
}

#[test]
fn symmetrization_orbits() {
    let term = |s: [usize; 3]| BellTerm { coeff: 1.0, settings: s.to_vec() };
    assert_eq!(symmetrize(&term([1, 1, 1])).len(), 1);
    assert_eq!(symmetrize(&term([1, 0, 0])).len(), 3);
    let orbit: Vec<Vec<usize>> = symmetrize(&term([1, 2, 0])).into_iter().map(|t| t.settings).collect();
    // A₁B₂ + A₁C₂ + A₂B₁ + A₂C₁ + B₁C₂ + B₂C₁
    let mut want = vec![vec![1, 2, 0], vec![1, 0, 2], vec![2, 1, 0], vec![2, 0, 1], vec![0, 1, 2], vec![0, 2, 1]];
    let mut got = orbit.clone();
    got.sort();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn sliwa5_structure_and_bound() {
    let s = sliwa5();
    assert_eq!(s.local_bound, 3.0);
    assert_eq!(s.terms.len(), 3 + 6 + 3 + 1 + 3 + 1);
    assert!(s.terms.iter().all(|t| t.coeff.abs() == 1.0));
    assert_eq!(local_bound(&s).unwrap(), 3.0);
    assert_eq!(s.algebraic_maximum(), 17.0);
}

#[test]
fn local_bound_examples() {
    assert_eq!(local_bound(&chsh()).unwrap(), 2.0);
    let single = BellInequality {
        scenario: Scenario { parties: 3, settings: 2, outcomes: 2 },
        terms: vec![BellTerm { coeff: 5.0, settings: vec![1, 0, 0] }],
        local_bound: 5.0,
    };
    assert_eq!(local_bound(&single).unwrap(), 5.0);
    let big =
        BellInequality { scenario: Scenario { parties: 3, settings: 7, outcomes: 2 }, terms: vec![], local_bound: 0.0 };
    assert!(matches!(local_bound(&big), Err(BellError::TooLarge { .. })));
}

#[test]
fn local_bound_invariant_under_relabeling() {
    let s = sliwa5();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ineq = s.clone();
    for t in &mut ineq.terms {
        t.coeff = rand::Rng::random_range(&mut rng, -2.0..2.0);
    }
    let base = local_bound(&ineq).unwrap();
    for perm in permutations(3) {
        assert_eq!(local_bound(&ineq.relabel_parties(&perm)).unwrap(), base);
    }
}

#[test]
fn inequality_json() {
    let text = r#"{"scenario":{"parties":3,"settings":2,"outcomes":2},"terms":[{"coeff":-1.0,"settings":[1,1,1]},{"coeff":1.0,"settings":[2,0,0]}],"local_bound":3.0}"#;
    let ineq = BellInequality::from_json(text).unwrap();
    assert_eq!(ineq.terms[1].settings, vec![2, 0, 0]);
    assert_eq!(BellInequality::from_json(&ineq.to_json()).unwrap(), ineq);
    let s = sliwa5();
    assert_eq!(BellInequality::from_json(&s.to_json()).unwrap(), s);
    let bad = text.replace("[2,0,0]", "[3,0,0]");
    assert!(BellInequality::from_json(&bad).is_err());
}

#[test]
fn measurement_json_round_trip() {
    let m = paper_measurements();
    assert_eq!(MeasurementSet::from_json(&m.to_json()).unwrap(), m);
}

#[test]
fn bell_operator_basics() {
    let mut s = sliwa5();
    let m = paper_measurements();
    for t in &mut s.terms {
        t.coeff = 0.0;
    }
    assert_eq!(bell_operator(&s, &m).unwrap().max_abs(), 0.0);
    let chsh_m = MeasurementSet::from_observables(&[
        vec![pauli::z(), pauli::x()],
        vec![
            (&pauli::z() + &pauli::x()).scale(std::f64::consts::FRAC_1_SQRT_2),
            (&pauli::z() - &pauli::x()).scale(std::f64::consts::FRAC_1_SQRT_2),
        ],
    ])
    .unwrap();
    let b = bell_operator(&chsh(), &chsh_m).unwrap();
    // Tsirelson's bound is the top eigenvalue.
    assert!((eigenvalues_hermitian(&b).unwrap()[0] - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
}

#[test]
fn paper_observables_square_to_identity() {
    let m = paper_measurements();
    for x in 0..2 {
        let a = m.observable(0, x).unwrap();
        assert!((&a * &a).max_abs_diff(&Operator::identity(&[2])) < 2e-4);
        for k in 1..3 {
            assert_eq!(m.observable(k, x).unwrap(), a);
        }
    }
    assert!((m.observable(0, 0).unwrap().get(0, 0).re + 0.7909).abs() < 1e-15);
    assert!((m.observable(0, 1).unwrap().get(0, 1).re - 0.9721).abs() < 1e-15);
}

#[test]
fn published_violation() {
    let rho = rho_nl();
    let m = paper_measurements();
    let q = bell_operator(&sliwa5(), &m).unwrap().expectation(&rho);
    assert!((q - 3.0152).abs() < 5e-4, "Q = {q}");
    let via_table = sliwa5().evaluate(&correlations(&rho, &m).unwrap()).unwrap();
    assert!((q - via_table).abs() < 1e-10);
}

#[test]
fn povm_step_on_maximally_mixed() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rho = Operator::maximally_mixed(&[2, 2, 2]);
    let s = sliwa5();
    let m = projective_set(&mut rng);
    let before = bell_operator(&s, &m).unwrap().expectation(&rho);
    assert!(before.abs() < 1e-12);
    let povms = seesaw_measurements(&rho, &s, 0, &m, MeasurementStep::TracelessProjective).unwrap();
    let mut next = m.clone();
    next.replace_party(0, povms).unwrap();
    assert!(bell_operator(&s, &next).unwrap().expectation(&rho).abs() < 1e-12);
}

#[test]
fn povm_step_reaches_trace_norm_and_is_projective() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let s = sliwa5();
    for trial in 0..5 {
        let rho = random_density(&mut rng, &[2, 2, 2]);
        let m = projective_set(&mut rng);
        let party = trial % 3;
        let povms = seesaw_measurements(&rho, &s, party, &m, MeasurementStep::Povm).unwrap();
        for (x, p) in povms.iter().enumerate() {
            let k = seesaw::tests_support::effective(&s, &rho, &m, party, x + 1);
            // max over −1 ⪯ A ⪯ 1 of Tr(AK) is the trace norm of K.
            let norm1: f64 =
                eigenvalues_hermitian(&HermitianOperator::project(k.clone())).unwrap().iter().map(|l| l.abs()).sum();
            let got = p.observable().unwrap().trace_product(&k).re;
            assert!((got - norm1).abs() < 1e-6, "trial {trial}: {got} vs {norm1}");
            for e in p.elements() {
                for l in eigenvalues_hermitian(&HermitianOperator::project(e.clone())).unwrap() {
                    assert!(l.abs() < 1e-6 || (l - 1.0).abs() < 1e-6, "eigenvalue {l}");
                }
            }
        }
    }
}

#[test]
fn povm_step_from_published_point() {
    let rho = rho_nl();
    let s = sliwa5();
    let mut m = paper_measurements();
    for party in 0..3 {
        let povms = seesaw_measurements(&rho, &s, party, &m, MeasurementStep::Povm).unwrap();
        m.replace_party(party, povms).unwrap();
        assert!(bell_operator(&s, &m).unwrap().expectation(&rho) >= 3.0152 - 1e-4);
    }
}

#[test]
fn unconstrained_state_step_is_top_eigenvector() {
    let s = sliwa5();
    let m = paper_measurements();
    let b = bell_operator(&s, &m).unwrap();
    let rho = seesaw_state(&s, &m, &StateConstraints::default(), None).unwrap();
    let top = eigenvalues_hermitian(&b).unwrap()[0];
    assert!((b.expectation(&rho) - top).abs() < 1e-6);
    let spec = crate::hermlin::eig_hermitian(&b).unwrap();
    let v = spec.vector(0);
    let proj = Operator::outer(&[2, 2, 2], &v, &v);
    assert!(rho.max_abs_diff(&proj) < 1e-4);
}

#[test]
fn ppt_state_step_reaches_published_value() {
    let s = sliwa5();
    let m = paper_measurements();
    let c = StateConstraints { ppt_cuts: vec![vec![0], vec![1], vec![2]], ..Default::default() };
    let rho = seesaw_state(&s, &m, &c, None).unwrap();
    assert!(bell_operator(&s, &m).unwrap().expectation(&rho) >= 3.015);
    for k in 0..3 {
        assert!(check_ppt(&rho, &[k], 1e-7).unwrap());
    }
}

#[test]
fn pt_invariant_state_step_is_ppt() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let s = sliwa5();
    let m = projective_set(&mut rng);
    let c = StateConstraints { pt_invariant: true, ..Default::default() };
    let rho = seesaw_state(&s, &m, &c, None).unwrap();
    for k in 0..3 {
        assert!(rho.partial_transpose(k).unwrap().max_abs_diff(&rho) < 1e-12);
        assert!(check_ppt(&rho, &[k], COMPUTED_PSD_TOL).unwrap());
    }
}

#[test]
fn short_seesaw_is_monotone_and_bounded() {
    let s = sliwa5();
    let config = SeesawConfig { restarts: 3, ..SeesawConfig::new(3) };
    let r = seesaw(&s, &config).unwrap();
    assert_eq!(r.restart_values.len(), 3);
    assert!(r.q <= s.algebraic_maximum());
    for w in r.history.windows(2) {
        assert!(w[1] >= w[0] - 1e-12, "history {:?}", r.history);
    }
    let recomputed = s.evaluate(&correlations(&r.state, &r.measurements).unwrap()).unwrap();
    assert_eq!(recomputed, r.q);
    // Deterministic for a fixed seed.
    let again = seesaw(&s, &config).unwrap();
    assert_eq!(again.q, r.q);
    assert_eq!(again.restart_values, r.restart_values);
}

#[test]
fn povm_seesaw_is_monotone() {
    let s = sliwa5();
    let config = SeesawConfig { restarts: 2, measurement_step: MeasurementStep::Povm, ..SeesawConfig::new(3) };
    let r = seesaw(&s, &config).unwrap();
    for w in r.history.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tables_are_normalized_and_nonsignalling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, &[2, 2, 2]);
        let t = correlations(&rho, &random_set(&mut rng)).unwrap();
        prop_assert!(t.invariant_defect() <= 1e-9);
    }

    #[test]
    fn bell_operator_matches_table(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_density(&mut rng, &[2, 2, 2]);
        let m = random_set(&mut rng);
        let mut s = sliwa5();
        for t in &mut s.terms {
            t.coeff = rand::Rng::random_range(&mut rng, -1.0..1.0);
        }
        let direct = bell_operator(&s, &m).unwrap().expectation(&rho);
        let table = s.evaluate(&correlations(&rho, &m).unwrap()).unwrap();
        prop_assert!((direct - table).abs() < 1e-10);
    }

    #[test]
    fn product_of_local_states_respects_local_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_density(&mut rng, &[2]);
        let b = random_density(&mut rng, &[2]);
        let c = random_density(&mut rng, &[2]);
        let rho = kron(&kron(&a, &b), &c);
        let q = sliwa5().evaluate(&correlations(&rho, &random_set(&mut rng)).unwrap()).unwrap();
        prop_assert!(q <= 3.0 + 1e-9);
    }
}
