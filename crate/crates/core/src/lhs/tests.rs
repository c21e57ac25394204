use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::states::{rho_l, rho_nl, DensityMatrix};

fn ghz() -> DensityMatrix {
    let mut psi = vec![Complex64::new(0.0, 0.0); 8];
    psi[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[7] = psi[0];
    DensityMatrix::pure(&[2, 2, 2], &psi).unwrap()
}

fn single_axis(trivial: bool) -> MeasurementPolytope {
    MeasurementPolytope::from_axes("z-axis", &[[0.0, 0.0, 1.0]], 4, trivial).unwrap()
}

#[test]
fn icosahedron_polytope_shape() {
    let p = icosahedron_polytope();
    assert_eq!(p.povms().len(), 76);
    assert_eq!(p.axes().len(), 6);
    assert_eq!(p.projective_relabellings(), 72);
    assert_eq!(p.trivial_relabellings(), 4);
    for v in icosahedron_vertices() {
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let s = reduce_strategies(&p).unwrap();
    assert_eq!(s.len(), 64);
    assert!(s.notes.iter().any(|n| n.contains("2^6")));
}

#[test]
fn strategies_for_small_polytopes() {
    assert_eq!(reduce_strategies(&single_axis(true)).unwrap().len(), 2);
    let trivial = MeasurementPolytope::from_axes("trivial", &[], 4, true).unwrap();
    assert_eq!(reduce_strategies(&trivial).unwrap().len(), 1);
    assert_eq!(reduce_strategies(&octahedron_polytope()).unwrap().len(), 8);
}

#[test]
fn strategies_answer_only_nonzero_elements() {
    let p = icosahedron_polytope();
    let s = reduce_strategies(&p).unwrap();
    for strategy in &s.strategies {
        for (x, &a) in strategy.iter().enumerate() {
            assert!(p.povms()[x].elements()[a].max_abs() > 0.1);
        }
    }
    for x in 0..p.povms().len() {
        let total: usize = (0..4).map(|a| s.answering(x, a).len()).sum();
        assert_eq!(total, s.len());
    }
}

#[test]
fn non_projective_polytope_is_rejected() {
    let half = Operator::identity(&[2]).scale(0.5);
    let zero = Operator::zeros(&[2]);
    let m = Povm::new(vec![half.clone(), half, zero.clone(), zero]).unwrap();
    let p = MeasurementPolytope::from_povms("halves", vec![m]).unwrap();
    assert!(matches!(reduce_strategies(&p), Err(LhsError::UnsupportedPolytope(_))));
    assert!(matches!(polytope_by_name("dodeca"), Err(LhsError::UnknownPolytope(_))));
}

#[test]
fn polytope_hash_is_stable_and_discriminating() {
    assert_eq!(icosahedron_polytope().hash(), icosahedron_polytope().hash());
    assert_ne!(icosahedron_polytope().hash(), octahedron_polytope().hash());
    assert_eq!(icosahedron_polytope().hash().len(), 64);
}

#[test]
fn noisy_povm_is_a_povm_and_interpolates() {
    let m = pyramid_povm([0.0, 0.0, 1.0], 0.4, 0.3).unwrap();
    let full = noisy_povm(&m, &NoiseModel::unbiased(1.0).unwrap()).unwrap();
    for (a, b) in full.elements().iter().zip(m.elements()) {
        assert!(a.max_abs_diff(b) < 1e-14);
    }
    let dead = noisy_povm(&m, &NoiseModel::unbiased(0.0).unwrap()).unwrap();
    for (e, orig) in dead.elements().iter().zip(m.elements()) {
        let w = orig.trace().re / 2.0;
        assert!(e.max_abs_diff(&Operator::identity(&[2]).scale(w)) < 1e-14);
    }
    assert!(NoiseModel::unbiased(1.5).is_err());
    assert!(NoiseModel::new(Operator::identity(&[2]), 0.5).is_err());
}

#[test]
fn assemblage_matches_direct_contraction() {
    let rho = rho_l();
    let povms = [pyramid_povm([0.6, 0.0, 0.8], 0.3, 0.0).unwrap()];
    let sigma = assemblage(&rho, &povms, 0).unwrap();
    // Oracle: explicit index sums over the first qubit.
    for (a, e) in povms[0].elements().iter().enumerate() {
        let mut expect = Operator::zeros(&[2, 2]);
        for r in 0..4 {
            for c in 0..4 {
                let mut v = Complex64::new(0.0, 0.0);
                for i in 0..2 {
                    for j in 0..2 {
                        v += e.get(j, i) * rho.get(i * 4 + r, j * 4 + c);
                    }
                }
                expect.set(r, c, v);
            }
        }
        assert!(sigma[0][a].max_abs_diff(&expect) < 1e-14);
    }
    let total = sigma[0].iter().fold(Operator::zeros(&[2, 2]), |acc, s| &acc + s);
    assert!(total.max_abs_diff(&rho.partial_trace(&[1, 2]).unwrap()) < 1e-14);
}

#[test]
fn pyramid_povm_is_valid() {
    for c in [0.1, 0.3, 0.5, 0.9] {
        let m = pyramid_povm([0.0, 1.0, 0.0], c, 1.1).unwrap();
        assert_eq!(m.outcomes(), 4);
    }
    assert!(pyramid_povm([0.0, 0.0, 1.0], 1.5, 0.0).is_err());
}

#[test]
fn fibonacci_sphere_is_unit_and_spread() {
    let pts = fibonacci_sphere(50);
    assert_eq!(pts.len(), 50);
    for p in &pts {
        assert!((p.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let mean: Vec<f64> = (0..3).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / 50.0).collect();
    assert!(mean.iter().all(|m| m.abs() < 0.05));
}

#[test]
fn octahedron_projective_shrinking_is_inverse_sqrt3() {
    let xi = Operator::maximally_mixed(&[2]);
    let eta = projective_shrinking(&octahedron_polytope(), &xi, &fibonacci_sphere(200)).unwrap();
    assert!((eta - 1.0 / 3f64.sqrt()).abs() < 0.01, "η = {eta}");
}

#[test]
fn single_axis_shrinks_nothing_on_its_own_axis() {
    let xi = Operator::maximally_mixed(&[2]);
    let eta = projective_shrinking(&single_axis(true), &xi, &[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]).unwrap();
    assert!((eta - 1.0).abs() < 1e-6, "η = {eta}");
}

#[test]
fn icosahedron_shrinking_on_a_coarse_grid() {
    let xi = Operator::maximally_mixed(&[2]);
    let p = icosahedron_polytope();
    let coarse = shrinking_factor(&p, &xi, 12).unwrap();
    assert!(coarse.refined_eta <= coarse.grid_eta + 1e-12);
    assert!(coarse.grid_eta <= coarse.projective_eta + 1e-12);
    assert!(coarse.refined_eta > 0.6 && coarse.refined_eta < 0.8, "{coarse:?}");
    let finer = shrinking_factor(&p, &xi, 24).unwrap();
    let union: Vec<Povm> = fibonacci_sphere(12).into_iter().map(|d| pyramid_povm(d, 0.4, 0.0).unwrap()).collect();
    let (sub, _) = grid_minimum(&p, &xi, &union).unwrap();
    assert!(sub >= coarse.grid_eta - 1e-9);
    assert!(finer.grid_eta > 0.6);
}

#[test]
fn grid_minimum_is_monotone_under_refinement() {
    let xi = Operator::maximally_mixed(&[2]);
    let p = octahedron_polytope();
    let coarse: Vec<Povm> = fibonacci_sphere(10).into_iter().map(|d| pyramid_povm(d, 0.3, 0.0).unwrap()).collect();
    let mut fine = coarse.clone();
    fine.extend(fibonacci_sphere(25).into_iter().map(|d| pyramid_povm(d, 0.3, 0.5).unwrap()));
    let (a, _) = grid_minimum(&p, &xi, &coarse).unwrap();
    let (b, _) = grid_minimum(&p, &xi, &fine).unwrap();
    assert!(b <= a + 1e-9);
}

#[test]
fn maximally_mixed_target_is_fully_local() {
    let p = single_axis(true);
    let cert =
        construct_lhs(&DensityMatrix::maximally_mixed(&[2, 2, 2]), &p, &NoiseModel::unbiased(0.8).unwrap()).unwrap();
    assert!((cert.q_star - 1.0).abs() < 1e-6);
    assert!(cert.verification.as_ref().unwrap().passed);
}

#[test]
fn rho_l_admits_an_lhs_model_at_the_shrinking_factor() {
    let p = icosahedron_polytope();
    let cert = construct_lhs(&rho_l(), &p, &NoiseModel::unbiased(0.673).unwrap()).unwrap();
    assert!(cert.q_star >= 0.99, "q* = {}", cert.q_star);
    let check = verify_certificate(&cert, &p).unwrap();
    assert!(check.passed, "{:?}", check.findings);
    assert_eq!(cert.strategy_count, 64);

    let round = LhsCertificate::from_json(&cert.to_json()).unwrap();
    assert!(verify_certificate(&round, &p).unwrap().passed);

    let mut tampered = cert.clone();
    tampered.hidden_states[3] = tampered.hidden_states[3].scale(-1.0);
    let bad = verify_certificate(&tampered, &p).unwrap();
    assert!(!bad.passed);
    assert!(bad.findings.iter().any(|f| f.contains("negative eigenvalue")), "{:?}", bad.findings);

    let other = verify_certificate(&cert, &octahedron_polytope()).unwrap();
    assert!(other.findings.iter().any(|f| f.contains("hash")));
}

#[test]
fn entangled_targets_need_admixed_noise() {
    let p = icosahedron_polytope();
    let noise = NoiseModel::unbiased(0.673).unwrap();
    let g = construct_lhs(&ghz(), &p, &noise).unwrap();
    assert!(g.q_star < 0.5, "GHZ q* = {}", g.q_star);
    assert!(g.verification.as_ref().unwrap().passed);
    let nl = construct_lhs(&rho_nl(), &p, &noise).unwrap();
    assert!(nl.q_star > g.q_star && nl.q_star < 1.0, "ρ_NL q* = {}", nl.q_star);
}

#[test]
fn zero_eta_is_rejected() {
    let p = single_axis(true);
    assert!(construct_lhs(&rho_l(), &p, &NoiseModel::unbiased(0.0).unwrap()).is_err());
}

/// A random qubit effect `0 ⪯ E ⪯ 1` from Bloch data.
fn effect(t: f64, r: f64, theta: f64, phi: f64) -> Operator {
    let radius = r * t.min(1.0 - t);
    let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
    let p = crate::hermlin::pauli::projector(n);
    let q = crate::hermlin::pauli::projector(n.map(|x| -x));
    &p.scale(t + radius) + &q.scale(t - radius)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn noisy_identity_holds_for_any_chi(
        q in 0.0f64..1.0,
        eta in 0.05f64..1.0,
        t in 0.0f64..1.0,
        r in 0.0f64..1.0,
        theta in 0.0f64..std::f64::consts::PI,
        phi in 0.0f64..std::f64::consts::TAU,
    ) {
        // χ built from the mixing identity reproduces the noisy statistics
        // for every effect, not only those of the polytope.
        let target = rho_nl();
        let noise = NoiseModel::unbiased(eta).unwrap();
        let rho_bc = target.partial_trace(&[1, 2]).unwrap();
        let chi_bc = &rho_bc.scale(q) + &Operator::maximally_mixed(&[2, 2]).scale(1.0 - q);
        let mix = &target.scale(q) + &Operator::maximally_mixed(&[2, 2, 2]).scale(1.0 - q);
        let local = crate::hermlin::kron(&noise.xi, &chi_bc).with_dims(&[2, 2, 2]).unwrap();
        let chi = (&mix - &local.scale(1.0 - eta)).scale(1.0 / eta);
        let e = effect(t, r, theta, phi);
        let lhs = chi.left_local(0, &noise.noisy_element(&e)).unwrap().partial_trace(&[1, 2]).unwrap();
        let rhs = mix.left_local(0, &e).unwrap().partial_trace(&[1, 2]).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }
}
