use std::process::Command;

use boundloc::bell::{bell_operator, seesaw_measurements, sliwa5, MeasurementSet, MeasurementStep, Povm};
use boundloc::cli::Report;
use boundloc::hermlin::random::random_bloch;
use boundloc::states::{apply_filters, filters_f, rho_l, rho_nl};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_measurements(rng: &mut ChaCha8Rng) -> MeasurementSet {
    let parties = (0..3).map(|_| (0..2).map(|_| Povm::projective(random_bloch(rng)).unwrap()).collect()).collect();
    MeasurementSet::new(parties).unwrap()
}

#[test]
fn rho_l_never_violates_the_local_bound() {
    // The LHS model covers every measurement, so no choice may exceed 3.
    let ineq = sliwa5();
    let rho = rho_l();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let q = bell_operator(&ineq, &random_measurements(&mut rng)).unwrap().expectation(&rho);
        assert!(q <= 3.0 + 1e-9, "Q = {q}");
    }
    // Measurement-only see-saw: the strongest attack at fixed state.
    for _ in 0..3 {
        let mut m = random_measurements(&mut rng);
        for _ in 0..30 {
            for party in 0..3 {
                let povms = seesaw_measurements(&rho, &ineq, party, &m, MeasurementStep::Povm).unwrap();
                m.replace_party(party, povms).unwrap();
            }
        }
        let q = bell_operator(&ineq, &m).unwrap().expectation(&rho);
        assert!(q <= 3.0 + 1e-6, "optimized Q = {q}");
    }
}

#[test]
fn filtering_activates_nonlocality() {
    let (filtered, p) = apply_filters(&rho_l(), &filters_f()).unwrap();
    assert!(p > 0.0 && p < 1.0);
    let b = bell_operator(&sliwa5(), &boundloc::bell::paper_measurements()).unwrap();
    assert!(b.expectation(&filtered) > 3.01);
    assert!((b.expectation(&filtered) - b.expectation(&rho_nl())).abs() < 1e-8);
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_boundloc"))
}

#[test]
fn binary_reports_are_deterministic_and_honor_the_seed_variable() {
    let run = || {
        let out = binary().args(["reproduce", "--target", "local-bound"]).env("BOUNDLOC_SEED", "9").output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        Report::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.seed, 9);
    assert_eq!(a.determinism_hash, b.determinism_hash);
}

#[test]
fn binary_zoo_dump_and_errors() {
    let out = binary().args(["zoo", "dump", "sigma_fnf"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let op = boundloc::hermlin::Operator::from_json(std::str::from_utf8(&out.stdout).unwrap().trim()).unwrap();
    assert_eq!(op.dims(), [2, 4]);
    assert_eq!(binary().args(["zoo", "dump", "nope"]).output().unwrap().status.code(), Some(2));
    assert_eq!(binary().args(["lhs", "verify", "/nonexistent.json"]).output().unwrap().status.code(), Some(2));
}
