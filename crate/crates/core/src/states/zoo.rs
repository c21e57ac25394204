use super::{apply_filters, filters_g, DensityMatrix};
use crate::hermlin::{kron, HermitianOperator, Operator};

/// Three-qubit nonlocal PPT state. Entries are the published four-decimal
/// values; indices are 1-based as `(row, column)` in the `|000⟩ … |111⟩` basis.
pub fn rho_nl() -> DensityMatrix {
    const ENTRIES: &[(f64, &[(usize, usize)])] = &[
        (0.0290, &[(1, 1)]),
        (-0.0098, &[(1, 2), (1, 3), (1, 5)]),
        (-0.0083, &[(1, 4), (1, 6), (1, 7), (2, 3), (2, 5), (3, 5)]),
        (0.0646, &[(1, 8), (2, 7), (3, 6), (4, 5)]),
        (0.0412, &[(2, 2), (3, 3), (5, 5)]),
        (-0.0335, &[(2, 4), (2, 6), (3, 4), (3, 7), (5, 6), (5, 7)]),
        (-0.0598, &[(2, 8), (3, 8), (4, 6), (4, 7), (5, 8), (6, 7)]),
        (0.1352, &[(4, 4), (6, 6), (7, 7)]),
        (0.0102, &[(4, 8), (6, 8), (7, 8)]),
        (0.4418, &[(8, 8)]),
    ];
    let mut m = [0.0f64; 64];
    for (v, positions) in ENTRIES {
        for &(i, j) in *positions {
            m[(i - 1) * 8 + (j - 1)] = *v;
            m[(j - 1) * 8 + (i - 1)] = *v;
        }
    }
    let op = Operator::from_real(&[2, 2, 2], &m).expect("8x8 literal");
    DensityMatrix::new(HermitianOperator::project(op)).expect("zoo constant is a valid state")
}

/// The local state obtained by filtering `rho_nl` with the inverse filters.
pub fn rho_l() -> DensityMatrix {
    apply_filters(&rho_nl(), &filters_g()).expect("invertible filters").0
}

/// Bipartite 2×4 PPT entangled state in filter normal form,
/// `σ = (1 + Σ_k ξ_k H_k^A ⊗ H_k^B) / 8`.
pub fn sigma_fnf() -> DensityMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let xi = [1.3219, 1.3219, 1.1348];
    let ha = [
        Operator::from_real(&[2], &[0.0, 0.0, 1.0, 0.0]).unwrap(),
        Operator::from_real(&[2], &[0.0, -1.0, 0.0, 0.0]).unwrap(),
        Operator::from_real(&[2], &[s, 0.0, 0.0, -s]).unwrap(),
    ];
    let (p, q) = (0.6393, 0.4158);
    let r = 0.0983;
    #[rustfmt::skip]
    let hb = [
        Operator::from_real(&[4], &[
            0.0, 0.0, 0.0, -r,
            -p, 0.0, 0.0, 0.0,
            0.0, -q, 0.0, 0.0,
            0.0, 0.0, -p, 0.0,
        ]).unwrap(),
        Operator::from_real(&[4], &[
            0.0, p, 0.0, 0.0,
            0.0, 0.0, q, 0.0,
            0.0, 0.0, 0.0, p,
            r, 0.0, 0.0, 0.0,
        ]).unwrap(),
        Operator::from_real(&[4], &[
            -0.4859, 0.0, 0.0, 0.0,
            0.0, -0.5137, 0.0, 0.0,
            0.0, 0.0, 0.5137, 0.0,
            0.0, 0.0, 0.0, 0.4859,
        ]).unwrap(),
    ];
    let mut acc = Operator::identity(&[2, 4]);
    for ((x, a), b) in xi.iter().zip(&ha).zip(&hb) {
        acc = &acc + &kron(a, b).scale(*x);
    }
    let op = HermitianOperator::new(acc.scale(1.0 / 8.0)).expect("ξ₁ = ξ₂ pairing is Hermitian");
    DensityMatrix::new(op).expect("zoo constant is a valid state")
}

pub fn zoo_names() -> &'static [&'static str] {
    &["rho_nl", "rho_l", "sigma_fnf"]
}

pub fn zoo_state(name: &str) -> Option<DensityMatrix> {
    match name {
        "rho_nl" => Some(rho_nl()),
        "rho_l" => Some(rho_l()),
        "sigma_fnf" => Some(sigma_fnf()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{
        check_permutation_invariance, check_ppt, min_pt_eigenvalue, pt_invariance_defect, COMPUTED_PSD_TOL, ZOO_PSD_TOL,
    };
    use super::*;

    #[test]
    fn rho_nl_literal_entries() {
        let r = rho_nl();
        assert_eq!(r.get(0, 7).re, 0.0646);
        assert_eq!(r.get(7, 0).re, 0.0646);
        assert_eq!(r.get(7, 7).re, 0.4418);
        let diag = 0.0290 + 3.0 * 0.0412 + 3.0 * 0.1352 + 0.4418;
        assert!((r.trace().re - diag).abs() < 1e-15);
        assert!((r.trace().re - 1.0).abs() < 1e-12);
        assert_eq!(r.transpose(), *r.as_hermitian().as_operator());
    }

    #[test]
    fn rho_nl_symmetries() {
        let r = rho_nl();
        assert!(pt_invariance_defect(&r).unwrap() <= 1e-12);
        assert!(check_permutation_invariance(&r).unwrap());
        assert!(r.min_eigenvalue().unwrap() >= -ZOO_PSD_TOL);
        for k in 0..3 {
            assert!(check_ppt(&r, &[k], ZOO_PSD_TOL).unwrap());
        }
    }

    #[test]
    fn rho_l_is_valid_and_ppt() {
        let r = rho_l();
        assert!((r.trace().re - 1.0).abs() < 1e-12);
        assert!(r.min_eigenvalue().unwrap() > -COMPUTED_PSD_TOL);
        for cut in [vec![0], vec![1], vec![2]] {
            assert!(check_ppt(&r, &cut, COMPUTED_PSD_TOL).unwrap());
        }
    }

    #[test]
    fn sigma_constants_and_marginals() {
        let s = sigma_fnf();
        assert!(s.hermitian_defect() <= 1e-12);
        let a = s.partial_trace(&[0]).unwrap();
        let b = s.partial_trace(&[1]).unwrap();
        assert!(a.max_abs_diff(&Operator::maximally_mixed(&[2])) < 1e-3);
        assert!(b.max_abs_diff(&Operator::maximally_mixed(&[4])) < 1e-3);
        assert!(min_pt_eigenvalue(&s, &[0]).unwrap() >= -1e-3);
        assert!(check_ppt(&s, &[0], ZOO_PSD_TOL).unwrap());
        // ξ₃ term: ⟨00|σ|00⟩ = (1 + ξ₃ · (1/√2) · (−0.4859)) / 8.
        let want = (1.0 + 1.1348 * std::f64::consts::FRAC_1_SQRT_2 * -0.4859) / 8.0;
        assert!((s.get(0, 0).re - want).abs() < 1e-15);
    }

    #[test]
    fn zoo_lookup() {
        assert_eq!(zoo_names().len(), 3);
        for name in zoo_names() {
            assert!(zoo_state(name).is_some());
        }
        assert!(zoo_state("ghz").is_none());
    }
}
