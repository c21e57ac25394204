use num_complex::Complex64;

use super::{DensityMatrix, Result, StateError};
use crate::hermlin::{eigenvalues_hermitian, HermitianOperator, Operator};

/// One invertible 2×2 Kraus operator per party.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterSet {
    filters: Vec<Operator>,
}

fn det2(f: &Operator) -> Complex64 {
    f.get(0, 0) * f.get(1, 1) - f.get(0, 1) * f.get(1, 0)
}

fn largest_singular_value(f: &Operator) -> Result<f64> {
    let gram = HermitianOperator::project(&f.adjoint() * f);
    Ok(eigenvalues_hermitian(&gram)?[0].max(0.0).sqrt())
}

impl FilterSet {
    pub fn new(filters: Vec<Operator>) -> Result<Self> {
        if filters.is_empty() {
            return Err(StateError::FilterMismatch("empty filter set".into()));
        }
        for f in &filters {
            if f.dim() != 2 {
                return Err(StateError::FilterMismatch(format!("filter of side {}", f.dim())));
            }
            let d = det2(f).norm();
            if !(d > 1e-12) {
                return Err(StateError::NotInvertible(d));
            }
        }
        Ok(Self { filters })
    }

    pub fn from_real(filters: &[[f64; 4]]) -> Result<Self> {
        Self::new(filters.iter().map(|f| Operator::from_real(&[2], f).expect("2x2")).collect())
    }

    pub fn identity(parties: usize) -> Self {
        Self { filters: vec![Operator::identity(&[2]); parties] }
    }

    pub fn parties(&self) -> usize {
        self.filters.len()
    }

    pub fn filter(&self, party: usize) -> &Operator {
        &self.filters[party]
    }

    /// Each filter divided by its largest singular value, so `F†F ⪯ 1`.
    pub fn canonical(&self) -> Result<Self> {
        let filters =
            self.filters.iter().map(|f| Ok(f.scale(1.0 / largest_singular_value(f)?))).collect::<Result<Vec<_>>>()?;
        Ok(Self { filters })
    }

    /// Per-party inverses, canonically rescaled.
    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .filters
            .iter()
            .map(|f| {
                let d = det2(f);
                Operator::new(&[2], vec![f.get(1, 1) / d, -f.get(0, 1) / d, -f.get(1, 0) / d, f.get(0, 0) / d])
                    .expect("2x2")
            })
            .collect();
        Self { filters: inv }.canonical()
    }
}

/// `F ρ F† / Tr(F ρ F†)` with `F` the tensor product of the canonically
/// rescaled filters, together with the success probability `Tr(F ρ F†)`.
pub fn apply_filters(rho: &DensityMatrix, filters: &FilterSet) -> Result<(DensityMatrix, f64)> {
    if rho.dims().len() != filters.parties() || rho.dims().iter().any(|&d| d != 2) {
        return Err(StateError::FilterMismatch(format!("{} filters for dims {:?}", filters.parties(), rho.dims())));
    }
    let canon = filters.canonical()?;
    let mut out: Operator = (**rho).clone();
    for (party, f) in canon.filters.iter().enumerate() {
        out = out.local_sandwich(party, f)?;
    }
    let p = out.trace().re;
    if !(p > 1e-14) {
        return Err(StateError::ZeroProbability(p));
    }
    let state = DensityMatrix::new(HermitianOperator::project(out.scale(1.0 / p)))?;
    Ok((state, p))
}

pub fn filters_f() -> FilterSet {
    FilterSet::from_real(&[
        [0.4310, -0.2971, -0.2488, 0.7291],
        [0.0342, -0.0808, -0.3664, 0.8688],
        [0.3268, -0.1873, -0.1773, 0.6440],
    ])
    .expect("published filters are invertible")
}

pub fn filters_g() -> FilterSet {
    FilterSet::from_real(&[
        [0.7291, 0.2971, 0.2488, 0.4310],
        [0.8688, 0.0808, 0.3664, 0.0342],
        [0.6440, 0.1873, 0.1773, 0.3268],
    ])
    .expect("published filters are invertible")
}

#[cfg(test)]
mod tests {
    use super::super::{rho_l, rho_nl};
    use super::*;
    use crate::hermlin::random::{random_density, random_operator};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn published_entries() {
        assert_eq!(filters_f().filter(0).get(0, 0).re, 0.4310);
        assert_eq!(filters_g().filter(1).get(1, 0).re, 0.3664);
    }

    #[test]
    fn f_times_g_is_scalar() {
        let (f, g) = (filters_f(), filters_g());
        let want = [0.2403, 1.0784e-4, 0.1773];
        for (party, &scale) in want.iter().enumerate() {
            let p = f.filter(party) * g.filter(party);
            assert!(p.get(0, 1).norm() <= 5e-4 && p.get(1, 0).norm() <= 5e-4);
            assert!((p.get(0, 0) - p.get(1, 1)).norm() <= 5e-4);
            // Direct 2×2 product of the constants.
            let a = f.filter(party).get(0, 0).re * g.filter(party).get(0, 0).re
                + f.filter(party).get(0, 1).re * g.filter(party).get(1, 0).re;
            assert!((p.get(0, 0).re - a).abs() < 1e-15);
            assert!((p.get(0, 0).re - scale).abs() < 5e-4, "party {party}: {}", p.get(0, 0));
        }
    }

    #[test]
    fn identity_filters_are_neutral() {
        let rho = rho_nl();
        let (out, p) = apply_filters(&rho, &FilterSet::identity(3)).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(out.max_abs_diff(&rho) < 1e-15);
    }

    #[test]
    fn rho_l_filters_back_to_rho_nl() {
        let (back, p) = apply_filters(&rho_l(), &filters_f()).unwrap();
        assert!((&*back - &*rho_nl()).frobenius_norm() < 1e-9);
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn canonical_filters_are_contractions() {
        for set in [filters_f(), filters_g()] {
            let c = set.canonical().unwrap();
            for k in 0..3 {
                let gram = HermitianOperator::project(&c.filter(k).adjoint() * c.filter(k));
                let top = eigenvalues_hermitian(&gram).unwrap()[0];
                assert!((top - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_filter_rejected() {
        assert!(matches!(FilterSet::from_real(&[[1.0, 2.0, 2.0, 4.0]]), Err(StateError::NotInvertible(_))));
    }

    #[test]
    fn party_count_checked() {
        assert!(matches!(apply_filters(&rho_nl(), &FilterSet::identity(2)), Err(StateError::FilterMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn round_trip_through_inverse(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = DensityMatrix::new(random_density(&mut rng, &[2, 2, 2])).unwrap();
            let ops: Vec<Operator> = (0..3).map(|_| random_operator(&mut rng, &[2])).collect();
            // Keep the condition numbers moderate so the tolerance is meaningful.
            prop_assume!(ops.iter().all(|f| det2(f).norm() > 0.1 * f.frobenius_norm().powi(2)));
            let filters = FilterSet::new(ops).unwrap();
            let (mid, p) = apply_filters(&rho, &filters).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0 + 1e-12);
            let (back, _) = apply_filters(&mid, &filters.inverse().unwrap()).unwrap();
            prop_assert!(back.max_abs_diff(&rho) < 1e-9);
        }
    }
}
