//! The state zoo, local filtering, and PPT / entanglement checks.

mod dps;
mod filters;
mod zoo;

pub use dps::{
    certify_entanglement_dps, certify_with_escalation, symmetric_isometry, EntanglementVerdict, SeparabilityStatus,
    DEFAULT_DPS_LEVEL, MAX_DPS_LEVEL,
};
pub use filters::{apply_filters, filters_f, filters_g, FilterSet};
pub use zoo::{rho_l, rho_nl, sigma_fnf, zoo_names, zoo_state};

use std::ops::Deref;

use thiserror::Error;

use crate::conic::SolverError;
use crate::hermlin::{eigenvalues_hermitian, HermitianOperator, LinalgError, Operator};

/// PSD allowance for zoo states, whose entries are four-decimal constants.
pub const ZOO_PSD_TOL: f64 = 1e-3;
/// PSD tolerance for states produced by computation.
pub const COMPUTED_PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StateError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("filtering succeeds with probability {0:.3e}")]
    ZeroProbability(f64),
    #[error("filter set does not fit the state: {0}")]
    FilterMismatch(String),
    #[error("filter is not invertible (|det| = {0:.3e})")]
    NotInvertible(f64),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T> = std::result::Result<T, StateError>;

/// Unit-trace Hermitian operator with minimum eigenvalue at least
/// `-ZOO_PSD_TOL`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(HermitianOperator);

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(StateError::InvalidState(format!("trace {tr}")));
        }
        let min = *eigenvalues_hermitian(&op)?.last().expect("non-empty spectrum");
        if min < -ZOO_PSD_TOL {
            return Err(StateError::InvalidState(format!("minimum eigenvalue {min:.3e}")));
        }
        Ok(Self(op))
    }

    /// Hermitian part of `op` divided by its trace.
    pub fn normalized(op: Operator) -> Result<Self> {
        let tr = op.trace().re;
        if !(tr.abs() > 1e-300) {
            return Err(StateError::InvalidState("zero trace".into()));
        }
        Self::new(HermitianOperator::project(op.scale(1.0 / tr)))
    }

    pub fn maximally_mixed(dims: &[usize]) -> Self {
        Self(HermitianOperator::project(Operator::maximally_mixed(dims)))
    }

    /// Projector onto a normalized pure state.
    pub fn pure(dims: &[usize], psi: &[num_complex::Complex64]) -> Result<Self> {
        Self::normalized(Operator::outer(dims, psi, psi))
    }

    pub fn as_hermitian(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn into_hermitian(self) -> HermitianOperator {
        self.0
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(*eigenvalues_hermitian(&self.0)?.last().expect("non-empty spectrum"))
    }

    /// Same state viewed with a different tensor factorization.
    pub fn with_dims(&self, dims: &[usize]) -> Result<Self> {
        Ok(Self(HermitianOperator::project(self.0.as_operator().clone().with_dims(dims)?)))
    }
}

impl Deref for DensityMatrix {
    type Target = Operator;
    fn deref(&self) -> &Operator {
        self.0.as_operator()
    }
}

/// True iff the partial transpose over `cut` has minimum eigenvalue ≥ −`tol`.
pub fn check_ppt(rho: &Operator, cut: &[usize], tol: f64) -> Result<bool> {
    Ok(min_pt_eigenvalue(rho, cut)? >= -tol)
}

pub fn min_pt_eigenvalue(rho: &Operator, cut: &[usize]) -> Result<f64> {
    let pt = HermitianOperator::project(rho.partial_transpose_set(cut)?);
    Ok(*eigenvalues_hermitian(&pt)?.last().expect("non-empty spectrum"))
}

/// Largest entrywise deviation `max_k |ρ^{T_k} − ρ|` over single-party
/// transposes.
pub fn pt_invariance_defect(rho: &Operator) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..rho.dims().len() {
        worst = worst.max(rho.partial_transpose(k)?.max_abs_diff(rho));
    }
    Ok(worst)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Largest entrywise deviation `max_Π |Π ρ Π† − ρ|` over all subsystem
/// permutations.
pub fn permutation_defect(rho: &Operator) -> Result<f64> {
    let dims = rho.dims();
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(StateError::InvalidState(format!("unequal subsystem dims {dims:?}")));
    }
    let mut worst: f64 = 0.0;
    for perm in permutations(dims.len()) {
        worst = worst.max(rho.permute_subsystems(&perm)?.max_abs_diff(rho));
    }
    Ok(worst)
}

/// True iff `ρ` is invariant under every permutation of its subsystems to 1e-9.
pub fn check_permutation_invariance(rho: &Operator) -> Result<bool> {
    Ok(permutation_defect(rho)? <= 1e-9)
}

/// `Σ_Π Π ρ Π† / n!`.
pub fn symmetrize_parties(rho: &Operator) -> Result<Operator> {
    let perms = permutations(rho.dims().len());
    let mut acc = Operator::zeros(rho.dims());
    for perm in &perms {
        acc = &acc + &rho.permute_subsystems(perm)?;
    }
    Ok(acc.scale(1.0 / perms.len() as f64))
}
