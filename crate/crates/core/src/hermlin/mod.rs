//! Dense complex linear algebra on multipartite operators.
//!
//! Operators are stored row-major in the computational product basis
//! `|i₁ i₂ … iₙ⟩`, with the first subsystem the most significant digit. For
//! three qubits the basis order is therefore `|000⟩, |001⟩, …, |111⟩`.

mod eigen;
mod io;
mod operator;
pub mod random;

pub use eigen::{eig_hermitian, eigenvalues_hermitian, is_psd, min_eigenvalue, sym_eigen, Spectrum};
pub use io::OperatorFile;
pub use operator::{kron, kron_all, HermitianOperator, Operator};

use thiserror::Error;

/// Absolute Hermiticity tolerance used when constructing [`HermitianOperator`].
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("subsystem index {index} out of range for {count} subsystems")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid subsystem dimensions: {0}")]
    InvalidDims(String),
    #[error("operator is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("eigensolver did not converge after {0} sweeps")]
    ConvergenceFailure(usize),
    #[error("malformed operator file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Pauli matrices and small helpers shared across modules.
pub mod pauli {
    use super::Operator;
    use num_complex::Complex64;

    pub fn identity() -> Operator {
        Operator::identity(&[2])
    }

    pub fn x() -> Operator {
        Operator::from_real(&[2], &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn y() -> Operator {
        let i = Complex64::i();
        Operator::new(&[2], vec![0.0.into(), -i, i, 0.0.into()]).unwrap()
    }

    pub fn z() -> Operator {
        Operator::from_real(&[2], &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    /// `n·σ` for a (not necessarily unit) Bloch vector.
    pub fn bloch(n: [f64; 3]) -> Operator {
        &(&x().scale(n[0]) + &y().scale(n[1])) + &z().scale(n[2])
    }

    /// Projector `(1 + n·σ)/2` onto the Bloch direction `n`.
    pub fn projector(n: [f64; 3]) -> Operator {
        (&identity() + &bloch(n)).scale(0.5)
    }

    /// Pauli-basis coordinates `(t, x, y, z)` of a 2×2 Hermitian matrix `h`,
    /// so that `h = (t·1 + x σx + y σy + z σz)/2`.
    pub fn coordinates(h: &Operator) -> [f64; 4] {
        let a = h.get(0, 0).re;
        let d = h.get(1, 1).re;
        let b = h.get(0, 1);
        [a + d, 2.0 * b.re, -2.0 * b.im, a - d]
    }
}
