//! Dense semidefinite programming.
//!
//! Problems are posed in standard equality form over a product of cones,
//!
//! ```text
//! minimize   Σ_b ⟨C_b, X_b⟩
//! subject to Σ_b ⟨A_ib, X_b⟩ = b_i,   X_b ⪰ 0 (or X_b ≥ 0 entrywise for diagonal blocks)
//! ```
//!
//! with dual `maximize bᵀy s.t. Σ_i y_i A_i + S = C, S ⪰ 0`. Complex Hermitian
//! variables enter through [`embed_hermitian`]; see [`model`].

pub mod model;
mod solver;
mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{embed_hermitian, extract_hermitian, hermitian_basis, hermitian_coeff, HermitianTerm, ModelBuilder};
pub use solver::solve;
pub use verify::{verify_solution, VerificationReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    /// Dense symmetric positive semidefinite block.
    Psd,
    /// Nonnegative vector, i.e. a diagonal PSD block.
    Diagonal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub size: usize,
}

/// Symmetric block coefficient given by its upper-triangle entries `(i, j, v)`
/// with `i ≤ j`; the entry `(j, i)` is implied. Duplicates are summed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymCoeff {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SymCoeff {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn diagonal(index: usize, value: f64) -> Self {
        Self { entries: vec![(index, index, value)] }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            self.entries.push((i, j, v));
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merge duplicate positions and drop zeros.
    pub fn compact(mut self) -> Self {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for (i, j, v) in self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != 0.0);
        Self { entries: out }
    }

    /// Full list of nonzero entries, both triangles.
    pub fn full_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(2 * self.entries.len());
        for &(i, j, v) in &self.entries {
            out.push((i, j, v));
            if i != j {
                out.push((j, i, v));
            }
        }
        out
    }

    /// `⟨A, X⟩` for a dense row-major `n×n` matrix.
    pub fn dot_dense(&self, n: usize, x: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * x[i * n + i] } else { v * (x[i * n + j] + x[j * n + i]) })
            .sum()
    }

    /// `⟨A, diag(x)⟩`.
    pub fn dot_diagonal(&self, x: &[f64]) -> f64 {
        self.entries.iter().filter(|e| e.0 == e.1).map(|&(i, _, v)| v * x[i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v }).sum::<f64>().sqrt()
    }
}

/// One equality `Σ_b ⟨A_b, X_b⟩ = rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: Vec<(usize, SymCoeff)>,
    pub rhs: f64,
}

/// Standard-form SDP (minimization). Serializes to the problem dump format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    pub objective: Vec<(usize, SymCoeff)>,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidProblem(m));
        if self.constraints.is_empty() {
            return bad("constraint list is empty".into());
        }
        if self.blocks.iter().any(|b| b.size == 0) {
            return bad("zero-sized block".into());
        }
        let check = |(block, coeff): &(usize, SymCoeff)| -> Result<(), SolverError> {
            let Some(spec) = self.blocks.get(*block) else {
                return Err(SolverError::InvalidProblem(format!("block {block} does not exist")));
            };
            for &(i, j, v) in &coeff.entries {
                if i > j || j >= spec.size {
                    return Err(SolverError::InvalidProblem(format!(
                        "entry ({i},{j}) invalid for block {block} of size {}",
                        spec.size
                    )));
                }
                if spec.kind == BlockKind::Diagonal && i != j {
                    return Err(SolverError::InvalidProblem(format!("off-diagonal entry in diagonal block {block}")));
                }
                if !v.is_finite() {
                    return Err(SolverError::InvalidProblem("non-finite coefficient".into()));
                }
            }
            Ok(())
        };
        self.objective.iter().try_for_each(check)?;
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return bad("non-finite right-hand side".into());
            }
            c.terms.iter().try_for_each(check)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("problem serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, SolverError> {
        serde_json::from_str(text).map_err(|e| SolverError::InvalidProblem(e.to_string()))
    }

    /// Total cone dimension used to normalize the duality measure.
    pub fn barrier_degree(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    /// `⟨C, X⟩`.
    pub fn primal_objective(&self, x: &[BlockMatrix]) -> f64 {
        self.objective.iter().map(|(b, c)| x[*b].dot(c)).sum()
    }

    /// `A(X)`.
    pub fn apply_constraints(&self, x: &[BlockMatrix]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.terms.iter().map(|(b, a)| x[*b].dot(a)).sum()).collect()
    }
}

/// Value of one block: row-major dense matrix for PSD blocks, the diagonal
/// for diagonal blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    pub kind: BlockKind,
    pub size: usize,
    pub data: Vec<f64>,
}

impl BlockMatrix {
    pub fn zeros(spec: BlockSpec) -> Self {
        let len = match spec.kind {
            BlockKind::Psd => spec.size * spec.size,
            BlockKind::Diagonal => spec.size,
        };
        Self { kind: spec.kind, size: spec.size, data: vec![0.0; len] }
    }

    pub fn dot(&self, c: &SymCoeff) -> f64 {
        match self.kind {
            BlockKind::Psd => c.dot_dense(self.size, &self.data),
            BlockKind::Diagonal => c.dot_diagonal(&self.data),
        }
    }

    /// Adds `alpha * c` in place.
    pub fn add_coeff(&mut self, alpha: f64, c: &SymCoeff) {
        let n = self.size;
        for &(i, j, v) in &c.entries {
            match self.kind {
                BlockKind::Psd => {
                    self.data[i * n + j] += alpha * v;
                    if i != j {
                        self.data[j * n + i] += alpha * v;
                    }
                }
                BlockKind::Diagonal => self.data[i] += alpha * v,
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.kind {
            BlockKind::Psd => self.data[i * self.size + j],
            BlockKind::Diagonal => {
                if i == j {
                    self.data[i]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    pub x: Vec<BlockMatrix>,
    pub y: Vec<f64>,
    pub s: Vec<BlockMatrix>,
    pub status: SolveStatus,
    /// Relative duality gap `|pobj − dobj| / (1 + |pobj| + |dobj|)`.
    pub gap: f64,
    /// Relative primal and dual residual norms.
    pub residuals: Residuals,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub gap_tolerance: f64,
    pub feasibility_tolerance: f64,
    pub max_iterations: usize,
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { gap_tolerance: 1e-8, feasibility_tolerance: 1e-8, max_iterations: 200, step_fraction: 0.98 }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.gap_tolerance > 0.0 && self.feasibility_tolerance > 0.0) {
            return Err(SolverError::InvalidProblem("tolerances must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(SolverError::InvalidProblem("step fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    /// The Schur complement lost positive definiteness. The last iterate is
    /// attached for inspection.
    #[error("Schur complement is numerically singular at iteration {iteration}")]
    IllConditioned { iteration: usize, last: Box<SdpSolution> },
    #[error("solver stopped with status {0:?}")]
    NotOptimal(SolveStatus),
    #[error("inconsistent equality constraints: {0}")]
    Inconsistent(String),
}

#[cfg(test)]
mod tests;
