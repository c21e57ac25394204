//! Solution checking that recomputes everything from the problem data.
//!
//! Eigenvalues come from the Jacobi routine in `hermlin`, not from the
//! factorizations used inside the solver.

use serde::{Deserialize, Serialize};

use super::{BlockKind, BlockMatrix, SdpProblem, SdpSolution};
use crate::hermlin::sym_eigen;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `‖A(X) − b‖ / (1 + ‖b‖)`
    pub primal_residual: f64,
    /// `‖C − A*(y) − S‖ / (1 + ‖C‖)`
    pub dual_residual: f64,
    /// `|⟨C,X⟩ − bᵀy| / (1 + |⟨C,X⟩| + |bᵀy|)`
    pub gap: f64,
    pub min_eig_x: Vec<f64>,
    pub min_eig_s: Vec<f64>,
    pub findings: Vec<String>,
    pub passed: bool,
}

fn min_eig(block: &BlockMatrix) -> f64 {
    match block.kind {
        BlockKind::Diagonal => block.data.iter().copied().fold(f64::INFINITY, f64::min),
        BlockKind::Psd => {
            let n = block.size;
            let mut sym = block.data.clone();
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = 0.5 * (sym[i * n + j] + sym[j * n + i]);
                    sym[i * n + j] = v;
                    sym[j * n + i] = v;
                }
            }
            match sym_eigen(n, &sym) {
                Ok((vals, _)) => vals.last().copied().unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            }
        }
    }
}

fn conforms(problem: &SdpProblem, blocks: &[BlockMatrix]) -> bool {
    blocks.len() == problem.blocks.len()
        && blocks.iter().zip(&problem.blocks).all(|(b, spec)| {
            let len = match spec.kind {
                BlockKind::Psd => spec.size * spec.size,
                BlockKind::Diagonal => spec.size,
            };
            b.kind == spec.kind && b.size == spec.size && b.data.len() == len
        })
}

/// Checks primal and dual feasibility, the duality gap and block
/// eigenvalues against `tol`.
pub fn verify_solution(problem: &SdpProblem, sol: &SdpSolution, tol: f64) -> VerificationReport {
    let mut findings = Vec::new();
    if problem.validate().is_err()
        || !conforms(problem, &sol.x)
        || !conforms(problem, &sol.s)
        || sol.y.len() != problem.constraints.len()
    {
        findings.push("solution shape does not match problem".to_string());
        return VerificationReport {
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            gap: f64::INFINITY,
            min_eig_x: Vec::new(),
            min_eig_s: Vec::new(),
            findings,
            passed: false,
        };
    }

    let ax = problem.apply_constraints(&sol.x);
    let b_norm = problem.constraints.iter().map(|c| c.rhs * c.rhs).sum::<f64>().sqrt();
    let rp = ax.iter().zip(&problem.constraints).map(|(a, c)| (a - c.rhs).powi(2)).sum::<f64>().sqrt();
    let primal_residual = rp / (1.0 + b_norm);

    // R = C − A*(y) − S, assembled block by block.
    let mut r: Vec<BlockMatrix> = problem.blocks.iter().map(|s| BlockMatrix::zeros(*s)).collect();
    let mut c_blocks = r.clone();
    for (blk, coeff) in &problem.objective {
        r[*blk].add_coeff(1.0, coeff);
        c_blocks[*blk].add_coeff(1.0, coeff);
    }
    for (con, y) in problem.constraints.iter().zip(&sol.y) {
        for (blk, coeff) in &con.terms {
            r[*blk].add_coeff(-y, coeff);
        }
    }
    for (rb, sb) in r.iter_mut().zip(&sol.s) {
        rb.data.iter_mut().zip(&sb.data).for_each(|(a, s)| *a -= s);
    }
    let c_norm = c_blocks.iter().map(|b| b.frobenius_norm().powi(2)).sum::<f64>().sqrt();
    let rd = r.iter().map(|b| b.frobenius_norm().powi(2)).sum::<f64>().sqrt();
    let dual_residual = rd / (1.0 + c_norm);

    let pobj = problem.primal_objective(&sol.x);
    let dobj: f64 = problem.constraints.iter().zip(&sol.y).map(|(c, y)| c.rhs * y).sum();
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

    let min_eig_x: Vec<f64> = sol.x.iter().map(min_eig).collect();
    let min_eig_s: Vec<f64> = sol.s.iter().map(min_eig).collect();

    if !(primal_residual <= tol) {
        findings.push(format!("primal residual {primal_residual:.3e} exceeds {tol:.1e}"));
    }
    if !(dual_residual <= tol) {
        findings.push(format!("dual residual {dual_residual:.3e} exceeds {tol:.1e}"));
    }
    if !(gap <= tol) {
        findings.push(format!("duality gap {gap:.3e} exceeds {tol:.1e}"));
    }
    for (k, e) in min_eig_x.iter().enumerate() {
        if !(*e >= -tol) {
            findings.push(format!("primal block {k} has negative eigenvalue {e:.3e}"));
        }
    }
    for (k, e) in min_eig_s.iter().enumerate() {
        if !(*e >= -tol) {
            findings.push(format!("dual slack block {k} has negative eigenvalue {e:.3e}"));
        }
    }
    let passed = findings.is_empty();
    VerificationReport { primal_residual, dual_residual, gap, min_eig_x, min_eig_s, findings, passed }
}
