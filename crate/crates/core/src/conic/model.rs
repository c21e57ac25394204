//! Building SDPs with complex Hermitian variables.
//!
//! A Hermitian `n×n` variable `Z` is represented by a real symmetric `2n×2n`
//! block `X ⪰ 0` through `Z = (X₁₁ + X₂₂)/2 + i (X₂₁ − X₁₂)/2`. The linear
//! functional `Re Tr(H Z)` then has block coefficient `embed_hermitian(H)/2`,
//! and `X ⪰ 0` implies `Z ⪰ 0`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{BlockKind, BlockMatrix, BlockSpec, Constraint, SdpProblem, SolverError, SymCoeff};
use crate::hermlin::{HermitianOperator, Operator};

/// `[[Re H, −Im H], [Im H, Re H]]`.
pub fn embed_hermitian(h: &HermitianOperator) -> DMatrix<f64> {
    let n = h.dim();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let z = h.get(r, c);
            m[(r, c)] = z.re;
            m[(r + n, c + n)] = z.re;
            m[(r, c + n)] = -z.im;
            m[(r + n, c)] = z.im;
        }
    }
    m
}

/// Block coefficient for `Re Tr(H Z)`; only the Hermitian part of `h` counts.
pub fn hermitian_coeff(h: &Operator) -> SymCoeff {
    let n = h.dim();
    let mut coeff = SymCoeff::new();
    let herm = |r: usize, c: usize| (h.get(r, c) + h.get(c, r).conj()) * 0.5;
    for r in 0..n {
        for c in r..n {
            let z = herm(r, c);
            // E(H)/2 upper triangle: (r,c), (r+n,c+n) carry Re; (r,c+n) carries −Im,
            // (c, r+n) carries −Im of H[c,r] = +Im H[r,c].
            coeff.push(r, c, 0.5 * z.re);
            coeff.push(r + n, c + n, 0.5 * z.re);
            coeff.push(r, c + n, -0.5 * z.im);
            if r != c {
                coeff.push(c, r + n, 0.5 * z.im);
            }
        }
    }
    coeff
}

/// Recovers the Hermitian variable from its real block.
pub fn extract_hermitian(block: &BlockMatrix, dims: &[usize]) -> HermitianOperator {
    assert_eq!(block.kind, BlockKind::Psd, "Hermitian variables live in PSD blocks");
    let n = block.size / 2;
    let x = |r: usize, c: usize| block.get(r, c);
    let op = Operator::from_fn(dims, |r, c| {
        Complex64::new(0.5 * (x(r, c) + x(r + n, c + n)), 0.5 * (x(r + n, c) - x(r, c + n)))
    });
    assert_eq!(op.dim(), n, "dims do not match block size");
    HermitianOperator::project(op)
}

/// Orthonormal basis of the real space of Hermitian operators on `dims`
/// under the Hilbert–Schmidt inner product.
pub fn hermitian_basis(dims: &[usize]) -> Vec<Operator> {
    let n: usize = dims.iter().product();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        let mut e = Operator::zeros(dims);
        e.set(r, r, 1.0.into());
        out.push(e);
    }
    for r in 0..n {
        for c in (r + 1)..n {
            let mut e = Operator::zeros(dims);
            e.set(r, c, s.into());
            e.set(c, r, s.into());
            out.push(e);
            let mut f = Operator::zeros(dims);
            f.set(r, c, Complex64::new(0.0, s));
            f.set(c, r, Complex64::new(0.0, -s));
            out.push(f);
        }
    }
    out
}

/// One summand of a Hermitian-valued affine expression.
pub enum HermitianTerm<'a> {
    /// `L(Z_block)` for a linear map `L`, supplied through its adjoint.
    Map { block: usize, adjoint: &'a dyn Fn(&Operator) -> Operator },
    /// `v · F` with `v` entry `index` of a diagonal block and `F` fixed.
    Scalar { block: usize, index: usize, op: Operator },
}

/// Incremental builder for [`SdpProblem`] (minimization).
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    blocks: Vec<BlockSpec>,
    objective: Vec<(usize, SymCoeff)>,
    rows: Vec<Constraint>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_psd(&mut self, size: usize) -> usize {
        self.blocks.push(BlockSpec { kind: BlockKind::Psd, size });
        self.blocks.len() - 1
    }

    /// PSD block holding a Hermitian variable of side `dim`.
    pub fn add_hermitian(&mut self, dim: usize) -> usize {
        self.add_psd(2 * dim)
    }

    pub fn add_nonneg(&mut self, size: usize) -> usize {
        self.blocks.push(BlockSpec { kind: BlockKind::Diagonal, size });
        self.blocks.len() - 1
    }

    pub fn add_objective(&mut self, block: usize, coeff: SymCoeff) {
        self.objective.push((block, coeff));
    }

    /// Adds `Re Tr(h Z_block)` to the objective.
    pub fn add_objective_hermitian(&mut self, block: usize, h: &Operator) {
        self.objective.push((block, hermitian_coeff(h)));
    }

    pub fn add_row(&mut self, terms: Vec<(usize, SymCoeff)>, rhs: f64) {
        self.rows.push(Constraint { terms, rhs });
    }

    /// Imposes `Σ terms = rhs` as an equality of Hermitian operators on `dims`,
    /// one real row per element of [`hermitian_basis`].
    pub fn add_hermitian_equality(&mut self, dims: &[usize], terms: &[HermitianTerm], rhs: &Operator) {
        for basis in hermitian_basis(dims) {
            let mut row = Vec::with_capacity(terms.len());
            for term in terms {
                match term {
                    HermitianTerm::Map { block, adjoint } => {
                        row.push((*block, hermitian_coeff(&adjoint(&basis))));
                    }
                    HermitianTerm::Scalar { block, index, op } => {
                        let v = basis.trace_product(op).re;
                        if v != 0.0 {
                            row.push((*block, SymCoeff::diagonal(*index, v)));
                        }
                    }
                }
            }
            let row: Vec<(usize, SymCoeff)> = row.into_iter().filter(|(_, c)| !c.is_empty()).collect();
            let b = basis.trace_product(rhs).re;
            if row.is_empty() {
                // A row with no variables must be satisfied by the data alone;
                // keep it only if it is violated so the inconsistency surfaces.
                if b.abs() > 1e-12 {
                    self.rows.push(Constraint { terms: row, rhs: b });
                }
                continue;
            }
            self.rows.push(Constraint { terms: row, rhs: b });
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    /// Drops rows that are linear combinations of earlier ones. Fails if a
    /// dropped row's right-hand side disagrees with the combination.
    /// Returns the number of rows removed.
    pub fn reduce_dependent_rows(&mut self) -> Result<usize, SolverError> {
        let vectors: Vec<Vec<(usize, f64)>> = self.rows.iter().map(|r| self.row_vector(r)).collect();
        let m = vectors.len();
        let dot = |a: &[(usize, f64)], b: &[(usize, f64)]| {
            let (mut i, mut j, mut s) = (0, 0, 0.0);
            while i < a.len() && j < b.len() {
                match a[i].0.cmp(&b[j].0) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        s += a[i].1 * b[j].1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            s
        };

        // Incremental Cholesky of the Gram matrix of the kept rows.
        let mut kept: Vec<usize> = Vec::new();
        let mut l_rows: Vec<Vec<f64>> = Vec::new();
        let mut keep_mask = vec![false; m];
        for i in 0..m {
            let gii = dot(&vectors[i], &vectors[i]);
            let g: Vec<f64> = kept.iter().map(|&k| dot(&vectors[k], &vectors[i])).collect();
            // Forward solve L l = g.
            let mut l = vec![0.0; kept.len()];
            for a in 0..kept.len() {
                let s: f64 = (0..a).map(|b| l_rows[a][b] * l[b]).sum();
                l[a] = (g[a] - s) / l_rows[a][a];
            }
            let resid = gii - l.iter().map(|v| v * v).sum::<f64>();
            if gii > 0.0 && resid > 1e-12 * gii {
                let mut row = l;
                row.push(resid.sqrt());
                l_rows.push(row);
                kept.push(i);
                keep_mask[i] = true;
                continue;
            }
            // Dependent: coefficients c solve Lᵀ c = l.
            let mut coef = vec![0.0; kept.len()];
            for a in (0..kept.len()).rev() {
                let s: f64 = ((a + 1)..kept.len()).map(|b| l_rows[b][a] * coef[b]).sum();
                coef[a] = (l[a] - s) / l_rows[a][a];
            }
            let predicted: f64 = kept.iter().zip(&coef).map(|(&k, c)| c * self.rows[k].rhs).sum();
            let scale = 1.0
                + self.rows[i].rhs.abs()
                + kept.iter().zip(&coef).map(|(&k, c)| (c * self.rows[k].rhs).abs()).sum::<f64>();
            if (predicted - self.rows[i].rhs).abs() > 1e-7 * scale {
                return Err(SolverError::Inconsistent(format!(
                    "row {i} has right-hand side {} but dependent combination gives {predicted}",
                    self.rows[i].rhs
                )));
            }
        }
        let before = self.rows.len();
        let mut idx = 0;
        self.rows.retain(|_| {
            let k = keep_mask[idx];
            idx += 1;
            k
        });
        Ok(before - self.rows.len())
    }

    /// Row as a sorted sparse vector over global coordinates, weighted so the
    /// dot product equals the Frobenius inner product of the coefficients.
    fn row_vector(&self, row: &Constraint) -> Vec<(usize, f64)> {
        let mut offsets = Vec::with_capacity(self.blocks.len());
        let mut acc = 0usize;
        for b in &self.blocks {
            offsets.push(acc);
            acc += b.size * b.size;
        }
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for (blk, coeff) in &row.terms {
            let n = self.blocks[*blk].size;
            for &(i, j, v) in &coeff.entries {
                let w = if i == j { v } else { v * std::f64::consts::SQRT_2 };
                *map.entry(offsets[*blk] + i * n + j).or_insert(0.0) += w;
            }
        }
        map.into_iter().filter(|(_, v)| *v != 0.0).collect()
    }

    pub fn build(self) -> SdpProblem {
        SdpProblem { blocks: self.blocks, objective: self.objective, constraints: self.rows }
    }
}
