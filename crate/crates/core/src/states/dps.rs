//! Symmetric-extension (DPS) entanglement test.
//!
//! For a bipartite state `ρ_AB` and level `k`, search for an extension `Y` on
//! `A ⊗ Sym^k(B)` whose marginal on `AB` is `p ρ + (1 − p) 1/N` and whose
//! partial transposes on the last `j` copies (`j = 1..k`) are PSD. Maximizing
//! `p` gives `p* ≥ 1` for states that pass the level, and otherwise a
//! Hermitian witness `W` with `Tr(W ρ) < 0 ≤ Tr(W ς)` for every `ς` in the
//! relaxation.
//!
//! The SDP is posed in dual form: the marginal equality is solved once, and
//! the remaining free coordinates span its kernel.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DensityMatrix, Result, StateError};
use crate::conic::{
    extract_hermitian, solve, BlockKind, BlockSpec, Constraint, SdpProblem, SolveStatus, SolverSettings, SymCoeff,
};
use crate::hermlin::{eig_hermitian, eigenvalues_hermitian, HermitianOperator, Operator};

pub const DEFAULT_DPS_LEVEL: usize = 2;
pub const MAX_DPS_LEVEL: usize = 3;

/// Upper bound placed on the mixing weight so the maximally mixed state
/// yields a bounded problem.
const MIXING_CAP: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeparabilityStatus {
    /// A PPT symmetric extension exists at the tested level. Not a proof of
    /// separability.
    SeparableAtLevel,
    Entangled,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct EntanglementVerdict {
    pub status: SeparabilityStatus,
    pub level: usize,
    /// Normalized to unit Frobenius norm; on the bipartite `[d_A, d_B]` view.
    pub witness: Option<HermitianOperator>,
    /// `Tr(W ρ)`; negative for an entangled verdict.
    pub witness_value: f64,
    /// Largest admissible mixing weight `p*` found by the solver.
    pub mixing_weight: Option<f64>,
    /// Operator-norm residual absorbed into the witness during rechecking.
    pub residual_bound: f64,
    pub note: String,
}

impl EntanglementVerdict {
    fn inconclusive(level: usize, note: String) -> Self {
        Self {
            status: SeparabilityStatus::Inconclusive,
            level,
            witness: None,
            witness_value: f64::NAN,
            mixing_weight: None,
            residual_bound: f64::NAN,
            note,
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Isometry from `Sym^k(C^d)` into `(C^d)^{⊗k}`; columns are the normalized
/// symmetrized occupation states in lexicographic order of multisets.
pub fn symmetric_isometry(d: usize, k: usize) -> DMatrix<f64> {
    let rows = d.pow(k as u32);
    let mut multisets: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..k {
        multisets = multisets
            .into_iter()
            .flat_map(|m| {
                let start = m.last().copied().unwrap_or(0);
                (start..d).map(move |x| {
                    let mut n = m.clone();
                    n.push(x);
                    n
                })
            })
            .collect();
    }
    assert_eq!(multisets.len(), binomial(d + k - 1, k));
    let mut v = DMatrix::zeros(rows, multisets.len());
    for row in 0..rows {
        let mut digits: Vec<usize> = (0..k).map(|p| (row / d.pow((k - 1 - p) as u32)) % d).collect();
        digits.sort_unstable();
        let col = multisets.binary_search(&digits).expect("sorted digits form a multiset");
        v[(row, col)] = 1.0;
    }
    for mut col in v.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    v
}

fn to_matrix(op: &Operator) -> DMatrix<Complex64> {
    let n = op.dim();
    DMatrix::from_row_slice(n, n, op.data())
}

fn to_operator(m: &DMatrix<Complex64>, dims: &[usize]) -> Operator {
    Operator::from_fn(dims, |r, c| m[(r, c)])
}

fn real_to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Coordinates in the orthonormal Hermitian basis used by
/// [`crate::conic::hermitian_basis`]: diagonal entries, then for each `r < c`
/// the symmetric and antisymmetric parts.
fn coords(m: &DMatrix<Complex64>) -> Vec<f64> {
    let n = m.nrows();
    let s2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        out.push(m[(r, r)].re);
    }
    for r in 0..n {
        for c in (r + 1)..n {
            let z = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
            out.push(s2 * z.re);
            out.push(s2 * z.im);
        }
    }
    out
}

fn from_coords(n: usize, x: &[f64]) -> DMatrix<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for r in 0..n {
        m[(r, r)] = Complex64::new(x[r], 0.0);
    }
    let mut k = n;
    for r in 0..n {
        for c in (r + 1)..n {
            let z = Complex64::new(x[k] * s, x[k + 1] * s);
            m[(r, c)] = z;
            m[(c, r)] = z.conj();
            k += 2;
        }
    }
    m
}

/// `E(F)` for Hermitian `F`, as upper-triangle entries.
fn embed_coeff(f: &DMatrix<Complex64>, scale: f64) -> SymCoeff {
    let n = f.nrows();
    let mut c = SymCoeff::new();
    for r in 0..n {
        for col in r..n {
            let z = f[(r, col)];
            c.push(r, col, scale * z.re);
            c.push(r + n, col + n, scale * z.re);
            c.push(r, col + n, -scale * z.im);
            if r != col {
                c.push(col, r + n, -scale * f[(col, r)].im);
            }
        }
    }
    c
}

/// Partial transpose on the listed factors of a matrix on `⊗ dims`.
fn partial_transpose(m: &DMatrix<Complex64>, dims: &[usize], parties: &[usize]) -> DMatrix<Complex64> {
    let op = to_operator(m, dims);
    to_matrix(&op.partial_transpose_set(parties).expect("valid parties"))
}

struct Extension {
    da: usize,
    db: usize,
    level: usize,
    /// `1_A ⊗ V_k`
    v: DMatrix<Complex64>,
    /// Compressions for the partially transposed blocks, `j = 1..=level`.
    compress: Vec<DMatrix<Complex64>>,
}

impl Extension {
    fn new(da: usize, db: usize, level: usize) -> Self {
        let eye_a = DMatrix::<f64>::identity(da, da);
        let v = real_to_complex(&eye_a.kronecker(&symmetric_isometry(db, level)));
        let compress = (1..=level)
            .map(|j| {
                let w = eye_a.kronecker(&symmetric_isometry(db, level - j)).kronecker(&symmetric_isometry(db, j));
                real_to_complex(&w)
            })
            .collect();
        Self { da, db, level, v, compress }
    }

    fn side(&self) -> usize {
        self.v.ncols()
    }

    fn full_dims(&self) -> Vec<usize> {
        let mut d = vec![self.da];
        d.extend(std::iter::repeat_n(self.db, self.level));
        d
    }

    fn lift(&self, y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        &self.v * y * self.v.adjoint()
    }

    /// `Tr_{B₂…B_k}(V Y V†)`.
    fn marginal(&self, y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let x = to_operator(&self.lift(y), &self.full_dims());
        to_matrix(&x.partial_trace(&[0, 1]).expect("valid keep set"))
    }

    /// `V† (W ⊗ 1) V`.
    fn marginal_adjoint(&self, w: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let rest = self.db.pow(self.level as u32 - 1);
        let eye = DMatrix::<Complex64>::identity(rest, rest);
        self.v.adjoint() * w.kronecker(&eye) * &self.v
    }

    fn pt_parties(&self, j: usize) -> Vec<usize> {
        ((self.level - j + 1)..=self.level).collect()
    }

    /// Block `b`: `Y` itself for `b = 0`, otherwise the compressed partial
    /// transpose on the last `b` copies.
    fn block(&self, b: usize, y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        if b == 0 {
            return y.clone();
        }
        let pt = partial_transpose(&self.lift(y), &self.full_dims(), &self.pt_parties(b));
        let w = &self.compress[b - 1];
        w.adjoint() * pt * w
    }

    fn block_adjoint(&self, b: usize, q: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        if b == 0 {
            return q.clone();
        }
        let w = &self.compress[b - 1];
        let pt = partial_transpose(&(w * q * w.adjoint()), &self.full_dims(), &self.pt_parties(b));
        self.v.adjoint() * pt * &self.v
    }

    fn block_side(&self, b: usize) -> usize {
        if b == 0 {
            self.side()
        } else {
            self.compress[b - 1].ncols()
        }
    }
}

fn herm_dims_view(rho: &Operator, cut: &[usize]) -> Result<(Operator, usize, usize)> {
    let parties = rho.dims().len();
    if cut.is_empty() || cut.len() >= parties || cut.iter().any(|&c| c >= parties) {
        return Err(StateError::InvalidState(format!("invalid cut {cut:?} for {parties} parties")));
    }
    let mut perm: Vec<usize> = cut.to_vec();
    perm.sort_unstable();
    perm.dedup();
    if perm.len() != cut.len() {
        return Err(StateError::InvalidState(format!("repeated party in cut {cut:?}")));
    }
    perm.extend((0..parties).filter(|p| !cut.contains(p)));
    let permuted = rho.permute_subsystems(&perm)?;
    let da: usize = cut.iter().map(|&c| rho.dims()[c]).product();
    let db = rho.dim() / da;
    Ok((permuted.with_dims(&[da, db])?, da, db))
}

/// Runs the level-`level` test on the bipartition `cut | rest`.
pub fn certify_entanglement_dps(rho: &DensityMatrix, cut: &[usize], level: usize) -> Result<EntanglementVerdict> {
    if level == 0 {
        return Err(StateError::InvalidState("DPS level must be at least 1".into()));
    }
    let (view, da, db) = herm_dims_view(rho, cut)?;
    let ext = Extension::new(da, db, level);
    let big_n = da * db;
    let n = ext.side();
    let nvars = n * n + 1;
    let rho_m = to_matrix(&view);
    let mixed = DMatrix::<Complex64>::identity(big_n, big_n).map(|z| z / big_n as f64);
    let direction = &rho_m - &mixed;

    // Marginal equality M(Y) − p (ρ − 1/N) = 1/N in coordinates.
    let rows = big_n * big_n;
    let mut e = DMatrix::<f64>::zeros(rows, nvars);
    let mut unit = vec![0.0; n * n];
    for i in 0..n * n {
        unit[i] = 1.0;
        let col = coords(&ext.marginal(&from_coords(n, &unit)));
        unit[i] = 0.0;
        e.set_column(i, &DVector::from_vec(col));
    }
    let p_col: Vec<f64> = coords(&direction).iter().map(|v| -v).collect();
    e.set_column(n * n, &DVector::from_vec(p_col));
    let rhs = DVector::from_vec(coords(&mixed));

    let ey = e.columns(0, n * n).into_owned();
    let Some(gram) = Cholesky::new(&ey * ey.transpose()) else {
        return Ok(EntanglementVerdict::inconclusive(level, "marginal map is rank deficient".into()));
    };
    // Minimum-norm particular solution using the Y part; p₀ = 0.
    let mut x0 = DVector::zeros(nvars);
    x0.rows_mut(0, n * n).copy_from(&(ey.transpose() * gram.solve(&rhs)));

    let eig = SymmetricEigen::new(e.transpose() * &e);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let kernel_idx: Vec<usize> = (0..nvars).filter(|&i| eig.eigenvalues[i] <= 1e-10 * top).collect();
    let kernel = DMatrix::from_fn(nvars, kernel_idx.len(), |r, c| eig.eigenvectors[(r, kernel_idx[c])]);
    let m = kernel.ncols();

    // Blocks: Y, the k transposed blocks, and the cap 2 − p ≥ 0.
    let nblocks = level + 1;
    let mut blocks: Vec<BlockSpec> =
        (0..nblocks).map(|b| BlockSpec { kind: BlockKind::Psd, size: 2 * ext.block_side(b) }).collect();
    blocks.push(BlockSpec { kind: BlockKind::Diagonal, size: 1 });
    let cap = nblocks;

    let y0 = from_coords(n, &x0.as_slice()[..n * n]);
    let p0 = x0[n * n];
    let mut objective: Vec<(usize, SymCoeff)> =
        (0..nblocks).map(|b| (b, embed_coeff(&ext.block(b, &y0), 1.0))).collect();
    objective.push((cap, SymCoeff::diagonal(0, MIXING_CAP - p0)));

    let mut constraints = Vec::with_capacity(m);
    for j in 0..m {
        let col = kernel.column(j);
        let yj = from_coords(n, &col.as_slice()[..n * n]);
        let cj = col[n * n];
        let mut terms: Vec<(usize, SymCoeff)> =
            (0..nblocks).map(|b| (b, embed_coeff(&ext.block(b, &yj), -1.0))).collect();
        if cj != 0.0 {
            terms.push((cap, SymCoeff::diagonal(0, cj)));
        }
        constraints.push(Constraint { terms, rhs: cj });
    }
    let problem = SdpProblem { blocks, objective, constraints };
    let sol = match solve(&problem, &SolverSettings::default()) {
        Ok(s) => s,
        Err(err) => return Ok(EntanglementVerdict::inconclusive(level, format!("solver failure: {err}"))),
    };
    if sol.status != SolveStatus::Optimal {
        return Ok(EntanglementVerdict::inconclusive(level, format!("solver status {:?}", sol.status)));
    }
    let p_star = p0 + sol.dual_objective;
    if p_star >= 1.0 - 1e-7 {
        return Ok(EntanglementVerdict {
            status: SeparabilityStatus::SeparableAtLevel,
            level,
            witness: None,
            witness_value: f64::NAN,
            mixing_weight: Some(p_star),
            residual_bound: 0.0,
            note: format!("PPT symmetric extension found with mixing weight {p_star:.6}"),
        });
    }

    // Witness from the PSD multipliers of each block.
    let mut lambda = DMatrix::<Complex64>::zeros(n, n);
    for b in 0..nblocks {
        let side = ext.block_side(b);
        let q = extract_hermitian(&sol.x[b], &[side]);
        let q = psd_part(&q)?;
        lambda += ext.block_adjoint(b, &to_matrix(&q).map(|z| z * 2.0));
    }
    let lam = DVector::from_vec(coords(&lambda));
    let Some(normal) = Cholesky::new(&ey * ey.transpose()) else {
        return Ok(EntanglementVerdict::inconclusive(level, "witness fit is singular".into()));
    };
    let w_coords = normal.solve(&(&ey * lam));
    let w = from_coords(big_n, w_coords.as_slice());
    recheck_witness(&ext, &view, &w, &lambda, level, p_star)
}

fn psd_part(h: &HermitianOperator) -> Result<Operator> {
    let spec = eig_hermitian(h)?;
    let n = h.dim();
    let mut out = Operator::zeros(h.dims());
    for k in 0..n {
        let l = spec.eigenvalues[k];
        if l <= 0.0 {
            continue;
        }
        let v = spec.vector(k);
        out = &out + &Operator::outer(h.dims(), &v, &v).scale(l);
    }
    Ok(out)
}

/// Confirms `Tr(W ρ) < 0` with `V†(W ⊗ 1)V ⪰ Λ`, where `Λ` is a nonnegative
/// combination of the relaxation's cone adjoints. Any residual is absorbed by
/// shifting `W` by its operator norm times the identity.
fn recheck_witness(
    ext: &Extension,
    view: &Operator,
    w: &DMatrix<Complex64>,
    lambda: &DMatrix<Complex64>,
    level: usize,
    p_star: f64,
) -> Result<EntanglementVerdict> {
    let big_n = ext.da * ext.db;
    let n = ext.side();
    let residual = ext.marginal_adjoint(w) - lambda;
    let r_op = to_operator(&residual, &[n]);
    let r_norm = eigenvalues_hermitian(&HermitianOperator::project(r_op))?.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let shifted = w + DMatrix::<Complex64>::identity(big_n, big_n).map(|z| z * r_norm);
    let w_op = HermitianOperator::project(to_operator(&shifted, &[ext.da, ext.db]));
    let norm = w_op.frobenius_norm();
    if !(norm > 0.0) {
        return Ok(EntanglementVerdict::inconclusive(level, "zero witness".into()));
    }
    let w_op = HermitianOperator::project(w_op.scale(1.0 / norm));
    let value = w_op.expectation(view);
    let status = if value < 0.0 { SeparabilityStatus::Entangled } else { SeparabilityStatus::Inconclusive };
    Ok(EntanglementVerdict {
        status,
        level,
        witness: Some(w_op),
        witness_value: value,
        mixing_weight: Some(p_star),
        residual_bound: r_norm / norm,
        note: format!("mixing weight {p_star:.6}; witness value {value:.3e}"),
    })
}

/// Runs levels `start..=cap` until a level reports entanglement.
pub fn certify_with_escalation(
    rho: &DensityMatrix,
    cut: &[usize],
    start: usize,
    cap: usize,
) -> Result<EntanglementVerdict> {
    let mut last = None;
    for level in start.max(1)..=cap.max(start.max(1)) {
        let v = certify_entanglement_dps(rho, cut, level)?;
        if v.status == SeparabilityStatus::Entangled {
            return Ok(v);
        }
        last = Some(v);
    }
    Ok(last.expect("at least one level runs"))
}

#[cfg(test)]
mod tests {
    use super::super::sigma_fnf;
    use super::*;
    use crate::conic::hermitian_basis;
    use crate::hermlin::random::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn singlet() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [0.0, s, -s, 0.0].map(|x| Complex64::new(x, 0.0));
        DensityMatrix::pure(&[2, 2], &psi).unwrap()
    }

    #[test]
    fn isometry_dimensions_and_orthonormality() {
        for (d, k) in [(2, 1), (4, 2), (3, 3), (4, 0)] {
            let v = symmetric_isometry(d, k);
            assert_eq!(v.ncols(), binomial(d + k - 1, k));
            let g = v.transpose() * &v;
            assert!((g - DMatrix::identity(v.ncols(), v.ncols())).abs().max() < 1e-14);
        }
    }

    #[test]
    fn coordinates_match_basis() {
        let basis = hermitian_basis(&[3]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_hermitian(&mut rng, &[3]);
        let x = coords(&to_matrix(&h));
        for (b, xi) in basis.iter().zip(&x) {
            assert!((b.trace_product(&h).re - xi).abs() < 1e-14);
        }
        assert!((from_coords(3, &x) - to_matrix(&h)).norm() < 1e-14);
    }

    #[test]
    fn adjoints_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ext = Extension::new(2, 3, 2);
        let n = ext.side();
        let y = to_matrix(&random_hermitian(&mut rng, &[n]));
        let w = to_matrix(&random_hermitian(&mut rng, &[6]));
        let lhs = (ext.marginal(&y) * &w).trace();
        let rhs = (&y * ext.marginal_adjoint(&w)).trace();
        assert!((lhs - rhs).norm() < 1e-12);
        for b in 0..=2 {
            let s = ext.block_side(b);
            let q = to_matrix(&random_hermitian(&mut rng, &[s]));
            let lhs = (ext.block(b, &y) * &q).trace();
            let rhs = (&y * ext.block_adjoint(b, &q)).trace();
            assert!((lhs - rhs).norm() < 1e-12, "block {b}");
        }
    }

    #[test]
    fn maximally_mixed_passes_level_two() {
        let rho = DensityMatrix::maximally_mixed(&[2, 4]);
        let v = certify_entanglement_dps(&rho, &[0], 2).unwrap();
        assert_eq!(v.status, SeparabilityStatus::SeparableAtLevel);
    }

    #[test]
    fn singlet_detected_at_level_one() {
        let v = certify_entanglement_dps(&singlet(), &[0], 1).unwrap();
        assert_eq!(v.status, SeparabilityStatus::Entangled);
        let w = v.witness.unwrap();
        assert!(w.expectation(&singlet()) < 0.0);
        // Product states are nonnegative on the witness.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = crate::hermlin::random::random_density(&mut rng, &[2]);
            let b = crate::hermlin::random::random_density(&mut rng, &[2]);
            assert!(w.expectation(&crate::hermlin::kron(&a, &b)) >= -1e-12);
        }
    }

    #[test]
    fn sigma_is_not_detected_by_ppt_alone() {
        let v = certify_entanglement_dps(&sigma_fnf(), &[0], 1).unwrap();
        assert_eq!(v.status, SeparabilityStatus::SeparableAtLevel);
    }

    #[test]
    fn sigma_detected_at_level_two() {
        let sigma = sigma_fnf();
        let v = certify_entanglement_dps(&sigma, &[0], DEFAULT_DPS_LEVEL).unwrap();
        assert_eq!(v.status, SeparabilityStatus::Entangled, "{}", v.note);
        let p = v.mixing_weight.unwrap();
        assert!(p < 1.0 && p > 0.98, "mixing weight {p}");
        let w = v.witness.unwrap();
        assert!((w.frobenius_norm() - 1.0).abs() < 1e-12);
        assert!(w.expectation(&sigma) < 0.0);
        assert!((w.expectation(&sigma) - v.witness_value).abs() < 1e-15);
        // Nonnegative on product states.
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..100 {
            let a = crate::hermlin::random::random_density(&mut rng, &[2]);
            let b = crate::hermlin::random::random_density(&mut rng, &[4]);
            assert!(w.expectation(&crate::hermlin::kron(&a, &b)) >= -1e-12);
        }
    }

    #[test]
    fn bad_arguments() {
        let rho = DensityMatrix::maximally_mixed(&[2, 2]);
        assert!(certify_entanglement_dps(&rho, &[0], 0).is_err());
        assert!(certify_entanglement_dps(&rho, &[0, 1], 1).is_err());
        assert!(certify_entanglement_dps(&rho, &[5], 1).is_err());
    }
}
