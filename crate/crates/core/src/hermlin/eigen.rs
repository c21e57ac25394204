//! Hermitian eigendecomposition by cyclic Jacobi on the real embedding
//! `[[Re A, −Im A], [Im A, Re A]]`.

use num_complex::Complex64;

use super::{HermitianOperator, LinalgError, Operator, Result};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order and the matching orthonormal eigenvectors
/// (stored as the columns of `eigenvectors`).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Operator,
}

impl Spectrum {
    /// `U Λ U†`.
    pub fn reconstruct(&self) -> Operator {
        let u = &self.eigenvectors;
        let n = u.dim();
        Operator::from_fn(u.dims(), |r, c| (0..n).map(|k| u.get(r, k) * self.eigenvalues[k] * u.get(c, k).conj()).sum())
    }

    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        let n = self.eigenvectors.dim();
        (0..n).map(|r| self.eigenvectors.get(r, k)).collect()
    }

    pub fn min(&self) -> f64 {
        *self.eigenvalues.last().expect("empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Cyclic Jacobi on a dense real symmetric `n×n` matrix (row-major). Returns
/// the eigenvalues (unsorted, matching columns of `vectors` when requested).
fn jacobi(n: usize, a: &mut [f64], mut vectors: Option<&mut [f64]>) -> Result<Vec<f64>> {
    if let Some(v) = vectors.as_deref_mut() {
        v.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::ConvergenceFailure(MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                if let Some(v) = vectors.as_deref_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i * n + i]).collect())
}

/// Eigen-decomposition of a real symmetric matrix given row-major. Returns
/// eigenvalues in descending order and the eigenvector matrix (columns).
pub fn sym_eigen(n: usize, a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(a.len(), n * n, "sym_eigen: expected {n}x{n} input");
    let mut work: Vec<f64> = a.to_vec();
    // Symmetrize the input so rounding asymmetry does not bias the sweep.
    for r in 0..n {
        for c in r + 1..n {
            let m = 0.5 * (work[r * n + c] + work[c * n + r]);
            work[r * n + c] = m;
            work[c * n + r] = m;
        }
    }
    let mut v = vec![0.0; n * n];
    let vals = jacobi(n, &mut work, Some(&mut v))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut vs = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vs[r * n + new] = v[r * n + old];
        }
    }
    Ok((sorted, vs))
}

fn embed(op: &Operator) -> (usize, Vec<f64>) {
    let n = op.dim();
    let m = 2 * n;
    let mut a = vec![0.0; m * m];
    for r in 0..n {
        for c in 0..n {
            let z = op.get(r, c);
            a[r * m + c] = z.re;
            a[(r + n) * m + c + n] = z.re;
            a[r * m + c + n] = -z.im;
            a[(r + n) * m + c] = z.im;
        }
    }
    (m, a)
}

/// Eigenvalues of a Hermitian operator, descending.
pub fn eigenvalues_hermitian(h: &HermitianOperator) -> Result<Vec<f64>> {
    let (m, mut a) = embed(h);
    let mut vals = jacobi(m, &mut a, None)?;
    vals.sort_by(|x, y| y.total_cmp(x));
    // Each eigenvalue of the embedding appears twice.
    Ok(vals.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect())
}

pub fn min_eigenvalue(h: &HermitianOperator) -> Result<f64> {
    Ok(*eigenvalues_hermitian(h)?.last().expect("non-empty"))
}

/// Full eigendecomposition of a Hermitian operator.
///
/// Every eigenvector `u + iv` of `A` yields the two real eigenvectors
/// `[u; v]` and `[−v; u]` of the embedding. Complex eigenvectors are recovered
/// greedily: the real eigenvector with the largest component outside the
/// complex span collected so far is promoted next.
pub fn eig_hermitian(h: &HermitianOperator) -> Result<Spectrum> {
    let n = h.dim();
    let (m, a) = embed(h);
    let (vals, vecs) = sym_eigen(m, &a)?;
    let candidates: Vec<Vec<Complex64>> =
        (0..m).map(|k| (0..n).map(|r| Complex64::new(vecs[r * m + k], vecs[(r + n) * m + k])).collect()).collect();
    let mut used = vec![false; m];
    let mut basis: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(n);
    let mut residuals = candidates.clone();
    while basis.len() < n {
        let (best, _) = residuals
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, r)| (k, r.iter().map(|z| z.norm_sqr()).sum::<f64>()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("candidates exhausted");
        used[best] = true;
        let norm = residuals[best].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(LinalgError::ConvergenceFailure(0));
        }
        let q: Vec<Complex64> = residuals[best].iter().map(|z| z / norm).collect();
        for (k, r) in residuals.iter_mut().enumerate() {
            if used[k] {
                continue;
            }
            let overlap: Complex64 = q.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, qi) in r.iter_mut().zip(&q) {
                *x -= overlap * qi;
            }
        }
        basis.push((vals[best], q));
    }
    // Refine eigenvalues with Rayleigh quotients and sort descending.
    let mut pairs: Vec<(f64, Vec<Complex64>)> = basis
        .into_iter()
        .map(|(_, v)| {
            let hv = h.apply(&v);
            let rq: f64 = v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum();
            (rq, v)
        })
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let eigenvectors = Operator::from_fn(h.dims(), |r, c| pairs[c].1[r]);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// `true` iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(h: &HermitianOperator, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(h)? >= -tol)
}

#[cfg(test)]
mod tests {
    use super::super::random::random_hermitian;
    use super::super::{kron, pauli};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn herm(op: Operator) -> HermitianOperator {
        HermitianOperator::new(op).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let s = eig_hermitian(&HermitianOperator::identity(&[2, 2, 2])).unwrap();
        assert_eq!(s.eigenvalues.len(), 8);
        assert!(s.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));
    }

    #[test]
    fn zz_spectrum() {
        let s = eigenvalues_hermitian(&herm(kron(&pauli::z(), &pauli::z()))).unwrap();
        let expected = [1.0, 1.0, -1.0, -1.0];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dims in [vec![2], vec![2, 2], vec![2, 2, 2], vec![2, 3]] {
            for _ in 0..5 {
                let h = random_hermitian(&mut rng, &dims);
                let s = eig_hermitian(&h).unwrap();
                let err = (&s.reconstruct() - h.as_operator()).frobenius_norm();
                assert!(err <= 1e-10 * h.frobenius_norm(), "reconstruction error {err}");
                let u = &s.eigenvectors;
                let gram = &u.adjoint() * u;
                assert!(gram.max_abs_diff(&Operator::identity(u.dims())) < 1e-10);
                assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn degenerate_spectrum_vectors() {
        // Projector of rank 3 in dimension 8: heavily degenerate.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = random_hermitian(&mut rng, &[2, 2, 2]);
        let s = eig_hermitian(&h).unwrap();
        let p = Operator::from_fn(&[2, 2, 2], |r, c| {
            (0..3).map(|k| s.eigenvectors.get(r, k) * s.eigenvectors.get(c, k).conj()).sum()
        });
        let ps = eig_hermitian(&herm(p.clone())).unwrap();
        assert!((&ps.reconstruct() - &p).frobenius_norm() < 1e-10);
        let gram = &ps.eigenvectors.adjoint() * &ps.eigenvectors;
        assert!(gram.max_abs_diff(&Operator::identity(&[2, 2, 2])) < 1e-10);
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&HermitianOperator::identity(&[2]), 0.0).unwrap());
        assert!(!is_psd(&herm(pauli::z()), 1e-9).unwrap());
    }

    #[test]
    fn eigenvalues_agree_with_full_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_hermitian(&mut rng, &[3, 2]);
        let a = eigenvalues_hermitian(&h).unwrap();
        let b = eig_hermitian(&h).unwrap().eigenvalues;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
