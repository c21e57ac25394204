//! Seeded random operators for tests and spot checks.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{HermitianOperator, Operator};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with i.i.d. complex Gaussian entries.
pub fn random_operator<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> Operator {
    Operator::from_fn(dims, |_, _| gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> HermitianOperator {
    HermitianOperator::project(random_operator(rng, dims))
}

/// Full-rank density matrix `G G† / Tr(G G†)` (Hilbert–Schmidt measure).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dims: &[usize]) -> HermitianOperator {
    let g = random_operator(rng, dims);
    let p = &g * &g.adjoint();
    let t = p.trace().re;
    HermitianOperator::project(p.scale(1.0 / t))
}

/// Haar-random unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n).map(|_| gaussian(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Uniformly distributed point on the unit sphere.
pub fn random_bloch<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}
