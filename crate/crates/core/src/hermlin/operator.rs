use std::ops::{Add, Deref, Mul, Sub};

use num_complex::Complex64;

use super::{LinalgError, Result, HERMITIAN_TOL};

/// Square complex matrix acting on `⊗ₖ C^{dims[k]}`. Serializes through
/// [`super::OperatorFile`].
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(into = "super::OperatorFile", try_from = "super::OperatorFile")]
pub struct Operator {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

fn checked_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(LinalgError::InvalidDims(format!("{dims:?}")));
    }
    Ok(dims.iter().product())
}

impl Operator {
    pub fn new(dims: &[usize], data: Vec<Complex64>) -> Result<Self> {
        let n = checked_dims(dims)?;
        if data.len() != n * n {
            return Err(LinalgError::DimensionMismatch(format!("{} entries for side {n}", data.len())));
        }
        Ok(Self { dims: dims.to_vec(), data })
    }

    pub fn from_real(dims: &[usize], data: &[f64]) -> Result<Self> {
        Self::new(dims, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        Self { dims: dims.to_vec(), data }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        Self { dims: dims.to_vec(), data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self::from_fn(dims, |r, c| if r == c { 1.0.into() } else { 0.0.into() })
    }

    /// Maximally mixed state `1/d` on the given dims.
    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let n: usize = dims.iter().product();
        Self::identity(dims).scale(1.0 / n as f64)
    }

    /// Rank-one operator `|u⟩⟨v|`.
    pub fn outer(dims: &[usize], u: &[Complex64], v: &[Complex64]) -> Self {
        Self::from_fn(dims, |r, c| u[r] * v[c].conj())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Side length of the matrix.
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.dim() + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        let n = self.dim();
        self.data[r * n + c] = v;
    }

    /// Same matrix with a different tensor factorization of equal total size.
    pub fn with_dims(mut self, dims: &[usize]) -> Result<Self> {
        let n = checked_dims(dims)?;
        if n != self.dim() {
            return Err(LinalgError::DimensionMismatch(format!("cannot view side {} as {dims:?}", self.dim())));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(&self.dims, |r, c| self.get(c, r).conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(&self.dims, |r, c| self.get(c, r))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { dims: self.dims.clone(), data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation `max |A_ij − B_ij|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff: side mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Hilbert–Schmidt inner product `Tr(A† B)`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "inner: side mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    /// `Tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        let n = self.dim();
        assert_eq!(n, other.dim(), "trace_product: side mismatch");
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                acc += self.data[r * n + c] * other.data[c * n + r];
            }
        }
        acc
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.dim();
        assert_eq!(n, other.dim(), "matmul: side mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out[r * n..(r + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Self { dims: self.dims.clone(), data: out }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.data[r * n + c] * v[c]).sum()).collect()
    }

    /// Largest deviation from Hermiticity, `max |A_ij − conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    fn check_party(&self, party: usize) -> Result<()> {
        if party >= self.dims.len() {
            return Err(LinalgError::IndexOutOfRange { index: party, count: self.dims.len() });
        }
        Ok(())
    }

    /// Mixed-radix digits of a basis index.
    fn digits(&self, mut idx: usize, out: &mut [usize]) {
        for k in (0..self.dims.len()).rev() {
            out[k] = idx % self.dims[k];
            idx /= self.dims[k];
        }
    }

    fn index_of(dims: &[usize], digits: &[usize]) -> usize {
        digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
    }

    /// Trace out every subsystem not listed in `keep`. The kept subsystems stay
    /// in their original relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let count = self.dims.len();
        if keep.is_empty() {
            return Err(LinalgError::InvalidDims("partial_trace: empty keep set".into()));
        }
        for &k in keep {
            self.check_party(k)?;
        }
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| self.dims[k]).collect();
        let traced: Vec<usize> = (0..count).filter(|k| !keep_sorted.contains(k)).collect();
        let traced_dims: Vec<usize> = traced.iter().map(|&k| self.dims[k]).collect();
        let m: usize = kept_dims.iter().product();
        let t: usize = traced_dims.iter().product();
        let n = self.dim();

        let mut full = vec![0usize; count];
        let mut kd = vec![0usize; keep_sorted.len()];
        let mut td = vec![0usize; traced.len()];
        // Position in the full basis of each (kept index, traced index) pair.
        let mut pos = vec![0usize; m * t];
        for ki in 0..m {
            let mut x = ki;
            for j in (0..kd.len()).rev() {
                kd[j] = x % kept_dims[j];
                x /= kept_dims[j];
            }
            for ti in 0..t {
                let mut y = ti;
                for j in (0..td.len()).rev() {
                    td[j] = y % traced_dims[j];
                    y /= traced_dims[j];
                }
                for (j, &k) in keep_sorted.iter().enumerate() {
                    full[k] = kd[j];
                }
                for (j, &k) in traced.iter().enumerate() {
                    full[k] = td[j];
                }
                pos[ki * t + ti] = Self::index_of(&self.dims, &full);
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); m * m];
        for r in 0..m {
            for c in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for ti in 0..t {
                    acc += self.data[pos[r * t + ti] * n + pos[c * t + ti]];
                }
                out[r * m + c] = acc;
            }
        }
        Ok(Self { dims: kept_dims, data: out })
    }

    /// Transpose on the factor `party` only.
    pub fn partial_transpose(&self, party: usize) -> Result<Self> {
        self.partial_transpose_set(&[party])
    }

    /// Transpose on every factor listed in `parties`.
    pub fn partial_transpose_set(&self, parties: &[usize]) -> Result<Self> {
        for &p in parties {
            self.check_party(p)?;
        }
        let n = self.dim();
        let count = self.dims.len();
        let mut rd = vec![0usize; count];
        let mut cd = vec![0usize; count];
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            self.digits(r, &mut rd);
            for c in 0..n {
                self.digits(c, &mut cd);
                let (mut r2, mut c2) = (rd.clone(), cd.clone());
                for &p in parties {
                    r2[p] = cd[p];
                    c2[p] = rd[p];
                }
                let nr = Self::index_of(&self.dims, &r2);
                let nc = Self::index_of(&self.dims, &c2);
                out[nr * n + nc] = self.data[r * n + c];
            }
        }
        Ok(Self { dims: self.dims.clone(), data: out })
    }

    /// Reorder subsystems: subsystem `k` of the result is subsystem `perm[k]`
    /// of `self`.
    pub fn permute_subsystems(&self, perm: &[usize]) -> Result<Self> {
        let count = self.dims.len();
        let mut seen = vec![false; count];
        if perm.len() != count {
            return Err(LinalgError::DimensionMismatch(format!(
                "permutation of length {} for {count} subsystems",
                perm.len()
            )));
        }
        for &p in perm {
            self.check_party(p)?;
            if seen[p] {
                return Err(LinalgError::InvalidDims(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let n = self.dim();
        let mut map = vec![0usize; n];
        let mut d = vec![0usize; count];
        let mut nd = vec![0usize; count];
        for (i, slot) in map.iter_mut().enumerate() {
            self.digits(i, &mut d);
            for k in 0..count {
                nd[k] = d[perm[k]];
            }
            *slot = Self::index_of(&new_dims, &nd);
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                out[map[r] * n + map[c]] = self.data[r * n + c];
            }
        }
        Ok(Self { dims: new_dims, data: out })
    }

    /// `(1 ⊗ … ⊗ L ⊗ … ⊗ 1) · self`, with `L` acting on factor `party`.
    pub fn left_local(&self, party: usize, local: &Operator) -> Result<Self> {
        self.check_party(party)?;
        let d = self.dims[party];
        if local.dim() != d {
            return Err(LinalgError::DimensionMismatch(format!(
                "local operator of side {} on factor of dim {d}",
                local.dim()
            )));
        }
        let n = self.dim();
        let stride: usize = self.dims[party + 1..].iter().product();
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        let mut digs = vec![0usize; self.dims.len()];
        for r in 0..n {
            self.digits(r, &mut digs);
            let own = digs[party];
            let base = r - own * stride;
            for j in 0..d {
                let l = local.get(own, j);
                if l.re == 0.0 && l.im == 0.0 {
                    continue;
                }
                let src = base + j * stride;
                for c in 0..n {
                    out[r * n + c] += l * self.data[src * n + c];
                }
            }
        }
        Ok(Self { dims: self.dims.clone(), data: out })
    }

    /// `L_party · self · L_party†`.
    pub fn local_sandwich(&self, party: usize, local: &Operator) -> Result<Self> {
        let left = self.left_local(party, local)?;
        Ok(left.adjoint().left_local(party, local)?.adjoint())
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "add: side mismatch");
        Operator { dims: self.dims.clone(), data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "sub: side mismatch");
        Operator { dims: self.dims.clone(), data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.matmul(rhs)
    }
}

/// Kronecker product; the result's dims are `a.dims ++ b.dims`.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let (na, nb) = (a.dim(), b.dim());
    let n = na * nb;
    let mut data = vec![Complex64::new(0.0, 0.0); n * n];
    for ar in 0..na {
        for ac in 0..na {
            let x = a.data[ar * na + ac];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for br in 0..nb {
                let row = (ar * nb + br) * n + ac * nb;
                for bc in 0..nb {
                    data[row + bc] = x * b.data[br * nb + bc];
                }
            }
        }
    }
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    Operator { dims, data }
}

pub fn kron_all<'a>(ops: impl IntoIterator<Item = &'a Operator>) -> Operator {
    let mut it = ops.into_iter();
    let first = it.next().expect("kron_all of empty list").clone();
    it.fold(first, |acc, op| kron(&acc, op))
}

/// An [`Operator`] known to equal its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(Operator);

impl HermitianOperator {
    /// Accepts `op` if its asymmetry is within [`HERMITIAN_TOL`] (relative to
    /// the largest entry when that exceeds one) and stores `(A + A†)/2`.
    pub fn new(op: Operator) -> Result<Self> {
        let defect = op.hermitian_defect();
        if defect > HERMITIAN_TOL * op.max_abs().max(1.0) {
            return Err(LinalgError::NotHermitian(defect));
        }
        Ok(Self::project(op))
    }

    /// Hermitian part `(A + A†)/2`, for operators that are Hermitian in exact
    /// arithmetic but carry accumulated rounding.
    pub fn project(op: Operator) -> Self {
        let adj = op.adjoint();
        Self((&op + &adj).scale(0.5))
    }

    pub fn identity(dims: &[usize]) -> Self {
        Self(Operator::identity(dims))
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self(Operator::zeros(dims))
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    /// Real expectation value `Tr(self · rho)`.
    pub fn expectation(&self, rho: &Operator) -> f64 {
        self.0.trace_product(rho).re
    }
}

impl Deref for HermitianOperator {
    type Target = Operator;
    fn deref(&self) -> &Operator {
        &self.0
    }
}

impl From<HermitianOperator> for Operator {
    fn from(h: HermitianOperator) -> Operator {
        h.0
    }
}
