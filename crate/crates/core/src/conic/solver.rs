//! Infeasible-start primal-dual interior point method with the HKM search
//! direction and Mehrotra predictor-corrector steps.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{BlockKind, BlockMatrix, Residuals, SdpProblem, SdpSolution, SolveStatus, SolverError, SolverSettings};

/// Coefficient of one constraint on one block, in the form the Schur
/// assembly wants.
enum Coef {
    /// Both triangles listed.
    Sparse(Vec<(usize, usize, f64)>),
    Dense(DMatrix<f64>),
}

impl Coef {
    fn nnz(&self) -> usize {
        match self {
            Coef::Sparse(e) => e.len(),
            Coef::Dense(m) => m.len(),
        }
    }

    /// `Tr(A G)` for a general square `G`.
    fn trace_with(&self, g: &DMatrix<f64>) -> f64 {
        match self {
            Coef::Sparse(e) => e.iter().map(|&(r, c, v)| v * g[(c, r)]).sum(),
            Coef::Dense(a) => a.dot(&g.transpose()),
        }
    }

    fn add_to(&self, alpha: f64, m: &mut DMatrix<f64>) {
        match self {
            Coef::Sparse(e) => {
                for &(r, c, v) in e {
                    m[(r, c)] += alpha * v;
                }
            }
            Coef::Dense(a) => *m += a * alpha,
        }
    }
}

struct PsdData {
    n: usize,
    rows: Vec<(usize, Coef)>,
    c: DMatrix<f64>,
}

struct DiagData {
    n: usize,
    /// `(constraint, [(index, value)])`
    rows: Vec<(usize, Vec<(usize, f64)>)>,
    c: DVector<f64>,
}

enum Block {
    Psd(PsdData),
    Diag(DiagData),
}

#[derive(Clone)]
enum Mat {
    Psd(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Mat {
    fn inner(&self, other: &Mat) -> f64 {
        match (self, other) {
            (Mat::Psd(a), Mat::Psd(b)) => a.dot(b),
            (Mat::Diag(a), Mat::Diag(b)) => a.dot(b),
            _ => unreachable!("block kinds always agree"),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Mat) {
        match (self, other) {
            (Mat::Psd(a), Mat::Psd(b)) => *a += b * alpha,
            (Mat::Diag(a), Mat::Diag(b)) => a.axpy(alpha, b, 1.0),
            _ => unreachable!("block kinds always agree"),
        }
    }

    fn norm_sq(&self) -> f64 {
        match self {
            Mat::Psd(a) => a.norm_squared(),
            Mat::Diag(a) => a.norm_squared(),
        }
    }

    fn to_block(&self) -> BlockMatrix {
        match self {
            Mat::Psd(a) => {
                let n = a.nrows();
                let mut data = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        data.push(0.5 * (a[(i, j)] + a[(j, i)]));
                    }
                }
                BlockMatrix { kind: BlockKind::Psd, size: n, data }
            }
            Mat::Diag(a) => BlockMatrix { kind: BlockKind::Diagonal, size: a.len(), data: a.iter().copied().collect() },
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `α` with `X + α ΔX ⪰ 0`, given `X ≻ 0`. `None` means unbounded.
fn max_step(x: &Mat, dx: &Mat) -> Option<f64> {
    let lambda_min = match (x, dx) {
        (Mat::Psd(x), Mat::Psd(dx)) => {
            let Some(chol) = Cholesky::new(x.clone()) else {
                return Some(0.0);
            };
            let l = chol.l();
            let a = l.solve_lower_triangular(dx)?;
            let mut w = l.solve_lower_triangular(&a.transpose())?;
            symmetrize(&mut w);
            w.symmetric_eigenvalues().min()
        }
        (Mat::Diag(x), Mat::Diag(dx)) => x.iter().zip(dx.iter()).map(|(x, d)| d / x).fold(f64::INFINITY, f64::min),
        _ => unreachable!("block kinds always agree"),
    };
    (lambda_min < 0.0).then(|| -1.0 / lambda_min)
}

struct Prepared {
    blocks: Vec<Block>,
    b: DVector<f64>,
    m: usize,
}

fn prepare(problem: &SdpProblem) -> Prepared {
    let m = problem.constraints.len();
    let mut blocks: Vec<Block> = problem
        .blocks
        .iter()
        .map(|spec| match spec.kind {
            BlockKind::Psd => {
                Block::Psd(PsdData { n: spec.size, rows: Vec::new(), c: DMatrix::zeros(spec.size, spec.size) })
            }
            BlockKind::Diagonal => {
                Block::Diag(DiagData { n: spec.size, rows: Vec::new(), c: DVector::zeros(spec.size) })
            }
        })
        .collect();

    for (blk, coeff) in &problem.objective {
        match &mut blocks[*blk] {
            Block::Psd(d) => {
                for (r, c, v) in coeff.full_entries() {
                    d.c[(r, c)] += v;
                }
            }
            Block::Diag(d) => {
                for &(i, _, v) in &coeff.entries {
                    d.c[i] += v;
                }
            }
        }
    }

    for (k, con) in problem.constraints.iter().enumerate() {
        // Merge repeated terms on the same block.
        let mut per_block: Vec<(usize, super::SymCoeff)> = Vec::new();
        for (blk, coeff) in &con.terms {
            match per_block.iter_mut().find(|(b, _)| b == blk) {
                Some((_, acc)) => acc.entries.extend_from_slice(&coeff.entries),
                None => per_block.push((*blk, coeff.clone())),
            }
        }
        for (blk, coeff) in per_block {
            let coeff = coeff.compact();
            if coeff.is_empty() {
                continue;
            }
            match &mut blocks[blk] {
                Block::Psd(d) => {
                    let full = coeff.full_entries();
                    let coef = if full.len() * 4 > d.n * d.n {
                        let mut a = DMatrix::zeros(d.n, d.n);
                        for (r, c, v) in full {
                            a[(r, c)] += v;
                        }
                        Coef::Dense(a)
                    } else {
                        Coef::Sparse(full)
                    };
                    d.rows.push((k, coef));
                }
                Block::Diag(d) => {
                    d.rows.push((k, coeff.entries.iter().map(|&(i, _, v)| (i, v)).collect()));
                }
            }
        }
    }

    let b = DVector::from_iterator(m, problem.constraints.iter().map(|c| c.rhs));
    Prepared { blocks, b, m }
}

impl Prepared {
    fn apply(&self, x: &[Mat]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, xm) in self.blocks.iter().zip(x) {
            match (blk, xm) {
                (Block::Psd(d), Mat::Psd(x)) => {
                    for (k, a) in &d.rows {
                        out[*k] += a.trace_with(x);
                    }
                }
                (Block::Diag(d), Mat::Diag(x)) => {
                    for (k, a) in &d.rows {
                        out[*k] += a.iter().map(|&(i, v)| v * x[i]).sum::<f64>();
                    }
                }
                _ => unreachable!("block kinds always agree"),
            }
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<Mat> {
        self.blocks
            .iter()
            .map(|blk| match blk {
                Block::Psd(d) => {
                    let mut m = DMatrix::zeros(d.n, d.n);
                    for (k, a) in &d.rows {
                        a.add_to(y[*k], &mut m);
                    }
                    Mat::Psd(m)
                }
                Block::Diag(d) => {
                    let mut v = DVector::zeros(d.n);
                    for (k, a) in &d.rows {
                        for &(i, c) in a {
                            v[i] += y[*k] * c;
                        }
                    }
                    Mat::Diag(v)
                }
            })
            .collect()
    }

    fn objective(&self) -> Vec<Mat> {
        self.blocks
            .iter()
            .map(|blk| match blk {
                Block::Psd(d) => Mat::Psd(d.c.clone()),
                Block::Diag(d) => Mat::Diag(d.c.clone()),
            })
            .collect()
    }

    /// Schur complement `M_ij = Σ_b Tr(A_ib X_b A_jb S_b⁻¹)`.
    fn schur(&self, x: &[Mat], s_inv: &[Mat]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.m, self.m);
        for ((blk, xm), sm) in self.blocks.iter().zip(x).zip(s_inv) {
            match (blk, xm, sm) {
                (Block::Psd(d), Mat::Psd(x), Mat::Psd(si)) => schur_psd(d, x, si, &mut m),
                (Block::Diag(d), Mat::Diag(x), Mat::Diag(si)) => {
                    let w: Vec<f64> = x.iter().zip(si.iter()).map(|(a, b)| a * b).collect();
                    let mut dense = vec![0.0; d.n];
                    for (a_idx, (ka, ea)) in d.rows.iter().enumerate() {
                        for &(i, v) in ea {
                            dense[i] = v * w[i];
                        }
                        for (kb, eb) in &d.rows[a_idx..] {
                            let val: f64 = eb.iter().map(|&(i, v)| v * dense[i]).sum();
                            m[(*ka, *kb)] += val;
                            if ka != kb {
                                m[(*kb, *ka)] += val;
                            }
                        }
                        for &(i, _) in ea {
                            dense[i] = 0.0;
                        }
                    }
                }
                _ => unreachable!("block kinds always agree"),
            }
        }
        m
    }
}

fn schur_psd(d: &PsdData, x: &DMatrix<f64>, s_inv: &DMatrix<f64>, m: &mut DMatrix<f64>) {
    let rows = &d.rows;
    if rows.is_empty() {
        return;
    }
    let n = d.n;
    let count = rows.len();
    let avg_nnz = rows.iter().map(|(_, a)| a.nnz()).sum::<usize>() as f64 / count as f64;
    let dense_cost = 2.0 * (n * n * n) as f64;
    // Decide per row whether to form G_j = X A_j S⁻¹ explicitly.
    let g: Vec<Option<DMatrix<f64>>> = rows
        .iter()
        .map(|(_, a)| {
            let sparse_cost = a.nnz() as f64 * avg_nnz * count as f64;
            match a {
                Coef::Dense(am) => Some(x * am * s_inv),
                Coef::Sparse(e) if sparse_cost > dense_cost => {
                    let mut am = DMatrix::zeros(n, n);
                    for &(r, c, v) in e {
                        am[(r, c)] += v;
                    }
                    Some(x * am * s_inv)
                }
                Coef::Sparse(_) => None,
            }
        })
        .collect();

    for a_idx in 0..count {
        let (ka, aa) = &rows[a_idx];
        for b_idx in a_idx..count {
            let (kb, ab) = &rows[b_idx];
            let val = if let Some(gb) = &g[b_idx] {
                aa.trace_with(gb)
            } else if let Some(ga) = &g[a_idx] {
                ab.trace_with(ga)
            } else {
                let (Coef::Sparse(ea), Coef::Sparse(eb)) = (aa, ab) else {
                    unreachable!("dense coefficients always have G formed")
                };
                // Tr(A_a X A_b S⁻¹) = Σ v_a w_b X[c,p] S⁻¹[q,r]
                let mut acc = 0.0;
                for &(r, c, v) in ea {
                    for &(p, q, w) in eb {
                        acc += v * w * x[(c, p)] * s_inv[(q, r)];
                    }
                }
                acc
            };
            m[(*ka, *kb)] += val;
            if ka != kb {
                m[(*kb, *ka)] += val;
            }
        }
    }
}

struct Direction {
    dx: Vec<Mat>,
    dy: DVector<f64>,
    ds: Vec<Mat>,
}

struct Iterate {
    x: Vec<Mat>,
    y: DVector<f64>,
    s: Vec<Mat>,
}

/// Solves the SDP to the tolerances in `settings`.
///
/// Non-convergence is reported through [`SolveStatus`]; an `Err` is returned
/// only for malformed input or a numerically singular Schur complement.
pub fn solve(problem: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution, SolverError> {
    problem.validate()?;
    settings.validate()?;
    let prep = prepare(problem);
    let c = prep.objective();
    let nu = problem.barrier_degree() as f64;
    let b_norm = prep.b.norm();
    let c_norm = c.iter().map(Mat::norm_sq).sum::<f64>().sqrt();

    let mut it = initial_point(&prep, &c);
    let mut stalls = 0usize;

    let snapshot = |it: &Iterate, status: SolveStatus, iterations: usize| -> SdpSolution {
        let stats = Stats::compute(&prep, &c, it, b_norm, c_norm);
        SdpSolution {
            x: it.x.iter().map(Mat::to_block).collect(),
            y: it.y.iter().copied().collect(),
            s: it.s.iter().map(Mat::to_block).collect(),
            status,
            gap: stats.gap,
            residuals: Residuals { primal: stats.pinf, dual: stats.dinf },
            primal_objective: stats.pobj,
            dual_objective: stats.dobj,
            iterations,
        }
    };

    for iteration in 0..settings.max_iterations {
        let stats = Stats::compute(&prep, &c, &it, b_norm, c_norm);
        let tol_f = settings.feasibility_tolerance;
        if stats.pinf <= tol_f && stats.dinf <= tol_f && stats.gap <= settings.gap_tolerance {
            return Ok(snapshot(&it, SolveStatus::Optimal, iteration));
        }
        if let Some(status) = stats.infeasibility(tol_f) {
            return Ok(snapshot(&it, status, iteration));
        }

        let mu = stats.xs / nu;
        let s_inv: Vec<Mat> = match it.s.iter().map(invert).collect::<Option<Vec<_>>>() {
            Some(v) => v,
            None => {
                return Err(SolverError::IllConditioned {
                    iteration,
                    last: Box::new(snapshot(&it, SolveStatus::IterationLimit, iteration)),
                })
            }
        };
        let schur = prep.schur(&it.x, &s_inv);
        let Some(chol) = factor_schur(schur) else {
            return Err(SolverError::IllConditioned {
                iteration,
                last: Box::new(snapshot(&it, SolveStatus::IterationLimit, iteration)),
            });
        };

        let predictor = direction(&prep, &it, &s_inv, &chol, &stats, 0.0, None);
        let ap = step_length(&it.x, &predictor.dx, settings.step_fraction);
        let ad = step_length(&it.s, &predictor.ds, settings.step_fraction);
        let xs_aff: f64 =
            it.x.iter()
                .zip(&predictor.dx)
                .zip(it.s.iter().zip(&predictor.ds))
                .map(|((x, dx), (s, ds))| {
                    let mut xa = x.clone();
                    xa.axpy(ap, dx);
                    let mut sa = s.clone();
                    sa.axpy(ad, ds);
                    xa.inner(&sa)
                })
                .sum();
        let sigma = (xs_aff / stats.xs).clamp(0.0, 1.0).powi(3);

        let corrector = direction(&prep, &it, &s_inv, &chol, &stats, sigma * mu, Some((&predictor.dx, &predictor.ds)));
        let ap = step_length(&it.x, &corrector.dx, settings.step_fraction);
        let ad = step_length(&it.s, &corrector.ds, settings.step_fraction);

        for (x, dx) in it.x.iter_mut().zip(&corrector.dx) {
            x.axpy(ap, dx);
        }
        for (s, ds) in it.s.iter_mut().zip(&corrector.ds) {
            s.axpy(ad, ds);
        }
        it.y.axpy(ad, &corrector.dy, 1.0);

        if ap.max(ad) < 1e-9 {
            stalls += 1;
            if stalls >= 3 {
                return Ok(snapshot(&it, SolveStatus::IterationLimit, iteration + 1));
            }
        } else {
            stalls = 0;
        }
    }
    let final_stats = Stats::compute(&prep, &c, &it, b_norm, c_norm);
    let status = if final_stats.pinf <= settings.feasibility_tolerance
        && final_stats.dinf <= settings.feasibility_tolerance
        && final_stats.gap <= settings.gap_tolerance
    {
        SolveStatus::Optimal
    } else {
        SolveStatus::IterationLimit
    };
    Ok(snapshot(&it, status, settings.max_iterations))
}

fn initial_point(prep: &Prepared, c: &[Mat]) -> Iterate {
    let mut a_norms = vec![0.0f64; prep.m];
    let mut x = Vec::with_capacity(prep.blocks.len());
    let mut s = Vec::with_capacity(prep.blocks.len());
    for (blk, cm) in prep.blocks.iter().zip(c) {
        a_norms.iter_mut().for_each(|v| *v = 0.0);
        let n = match blk {
            Block::Psd(d) => {
                for (k, a) in &d.rows {
                    a_norms[*k] = match a {
                        Coef::Sparse(e) => e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt(),
                        Coef::Dense(m) => m.norm(),
                    };
                }
                d.n
            }
            Block::Diag(d) => {
                for (k, a) in &d.rows {
                    a_norms[*k] = a.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
                }
                d.n
            }
        };
        let nf = n as f64;
        let ratio = prep
            .b
            .iter()
            .zip(&a_norms)
            .filter(|(_, an)| **an > 0.0)
            .map(|(b, an)| (1.0 + b.abs()) / (1.0 + an))
            .fold(0.0, f64::max);
        let zeta = 10f64.max(nf.sqrt()).max(nf * ratio);
        let a_max = a_norms.iter().copied().fold(0.0, f64::max);
        let eta = 10f64.max(nf.sqrt()).max(a_max).max(cm.norm_sq().sqrt());
        match blk {
            Block::Psd(_) => {
                x.push(Mat::Psd(DMatrix::identity(n, n) * zeta));
                s.push(Mat::Psd(DMatrix::identity(n, n) * eta));
            }
            Block::Diag(_) => {
                x.push(Mat::Diag(DVector::from_element(n, zeta)));
                s.push(Mat::Diag(DVector::from_element(n, eta)));
            }
        }
    }
    Iterate { x, y: DVector::zeros(prep.m), s }
}

/// Cholesky of the Schur complement. Near degenerate optima it can lose
/// definiteness to rounding, so a small diagonal shift is tried before giving up.
fn factor_schur(m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Some(chol);
    }
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    [1e-14, 1e-12, 1e-10].into_iter().find_map(|shift| {
        let mut shifted = m.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += shift * scale;
        }
        Cholesky::new(shifted)
    })
}

fn invert(s: &Mat) -> Option<Mat> {
    match s {
        Mat::Psd(s) => {
            let mut inv = Cholesky::new(s.clone())?.inverse();
            symmetrize(&mut inv);
            Some(Mat::Psd(inv))
        }
        Mat::Diag(s) => {
            if s.iter().any(|v| *v <= 0.0) {
                return None;
            }
            Some(Mat::Diag(s.map(|v| 1.0 / v)))
        }
    }
}

fn step_length(x: &[Mat], dx: &[Mat], fraction: f64) -> f64 {
    let bound = x.iter().zip(dx).filter_map(|(x, dx)| max_step(x, dx)).fold(f64::INFINITY, f64::min);
    (fraction * bound).min(1.0)
}

struct Stats {
    rp: DVector<f64>,
    rd: Vec<Mat>,
    pobj: f64,
    dobj: f64,
    xs: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
    /// `‖A*(y) + S‖`, the dual certificate residual.
    dual_ray_residual: f64,
    /// `‖A(X)‖`.
    primal_ray_residual: f64,
}

impl Stats {
    fn compute(prep: &Prepared, c: &[Mat], it: &Iterate, b_norm: f64, c_norm: f64) -> Self {
        let ax = prep.apply(&it.x);
        let rp = &prep.b - &ax;
        let aty = prep.adjoint(&it.y);
        let mut rd = Vec::with_capacity(c.len());
        let mut ray = 0.0;
        for ((cm, am), sm) in c.iter().zip(&aty).zip(&it.s) {
            let mut r = cm.clone();
            r.axpy(-1.0, am);
            r.axpy(-1.0, sm);
            rd.push(r);
            let mut sum = am.clone();
            sum.axpy(1.0, sm);
            ray += sum.norm_sq();
        }
        let pobj: f64 = c.iter().zip(&it.x).map(|(c, x)| c.inner(x)).sum();
        let dobj = prep.b.dot(&it.y);
        let xs: f64 = it.x.iter().zip(&it.s).map(|(x, s)| x.inner(s)).sum();
        let denom = 1.0 + pobj.abs() + dobj.abs();
        let gap = ((pobj - dobj).abs() / denom).max(xs.max(0.0) / denom);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.iter().map(Mat::norm_sq).sum::<f64>().sqrt() / (1.0 + c_norm);
        Self { rp, rd, pobj, dobj, xs, pinf, dinf, gap, dual_ray_residual: ray.sqrt(), primal_ray_residual: ax.norm() }
    }

    /// Farkas-type certificates read off the current iterate.
    fn infeasibility(&self, tol: f64) -> Option<SolveStatus> {
        if self.dobj > 0.0 && self.dual_ray_residual / self.dobj < tol {
            return Some(SolveStatus::PrimalInfeasible);
        }
        if self.pobj < 0.0 && self.primal_ray_residual / (-self.pobj) < tol {
            return Some(SolveStatus::DualInfeasible);
        }
        None
    }
}

fn direction(
    prep: &Prepared,
    it: &Iterate,
    s_inv: &[Mat],
    chol: &Cholesky<f64, nalgebra::Dyn>,
    stats: &Stats,
    sigma_mu: f64,
    second_order: Option<(&[Mat], &[Mat])>,
) -> Direction {
    // R_c S⁻¹ with R_c = σμ I − X S − ΔXp ΔSp, i.e. σμ S⁻¹ − X − ΔXp ΔSp S⁻¹.
    let rc_sinv: Vec<Mat> =
        it.x.iter()
            .zip(s_inv)
            .enumerate()
            .map(|(b, (x, si))| match (x, si) {
                (Mat::Psd(x), Mat::Psd(si)) => {
                    let mut t = si * sigma_mu - x;
                    if let Some((dxp, dsp)) = second_order {
                        let (Mat::Psd(dxp), Mat::Psd(dsp)) = (&dxp[b], &dsp[b]) else { unreachable!() };
                        t -= dxp * (dsp * si);
                    }
                    Mat::Psd(t)
                }
                (Mat::Diag(x), Mat::Diag(si)) => {
                    let mut t = si * sigma_mu - x;
                    if let Some((dxp, dsp)) = second_order {
                        let (Mat::Diag(dxp), Mat::Diag(dsp)) = (&dxp[b], &dsp[b]) else { unreachable!() };
                        t -= dxp.component_mul(dsp).component_mul(si);
                    }
                    Mat::Diag(t)
                }
                _ => unreachable!("block kinds always agree"),
            })
            .collect();

    // T = sym(R_c S⁻¹ − X R_d S⁻¹)
    let t: Vec<Mat> = rc_sinv
        .iter()
        .zip(&it.x)
        .zip(s_inv.iter().zip(&stats.rd))
        .map(|((rcs, x), (si, rd))| match (rcs, x, si, rd) {
            (Mat::Psd(rcs), Mat::Psd(x), Mat::Psd(si), Mat::Psd(rd)) => {
                let mut t = rcs - x * (rd * si);
                symmetrize(&mut t);
                Mat::Psd(t)
            }
            (Mat::Diag(rcs), Mat::Diag(x), Mat::Diag(si), Mat::Diag(rd)) => {
                Mat::Diag(rcs - x.component_mul(rd).component_mul(si))
            }
            _ => unreachable!("block kinds always agree"),
        })
        .collect();

    let rhs = &stats.rp - prep.apply(&t);
    let dy = chol.solve(&rhs);
    let aty = prep.adjoint(&dy);
    let ds: Vec<Mat> = stats
        .rd
        .iter()
        .zip(&aty)
        .map(|(rd, a)| {
            let mut d = rd.clone();
            d.axpy(-1.0, a);
            d
        })
        .collect();
    let dx: Vec<Mat> = rc_sinv
        .iter()
        .zip(&it.x)
        .zip(s_inv.iter().zip(&ds))
        .map(|((rcs, x), (si, ds))| match (rcs, x, si, ds) {
            (Mat::Psd(rcs), Mat::Psd(x), Mat::Psd(si), Mat::Psd(ds)) => {
                let mut d = rcs - x * (ds * si);
                symmetrize(&mut d);
                Mat::Psd(d)
            }
            (Mat::Diag(rcs), Mat::Diag(x), Mat::Diag(si), Mat::Diag(ds)) => {
                Mat::Diag(rcs - x.component_mul(ds).component_mul(si))
            }
            _ => unreachable!("block kinds always agree"),
        })
        .collect();
    Direction { dx, dy, ds }
}
