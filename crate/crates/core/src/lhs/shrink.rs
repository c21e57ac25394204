//! Shrinking factor of a measurement polytope: the largest `η` such that
//! the noisy version of every extremal qubit POVM lies in the polytope's
//! convex hull.

use serde::{Deserialize, Serialize};

use super::{LhsError, MeasurementPolytope, NoiseModel, Result};
use crate::bell::Povm;
use crate::conic::{solve, ModelBuilder, SolveStatus, SolverSettings, SymCoeff};
use crate::hermlin::{pauli, Operator};

/// `n` nearly uniform unit vectors on the golden-angle spiral.
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * (i as f64 + 0.5);
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Orthonormal pair spanning the plane orthogonal to `d`.
fn frame(d: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if d[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = unit(cross(d, helper));
    (e1, cross(d, e1))
}

/// Four-outcome rank-one POVM with one element along `apex` and three along
/// a cone of half-angle `π − α` around it, spaced by `2π/3` starting at
/// `azimuth`. Weights `3c/(3 + 3c)` and `1/(3 + 3c)` with `c = cos α` make
/// the Bloch vectors cancel.
pub fn pyramid_povm(apex: [f64; 3], cos_alpha: f64, azimuth: f64) -> Result<Povm> {
    if !(cos_alpha > 0.0 && cos_alpha < 1.0) {
        return Err(LhsError::InvalidNoise(format!("cos α = {cos_alpha} outside (0, 1)")));
    }
    let d = unit(apex);
    let (e1, e2) = frame(d);
    let sin_alpha = (1.0 - cos_alpha * cos_alpha).sqrt();
    let w = 1.0 / (3.0 + 3.0 * cos_alpha);
    let mut elements = vec![pauli::projector(d).scale(2.0 * 3.0 * cos_alpha * w)];
    for k in 0..3 {
        let phi = azimuth + 2.0 * std::f64::consts::PI * k as f64 / 3.0;
        let n: [f64; 3] =
            std::array::from_fn(|i| -cos_alpha * d[i] + sin_alpha * (phi.cos() * e1[i] + phi.sin() * e2[i]));
        elements.push(pauli::projector(n).scale(2.0 * w));
    }
    Ok(Povm::new(elements)?)
}

fn projective_sample(direction: [f64; 3]) -> Result<Povm> {
    Ok(Povm::projective(direction)?)
}

/// Pauli coordinates of each element, padded with zeros to `outcomes`.
fn coordinates(p: &Povm, outcomes: usize) -> Vec<[f64; 4]> {
    let mut out: Vec<[f64; 4]> = p.elements().iter().map(pauli::coordinates).collect();
    out.resize(outcomes, [0.0; 4]);
    out
}

/// Largest `η ≤ 1` with the noisy `sample` a convex combination of polytope
/// members (outcome by outcome).
fn max_eta(polytope: &[Vec<[f64; 4]>], sample: &Povm, noise_state: &Operator) -> Result<f64> {
    let outcomes = polytope[0].len();
    if sample.outcomes() > outcomes {
        return Err(LhsError::UnsupportedPolytope(format!(
            "sample has {} outcomes, polytope {outcomes}",
            sample.outcomes()
        )));
    }
    let n = polytope.len();
    let (eta, slack) = (n, n + 1);
    let target = coordinates(sample, outcomes);
    let mut mb = ModelBuilder::new();
    let block = mb.add_nonneg(n + 2);
    mb.add_objective(block, SymCoeff::diagonal(eta, -1.0));
    for a in 0..outcomes {
        // Sample element M = (t 1 + v·σ)/2; its noisy version is
        // w 1 + η (M − w 1) with w = Tr(ξ M).
        let m_op = sample.elements().get(a).cloned().unwrap_or_else(|| Operator::zeros(&[2]));
        let w = noise_state.trace_product(&m_op).re;
        let fixed = [2.0 * w, 0.0, 0.0, 0.0];
        for j in 0..4 {
            let mut c = SymCoeff::new();
            for (x, member) in polytope.iter().enumerate() {
                c.push(x, x, member[a][j]);
            }
            c.push(eta, eta, -(target[a][j] - fixed[j]));
            mb.add_row(vec![(block, c)], fixed[j]);
        }
    }
    let mut total = SymCoeff::new();
    for x in 0..n {
        total.push(x, x, 1.0);
    }
    mb.add_row(vec![(block, total)], 1.0);
    let mut cap = SymCoeff::diagonal(eta, 1.0);
    cap.push(slack, slack, 1.0);
    mb.add_row(vec![(block, cap)], 1.0);
    mb.reduce_dependent_rows()?;
    let sol = solve(&mb.build(), &SolverSettings::default())?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol.x[block].get(eta, eta)),
        // η = 0 is always feasible (the identity slot spans any `w 1`), so
        // this only happens for polytopes without trivial members.
        SolveStatus::PrimalInfeasible => Ok(0.0),
        other => Err(crate::conic::SolverError::NotOptimal(other).into()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkSample {
    /// `"projective"` or `"pyramid"`.
    pub family: String,
    pub apex: [f64; 3],
    pub cos_alpha: f64,
    pub azimuth: f64,
    pub eta: f64,
}

impl ShrinkSample {
    fn povm(&self) -> Result<Povm> {
        match self.family.as_str() {
            "projective" => projective_sample(self.apex),
            _ => pyramid_povm(self.apex, self.cos_alpha, self.azimuth),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkingReport {
    pub polytope: String,
    pub resolution: usize,
    pub samples: usize,
    /// Minimum over the grid; certified for every grid POVM.
    pub grid_eta: f64,
    /// Minimum over projective grid samples alone.
    pub projective_eta: f64,
    /// Local refinement below the grid minimum; an estimate, not a certificate.
    pub refined_eta: f64,
    pub worst: ShrinkSample,
    pub refined: ShrinkSample,
}

struct Evaluator {
    reps: Vec<Vec<[f64; 4]>>,
    xi: Operator,
}

impl Evaluator {
    fn new(p: &MeasurementPolytope, xi: &Operator) -> Result<Self> {
        NoiseModel::new(xi.clone(), 1.0)?;
        let outcomes = p.outcomes();
        Ok(Self { reps: p.povms().iter().map(|m| coordinates(m, outcomes)).collect(), xi: xi.clone() })
    }

    fn eta(&self, sample: &Povm) -> Result<f64> {
        max_eta(&self.reps, sample, &self.xi)
    }

    fn evaluate(&self, mut s: ShrinkSample) -> Result<ShrinkSample> {
        s.eta = self.eta(&s.povm()?)?;
        Ok(s)
    }
}

/// Minimum of the max-`η` LP over explicit samples, with the index of the
/// worst one.
pub fn grid_minimum(p: &MeasurementPolytope, xi: &Operator, samples: &[Povm]) -> Result<(f64, usize)> {
    let ev = Evaluator::new(p, xi)?;
    let mut best = (f64::INFINITY, 0);
    for (i, s) in samples.iter().enumerate() {
        let e = ev.eta(s)?;
        if e < best.0 {
            best = (e, i);
        }
    }
    Ok(best)
}

const COS_ALPHA_GRID: [f64; 3] = [0.3, 0.4, 0.5];
const AZIMUTH_STEPS: usize = 4;

fn grid(resolution: usize) -> Vec<ShrinkSample> {
    let directions = fibonacci_sphere(resolution);
    let mut out = Vec::with_capacity(resolution * (1 + COS_ALPHA_GRID.len() * AZIMUTH_STEPS));
    for &d in &directions {
        out.push(ShrinkSample { family: "projective".into(), apex: d, cos_alpha: 0.0, azimuth: 0.0, eta: f64::NAN });
    }
    for &d in &directions {
        for &c in &COS_ALPHA_GRID {
            for k in 0..AZIMUTH_STEPS {
                let azimuth = 2.0 * std::f64::consts::PI / 3.0 * k as f64 / (AZIMUTH_STEPS - 1) as f64;
                out.push(ShrinkSample { family: "pyramid".into(), apex: d, cos_alpha: c, azimuth, eta: f64::NAN });
            }
        }
    }
    out
}

fn evaluate_all(ev: &Evaluator, samples: Vec<ShrinkSample>) -> Result<Vec<ShrinkSample>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(samples.len().max(1));
    let chunk = samples.len().div_ceil(threads).max(1);
    let chunks: Vec<Vec<ShrinkSample>> = samples.chunks(chunk).map(|c| c.to_vec()).collect();
    let results: Vec<Result<Vec<ShrinkSample>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|c| scope.spawn(move || c.into_iter().map(|s| ev.evaluate(s)).collect::<Result<Vec<_>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("grid worker panicked")).collect()
    });
    Ok(results.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
}

fn spherical(d: [f64; 3]) -> (f64, f64) {
    (d[2].clamp(-1.0, 1.0).acos(), d[1].atan2(d[0]))
}

fn from_spherical(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Compass search over apex angles, `cos α`, and azimuth, starting from a
/// pyramid sample.
fn refine(ev: &Evaluator, start: &ShrinkSample) -> Result<ShrinkSample> {
    let (theta, phi) = spherical(start.apex);
    let mut x = [theta, phi, start.cos_alpha, start.azimuth];
    let mut best = start.clone();
    let mut step = [0.05, 0.05, 0.05, 0.1];
    let make = |x: &[f64; 4]| ShrinkSample {
        family: "pyramid".into(),
        apex: from_spherical(x[0], x[1]),
        cos_alpha: x[2].clamp(0.02, 0.98),
        azimuth: x[3],
        eta: f64::NAN,
    };
    let mut evaluations = 0;
    while step.iter().any(|s| *s > 1e-4) && evaluations < 600 {
        let mut improved = false;
        for i in 0..4 {
            for sign in [1.0, -1.0] {
                let mut y = x;
                y[i] += sign * step[i];
                let s = ev.evaluate(make(&y))?;
                evaluations += 1;
                if s.eta < best.eta - 1e-12 {
                    best = s;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step = step.map(|s| s / 2.0);
        }
    }
    Ok(best)
}

/// Grid-certified shrinking factor for noise state `xi`, over projective
/// samples and four-outcome pyramid samples with apexes on a Fibonacci grid
/// of `resolution` directions, plus a local refinement of the worst sample.
pub fn shrinking_factor(p: &MeasurementPolytope, xi: &Operator, resolution: usize) -> Result<ShrinkingReport> {
    if resolution == 0 {
        return Err(LhsError::InvalidNoise("resolution must be positive".into()));
    }
    let ev = Evaluator::new(p, xi)?;
    let evaluated = evaluate_all(&ev, grid(resolution))?;
    let argmin = |family: Option<&str>| {
        evaluated
            .iter()
            .filter(|s| family.is_none_or(|f| s.family == f))
            .fold(None::<&ShrinkSample>, |acc, s| match acc {
                Some(b) if b.eta <= s.eta => Some(b),
                _ => Some(s),
            })
            .expect("nonempty grid")
            .clone()
    };
    let worst = argmin(None);
    let projective_eta = argmin(Some("projective")).eta;
    let pyramid_worst = argmin(Some("pyramid"));
    let refined = refine(&ev, &pyramid_worst)?;
    let refined = if refined.eta < worst.eta { refined } else { worst.clone() };
    Ok(ShrinkingReport {
        polytope: p.name().to_string(),
        resolution,
        samples: evaluated.len(),
        grid_eta: worst.eta,
        projective_eta,
        refined_eta: refined.eta,
        worst,
        refined,
    })
}

/// Minimum over projective samples along `directions` only.
pub fn projective_shrinking(p: &MeasurementPolytope, xi: &Operator, directions: &[[f64; 3]]) -> Result<f64> {
    let samples = directions.iter().map(|&d| projective_sample(d)).collect::<Result<Vec<_>>>()?;
    Ok(grid_minimum(p, xi, &samples)?.0)
}
