//! Local-hidden-state models for the first party: finite measurement
//! polytopes, the deterministic strategies over them, shrinking factors, and
//! the SDP that certifies a state as unsteerable for all POVMs.

mod certificate;
mod shrink;

pub use certificate::{construct_lhs, verify_certificate, LhsCertificate, LhsVerification, CERTIFICATE_TOL};
pub use shrink::{
    fibonacci_sphere, grid_minimum, projective_shrinking, pyramid_povm, shrinking_factor, ShrinkSample, ShrinkingReport,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bell::{BellError, Povm};
use crate::conic::SolverError;
use crate::hermlin::{eigenvalues_hermitian, pauli, HermitianOperator, LinalgError, Operator};
use crate::states::StateError;

#[derive(Debug, Error)]
pub enum LhsError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Bell(#[from] BellError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("solver failure: {0}")]
    SolverFailure(#[from] SolverError),
    #[error("polytope lacks the relabelling structure: {0}")]
    UnsupportedPolytope(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("the LHS program is infeasible for every q in [0, 1]")]
    Infeasible,
    #[error("unknown polytope {0:?}")]
    UnknownPolytope(String),
    #[error("malformed certificate: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LhsError>;

/// Threshold below which an operator entry counts as zero.
const ZERO_TOL: f64 = 1e-12;

/// A finite set of qubit POVMs with a common outcome count.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPolytope {
    name: String,
    povms: Vec<Povm>,
    axes: Vec<[f64; 3]>,
    projective_relabellings: usize,
    trivial_relabellings: usize,
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// Sign convention for an axis: first nonzero coordinate positive.
fn canonical_axis(v: [f64; 3]) -> [f64; 3] {
    let lead = v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
    if lead < 0.0 {
        v.map(|x| -x)
    } else {
        v
    }
}

impl MeasurementPolytope {
    /// Every placement of `{P₊, P₋}` (projectors along each axis) into two of
    /// `outcomes` slots, the rest zero, plus, if `trivial`, every placement of
    /// the identity into one slot.
    pub fn from_axes(name: &str, axes: &[[f64; 3]], outcomes: usize, trivial: bool) -> Result<Self> {
        if outcomes < 2 && !axes.is_empty() {
            return Err(LhsError::UnsupportedPolytope("projective pairs need two slots".into()));
        }
        let zero = Operator::zeros(&[2]);
        let mut povms = Vec::new();
        let axes: Vec<[f64; 3]> = axes.iter().map(|&a| canonical_axis(normalize(a))).collect();
        let mut projective = 0;
        for n in &axes {
            let plus = pauli::projector(*n);
            let minus = pauli::projector(n.map(|x| -x));
            for a in 0..outcomes {
                for b in 0..outcomes {
                    if a == b {
                        continue;
                    }
                    let mut elements = vec![zero.clone(); outcomes];
                    elements[a] = plus.clone();
                    elements[b] = minus.clone();
                    povms.push(Povm::new(elements)?);
                    projective += 1;
                }
            }
        }
        let mut trivial_count = 0;
        if trivial {
            for a in 0..outcomes {
                let mut elements = vec![zero.clone(); outcomes];
                elements[a] = Operator::identity(&[2]);
                povms.push(Povm::new(elements)?);
                trivial_count += 1;
            }
        }
        if povms.is_empty() {
            return Err(LhsError::UnsupportedPolytope("empty polytope".into()));
        }
        Ok(Self {
            name: name.to_string(),
            povms,
            axes,
            projective_relabellings: projective,
            trivial_relabellings: trivial_count,
        })
    }

    /// Arbitrary POVM list; `reduce_strategies` decides whether it has the
    /// relabelling structure.
    pub fn from_povms(name: &str, povms: Vec<Povm>) -> Result<Self> {
        if povms.is_empty() || povms.iter().any(|p| p.dim() != 2 || p.outcomes() != povms[0].outcomes()) {
            return Err(LhsError::UnsupportedPolytope("need qubit POVMs with a common outcome count".into()));
        }
        Ok(Self {
            name: name.to_string(),
            povms,
            axes: Vec::new(),
            projective_relabellings: 0,
            trivial_relabellings: 0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    pub fn axes(&self) -> &[[f64; 3]] {
        &self.axes
    }

    pub fn outcomes(&self) -> usize {
        self.povms[0].outcomes()
    }

    pub fn projective_relabellings(&self) -> usize {
        self.projective_relabellings
    }

    pub fn trivial_relabellings(&self) -> usize {
        self.trivial_relabellings
    }

    /// SHA-256 of the serialized POVM elements, as lowercase hex.
    pub fn hash(&self) -> String {
        let elements: Vec<&[Operator]> = self.povms.iter().map(|p| p.elements()).collect();
        let bytes = serde_json::to_vec(&elements).expect("operator serialization");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Unit vectors to the 12 vertices of the regular icosahedron: cyclic
/// permutations of `(0, ±1, ±φ)`.
pub fn icosahedron_vertices() -> Vec<[f64; 3]> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut out = Vec::with_capacity(12);
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            let v = [0.0, s1, s2 * phi];
            for shift in 0..3 {
                out.push(normalize([v[(3 - shift) % 3], v[(4 - shift) % 3], v[(5 - shift) % 3]]));
            }
        }
    }
    out
}

/// One representative per antipodal pair of directions.
pub fn antipodal_axes(vertices: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut axes: Vec<[f64; 3]> = Vec::new();
    for v in vertices {
        let c = canonical_axis(*v);
        if !axes.iter().any(|a| a.iter().zip(&c).all(|(x, y)| (x - y).abs() < 1e-9)) {
            axes.push(c);
        }
    }
    axes
}

/// The 76-element set: four-slot relabellings of projective measurements
/// along the six icosahedron axes, plus the relabellings of `{1, 0, 0, 0}`.
pub fn icosahedron_polytope() -> MeasurementPolytope {
    MeasurementPolytope::from_axes("icosa76", &antipodal_axes(&icosahedron_vertices()), 4, true)
        .expect("icosahedron polytope")
}

/// Coordinate axes with four-slot and trivial relabellings (40 POVMs).
pub fn octahedron_polytope() -> MeasurementPolytope {
    MeasurementPolytope::from_axes("octa40", &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 4, true)
        .expect("octahedron polytope")
}

pub fn polytope_by_name(name: &str) -> Result<MeasurementPolytope> {
    match name {
        "icosa76" => Ok(icosahedron_polytope()),
        "octa40" => Ok(octahedron_polytope()),
        _ => Err(LhsError::UnknownPolytope(name.to_string())),
    }
}

pub fn polytope_names() -> &'static [&'static str] {
    &["icosa76", "octa40"]
}

/// Deterministic responses: `strategies[λ][x]` is the outcome returned for
/// POVM `x` under strategy `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeterministicStrategySet {
    pub strategies: Vec<Vec<usize>>,
    /// Bit `k` of a strategy index is set when it answers `P₋` on `axes[k]`.
    pub axes: Vec<[f64; 3]>,
    pub notes: Vec<String>,
}

impl DeterministicStrategySet {
    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    /// Strategies answering `a` to POVM `x`.
    pub fn answering(&self, x: usize, a: usize) -> Vec<usize> {
        (0..self.strategies.len()).filter(|&l| self.strategies[l][x] == a).collect()
    }
}

enum Shape {
    Trivial { slot: usize },
    Pair { plus: usize, minus: usize, axis: [f64; 3] },
}

fn is_zero(op: &Operator) -> bool {
    op.max_abs() <= ZERO_TOL
}

fn classify(p: &Povm) -> Result<Shape> {
    let nonzero: Vec<usize> = (0..p.outcomes()).filter(|&a| !is_zero(&p.elements()[a])).collect();
    match nonzero.as_slice() {
        [slot] => Ok(Shape::Trivial { slot: *slot }),
        [a, b] => {
            let e = &p.elements()[*a];
            let spec = eigenvalues_hermitian(&HermitianOperator::project(e.clone()))?;
            if (spec[0] - 1.0).abs() > 1e-9 || spec[1].abs() > 1e-9 {
                return Err(LhsError::UnsupportedPolytope("two-element POVM that is not projective".into()));
            }
            let c = pauli::coordinates(e);
            let n = [c[1], c[2], c[3]];
            let axis = canonical_axis(n);
            let along = n.iter().zip(&axis).map(|(x, y)| x * y).sum::<f64>() > 0.0;
            let (plus, minus) = if along { (*a, *b) } else { (*b, *a) };
            Ok(Shape::Pair { plus, minus, axis })
        }
        _ => Err(LhsError::UnsupportedPolytope(format!("{} nonzero elements", nonzero.len()))),
    }
}

/// Strategies that can carry weight in an LHS model for the polytope.
///
/// A strategy answering a zero element would need `Σ σ_λ = 0` over a set of
/// PSD operators, so every such `σ_λ` vanishes and the strategy is dropped.
/// The remaining answers for a projective POVM depend only on the sign chosen
/// for its axis, which gives `2^(axes)` strategies; trivial POVMs always answer
/// their identity slot.
pub fn reduce_strategies(p: &MeasurementPolytope) -> Result<DeterministicStrategySet> {
    let shapes = p.povms.iter().map(classify).collect::<Result<Vec<_>>>()?;
    let mut axes: Vec<[f64; 3]> = Vec::new();
    let mut axis_of = Vec::with_capacity(shapes.len());
    for s in &shapes {
        match s {
            Shape::Pair { axis, .. } => {
                let found = axes.iter().position(|a| a.iter().zip(axis).all(|(x, y)| (x - y).abs() < 1e-9));
                let idx = found.unwrap_or_else(|| {
                    axes.push(*axis);
                    axes.len() - 1
                });
                axis_of.push(Some(idx));
            }
            Shape::Trivial { .. } => axis_of.push(None),
        }
    }
    if axes.len() > 20 {
        return Err(LhsError::UnsupportedPolytope(format!("{} axes exceed the strategy cap", axes.len())));
    }
    let count = 1usize << axes.len();
    let strategies: Vec<Vec<usize>> = (0..count)
        .map(|signs| {
            shapes
                .iter()
                .zip(&axis_of)
                .map(|(s, ax)| match (s, ax) {
                    (Shape::Trivial { slot }, _) => *slot,
                    (Shape::Pair { plus, minus, .. }, Some(i)) => {
                        if (signs >> i) & 1 == 0 {
                            *plus
                        } else {
                            *minus
                        }
                    }
                    (Shape::Pair { .. }, None) => unreachable!("pairs always have an axis"),
                })
                .collect()
        })
        .collect();
    let raw_exponent = p.povms.len() as f64 * (p.outcomes() as f64).log2();
    let notes = vec![
        format!("raw strategy count {}^{} = 2^{raw_exponent:.0}", p.outcomes(), p.povms.len()),
        "strategies answering a zero POVM element carry zero hidden state and are removed".to_string(),
        format!("projective answers factor through one sign per axis: 2^{} strategies", axes.len()),
        "trivial POVMs answer their identity slot".to_string(),
    ];
    Ok(DeterministicStrategySet { strategies, axes, notes })
}

/// Noise applied to the first party's measurements:
/// `M ↦ η M + (1 − η) Tr(ξ M) 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub xi: Operator,
    pub eta: f64,
}

impl NoiseModel {
    pub fn new(xi: Operator, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(LhsError::InvalidNoise(format!("η = {eta} outside [0, 1]")));
        }
        if xi.dims() != [2] {
            return Err(LhsError::InvalidNoise(format!("ξ has dims {:?}", xi.dims())));
        }
        crate::states::DensityMatrix::new(
            HermitianOperator::new(xi.clone()).map_err(|e| LhsError::InvalidNoise(e.to_string()))?,
        )?;
        Ok(Self { xi, eta })
    }

    /// `ξ = 1/2`.
    pub fn unbiased(eta: f64) -> Result<Self> {
        Self::new(Operator::maximally_mixed(&[2]), eta)
    }

    pub fn noisy_element(&self, m: &Operator) -> Operator {
        let w = self.xi.trace_product(m).re;
        &m.scale(self.eta) + &Operator::identity(&[2]).scale((1.0 - self.eta) * w)
    }
}

pub fn noisy_povm(m: &Povm, noise: &NoiseModel) -> Result<Povm> {
    if m.dim() != 2 {
        return Err(LhsError::InvalidNoise("noise acts on qubit POVMs".into()));
    }
    Ok(Povm::new(m.elements().iter().map(|e| noise.noisy_element(e)).collect())?)
}

/// `σ_{a|x} = Tr_party[(M_{a|x} ⊗ 1) ρ]`, indexed `[x][a]`.
pub fn assemblage(rho: &Operator, povms: &[Povm], party: usize) -> Result<Vec<Vec<Operator>>> {
    let parties = rho.dims().len();
    if party >= parties {
        return Err(LinalgError::IndexOutOfRange { index: party, count: parties }.into());
    }
    let keep: Vec<usize> = (0..parties).filter(|&k| k != party).collect();
    povms
        .iter()
        .map(|p| {
            p.elements().iter().map(|e| Ok(rho.left_local(party, e)?.partial_trace(&keep)?)).collect::<Result<Vec<_>>>()
        })
        .collect()
}

#[cfg(test)]
mod tests;
