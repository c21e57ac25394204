//! Bell inequalities in correlator form, Born-rule statistics, local bounds,
//! and the see-saw search for quantum violations.

mod seesaw;

pub use seesaw::{
    seesaw, seesaw_measurements, seesaw_state, MeasurementStep, SeesawConfig, SeesawResult, StateConstraints,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::SolverError;
use crate::hermlin::{eigenvalues_hermitian, kron_all, pauli, HermitianOperator, LinalgError, Operator, OperatorFile};
use crate::states::StateError;

/// Tolerance for POVM positivity and completeness.
pub const POVM_TOL: f64 = 1e-9;
/// Largest number of deterministic strategies `local_bound` will enumerate.
pub const MAX_STRATEGIES: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum BellError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("invalid inequality: {0}")]
    InvalidInequality(String),
    #[error("{strategies} deterministic strategies exceed the enumeration cap")]
    TooLarge { strategies: u128 },
    #[error("solver failure: {0}")]
    SolverFailure(#[from] SolverError),
    #[error(transparent)]
    State(#[from] StateError),
}

pub type Result<T> = std::result::Result<T, BellError>;

/// Positive operator-valued measure; outcome 0 is the `+1` outcome of the
/// associated observable.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<Operator>,
}

impl Povm {
    pub fn new(elements: Vec<Operator>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(BellError::InvalidPovm("no elements".into()));
        };
        let dims = first.dims().to_vec();
        let mut sum = Operator::zeros(&dims);
        for (a, e) in elements.iter().enumerate() {
            if e.dims() != dims.as_slice() {
                return Err(BellError::InvalidPovm(format!("element {a} has dims {:?}", e.dims())));
            }
            if !e.is_hermitian(POVM_TOL) {
                return Err(BellError::InvalidPovm(format!("element {a} is not Hermitian")));
            }
            let min =
                *eigenvalues_hermitian(&HermitianOperator::project(e.clone()))?.last().expect("non-empty spectrum");
            if min < -POVM_TOL {
                return Err(BellError::InvalidPovm(format!("element {a} has eigenvalue {min:.3e}")));
            }
            sum = &sum + e;
        }
        let defect = sum.max_abs_diff(&Operator::identity(&dims));
        if defect > POVM_TOL {
            return Err(BellError::InvalidPovm(format!("elements sum to identity only within {defect:.3e}")));
        }
        Ok(Self { elements })
    }

    /// Two-outcome POVM `{(1 + A)/2, (1 − A)/2}` for an observable with
    /// spectrum in `[−1, 1]`.
    pub fn from_observable(a: &Operator) -> Result<Self> {
        let id = Operator::identity(a.dims());
        Self::new(vec![(&id + a).scale(0.5), (&id - a).scale(0.5)])
    }

    /// Projective measurement along a Bloch direction.
    pub fn projective(direction: [f64; 3]) -> Result<Self> {
        let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(BellError::InvalidPovm("zero Bloch direction".into()));
        }
        Self::from_observable(&pauli::bloch(direction.map(|x| x / n)))
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// `M₀ − M₁`; defined for two outcomes only.
    pub fn observable(&self) -> Result<Operator> {
        match self.elements.as_slice() {
            [plus, minus] => Ok(plus - minus),
            _ => Err(BellError::InvalidPovm(format!("{} outcomes, expected 2", self.outcomes()))),
        }
    }
}

/// One list of POVMs (indexed by setting) per party.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    parties: Vec<Vec<Povm>>,
}

#[derive(Serialize, Deserialize)]
struct MeasurementFile {
    parties: Vec<Vec<Vec<OperatorFile>>>,
}

impl MeasurementSet {
    pub fn new(parties: Vec<Vec<Povm>>) -> Result<Self> {
        if parties.is_empty() || parties.iter().any(|p| p.is_empty()) {
            return Err(BellError::DimensionMismatch("every party needs at least one setting".into()));
        }
        for (k, p) in parties.iter().enumerate() {
            if p.iter().any(|m| m.dim() != p[0].dim()) {
                return Err(BellError::DimensionMismatch(format!("party {k} mixes local dimensions")));
            }
        }
        Ok(Self { parties })
    }

    /// Two-outcome measurements from observables, `observables[party][setting]`.
    pub fn from_observables(observables: &[Vec<Operator>]) -> Result<Self> {
        let parties = observables
            .iter()
            .map(|p| p.iter().map(Povm::from_observable).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(parties)
    }

    pub fn parties(&self) -> usize {
        self.parties.len()
    }

    pub fn settings(&self, party: usize) -> usize {
        self.parties[party].len()
    }

    pub fn local_dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p[0].dim()).collect()
    }

    /// POVM for a 0-based setting index.
    pub fn povm(&self, party: usize, setting: usize) -> &Povm {
        &self.parties[party][setting]
    }

    pub fn party(&self, party: usize) -> &[Povm] {
        &self.parties[party]
    }

    pub fn observable(&self, party: usize, setting: usize) -> Result<Operator> {
        self.parties[party][setting].observable()
    }

    pub fn replace_party(&mut self, party: usize, povms: Vec<Povm>) -> Result<()> {
        if povms.len() != self.parties[party].len() || povms.iter().any(|m| m.dim() != self.parties[party][0].dim()) {
            return Err(BellError::DimensionMismatch(format!("replacement for party {party}")));
        }
        self.parties[party] = povms;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = MeasurementFile {
            parties: self
                .parties
                .iter()
                .map(|p| p.iter().map(|m| m.elements.iter().map(OperatorFile::from).collect()).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("measurement serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasurementFile = serde_json::from_str(text).map_err(|e| BellError::InvalidPovm(e.to_string()))?;
        let parties = file
            .parties
            .into_iter()
            .map(|p| {
                p.into_iter()
                    .map(|m| {
                        let ops = m.into_iter().map(Operator::try_from).collect::<std::result::Result<Vec<_>, _>>()?;
                        Povm::new(ops)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parties)
    }
}

/// The measurements reported for the optimal violation, identical for all
/// three parties. The published Bloch vectors have unit norm to four decimals,
/// so the observables have spectrum inside `[−1, 1]` and define valid POVMs.
pub fn paper_measurements() -> MeasurementSet {
    let a1 = &pauli::z().scale(-0.7909) - &pauli::x().scale(0.6119);
    let a2 = &pauli::z().scale(-0.2344) + &pauli::x().scale(0.9721);
    let party = vec![a1, a2];
    MeasurementSet::from_observables(&[party.clone(), party.clone(), party]).expect("valid observables")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub parties: usize,
    pub settings: usize,
    pub outcomes: usize,
}

/// `coeff · ∏_k A^{(k)}_{settings[k]}` with 1-based settings; 0 marks an
/// absent party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellTerm {
    pub coeff: f64,
    pub settings: Vec<usize>,
}

/// `Σ terms ≤ local_bound` in correlator form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellInequality {
    pub scenario: Scenario,
    pub terms: Vec<BellTerm>,
    pub local_bound: f64,
}

impl BellInequality {
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.parties == 0 || s.settings == 0 {
            return Err(BellError::InvalidInequality("empty scenario".into()));
        }
        if s.outcomes != 2 {
            return Err(BellError::InvalidInequality(format!(
                "correlator form needs two outcomes, got {}",
                s.outcomes
            )));
        }
        if !self.local_bound.is_finite() {
            return Err(BellError::InvalidInequality("non-finite local bound".into()));
        }
        for (t, term) in self.terms.iter().enumerate() {
            if !term.coeff.is_finite() {
                return Err(BellError::InvalidInequality(format!("term {t} has a non-finite coefficient")));
            }
            if term.settings.len() != s.parties || term.settings.iter().any(|&x| x > s.settings) {
                return Err(BellError::InvalidInequality(format!("term {t} settings {:?}", term.settings)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("inequality serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ineq: Self = serde_json::from_str(text).map_err(|e| BellError::InvalidInequality(e.to_string()))?;
        ineq.validate()?;
        Ok(ineq)
    }

    /// `Σ |c|`, the largest value any ±1-bounded model can reach.
    pub fn algebraic_maximum(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Same inequality with parties reordered: party `k` of the result is
    /// party `perm[k]` of `self`.
    pub fn relabel_parties(&self, perm: &[usize]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| BellTerm { coeff: t.coeff, settings: perm.iter().map(|&p| t.settings[p]).collect() })
            .collect();
        Self { scenario: self.scenario, terms, local_bound: self.local_bound }
    }

    /// Value of the Bell expression on a correlation table.
    pub fn evaluate(&self, table: &CorrelationTensor) -> Result<f64> {
        self.terms.iter().map(|t| Ok(t.coeff * table.correlator(&t.settings)?)).sum()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Orbit of a term under permutations of the parties; each distinct setting
/// pattern appears once with the original coefficient.
pub fn symmetrize(term: &BellTerm) -> Vec<BellTerm> {
    let mut patterns: Vec<Vec<usize>> = permutations(term.settings.len())
        .into_iter()
        .map(|perm| perm.iter().map(|&p| term.settings[p]).collect())
        .collect();
    patterns.sort_unstable();
    patterns.dedup();
    patterns.into_iter().rev().map(|settings| BellTerm { coeff: term.coeff, settings }).collect()
}

/// Sums the orbits of several terms, merging equal setting patterns.
pub fn symmetrize_all(terms: &[BellTerm]) -> Vec<BellTerm> {
    let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut order: Vec<Vec<usize>> = Vec::new();
    for t in terms {
        for s in symmetrize(t) {
            let entry = merged.entry(s.settings.clone()).or_insert_with(|| {
                order.push(s.settings.clone());
                0.0
            });
            *entry += s.coeff;
        }
    }
    order
        .into_iter()
        .filter_map(|s| {
            let c = merged[&s];
            (c != 0.0).then_some(BellTerm { coeff: c, settings: s })
        })
        .collect()
}

/// Symmetrized `A₁ + A₁B₂ − A₂B₂ − A₁B₁C₁ − A₂B₁C₁ + A₂B₂C₂ ≤ 3`.
pub fn sliwa5() -> BellInequality {
    let base =
        [(1.0, [1, 0, 0]), (1.0, [1, 2, 0]), (-1.0, [2, 2, 0]), (-1.0, [1, 1, 1]), (-1.0, [2, 1, 1]), (1.0, [2, 2, 2])];
    let terms: Vec<BellTerm> = base.iter().map(|(c, s)| BellTerm { coeff: *c, settings: s.to_vec() }).collect();
    BellInequality {
        scenario: Scenario { parties: 3, settings: 2, outcomes: 2 },
        terms: symmetrize_all(&terms),
        local_bound: 3.0,
    }
}

/// Maximum of the expression over deterministic ±1 assignments.
pub fn local_bound(ineq: &BellInequality) -> Result<f64> {
    ineq.validate()?;
    let s = ineq.scenario;
    let bits = s.parties * s.settings;
    let strategies: u128 = 1u128.checked_shl(bits as u32).unwrap_or(u128::MAX);
    if strategies > MAX_STRATEGIES as u128 {
        return Err(BellError::TooLarge { strategies });
    }
    let mut best = f64::NEG_INFINITY;
    for code in 0..strategies as u64 {
        let value = |party: usize, setting: usize| -> f64 {
            if (code >> (party * s.settings + setting - 1)) & 1 == 1 {
                -1.0
            } else {
                1.0
            }
        };
        let total: f64 = ineq
            .terms
            .iter()
            .map(|t| {
                t.settings.iter().enumerate().filter(|(_, &x)| x != 0).map(|(k, &x)| value(k, x)).product::<f64>()
                    * t.coeff
            })
            .sum();
        best = best.max(total);
    }
    Ok(best)
}

/// `Σ c · ⊗ₖ A^{(k)}` with identities for absent parties.
pub fn bell_operator(ineq: &BellInequality, m: &MeasurementSet) -> Result<HermitianOperator> {
    ineq.validate()?;
    check_scenario(ineq, m)?;
    let dims = m.local_dims();
    let observables: Vec<Vec<Operator>> = (0..m.parties())
        .map(|k| (0..m.settings(k)).map(|x| m.observable(k, x)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let identities: Vec<Operator> = dims.iter().map(|&d| Operator::identity(&[d])).collect();
    let mut acc = Operator::zeros(&dims);
    for t in &ineq.terms {
        let factors: Vec<&Operator> = t
            .settings
            .iter()
            .enumerate()
            .map(|(k, &x)| if x == 0 { &identities[k] } else { &observables[k][x - 1] })
            .collect();
        let product = kron_all(factors).with_dims(&dims)?;
        acc = &acc + &product.scale(t.coeff);
    }
    Ok(HermitianOperator::project(acc))
}

fn check_scenario(ineq: &BellInequality, m: &MeasurementSet) -> Result<()> {
    let s = ineq.scenario;
    if m.parties() != s.parties || (0..m.parties()).any(|k| m.settings(k) != s.settings) {
        return Err(BellError::DimensionMismatch(format!("measurement set does not match scenario {s:?}")));
    }
    Ok(())
}

/// Born-rule table `p(a⃗ | x⃗)` with 0-based outcomes and settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTensor {
    pub settings: Vec<usize>,
    pub outcomes: Vec<usize>,
    /// Indexed by the settings tuple (mixed radix, first party most
    /// significant) and then the outcome tuple.
    pub probs: Vec<f64>,
}

fn mixed_radix(digits: &[usize], radix: &[usize]) -> usize {
    digits.iter().zip(radix).fold(0, |acc, (d, r)| acc * r + d)
}

fn tuples(radix: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = radix.iter().product();
    (0..total)
        .map(|mut i| {
            let mut t = vec![0; radix.len()];
            for k in (0..radix.len()).rev() {
                t[k] = i % radix[k];
                i /= radix[k];
            }
            t
        })
        .collect()
}

impl CorrelationTensor {
    fn outcome_count(&self) -> usize {
        self.outcomes.iter().product()
    }

    pub fn get(&self, outcomes: &[usize], settings: &[usize]) -> f64 {
        let s = mixed_radix(settings, &self.settings);
        self.probs[s * self.outcome_count() + mixed_radix(outcomes, &self.outcomes)]
    }

    /// `⟨∏ A⟩` over the parties present in `pattern` (1-based settings, 0 =
    /// absent); two-outcome parties only.
    pub fn correlator(&self, pattern: &[usize]) -> Result<f64> {
        if pattern.len() != self.settings.len() || pattern.iter().zip(&self.settings).any(|(&x, &s)| x > s) {
            return Err(BellError::DimensionMismatch(format!("pattern {pattern:?}")));
        }
        if pattern.iter().zip(&self.outcomes).any(|(&x, &o)| x != 0 && o != 2) {
            return Err(BellError::DimensionMismatch("correlators need two outcomes".into()));
        }
        let full: Vec<usize> = pattern.iter().map(|&x| x.saturating_sub(1)).collect();
        Ok(tuples(&self.outcomes)
            .iter()
            .map(|a| {
                let sign: f64 = a
                    .iter()
                    .zip(pattern)
                    .filter(|(_, &x)| x != 0)
                    .map(|(&o, _)| if o == 0 { 1.0 } else { -1.0 })
                    .product();
                sign * self.get(a, &full)
            })
            .sum())
    }

    /// Largest violation of normalization, range, and no-signalling.
    pub fn invariant_defect(&self) -> f64 {
        let n = self.outcome_count();
        let mut worst: f64 = 0.0;
        for chunk in self.probs.chunks(n) {
            worst = worst.max((chunk.iter().sum::<f64>() - 1.0).abs());
            for &p in chunk {
                worst = worst.max(-p).max(p - 1.0);
            }
        }
        // The marginal of every party subset must not depend on the settings
        // of the other parties.
        let parties = self.settings.len();
        let all_settings = tuples(&self.settings);
        for k in 0..parties {
            for x in &all_settings {
                for alt in 0..self.settings[k] {
                    let mut y = x.clone();
                    y[k] = alt;
                    for a in tuples(&self.outcomes) {
                        let marg = |s: &[usize]| -> f64 {
                            (0..self.outcomes[k])
                                .map(|o| {
                                    let mut b = a.clone();
                                    b[k] = o;
                                    self.get(&b, s)
                                })
                                .sum()
                        };
                        worst = worst.max((marg(x) - marg(&y)).abs());
                    }
                }
            }
        }
        worst
    }
}

/// `p(a⃗|x⃗) = Tr[(⊗ₖ M^{(k)}_{a_k|x_k}) ρ]`.
pub fn correlations(rho: &Operator, m: &MeasurementSet) -> Result<CorrelationTensor> {
    let dims = m.local_dims();
    if rho.dims() != dims.as_slice() {
        return Err(BellError::DimensionMismatch(format!("state dims {:?} vs measurement dims {dims:?}", rho.dims())));
    }
    let settings: Vec<usize> = (0..m.parties()).map(|k| m.settings(k)).collect();
    let outcome_radix: Vec<usize> = (0..m.parties()).map(|k| m.povm(k, 0).outcomes()).collect();
    for (k, &radix) in outcome_radix.iter().enumerate() {
        if m.party(k).iter().any(|p| p.outcomes() != radix) {
            return Err(BellError::DimensionMismatch(format!("party {k} mixes outcome counts")));
        }
    }
    let mut probs = Vec::new();
    for x in tuples(&settings) {
        for a in tuples(&outcome_radix) {
            let factors: Vec<&Operator> = (0..m.parties()).map(|k| &m.povm(k, x[k]).elements()[a[k]]).collect();
            let e = kron_all(factors);
            probs.push(e.trace_product(rho).re);
        }
    }
    Ok(CorrelationTensor { settings, outcomes: outcome_radix, probs })
}

#[cfg(test)]
mod tests;
