//! The LHS-construction SDP and its solver-independent verification.
//!
//! Given a three-qubit target `ρ`, a polytope `{M_{a|x}}`, and noise
//! `(ξ, η)`, maximize `q ≤ 1` such that
//!
//! * `η χ + (1 − η) ξ ⊗ χ_BC = q ρ + (1 − q) 1/8` with `χ_BC = Tr_A χ`,
//! * `Tr_A[(M_{a|x} ⊗ 1) χ] = Σ_λ D_λ(a|x) σ_λ`,
//! * `σ_λ ⪰ 0` and `σ_λ^{T_B} ⪰ 0`.
//!
//! Taking `Tr_A` of the first line gives `χ_BC = q ρ_BC + (1 − q) 1/4`, so
//! `χ` is affine in `q` and the only free variables are `q` and the `σ_λ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{reduce_strategies, DeterministicStrategySet, LhsError, MeasurementPolytope, NoiseModel, Result};
use crate::conic::{extract_hermitian, solve, HermitianTerm, ModelBuilder, SolveStatus, SolverSettings, SymCoeff};
use crate::hermlin::random::random_operator;
use crate::hermlin::{eigenvalues_hermitian, kron, pauli, HermitianOperator, Operator};
use crate::states::DensityMatrix;

/// Absolute tolerance for every certificate check.
pub const CERTIFICATE_TOL: f64 = 1e-7;
/// Random effects used to spot-check the noisy-measurement identity.
const IDENTITY_SAMPLES: usize = 100;
const IDENTITY_SEED: u64 = 0x004c_4853;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhsCertificate {
    pub polytope: String,
    pub polytope_hash: String,
    pub strategy_count: usize,
    pub reduction_notes: Vec<String>,
    pub noise: NoiseModel,
    pub q_star: f64,
    pub target: Operator,
    pub chi: Operator,
    /// `χ` need not be PSD; reported for information.
    pub chi_min_eigenvalue: f64,
    /// Unnormalized two-qubit hidden states, aligned with the strategies of
    /// [`reduce_strategies`].
    pub hidden_states: Vec<Operator>,
    /// Whether the solver output was repaired and mixed with the `q = 0`
    /// model to meet the tolerance.
    #[serde(default)]
    pub rescued: bool,
    pub verification: Option<LhsVerification>,
}

impl LhsCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LhsError::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhsVerification {
    pub passed: bool,
    pub findings: Vec<String>,
    pub max_assemblage_residual: f64,
    pub hidden_sum_residual: f64,
    pub min_hidden_eigenvalue: f64,
    pub min_hidden_pt_eigenvalue: f64,
    pub mixing_residual: f64,
    pub noisy_identity_residual: f64,
}

/// `χ(q) = [q ρ + (1 − q) 1/8 − (1 − η) ξ ⊗ (q ρ_BC + (1 − q) 1/4)] / η`.
fn chi_of(q: f64, target: &Operator, noise: &NoiseModel) -> Result<Operator> {
    let rho_bc = target.partial_trace(&[1, 2])?;
    let chi_bc = &rho_bc.scale(q) + &Operator::maximally_mixed(&[2, 2]).scale(1.0 - q);
    let mix = &target.scale(q) + &Operator::maximally_mixed(&[2, 2, 2]).scale(1.0 - q);
    let local = kron(&noise.xi, &chi_bc).with_dims(&[2, 2, 2])?;
    Ok((&mix - &local.scale(1.0 - noise.eta)).scale(1.0 / noise.eta))
}

/// `Tr_A[(E ⊗ 1) X]` on the remaining two qubits.
fn conditional(x: &Operator, effect: &Operator) -> Result<Operator> {
    Ok(x.left_local(0, effect)?.partial_trace(&[1, 2])?)
}

fn check_inputs(target: &Operator, p: &MeasurementPolytope, noise: &NoiseModel) -> Result<()> {
    if target.dims() != [2, 2, 2] {
        return Err(LhsError::InvalidNoise(format!("target dims {:?}, expected three qubits", target.dims())));
    }
    if !(noise.eta > 0.0) {
        return Err(LhsError::InvalidNoise("η must be positive".into()));
    }
    if p.povms().iter().any(|m| m.dim() != 2) {
        return Err(LhsError::UnsupportedPolytope("qubit POVMs required".into()));
    }
    Ok(())
}

/// Distinct `(effect, answering strategies)` pairs of the polytope.
fn distinct_constraints(
    p: &MeasurementPolytope,
    answering: impl Fn(usize, usize) -> Vec<usize>,
) -> Vec<(Operator, Vec<usize>)> {
    let mut out: Vec<(Operator, Vec<usize>)> = Vec::new();
    for (x, m) in p.povms().iter().enumerate() {
        for (a, e) in m.elements().iter().enumerate() {
            let set = answering(x, a);
            if set.is_empty() && e.max_abs() <= 1e-12 {
                continue;
            }
            if !out.iter().any(|(f, s)| *s == set && f.max_abs_diff(e) <= 1e-12) {
                out.push((e.clone(), set));
            }
        }
    }
    out
}

/// Weight of the exact `q = 0` model mixed into a repaired solution.
const RESCUE_WEIGHT: f64 = 1e-3;

struct Program<'a> {
    strategies: &'a DeterministicStrategySet,
    constraints: Vec<(Operator, Vec<usize>)>,
    chi0: Operator,
    chi1: Operator,
}

impl Program<'_> {
    /// `Tr_A[(E ⊗ 1) χ(q)]` for every distinct constraint.
    fn targets(&self, q: f64) -> Result<Vec<Operator>> {
        self.constraints
            .iter()
            .map(|(e, _)| Ok(&conditional(&self.chi0, e)? + &conditional(&self.chi1, e)?.scale(q)))
            .collect()
    }

    /// Maximizes `q`, returning it with the hidden states.
    fn maximize_q(&self) -> Result<(SolveStatus, f64, Vec<Operator>)> {
        let bc = [2, 2];
        let n_strat = self.strategies.len();
        let mut mb = ModelBuilder::new();
        let qb = mb.add_nonneg(2);
        mb.add_objective(qb, SymCoeff::diagonal(0, -1.0));
        let mut cap = SymCoeff::diagonal(0, 1.0);
        cap.push(1, 1, 1.0);
        mb.add_row(vec![(qb, cap)], 1.0);
        let sigma: Vec<usize> = (0..n_strat).map(|_| mb.add_hermitian(4)).collect();
        let tau: Vec<usize> = (0..n_strat).map(|_| mb.add_hermitian(4)).collect();

        let id = |h: &Operator| h.clone();
        for (effect, set) in &self.constraints {
            let base = conditional(&self.chi0, effect)?;
            let slope = conditional(&self.chi1, effect)?;
            let mut terms: Vec<HermitianTerm> =
                set.iter().map(|&l| HermitianTerm::Map { block: sigma[l], adjoint: &id }).collect();
            terms.push(HermitianTerm::Scalar { block: qb, index: 0, op: slope.scale(-1.0) });
            mb.add_hermitian_equality(&bc, &terms, &base);
        }
        mb.reduce_dependent_rows()?;
        let neg_pt = |h: &Operator| h.partial_transpose(0).expect("two-qubit operator").scale(-1.0);
        for l in 0..n_strat {
            mb.add_hermitian_equality(
                &bc,
                &[
                    HermitianTerm::Map { block: tau[l], adjoint: &id },
                    HermitianTerm::Map { block: sigma[l], adjoint: &neg_pt },
                ],
                &Operator::zeros(&bc),
            );
        }
        let sol = solve(&mb.build(), &SolverSettings::default())?;
        let status = match sol.status {
            SolveStatus::IterationLimit if sol.gap < 1e-6 && sol.residuals.primal < 1e-6 => SolveStatus::Optimal,
            s => s,
        };
        let hidden = sigma.iter().map(|&b| extract_hermitian(&sol.x[b], &bc).into_operator()).collect();
        Ok((status, sol.x[qb].get(0, 0), hidden))
    }

    /// Minimum-norm correction making the hidden states satisfy the
    /// assemblage equalities at `q` exactly. The equalities only sum hidden
    /// states, so each matrix entry is corrected independently.
    fn repair(&self, hidden: &[Operator], q: f64) -> Result<Vec<Operator>> {
        let n = hidden.len();
        let rows = self.constraints.len();
        let a = DMatrix::from_fn(rows, n, |r, l| if self.constraints[r].1.contains(&l) { 1.0 } else { 0.0 });
        let pinv = a.clone().pseudo_inverse(1e-10).map_err(|e| LhsError::Parse(e.to_string()))?;
        let targets = self.targets(q)?;
        let mut out = hidden.to_vec();
        for i in 0..4 {
            for j in 0..4 {
                let residual = DVector::from_fn(rows, |r, _| {
                    let sum: Complex64 = self.constraints[r].1.iter().map(|&l| hidden[l].get(i, j)).sum();
                    targets[r].get(i, j) - sum
                });
                let re = &pinv * residual.map(|z| z.re);
                let im = &pinv * residual.map(|z| z.im);
                for (l, op) in out.iter_mut().enumerate() {
                    op.set(i, j, op.get(i, j) + Complex64::new(re[l], im[l]));
                }
            }
        }
        Ok(out)
    }

    /// The exact `q = 0` model. Then `χ = ω ⊗ 1/4` and the hidden states
    /// are `w_λ 1/4` with `w_λ` the product over axes of `Tr(P_± ω)`. `None`
    /// when `ω` is not a state.
    fn trivial_model(&self) -> Result<Option<Vec<Operator>>> {
        let omega = self.chi0.partial_trace(&[0])?;
        let c = pauli::coordinates(&omega);
        let r = [c[1] / c[0], c[2] / c[0], c[3] / c[0]];
        if r.iter().map(|x| x * x).sum::<f64>() > 1.0 {
            return Ok(None);
        }
        let axes = &self.strategies.axes;
        let quarter = Operator::maximally_mixed(&[2, 2]);
        Ok(Some(
            (0..self.strategies.len())
                .map(|l| {
                    let w: f64 = axes
                        .iter()
                        .enumerate()
                        .map(|(k, n)| {
                            let along = n.iter().zip(&r).map(|(x, y)| x * y).sum::<f64>();
                            let sign = if (l >> k) & 1 == 0 { 1.0 } else { -1.0 };
                            (1.0 + sign * along) / 2.0
                        })
                        .product();
                    quarter.scale(w)
                })
                .collect(),
        ))
    }
}

/// Solves the LHS program and returns a verified certificate.
///
/// When the optimum puts hidden states on the boundary of the PSD cone the
/// interior-point iterates converge slowly and miss the certificate
/// tolerance. The solution is then projected onto the assemblage equalities
/// and mixed with weight `RESCUE_WEIGHT` into the exact `q = 0` model, which
/// lowers `q*` by that factor and leaves a strictly positive eigenvalue margin.
pub fn construct_lhs(target: &DensityMatrix, p: &MeasurementPolytope, noise: &NoiseModel) -> Result<LhsCertificate> {
    check_inputs(target, p, noise)?;
    let strategies = reduce_strategies(p)?;
    let chi0 = chi_of(0.0, target, noise)?;
    let chi1 = &chi_of(1.0, target, noise)? - &chi0;
    let program = Program {
        constraints: distinct_constraints(p, |x, a| strategies.answering(x, a)),
        strategies: &strategies,
        chi0,
        chi1,
    };
    let (status, q, hidden) = program.maximize_q()?;
    match status {
        SolveStatus::Optimal => {}
        SolveStatus::PrimalInfeasible => return Err(LhsError::Infeasible),
        other => return Err(crate::conic::SolverError::NotOptimal(other).into()),
    }
    let q = q.clamp(0.0, 1.0);
    let cert = assemble(target, p, noise, &strategies, q, hidden.clone(), false)?;
    if cert.verification.as_ref().is_some_and(|v| v.passed) {
        return Ok(cert);
    }
    let Some(trivial) = program.trivial_model()? else {
        return Ok(cert);
    };
    let repaired = program.repair(&hidden, q)?;
    let mixed =
        repaired.iter().zip(&trivial).map(|(s, t)| &s.scale(1.0 - RESCUE_WEIGHT) + &t.scale(RESCUE_WEIGHT)).collect();
    assemble(target, p, noise, &strategies, (1.0 - RESCUE_WEIGHT) * q, mixed, true)
}

fn assemble(
    target: &DensityMatrix,
    p: &MeasurementPolytope,
    noise: &NoiseModel,
    strategies: &DeterministicStrategySet,
    q_star: f64,
    hidden_states: Vec<Operator>,
    rescued: bool,
) -> Result<LhsCertificate> {
    let chi = HermitianOperator::project(chi_of(q_star, target, noise)?);
    let chi_min_eigenvalue = *eigenvalues_hermitian(&chi)?.last().expect("nonempty spectrum");

    let mut cert = LhsCertificate {
        polytope: p.name().to_string(),
        polytope_hash: p.hash(),
        strategy_count: strategies.len(),
        reduction_notes: strategies.notes.clone(),
        noise: noise.clone(),
        q_star,
        target: (**target).clone(),
        chi: chi.into_operator(),
        chi_min_eigenvalue,
        hidden_states,
        rescued,
        verification: None,
    };
    cert.verification = Some(verify_certificate(&cert, p)?);
    Ok(cert)
}

fn min_eig(op: &Operator) -> Result<f64> {
    Ok(*eigenvalues_hermitian(&HermitianOperator::project(op.clone()))?.last().expect("nonempty spectrum"))
}

/// Rechecks every constraint of `cert` against `p` without the solver, and
/// spot-checks `Tr_A[(M^η ⊗ 1) χ] = Tr_A[(M ⊗ 1) ρ_mix]` on random effects.
pub fn verify_certificate(cert: &LhsCertificate, p: &MeasurementPolytope) -> Result<LhsVerification> {
    let mut findings = Vec::new();
    let tol = CERTIFICATE_TOL;
    if cert.polytope_hash != p.hash() {
        findings.push(format!("polytope hash mismatch for {:?}", cert.polytope));
    }
    let strategies = reduce_strategies(p)?;
    if strategies.len() != cert.hidden_states.len() || cert.strategy_count != strategies.len() {
        findings.push(format!("{} hidden states for {} strategies", cert.hidden_states.len(), strategies.len()));
        return Ok(LhsVerification {
            passed: false,
            findings,
            max_assemblage_residual: f64::INFINITY,
            hidden_sum_residual: f64::INFINITY,
            min_hidden_eigenvalue: f64::NAN,
            min_hidden_pt_eigenvalue: f64::NAN,
            mixing_residual: f64::INFINITY,
            noisy_identity_residual: f64::INFINITY,
        });
    }
    if cert.chi.dims() != [2, 2, 2] || cert.target.dims() != [2, 2, 2] {
        return Err(LhsError::Parse("χ and target must be three-qubit operators".into()));
    }
    if cert.hidden_states.iter().any(|s| s.dims() != [2, 2]) {
        return Err(LhsError::Parse("hidden states must be two-qubit operators".into()));
    }
    let noise = NoiseModel::new(cert.noise.xi.clone(), cert.noise.eta)?;

    let mut max_assemblage_residual: f64 = 0.0;
    for (x, m) in p.povms().iter().enumerate() {
        for (a, e) in m.elements().iter().enumerate() {
            let lhs = conditional(&cert.chi, e)?;
            let mut rhs = Operator::zeros(&[2, 2]);
            for l in strategies.answering(x, a) {
                rhs = &rhs + &cert.hidden_states[l];
            }
            max_assemblage_residual = max_assemblage_residual.max(lhs.max_abs_diff(&rhs));
        }
    }
    if max_assemblage_residual > tol {
        findings.push(format!("assemblage residual {max_assemblage_residual:.3e}"));
    }

    let chi_bc = cert.chi.partial_trace(&[1, 2])?;
    let mut hidden_sum = Operator::zeros(&[2, 2]);
    let mut min_hidden_eigenvalue = f64::INFINITY;
    let mut min_hidden_pt_eigenvalue = f64::INFINITY;
    for (l, s) in cert.hidden_states.iter().enumerate() {
        hidden_sum = &hidden_sum + s;
        if s.hermitian_defect() > tol {
            findings.push(format!("hidden state {l} is not Hermitian"));
        }
        let e = min_eig(s)?;
        let pt = min_eig(&s.partial_transpose(0)?)?;
        min_hidden_eigenvalue = min_hidden_eigenvalue.min(e);
        min_hidden_pt_eigenvalue = min_hidden_pt_eigenvalue.min(pt);
        if e < -tol {
            findings.push(format!("hidden state {l} has negative eigenvalue {e:.3e}"));
        }
        if pt < -tol {
            findings.push(format!("hidden state {l} has negative partial-transpose eigenvalue {pt:.3e}"));
        }
    }
    let hidden_sum_residual = hidden_sum.max_abs_diff(&chi_bc);
    if hidden_sum_residual > tol {
        findings.push(format!("hidden states sum to Tr_A χ only within {hidden_sum_residual:.3e}"));
    }

    let q = cert.q_star;
    if !(0.0..=1.0).contains(&q) {
        findings.push(format!("q* = {q} outside [0, 1]"));
    }
    let mix = &cert.target.scale(q) + &Operator::maximally_mixed(&[2, 2, 2]).scale(1.0 - q);
    let local = kron(&noise.xi, &chi_bc).with_dims(&[2, 2, 2])?;
    let combined = &cert.chi.scale(noise.eta) + &local.scale(1.0 - noise.eta);
    let mixing_residual = combined.max_abs_diff(&mix);
    if mixing_residual > tol {
        findings.push(format!("mixing identity residual {mixing_residual:.3e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(IDENTITY_SEED);
    let mut noisy_identity_residual: f64 = 0.0;
    for _ in 0..IDENTITY_SAMPLES {
        let g = random_operator(&mut rng, &[2]);
        let gram = HermitianOperator::project(&g.adjoint() * &g);
        let effect = gram.scale(1.0 / eigenvalues_hermitian(&gram)?[0]);
        let lhs = conditional(&cert.chi, &noise.noisy_element(&effect))?;
        let rhs = conditional(&mix, &effect)?;
        noisy_identity_residual = noisy_identity_residual.max(lhs.max_abs_diff(&rhs));
    }
    if noisy_identity_residual > tol {
        findings.push(format!("noisy-measurement identity residual {noisy_identity_residual:.3e}"));
    }

    Ok(LhsVerification {
        passed: findings.is_empty(),
        findings,
        max_assemblage_residual,
        hidden_sum_residual,
        min_hidden_eigenvalue,
        min_hidden_pt_eigenvalue,
        mixing_residual,
        noisy_identity_residual,
    })
}
