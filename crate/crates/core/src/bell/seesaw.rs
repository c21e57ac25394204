//! Alternating optimization of `Tr(Bρ)` over one party's measurements at a
//! time and over the state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bell_operator, correlations, BellError, BellInequality, MeasurementSet, Povm, Result};
use crate::conic::{
    extract_hermitian, hermitian_coeff, solve, HermitianTerm, ModelBuilder, SolveStatus, SolverSettings,
};
use crate::hermlin::{eig_hermitian, kron_all, pauli, random::random_bloch, HermitianOperator, Operator};
use crate::states::{symmetrize_parties, DensityMatrix};

/// Linear and conic constraints imposed on the state step besides `ρ ⪰ 0`
/// and `Tr ρ = 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateConstraints {
    /// Each entry is a set of parties whose joint partial transpose must be PSD.
    pub ppt_cuts: Vec<Vec<usize>>,
    /// `ρ^{T_k} = ρ` for every single party `k`.
    pub pt_invariant: bool,
    /// Invariance under every permutation of the parties.
    pub permutation_symmetric: bool,
}

impl StateConstraints {
    /// PPT across every single-party cut, PT-invariance, and permutation
    /// symmetry.
    pub fn full(parties: usize) -> Self {
        Self { ppt_cuts: (0..parties).map(|k| vec![k]).collect(), pt_invariant: true, permutation_symmetric: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementStep {
    /// SDP over all two-outcome POVMs of the party.
    Povm,
    /// Closed-form optimum over traceless `±1` qubit observables.
    TracelessProjective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    pub restarts: usize,
    pub seed: u64,
    pub constraints: StateConstraints,
    /// Start every restart with identical measurements for all parties.
    pub symmetric_init: bool,
    pub measurement_step: MeasurementStep,
    pub max_rounds: usize,
    /// Stop once a full round gains less than this.
    pub tolerance: f64,
}

impl SeesawConfig {
    pub fn new(parties: usize) -> Self {
        Self {
            restarts: 20,
            seed: 7,
            constraints: StateConstraints::full(parties),
            symmetric_init: true,
            measurement_step: MeasurementStep::TracelessProjective,
            max_rounds: 200,
            tolerance: 1e-7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeesawResult {
    /// Bell value of the best restart, recomputed from the correlation table.
    pub q: f64,
    pub state: DensityMatrix,
    pub measurements: MeasurementSet,
    pub best_restart: usize,
    /// Objective after every individual step of the best restart.
    pub history: Vec<f64>,
    pub restart_values: Vec<f64>,
    pub rounds: usize,
}

/// `K` with `Tr(B ρ) = Tr(A K) + const` as a function of one observable `A`
/// of `party` at 1-based `setting`.
fn effective_operator(
    ineq: &BellInequality,
    rho: &Operator,
    m: &MeasurementSet,
    party: usize,
    setting: usize,
) -> Result<Operator> {
    let dims = m.local_dims();
    let mut acc = Operator::zeros(&[dims[party]]);
    for t in ineq.terms.iter().filter(|t| t.settings[party] == setting) {
        let factors = (0..dims.len())
            .map(|k| match t.settings[k] {
                0 => Ok(Operator::identity(&[dims[k]])),
                _ if k == party => Ok(Operator::identity(&[dims[k]])),
                x => m.observable(k, x - 1),
            })
            .collect::<Result<Vec<_>>>()?;
        let others = kron_all(&factors).with_dims(&dims)?;
        let reduced = (&others * rho).partial_trace(&[party])?;
        acc = &acc + &reduced.scale(t.coeff);
    }
    Ok(HermitianOperator::project(acc).into_operator())
}

fn step_value(ks: &[Operator], povms: &[Povm]) -> Result<f64> {
    ks.iter().zip(povms).map(|(k, p)| Ok(p.observable()?.trace_product(k).re)).sum()
}

/// Clips the spectrum of a Hermitian matrix to `[0, 1]`.
fn clip_unit(h: &HermitianOperator) -> Result<Operator> {
    let spec = eig_hermitian(h)?;
    let mut out = Operator::zeros(h.dims());
    for (k, &l) in spec.eigenvalues.iter().enumerate() {
        let l = l.clamp(0.0, 1.0);
        if l > 0.0 {
            let v = spec.vector(k);
            out = &out + &Operator::outer(h.dims(), &v, &v).scale(l);
        }
    }
    Ok(out)
}

fn povm_sdp(k: &Operator) -> Result<Povm> {
    let d = k.dim();
    let mut mb = ModelBuilder::new();
    let plus = mb.add_hermitian(d);
    let minus = mb.add_hermitian(d);
    mb.add_objective_hermitian(plus, &k.scale(-1.0));
    mb.add_objective_hermitian(minus, k);
    let id = |h: &Operator| h.clone();
    mb.add_hermitian_equality(
        &[d],
        &[HermitianTerm::Map { block: plus, adjoint: &id }, HermitianTerm::Map { block: minus, adjoint: &id }],
        &Operator::identity(&[d]),
    );
    mb.reduce_dependent_rows()?;
    let sol = solve(&mb.build(), &SolverSettings::default())?;
    if sol.status != SolveStatus::Optimal {
        return Err(BellError::SolverFailure(crate::conic::SolverError::NotOptimal(sol.status)));
    }
    let p = clip_unit(&extract_hermitian(&sol.x[plus], &[d]))?;
    let q = &Operator::identity(&[d]) - &p;
    Povm::new(vec![HermitianOperator::project(p).into_operator(), HermitianOperator::project(q).into_operator()])
}

fn traceless_projective(k: &Operator, current: &Povm) -> Result<Povm> {
    if k.dim() != 2 {
        return Err(BellError::DimensionMismatch("traceless projective step needs qubits".into()));
    }
    let c = pauli::coordinates(k);
    let n = [c[1], c[2], c[3]];
    if n.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-14 {
        return Ok(current.clone());
    }
    Povm::projective(n)
}

/// Optimal measurements of one party with everything else fixed. The
/// incoming measurements are returned whenever the new ones do not improve
/// the objective, so the step is monotone.
pub fn seesaw_measurements(
    rho: &Operator,
    ineq: &BellInequality,
    party: usize,
    m: &MeasurementSet,
    step: MeasurementStep,
) -> Result<Vec<Povm>> {
    ineq.validate()?;
    super::check_scenario(ineq, m)?;
    let ks = (1..=m.settings(party)).map(|x| effective_operator(ineq, rho, m, party, x)).collect::<Result<Vec<_>>>()?;
    let candidate = ks
        .iter()
        .zip(m.party(party))
        .map(|(k, current)| match step {
            MeasurementStep::Povm => povm_sdp(k),
            MeasurementStep::TracelessProjective => traceless_projective(k, current),
        })
        .collect::<Result<Vec<_>>>()?;
    if step_value(&ks, &candidate)? >= step_value(&ks, m.party(party))? {
        Ok(candidate)
    } else {
        Ok(m.party(party).to_vec())
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

/// Orthogonal projection onto the PT-invariant and permutation-symmetric
/// subspaces selected by `c`.
fn project_symmetries(rho: Operator, c: &StateConstraints) -> Result<Operator> {
    let mut out = rho;
    if c.pt_invariant {
        for k in 0..out.dims().len() {
            out = (&out + &out.partial_transpose(k)?).scale(0.5);
        }
    }
    if c.permutation_symmetric {
        out = symmetrize_parties(&out)?;
    }
    Ok(out)
}

/// State maximizing `Tr(Bρ)` under `constraints`. If `incumbent` is given and
/// scores at least as well, it is returned instead.
pub fn seesaw_state(
    ineq: &BellInequality,
    m: &MeasurementSet,
    constraints: &StateConstraints,
    incumbent: Option<&DensityMatrix>,
) -> Result<DensityMatrix> {
    let b = bell_operator(ineq, m)?;
    let dims = m.local_dims();
    let parties = dims.len();
    if constraints.permutation_symmetric && dims.iter().any(|&d| d != dims[0]) {
        return Err(BellError::DimensionMismatch("permutation symmetry needs equal local dims".into()));
    }
    let n: usize = dims.iter().product();
    let zero = Operator::zeros(&dims);

    let mut mb = ModelBuilder::new();
    let rho = mb.add_hermitian(n);
    mb.add_objective_hermitian(rho, &b.scale(-1.0));
    mb.add_row(vec![(rho, hermitian_coeff(&Operator::identity(&dims)))], 1.0);

    let id = |h: &Operator| h.clone();
    for cut in &constraints.ppt_cuts {
        if cut.iter().any(|&k| k >= parties) {
            return Err(BellError::DimensionMismatch(format!("cut {cut:?}")));
        }
        let tau = mb.add_hermitian(n);
        let neg_pt = |h: &Operator| h.partial_transpose_set(cut).expect("valid cut").scale(-1.0);
        mb.add_hermitian_equality(
            &dims,
            &[HermitianTerm::Map { block: tau, adjoint: &id }, HermitianTerm::Map { block: rho, adjoint: &neg_pt }],
            &zero,
        );
    }
    if constraints.pt_invariant {
        for k in 0..parties {
            let defect = move |h: &Operator| &h.partial_transpose(k).expect("valid party") - h;
            mb.add_hermitian_equality(&dims, &[HermitianTerm::Map { block: rho, adjoint: &defect }], &zero);
        }
    }
    if constraints.permutation_symmetric {
        for perm in permutations(parties).into_iter().filter(|p| p.iter().enumerate().any(|(i, &x)| i != x)) {
            let defect = move |h: &Operator| &h.permute_subsystems(&perm).expect("valid permutation") - h;
            mb.add_hermitian_equality(&dims, &[HermitianTerm::Map { block: rho, adjoint: &defect }], &zero);
        }
    }
    mb.reduce_dependent_rows()?;
    let problem = mb.build();
    let sol = solve(&problem, &SolverSettings::default())?;
    if sol.status != SolveStatus::Optimal {
        return Err(BellError::SolverFailure(crate::conic::SolverError::NotOptimal(sol.status)));
    }
    let raw = extract_hermitian(&sol.x[rho], &[n]).into_operator().with_dims(&dims)?;
    let candidate = DensityMatrix::normalized(project_symmetries(raw, constraints)?)?;
    match incumbent {
        Some(old) if b.expectation(old) > b.expectation(&candidate) => Ok(old.clone()),
        _ => Ok(candidate),
    }
}

fn random_measurements(rng: &mut ChaCha8Rng, ineq: &BellInequality, symmetric: bool) -> Result<MeasurementSet> {
    let s = ineq.scenario;
    let mut draw = || (0..s.settings).map(|_| Povm::projective(random_bloch(rng))).collect::<Result<Vec<_>>>();
    let parties = if symmetric {
        let shared = draw()?;
        vec![shared; s.parties]
    } else {
        (0..s.parties).map(|_| draw()).collect::<Result<Vec<_>>>()?
    };
    MeasurementSet::new(parties)
}

struct RestartOutcome {
    q: f64,
    state: DensityMatrix,
    measurements: MeasurementSet,
    history: Vec<f64>,
    rounds: usize,
}

fn run_restart(ineq: &BellInequality, config: &SeesawConfig, restart: usize) -> Result<RestartOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);
    let mut m = random_measurements(&mut rng, ineq, config.symmetric_init)?;
    let dims: Vec<usize> = vec![2; ineq.scenario.parties];
    let mut rho = DensityMatrix::maximally_mixed(&dims);
    let mut history = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut rounds = 0;
    for _ in 0..config.max_rounds {
        rounds += 1;
        rho = seesaw_state(ineq, &m, &config.constraints, Some(&rho))?;
        history.push(bell_operator(ineq, &m)?.expectation(&rho));
        for party in 0..ineq.scenario.parties {
            let povms = seesaw_measurements(&rho, ineq, party, &m, config.measurement_step)?;
            m.replace_party(party, povms)?;
            history.push(bell_operator(ineq, &m)?.expectation(&rho));
        }
        let value = *history.last().expect("nonempty history");
        if value - prev < config.tolerance {
            break;
        }
        prev = value;
    }
    let q = ineq.evaluate(&correlations(&rho, &m)?)?;
    Ok(RestartOutcome { q, state: rho, measurements: m, history, rounds })
}

/// Best of `config.restarts` independent see-saw runs over qubit parties.
/// Restarts run concurrently; each has its own random stream.
pub fn seesaw(ineq: &BellInequality, config: &SeesawConfig) -> Result<SeesawResult> {
    ineq.validate()?;
    if config.restarts == 0 {
        return Err(BellError::InvalidInequality("at least one restart is required".into()));
    }
    let outcomes: Vec<Result<RestartOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.restarts).map(|r| scope.spawn(move || run_restart(ineq, config, r))).collect();
        handles.into_iter().map(|h| h.join().expect("restart thread panicked")).collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let restart_values: Vec<f64> = outcomes.iter().map(|o| o.q).collect();
    let best = (0..outcomes.len()).fold(0, |best, r| if restart_values[r] > restart_values[best] { r } else { best });
    let o = outcomes.into_iter().nth(best).expect("best index in range");
    Ok(SeesawResult {
        q: o.q,
        state: o.state,
        measurements: o.measurements,
        best_restart: best,
        history: o.history,
        restart_values,
        rounds: o.rounds,
    })
}
