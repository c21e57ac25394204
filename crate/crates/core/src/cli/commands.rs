//! Command-line parsing and dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use super::{
    reproduce_all, reproduce_many, ReproContext, ReproTarget, TargetName, DEFAULT_RESOLUTION, DEFAULT_RESTARTS,
};
use crate::bell::{sliwa5, BellInequality, MeasurementStep, SeesawConfig, StateConstraints};
use crate::hermlin::{pauli, Operator};
use crate::lhs::{
    construct_lhs, polytope_by_name, polytope_names, shrinking_factor, verify_certificate, LhsCertificate, NoiseModel,
};
use crate::states::{zoo_names, zoo_state};

#[derive(Debug, Parser)]
#[command(
    name = "boundloc",
    version,
    about = "Hidden nonlocality of bound entangled states: reproduction and certificates"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run reproduction targets and emit a JSON report.
    Reproduce(ReproduceArgs),
    /// Inspect the built-in states.
    #[command(subcommand)]
    Zoo(ZooCommand),
    /// Bell-inequality tools.
    #[command(subcommand)]
    Bell(BellCommand),
    /// Local-hidden-state construction and checking.
    #[command(subcommand)]
    Lhs(LhsCommand),
}

#[derive(Debug, Args)]
struct SeedArg {
    #[arg(long, env = "BOUNDLOC_SEED", default_value_t = super::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Run a single target; all targets when omitted.
    #[arg(long)]
    target: Option<String>,
    #[command(flatten)]
    seed: SeedArg,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run targets concurrently.
    #[arg(long)]
    parallel: bool,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    /// Override the tolerance of each target's primary check.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum ZooCommand {
    /// List state names.
    List,
    /// Print a state in the operator JSON format.
    Dump { name: String },
}

#[derive(Debug, Subcommand)]
enum BellCommand {
    /// See-saw search for the largest Bell value.
    Seesaw(SeesawArgs),
}

#[derive(Debug, Args)]
struct SeesawArgs {
    /// `sliwa5` or a path to an inequality JSON file.
    #[arg(long, default_value = "sliwa5")]
    ineq: String,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[command(flatten)]
    seed: SeedArg,
    /// Require a positive partial transpose on every party.
    #[arg(long)]
    ppt: bool,
    /// Require invariance under every single-party transpose.
    #[arg(long)]
    pt_invariant: bool,
    /// Require invariance under party permutations.
    #[arg(long)]
    sym: bool,
    /// Optimize over all two-outcome POVMs instead of traceless observables.
    #[arg(long)]
    general_povm: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    /// Bloch vector of the noise state ξ as `x,y,z`; `0,0,0` is ξ = 1/2.
    #[arg(long, default_value = "0,0,0", value_parser = parse_bloch)]
    xi: [f64; 3],
}

#[derive(Debug, Subcommand)]
enum LhsCommand {
    /// Solve for an LHS model and write its certificate.
    Build {
        /// Zoo state name.
        #[arg(long, default_value = "rho_l")]
        target: String,
        #[arg(long, default_value = "icosa76")]
        polytope: String,
        #[arg(long, default_value_t = 0.673)]
        eta: f64,
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recheck a certificate file without the solver.
    Verify { certificate: PathBuf },
    /// Grid-certified shrinking factor of a polytope.
    Shrink {
        #[arg(long, default_value = "icosa76")]
        polytope: String,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[command(flatten)]
        noise: NoiseArgs,
    },
}

fn parse_bloch(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    let v: [f64; 3] = parts.try_into().map_err(|_| "expected three comma-separated numbers".to_string())?;
    if v.iter().map(|x| x * x).sum::<f64>() > 1.0 + 1e-12 {
        return Err("Bloch vector longer than 1".into());
    }
    Ok(v)
}

fn xi_operator(bloch: [f64; 3]) -> Operator {
    (&pauli::identity() + &pauli::bloch(bloch)).scale(0.5)
}

/// Failure of a command, mapped to exit code 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Self(e.to_string())
    }
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n"))?,
        None => writeln!(out, "{text}")?,
    }
    Ok(())
}

fn load_inequality(spec: &str) -> Result<BellInequality, Failure> {
    if spec == "sliwa5" {
        return Ok(sliwa5());
    }
    let text = std::fs::read_to_string(spec).map_err(|e| Failure(format!("{spec}: {e}")))?;
    Ok(BellInequality::from_json(&text)?)
}

/// Parses `args` (including the program name), runs the command, and returns
/// the process exit code: 0 success, 1 failed check, 2 error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 2;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Failure(message)) => {
            let _ = writeln!(err, "error: {message}");
            2
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Reproduce(args) => reproduce_command(args, out),
        Command::Zoo(ZooCommand::List) => {
            for name in zoo_names() {
                writeln!(out, "{name}")?;
            }
            Ok(0)
        }
        Command::Zoo(ZooCommand::Dump { name }) => {
            let rho = zoo_state(&name).ok_or_else(|| Failure(format!("unknown state {name:?}")))?;
            writeln!(out, "{}", rho.to_json())?;
            Ok(0)
        }
        Command::Bell(BellCommand::Seesaw(args)) => seesaw_command(args, out),
        Command::Lhs(cmd) => lhs_command(cmd, out),
    }
}

fn reproduce_command(args: ReproduceArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let seed = args.seed.seed;
    let configure = |name: TargetName| ReproTarget {
        restarts: args.restarts,
        resolution: args.resolution,
        tolerance: args.tolerance,
        ..ReproTarget::new(name, seed)
    };
    let ctx = ReproContext::default();
    let report = match &args.target {
        Some(name) => reproduce_many(&ctx, &[configure(name.parse()?)], seed, args.parallel),
        None if args.restarts == DEFAULT_RESTARTS
            && args.resolution == DEFAULT_RESOLUTION
            && args.tolerance.is_none() =>
        {
            reproduce_all(&ctx, seed, args.parallel)
        }
        None => {
            let targets: Vec<ReproTarget> = TargetName::ALL.iter().map(|&n| configure(n)).collect();
            reproduce_many(&ctx, &targets, seed, args.parallel)
        }
    };
    emit(out, args.out.as_deref(), &report.to_json())?;
    Ok(report.exit_code())
}

fn seesaw_command(args: SeesawArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let ineq = load_inequality(&args.ineq)?;
    let parties = ineq.scenario.parties;
    let mut config = SeesawConfig::new(parties);
    config.restarts = args.restarts;
    config.seed = args.seed.seed;
    config.constraints = StateConstraints {
        ppt_cuts: if args.ppt { (0..parties).map(|k| vec![k]).collect() } else { Vec::new() },
        pt_invariant: args.pt_invariant,
        permutation_symmetric: args.sym,
    };
    if args.general_povm {
        config.measurement_step = MeasurementStep::Povm;
    }
    let result = crate::bell::seesaw(&ineq, &config)?;
    let measurements: serde_json::Value = serde_json::from_str(&result.measurements.to_json())?;
    let report = json!({
        "q": result.q,
        "local_bound": ineq.local_bound,
        "best_restart": result.best_restart,
        "restart_values": result.restart_values,
        "rounds": result.rounds,
        "config": config,
        "state": (*result.state).clone(),
        "measurements": measurements,
    });
    emit(out, args.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    Ok(0)
}

fn lhs_command(cmd: LhsCommand, out: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        LhsCommand::Build { target, polytope, eta, noise, out: path } => {
            let rho = zoo_state(&target).ok_or_else(|| Failure(format!("unknown state {target:?}")))?;
            let polytope = polytope_by_name(&polytope)?;
            let noise = NoiseModel::new(xi_operator(noise.xi), eta)?;
            let cert = construct_lhs(&rho, &polytope, &noise)?;
            emit(out, path.as_deref(), &cert.to_json())?;
            Ok(if cert.verification.as_ref().is_some_and(|v| v.passed) { 0 } else { 1 })
        }
        LhsCommand::Verify { certificate } => {
            let text = std::fs::read_to_string(&certificate)
                .map_err(|e| Failure(format!("{}: {e}", certificate.display())))?;
            let cert = LhsCertificate::from_json(&text)?;
            let polytope = polytope_by_name(&cert.polytope).map_err(|_| {
                Failure(format!("certificate names polytope {:?}; known: {:?}", cert.polytope, polytope_names()))
            })?;
            let check = verify_certificate(&cert, &polytope)?;
            emit(out, None, &serde_json::to_string_pretty(&check)?)?;
            Ok(if check.passed { 0 } else { 1 })
        }
        LhsCommand::Shrink { polytope, resolution, noise } => {
            let polytope = polytope_by_name(&polytope)?;
            let report = shrinking_factor(&polytope, &xi_operator(noise.xi), resolution)?;
            emit(out, None, &serde_json::to_string_pretty(&report)?)?;
            Ok(0)
        }
    }
}
