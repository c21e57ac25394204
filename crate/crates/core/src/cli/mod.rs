//! Reproduction pipelines and machine-readable reports.
//!
//! Every headline number is tied to a [`ReproTarget`]; running a target
//! produces [`Check`]s that compare a computed value against the published
//! claim at a stated tolerance.

mod commands;
mod targets;

pub use commands::{run, Cli};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::states::{zoo_names, zoo_state, DensityMatrix};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_RESTARTS: usize = 20;
pub const DEFAULT_RESOLUTION: usize = 2000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown target {0:?}")]
    UnknownTarget(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown state {0:?}")]
    UnknownState(String),
    #[error("malformed report: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetName {
    PptInvariance,
    PermutationInvariance,
    LocalBound,
    Sliwa5Violation,
    FilterRoundtrip,
    LhsQstar,
    ShrinkingFactor,
    SigmaPpt,
    SigmaEntangled,
    SeesawSearch,
}

impl TargetName {
    pub const ALL: [TargetName; 10] = [
        Self::PptInvariance,
        Self::PermutationInvariance,
        Self::LocalBound,
        Self::Sliwa5Violation,
        Self::FilterRoundtrip,
        Self::LhsQstar,
        Self::ShrinkingFactor,
        Self::SigmaPpt,
        Self::SigmaEntangled,
        Self::SeesawSearch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PptInvariance => "ppt-invariance",
            Self::PermutationInvariance => "permutation-invariance",
            Self::LocalBound => "local-bound",
            Self::Sliwa5Violation => "sliwa5-violation",
            Self::FilterRoundtrip => "filter-roundtrip",
            Self::LhsQstar => "lhs-qstar",
            Self::ShrinkingFactor => "shrinking-factor",
            Self::SigmaPpt => "sigma-ppt",
            Self::SigmaEntangled => "sigma-entangled",
            Self::SeesawSearch => "seesaw-search",
        }
    }
}

impl fmt::Display for TargetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| CliError::UnknownTarget(s.to_string()))
    }
}

/// A target with its run parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproTarget {
    pub name: TargetName,
    pub seed: u64,
    /// See-saw restarts; only read by `seesaw-search`.
    pub restarts: usize,
    /// Fibonacci-grid directions; only read by `shrinking-factor`.
    pub resolution: usize,
    /// Replaces the tolerance of the target's primary check.
    pub tolerance: Option<f64>,
}

impl ReproTarget {
    pub fn new(name: TargetName, seed: u64) -> Self {
        Self { name, seed, restarts: DEFAULT_RESTARTS, resolution: DEFAULT_RESOLUTION, tolerance: None }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(1..=1000).contains(&self.restarts) {
            return Err(CliError::InvalidParameter(format!("restarts {} outside 1..=1000", self.restarts)));
        }
        if !(10..=20000).contains(&self.resolution) {
            return Err(CliError::InvalidParameter(format!("resolution {} outside 10..=20000", self.resolution)));
        }
        if let Some(t) = self.tolerance {
            if !(t.is_finite() && t >= 0.0) {
                return Err(CliError::InvalidParameter(format!("tolerance {t} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// What a check compares the computed value against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Expectation {
    /// `|computed − claimed| ≤ tolerance`.
    Within {
        claimed: f64,
        tolerance: f64,
    },
    AtLeast {
        bound: f64,
    },
    AtMost {
        bound: f64,
    },
    Between {
        low: f64,
        high: f64,
    },
    /// The computed flag must be `true`.
    Holds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Computed {
    Number(f64),
    Flag(bool),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// The published statement being checked.
    pub claim: String,
    pub expectation: Expectation,
    pub computed: Computed,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, claim: &str, expectation: Expectation, computed: Computed) -> Self {
        let passed = match (&expectation, &computed) {
            (Expectation::Within { claimed, tolerance }, Computed::Number(x)) => (x - claimed).abs() <= *tolerance,
            (Expectation::AtLeast { bound }, Computed::Number(x)) => x >= bound,
            (Expectation::AtMost { bound }, Computed::Number(x)) => x <= bound,
            (Expectation::Between { low, high }, Computed::Number(x)) => (low..=high).contains(&x),
            (Expectation::Holds, Computed::Flag(b)) => *b,
            _ => false,
        };
        Self { name: name.to_string(), claim: claim.to_string(), expectation, computed, passed }
    }

    pub fn number(name: &str, claim: &str, expectation: Expectation, value: f64) -> Self {
        Self::new(name, claim, expectation, Computed::Number(value))
    }

    pub fn flag(name: &str, claim: &str, value: bool) -> Self {
        Self::new(name, claim, Expectation::Holds, Computed::Flag(value))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub target: ReproTarget,
    pub status: Status,
    pub checks: Vec<Check>,
    /// Supporting numbers that are reported but not checked.
    pub details: BTreeMap<String, serde_json::Value>,
    pub error: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub targets: Vec<TargetName>,
    pub parallel: bool,
    /// Zoo entries replaced by the caller, if any.
    pub overridden_states: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: ReportConfig,
    pub status: Status,
    /// Targets that did not pass, in run order.
    pub failing: Vec<TargetName>,
    pub targets: Vec<TargetReport>,
    pub wall_time_s: f64,
    /// SHA-256 of the report with every wall-time field zeroed and this
    /// field empty.
    pub determinism_hash: String,
}

impl Report {
    fn assemble(seed: u64, config: ReportConfig, targets: Vec<TargetReport>, wall_time_s: f64) -> Self {
        let status = aggregate(targets.iter().map(|t| t.status));
        let failing = targets.iter().filter(|t| t.status != Status::Pass).map(|t| t.target.name).collect();
        let mut report = Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            status,
            failing,
            targets,
            wall_time_s,
            determinism_hash: String::new(),
        };
        report.determinism_hash = report.compute_hash();
        report
    }

    pub fn compute_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.wall_time_s = 0.0;
        canonical.determinism_hash.clear();
        for t in &mut canonical.targets {
            t.wall_time_s = 0.0;
        }
        let bytes = serde_json::to_vec(&canonical).expect("report serialization");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    /// 0 when every target passed, 1 on a failed check, 2 on an error.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Error => 2,
        }
    }
}

fn aggregate(statuses: impl IntoIterator<Item = Status>) -> Status {
    statuses.into_iter().fold(Status::Pass, |acc, s| match (acc, s) {
        (Status::Error, _) | (_, Status::Error) => Status::Error,
        (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
        _ => Status::Pass,
    })
}

/// The states the pipelines read, keyed by zoo name. Replacing an entry lets
/// callers check that a corrupted constant is caught.
#[derive(Clone, Debug)]
pub struct ReproContext {
    states: BTreeMap<String, DensityMatrix>,
    overridden: Vec<String>,
}

impl Default for ReproContext {
    fn default() -> Self {
        let states = zoo_names().iter().map(|&n| (n.to_string(), zoo_state(n).expect("zoo names resolve"))).collect();
        Self { states, overridden: Vec::new() }
    }
}

impl ReproContext {
    pub fn with_state(mut self, name: &str, rho: DensityMatrix) -> Result<Self, CliError> {
        if !self.states.contains_key(name) {
            return Err(CliError::UnknownState(name.to_string()));
        }
        self.states.insert(name.to_string(), rho);
        if !self.overridden.iter().any(|n| n == name) {
            self.overridden.push(name.to_string());
        }
        Ok(self)
    }

    pub fn state(&self, name: &str) -> &DensityMatrix {
        &self.states[name]
    }
}

fn run_target(ctx: &ReproContext, target: &ReproTarget) -> TargetReport {
    let start = Instant::now();
    let outcome = target.validate().map_err(|e| e.to_string()).and_then(|()| targets::run(ctx, target));
    let wall_time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((checks, details)) => {
            let status = if checks.iter().all(|c| c.passed) { Status::Pass } else { Status::Fail };
            TargetReport { target: target.clone(), status, checks, details, error: None, wall_time_s }
        }
        Err(message) => TargetReport {
            target: target.clone(),
            status: Status::Error,
            checks: Vec::new(),
            details: BTreeMap::new(),
            error: Some(message),
            wall_time_s,
        },
    }
}

/// Runs one target.
pub fn reproduce(ctx: &ReproContext, target: &ReproTarget) -> Report {
    reproduce_many(ctx, std::slice::from_ref(target), target.seed, false)
}

/// Runs `targets` in order, or concurrently when `parallel`; the report
/// lists them in the given order either way.
pub fn reproduce_many(ctx: &ReproContext, targets: &[ReproTarget], seed: u64, parallel: bool) -> Report {
    let start = Instant::now();
    let reports: Vec<TargetReport> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = targets.iter().map(|t| scope.spawn(move || run_target(ctx, t))).collect();
            handles.into_iter().map(|h| h.join().expect("target worker panicked")).collect()
        })
    } else {
        targets.iter().map(|t| run_target(ctx, t)).collect()
    };
    let config = ReportConfig {
        targets: targets.iter().map(|t| t.name).collect(),
        parallel,
        overridden_states: ctx.overridden.clone(),
    };
    Report::assemble(seed, config, reports, start.elapsed().as_secs_f64())
}

/// Every target with default parameters.
pub fn reproduce_all(ctx: &ReproContext, seed: u64, parallel: bool) -> Report {
    let targets: Vec<ReproTarget> = TargetName::ALL.iter().map(|&n| ReproTarget::new(n, seed)).collect();
    reproduce_many(ctx, &targets, seed, parallel)
}
