//! Experiment configuration as plain `key = value` text.
//!
//! Lines are `key = value` (or `key: value`); `#` starts a comment. Lists are
//! comma separated. Recognized keys:
//!
//! ```text
//! solver        pdsds | admmds | minibatch | smpdsds | dist | daspdsds
//! n, batches, max_iters, trace_every, window
//! eps, seeds    comma-separated lists
//! lambda_factor λ = lambda_factor · ‖Aᵀb‖∞
//! schedule      constant | dynamic
//! tau_factor    τ∞ = tau_factor / L
//! dual_factor   σ∞ = dual_factor · L, or 1/μ∞ = dual_factor · L
//! growth        a in the dynamic schedules
//! relaxation    constant ρ for PDSDS
//! split         contiguous | shuffled:<seed>
//! dual_scaling  derived | printed
//! timing        true | false
//! ```

use std::fmt;
use std::str::FromStr;

use pdsds_core::distributed::{AgentGraph, DualScaling};
use pdsds_core::schedule::{DualStep, Relaxation, StepSchedule, DEFAULT_DYNAMIC_A};
use pdsds_core::trace::StopRule;
use serde::{Deserialize, Serialize};

use crate::lasso::{SplitMode, DEFAULT_LAMBDA_FACTOR};
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Pdsds,
    Admmds,
    Minibatch,
    Smpdsds,
    Dist,
    Daspdsds,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Pdsds,
        SolverKind::Admmds,
        SolverKind::Minibatch,
        SolverKind::Smpdsds,
        SolverKind::Dist,
        SolverKind::Daspdsds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Pdsds => "pdsds",
            SolverKind::Admmds => "admmds",
            SolverKind::Minibatch => "minibatch",
            SolverKind::Smpdsds => "smpdsds",
            SolverKind::Dist => "dist",
            SolverKind::Daspdsds => "daspdsds",
        }
    }

    pub fn dual_step(self) -> DualStep {
        match self {
            SolverKind::Pdsds => DualStep::Sigma,
            _ => DualStep::Mu,
        }
    }

    /// Whether the solver splits the rows into batches or agents.
    pub fn is_split(self) -> bool {
        !matches!(self, SolverKind::Pdsds | SolverKind::Admmds)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| BenchError::Config(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    Dynamic,
}

/// Stepsizes expressed relative to the problem's Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub tau_factor: f64,
    pub dual_factor: f64,
    pub growth: f64,
    pub relaxation: Option<f64>,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Constant,
            tau_factor: 1.0,
            dual_factor: 0.4,
            growth: DEFAULT_DYNAMIC_A,
            relaxation: None,
        }
    }
}

impl ScheduleSpec {
    /// Builds the schedule for a problem whose relevant Lipschitz constant is
    /// `l` (β for PDSDS, L otherwise) and whose `‖D‖` is at most `norm_d`.
    pub fn build(&self, dual_step: DualStep, l: f64, norm_d: f64) -> StepSchedule {
        let tau = self.tau_factor / l;
        let s = match (dual_step, self.kind) {
            (DualStep::Sigma, ScheduleKind::Constant) => {
                StepSchedule::pdsds_constant(tau, self.dual_factor * l / (norm_d * norm_d), 1.0)
            }
            (DualStep::Sigma, ScheduleKind::Dynamic) => {
                StepSchedule::pdsds_dynamic(tau, self.dual_factor * l / (norm_d * norm_d), self.growth).with_tau_cap(tau)
            }
            (DualStep::Mu, ScheduleKind::Constant) => StepSchedule::admm_constant(tau, 1.0 / (self.dual_factor * l)),
            (DualStep::Mu, ScheduleKind::Dynamic) => {
                StepSchedule::admm_dynamic(tau, 1.0 / (self.dual_factor * l), self.growth).with_tau_cap(tau)
            }
        };
        match self.relaxation {
            Some(r) => s.with_relaxation(Relaxation::Constant(r)),
            None => s,
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<bool, BenchError> {
        match key {
            "schedule" => {
                self.kind = match value {
                    "constant" => ScheduleKind::Constant,
                    "dynamic" => ScheduleKind::Dynamic,
                    _ => return Err(BenchError::Config(format!("unknown schedule '{value}'"))),
                }
            }
            "tau_factor" => self.tau_factor = number(key, value)?,
            "dual_factor" => self.dual_factor = number(key, value)?,
            "growth" => self.growth = number(key, value)?,
            "relaxation" => self.relaxation = Some(number(key, value)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Parses a file holding only schedule keys.
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut spec = Self::default();
        for (key, value) in pairs(text)? {
            if !spec.set(&key, &value)? {
                return Err(BenchError::Config(format!("'{key}' is not a schedule key")));
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub solver: SolverKind,
    pub n: usize,
    pub batches: usize,
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub max_iters: usize,
    pub lambda_factor: f64,
    pub schedule: ScheduleSpec,
    /// Agent graph for the distributed solvers; a ring when absent.
    pub graph: Option<AgentGraph>,
    pub split: SplitMode,
    pub dual_scaling: DualScaling,
    /// Trace and curve sampling period; 0 disables both.
    pub trace_every: usize,
    /// Stop-rule window; defaults to the batch count for the randomized solvers.
    pub window: Option<usize>,
    /// When false, `seconds` is reported as 0 so outputs are byte-stable.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::Minibatch,
            n: 1024,
            batches: 4,
            eps: vec![1e-5],
            seeds: vec![0],
            max_iters: StopRule::DEFAULT_MAX_ITERS,
            lambda_factor: DEFAULT_LAMBDA_FACTOR,
            schedule: ScheduleSpec::default(),
            graph: None,
            split: SplitMode::Contiguous,
            dual_scaling: DualScaling::Derived,
            trace_every: 100,
            window: None,
            timing: true,
        }
    }
}

impl ExperimentConfig {
    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply(&mut self, text: &str) -> Result<(), BenchError> {
        for (key, value) in pairs(text)? {
            if self.schedule.set(&key, &value)? {
                continue;
            }
            match key.as_str() {
                "solver" | "algorithm" => self.solver = value.parse()?,
                "n" => self.n = number(&key, &value)?,
                "batches" | "N" => self.batches = number(&key, &value)?,
                "eps" | "tolerance" => self.eps = list(&key, &value)?,
                "seeds" | "seed" => self.seeds = list(&key, &value)?,
                "max_iters" => self.max_iters = number(&key, &value)?,
                "lambda_factor" => self.lambda_factor = number(&key, &value)?,
                "trace_every" => self.trace_every = number(&key, &value)?,
                "window" => self.window = Some(number(&key, &value)?),
                "timing" => self.timing = number(&key, &value)?,
                "split" => self.split = parse_split(&value)?,
                "dual_scaling" => {
                    self.dual_scaling = match value.as_str() {
                        "derived" => DualScaling::Derived,
                        "printed" => DualScaling::Printed,
                        _ => return Err(BenchError::Config(format!("unknown dual scaling '{value}'"))),
                    }
                }
                _ => return Err(BenchError::Config(format!("unknown key '{key}'"))),
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Batch or agent count actually used by the configured solver.
    pub fn effective_batches(&self) -> usize {
        match (self.solver, &self.graph) {
            (SolverKind::Dist | SolverKind::Daspdsds, Some(g)) => g.node_count(),
            (k, _) if k.is_split() => self.batches,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.eps.is_empty() || self.seeds.is_empty() {
            return Err(BenchError::Config("need at least one eps and one seed".into()));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(BenchError::Config("eps values must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(BenchError::Config("max_iters must be positive".into()));
        }
        if matches!(self.solver, SolverKind::Dist | SolverKind::Daspdsds) && self.graph.is_none() && self.batches < 2 {
            return Err(BenchError::Config("distributed solvers need at least two agents".into()));
        }
        Ok(())
    }
}

fn parse_split(value: &str) -> Result<SplitMode, BenchError> {
    match value.split_once(':') {
        None if value == "contiguous" => Ok(SplitMode::Contiguous),
        None if value == "shuffled" => Ok(SplitMode::Shuffled(0)),
        Some(("shuffled", seed)) => Ok(SplitMode::Shuffled(number("split", seed)?)),
        _ => Err(BenchError::Config(format!("unknown split '{value}'"))),
    }
}

fn pairs(text: &str) -> Result<Vec<(String, String)>, BenchError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| BenchError::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, BenchError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| BenchError::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, BenchError>
where
    T::Err: fmt::Display,
{
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| number(key, s)).collect()
}
