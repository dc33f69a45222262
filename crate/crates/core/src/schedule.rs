//! Iteration-dependent stepsizes and their validation.
//!
//! A schedule carries a primal step `τ_k`, a dual step (`σ_k` for PDSDS or
//! `μ_k` for the ADMMDS⁺ family) and, for PDSDS, a relaxation `ρ_k`. The
//! convergence conditions are enforced at every iteration of the run horizon
//! and at the declared limits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A positive real sequence with a known limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequence {
    Constant(f64),
    /// `limit · (1 + a/(k+1))`, decreasing to `limit`.
    Grow { limit: f64, a: f64 },
    /// `limit / (1 + a/(k+1))`, increasing to `limit`.
    Shrink { limit: f64, a: f64 },
    /// Listed values, then `limit` for every later iteration.
    Explicit { values: Vec<f64>, limit: f64 },
}

impl Sequence {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Sequence::Constant(v) => *v,
            Sequence::Grow { limit, a } => limit * (1.0 + a / (k as f64 + 1.0)),
            Sequence::Shrink { limit, a } => limit / (1.0 + a / (k as f64 + 1.0)),
            Sequence::Explicit { values, limit } => values.get(k).copied().unwrap_or(*limit),
        }
    }

    pub fn limit(&self) -> f64 {
        match self {
            Sequence::Constant(v) => *v,
            Sequence::Grow { limit, .. }
            | Sequence::Shrink { limit, .. }
            | Sequence::Explicit { limit, .. } => *limit,
        }
    }
}

/// Which dual stepsize the schedule carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualStep {
    /// `σ_k`, used by PDSDS; condition `1/τ − σ‖D‖² > β/2`.
    Sigma,
    /// `μ_k`, used by ADMMDS⁺ and its derivatives; condition `1/τ − 1/μ > L/2`.
    Mu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    Constant(f64),
    /// `ρ_k = c · δ_k`.
    DeltaFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub tau: Sequence,
    pub dual: Sequence,
    pub dual_step: DualStep,
    pub relaxation: Relaxation,
    /// Upper clip applied to every `τ_k`.
    pub tau_cap: Option<f64>,
}

/// Default growth parameter `a` of the dynamic schedules.
pub const DEFAULT_DYNAMIC_A: f64 = 0.5;
/// Default relaxation fraction of `δ_k`.
pub const DEFAULT_RELAXATION_FRACTION: f64 = 0.99;

impl StepSchedule {
    pub fn pdsds_constant(tau: f64, sigma: f64, rho: f64) -> Self {
        Self {
            tau: Sequence::Constant(tau),
            dual: Sequence::Constant(sigma),
            dual_step: DualStep::Sigma,
            relaxation: Relaxation::Constant(rho),
            tau_cap: None,
        }
    }

    /// `τ_k = τ∞(1 + a/(k+1))`, `σ_k = σ∞/(1 + a/(k+1))`, `ρ_k = 0.99·δ_k`.
    pub fn pdsds_dynamic(tau_limit: f64, sigma_limit: f64, a: f64) -> Self {
        Self {
            tau: Sequence::Grow { limit: tau_limit, a },
            dual: Sequence::Shrink {
                limit: sigma_limit,
                a,
            },
            dual_step: DualStep::Sigma,
            relaxation: Relaxation::DeltaFraction(DEFAULT_RELAXATION_FRACTION),
            tau_cap: None,
        }
    }

    pub fn admm_constant(tau: f64, mu: f64) -> Self {
        Self {
            tau: Sequence::Constant(tau),
            dual: Sequence::Constant(mu),
            dual_step: DualStep::Mu,
            relaxation: Relaxation::Constant(1.0),
            tau_cap: None,
        }
    }

    /// `τ_k = τ∞(1 + a/(k+1))` and `μ_k = μ∞(1 + a/(k+1))`, so that `1/μ_k`
    /// approaches `1/μ∞` from below like `σ_k` does.
    pub fn admm_dynamic(tau_limit: f64, mu_limit: f64, a: f64) -> Self {
        Self {
            tau: Sequence::Grow { limit: tau_limit, a },
            dual: Sequence::Grow { limit: mu_limit, a },
            dual_step: DualStep::Mu,
            relaxation: Relaxation::Constant(1.0),
            tau_cap: None,
        }
    }

    pub fn with_tau_cap(mut self, cap: f64) -> Self {
        self.tau_cap = Some(cap);
        self
    }

    pub fn with_relaxation(mut self, relaxation: Relaxation) -> Self {
        self.relaxation = relaxation;
        self
    }

    pub fn tau(&self, k: usize) -> f64 {
        let t = self.tau.at(k);
        self.tau_cap.map_or(t, |c| t.min(c))
    }

    pub fn tau_limit(&self) -> f64 {
        let t = self.tau.limit();
        self.tau_cap.map_or(t, |c| t.min(c))
    }

    /// `σ_k` or `μ_k`, depending on [`DualStep`].
    pub fn dual(&self, k: usize) -> f64 {
        self.dual.at(k)
    }

    /// `ρ_k` given `δ_k`. The ADMMDS⁺ family takes unrelaxed steps.
    pub fn relaxation_at(&self, _k: usize, delta: f64) -> f64 {
        if self.dual_step == DualStep::Mu {
            return 1.0;
        }
        match self.relaxation {
            Relaxation::Constant(r) => r,
            Relaxation::DeltaFraction(c) => c * delta,
        }
    }

    fn relaxation_limit(&self, delta: f64) -> f64 {
        match (self.dual_step, &self.relaxation) {
            (DualStep::Mu, _) => 1.0,
            (_, Relaxation::Constant(r)) => *r,
            (_, Relaxation::DeltaFraction(c)) => c * delta,
        }
    }

    /// Validates iteration `k` and returns `δ_k`.
    pub fn check_at(&self, consts: &ScheduleConstants, k: usize) -> Result<f64> {
        let tau = self.tau(k);
        let dual = self.dual(k);
        let at = Checkpoint::Iteration(k);
        let delta = check_pair(consts, self.dual_step, tau, dual).map_err(|condition| Error::Schedule { at, condition })?;
        let rho = self.relaxation_at(k, delta);
        if self.dual_step == DualStep::Sigma && !(rho > 0.0 && rho < delta) {
            return Err(Error::Schedule {
                at,
                condition: Condition::RelaxationRange,
            });
        }
        Ok(delta)
    }
}

/// Problem constants entering the schedule conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    /// Lipschitz constant of the smooth gradient: `β` for PDSDS, `L` for the
    /// ADMMDS⁺ family.
    pub lipschitz: f64,
    /// Upper bound on `‖D‖`; unused by the ADMMDS⁺ condition.
    pub norm_d: f64,
}

/// Where a condition was checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Checkpoint {
    Iteration(usize),
    Limit,
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Checkpoint::Iteration(k) => write!(f, "k={k}"),
            Checkpoint::Limit => f.write_str("limit"),
        }
    }
}

/// A violated convergence condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// τ, σ or μ is not a positive finite number.
    NonPositiveStep,
    /// (i): `1/τ − σ‖D‖² > β/2` (or `1/τ − 1/μ > L/2`).
    StepBound,
    /// (ii): `ρ_k ∈ (0, δ_k)`.
    RelaxationRange,
    /// (iii): `0 < lim ρ_k < lim δ_k`.
    RelaxationLimit,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::NonPositiveStep => "stepsizes must be positive and finite",
            Condition::StepBound => "(i) 1/tau - sigma*|D|^2 must exceed beta/2 (1/tau - 1/mu > L/2)",
            Condition::RelaxationRange => "(ii) rho_k must lie in (0, delta_k)",
            Condition::RelaxationLimit => "(iii) the limit of rho_k must lie in (0, lim delta_k)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub at: Checkpoint,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub violations: Vec<Violation>,
    /// `δ_k` for `k = 0..=horizon`, `None` where condition (i) fails.
    pub deltas: Vec<Option<f64>>,
    pub delta_limit: Option<f64>,
}

impl ScheduleReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_error(&self) -> Option<Error> {
        self.violations.first().map(|v| Error::Schedule {
            at: v.at,
            condition: v.condition,
        })
    }

    pub fn into_result(self) -> Result<Self> {
        match self.first_error() {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

impl fmt::Display for ScheduleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "schedule valid over {} iterations", self.deltas.len());
        }
        for v in &self.violations {
            writeln!(f, "{}: {}", v.at, v.condition)?;
        }
        Ok(())
    }
}

/// `δ = 2 − (β/2)·(1/τ − s‖D‖²)⁻¹` where `s` is σ (or 1/μ with `‖D‖ = 1`).
pub fn delta(consts: &ScheduleConstants, dual_step: DualStep, tau: f64, dual: f64) -> f64 {
    let gap = step_gap(consts, dual_step, tau, dual);
    2.0 - 0.5 * consts.lipschitz / gap
}

/// `κ = (1/τ − σ‖D‖²)/β`, so that `δ = 2 − 1/(2κ)`.
pub fn kappa(consts: &ScheduleConstants, dual_step: DualStep, tau: f64, dual: f64) -> f64 {
    step_gap(consts, dual_step, tau, dual) / consts.lipschitz
}

fn step_gap(consts: &ScheduleConstants, dual_step: DualStep, tau: f64, dual: f64) -> f64 {
    match dual_step {
        DualStep::Sigma => 1.0 / tau - dual * consts.norm_d * consts.norm_d,
        DualStep::Mu => 1.0 / tau - 1.0 / dual,
    }
}

fn check_pair(
    consts: &ScheduleConstants,
    dual_step: DualStep,
    tau: f64,
    dual: f64,
) -> std::result::Result<f64, Condition> {
    if !(tau > 0.0 && tau.is_finite() && dual > 0.0 && dual.is_finite()) {
        return Err(Condition::NonPositiveStep);
    }
    if !(step_gap(consts, dual_step, tau, dual) > 0.5 * consts.lipschitz) {
        return Err(Condition::StepBound);
    }
    Ok(delta(consts, dual_step, tau, dual))
}

/// Checks every condition for `k = 0..=horizon` and at the limits.
pub fn validate(consts: &ScheduleConstants, s: &StepSchedule, horizon: usize) -> ScheduleReport {
    let mut violations = Vec::new();
    let mut deltas = Vec::with_capacity(horizon + 1);
    let relaxed = s.dual_step == DualStep::Sigma;
    for k in 0..=horizon {
        let at = Checkpoint::Iteration(k);
        match check_pair(consts, s.dual_step, s.tau(k), s.dual(k)) {
            Err(condition) => {
                violations.push(Violation { at, condition });
                deltas.push(None);
            }
            Ok(d) => {
                deltas.push(Some(d));
                let rho = s.relaxation_at(k, d);
                if relaxed && !(rho > 0.0 && rho < d) {
                    violations.push(Violation {
                        at,
                        condition: Condition::RelaxationRange,
                    });
                }
            }
        }
    }
    let delta_limit = match check_pair(consts, s.dual_step, s.tau_limit(), s.dual.limit()) {
        Err(condition) => {
            violations.push(Violation {
                at: Checkpoint::Limit,
                condition,
            });
            None
        }
        Ok(d) => {
            let rho = s.relaxation_limit(d);
            if relaxed && !(rho > 0.0 && rho < d) {
                violations.push(Violation {
                    at: Checkpoint::Limit,
                    condition: Condition::RelaxationLimit,
                });
            }
            Some(d)
        }
    };
    ScheduleReport {
        violations,
        deltas,
        delta_limit,
    }
}
