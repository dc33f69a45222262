//! PDSDS and ADMMDS⁺ on a single composite problem `min f(x) + g(x) + h(Dx)`.

mod admm;
mod metric;
mod pdsds;

pub use admm::{admmds_step, AdmmDs, AdmmState};
pub use metric::p_metric_norm;
pub use pdsds::{pdsds_step, Pdsds, PdsdsOperator};

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linear::LinearMap;
use crate::prox::ProxFn;
use crate::schedule::{validate, ScheduleConstants, ScheduleReport, StepSchedule};
use crate::smooth::SmoothFn;
use crate::trace::{StopRule, TraceRecord};

/// The triple `(f, g, h)` with the linear map `D`.
#[derive(Debug)]
pub struct CompositeProblem {
    pub f: Box<dyn SmoothFn>,
    pub g: Box<dyn ProxFn>,
    pub h: Box<dyn ProxFn>,
    pub d: Box<dyn LinearMap>,
    injective_lipschitz: Option<f64>,
}

impl CompositeProblem {
    pub fn new(
        f: Box<dyn SmoothFn>,
        g: Box<dyn ProxFn>,
        h: Box<dyn ProxFn>,
        d: Box<dyn LinearMap>,
    ) -> Result<Self> {
        if f.dim() != d.input_dim() {
            return Err(Error::dimension("smooth term vs D input", d.input_dim(), f.dim()));
        }
        Ok(Self {
            f,
            g,
            h,
            d,
            injective_lipschitz: None,
        })
    }

    /// Sets `L`, the Lipschitz constant of `∇(f ∘ D⁻¹)` on the range of `D`.
    pub fn with_injective_lipschitz(mut self, l: f64) -> Self {
        self.injective_lipschitz = Some(l);
        self
    }

    pub fn dim(&self) -> usize {
        self.d.input_dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.d.output_dim()
    }

    /// Lipschitz constant `β` of `∇f`.
    pub fn beta(&self) -> f64 {
        self.f.lipschitz()
    }

    /// `L` for the ADMMDS⁺ condition. Without an explicit value it is bounded
    /// by `β / min_i (D*D)_ii` when `D*D` is diagonal.
    pub fn injective_lipschitz(&self) -> Option<f64> {
        self.injective_lipschitz.or_else(|| {
            let gram = self.d.gram_diagonal()?;
            let min = gram.iter().copied().fold(f64::INFINITY, f64::min);
            (min > 0.0).then(|| self.beta() / min)
        })
    }

    pub fn objective(&self, x: ArrayView1<f64>) -> f64 {
        let dx = self.d.apply(x);
        self.f.value(x) + self.g.value(x) + self.h.value(dx.view())
    }

    pub fn pdsds_constants(&self) -> ScheduleConstants {
        ScheduleConstants {
            lipschitz: self.beta(),
            norm_d: self.d.norm_bound(),
        }
    }

    pub fn admm_constants(&self) -> Result<ScheduleConstants> {
        let l = self.injective_lipschitz().ok_or_else(|| {
            Error::Unsupported("ADMMDS+ needs an injective D with known L".into())
        })?;
        Ok(ScheduleConstants {
            lipschitz: l,
            norm_d: 1.0,
        })
    }
}

/// `z = (x, y)` at iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualState {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    pub k: usize,
}

impl PrimalDualState {
    pub fn new(x: Array1<f64>, y: Array1<f64>) -> Self {
        Self { x, y, k: 0 }
    }

    /// `x⁰ = 0`, `y⁰ = 0`.
    pub fn zeros(p: &CompositeProblem) -> Self {
        Self::new(Array1::zeros(p.dim()), Array1::zeros(p.dual_dim()))
    }

    pub(crate) fn check(&self, p: &CompositeProblem) -> Result<()> {
        if self.x.len() != p.dim() {
            return Err(Error::dimension("primal iterate", p.dim(), self.x.len()));
        }
        if self.y.len() != p.dual_dim() {
            return Err(Error::dimension("dual iterate", p.dual_dim(), self.y.len()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub stop: StopRule,
    /// Emit a trace record every `record_every` steps; 0 disables tracing.
    pub record_every: usize,
    /// Include the objective value in trace records.
    pub objective: bool,
    /// Keep the initial state and every `history_every`-th state; 0 keeps none.
    pub history_every: usize,
    /// Compare iterates this many steps apart in the stop rule. Randomized
    /// solvers that move one block per step want roughly the block count.
    pub window: usize,
}

impl SolveOptions {
    pub fn new(stop: StopRule) -> Self {
        Self {
            stop,
            record_every: 0,
            objective: false,
            history_every: 0,
            window: 1,
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window.max(1);
        self
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport<S> {
    pub state: S,
    pub iterations: usize,
    pub converged: bool,
    pub records: Vec<TraceRecord>,
    pub history: Vec<S>,
    pub schedule: Option<ScheduleReport>,
}

/// Shared driver: repeats `step` until the stop rule on `primal` is met.
pub(crate) fn drive<S: Clone>(
    initial: S,
    opts: &SolveOptions,
    mut step: impl FnMut(&S) -> Result<(S, TraceRecord)>,
    primal: impl Fn(&S) -> ArrayView1<'_, f64>,
    objective: impl Fn(&S) -> f64,
) -> Result<SolveReport<S>> {
    let window = opts.window.max(1);
    let mut anchor = primal(&initial).to_owned();
    let mut state = initial;
    let mut report = SolveReport {
        state: state.clone(),
        iterations: 0,
        converged: false,
        records: Vec::new(),
        history: Vec::new(),
        schedule: None,
    };
    if opts.history_every > 0 {
        report.history.push(state.clone());
    }
    for k in 0..opts.stop.max_iters {
        let (next, mut rec) = step(&state)?;
        state = next;
        report.iterations = k + 1;
        if opts.history_every > 0 && (k + 1) % opts.history_every == 0 {
            report.history.push(state.clone());
        }
        let mut change = None;
        if (k + 1) % window == 0 {
            let now = primal(&state);
            change = Some(crate::trace::relative_change(anchor.view(), now));
            anchor.assign(&now);
        }
        let done = change.is_some_and(|c| opts.stop.is_met(c));
        if opts.record_every > 0 && (k % opts.record_every == 0 || done) {
            rec.change = change;
            if opts.objective {
                rec.objective = Some(objective(&state));
            }
            report.records.push(rec);
        }
        if done {
            report.converged = true;
            break;
        }
    }
    report.state = state;
    Ok(report)
}

pub(crate) fn validated(
    consts: &ScheduleConstants,
    schedule: &StepSchedule,
    horizon: usize,
) -> Result<ScheduleReport> {
    validate(consts, schedule, horizon).into_result()
}
