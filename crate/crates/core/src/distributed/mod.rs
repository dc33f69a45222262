//! Consensus over a graph of agents. Agent `n` holds `(f_n, g_n)` and a dual
//! vector per incident edge; the synchronous solver updates every agent each
//! step, the asynchronous one a random subset.
//!
//! Agents are simulated in a single sequential loop. Messages are delivered
//! instantly at step boundaries.

mod graph;

pub use graph::{AgentGraph, EdgeMap};

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::composite::{Batch, BatchProblem};
use crate::engine::BlockSelector;
use crate::error::{Error, Result};
use crate::rng;
use crate::schedule::{DualStep, ScheduleConstants, StepSchedule};
use crate::solvers::{drive, validated, SolveOptions, SolveReport};
use crate::trace::TraceRecord;

/// Slack for the per-edge antisymmetry `y_ε(n) + y_ε(m) = 0`, relative to the
/// largest dual entry.
const ANTISYMMETRY_TOL: f64 = 1e-12;

/// How the edge-dual update is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualScaling {
    /// `(x_n − x_m) / (2μ_k)`, consistent with the ADMMDS⁺ step on the edge map.
    #[default]
    Derived,
    /// `(x_n − x_m) / 2`; agrees with `Derived` only when `μ_k ≡ 1`.
    Printed,
}

#[derive(Debug)]
pub struct DistributedProblem {
    graph: AgentGraph,
    agents: BatchProblem,
    lipschitz: f64,
    scaling: DualScaling,
}

impl DistributedProblem {
    /// One `(f_n, g_n)` per node. `L = max_n L_n / d_n`.
    pub fn new(graph: AgentGraph, agents: Vec<Batch>) -> Result<Self> {
        if agents.len() != graph.node_count() {
            return Err(Error::dimension("agent count", graph.node_count(), agents.len()));
        }
        let agents = BatchProblem::new(agents)?;
        let lipschitz = agents
            .batches()
            .iter()
            .enumerate()
            .map(|(n, b)| b.f.lipschitz() / graph.degree(n) as f64)
            .fold(0.0, f64::max);
        Ok(Self {
            graph,
            agents,
            lipschitz,
            scaling: DualScaling::Derived,
        })
    }

    pub fn with_scaling(mut self, scaling: DualScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn graph(&self) -> &AgentGraph {
        &self.graph
    }

    pub fn agents(&self) -> &BatchProblem {
        &self.agents
    }

    pub fn dim(&self) -> usize {
        self.agents.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn scaling(&self) -> DualScaling {
        self.scaling
    }

    pub fn constants(&self) -> ScheduleConstants {
        ScheduleConstants {
            lipschitz: self.lipschitz,
            norm_d: 1.0,
        }
    }

    /// `Σ_n f_n(x) + g_n(x)` at a common point.
    pub fn objective(&self, x: ArrayView1<f64>) -> f64 {
        self.agents.objective(x)
    }

    fn dual_gain(&self, mu: f64) -> f64 {
        match self.scaling {
            DualScaling::Derived => 0.5 / mu,
            DualScaling::Printed => 0.5,
        }
    }
}

/// Agent iterates: row `n` of `x` is `x_n`; rows `2e` and `2e + 1` of `y`
/// hold `y_ε(n)` and `y_ε(m)` for edge `e = (n, m)`, `n < m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistState {
    x: Array2<f64>,
    y: Array2<f64>,
    k: usize,
}

impl DistState {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if y.ncols() != x.ncols() {
            return Err(Error::dimension("edge dual width", x.ncols(), y.ncols()));
        }
        Ok(Self {
            x: x.as_standard_layout().into_owned(),
            y: y.as_standard_layout().into_owned(),
            k: 0,
        })
    }

    pub fn zeros(p: &DistributedProblem) -> Self {
        let d = p.dim();
        Self {
            x: Array2::zeros((p.graph.node_count(), d)),
            y: Array2::zeros((2 * p.graph.edge_count(), d)),
            k: 0,
        }
    }

    /// Every agent starts at `x0` with zero duals.
    pub fn replicated(p: &DistributedProblem, x0: ArrayView1<f64>) -> Result<Self> {
        if x0.len() != p.dim() {
            return Err(Error::dimension("initial point", p.dim(), x0.len()));
        }
        let mut st = Self::zeros(p);
        for mut row in st.x.rows_mut() {
            row.assign(&x0);
        }
        Ok(st)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// All agent iterates as one vector, node by node.
    pub fn x_flat(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(self.x.as_slice().expect("standard layout"))
    }

    /// Duals in the output layout of [`EdgeMap`].
    pub fn y_flat(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(self.y.as_slice().expect("standard layout"))
    }

    pub fn x_mean(&self) -> Array1<f64> {
        self.x.mean_axis(Axis(0)).expect("at least one agent")
    }

    fn check(&self, p: &DistributedProblem) -> Result<()> {
        let want = (p.graph.node_count(), p.dim());
        if self.x.dim() != want {
            return Err(Error::dimension("agent iterates", want.0 * want.1, self.x.len()));
        }
        if self.y.nrows() != 2 * p.graph.edge_count() {
            return Err(Error::dimension("edge duals", 2 * p.graph.edge_count(), self.y.nrows()));
        }
        Ok(())
    }
}

/// `max_n ‖x_n − x̄‖`.
pub fn consensus_spread(st: &DistState) -> f64 {
    let mean = st.x_mean();
    st.x
        .rows()
        .into_iter()
        .map(|r| {
            let d = &r - &mean;
            d.dot(&d).sqrt()
        })
        .fold(0.0, f64::max)
}

/// `max_ε ‖y_ε(n) + y_ε(m)‖_∞`.
pub fn antisymmetry_defect(st: &DistState) -> f64 {
    let y = &st.y;
    (0..y.nrows() / 2)
        .flat_map(|e| {
            let (a, b) = (y.row(2 * e), y.row(2 * e + 1));
            a.iter().zip(b.iter()).map(|(u, v)| (u + v).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

fn check_antisymmetric(st: &DistState) -> Result<()> {
    let scale = st.y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let defect = antisymmetry_defect(st);
    if defect > ANTISYMMETRY_TOL * scale {
        return Err(Error::invalid(format!(
            "synchronous solver needs antisymmetric edge duals, defect {defect:e}"
        )));
    }
    Ok(())
}

fn check_schedule(p: &DistributedProblem, s: &StepSchedule, k: usize) -> Result<(f64, f64)> {
    if s.dual_step != DualStep::Mu {
        return Err(Error::invalid("distributed solvers need a mu dual step"));
    }
    s.check_at(&p.constants(), k)?;
    Ok((s.tau(k), s.dual(k)))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Variant {
    Sync,
    Async,
}

/// New `(x_n, y_ε(n) for each incident ε)` of agent `n`, read from `st`.
fn agent_update(
    p: &DistributedProblem,
    st: &DistState,
    n: usize,
    tau: f64,
    mu: f64,
    variant: Variant,
) -> (Array1<f64>, Vec<(usize, Array1<f64>)>) {
    let g = &p.graph;
    let gain = p.dual_gain(mu);
    let xn = st.x.row(n);
    let deg = g.degree(n) as f64;
    let mut coupling = Array1::<f64>::zeros(p.dim());
    let mut duals = Vec::with_capacity(g.degree(n));
    for &(m, e) in g.neighbors(n) {
        let own = st.y.row(g.dual_row(e, n));
        let other = st.y.row(g.dual_row(e, m));
        let xm = st.x.row(m);
        let y_new = match variant {
            Variant::Sync => Zip::from(&own).and(&xn).and(&xm).map_collect(|&y, &a, &b| y + gain * (a - b)),
            Variant::Async => Zip::from(&own)
                .and(&other)
                .and(&xn)
                .and(&xm)
                .map_collect(|&y, &z, &a, &b| 0.5 * (y - z) + gain * (a - b)),
        };
        match variant {
            Variant::Sync => Zip::from(&mut coupling)
                .and(&xm)
                .and(&own)
                .for_each(|c, &b, &y| *c += b / mu - y),
            Variant::Async => Zip::from(&mut coupling)
                .and(&xm)
                .and(&other)
                .for_each(|c, &b, &z| *c += b / mu + z),
        }
        duals.push((g.dual_row(e, n), y_new));
    }
    let batch = &p.agents.batches()[n];
    let grad = batch.f.gradient(xn);
    let step = tau / deg;
    let arg = Zip::from(&xn)
        .and(&grad)
        .and(&coupling)
        .map_collect(|&x, &gr, &c| (1.0 - tau / mu) * x - step * gr + step * c);
    (batch.g.prox(arg.view(), step), duals)
}

fn apply_updates(next: &mut DistState, n: usize, x: Array1<f64>, duals: Vec<(usize, Array1<f64>)>) {
    next.x.row_mut(n).assign(&x);
    for (row, y) in duals {
        next.y.row_mut(row).assign(&y);
    }
}

/// One synchronous step over all agents. Initial duals must be antisymmetric
/// on every edge.
pub fn distributed_step(p: &DistributedProblem, s: &StepSchedule, st: &DistState) -> Result<DistState> {
    st.check(p)?;
    if st.k == 0 {
        check_antisymmetric(st)?;
    }
    let (tau, mu) = check_schedule(p, s, st.k)?;
    let mut next = st.clone();
    for n in 0..p.graph.node_count() {
        let (x, duals) = agent_update(p, st, n, tau, mu, Variant::Sync);
        apply_updates(&mut next, n, x, duals);
    }
    next.k = st.k + 1;
    debug_assert!(check_antisymmetric(&next).is_ok());
    Ok(next)
}

/// Distribution over sets of agents woken at each step.
#[derive(Debug, Clone)]
pub struct ActivationSchedule(BlockSelector);

impl ActivationSchedule {
    /// Rejects distributions under which some agent is never woken.
    pub fn new(agents: usize, sets: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        BlockSelector::new(agents, sets).map(Self)
    }

    pub fn all(agents: usize) -> Result<Self> {
        BlockSelector::full(agents).map(Self)
    }

    pub fn uniform_single(agents: usize) -> Result<Self> {
        BlockSelector::uniform_single(agents).map(Self)
    }

    pub fn agents(&self) -> usize {
        self.0.block_count()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[usize] {
        self.0.sample(rng)
    }

    pub fn selector(&self) -> &BlockSelector {
        &self.0
    }
}

/// One asynchronous step. Returns the new state and the active agents;
/// inactive agents keep their iterates and duals bit for bit.
pub fn daspdsds_step<R: Rng + ?Sized>(
    p: &DistributedProblem,
    s: &StepSchedule,
    st: &DistState,
    sched: &ActivationSchedule,
    rng: &mut R,
) -> Result<(DistState, Vec<usize>)> {
    st.check(p)?;
    if sched.agents() != p.graph.node_count() {
        return Err(Error::dimension("activation schedule", p.graph.node_count(), sched.agents()));
    }
    let (tau, mu) = check_schedule(p, s, st.k)?;
    let active = sched.sample(rng).to_vec();
    let mut next = st.clone();
    for &n in &active {
        let (x, duals) = agent_update(p, st, n, tau, mu, Variant::Async);
        apply_updates(&mut next, n, x, duals);
    }
    next.k = st.k + 1;
    Ok((next, active))
}

fn record(p: &DistributedProblem, opts: &SolveOptions, next: &DistState, k: usize) -> TraceRecord {
    let mut rec = TraceRecord::at(k);
    if opts.record_every > 0 && k.is_multiple_of(opts.record_every) {
        rec.spread = Some(consensus_spread(next));
        if opts.objective {
            rec.objective = Some(p.objective(next.x_mean().view()));
        }
    }
    rec
}

fn validate_for(p: &DistributedProblem, s: &StepSchedule, opts: &SolveOptions) -> Result<()> {
    if s.dual_step != DualStep::Mu {
        return Err(Error::invalid("distributed solvers need a mu dual step"));
    }
    validated(&p.constants(), s, opts.stop.max_iters).map(|_| ())
}

/// Synchronous solve; the stop rule watches all agent iterates together.
pub fn solve_distributed(
    p: &DistributedProblem,
    s: &StepSchedule,
    st0: DistState,
    opts: &SolveOptions,
) -> Result<SolveReport<DistState>> {
    st0.check(p)?;
    check_antisymmetric(&st0)?;
    validate_for(p, s, opts)?;
    drive(
        st0,
        opts,
        |st| {
            let next = distributed_step(p, s, st)?;
            let rec = record(p, opts, &next, st.k);
            Ok((next, rec))
        },
        |st| st.x_flat(),
        |st| p.objective(st.x_mean().view()),
    )
}

/// Asynchronous solve with a seeded activation stream. Set
/// [`SolveOptions::window`] to about the agent count when few agents wake
/// per step.
pub fn solve_daspdsds(
    p: &DistributedProblem,
    s: &StepSchedule,
    st0: DistState,
    sched: &ActivationSchedule,
    seed: u64,
    opts: &SolveOptions,
) -> Result<SolveReport<DistState>> {
    st0.check(p)?;
    validate_for(p, s, opts)?;
    let mut r = rng::seeded(seed);
    drive(
        st0,
        opts,
        |st| {
            let (next, active) = daspdsds_step(p, s, st, sched, &mut r)?;
            let mut rec = record(p, opts, &next, st.k);
            if opts.record_every > 0 && st.k % opts.record_every == 0 {
                rec.active_agents = Some(active);
                rec.seed = Some(seed);
            }
            Ok((next, rec))
        },
        |st| st.x_flat(),
        |st| p.objective(st.x_mean().view()),
    )
}
