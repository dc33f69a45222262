//! Runs one configured solver over seeds and tolerances.

use std::time::Instant;

use ndarray::Array1;
use pdsds_core::composite::{solve_minibatch, solve_smpdsds, BatchState};
use pdsds_core::distributed::{
    consensus_spread, solve_daspdsds, solve_distributed, ActivationSchedule, AgentGraph, DistState, DistributedProblem,
};
use pdsds_core::engine::BlockSelector;
use pdsds_core::linear::Identity;
use pdsds_core::prox::{L1Norm, Zero};
use pdsds_core::schedule::StepSchedule;
use pdsds_core::smooth::SmoothFn;
use pdsds_core::solvers::{AdmmDs, AdmmState, CompositeProblem, Pdsds, PrimalDualState, SolveOptions, SolveReport};
use pdsds_core::trace::{StopRule, TraceRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SolverKind};
use crate::lasso::{batch_terms, gen_lasso, split_batches, LassoInstance};
use crate::BenchError;

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: SolverKind,
    pub n: usize,
    pub batches: usize,
    pub eps: f64,
    pub seed: u64,
    /// `‖x_rec − x_true‖`.
    pub err: f64,
    /// `½‖A x_rec − b‖²`.
    pub fval: f64,
    pub k: usize,
    pub seconds: f64,
    pub lambda: f64,
    pub converged: bool,
    /// Full LASSO objective at `x_rec`.
    pub objective: f64,
    /// Consensus spread of the split solvers, 0 otherwise.
    pub spread: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub x: Array1<f64>,
    pub records: Vec<TraceRecord>,
    /// `(k, fval)` sampled every `trace_every` steps.
    pub curve: Vec<(usize, f64)>,
}

struct Solved {
    x: Array1<f64>,
    iterations: usize,
    converged: bool,
    spread: f64,
    records: Vec<TraceRecord>,
    curve: Vec<(usize, Array1<f64>)>,
}

fn solved<S>(r: SolveReport<S>, x: impl Fn(&S) -> Array1<f64>, k: impl Fn(&S) -> usize, spread: f64) -> Solved {
    Solved {
        x: x(&r.state),
        iterations: r.iterations,
        converged: r.converged,
        spread,
        curve: r.history.iter().map(|s| (k(s), x(s))).collect(),
        records: r.records,
    }
}

fn lasso_composite(inst: &LassoInstance) -> Result<CompositeProblem, BenchError> {
    Ok(CompositeProblem::new(
        Box::new(inst.least_squares()?),
        Box::new(Zero),
        Box::new(L1Norm::new(inst.lambda)),
        Box::new(Identity::new(inst.n())),
    )?)
}

/// The graph used by the distributed solvers.
pub fn agent_graph(cfg: &ExperimentConfig) -> Result<AgentGraph, BenchError> {
    match &cfg.graph {
        Some(g) => Ok(g.clone()),
        None => Ok(AgentGraph::ring(cfg.batches)?),
    }
}

/// The schedule `cfg` resolves to for `inst`; exposed so callers can
/// validate before running.
pub fn schedule_for(cfg: &ExperimentConfig, inst: &LassoInstance) -> Result<StepSchedule, BenchError> {
    let step = cfg.solver.dual_step();
    Ok(match cfg.solver {
        SolverKind::Pdsds => cfg.schedule.build(step, inst.least_squares()?.lipschitz(), 1.0),
        SolverKind::Admmds => cfg.schedule.build(step, inst.least_squares()?.lipschitz(), 1.0),
        SolverKind::Minibatch | SolverKind::Smpdsds => {
            cfg.schedule.build(step, split_batches(inst, cfg.batches, cfg.split)?.lipschitz(), 1.0)
        }
        SolverKind::Dist | SolverKind::Daspdsds => {
            let g = agent_graph(cfg)?;
            let p = DistributedProblem::new(g.clone(), batch_terms(inst, g.node_count(), cfg.split)?)?;
            cfg.schedule.build(step, p.lipschitz(), 1.0)
        }
    })
}

fn solve(cfg: &ExperimentConfig, inst: &LassoInstance, eps: f64, seed: u64) -> Result<Solved, BenchError> {
    let mut opts = SolveOptions::new(StopRule::new(eps, cfg.max_iters));
    opts.record_every = cfg.trace_every;
    opts.objective = cfg.trace_every > 0;
    opts.history_every = cfg.trace_every;
    let horizon = cfg.max_iters;
    let s = schedule_for(cfg, inst)?;
    let out = match cfg.solver {
        SolverKind::Pdsds => {
            let p = lasso_composite(inst)?;
            let r = Pdsds::new(&p, s, horizon)?.solve(PrimalDualState::zeros(&p), &opts)?;
            solved(r, |z| z.x.clone(), |z| z.k, 0.0)
        }
        SolverKind::Admmds => {
            let p = lasso_composite(inst)?;
            let r = AdmmDs::new(&p, s, horizon)?.solve(AdmmState::zeros(&p), &opts)?;
            solved(r, |z| z.x.clone(), |z| z.k, 0.0)
        }
        SolverKind::Minibatch => {
            let bp = split_batches(inst, cfg.batches, cfg.split)?;
            let r = solve_minibatch(&bp, &s, BatchState::zeros(&bp), &opts)?;
            let spread = r.state.spread();
            solved(r, |z| z.x_bar().clone(), |z| z.k(), spread)
        }
        SolverKind::Smpdsds => {
            let bp = split_batches(inst, cfg.batches, cfg.split)?;
            let sel = BlockSelector::uniform_single(cfg.batches)?;
            let opts = opts.with_window(cfg.window.unwrap_or(cfg.batches));
            let r = solve_smpdsds(&bp, &s, BatchState::zeros(&bp), &sel, seed, &opts)?;
            let spread = r.state.spread();
            solved(r, |z| z.x_bar().clone(), |z| z.k(), spread)
        }
        SolverKind::Dist | SolverKind::Daspdsds => {
            let g = agent_graph(cfg)?;
            let nodes = g.node_count();
            let p = DistributedProblem::new(g, batch_terms(inst, nodes, cfg.split)?)?.with_scaling(cfg.dual_scaling);
            let r = if cfg.solver == SolverKind::Dist {
                solve_distributed(&p, &s, DistState::zeros(&p), &opts)?
            } else {
                let sched = ActivationSchedule::uniform_single(nodes)?;
                let opts = opts.with_window(cfg.window.unwrap_or(nodes));
                solve_daspdsds(&p, &s, DistState::zeros(&p), &sched, seed, &opts)?
            };
            let spread = consensus_spread(&r.state);
            solved(r, |z| z.x_mean(), |z| z.k(), spread)
        }
    };
    Ok(out)
}

/// Runs the solver on `inst` once.
pub fn run_one(cfg: &ExperimentConfig, inst: &LassoInstance, eps: f64, seed: u64) -> Result<RunOutput, BenchError> {
    let start = Instant::now();
    let out = solve(cfg, inst, eps, seed)?;
    let seconds = if cfg.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let report = RunReport {
        solver: cfg.solver,
        n: inst.n(),
        batches: cfg.effective_batches(),
        eps,
        seed,
        err: inst.err(&out.x),
        fval: inst.fval(&out.x),
        k: out.iterations,
        seconds,
        lambda: inst.lambda,
        converged: out.converged,
        objective: inst.objective(&out.x),
        spread: out.spread,
    };
    Ok(RunOutput {
        curve: out.curve.iter().map(|(k, x)| (*k, inst.fval(x))).collect(),
        report,
        x: out.x,
        records: out.records,
    })
}

/// Every `(seed, eps)` pair, in that order, run in parallel. The instance
/// for each seed is generated once.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunOutput>, BenchError> {
    cfg.validate()?;
    let instances: Vec<LassoInstance> = cfg
        .seeds
        .par_iter()
        .map(|&seed| gen_lasso(cfg.n, cfg.lambda_factor, seed))
        .collect::<Result<_, _>>()?;
    // fail fast on an invalid schedule before any long run starts
    for inst in &instances {
        let s = schedule_for(cfg, inst)?;
        let consts = constants_for(cfg, inst)?;
        pdsds_core::schedule::validate(&consts, &s, cfg.max_iters).into_result()?;
    }
    let jobs: Vec<(usize, f64)> = (0..instances.len())
        .flat_map(|i| cfg.eps.iter().map(move |&e| (i, e)))
        .collect();
    jobs.par_iter()
        .map(|&(i, eps)| run_one(cfg, &instances[i], eps, instances[i].seed))
        .collect()
}

fn constants_for(cfg: &ExperimentConfig, inst: &LassoInstance) -> Result<pdsds_core::schedule::ScheduleConstants, BenchError> {
    let lipschitz = match cfg.solver {
        SolverKind::Pdsds | SolverKind::Admmds => inst.least_squares()?.lipschitz(),
        SolverKind::Minibatch | SolverKind::Smpdsds => split_batches(inst, cfg.batches, cfg.split)?.lipschitz(),
        SolverKind::Dist | SolverKind::Daspdsds => {
            let g = agent_graph(cfg)?;
            let nodes = g.node_count();
            DistributedProblem::new(g, batch_terms(inst, nodes, cfg.split)?)?.lipschitz()
        }
    };
    Ok(pdsds_core::schedule::ScheduleConstants { lipschitz, norm_d: 1.0 })
}
