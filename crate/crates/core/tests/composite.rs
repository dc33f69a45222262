mod common;

use common::{median, rel, Lasso};
use pdsds_core::composite::{solve_minibatch, solve_smpdsds, BatchProblem, BatchState};
use pdsds_core::engine::BlockSelector;
use pdsds_core::schedule::StepSchedule;
use pdsds_core::solvers::SolveOptions;
use pdsds_core::trace::StopRule;

fn schedule(bp: &BatchProblem) -> StepSchedule {
    let l = bp.lipschitz();
    StepSchedule::admm_constant(1.0 / l, 1.0 / (0.4 * l))
}

#[test]
fn two_batch_lasso_reaches_oracle_objective() {
    let inst = Lasso::random(40, 80, 21);
    let (_, f_star) = inst.oracle();
    let bp = BatchProblem::new(inst.batches(2)).unwrap();
    let out = solve_minibatch(
        &bp,
        &schedule(&bp),
        BatchState::zeros(&bp),
        &SolveOptions::new(StopRule::new(1e-12, 200_000)),
    )
    .unwrap();
    assert!(out.converged);
    let f = inst.objective(out.state.x_bar());
    assert!(rel(f, f_star) < 1e-6, "{f} vs {f_star}");
    assert!((bp.objective(out.state.x_bar().view()) - f).abs() < 1e-9 * f);
    assert!(out.state.spread() < 1e-8);
}

#[test]
fn smpdsds_agrees_with_minibatch_across_seeds() {
    let inst = Lasso::random(40, 80, 5);
    let bp = BatchProblem::new(inst.batches(4)).unwrap();
    let s = schedule(&bp);
    let det = solve_minibatch(&bp, &s, BatchState::zeros(&bp), &SolveOptions::new(StopRule::new(1e-12, 400_000))).unwrap();
    let f_det = bp.objective(det.state.x_bar().view());
    let sel = BlockSelector::uniform_single(4).unwrap();
    let finals: Vec<f64> = (0..5)
        .map(|seed| {
            let out = solve_smpdsds(&bp, &s, BatchState::zeros(&bp), &sel, seed, &SolveOptions::new(StopRule::new(1e-12, 1_000_000)).with_window(4))
                .unwrap();
            assert!(out.converged, "seed {seed} hit the cap");
            bp.objective(out.state.x_bar().view())
        })
        .collect();
    assert!(rel(median(finals), f_det) < 1e-4);
}
