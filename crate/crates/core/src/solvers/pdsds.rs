use ndarray::{concatenate, s, Array1, ArrayView1, Axis, Zip};

use super::{drive, validated, CompositeProblem, PrimalDualState, SolveOptions, SolveReport};
use crate::engine::{AveragedOperator, BlockLayout};
use crate::error::Result;
use crate::prox::conjugate_unchecked;
use crate::schedule::{delta, DualStep, ScheduleConstants, StepSchedule};
use crate::trace::TraceRecord;

/// The unrelaxed primal-dual point `(x̃, ỹ)`:
///
/// ```text
/// ỹ = prox_{σh*}(y + σDx)
/// x̃ = prox_{τg}(x − τ∇f(x) − τD*(2ỹ − y))
/// ```
fn forward_backward(
    p: &CompositeProblem,
    tau: f64,
    sigma: f64,
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let dx = p.d.apply(x);
    let y_arg = Zip::from(&y).and(&dx).map_collect(|&a, &b| a + sigma * b);
    let y_tilde = conjugate_unchecked(p.h.as_ref(), y_arg.view(), sigma);
    let reflected = Zip::from(&y_tilde).and(&y).map_collect(|&a, &b| 2.0 * a - b);
    let dual_term = p.d.adjoint(reflected.view());
    let grad = p.f.gradient(x);
    let x_arg = Zip::from(&x)
        .and(&grad)
        .and(&dual_term)
        .map_collect(|&v, &g, &d| v - tau * g - tau * d);
    let x_tilde = p.g.prox(x_arg.view(), tau);
    (x_tilde, y_tilde)
}

fn relax(rho: f64, tilde: Array1<f64>, prev: ArrayView1<f64>) -> Array1<f64> {
    if rho == 1.0 {
        return tilde;
    }
    Zip::from(&tilde)
        .and(&prev)
        .map_collect(|&t, &v| rho * t + (1.0 - rho) * v)
}

/// One PDSDS iteration; the schedule is checked at `z.k` first.
pub fn pdsds_step(p: &CompositeProblem, s: &StepSchedule, z: &PrimalDualState) -> Result<PrimalDualState> {
    z.check(p)?;
    let delta = s.check_at(&p.pdsds_constants(), z.k)?;
    Ok(unchecked_step(p, s, z, delta))
}

fn unchecked_step(p: &CompositeProblem, s: &StepSchedule, z: &PrimalDualState, delta: f64) -> PrimalDualState {
    let k = z.k;
    let rho = s.relaxation_at(k, delta);
    let (x_t, y_t) = forward_backward(p, s.tau(k), s.dual(k), z.x.view(), z.y.view());
    PrimalDualState {
        x: relax(rho, x_t, z.x.view()),
        y: relax(rho, y_t, z.y.view()),
        k: k + 1,
    }
}

/// PDSDS with its schedule validated over the whole run horizon up front.
#[derive(Debug)]
pub struct Pdsds<'a> {
    problem: &'a CompositeProblem,
    schedule: StepSchedule,
    consts: ScheduleConstants,
    deltas: Vec<f64>,
}

impl<'a> Pdsds<'a> {
    pub fn new(problem: &'a CompositeProblem, schedule: StepSchedule, horizon: usize) -> Result<Self> {
        if schedule.dual_step != DualStep::Sigma {
            return Err(crate::error::Error::invalid("PDSDS needs a sigma dual step"));
        }
        let consts = problem.pdsds_constants();
        let report = validated(&consts, &schedule, horizon)?;
        let deltas = report.deltas.iter().map(|d| d.unwrap_or(f64::NAN)).collect();
        Ok(Self {
            problem,
            schedule,
            consts,
            deltas,
        })
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    fn delta_at(&self, k: usize) -> Result<f64> {
        match self.deltas.get(k) {
            Some(d) => Ok(*d),
            None => self.schedule.check_at(&self.consts, k),
        }
    }

    pub fn step(&self, z: &PrimalDualState) -> Result<PrimalDualState> {
        z.check(self.problem)?;
        let d = self.delta_at(z.k)?;
        Ok(unchecked_step(self.problem, &self.schedule, z, d))
    }

    pub fn solve(&self, z0: PrimalDualState, opts: &SolveOptions) -> Result<SolveReport<PrimalDualState>> {
        z0.check(self.problem)?;
        let p = self.problem;
        drive(
            z0,
            opts,
            |z| Ok((self.step(z)?, TraceRecord::at(z.k))),
            |z| z.x.view(),
            |z| p.objective(z.x.view()),
        )
    }
}

/// The PDSDS map `T^k : (x, y) ↦ (x̃, ỹ)` on the stacked vector `[x; y]`,
/// averaged with constant `1/δ_k` in the `P_k` metric.
#[derive(Debug)]
pub struct PdsdsOperator<'a> {
    problem: &'a CompositeProblem,
    schedule: StepSchedule,
    layout: BlockLayout,
}

impl<'a> PdsdsOperator<'a> {
    pub fn new(problem: &'a CompositeProblem, schedule: StepSchedule) -> Result<Self> {
        let n = problem.dim();
        let m = problem.dual_dim();
        let layout = BlockLayout::new(vec![0..n, n..n + m])?;
        Ok(Self {
            problem,
            schedule,
            layout,
        })
    }

    pub fn stack(z: &PrimalDualState) -> Array1<f64> {
        concatenate(Axis(0), &[z.x.view(), z.y.view()]).expect("1-d concatenation")
    }

    pub fn unstack(&self, z: ArrayView1<f64>, k: usize) -> PrimalDualState {
        let n = self.problem.dim();
        PrimalDualState {
            x: z.slice(s![..n]).to_owned(),
            y: z.slice(s![n..]).to_owned(),
            k,
        }
    }
}

impl AveragedOperator for PdsdsOperator<'_> {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn averagedness(&self, k: usize) -> f64 {
        let c = self.problem.pdsds_constants();
        1.0 / delta(&c, DualStep::Sigma, self.schedule.tau(k), self.schedule.dual(k))
    }

    fn apply(&self, k: usize, z: ArrayView1<f64>) -> Array1<f64> {
        let n = self.problem.dim();
        let (x_t, y_t) = forward_backward(
            self.problem,
            self.schedule.tau(k),
            self.schedule.dual(k),
            z.slice(s![..n]),
            z.slice(s![n..]),
        );
        concatenate(Axis(0), &[x_t.view(), y_t.view()]).expect("1-d concatenation")
    }
}
