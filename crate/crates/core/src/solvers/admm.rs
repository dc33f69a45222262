use ndarray::{Array1, Zip};

use super::{drive, validated, CompositeProblem, SolveOptions, SolveReport};
use crate::error::{Error, Result};
use crate::schedule::{DualStep, ScheduleConstants, StepSchedule};
use crate::trace::TraceRecord;

/// ADMMDS⁺ iterate. `z` and `u` are the auxiliary splitting variables in the
/// range of `D`; only `x` and `y` carry state between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    pub z: Array1<f64>,
    pub u: Array1<f64>,
    pub k: usize,
}

impl AdmmState {
    pub fn new(x: Array1<f64>, y: Array1<f64>) -> Self {
        let m = y.len();
        Self {
            x,
            y,
            z: Array1::zeros(m),
            u: Array1::zeros(m),
            k: 0,
        }
    }

    pub fn zeros(p: &CompositeProblem) -> Self {
        Self::new(Array1::zeros(p.dim()), Array1::zeros(p.dual_dim()))
    }

    fn check(&self, p: &CompositeProblem) -> Result<()> {
        if self.x.len() != p.dim() {
            return Err(Error::dimension("primal iterate", p.dim(), self.x.len()));
        }
        if self.y.len() != p.dual_dim() {
            return Err(Error::dimension("dual iterate", p.dual_dim(), self.y.len()));
        }
        Ok(())
    }
}

/// `D*D` as a positive diagonal, checked against what `g` can handle.
fn gram(p: &CompositeProblem) -> Result<Array1<f64>> {
    let d = p
        .d
        .gram_diagonal()
        .ok_or_else(|| Error::Unsupported("ADMMDS+ needs D*D diagonal".into()))?;
    if d.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Unsupported("D is not injective".into()));
    }
    let uniform = d.iter().all(|&v| v == d[0]);
    if !uniform && !p.g.is_separable() {
        return Err(Error::Unsupported(
            "a non-uniform D*D needs a separable g".into(),
        ));
    }
    Ok(d)
}

fn unchecked_step(p: &CompositeProblem, gram: &Array1<f64>, tau: f64, mu: f64, st: &AdmmState) -> Result<AdmmState> {
    let dx = p.d.apply(st.x.view());
    let arg = Zip::from(&dx).and(&st.y).map_collect(|&a, &y| a + mu * y);
    let z = p.h.prox(arg.view(), mu);
    let y = Zip::from(&st.y)
        .and(&dx)
        .and(&z)
        .map_collect(|&y, &a, &z| y + (a - z) / mu);
    let theta = tau / mu;
    let u = Zip::from(&dx).and(&z).map_collect(|&a, &z| (1.0 - theta) * a + theta * z);
    // x⁺ = argmin_w g(w) + ⟨∇f(x), w⟩ + ‖Dw − (u⁺ − τy⁺)‖² / (2τ)
    let r = Zip::from(&u).and(&y).map_collect(|&u, &y| u - tau * y);
    let grad = p.f.gradient(st.x.view());
    let v = p.d.adjoint(r.view()) - &(tau * &grad);
    let scaled = Zip::from(&v).and(gram).map_collect(|&v, &c| v / c);
    let gammas = gram.mapv(|c| tau / c);
    let x = p.g.prox_diag(scaled.view(), gammas.view())?;
    Ok(AdmmState { x, y, z, u, k: st.k + 1 })
}

/// One ADMMDS⁺ iteration; the schedule is checked at `st.k` first.
pub fn admmds_step(p: &CompositeProblem, s: &StepSchedule, st: &AdmmState) -> Result<AdmmState> {
    st.check(p)?;
    let d = gram(p)?;
    s.check_at(&p.admm_constants()?, st.k)?;
    unchecked_step(p, &d, s.tau(st.k), s.dual(st.k), st)
}

/// ADMMDS⁺ with the problem structure and schedule checked at construction.
#[derive(Debug)]
pub struct AdmmDs<'a> {
    problem: &'a CompositeProblem,
    schedule: StepSchedule,
    consts: ScheduleConstants,
    gram: Array1<f64>,
}

impl<'a> AdmmDs<'a> {
    pub fn new(problem: &'a CompositeProblem, schedule: StepSchedule, horizon: usize) -> Result<Self> {
        if schedule.dual_step != DualStep::Mu {
            return Err(Error::invalid("ADMMDS+ needs a mu dual step"));
        }
        let gram = gram(problem)?;
        let consts = problem.admm_constants()?;
        validated(&consts, &schedule, horizon)?;
        Ok(Self {
            problem,
            schedule,
            consts,
            gram,
        })
    }

    pub fn step(&self, st: &AdmmState) -> Result<AdmmState> {
        st.check(self.problem)?;
        self.schedule.check_at(&self.consts, st.k)?;
        unchecked_step(
            self.problem,
            &self.gram,
            self.schedule.tau(st.k),
            self.schedule.dual(st.k),
            st,
        )
    }

    pub fn solve(&self, st0: AdmmState, opts: &SolveOptions) -> Result<SolveReport<AdmmState>> {
        st0.check(self.problem)?;
        let p = self.problem;
        drive(
            st0,
            opts,
            |st| Ok((self.step(st)?, TraceRecord::at(st.k))),
            |st| st.x.view(),
            |st| p.objective(st.x.view()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{DenseMap, Diagonal, Identity};
    use crate::prox::{soft_threshold, L1Norm, Zero};
    use crate::rng;
    use crate::smooth::{LeastSquares, SmoothFn};
    use crate::trace::StopRule;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn lasso_data(seed: u64, m: usize, n: usize) -> (Array2<f64>, Array1<f64>) {
        let mut r = rng::seeded(seed);
        let a = Array2::from_shape_fn((m, n), |_| r.random_range(-1.0..1.0));
        let b = Array1::from_shape_fn(m, |_| r.random_range(-1.0..1.0));
        (a, b)
    }

    #[test]
    fn reduces_to_proximal_gradient_without_h() {
        let (a, b) = lasso_data(2, 6, 10);
        let f = LeastSquares::new(a, b).unwrap();
        let l = f.lipschitz();
        let tau = 1.0 / l;
        let p = CompositeProblem::new(
            Box::new(f.clone()),
            Box::new(L1Norm::new(0.1)),
            Box::new(Zero),
            Box::new(Identity::new(10)),
        )
        .unwrap();
        let s = StepSchedule::admm_constant(tau, 1.0 / (0.4 * l));
        let mut st = AdmmState::zeros(&p);
        let mut x = Array1::<f64>::zeros(10);
        for _ in 0..60 {
            st = admmds_step(&p, &s, &st).unwrap();
            x = soft_threshold((&x - &(f.gradient(x.view()) * tau)).view(), 0.1 * tau);
            for (u, v) in st.x.iter().zip(x.iter()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaled_prox_matches_weighted_soft_threshold() {
        // min ½‖x − c‖² + ‖x‖₁ with D = diag(1, 2) and h = 0: still the plain
        // minimizer soft(c, 1), reached through coordinate-wise prox scales.
        let c = array![3.0, -0.5];
        let f = crate::smooth::SquaredDistanceSmooth::new(c.clone(), 1.0);
        let p = CompositeProblem::new(
            Box::new(f),
            Box::new(L1Norm::new(1.0)),
            Box::new(Zero),
            Box::new(Diagonal::new(array![1.0, 2.0])),
        )
        .unwrap();
        let l = p.injective_lipschitz().unwrap();
        assert_eq!(l, 1.0);
        let solver = AdmmDs::new(&p, StepSchedule::admm_constant(1.0, 2.5), 10).unwrap();
        let out = solver
            .solve(AdmmState::zeros(&p), &SolveOptions::new(StopRule::new(1e-14, 5000)))
            .unwrap();
        assert!((out.state.x[0] - 2.0).abs() < 1e-10);
        assert!(out.state.x[1].abs() < 1e-10);
    }

    #[test]
    fn two_block_weighted_lasso_matches_proximal_gradient() {
        // D = diag(1,…,1, 2,…,2) splits R¹⁰ into two blocks; the oracle solves
        // min ½‖Ax − b‖² + λ Σ d_i |x_i| directly.
        let (a, b) = lasso_data(9, 7, 10);
        let lam = 0.2;
        let diag = Array1::from_shape_fn(10, |i| if i < 5 { 1.0 } else { 2.0 });
        let f = LeastSquares::new(a, b).unwrap();
        let beta = f.lipschitz();

        let mut oracle = Array1::<f64>::zeros(10);
        let t = 1.0 / beta;
        for _ in 0..200_000 {
            let step = &oracle - &(f.gradient(oracle.view()) * t);
            oracle = Zip::from(&step)
                .and(&diag)
                .map_collect(|&v, &d| v.signum() * (v.abs() - t * lam * d).max(0.0));
        }

        let p = CompositeProblem::new(
            Box::new(f),
            Box::new(Zero),
            Box::new(L1Norm::new(lam)),
            Box::new(Diagonal::new(diag)),
        )
        .unwrap();
        let l = p.injective_lipschitz().unwrap();
        assert!((l - beta).abs() < 1e-12);
        let s = StepSchedule::admm_dynamic(1.0 / l, 1.0 / (0.4 * l), 0.5).with_tau_cap(1.0 / l);
        let solver = AdmmDs::new(&p, s, 100).unwrap();
        let out = solver
            .solve(AdmmState::zeros(&p), &SolveOptions::new(StopRule::new(1e-15, 200_000)))
            .unwrap();
        for (u, v) in out.state.x.iter().zip(oracle.iter()) {
            assert!((u - v).abs() < 1e-6, "{u} vs {v}");
        }
    }

    #[test]
    fn structural_requirements_are_enforced() {
        let dense = CompositeProblem::new(
            Box::new(crate::smooth::ZeroSmooth { dim: 2 }),
            Box::new(Zero),
            Box::new(Zero),
            Box::new(DenseMap::new(array![[1.0, 1.0], [0.0, 1.0]])),
        )
        .unwrap();
        assert!(matches!(
            AdmmDs::new(&dense, StepSchedule::admm_constant(1.0, 2.0), 1),
            Err(Error::Unsupported(_))
        ));
        let consensus = CompositeProblem::new(
            Box::new(crate::smooth::ZeroSmooth { dim: 2 }),
            Box::new(crate::prox::ConsensusIndicator::new(2, 1)),
            Box::new(Zero),
            Box::new(Diagonal::new(array![1.0, 3.0])),
        )
        .unwrap();
        assert!(matches!(
            AdmmDs::new(&consensus, StepSchedule::admm_constant(1.0, 2.0), 1),
            Err(Error::Unsupported(_))
        ));
        let ok = CompositeProblem::new(
            Box::new(crate::smooth::SquaredDistanceSmooth::new(array![0.0], 1.0)),
            Box::new(Zero),
            Box::new(Zero),
            Box::new(Identity::new(1)),
        )
        .unwrap();
        // 1/τ − 1/μ = 0.5 is not above L/2 = 0.5
        assert!(matches!(
            AdmmDs::new(&ok, StepSchedule::admm_constant(1.0, 2.0), 1),
            Err(Error::Schedule { .. })
        ));
    }

    #[test]
    fn consensus_constraint_with_uniform_gram() {
        // min ½(x₁ − 1)² + ½(x₂ − 3)² subject to x₁ = x₂: both copies go to 2.
        let p = CompositeProblem::new(
            Box::new(crate::smooth::SquaredDistanceSmooth::new(array![1.0, 3.0], 1.0)),
            Box::new(crate::prox::ConsensusIndicator::new(2, 1)),
            Box::new(L1Norm::new(0.0)),
            Box::new(Identity::new(2)),
        )
        .unwrap();
        let solver = AdmmDs::new(&p, StepSchedule::admm_constant(1.0, 4.0), 1).unwrap();
        let out = solver
            .solve(AdmmState::zeros(&p), &SolveOptions::new(StopRule::new(1e-14, 10_000)))
            .unwrap();
        assert!((out.state.x[0] - 2.0).abs() < 1e-10);
        assert!((out.state.x[1] - 2.0).abs() < 1e-10);
    }
}
