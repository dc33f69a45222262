//! Solvers for `min Σ_n f_n(x) + g_n(x)` on the product space with a
//! consensus constraint: the deterministic minibatch ADMMDS⁺ and its
//! randomized single-batch variant SMPDSDS.

use ndarray::{Array1, ArrayView1, Zip};
use rand::Rng;

use crate::engine::BlockSelector;
use crate::error::{Error, Result};
use crate::prox::ProxFn;
use crate::rng;
use crate::schedule::{DualStep, ScheduleConstants, StepSchedule};
use crate::smooth::SmoothFn;
use crate::solvers::{drive, validated, SolveOptions, SolveReport};
use crate::trace::TraceRecord;

/// Steps between full recomputations of the cached means.
pub const MEAN_REFRESH_PERIOD: usize = 1000;

/// Tolerance for `ȳ⁰ = 0`, relative to the largest dual component.
const ZERO_MEAN_TOL: f64 = 1e-12;

#[derive(Debug)]
pub struct Batch {
    pub f: Box<dyn SmoothFn>,
    pub g: Box<dyn ProxFn>,
}

impl Batch {
    pub fn new(f: Box<dyn SmoothFn>, g: Box<dyn ProxFn>) -> Self {
        Self { f, g }
    }
}

#[derive(Debug)]
pub struct BatchProblem {
    batches: Vec<Batch>,
    dim: usize,
    lipschitz: f64,
}

impl BatchProblem {
    /// The shared Lipschitz constant is `max_n` of the per-batch constants.
    pub fn new(batches: Vec<Batch>) -> Result<Self> {
        let dim = batches
            .first()
            .ok_or_else(|| Error::invalid("a batch problem needs at least one batch"))?
            .f
            .dim();
        for b in &batches {
            if b.f.dim() != dim {
                return Err(Error::dimension("batch smooth term", dim, b.f.dim()));
            }
        }
        let lipschitz = batches.iter().map(|b| b.f.lipschitz()).fold(0.0, f64::max);
        Ok(Self {
            batches,
            dim,
            lipschitz,
        })
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn batches(&self) -> &[Batch] {
        &self.batches
    }

    pub fn objective(&self, x: ArrayView1<f64>) -> f64 {
        self.batches.iter().map(|b| b.f.value(x) + b.g.value(x)).sum()
    }

    pub fn constants(&self) -> ScheduleConstants {
        ScheduleConstants {
            lipschitz: self.lipschitz,
            norm_d: 1.0,
        }
    }

    /// Samples the standing assumptions: central finite differences against
    /// each gradient and firm nonexpansiveness of each prox.
    pub fn check_assumptions(&self, samples: usize, seed: u64) -> Result<()> {
        let mut r = rng::seeded(seed);
        let point = |r: &mut rng::SimRng| Array1::from_shape_fn(self.dim, |_| r.random_range(-1.0..1.0));
        for (n, b) in self.batches.iter().enumerate() {
            for _ in 0..samples {
                let x = point(&mut r);
                let g = b.f.gradient(x.view());
                let h = 1e-6;
                let mut e = Array1::zeros(self.dim);
                for i in 0..self.dim {
                    e[i] = h;
                    let fd = (b.f.value((&x + &e).view()) - b.f.value((&x - &e).view())) / (2.0 * h);
                    e[i] = 0.0;
                    if (fd - g[i]).abs() > 1e-4 * (1.0 + g[i].abs()) {
                        return Err(Error::Domain(format!("gradient of batch {n} fails finite differences")));
                    }
                }
                let y = point(&mut r);
                let (px, py) = (b.g.prox(x.view(), 1.0), b.g.prox(y.view(), 1.0));
                let dp = &px - &py;
                if dp.dot(&dp) > dp.dot(&(&x - &y)) + 1e-9 {
                    return Err(Error::Domain(format!("prox of batch {n} is not firmly nonexpansive")));
                }
            }
        }
        Ok(())
    }
}

/// Per-batch primal and dual copies with cached means.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchState {
    x: Vec<Array1<f64>>,
    y: Vec<Array1<f64>>,
    x_bar: Array1<f64>,
    y_bar: Array1<f64>,
    k: usize,
}

fn mean(v: &[Array1<f64>]) -> Array1<f64> {
    let mut m = Array1::zeros(v[0].len());
    for a in v {
        m += a;
    }
    m / v.len() as f64
}

impl BatchState {
    pub fn new(x: Vec<Array1<f64>>, y: Vec<Array1<f64>>) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::dimension("batch copies", x.len(), y.len()));
        }
        let dim = x[0].len();
        for v in x.iter().chain(y.iter()) {
            if v.len() != dim {
                return Err(Error::dimension("batch copy", dim, v.len()));
            }
        }
        Ok(Self {
            x_bar: mean(&x),
            y_bar: mean(&y),
            x,
            y,
            k: 0,
        })
    }

    /// Every copy starts at `x0` with zero duals.
    pub fn replicated(bp: &BatchProblem, x0: ArrayView1<f64>) -> Result<Self> {
        let n = bp.len();
        Self::new(vec![x0.to_owned(); n], vec![Array1::zeros(x0.len()); n])
    }

    pub fn zeros(bp: &BatchProblem) -> Self {
        Self::replicated(bp, Array1::zeros(bp.dim()).view()).expect("consistent dimensions")
    }

    pub fn x(&self) -> &[Array1<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[Array1<f64>] {
        &self.y
    }

    pub fn x_bar(&self) -> &Array1<f64> {
        &self.x_bar
    }

    pub fn y_bar(&self) -> &Array1<f64> {
        &self.y_bar
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `max_n ‖x_n − x̄‖`.
    pub fn spread(&self) -> f64 {
        self.x
            .iter()
            .map(|v| (v - &self.x_bar).dot(&(v - &self.x_bar)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the cached means from freshly computed ones.
    pub fn mean_drift(&self) -> f64 {
        let dx = (&mean(&self.x) - &self.x_bar).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        let dy = (&mean(&self.y) - &self.y_bar).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
        dx.max(dy)
    }

    fn refresh(&mut self) {
        self.x_bar = mean(&self.x);
        self.y_bar = mean(&self.y);
    }

    fn check(&self, bp: &BatchProblem) -> Result<()> {
        if self.x.len() != bp.len() {
            return Err(Error::dimension("batch count", bp.len(), self.x.len()));
        }
        if self.x_bar.len() != bp.dim() {
            return Err(Error::dimension("batch iterate", bp.dim(), self.x_bar.len()));
        }
        Ok(())
    }

    fn check_zero_dual_mean(&self) -> Result<()> {
        let scale = self.y.iter().flat_map(|v| v.iter()).fold(1.0f64, |a, b| a.max(b.abs()));
        if self.y_bar.iter().any(|v| v.abs() > ZERO_MEAN_TOL * scale) {
            return Err(Error::invalid("the minibatch solver needs initial duals with zero mean"));
        }
        Ok(())
    }
}

fn check_schedule(bp: &BatchProblem, s: &StepSchedule, k: usize) -> Result<(f64, f64)> {
    if s.dual_step != DualStep::Mu {
        return Err(Error::invalid("batch solvers need a mu dual step"));
    }
    s.check_at(&bp.constants(), k)?;
    Ok((s.tau(k), s.dual(k)))
}

/// Updates batch `n` from the current means; `y_shift` is `ȳ` for SMPDSDS
/// and zero for the deterministic variant.
fn batch_update(
    b: &Batch,
    tau: f64,
    mu: f64,
    x: &Array1<f64>,
    y: &Array1<f64>,
    x_bar: &Array1<f64>,
    y_shift: Option<&Array1<f64>>,
) -> (Array1<f64>, Array1<f64>) {
    let grad = b.f.gradient(x.view());
    let a = 1.0 - 2.0 * tau / mu;
    let c = 2.0 * tau / mu;
    let mut arg = Zip::from(x)
        .and(&grad)
        .and(x_bar)
        .and(y)
        .map_collect(|&x, &g, &xb, &y| a * x - tau * g + c * xb - tau * y);
    let mut y_new = Zip::from(y).and(x).and(x_bar).map_collect(|&y, &x, &xb| y + (x - xb) / mu);
    if let Some(yb) = y_shift {
        arg.scaled_add(2.0 * tau, yb);
        y_new -= yb;
    }
    (b.g.prox(arg.view(), tau), y_new)
}

/// One minibatch ADMMDS⁺ step, updating every batch.
pub fn minibatch_step(bp: &BatchProblem, s: &StepSchedule, st: &BatchState) -> Result<BatchState> {
    st.check(bp)?;
    if st.k == 0 {
        st.check_zero_dual_mean()?;
    }
    let (tau, mu) = check_schedule(bp, s, st.k)?;
    let (x, y): (Vec<_>, Vec<_>) = bp
        .batches
        .iter()
        .enumerate()
        .map(|(n, b)| batch_update(b, tau, mu, &st.x[n], &st.y[n], &st.x_bar, None))
        .unzip();
    let mut next = BatchState::new(x, y)?;
    next.k = st.k + 1;
    Ok(next)
}

/// One SMPDSDS step. Returns the new state and the batches updated.
pub fn smpdsds_step<R: Rng + ?Sized>(
    bp: &BatchProblem,
    s: &StepSchedule,
    st: &BatchState,
    selector: &BlockSelector,
    rng: &mut R,
) -> Result<(BatchState, Vec<usize>)> {
    st.check(bp)?;
    if selector.block_count() != bp.len() {
        return Err(Error::dimension("selector batch count", bp.len(), selector.block_count()));
    }
    let (tau, mu) = check_schedule(bp, s, st.k)?;
    let chosen = selector.sample(rng).to_vec();
    let mut next = st.clone();
    let inv_n = 1.0 / bp.len() as f64;
    for &n in &chosen {
        let (xn, yn) = batch_update(&bp.batches[n], tau, mu, &st.x[n], &st.y[n], &st.x_bar, Some(&st.y_bar));
        next.x_bar.scaled_add(inv_n, &(&xn - &st.x[n]));
        next.y_bar.scaled_add(inv_n, &(&yn - &st.y[n]));
        next.x[n] = xn;
        next.y[n] = yn;
    }
    next.k = st.k + 1;
    if next.k.is_multiple_of(MEAN_REFRESH_PERIOD) {
        next.refresh();
    }
    Ok((next, chosen))
}

fn validate_for(bp: &BatchProblem, s: &StepSchedule, opts: &SolveOptions) -> Result<()> {
    if s.dual_step != DualStep::Mu {
        return Err(Error::invalid("batch solvers need a mu dual step"));
    }
    validated(&bp.constants(), s, opts.stop.max_iters).map(|_| ())
}

/// Runs the minibatch solver; convergence is measured on `x̄`.
pub fn solve_minibatch(
    bp: &BatchProblem,
    s: &StepSchedule,
    st0: BatchState,
    opts: &SolveOptions,
) -> Result<SolveReport<BatchState>> {
    st0.check(bp)?;
    st0.check_zero_dual_mean()?;
    validate_for(bp, s, opts)?;
    drive(
        st0,
        opts,
        |st| {
            let next = minibatch_step(bp, s, st)?;
            let mut rec = TraceRecord::at(st.k);
            if opts.record_every > 0 {
                rec.spread = Some(next.spread());
            }
            Ok((next, rec))
        },
        |st| st.x_bar.view(),
        |st| bp.objective(st.x_bar.view()),
    )
}

/// Runs SMPDSDS with its own seeded random stream.
pub fn solve_smpdsds(
    bp: &BatchProblem,
    s: &StepSchedule,
    st0: BatchState,
    selector: &BlockSelector,
    seed: u64,
    opts: &SolveOptions,
) -> Result<SolveReport<BatchState>> {
    st0.check(bp)?;
    validate_for(bp, s, opts)?;
    let mut r = rng::seeded(seed);
    drive(
        st0,
        opts,
        |st| {
            let (next, chosen) = smpdsds_step(bp, s, st, selector, &mut r)?;
            let mut rec = TraceRecord::at(st.k);
            if opts.record_every > 0 {
                rec.batch_selected = Some(chosen);
                rec.seed = Some(seed);
            }
            Ok((next, rec))
        },
        |st| st.x_bar.view(),
        |st| bp.objective(st.x_bar.view()),
    )
}
