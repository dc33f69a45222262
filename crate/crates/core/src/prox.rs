//! Proximity operators.
//!
//! `prox_{γf}(x) = argmin_y f(y) + ‖x − y‖² / (2γ)`. Every operator here is an
//! exact closed form; there is no generic numeric prox solver.

use std::fmt;

use ndarray::{Array1, ArrayView1, Zip};

use crate::error::{Error, Result};

/// A closed proper convex function accessed through its proximity operator.
pub trait ProxFn: Send + Sync + fmt::Debug {
    /// Evaluates `prox_{γf}(x)` for `γ > 0`.
    fn prox(&self, x: ArrayView1<f64>, gamma: f64) -> Array1<f64>;

    /// Function value, `f64::INFINITY` outside the domain.
    fn value(&self, x: ArrayView1<f64>) -> f64;

    /// True when `f(x) = Σ_i f_i(x_i)` so that coordinates can be proxed with
    /// different scales.
    fn is_separable(&self) -> bool {
        false
    }

    /// Coordinate-wise scaled prox, `argmin_y f(y) + Σ_i (y_i − x_i)² / (2γ_i)`.
    ///
    /// Non-separable functions only support a uniform scale.
    fn prox_diag(&self, x: ArrayView1<f64>, gammas: ArrayView1<f64>) -> Result<Array1<f64>> {
        if gammas.len() != x.len() {
            return Err(Error::dimension("prox_diag", x.len(), gammas.len()));
        }
        match gammas.first() {
            None => Ok(Array1::zeros(0)),
            Some(&g0) if gammas.iter().all(|&g| g == g0) => Ok(self.prox(x, g0)),
            Some(_) => Err(Error::Unsupported(format!(
                "{self:?} is not separable; coordinate-wise prox scales are unavailable"
            ))),
        }
    }
}

/// `f ≡ 0`; its prox is the identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl ProxFn for Zero {
    fn prox(&self, x: ArrayView1<f64>, _gamma: f64) -> Array1<f64> {
        x.to_owned()
    }

    fn value(&self, _x: ArrayView1<f64>) -> f64 {
        0.0
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn prox_diag(&self, x: ArrayView1<f64>, gammas: ArrayView1<f64>) -> Result<Array1<f64>> {
        if gammas.len() != x.len() {
            return Err(Error::dimension("prox_diag", x.len(), gammas.len()));
        }
        Ok(x.to_owned())
    }
}

/// `f(x) = weight · ‖x‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub weight: f64,
}

impl L1Norm {
    pub fn new(weight: f64) -> Self {
        Self { weight }
    }
}

impl ProxFn for L1Norm {
    fn prox(&self, x: ArrayView1<f64>, gamma: f64) -> Array1<f64> {
        soft_threshold(x, gamma * self.weight)
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        self.weight * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn prox_diag(&self, x: ArrayView1<f64>, gammas: ArrayView1<f64>) -> Result<Array1<f64>> {
        if gammas.len() != x.len() {
            return Err(Error::dimension("prox_diag", x.len(), gammas.len()));
        }
        Ok(Zip::from(&x)
            .and(&gammas)
            .map_collect(|&v, &g| shrink(v, g * self.weight)))
    }
}

/// `f(x) = (weight / 2) · ‖x − center‖²`.
#[derive(Debug, Clone)]
pub struct SquaredDistance {
    pub center: Array1<f64>,
    pub weight: f64,
}

impl SquaredDistance {
    pub fn new(center: Array1<f64>, weight: f64) -> Self {
        Self { center, weight }
    }
}

impl ProxFn for SquaredDistance {
    fn prox(&self, x: ArrayView1<f64>, gamma: f64) -> Array1<f64> {
        let gw = gamma * self.weight;
        Zip::from(&x)
            .and(&self.center)
            .map_collect(|&v, &c| (v + gw * c) / (1.0 + gw))
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let sq: f64 = Zip::from(&x)
            .and(&self.center)
            .fold(0.0, |acc, &v, &c| acc + (v - c) * (v - c));
        0.5 * self.weight * sq
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn prox_diag(&self, x: ArrayView1<f64>, gammas: ArrayView1<f64>) -> Result<Array1<f64>> {
        if gammas.len() != x.len() {
            return Err(Error::dimension("prox_diag", x.len(), gammas.len()));
        }
        Ok(Zip::from(&x)
            .and(&self.center)
            .and(&gammas)
            .map_collect(|&v, &c, &g| {
                let gw = g * self.weight;
                (v + gw * c) / (1.0 + gw)
            }))
    }
}

/// Indicator of the box `[lower, upper]^d`.
#[derive(Debug, Clone, Copy)]
pub struct BoxIndicator {
    pub lower: f64,
    pub upper: f64,
}

impl ProxFn for BoxIndicator {
    fn prox(&self, x: ArrayView1<f64>, _gamma: f64) -> Array1<f64> {
        x.mapv(|v| v.clamp(self.lower, self.upper))
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        if x.iter().all(|&v| v >= self.lower && v <= self.upper) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn prox_diag(&self, x: ArrayView1<f64>, gammas: ArrayView1<f64>) -> Result<Array1<f64>> {
        if gammas.len() != x.len() {
            return Err(Error::dimension("prox_diag", x.len(), gammas.len()));
        }
        Ok(self.prox(x, 1.0))
    }
}

/// Indicator of the consensus set on groups of copies.
///
/// The vector is laid out as consecutive groups of `copies` sub-vectors of
/// length `dim`; the set requires the copies inside each group to agree. One
/// group of `N` copies is the set `C = {x₁ = … = x_N}`; `|E|` groups of two
/// copies is the edge-wise set used on a graph.
#[derive(Debug, Clone, Copy)]
pub struct ConsensusIndicator {
    pub copies: usize,
    pub dim: usize,
}

impl ConsensusIndicator {
    const MEMBERSHIP_TOL: f64 = 1e-9;

    pub fn new(copies: usize, dim: usize) -> Self {
        Self { copies, dim }
    }

    fn group_len(&self) -> usize {
        self.copies * self.dim
    }
}

impl ProxFn for ConsensusIndicator {
    fn prox(&self, x: ArrayView1<f64>, _gamma: f64) -> Array1<f64> {
        let glen = self.group_len();
        assert!(
            glen > 0 && x.len().is_multiple_of(glen),
            "consensus layout does not divide the vector length"
        );
        let mut out = Array1::zeros(x.len());
        let inv = 1.0 / self.copies as f64;
        for g in 0..x.len() / glen {
            let base = g * glen;
            for i in 0..self.dim {
                let mean = (0..self.copies)
                    .map(|c| x[base + c * self.dim + i])
                    .sum::<f64>()
                    * inv;
                for c in 0..self.copies {
                    out[base + c * self.dim + i] = mean;
                }
            }
        }
        out
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let p = self.prox(x, 1.0);
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let off = Zip::from(&x)
            .and(&p)
            .fold(0.0f64, |m, &a, &b| m.max((a - b).abs()));
        if off <= Self::MEMBERSHIP_TOL * scale {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[inline]
fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Component-wise `sign(x_i) · max(|x_i| − t, 0)` without argument checks.
pub fn soft_threshold(x: ArrayView1<f64>, t: f64) -> Array1<f64> {
    x.mapv(|v| shrink(v, t))
}

/// Proximity operator of `t‖·‖₁` (soft thresholding).
pub fn prox_l1(x: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("threshold must be positive, got {t}")));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "component {i} is not finite ({})",
            x[i]
        )));
    }
    Ok(soft_threshold(x, t))
}

/// Projects an N-tuple onto the consensus set: every output is the mean.
pub fn project_consensus(xs: &[Array1<f64>]) -> Result<Vec<Array1<f64>>> {
    let first = xs
        .first()
        .ok_or_else(|| Error::invalid("consensus projection needs at least one component"))?;
    let dim = first.len();
    if let Some(bad) = xs.iter().find(|x| x.len() != dim) {
        return Err(Error::dimension("project_consensus", dim, bad.len()));
    }
    let mean = mean_of(xs);
    Ok(vec![mean; xs.len()])
}

/// Arithmetic mean of equally sized vectors.
pub(crate) fn mean_of(xs: &[Array1<f64>]) -> Array1<f64> {
    let mut mean = Array1::zeros(xs[0].len());
    for x in xs {
        mean += x;
    }
    mean / xs.len() as f64
}

/// `prox_{σh*}(u)` through the Moreau decomposition `u − σ·prox_{h/σ}(u/σ)`.
pub fn prox_conjugate(h: &dyn ProxFn, u: ArrayView1<f64>, sigma: f64) -> Result<Array1<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "conjugate prox scale must be positive, got {sigma}"
        )));
    }
    Ok(conjugate_unchecked(h, u, sigma))
}

pub(crate) fn conjugate_unchecked(h: &dyn ProxFn, u: ArrayView1<f64>, sigma: f64) -> Array1<f64> {
    let scaled = u.mapv(|v| v / sigma);
    let p = h.prox(scaled.view(), 1.0 / sigma);
    Zip::from(&u).and(&p).map_collect(|&a, &b| a - sigma * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Golden-section minimizer of a unimodal scalar function on `[lo, hi]`.
    fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut a = hi - r * (hi - lo);
        let mut b = lo + r * (hi - lo);
        let (mut fa, mut fb) = (f(a), f(b));
        for _ in 0..200 {
            if fa < fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - r * (hi - lo);
                fa = f(a);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + r * (hi - lo);
                fb = f(b);
            }
        }
        0.5 * (lo + hi)
    }

    fn grid_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
        (0..=steps)
            .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap()
    }

    #[test]
    fn soft_threshold_examples() {
        let out = prox_l1(array![3.0, -0.2, 0.0].view(), 1.0).unwrap();
        assert_eq!(out, array![2.0, 0.0, 0.0]);
        let zero = prox_l1(Array1::zeros(4).view(), 0.7).unwrap();
        assert_eq!(zero, Array1::<f64>::zeros(4));
    }

    #[test]
    fn soft_threshold_matches_grid_search() {
        let oracle = grid_min(|w| 0.5 * (w - 1.7) * (w - 1.7) + 0.5 * w.abs(), -3.0, 3.0, 600_000);
        assert_abs_diff_eq!(oracle, 1.2, epsilon = 1e-5);
        let out = prox_l1(array![1.7].view(), 0.5).unwrap();
        assert_abs_diff_eq!(out[0], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(out[0], oracle, epsilon = 1e-5);
    }

    #[test]
    fn soft_threshold_rejects_bad_input() {
        assert!(matches!(
            prox_l1(array![1.0, f64::NAN].view(), 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            prox_l1(array![f64::INFINITY].view(), 1.0),
            Err(Error::Domain(_))
        ));
        assert!(prox_l1(array![1.0].view(), 0.0).is_err());
        assert!(prox_l1(array![1.0].view(), -1.0).is_err());
    }

    #[test]
    fn soft_threshold_is_the_true_prox() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x: f64 = rng.random_range(-5.0..5.0);
            let t: f64 = rng.random_range(0.01..3.0);
            let oracle = golden_min(|w| 0.5 * (w - x) * (w - x) + t * w.abs(), -10.0, 10.0);
            let got = prox_l1(array![x].view(), t).unwrap()[0];
            assert_abs_diff_eq!(got, oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn consensus_projection_examples() {
        let out = project_consensus(&[array![1.0], array![3.0]]).unwrap();
        assert_eq!(out, vec![array![2.0], array![2.0]]);

        let a = array![0.5, -1.0, 2.0];
        let out = project_consensus(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(out, vec![a.clone(), a.clone(), a]);

        assert!(project_consensus(&[array![1.0], array![1.0, 2.0]]).is_err());
        assert!(project_consensus(&[]).is_err());
    }

    #[test]
    fn consensus_projection_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<Array1<f64>> = (0..4)
            .map(|_| Array1::from_shape_fn(3, |_| rng.random_range(-2.0..2.0)))
            .collect();
        let proj = project_consensus(&xs).unwrap();
        // idempotent
        assert_eq!(project_consensus(&proj).unwrap(), proj);
        // each coordinate of the consensus point minimizes Σ_n (c − x_n,i)²
        for i in 0..3 {
            let cost = |c: f64| xs.iter().map(|x| (c - x[i]).powi(2)).sum::<f64>();
            let best = golden_min(cost, -5.0, 5.0);
            assert_abs_diff_eq!(proj[0][i], best, epsilon = 1e-7);
        }
    }

    #[test]
    fn consensus_indicator_groups() {
        let ind = ConsensusIndicator::new(2, 1);
        let out = ind.prox(array![1.0, 3.0, -2.0, 0.0].view(), 1.0);
        assert_eq!(out, array![2.0, 2.0, -1.0, -1.0]);
        assert_eq!(ind.value(out.view()), 0.0);
        assert_eq!(ind.value(array![1.0, 3.0].view()), f64::INFINITY);
    }

    #[test]
    fn conjugate_prox_examples() {
        // consensus in R²: u − proj_C(u)
        let h = ConsensusIndicator::new(2, 1);
        let out = prox_conjugate(&h, array![1.0, 3.0].view(), 1.0).unwrap();
        assert_abs_diff_eq!(out[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-15);

        // h ≡ 0 has h* = ι_{0}
        let out = prox_conjugate(&Zero, array![4.0, -2.0].view(), 0.3).unwrap();
        assert_eq!(out, array![0.0, 0.0]);

        assert!(prox_conjugate(&Zero, array![1.0].view(), 0.0).is_err());
        assert!(prox_conjugate(&Zero, array![1.0].view(), -2.0).is_err());
    }

    #[test]
    fn conjugate_of_abs_is_interval_projection() {
        // h* = ι_[−1,1]; its prox is the projection, found here by grid search
        // over the dual feasible set.
        let u = 0.3;
        let oracle = grid_min(|w| 0.5 * (w - u) * (w - u), -1.0, 1.0, 200_000);
        let out = prox_conjugate(&L1Norm::new(1.0), array![u].view(), 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(out[0], oracle, epsilon = 1e-5);

        let out = prox_conjugate(&L1Norm::new(1.0), array![2.5, -4.0].view(), 0.5).unwrap();
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn diag_prox_falls_back_to_uniform_scale() {
        let h = ConsensusIndicator::new(2, 1);
        let x = array![1.0, 3.0];
        assert_eq!(
            h.prox_diag(x.view(), array![0.5, 0.5].view()).unwrap(),
            array![2.0, 2.0]
        );
        assert!(matches!(
            h.prox_diag(x.view(), array![0.5, 1.0].view()),
            Err(Error::Unsupported(_))
        ));
        let l1 = L1Norm::new(1.0);
        assert_eq!(
            l1.prox_diag(array![2.0, 2.0].view(), array![0.5, 1.5].view()).unwrap(),
            array![1.5, 0.5]
        );
    }

    fn all_prox_fns() -> Vec<Box<dyn ProxFn>> {
        vec![
            Box::new(Zero),
            Box::new(L1Norm::new(0.7)),
            Box::new(SquaredDistance::new(array![1.0, -2.0, 0.5, 0.0], 2.0)),
            Box::new(BoxIndicator {
                lower: -1.0,
                upper: 0.5,
            }),
            Box::new(ConsensusIndicator::new(2, 2)),
        ]
    }

    fn vec4() -> impl Strategy<Value = Array1<f64>> {
        proptest::collection::vec(-10.0f64..10.0, 4).prop_map(Array1::from)
    }

    proptest! {
        #[test]
        fn prox_is_firmly_nonexpansive(u in vec4(), v in vec4(), gamma in 0.01f64..5.0) {
            for f in all_prox_fns() {
                let pu = f.prox(u.view(), gamma);
                let pv = f.prox(v.view(), gamma);
                let dp = &pu - &pv;
                let lhs = dp.dot(&dp);
                let rhs = dp.dot(&(&u - &v));
                prop_assert!(lhs <= rhs + 1e-10, "{f:?}: {lhs} > {rhs}");
            }
        }

        #[test]
        fn moreau_reconstruction(u in vec4(), sigma in 0.05f64..20.0) {
            for h in all_prox_fns() {
                let dual = prox_conjugate(h.as_ref(), u.view(), sigma).unwrap();
                let scaled = u.mapv(|x| x / sigma);
                let primal = h.prox(scaled.view(), 1.0 / sigma);
                let back = &dual + &(primal * sigma);
                for (a, b) in back.iter().zip(u.iter()) {
                    prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
                }
            }
        }

        #[test]
        fn consensus_projection_idempotent_and_lipschitz(a in vec4(), b in vec4(), c in vec4(), d in vec4()) {
            let xs = vec![a.clone(), b.clone()];
            let ys = vec![c.clone(), d.clone()];
            let px = project_consensus(&xs).unwrap();
            let py = project_consensus(&ys).unwrap();
            prop_assert_eq!(project_consensus(&px).unwrap(), px.clone());
            let dist = |p: &[Array1<f64>], q: &[Array1<f64>]| -> f64 {
                p.iter().zip(q).map(|(x, y)| (x - y).mapv(|t| t * t).sum()).sum::<f64>().sqrt()
            };
            prop_assert!(dist(&px, &py) <= dist(&xs, &ys) + 1e-12);
        }

        #[test]
        fn smooth_prox_satisfies_optimality(x in vec4(), gamma in 0.01f64..5.0) {
            // prox of a quadratic: γ∇f(p) + p − x = 0
            let f = SquaredDistance::new(Array1::from(vec![1.0, -2.0, 0.5, 0.0]), 2.0);
            let p = f.prox(x.view(), gamma);
            let grad = (&p - &f.center) * f.weight;
            let resid = &(grad * gamma) + &p - &x;
            prop_assert!(resid.iter().all(|r| r.abs() < 1e-10));
        }
    }
}
