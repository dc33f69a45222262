#![allow(dead_code)]

use ndarray::{s, Array1, Array2};
use pdsds_core::composite::Batch;
use pdsds_core::prox::L1Norm;
use pdsds_core::rng;
use pdsds_core::smooth::LeastSquares;
use rand::Rng;
use rand_distr::StandardNormal;

pub struct Lasso {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub lam: f64,
}

impl Lasso {
    pub fn random(m: usize, n: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let a = Array2::from_shape_fn((m, n), |_| r.sample::<f64, _>(StandardNormal));
        let b = Array1::from_shape_fn(m, |_| r.sample::<f64, _>(StandardNormal));
        let lam = 0.1 * a.t().dot(&b).iter().fold(0.0f64, |x, v| x.max(v.abs()));
        Self { a, b, lam }
    }

    pub fn objective(&self, x: &Array1<f64>) -> f64 {
        let r = self.a.dot(x) - &self.b;
        0.5 * r.dot(&r) + self.lam * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Contiguous row split with `g_n = (λ/N)‖·‖₁`.
    pub fn batches(&self, n: usize) -> Vec<Batch> {
        let m = self.a.nrows();
        (0..n)
            .map(|i| {
                let (lo, hi) = (i * m / n, (i + 1) * m / n);
                let f = LeastSquares::new(self.a.slice(s![lo..hi, ..]).to_owned(), self.b.slice(s![lo..hi]).to_owned()).unwrap();
                Batch::new(Box::new(f), Box::new(L1Norm::new(self.lam / n as f64)))
            })
            .collect()
    }

    /// FISTA with gradient restarts, run far past the solvers' tolerances.
    pub fn oracle(&self) -> (Array1<f64>, f64) {
        let n = self.a.ncols();
        // exact ‖A‖² from the eigenvalues of AᵀA
        let ata = self.a.t().dot(&self.a);
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| ata[[i, j]]);
        let l = m.symmetric_eigenvalues().max();
        let t = 1.0 / l;
        let mut x = Array1::<f64>::zeros(n);
        let mut z = x.clone();
        let mut theta = 1.0f64;
        for _ in 0..200_000 {
            let g = self.a.t().dot(&(self.a.dot(&z) - &self.b));
            let v = &z - &(g * t);
            let next = v.mapv(|u| u.signum() * (u.abs() - t * self.lam).max(0.0));
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let step = &next - &x;
            if (&z - &next).dot(&step) > 0.0 {
                theta = 1.0;
                z = next.clone();
            } else {
                z = &next + &(&step * ((theta - 1.0) / theta_next));
                theta = theta_next;
            }
            let moved = step.dot(&step).sqrt();
            x = next;
            if moved < 1e-15 * (1.0 + x.dot(&x).sqrt()) {
                break;
            }
        }
        let f = self.objective(&x);
        (x, f)
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
