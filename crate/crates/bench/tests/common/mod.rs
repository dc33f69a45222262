#![allow(dead_code)]

use ndarray::{Array1, Array2};

/// `‖A‖²` from the eigenvalues of the smaller Gram matrix.
pub fn sq_norm(a: &Array2<f64>) -> f64 {
    let g = if a.nrows() <= a.ncols() { a.dot(&a.t()) } else { a.t().dot(a) };
    let k = g.nrows();
    nalgebra::DMatrix::from_fn(k, k, |i, j| g[[i, j]]).symmetric_eigenvalues().max()
}

pub fn lasso_objective(a: &Array2<f64>, b: &Array1<f64>, lam: f64, x: &Array1<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        let mut r = -b[i];
        for j in 0..a.ncols() {
            r += a[[i, j]] * x[j];
        }
        s += r * r;
    }
    0.5 * s + lam * x.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// FISTA with gradient restarts, run to machine precision.
pub fn fista(a: &Array2<f64>, b: &Array1<f64>, lam: f64) -> (Array1<f64>, f64) {
    let t = 1.0 / sq_norm(a);
    let n = a.ncols();
    let mut x = Array1::<f64>::zeros(n);
    let mut z = x.clone();
    let mut theta = 1.0f64;
    for _ in 0..300_000 {
        let g = a.t().dot(&(a.dot(&z) - b));
        let next = Array1::from_shape_fn(n, |i| soft(z[i] - t * g[i], t * lam));
        let step = &next - &x;
        if (&z - &next).dot(&step) > 0.0 {
            theta = 1.0;
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        z = &next + &(step.clone() * ((theta - 1.0) / theta_next));
        theta = theta_next;
        let moved = step.dot(&step).sqrt();
        x = next;
        if moved <= 1e-15 * x.dot(&x).sqrt().max(1e-300) {
            break;
        }
    }
    let f = lasso_objective(a, b, lam, &x);
    (x, f)
}

pub fn rel(v: f64, reference: f64) -> f64 {
    (v - reference).abs() / reference.abs().max(1e-300)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
