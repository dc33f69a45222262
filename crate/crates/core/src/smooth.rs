//! Smooth convex terms accessed through value and gradient.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, Zip};

use crate::error::{Error, Result};
use crate::linear::{spectral_norm, NORM_SAFETY_FACTOR};

pub trait SmoothFn: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: ArrayView1<f64>) -> f64;
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64>;

    /// A Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroSmooth {
    pub dim: usize,
}

impl SmoothFn for ZeroSmooth {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: ArrayView1<f64>) -> f64 {
        0.0
    }
    fn gradient(&self, _x: ArrayView1<f64>) -> Array1<f64> {
        Array1::zeros(self.dim)
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// `½‖Ax − b‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Array2<f64>,
    b: Array1<f64>,
    lipschitz: f64,
}

impl LeastSquares {
    /// The Lipschitz constant `‖A‖²` is bounded by power iteration with the
    /// usual safety factor.
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::dimension("least squares rhs", a.nrows(), b.len()));
        }
        let norm = spectral_norm(&a, 300, 0) * NORM_SAFETY_FACTOR;
        Ok(Self {
            a,
            b,
            lipschitz: norm * norm,
        })
    }

    pub fn with_lipschitz(a: Array2<f64>, b: Array1<f64>, lipschitz: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::dimension("least squares rhs", a.nrows(), b.len()));
        }
        Ok(Self { a, b, lipschitz })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn residual(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.a.dot(&x) - &self.b
    }
}

impl SmoothFn for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let r = self.residual(x);
        0.5 * r.dot(&r)
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.a.t().dot(&self.residual(x))
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// `(weight / 2)‖x − center‖²`.
#[derive(Debug, Clone)]
pub struct SquaredDistanceSmooth {
    pub center: Array1<f64>,
    pub weight: f64,
}

impl SquaredDistanceSmooth {
    pub fn new(center: Array1<f64>, weight: f64) -> Self {
        Self { center, weight }
    }
}

impl SmoothFn for SquaredDistanceSmooth {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let sq = Zip::from(&x)
            .and(&self.center)
            .fold(0.0, |acc, &v, &c| acc + (v - c) * (v - c));
        0.5 * self.weight * sq
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Zip::from(&x)
            .and(&self.center)
            .map_collect(|&v, &c| self.weight * (v - c))
    }
    fn lipschitz(&self) -> f64 {
        self.weight.abs()
    }
}
