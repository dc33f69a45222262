//! Linear maps with adjoints.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::rng;

pub trait LinearMap: Send + Sync + fmt::Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64>;
    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64>;

    /// An upper bound on the operator norm `‖D‖`.
    fn norm_bound(&self) -> f64;

    /// Diagonal of `D*D` when it is diagonal.
    fn gram_diagonal(&self) -> Option<Array1<f64>> {
        None
    }
}

/// Safety factor applied to power-iteration norm estimates, which approach
/// the true norm from below.
pub const NORM_SAFETY_FACTOR: f64 = 1.01;

#[derive(Debug, Clone, Copy)]
pub struct Identity {
    pub dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LinearMap for Identity {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        x.to_owned()
    }
    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        y.to_owned()
    }
    fn norm_bound(&self) -> f64 {
        1.0
    }
    fn gram_diagonal(&self) -> Option<Array1<f64>> {
        Some(Array1::ones(self.dim))
    }
}

#[derive(Debug, Clone)]
pub struct Diagonal {
    pub diag: Array1<f64>,
}

impl Diagonal {
    pub fn new(diag: Array1<f64>) -> Self {
        Self { diag }
    }
}

impl LinearMap for Diagonal {
    fn input_dim(&self) -> usize {
        self.diag.len()
    }
    fn output_dim(&self) -> usize {
        self.diag.len()
    }
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        &x * &self.diag
    }
    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        &y * &self.diag
    }
    fn norm_bound(&self) -> f64 {
        self.diag.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
    fn gram_diagonal(&self) -> Option<Array1<f64>> {
        Some(self.diag.mapv(|v| v * v))
    }
}

/// The zero map between two spaces.
#[derive(Debug, Clone, Copy)]
pub struct ZeroMap {
    pub input: usize,
    pub output: usize,
}

impl LinearMap for ZeroMap {
    fn input_dim(&self) -> usize {
        self.input
    }
    fn output_dim(&self) -> usize {
        self.output
    }
    fn apply(&self, _x: ArrayView1<f64>) -> Array1<f64> {
        Array1::zeros(self.output)
    }
    fn adjoint(&self, _y: ArrayView1<f64>) -> Array1<f64> {
        Array1::zeros(self.input)
    }
    fn norm_bound(&self) -> f64 {
        0.0
    }
}

/// A dense matrix acting by multiplication.
#[derive(Debug, Clone)]
pub struct DenseMap {
    matrix: Array2<f64>,
    norm_bound: f64,
}

impl DenseMap {
    /// Wraps `matrix`, bounding its norm by power iteration times
    /// [`NORM_SAFETY_FACTOR`].
    pub fn new(matrix: Array2<f64>) -> Self {
        let est = spectral_norm(&matrix, 300, 0);
        Self {
            matrix,
            norm_bound: est * NORM_SAFETY_FACTOR,
        }
    }

    /// Wraps `matrix` with a caller-supplied norm bound.
    pub fn with_norm_bound(matrix: Array2<f64>, norm_bound: f64) -> Self {
        Self { matrix, norm_bound }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }
}

impl LinearMap for DenseMap {
    fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.matrix.dot(&x)
    }
    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        self.matrix.t().dot(&y)
    }
    fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
}

/// Seeded power-iteration estimate of `‖D‖` on `D*D`.
///
/// The estimate approaches the norm from below; callers needing an upper
/// bound multiply by [`NORM_SAFETY_FACTOR`]. The zero operator yields 0.
pub fn estimate_operator_norm(d: &dyn LinearMap, iters: usize, seed: u64) -> f64 {
    let n = d.input_dim();
    if n == 0 || d.output_dim() == 0 {
        return 0.0;
    }
    let mut rng = rng::seeded(seed);
    let mut v: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        v.fill(1.0);
    }
    v /= v.dot(&v).sqrt();
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let dv = d.apply(v.view());
        estimate = dv.dot(&dv).sqrt();
        let w = d.adjoint(dv.view());
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return estimate;
        }
        v = w / wn;
    }
    let dv = d.apply(v.view());
    estimate.max(dv.dot(&dv).sqrt())
}

/// Power-iteration estimate of the largest singular value of a matrix.
pub fn spectral_norm(matrix: &Array2<f64>, iters: usize, seed: u64) -> f64 {
    estimate_operator_norm(&MatrixRef(matrix), iters, seed)
}

#[derive(Debug)]
struct MatrixRef<'a>(&'a Array2<f64>);

impl LinearMap for MatrixRef<'_> {
    fn input_dim(&self) -> usize {
        self.0.ncols()
    }
    fn output_dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.0.dot(&x)
    }
    fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        self.0.t().dot(&y)
    }
    fn norm_bound(&self) -> f64 {
        f64::NAN
    }
}
