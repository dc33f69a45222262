//! Random LASSO instances `½‖Ax − b‖² + λ‖x‖₁` and their row splits.

use ndarray::{Array1, Array2};
use pdsds_core::composite::{Batch, BatchProblem};
use pdsds_core::prox::L1Norm;
use pdsds_core::rng;
use pdsds_core::smooth::LeastSquares;
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// `λ = factor · ‖Aᵀb‖_∞` unless set explicitly.
pub const DEFAULT_LAMBDA_FACTOR: f64 = 0.005;
pub const NOISE_STD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoInstance {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub x_true: Array1<f64>,
    pub lambda: f64,
    pub seed: u64,
}

/// Draws an instance with `m = n/4` Gaussian rows and a `n/64`-sparse truth.
///
/// The matrix, the support and the noise come from separate streams of
/// `seed`, so solver randomness seeded with the same value stays independent.
pub fn gen_lasso(n: usize, lambda_factor: f64, seed: u64) -> Result<LassoInstance, BenchError> {
    if n == 0 || !n.is_multiple_of(64) {
        return Err(BenchError::Config(format!(
            "n = {n} must be a positive multiple of 64 so that m = n/4 and K = n/64 are integers"
        )));
    }
    if !(lambda_factor > 0.0) {
        return Err(BenchError::Config(format!("lambda factor must be positive, got {lambda_factor}")));
    }
    let (m, k) = (n / 4, n / 64);
    let mut ra = rng::stream(seed, 1);
    let a = Array2::from_shape_fn((m, n), |_| ra.sample::<f64, _>(StandardNormal));
    let mut rx = rng::stream(seed, 2);
    let mut x_true = Array1::zeros(n);
    for i in index::sample(&mut rx, n, k) {
        x_true[i] = rx.random_range(-2.0..=2.0);
    }
    let mut rn = rng::stream(seed, 3);
    let noise = Normal::new(0.0, NOISE_STD).expect("valid noise");
    let b = a.dot(&x_true) + Array1::from_shape_fn(m, |_| rn.sample(noise));
    let lambda = lambda_factor * lambda_max(&a, &b);
    Ok(LassoInstance {
        a,
        b,
        x_true,
        lambda,
        seed,
    })
}

/// `‖Aᵀb‖_∞`, the smallest λ with `x = 0` optimal.
pub fn lambda_max(a: &Array2<f64>, b: &Array1<f64>) -> f64 {
    a.t().dot(b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl LassoInstance {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn sparsity(&self) -> usize {
        self.x_true.iter().filter(|v| **v != 0.0).count()
    }

    /// `½‖Ax − b‖²`.
    pub fn fval(&self, x: &Array1<f64>) -> f64 {
        let r = self.a.dot(x) - &self.b;
        0.5 * r.dot(&r)
    }

    /// `‖x − x_true‖`.
    pub fn err(&self, x: &Array1<f64>) -> f64 {
        let d = x - &self.x_true;
        d.dot(&d).sqrt()
    }

    pub fn objective(&self, x: &Array1<f64>) -> f64 {
        self.fval(x) + self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn least_squares(&self) -> Result<LeastSquares, BenchError> {
        Ok(LeastSquares::new(self.a.clone(), self.b.clone())?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Contiguous,
    /// Rows are permuted with this seed before chunking.
    Shuffled(u64),
}

/// Partitions `0..m` into `batches` chunks whose sizes differ by at most one.
pub fn row_chunks(m: usize, batches: usize, mode: SplitMode) -> Result<Vec<Vec<usize>>, BenchError> {
    if batches == 0 || batches > m {
        return Err(BenchError::Config(format!("need 1 <= N <= m, got N = {batches}, m = {m}")));
    }
    let mut rows: Vec<usize> = (0..m).collect();
    if let SplitMode::Shuffled(seed) = mode {
        rows.shuffle(&mut rng::stream(seed, 4));
    }
    Ok((0..batches)
        .map(|i| {
            let mut c = rows[i * m / batches..(i + 1) * m / batches].to_vec();
            c.sort_unstable();
            c
        })
        .collect())
}

/// Batch `n` gets `f_n = ½Σ_{i∈W_n}(A_i x − b_i)²` and `g_n = (λ/N)‖·‖₁`.
pub fn batch_terms(inst: &LassoInstance, batches: usize, mode: SplitMode) -> Result<Vec<Batch>, BenchError> {
    let chunks = row_chunks(inst.m(), batches, mode)?;
    let weight = inst.lambda / batches as f64;
    chunks
        .into_iter()
        .map(|rows| {
            let a = inst.a.select(ndarray::Axis(0), &rows);
            let b = inst.b.select(ndarray::Axis(0), &rows);
            let f = LeastSquares::new(a, b)?;
            Ok(Batch::new(Box::new(f), Box::new(L1Norm::new(weight))))
        })
        .collect()
}

pub fn split_batches(inst: &LassoInstance, batches: usize, mode: SplitMode) -> Result<BatchProblem, BenchError> {
    Ok(BatchProblem::new(batch_terms(inst, batches, mode)?)?)
}

/// On-disk form written by `gen`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LassoFile {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub lambda: f64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub x_true: Vec<f64>,
}

impl From<&LassoInstance> for LassoFile {
    fn from(inst: &LassoInstance) -> Self {
        Self {
            n: inst.n(),
            m: inst.m(),
            k: inst.sparsity(),
            seed: inst.seed,
            lambda: inst.lambda,
            a: inst.a.rows().into_iter().map(|r| r.to_vec()).collect(),
            b: inst.b.to_vec(),
            x_true: inst.x_true.to_vec(),
        }
    }
}

impl TryFrom<LassoFile> for LassoInstance {
    type Error = BenchError;

    fn try_from(f: LassoFile) -> Result<Self, BenchError> {
        let flat: Vec<f64> = f.a.iter().flatten().copied().collect();
        let a = Array2::from_shape_vec((f.m, f.n), flat)
            .map_err(|e| BenchError::Config(format!("matrix shape: {e}")))?;
        if f.b.len() != f.m || f.x_true.len() != f.n {
            return Err(BenchError::Config("vector lengths do not match the matrix".into()));
        }
        Ok(Self {
            a,
            b: Array1::from(f.b),
            x_true: Array1::from(f.x_true),
            lambda: f.lambda,
            seed: f.seed,
        })
    }
}
