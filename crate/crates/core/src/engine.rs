//! Krasnosel'skii–Mann iterations of averaged operators, deterministic and
//! with random block activation.

use std::ops::Range;

use ndarray::{s, Array1, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::schedule::{Checkpoint, Condition};
use crate::trace::{relative_change, StopRule, TraceRecord};

/// Partition of `0..dim` into contiguous blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    blocks: Vec<Range<usize>>,
}

impl BlockLayout {
    pub fn new(blocks: Vec<Range<usize>>) -> Result<Self> {
        let mut next = 0;
        for (j, b) in blocks.iter().enumerate() {
            if b.start != next || b.end <= b.start {
                return Err(Error::invalid(format!(
                    "block {j} ({b:?}) does not continue a contiguous partition at {next}"
                )));
            }
            next = b.end;
        }
        if blocks.is_empty() {
            return Err(Error::invalid("a layout needs at least one block"));
        }
        Ok(Self { blocks })
    }

    /// `count` blocks of equal size `len`.
    pub fn uniform(count: usize, len: usize) -> Result<Self> {
        Self::new((0..count).map(|j| j * len..(j + 1) * len).collect())
    }

    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![0..dim])
    }

    pub fn count(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub fn range(&self, j: usize) -> Range<usize> {
        self.blocks[j].clone()
    }
}

/// An η_k-averaged operator on a block-structured space.
///
/// Iteration-dependent operators `T^k` take the counter `k` explicitly.
pub trait AveragedOperator {
    fn layout(&self) -> &BlockLayout;

    /// Averagedness constant `η_k ∈ (0, 1]`.
    fn averagedness(&self, k: usize) -> f64;

    fn apply(&self, k: usize, z: ArrayView1<f64>) -> Array1<f64>;

    /// Component `j` of `T^k z`.
    fn apply_block(&self, k: usize, z: ArrayView1<f64>, j: usize) -> Array1<f64> {
        let r = self.layout().range(j);
        self.apply(k, z).slice(s![r]).to_owned()
    }
}

/// Distribution over subsets of block indices.
#[derive(Debug, Clone)]
pub struct BlockSelector {
    block_count: usize,
    support: Vec<Vec<usize>>,
    cumulative: Vec<f64>,
    probabilities: Vec<f64>,
}

impl BlockSelector {
    /// Builds a selector from `(subset, probability)` pairs.
    ///
    /// Zero-probability subsets are dropped; every block must then appear in
    /// some remaining subset.
    pub fn new(block_count: usize, support: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if block_count == 0 {
            return Err(Error::invalid("a selector needs at least one block"));
        }
        let mut sets = Vec::new();
        let mut probs = Vec::new();
        for (mut set, p) in support {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::invalid(format!("probability {p} is not valid")));
            }
            if let Some(&bad) = set.iter().find(|&&j| j >= block_count) {
                return Err(Error::invalid(format!(
                    "block index {bad} out of range for {block_count} blocks"
                )));
            }
            if p == 0.0 {
                continue;
            }
            if set.is_empty() {
                return Err(Error::invalid("selected subsets must be nonempty"));
            }
            set.sort_unstable();
            set.dedup();
            sets.push(set);
            probs.push(p);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "subset probabilities sum to {total}, not 1"
            )));
        }
        let mut covered = vec![false; block_count];
        for set in &sets {
            for &j in set {
                covered[j] = true;
            }
        }
        if let Some(j) = covered.iter().position(|c| !c) {
            return Err(Error::Coverage(j));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(Self {
            block_count,
            support: sets,
            cumulative,
            probabilities: probs.iter().map(|p| p / total).collect(),
        })
    }

    /// Always selects every block.
    pub fn full(block_count: usize) -> Result<Self> {
        Self::new(block_count, vec![((0..block_count).collect(), 1.0)])
    }

    /// Selects one block uniformly at random.
    pub fn uniform_single(block_count: usize) -> Result<Self> {
        let p = 1.0 / block_count as f64;
        Self::new(block_count, (0..block_count).map(|j| (vec![j], p)).collect())
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn support(&self) -> &[Vec<usize>] {
        &self.support
    }

    pub fn is_full(&self) -> bool {
        self.support.len() == 1 && self.support[0].len() == self.block_count
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[usize] {
        if self.support.len() == 1 {
            return &self.support[0];
        }
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.support.len() - 1);
        &self.support[i]
    }

    /// Probability that block `j` belongs to the sampled subset.
    pub fn inclusion_probability(&self, j: usize) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .filter(|(set, _)| set.contains(&j))
            .map(|(_, p)| p)
            .sum()
    }
}

/// Squared norm `Σ_j q_j ‖z_j‖²` with `q_j⁻¹` the inclusion probability of
/// block `j`; the metric in which randomized iterations are Fejér monotone in
/// expectation.
pub fn weighted_sq_norm(selector: &BlockSelector, layout: &BlockLayout, z: ArrayView1<f64>) -> f64 {
    (0..layout.count())
        .map(|j| {
            let block = z.slice(s![layout.range(j)]);
            block.dot(&block) / selector.inclusion_probability(j)
        })
        .sum()
}

/// Output of an engine run.
#[derive(Debug, Clone)]
pub struct IterTrace {
    pub seed: Option<u64>,
    pub records: Vec<TraceRecord>,
    /// Every iterate `z^0, z^1, …` when requested.
    pub iterates: Vec<Array1<f64>>,
    pub last: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EngineOptions {
    pub keep_iterates: bool,
    /// Compute `‖z − T z‖` at each step for randomized runs as well.
    pub residual: bool,
}

/// `z^{k+1} = z^k + ρ_k (T z^k − z^k)`.
pub fn km_iterate(
    op: &dyn AveragedOperator,
    z0: ArrayView1<f64>,
    relaxation: &dyn Fn(usize) -> f64,
    stop: &StopRule,
    opts: EngineOptions,
) -> Result<IterTrace> {
    check_dim(op, z0)?;
    for k in 0..stop.max_iters {
        let rho = relaxation(k);
        let bound = 1.0 / op.averagedness(k);
        if !(rho >= 0.0 && rho <= bound) {
            return Err(Error::Schedule {
                at: Checkpoint::Iteration(k),
                condition: Condition::RelaxationRange,
            });
        }
    }
    let mut z = z0.to_owned();
    let mut trace = IterTrace::start(None, &z, opts);
    for k in 0..stop.max_iters {
        let rho = relaxation(k);
        let tz = op.apply(k, z.view());
        let step = &tz - &z;
        let next = &z + &(rho * &step);
        let mut rec = TraceRecord::at(k);
        rec.residual = Some(step.dot(&step).sqrt());
        let change = relative_change(z.view(), next.view());
        rec.change = Some(change);
        trace.records.push(rec);
        z = next;
        trace.iterations = k + 1;
        if opts.keep_iterates {
            trace.iterates.push(z.clone());
        }
        if stop.is_met(change) {
            trace.converged = true;
            break;
        }
    }
    trace.last = z;
    Ok(trace)
}

/// `z^{k+1} = z^k + β_k (T̂^{k,(ζ^{k+1})} z^k − z^k)`: only the sampled blocks move.
#[allow(clippy::too_many_arguments)]
pub fn rkm_iterate<R: Rng + ?Sized>(
    op: &dyn AveragedOperator,
    selector: &BlockSelector,
    z0: ArrayView1<f64>,
    step_size: &dyn Fn(usize) -> f64,
    rng: &mut R,
    seed: Option<u64>,
    stop: &StopRule,
    opts: EngineOptions,
) -> Result<IterTrace> {
    check_dim(op, z0)?;
    if selector.block_count() != op.layout().count() {
        return Err(Error::dimension(
            "selector block count",
            op.layout().count(),
            selector.block_count(),
        ));
    }
    for k in 0..stop.max_iters {
        let beta = step_size(k);
        let bound = 1.0 / op.averagedness(k);
        if !(beta > 0.0 && beta < bound) {
            return Err(Error::Schedule {
                at: Checkpoint::Iteration(k),
                condition: Condition::RelaxationRange,
            });
        }
    }
    let layout = op.layout();
    let mut z = z0.to_owned();
    let mut trace = IterTrace::start(seed, &z, opts);
    for k in 0..stop.max_iters {
        let beta = step_size(k);
        let chosen = selector.sample(rng).to_vec();
        let mut next = z.clone();
        if chosen.len() == layout.count() {
            let tz = op.apply(k, z.view());
            next = &z + &(beta * &(&tz - &z));
        } else {
            for &j in &chosen {
                let r = layout.range(j);
                let tj = op.apply_block(k, z.view(), j);
                let zj = z.slice(s![r.clone()]);
                let upd = &zj + &(beta * &(&tj - &zj));
                next.slice_mut(s![r]).assign(&upd);
            }
        }
        let mut rec = TraceRecord::at(k);
        if opts.residual {
            let tz = op.apply(k, z.view());
            let d = &tz - &z;
            rec.residual = Some(d.dot(&d).sqrt());
        }
        let change = relative_change(z.view(), next.view());
        rec.change = Some(change);
        rec.blocks_updated = Some(chosen);
        rec.seed = seed;
        trace.records.push(rec);
        z = next;
        trace.iterations = k + 1;
        if opts.keep_iterates {
            trace.iterates.push(z.clone());
        }
        // A randomized step that leaves z unchanged says nothing about the
        // untouched blocks, so only full-residual runs may stop on change.
        if stop.is_met(change) && (selector.is_full() || rec_residual_small(&trace, stop)) {
            trace.converged = true;
            break;
        }
    }
    trace.last = z;
    Ok(trace)
}

fn rec_residual_small(trace: &IterTrace, stop: &StopRule) -> bool {
    trace
        .records
        .last()
        .and_then(|r| r.residual)
        .is_some_and(|r| r < stop.tol)
}

impl IterTrace {
    fn start(seed: Option<u64>, z0: &Array1<f64>, opts: EngineOptions) -> Self {
        Self {
            seed,
            records: Vec::new(),
            iterates: if opts.keep_iterates {
                vec![z0.clone()]
            } else {
                Vec::new()
            },
            last: z0.clone(),
            iterations: 0,
            converged: false,
        }
    }
}

fn check_dim(op: &dyn AveragedOperator, z0: ArrayView1<f64>) -> Result<()> {
    let dim = op.layout().dim();
    if z0.len() != dim {
        return Err(Error::dimension("initial point", dim, z0.len()));
    }
    Ok(())
}

/// Averagedness of `T₁ ∘ T₂` for α₁- and α₂-averaged operators:
/// `(α₁ + α₂ − 2α₁α₂) / (1 − α₁α₂)`.
pub fn compose_averaged(alpha1: f64, alpha2: f64) -> Result<f64> {
    for a in [alpha1, alpha2] {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Domain(format!(
                "averagedness constants must lie in (0, 1), got {a}"
            )));
        }
    }
    Ok((alpha1 + alpha2 - 2.0 * alpha1 * alpha2) / (1.0 - alpha1 * alpha2))
}
