//! Anchor selection and the RBF anchor-kernel feature map.
//!
//! An item `x` is lifted to `φ(x)_i = exp(−‖x − a_i‖² / δ)` for `m` anchors
//! `a_i` drawn from the training columns. Anchors travel with the trained
//! model so query-time encoding needs nothing else.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, ZshError};
use crate::io::FeatureMatrix;

/// Number of random pairs averaged by the bandwidth heuristic.
pub const BANDWIDTH_PAIRS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    anchors: DMatrix<f64>,
    delta: f64,
    seed: u64,
}

impl AnchorSet {
    pub fn new(anchors: DMatrix<f64>, delta: f64, seed: u64) -> Result<Self> {
        if anchors.ncols() == 0 || anchors.nrows() == 0 {
            return Err(ZshError::param("anchors", "at least one anchor of positive dimension is required"));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(ZshError::param("bandwidth", format!("must be finite and > 0, got {delta}")));
        }
        if anchors.iter().any(|v| !v.is_finite()) {
            return Err(ZshError::param("anchors", "non-finite anchor entry"));
        }
        Ok(AnchorSet { anchors, delta, seed })
    }

    /// Number of anchors `m`.
    pub fn m(&self) -> usize {
        self.anchors.ncols()
    }

    /// Feature dimensionality `d` the anchors live in.
    pub fn d(&self) -> usize {
        self.anchors.nrows()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// d×m matrix, one anchor per column.
    pub fn anchors(&self) -> &DMatrix<f64> {
        &self.anchors
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        AnchorSet::new(self.anchors.clone(), delta, self.seed)
    }
}

/// The m×n matrix `φ(X)`, column `j` being the kernel features of item `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelizedFeatures {
    pub values: DMatrix<f64>,
}

impl KernelizedFeatures {
    pub fn m(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }
}

/// Draws `m` distinct training columns as anchors.
///
/// When `bandwidth` is `None`, δ is the mean squared distance over
/// [`BANDWIDTH_PAIRS`] random pairs of distinct training items.
pub fn sample_anchors(x: &FeatureMatrix, m: usize, seed: u64, bandwidth: Option<f64>) -> Result<AnchorSet> {
    let n = x.n();
    if m == 0 || m > n {
        return Err(ZshError::param("anchors", format!("need 1 <= m <= n = {n}, got m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, n, m).into_vec();
    let anchors = x.values().select_columns(&picks);
    let delta = match bandwidth {
        Some(d) => d,
        None => mean_squared_distance(x.values(), &mut rng),
    };
    AnchorSet::new(anchors, delta, seed)
}

fn mean_squared_distance(values: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let n = values.ncols();
    if n < 2 {
        return 1.0;
    }
    let mut total = 0.0;
    for _ in 0..BANDWIDTH_PAIRS {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        total += squared_distance(values.column(i).as_slice(), values.column(j).as_slice());
    }
    let mean = total / BANDWIDTH_PAIRS as f64;
    if mean > 0.0 && mean.is_finite() {
        mean
    } else {
        1.0
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kernel_column(x: &[f64], anchors: &AnchorSet) -> Vec<f64> {
    anchors
        .anchors
        .column_iter()
        .map(|a| (-squared_distance(x, a.as_slice()) / anchors.delta).exp())
        .collect()
}

pub fn kernel_map(x: &[f64], anchors: &AnchorSet) -> Result<DVector<f64>> {
    if x.len() != anchors.d() {
        return Err(ZshError::Dimension(format!(
            "vector has {} features, anchors have {}",
            x.len(),
            anchors.d()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ZshError::param("x", "non-finite feature value"));
    }
    Ok(DVector::from_vec(kernel_column(x, anchors)))
}

/// Column-wise [`kernel_map`]; identical bits to the per-column call.
pub fn kernel_map_batch(x: &FeatureMatrix, anchors: &AnchorSet) -> Result<KernelizedFeatures> {
    kernel_map_matrix(x.values(), anchors)
}

pub fn kernel_map_matrix(x: &DMatrix<f64>, anchors: &AnchorSet) -> Result<KernelizedFeatures> {
    if x.nrows() != anchors.d() {
        return Err(ZshError::Dimension(format!(
            "features have {} rows, anchors have {}",
            x.nrows(),
            anchors.d()
        )));
    }
    let m = anchors.m();
    let columns: Vec<Vec<f64>> = (0..x.ncols())
        .into_par_iter()
        .map(|j| kernel_column(x.column(j).as_slice(), anchors))
        .collect();
    let mut data = Vec::with_capacity(m * x.ncols());
    for c in columns {
        data.extend(c);
    }
    Ok(KernelizedFeatures {
        values: DMatrix::from_vec(m, x.ncols(), data),
    })
}
