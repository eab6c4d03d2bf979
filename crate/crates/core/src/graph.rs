//! kNN affinity graph and its unnormalized Laplacian `L = D − S`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Result, ZshError};
use crate::featurize::squared_distance;

/// Weight applied to a kNN edge as a function of the distance between its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Affinity {
    /// `exp(−‖xi − xj‖² / 2σ²)`
    #[default]
    Gaussian,
    /// `exp(−‖xi − xj‖ / 2σ²)`, the unsquared reading.
    ExpNegDist,
}

impl Affinity {
    fn weight(self, squared_dist: f64, sigma: f64) -> f64 {
        let scale = 2.0 * sigma * sigma;
        match self {
            Affinity::Gaussian => (-squared_dist / scale).exp(),
            Affinity::ExpNegDist => (-squared_dist.sqrt() / scale).exp(),
        }
    }
}

impl std::str::FromStr for Affinity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Affinity::Gaussian),
            "exp-neg-dist" => Ok(Affinity::ExpNegDist),
            other => Err(format!("unknown affinity {other:?} (expected gaussian|exp-neg-dist)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphConfig {
    pub k: usize,
    pub sigma: f64,
    pub affinity: Affinity,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            k: 5,
            sigma: 1.0,
            affinity: Affinity::Gaussian,
        }
    }
}

/// Sparse symmetric similarity matrix with zero diagonal.
///
/// Row `i` lists `(j, S_ij)` sorted by `j`; every entry is mirrored in row `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    k: usize,
    sigma: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SimilarityGraph {
    /// Builds a graph from explicit undirected weighted edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(ZshError::Dimension(format!("edge ({i}, {j}) outside {n} nodes")));
            }
            if i == j {
                return Err(ZshError::param("edges", "self loops are not allowed"));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(ZshError::param("edges", format!("weight {w} must be finite and >= 0")));
            }
            rows[i].push((j, w));
            rows[j].push((i, w));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(ZshError::param("edges", "duplicate edge"));
            }
        }
        Ok(SimilarityGraph {
            n,
            k: 0,
            sigma: 0.0,
            rows,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|p| self.rows[i][p].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                s[(i, j)] = w;
            }
        }
        s
    }

    /// `i j s_ij` lines for every stored entry.
    pub fn to_triplets(&self) -> String {
        let mut out = String::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                writeln!(out, "{i} {j} {w:?}").unwrap();
            }
        }
        out
    }
}

/// Brute-force kNN graph over the columns of `x` (d×n), symmetrized with the OR rule.
///
/// Distance ties are broken by the smaller index.
pub fn build_similarity(x: &DMatrix<f64>, config: &GraphConfig) -> Result<SimilarityGraph> {
    let n = x.ncols();
    let GraphConfig { k, sigma, affinity } = *config;
    if k == 0 || k >= n {
        return Err(ZshError::param("knn", format!("need 1 <= k < n = {n}, got k = {k}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(ZshError::param("sigma", format!("must be finite and > 0, got {sigma}")));
    }

    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.column(i);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(xi.as_slice(), x.column(j).as_slice()), j))
                .collect();
            let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, by_dist);
                cand.truncate(k);
            }
            cand.sort_by(by_dist);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut pairs = BTreeSet::new();
    for (i, nb) in neighbours.iter().enumerate() {
        for &j in nb {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let mut rows = vec![Vec::new(); n];
    for (i, j) in pairs {
        let w = affinity.weight(squared_distance(x.column(i).as_slice(), x.column(j).as_slice()), sigma);
        rows[i].push((j, w));
        rows[j].push((i, w));
    }
    for row in &mut rows {
        row.sort_by_key(|e| e.0);
    }
    Ok(SimilarityGraph { n, k, sigma, rows })
}

/// `L = D − S` kept in sparse form.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    graph: SimilarityGraph,
    degrees: Vec<f64>,
}

pub fn laplacian(graph: &SimilarityGraph) -> LaplacianMatrix {
    let degrees = graph.rows.iter().map(|row| row.iter().map(|e| e.1).sum()).collect();
    LaplacianMatrix {
        graph: graph.clone(),
        degrees,
    }
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.graph.n
    }

    /// Diagonal of `D`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn graph(&self) -> &SimilarityGraph {
        &self.graph
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.degrees[i]
        } else {
            -self.graph.get(i, j)
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut l = -self.graph.to_dense();
        for (i, d) in self.degrees.iter().enumerate() {
            l[(i, i)] = *d;
        }
        l
    }

    /// `F·L` for an r×n matrix `F`.
    pub fn right_multiply(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if f.ncols() != self.n() {
            return Err(ZshError::Dimension(format!(
                "cannot multiply {}x{} by a {}-node Laplacian",
                f.nrows(),
                f.ncols(),
                self.n()
            )));
        }
        let mut out = DMatrix::zeros(f.nrows(), f.ncols());
        for j in 0..self.n() {
            let mut col = f.column(j) * self.degrees[j];
            for &(i, w) in self.graph.row(j) {
                col.axpy(-w, &f.column(i), 1.0);
            }
            out.set_column(j, &col);
        }
        Ok(out)
    }

    /// `Tr(F L Fᵀ)` for an r×n matrix `F`.
    pub fn trace_form(&self, f: &DMatrix<f64>) -> Result<f64> {
        let fl = self.right_multiply(f)?;
        Ok(f.iter().zip(fl.iter()).map(|(a, b)| a * b).sum())
    }

    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        let f = DMatrix::from_row_slice(1, v.len(), v);
        self.trace_form(&f)
    }
}
