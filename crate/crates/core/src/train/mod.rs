//! Zero-shot hashing model and its alternating optimizer.
//!
//! The model learns `P` (m×l), `W` (l×e), an orthogonal `R` (e×e) and training
//! codes `B ∈ {±1}^{l×n}` minimizing
//!
//! ```text
//! ‖RᵀY − WᵀB‖² + λ‖W‖² + α‖Pᵀφ(X) − B‖² + β‖P‖² + γ Tr(Pᵀφ(X) L φ(X)ᵀP)
//! ```
//!
//! Each iteration updates `P`, `B`, `R`, `W` in that order; every block
//! update is an exact minimizer (coordinate-exact for `B`), so the objective
//! never increases.

mod blocks;
mod objective;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

pub use blocks::{
    code_target, dcc, dcc_row, procrustes, sgn, update_b, update_p, update_r, update_w, DccOutcome,
    ProjectionSystem, DCC_MAX_PASSES,
};
pub use objective::{objective_terms, reduced_code_objective, ObjectiveTerms, Variables};

use crate::codes::hash_item;
use crate::error::{Result, ZshError};
use crate::featurize::{kernel_map_batch, sample_anchors, AnchorSet};
use crate::graph::{build_similarity, laplacian, GraphConfig, LaplacianMatrix};
use crate::io::{assemble_y, FeatureMatrix, LabelList, LabelEmbeddingTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hyperparameters {
    /// Ridge weight on `W`.
    pub lambda: f64,
    /// Weight of the hash-function fit to the codes.
    pub alpha: f64,
    /// Ridge weight on `P`.
    pub beta: f64,
    /// Weight of the graph smoothness term.
    pub gamma: f64,
    /// Code length `l`.
    pub bits: usize,
    pub max_iters: usize,
    /// Stop once the relative objective change of an iteration drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            lambda: 1e-2,
            alpha: 1e-5,
            beta: 1e-4,
            gamma: 1e-6,
            bits: 32,
            max_iters: 10,
            tol: 1e-5,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [("lambda", self.lambda), ("beta", self.beta), ("gamma", self.gamma)];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ZshError::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ZshError::param("alpha", format!("must be finite and > 0, got {}", self.alpha)));
        }
        if self.bits == 0 {
            return Err(ZshError::param("bits", "code length must be >= 1"));
        }
        if self.max_iters == 0 {
            return Err(ZshError::param("iters", "must be >= 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(ZshError::param("tol", format!("must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Anchor-kernel settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub anchors: usize,
    /// Fixed δ; `None` selects the mean-squared-distance heuristic.
    pub bandwidth: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            anchors: 1000,
            bandwidth: None,
        }
    }
}

/// Trained hash function plus the semantic alignment it was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct ZshModel {
    pub anchors: AnchorSet,
    /// `P`, m×l.
    pub projection: DMatrix<f64>,
    /// `W`, l×e.
    pub semantic_map: DMatrix<f64>,
    /// `R`, e×e orthogonal.
    pub rotation: DMatrix<f64>,
    pub hyper: Hyperparameters,
}

impl ZshModel {
    pub fn new(
        anchors: AnchorSet,
        projection: DMatrix<f64>,
        semantic_map: DMatrix<f64>,
        rotation: DMatrix<f64>,
        hyper: Hyperparameters,
    ) -> Result<Self> {
        let (m, l) = projection.shape();
        let e = rotation.nrows();
        if m != anchors.m() || semantic_map.shape() != (l, e) || rotation.shape() != (e, e) || l != hyper.bits {
            return Err(ZshError::Dimension(format!(
                "inconsistent model: anchors {}, P {}x{}, W {}x{}, R {}x{}, bits {}",
                anchors.m(),
                m,
                l,
                semantic_map.nrows(),
                semantic_map.ncols(),
                rotation.nrows(),
                rotation.ncols(),
                hyper.bits
            )));
        }
        Ok(ZshModel {
            anchors,
            projection,
            semantic_map,
            rotation,
            hyper,
        })
    }

    pub fn bits(&self) -> usize {
        self.projection.ncols()
    }

    pub fn embedding_dim(&self) -> usize {
        self.rotation.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.anchors.d()
    }

    /// `‖RᵀR − I‖∞` (largest absolute entry).
    pub fn orthogonality_residual(&self) -> f64 {
        orthogonality_residual(&self.rotation)
    }

    /// Real-valued hash outputs `Pᵀφ(X)` for the d×n columns of `x`.
    /// Computed column by column, so results match single-item encoding bit for bit.
    pub fn hash_values(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.feature_dim() {
            return Err(ZshError::Dimension(format!(
                "features have dimension {}, model expects {}",
                x.nrows(),
                self.feature_dim()
            )));
        }
        let columns = (0..x.ncols())
            .into_par_iter()
            .map(|j| hash_item(x.column(j).as_slice(), self))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_columns(&columns))
    }
}

pub fn orthogonality_residual(r: &DMatrix<f64>) -> f64 {
    let n = r.ncols();
    (r.tr_mul(r) - DMatrix::<f64>::identity(n, n)).amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// Relative objective change fell below `tol`.
    Converged,
    MaxIters,
}

/// Objective values recorded during one full iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Objective after the `P`, `B`, `R` and `W` updates, in that order.
    pub after_block: [f64; 4],
    /// Terms at the end of the iteration.
    pub terms: ObjectiveTerms,
    pub dcc_passes: usize,
    pub dcc_converged: bool,
    pub relative_change: f64,
}

impl IterationRecord {
    pub fn objective(&self) -> f64 {
        self.terms.total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainTrace {
    pub initial: ObjectiveTerms,
    pub iterations: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl TrainTrace {
    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial.total())
            .chain(self.iterations.iter().map(IterationRecord::objective))
            .collect()
    }

    /// `iter,objective,term1..term5`; row 0 is the initialization.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,objective,term1,term2,term3,term4,term5\n");
        let rows = std::iter::once((0, &self.initial)).chain(self.iterations.iter().map(|r| (r.iter, &r.terms)));
        for (iter, t) in rows {
            write!(out, "{iter},{:?}", t.total()).unwrap();
            for v in t.as_array() {
                write!(out, ",{v:?}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ZshModel,
    /// Final training codes `B` (l×n, entries ±1).
    pub codes: DMatrix<f64>,
    pub trace: TrainTrace,
}

/// Mutable optimizer state over fixed `φ(X)`, `Y` and `L`.
#[derive(Clone)]
pub struct Trainer<'a> {
    phi: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    lap: &'a LaplacianMatrix,
    hyper: Hyperparameters,
    system: ProjectionSystem,
    projection: DMatrix<f64>,
    semantic_map: DMatrix<f64>,
    rotation: DMatrix<f64>,
    codes: DMatrix<f64>,
    hashed: DMatrix<f64>,
    terms: ObjectiveTerms,
    iter: usize,
}

impl<'a> Trainer<'a> {
    /// Seeded random initialization and factorization of the `P` system.
    pub fn new(
        phi: &'a DMatrix<f64>,
        y: &'a DMatrix<f64>,
        lap: &'a LaplacianMatrix,
        hyper: Hyperparameters,
    ) -> Result<Self> {
        hyper.validate()?;
        let (m, n) = phi.shape();
        let e = y.nrows();
        let l = hyper.bits;
        if y.ncols() != n || lap.n() != n {
            return Err(ZshError::Dimension(format!(
                "phi has {n} columns, Y has {}, Laplacian has {} nodes",
                y.ncols(),
                lap.n()
            )));
        }
        if e == 0 {
            return Err(ZshError::Dimension("empty embedding dimension".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let codes = DMatrix::from_iterator(l, n, (0..l * n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }));
        let mut gaussian = |rows: usize, cols: usize, scale: f64| {
            DMatrix::from_iterator(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal) * scale),
            )
        };
        let projection = gaussian(m, l, 1.0 / (m as f64).sqrt());
        let semantic_map = gaussian(l, e, 1.0 / (l as f64).sqrt());
        let rotation = gaussian(e, e, 1.0).qr().q();

        let system = ProjectionSystem::new(phi, lap, hyper.alpha, hyper.beta, hyper.gamma)?;
        let hashed = projection.tr_mul(phi);
        let mut trainer = Trainer {
            phi,
            y,
            lap,
            hyper,
            system,
            projection,
            semantic_map,
            rotation,
            codes,
            hashed,
            terms: ObjectiveTerms {
                semantic_fit: 0.0,
                map_ridge: 0.0,
                code_fit: 0.0,
                projection_ridge: 0.0,
                local_structure: 0.0,
            },
            iter: 0,
        };
        trainer.terms = trainer.evaluate("initialization")?;
        Ok(trainer)
    }

    fn evaluate(&self, block: &'static str) -> Result<ObjectiveTerms> {
        let vars = self.variables();
        let terms = objective::terms_with_hashed(&vars, &self.hashed, self.y, self.lap, &self.hyper)?;
        if !terms.total().is_finite() {
            return Err(ZshError::NonFiniteObjective { block });
        }
        Ok(terms)
    }

    pub fn variables(&self) -> Variables<'_> {
        Variables {
            projection: &self.projection,
            semantic_map: &self.semantic_map,
            rotation: &self.rotation,
            codes: &self.codes,
        }
    }

    pub fn terms(&self) -> ObjectiveTerms {
        self.terms
    }

    pub fn objective(&self) -> f64 {
        self.terms.total()
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    /// One pass of `P → B → R → W`.
    pub fn iterate(&mut self) -> Result<IterationRecord> {
        let before = self.objective();
        let mut after_block = [0.0; 4];

        self.projection = self.system.solve(self.phi, &self.codes);
        self.hashed = self.projection.tr_mul(self.phi);
        after_block[0] = self.evaluate("P")?.total();

        let h = code_target(&self.semantic_map, &self.rotation, self.y, &self.hashed, self.hyper.alpha);
        let dcc_out = dcc(&self.semantic_map, &h, &self.codes, DCC_MAX_PASSES)?;
        self.codes = dcc_out.codes;
        after_block[1] = self.evaluate("B")?.total();

        self.rotation = update_r(self.y, &self.semantic_map, &self.codes)?;
        after_block[2] = self.evaluate("R")?.total();

        self.semantic_map = update_w(&self.codes, self.y, &self.rotation, self.hyper.lambda)?;
        self.terms = self.evaluate("W")?;
        after_block[3] = self.terms.total();

        self.iter += 1;
        let after = after_block[3];
        Ok(IterationRecord {
            iter: self.iter,
            after_block,
            terms: self.terms,
            dcc_passes: dcc_out.passes,
            dcc_converged: dcc_out.converged,
            relative_change: (before - after).abs() / before.abs().max(f64::MIN_POSITIVE),
        })
    }

    /// Iterates until the relative change drops below `tol` or `max_iters` is reached.
    pub fn run(mut self) -> Result<(FinalState, TrainTrace)> {
        let initial = self.terms;
        let mut iterations = Vec::new();
        let mut stop = StopReason::MaxIters;
        while iterations.len() < self.hyper.max_iters {
            let rec = self.iterate()?;
            log::debug!("iteration {} objective {:.6e}", rec.iter, rec.objective());
            let done = rec.relative_change < self.hyper.tol;
            iterations.push(rec);
            if done {
                stop = StopReason::Converged;
                break;
            }
        }
        let vars = FinalState {
            projection: self.projection,
            semantic_map: self.semantic_map,
            rotation: self.rotation,
            codes: self.codes,
        };
        Ok((
            vars,
            TrainTrace {
                initial,
                iterations,
                stop,
            },
        ))
    }
}

/// Owned final variables of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalState {
    pub projection: DMatrix<f64>,
    pub semantic_map: DMatrix<f64>,
    pub rotation: DMatrix<f64>,
    pub codes: DMatrix<f64>,
}

/// Samples anchors, maps `x`, and runs the optimizer against `y` and `lap`.
pub fn train(
    x: &FeatureMatrix,
    y: &DMatrix<f64>,
    lap: &LaplacianMatrix,
    hyper: &Hyperparameters,
    kernel: &KernelConfig,
) -> Result<TrainOutput> {
    hyper.validate()?;
    if y.ncols() != x.n() {
        return Err(ZshError::Dimension(format!("Y has {} columns for {} items", y.ncols(), x.n())));
    }
    let anchors = sample_anchors(x, kernel.anchors, hyper.seed, kernel.bandwidth)?;
    let phi = kernel_map_batch(x, &anchors)?;
    let trainer = Trainer::new(&phi.values, y, lap, *hyper)?;
    let (vars, trace) = trainer.run()?;
    let model = ZshModel::new(anchors, vars.projection, vars.semantic_map, vars.rotation, *hyper)?;
    Ok(TrainOutput {
        model,
        codes: vars.codes,
        trace,
    })
}

/// End-to-end fit from labelled features: assembles `Y`, builds the kNN Laplacian, trains.
pub fn fit(
    x: &FeatureMatrix,
    labels: &LabelList,
    table: &LabelEmbeddingTable,
    hyper: &Hyperparameters,
    kernel: &KernelConfig,
    graph: &GraphConfig,
) -> Result<TrainOutput> {
    labels.check_len(x.n())?;
    let y = assemble_y(labels, table)?;
    let lap = laplacian(&build_similarity(x.values(), graph)?);
    train(x, &y, &lap, hyper, kernel)
}
