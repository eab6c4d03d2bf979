use nalgebra::DMatrix;
use serde::Serialize;

use super::Hyperparameters;
use crate::error::{Result, ZshError};
use crate::graph::LaplacianMatrix;

/// The five weighted terms of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    /// `‖RᵀY − WᵀB‖²`
    pub semantic_fit: f64,
    /// `λ‖W‖²`
    pub map_ridge: f64,
    /// `α‖Pᵀφ(X) − B‖²`
    pub code_fit: f64,
    /// `β‖P‖²`
    pub projection_ridge: f64,
    /// `γ Tr(Pᵀφ(X) L φ(X)ᵀP)`
    pub local_structure: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.semantic_fit + self.map_ridge + self.code_fit + self.projection_ridge + self.local_structure
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.semantic_fit,
            self.map_ridge,
            self.code_fit,
            self.projection_ridge,
            self.local_structure,
        ]
    }
}

/// Borrowed view of every variable the objective depends on.
#[derive(Debug, Clone, Copy)]
pub struct Variables<'a> {
    /// m×l
    pub projection: &'a DMatrix<f64>,
    /// l×e
    pub semantic_map: &'a DMatrix<f64>,
    /// e×e
    pub rotation: &'a DMatrix<f64>,
    /// l×n, entries ±1
    pub codes: &'a DMatrix<f64>,
}

pub(crate) fn check_dims(
    vars: &Variables<'_>,
    phi: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lap: &LaplacianMatrix,
) -> Result<()> {
    let (m, n) = phi.shape();
    let e = y.nrows();
    let l = vars.codes.nrows();
    let checks = [
        ("P", vars.projection.shape(), (m, l)),
        ("W", vars.semantic_map.shape(), (l, e)),
        ("R", vars.rotation.shape(), (e, e)),
        ("B", vars.codes.shape(), (l, n)),
        ("Y", y.shape(), (e, n)),
        ("L", (lap.n(), lap.n()), (n, n)),
    ];
    for (name, got, want) in checks {
        if got != want {
            return Err(ZshError::Dimension(format!(
                "{name} is {}x{}, expected {}x{}",
                got.0, got.1, want.0, want.1
            )));
        }
    }
    Ok(())
}

/// Evaluates the objective; `hashed` must equal `Pᵀφ(X)`.
pub(crate) fn terms_with_hashed(
    vars: &Variables<'_>,
    hashed: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lap: &LaplacianMatrix,
    hyper: &Hyperparameters,
) -> Result<ObjectiveTerms> {
    let residual = vars.rotation.tr_mul(y) - vars.semantic_map.tr_mul(vars.codes);
    let terms = ObjectiveTerms {
        semantic_fit: residual.norm_squared(),
        map_ridge: hyper.lambda * vars.semantic_map.norm_squared(),
        code_fit: hyper.alpha * (hashed - vars.codes).norm_squared(),
        projection_ridge: hyper.beta * vars.projection.norm_squared(),
        local_structure: hyper.gamma * lap.trace_form(hashed)?,
    };
    Ok(terms)
}

/// Full objective value of `vars` on kernel features `phi` (m×n), embeddings `y` (e×n).
pub fn objective_terms(
    vars: &Variables<'_>,
    phi: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lap: &LaplacianMatrix,
    hyper: &Hyperparameters,
) -> Result<ObjectiveTerms> {
    check_dims(vars, phi, y, lap)?;
    let hashed = vars.projection.tr_mul(phi);
    let terms = terms_with_hashed(vars, &hashed, y, lap, hyper)?;
    if !terms.total().is_finite() {
        return Err(ZshError::NonFiniteObjective { block: "objective" });
    }
    Ok(terms)
}

/// `‖WᵀB‖² − 2 Tr(BᵀH)`, the part of the objective that varies with `B`.
pub fn reduced_code_objective(w: &DMatrix<f64>, b: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    w.tr_mul(b).norm_squared() - 2.0 * b.dot(h)
}
