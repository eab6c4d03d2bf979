//! Exact minimizers for each block of the alternating optimizer.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Result, ZshError};
use crate::graph::LaplacianMatrix;

/// Full sweeps over the code rows allowed per `B` update.
pub const DCC_MAX_PASSES: usize = 30;

/// Sign with the tie rule `sgn(0) = +1`.
#[inline]
pub fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Cholesky factor of an SPD system, rejecting numerically singular matrices.
fn spd_factor(
    mut a: DMatrix<f64>,
    block: &'static str,
    hint: &'static str,
) -> Result<Cholesky<f64, Dyn>> {
    let sym = (&a + a.transpose()) * 0.5;
    a.copy_from(&sym);
    let scale = a.diagonal().amax();
    let chol = Cholesky::new(a).ok_or(ZshError::Singular { block, hint })?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v * v));
    let n = chol.l_dirty().nrows() as f64;
    if min_pivot.is_nan() || min_pivot <= scale * n * f64::EPSILON {
        return Err(ZshError::Singular { block, hint });
    }
    Ok(chol)
}

/// Factored system matrix of the `P` update.
///
/// `φφᵀ + (β/α)I + (γ/α)φLφᵀ` does not depend on `B`, so it is factored once
/// per training run.
#[derive(Clone)]
pub struct ProjectionSystem {
    chol: Cholesky<f64, Dyn>,
}

impl ProjectionSystem {
    pub fn new(phi: &DMatrix<f64>, lap: &LaplacianMatrix, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(ZshError::param("alpha", "must be > 0"));
        }
        let m = phi.nrows();
        let mut a = phi * phi.transpose();
        for i in 0..m {
            a[(i, i)] += beta / alpha;
        }
        if gamma != 0.0 {
            let phil = lap.right_multiply(phi)?;
            a += (phil * phi.transpose()) * (gamma / alpha);
        }
        let chol = spd_factor(
            a,
            "P",
            "the kernel Gram system is rank deficient; use beta > 0",
        )?;
        Ok(ProjectionSystem { chol })
    }

    /// `P = A⁻¹ φ Bᵀ`.
    pub fn solve(&self, phi: &DMatrix<f64>, codes: &DMatrix<f64>) -> DMatrix<f64> {
        let rhs = phi * codes.transpose();
        self.chol.solve(&rhs)
    }
}

/// Closed-form `P` minimizing `α‖Pᵀφ − B‖² + β‖P‖² + γ Tr(PᵀφLφᵀP)`.
pub fn update_p(
    phi: &DMatrix<f64>,
    codes: &DMatrix<f64>,
    lap: &LaplacianMatrix,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    if codes.ncols() != phi.ncols() {
        return Err(ZshError::Dimension(format!(
            "B has {} columns, phi has {}",
            codes.ncols(),
            phi.ncols()
        )));
    }
    Ok(ProjectionSystem::new(phi, lap, alpha, beta, gamma)?.solve(phi, codes))
}

/// `H = W Rᵀ Y + α Pᵀφ(X)`, the linear coefficient of the code subproblem.
pub fn code_target(
    w: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DMatrix<f64>,
    hashed: &DMatrix<f64>,
    alpha: f64,
) -> DMatrix<f64> {
    w * r.tr_mul(y) + hashed * alpha
}

#[derive(Debug, Clone, PartialEq)]
pub struct DccOutcome {
    pub codes: DMatrix<f64>,
    /// Full sweeps executed, including the final one that changed nothing.
    pub passes: usize,
    /// True when a sweep changed no bit.
    pub converged: bool,
    pub flips: usize,
}

/// Re-solves bit row `i` of `B` given the others: `q_i = sgn(h_i − B_¬iᵀ W_¬i u_i)`.
///
/// `gram` is `WWᵀ`. Returns the number of flipped bits.
pub fn dcc_row(gram: &DMatrix<f64>, h: &DMatrix<f64>, b: &mut DMatrix<f64>, i: usize) -> usize {
    let l = b.nrows();
    let coupling: Vec<f64> = (0..l).map(|k| if k == i { 0.0 } else { gram[(i, k)] }).collect();
    let mut flips = 0;
    for j in 0..b.ncols() {
        let col = b.column(j);
        let v: f64 = coupling.iter().zip(col.iter()).map(|(g, q)| g * q).sum();
        let q = sgn(h[(i, j)] - v);
        if q != b[(i, j)] {
            b[(i, j)] = q;
            flips += 1;
        }
    }
    flips
}

/// Cyclic discrete coordinate descent on `min ‖WᵀB‖² − 2Tr(BᵀH)` over `B ∈ {±1}`.
pub fn dcc(w: &DMatrix<f64>, h: &DMatrix<f64>, b_init: &DMatrix<f64>, max_passes: usize) -> Result<DccOutcome> {
    if h.shape() != b_init.shape() || w.nrows() != b_init.nrows() {
        return Err(ZshError::Dimension(format!(
            "DCC with W {}x{}, H {}x{}, B {}x{}",
            w.nrows(),
            w.ncols(),
            h.nrows(),
            h.ncols(),
            b_init.nrows(),
            b_init.ncols()
        )));
    }
    if b_init.iter().any(|v| *v != 1.0 && *v != -1.0) {
        return Err(ZshError::param("B", "initial codes must be +1/-1"));
    }
    let gram = w * w.transpose();
    let mut b = b_init.clone();
    let mut passes = 0;
    let mut flips = 0;
    let mut converged = false;
    while passes < max_passes {
        passes += 1;
        let changed: usize = (0..b.nrows()).map(|i| dcc_row(&gram, h, &mut b, i)).sum();
        flips += changed;
        if changed == 0 {
            converged = true;
            break;
        }
    }
    Ok(DccOutcome {
        codes: b,
        passes,
        converged,
        flips,
    })
}

/// Code update: builds `H` and runs [`dcc`] with the default pass cap.
pub fn update_b(
    w: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DMatrix<f64>,
    p: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    alpha: f64,
    b_init: &DMatrix<f64>,
) -> Result<DccOutcome> {
    let hashed = p.tr_mul(phi);
    let h = code_target(w, r, y, &hashed, alpha);
    dcc(w, &h, b_init, DCC_MAX_PASSES)
}

/// Orthogonal `R` minimizing `‖RᵀY − WᵀB‖²`: with `Y(WᵀB)ᵀ = UΣVᵀ`, `R = UVᵀ`.
pub fn update_r(y: &DMatrix<f64>, w: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let target = w.tr_mul(b);
    if target.shape() != y.shape() {
        return Err(ZshError::Dimension(format!(
            "WᵀB is {}x{} but Y is {}x{}",
            target.nrows(),
            target.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    procrustes(&(y * target.transpose()))
}

const SVD_MAX_ITERS: usize = 10_000;

/// `(U, Vᵀ)` of `c`, accepted only if the factors are orthonormal and reconstruct `c`.
fn checked_svd(c: &DMatrix<f64>, eps: f64) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let svd = c.clone().try_svd(true, true, eps, SVD_MAX_ITERS)?;
    let (u, v_t) = (svd.u?, svd.v_t?);
    let n = c.nrows();
    let tol = 1e-8 * (1.0 + c.amax());
    let recon = &u * DMatrix::from_diagonal(&svd.singular_values) * &v_t;
    let eye = DMatrix::<f64>::identity(n, n);
    let ok = (recon - c).amax() <= tol
        && (u.tr_mul(&u) - &eye).amax() <= 1e-10
        && (&v_t * v_t.transpose() - &eye).amax() <= 1e-10;
    ok.then_some((u, v_t))
}

/// Orthogonal polar factor `UVᵀ` of a square matrix.
///
/// The SVD routine occasionally returns an inaccurate factorization for
/// rank-deficient input, so a fixed sequence of orientations and thresholds
/// is tried and the first verified result is used.
pub fn procrustes(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    for eps in [5.0 * f64::EPSILON, 1e-12] {
        if let Some((u, v_t)) = checked_svd(c, eps) {
            return Ok(u * v_t);
        }
        // cᵀ = V Σ Uᵀ
        if let Some((v, u_t)) = checked_svd(&c.transpose(), eps) {
            return Ok(u_t.transpose() * v.transpose());
        }
    }
    Err(ZshError::Singular {
        block: "R",
        hint: "SVD did not produce an accurate factorization",
    })
}

/// Ridge solution `W = (BBᵀ + λI)⁻¹ B Yᵀ R`.
pub fn update_w(b: &DMatrix<f64>, y: &DMatrix<f64>, r: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if b.ncols() != y.ncols() || r.nrows() != y.nrows() {
        return Err(ZshError::Dimension(format!(
            "W update with B {}x{}, Y {}x{}, R {}x{}",
            b.nrows(),
            b.ncols(),
            y.nrows(),
            y.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    let l = b.nrows();
    let mut a = b * b.transpose();
    for i in 0..l {
        a[(i, i)] += lambda;
    }
    let chol = spd_factor(a, "W", "BBᵀ is singular; use lambda > 0")?;
    Ok(chol.solve(&(b * y.transpose() * r)))
}
