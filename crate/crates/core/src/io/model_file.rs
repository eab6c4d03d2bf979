use std::path::Path;

use nalgebra::DMatrix;

use super::bytes::{put_f64, put_u32, put_u64, read_file, write_file, ByteReader};
use crate::error::{Result, ZshError};
use crate::featurize::AnchorSet;
use crate::train::{Hyperparameters, ZshModel};

const MODEL_MAGIC: &[u8; 4] = b"ZSHM";
const MODEL_VERSION: u32 = 1;

/// Serializes a model.
///
/// Layout (little-endian): magic, u32 version, u64 m, l, e, d, then the f64
/// matrices P (m×l), W (l×e), R (e×e) and the anchors (d×m), all
/// column-major, then δ, λ, α, β, γ, tol as f64 and max_iters, seed,
/// anchor seed as u64.
pub fn model_to_bytes(model: &ZshModel) -> Vec<u8> {
    let (m, l, e, d) = (model.anchors.m(), model.bits(), model.embedding_dim(), model.feature_dim());
    let mut out = Vec::with_capacity(36 + 8 * (m * l + l * e + e * e + d * m + 9));
    out.extend_from_slice(MODEL_MAGIC);
    put_u32(&mut out, MODEL_VERSION);
    for dim in [m, l, e, d] {
        put_u64(&mut out, dim as u64);
    }
    for mat in [&model.projection, &model.semantic_map, &model.rotation, model.anchors.anchors()] {
        for v in mat.as_slice() {
            put_f64(&mut out, *v);
        }
    }
    let h = &model.hyper;
    for v in [model.anchors.delta(), h.lambda, h.alpha, h.beta, h.gamma, h.tol] {
        put_f64(&mut out, v);
    }
    put_u64(&mut out, h.max_iters as u64);
    put_u64(&mut out, h.seed);
    put_u64(&mut out, model.anchors.seed());
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ZshModel> {
    let mut r = ByteReader::new(bytes, "model");
    r.magic(MODEL_MAGIC)?;
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(ZshError::Version {
            what: "model file",
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let (m, l, e, d) = (r.usize()?, r.usize()?, r.usize()?, r.usize()?);
    let fits = [(m, l), (l, e), (e, e), (d, m)]
        .iter()
        .try_fold(0usize, |acc, (a, b)| a.checked_mul(*b).and_then(|p| acc.checked_add(p)))
        .and_then(|t| t.checked_mul(8))
        .is_some_and(|b| b <= bytes.len());
    if !fits {
        return Err(ZshError::Truncated { what: "model" });
    }
    let mut matrix = |rows: usize, cols: usize| -> Result<DMatrix<f64>> {
        let data = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?;
        Ok(DMatrix::from_vec(rows, cols, data))
    };
    let projection = matrix(m, l)?;
    let semantic_map = matrix(l, e)?;
    let rotation = matrix(e, e)?;
    let anchors = matrix(d, m)?;
    let delta = r.f64()?;
    let (lambda, alpha, beta, gamma, tol) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?, r.f64()?);
    let max_iters = r.usize()?;
    let seed = r.u64()?;
    let anchor_seed = r.u64()?;
    r.finish()?;
    let hyper = Hyperparameters {
        lambda,
        alpha,
        beta,
        gamma,
        bits: l,
        max_iters,
        tol,
        seed,
    };
    ZshModel::new(AnchorSet::new(anchors, delta, anchor_seed)?, projection, semantic_map, rotation, hyper)
}

pub fn save_model(model: &ZshModel, path: &Path) -> Result<()> {
    write_file(path, &model_to_bytes(model))
}

pub fn load_model(path: &Path) -> Result<ZshModel> {
    model_from_bytes(&read_file(path)?)
}
