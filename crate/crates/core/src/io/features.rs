use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::bytes::{put_lines, put_u32, put_u64, read_file, write_file, ByteReader};
use crate::error::{Result, ZshError};

const FEATURE_MAGIC: &[u8; 4] = b"ZSHF";
const FEATURE_VERSION: u32 = 1;

/// On-disk encodings accepted for feature matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    /// `ZSHF` container with 32-bit floats.
    Binary,
    /// `id,v1,...,vd` per line.
    Csv,
}

impl FeatureFormat {
    /// Picks the format from a file extension: `.csv` is CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

/// A d×n matrix of item features; column `j` describes item `item_ids[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    item_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, item_ids: Vec<String>) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(ZshError::Empty {
                context: "feature matrix".into(),
            });
        }
        if item_ids.len() != values.ncols() {
            return Err(ZshError::Dimension(format!(
                "{} item ids for {} feature columns",
                item_ids.len(),
                values.ncols()
            )));
        }
        for (j, col) in values.column_iter().enumerate() {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(ZshError::NonFinite {
                    context: "feature matrix".into(),
                    row: j + 1,
                    column: i + 1,
                });
            }
        }
        let mut seen = HashSet::with_capacity(item_ids.len());
        for id in &item_ids {
            if !seen.insert(id.as_str()) {
                return Err(ZshError::Duplicate {
                    context: "feature item ids".into(),
                    id: id.clone(),
                });
            }
        }
        Ok(FeatureMatrix { values, item_ids })
    }

    /// Builds a matrix with ids `0..n`, mostly useful for in-memory pipelines.
    pub fn with_index_ids(values: DMatrix<f64>) -> Result<Self> {
        let ids = (0..values.ncols()).map(|j| j.to_string()).collect();
        FeatureMatrix::new(values, ids)
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn d(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// Sub-matrix of the given columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<FeatureMatrix> {
        let values = self.values.select_columns(columns);
        let ids = columns.iter().map(|&j| self.item_ids[j].clone()).collect();
        FeatureMatrix::new(values, ids)
    }
}

pub fn load_features(path: &Path, format: FeatureFormat) -> Result<FeatureMatrix> {
    let bytes = read_file(path)?;
    match format {
        FeatureFormat::Binary => decode_features_binary(&bytes),
        FeatureFormat::Csv => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| ZshError::Format(format!("feature csv is not UTF-8: {e}")))?;
            parse_features_csv(text)
        }
    }
}

pub fn save_features(features: &FeatureMatrix, path: &Path, format: FeatureFormat) -> Result<()> {
    let bytes = match format {
        FeatureFormat::Binary => encode_features_binary(features)?,
        FeatureFormat::Csv => format_features_csv(features)?.into_bytes(),
    };
    write_file(path, &bytes)
}

pub fn parse_features_csv(text: &str) -> Result<FeatureMatrix> {
    const CTX: &str = "feature csv";
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().trim();
        if id.is_empty() {
            return Err(ZshError::Parse {
                context: CTX.into(),
                row,
                message: "empty item id".into(),
            });
        }
        let start = data.len();
        for (column, field) in fields.enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| ZshError::Parse {
                context: CTX.into(),
                row,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(ZshError::NonFinite {
                    context: CTX.into(),
                    row,
                    column: column + 1,
                });
            }
            data.push(v);
        }
        let found = data.len() - start;
        match dim {
            None if found == 0 => {
                return Err(ZshError::Parse {
                    context: CTX.into(),
                    row,
                    message: "row has no feature values".into(),
                })
            }
            None => dim = Some(found),
            Some(expected) if expected != found => {
                return Err(ZshError::RaggedRow {
                    context: CTX.into(),
                    row,
                    expected,
                    found,
                })
            }
            Some(_) => {}
        }
        ids.push(id.to_string());
    }
    let d = dim.ok_or(ZshError::Empty {
        context: CTX.into(),
    })?;
    FeatureMatrix::new(DMatrix::from_vec(d, ids.len(), data), ids)
}

/// CSV rendering; `{:?}` prints the shortest representation that parses back exactly.
pub fn format_features_csv(features: &FeatureMatrix) -> Result<String> {
    let mut out = String::new();
    for (id, col) in features.item_ids.iter().zip(features.values.column_iter()) {
        if id.contains(',') || id.contains('\n') {
            return Err(ZshError::Format(format!("item id {id:?} cannot be written to csv")));
        }
        out.push_str(id);
        for v in col.iter() {
            write!(out, ",{v:?}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Binary container. Values are narrowed to `f32`, as the format prescribes.
pub fn encode_features_binary(features: &FeatureMatrix) -> Result<Vec<u8>> {
    let (d, n) = features.values.shape();
    let mut out = Vec::with_capacity(24 + 4 * n * d);
    out.extend_from_slice(FEATURE_MAGIC);
    put_u32(&mut out, FEATURE_VERSION);
    put_u64(&mut out, n as u64);
    put_u64(&mut out, d as u64);
    // nalgebra storage is column-major, matching the file layout.
    for v in features.values.as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    put_lines(&mut out, &features.item_ids)?;
    Ok(out)
}

pub fn decode_features_binary(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut r = ByteReader::new(bytes, "feature");
    r.magic(FEATURE_MAGIC)?;
    let version = r.u32()?;
    if version != FEATURE_VERSION {
        return Err(ZshError::Version {
            what: "feature file",
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let n = r.usize()?;
    let d = r.usize()?;
    if n == 0 || d == 0 {
        return Err(ZshError::Empty {
            context: "feature file".into(),
        });
    }
    let len = n
        .checked_mul(d)
        .filter(|len| len.checked_mul(4).is_some_and(|b| b <= bytes.len()))
        .ok_or(ZshError::Truncated { what: "feature" })?;
    let mut data = Vec::with_capacity(len);
    for k in 0..len {
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(ZshError::NonFinite {
                context: "feature file".into(),
                row: k / d + 1,
                column: k % d + 1,
            });
        }
        data.push(f64::from(v));
    }
    let ids = r.lines(n)?;
    r.finish()?;
    FeatureMatrix::new(DMatrix::from_vec(d, n, data), ids)
}
