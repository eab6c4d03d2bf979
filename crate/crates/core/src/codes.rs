//! Hash encoding, bit packing and Hamming distance.
//!
//! Bit `j` of a code lives in bit `j % 64` of word `j / 64`; `+1` is stored
//! as a set bit. Padding bits above `l` are always zero so distances can be
//! computed word by word.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Result, ZshError};
use crate::featurize::kernel_map;
use crate::io::bytes::{put_lines, put_u32, put_u64, read_file, write_file, ByteReader};
use crate::io::{FeatureMatrix, LabelList};
use crate::train::ZshModel;

const CODE_MAGIC: &[u8; 4] = b"ZSHC";
const CODE_VERSION: u32 = 1;

pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bits: usize,
    words: Vec<u64>,
}

impl BinaryCode {
    /// Packs booleans, `true` meaning `+1`.
    pub fn pack(bits: &[bool]) -> Self {
        let mut words = vec![0u64; words_for(bits.len())];
        for (j, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            words[j / 64] |= 1 << (j % 64);
        }
        BinaryCode {
            bits: bits.len(),
            words,
        }
    }

    /// Packs real values with the `≥ 0 → +1` rule.
    pub fn from_signs<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let bools: Vec<bool> = values.into_iter().map(|v| *v >= 0.0).collect();
        BinaryCode::pack(&bools)
    }

    pub fn from_words(bits: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(bits) {
            return Err(ZshError::Dimension(format!(
                "{} words cannot hold exactly {bits} bits",
                words.len()
            )));
        }
        if !bits.is_multiple_of(64) {
            if let Some(last) = words.last() {
                if last >> (bits % 64) != 0 {
                    return Err(ZshError::Format("non-zero padding bits in code".into()));
                }
            }
        }
        Ok(BinaryCode { bits, words })
    }

    pub fn unpack(&self) -> Vec<bool> {
        (0..self.bits).map(|j| self.bit(j)).collect()
    }

    pub fn bit(&self, j: usize) -> bool {
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    /// `±1` view of the code.
    pub fn signs(&self) -> Vec<f64> {
        (0..self.bits).map(|j| if self.bit(j) { 1.0 } else { -1.0 }).collect()
    }

    pub fn len(&self) -> usize {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn complement(&self) -> BinaryCode {
        let bools: Vec<bool> = self.unpack().into_iter().map(|b| !b).collect();
        BinaryCode::pack(&bools)
    }
}

#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

pub fn hamming(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.bits != b.bits {
        return Err(ZshError::Dimension(format!(
            "hamming distance between {}-bit and {}-bit codes",
            a.bits, b.bits
        )));
    }
    Ok(hamming_words(&a.words, &b.words))
}

/// Hash values `Pᵀφ(x)` of a single item.
pub fn hash_item(x: &[f64], model: &ZshModel) -> Result<DVector<f64>> {
    let phi = kernel_map(x, &model.anchors)?;
    Ok(model.projection.tr_mul(&phi))
}

pub fn encode(x: &[f64], model: &ZshModel) -> Result<BinaryCode> {
    Ok(BinaryCode::from_signs(hash_item(x, model)?.iter()))
}

/// Packed codes for a set of items, with ids and optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeDatabase {
    bits: usize,
    stride: usize,
    words: Vec<u64>,
    ids: Vec<String>,
    labels: Option<LabelList>,
}

impl CodeDatabase {
    pub fn new(bits: usize, codes: Vec<BinaryCode>, ids: Vec<String>, labels: Option<LabelList>) -> Result<Self> {
        if bits == 0 {
            return Err(ZshError::param("bits", "code length must be >= 1"));
        }
        if codes.len() != ids.len() {
            return Err(ZshError::Dimension(format!("{} codes but {} ids", codes.len(), ids.len())));
        }
        if let Some(l) = &labels {
            l.check_len(codes.len())?;
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(ZshError::Duplicate {
                    context: "code database ids".into(),
                    id: id.clone(),
                });
            }
        }
        let stride = words_for(bits);
        let mut words = Vec::with_capacity(stride * codes.len());
        for c in &codes {
            if c.bits != bits {
                return Err(ZshError::Dimension(format!("{}-bit code in a {bits}-bit database", c.bits)));
            }
            words.extend_from_slice(&c.words);
        }
        Ok(CodeDatabase {
            bits,
            stride,
            words,
            ids,
            labels,
        })
    }

    /// Database of the columns of a `±1` matrix (e.g. training codes `B`).
    pub fn from_sign_matrix(codes: &DMatrix<f64>, ids: Vec<String>, labels: Option<LabelList>) -> Result<Self> {
        let packed = codes.column_iter().map(|c| BinaryCode::from_signs(c.iter())).collect();
        CodeDatabase::new(codes.nrows(), packed, ids, labels)
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&LabelList> {
        self.labels.as_ref()
    }

    /// Labels, or an error explaining that labelled evaluation needs them.
    pub fn require_labels(&self) -> Result<&LabelList> {
        self.labels
            .as_ref()
            .ok_or_else(|| ZshError::param("labels", "code database carries no labels; re-encode with --labels"))
    }

    pub fn words(&self, j: usize) -> &[u64] {
        &self.words[j * self.stride..(j + 1) * self.stride]
    }

    pub fn code(&self, j: usize) -> BinaryCode {
        BinaryCode {
            bits: self.bits,
            words: self.words(j).to_vec(),
        }
    }

    pub fn select(&self, indices: &[usize]) -> Result<CodeDatabase> {
        CodeDatabase::new(
            self.bits,
            indices.iter().map(|&j| self.code(j)).collect(),
            indices.iter().map(|&j| self.ids[j].clone()).collect(),
            self.labels.as_ref().map(|l| l.select(indices)),
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(24 + 8 * self.words.len());
        out.extend_from_slice(CODE_MAGIC);
        put_u32(&mut out, CODE_VERSION);
        put_u64(&mut out, self.len() as u64);
        let bits = u32::try_from(self.bits).map_err(|_| ZshError::param("bits", "too many bits for the code file"))?;
        put_u32(&mut out, bits);
        for w in &self.words {
            put_u64(&mut out, *w);
        }
        put_lines(&mut out, &self.ids)?;
        match &self.labels {
            None => out.push(0),
            Some(LabelList::Single(v)) => {
                out.push(1);
                put_lines(&mut out, v)?;
            }
            Some(LabelList::Multi(v)) => {
                out.push(2);
                let joined: Vec<String> = v.iter().map(|t| t.join(",")).collect();
                put_lines(&mut out, &joined)?;
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<CodeDatabase> {
        let mut r = ByteReader::new(bytes, "code");
        r.magic(CODE_MAGIC)?;
        let version = r.u32()?;
        if version != CODE_VERSION {
            return Err(ZshError::Version {
                what: "code file",
                found: version,
                expected: CODE_VERSION,
            });
        }
        let n = r.usize()?;
        let bits = r.u32()? as usize;
        let stride = words_for(bits);
        if n.checked_mul(stride).and_then(|w| w.checked_mul(8)).is_none_or(|b| b > bytes.len()) {
            return Err(ZshError::Truncated { what: "code" });
        }
        let mut codes = Vec::with_capacity(n);
        for _ in 0..n {
            let words = (0..stride).map(|_| r.u64()).collect::<Result<Vec<u64>>>()?;
            codes.push(BinaryCode::from_words(bits, words)?);
        }
        let ids = r.lines(n)?;
        let labels = match r.u8()? {
            0 => None,
            1 => Some(LabelList::Single(r.lines(n)?)),
            2 => Some(LabelList::Multi(
                r.lines(n)?
                    .into_iter()
                    .map(|l| l.split(',').filter(|t| !t.is_empty()).map(str::to_string).collect())
                    .collect(),
            )),
            other => return Err(ZshError::Format(format!("unknown label block tag {other}"))),
        };
        r.finish()?;
        CodeDatabase::new(bits, codes, ids, labels)
    }
}

/// Encodes every column of `x` with `model`, preserving order.
pub fn encode_database(x: &FeatureMatrix, model: &ZshModel, labels: Option<LabelList>) -> Result<CodeDatabase> {
    if x.d() != model.feature_dim() {
        return Err(ZshError::Dimension(format!(
            "features have dimension {}, model expects {}",
            x.d(),
            model.feature_dim()
        )));
    }
    let codes = (0..x.n())
        .into_par_iter()
        .map(|j| encode(x.values().column(j).as_slice(), model))
        .collect::<Result<Vec<_>>>()?;
    CodeDatabase::new(model.bits(), codes, x.item_ids().to_vec(), labels)
}

pub fn save_codes(db: &CodeDatabase, path: &Path) -> Result<()> {
    write_file(path, &db.to_bytes()?)
}

pub fn load_codes(path: &Path) -> Result<CodeDatabase> {
    CodeDatabase::from_bytes(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_is_canonical() {
        let c = BinaryCode::pack(&[true; 70]);
        assert_eq!(c.words(), &[u64::MAX, 0b11_1111]);
        assert!(BinaryCode::from_words(70, vec![0, 1 << 6]).is_err());
        assert!(BinaryCode::from_words(70, vec![0]).is_err());
    }

    #[test]
    fn distance_extremes() {
        let bits: Vec<bool> = (0..130).map(|j| j % 3 == 0).collect();
        let a = BinaryCode::pack(&bits);
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        assert_eq!(hamming(&a, &a.complement()).unwrap(), 130);
        assert!(hamming(&a, &BinaryCode::pack(&[true; 64])).is_err());
    }

    #[test]
    fn sign_rule() {
        let c = BinaryCode::from_signs(&[0.0, -0.0, -1e-9, 2.0]);
        assert_eq!(c.unpack(), vec![true, true, false, true]);
        assert_eq!(c.signs(), vec![1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn file_round_trip_with_labels() {
        let codes: Vec<BinaryCode> = (0..5)
            .map(|i| BinaryCode::pack(&(0..70).map(|j| (i * j) % 4 == 1).collect::<Vec<_>>()))
            .collect();
        let ids: Vec<String> = (0..5).map(|i| format!("item{i}")).collect();
        for labels in [
            None,
            Some(LabelList::Single((0..5).map(|i| format!("c{}", i % 2)).collect())),
            Some(LabelList::Multi((0..5).map(|i| vec![format!("t{i}"), "sky".into()]).collect())),
        ] {
            let db = CodeDatabase::new(70, codes.clone(), ids.clone(), labels).unwrap();
            let bytes = db.to_bytes().unwrap();
            let back = CodeDatabase::from_bytes(&bytes).unwrap();
            assert_eq!(back, db);
            assert!(CodeDatabase::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        }
    }

    #[test]
    fn unlabelled_database_rejects_labelled_use() {
        let db = CodeDatabase::new(8, vec![BinaryCode::pack(&[true; 8])], vec!["a".into()], None).unwrap();
        assert!(db.require_labels().is_err());
    }
}
