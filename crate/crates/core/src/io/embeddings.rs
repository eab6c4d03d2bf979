use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::labels::{read_text, LabelList};
use crate::error::{Result, ZshError};

/// Unit-norm semantic vectors keyed by label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, DVector<f64>>,
}

impl LabelEmbeddingTable {
    /// Builds a table, scaling every vector to unit Euclidean norm.
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut dim = None;
        let mut map = BTreeMap::new();
        for (row, (token, values)) in entries.into_iter().enumerate() {
            match dim {
                None if values.is_empty() => {
                    return Err(ZshError::param("embeddings", "zero-dimensional vector"))
                }
                None => dim = Some(values.len()),
                Some(e) if e != values.len() => {
                    return Err(ZshError::RaggedRow {
                        context: "embedding table".into(),
                        row: row + 1,
                        expected: e,
                        found: values.len(),
                    })
                }
                Some(_) => {}
            }
            let v = normalize(&token, DVector::from_vec(values))?;
            if map.insert(token.clone(), v).is_some() {
                return Err(ZshError::Duplicate {
                    context: "embedding tokens".into(),
                    id: token,
                });
            }
        }
        let dim = dim.ok_or(ZshError::Empty {
            context: "embedding table".into(),
        })?;
        Ok(LabelEmbeddingTable { dim, entries: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&DVector<f64>> {
        self.entries.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &DVector<f64>)> {
        self.entries.iter()
    }
}

fn normalize(token: &str, v: DVector<f64>) -> Result<DVector<f64>> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(ZshError::NonFinite {
            context: format!("embedding {token:?}"),
            row: 1,
            column: i + 1,
        });
    }
    let norm = v.norm();
    if norm == 0.0 {
        return Err(ZshError::ZeroVector {
            token: token.to_string(),
        });
    }
    Ok(v / norm)
}

/// Parses a word2vec text table: a `vocab_count dim` header, then `token v1 ... ve` lines.
pub fn parse_embeddings(text: &str) -> Result<LabelEmbeddingTable> {
    const CTX: &str = "embedding file";
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(ZshError::Empty {
        context: CTX.into(),
    })?;
    let header: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| {
        s.parse::<usize>().map_err(|_| ZshError::Parse {
            context: CTX.into(),
            row: 1,
            message: format!("bad header field {s:?}"),
        })
    };
    let [count, dim] = header[..] else {
        return Err(ZshError::Parse {
            context: CTX.into(),
            row: 1,
            message: "header must be `vocab_count dim`".into(),
        });
    };
    let (count, dim) = (parse_usize(count)?, parse_usize(dim)?);

    let mut entries = Vec::with_capacity(count);
    for (idx, line) in lines {
        let row = idx + 1;
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| ZshError::Parse {
                    context: CTX.into(),
                    row,
                    message: format!("cannot parse {f:?} as a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(ZshError::RaggedRow {
                context: CTX.into(),
                row,
                expected: dim,
                found: values.len(),
            });
        }
        entries.push((token, values));
    }
    if entries.len() != count {
        return Err(ZshError::Format(format!(
            "embedding header declares {count} entries, file has {}",
            entries.len()
        )));
    }
    LabelEmbeddingTable::new(entries)
}

pub fn load_embeddings(path: &Path) -> Result<LabelEmbeddingTable> {
    parse_embeddings(&read_text(path)?)
}

pub fn format_embeddings(table: &LabelEmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (token, v) in table.iter() {
        out.push_str(token);
        for x in v.iter() {
            out.push_str(&format!(" {x:?}"));
        }
        out.push('\n');
    }
    out
}

/// Stacks the embedding of each item's label into an e×n matrix.
pub fn assemble_y(labels: &LabelList, table: &LabelEmbeddingTable) -> Result<DMatrix<f64>> {
    let labels = labels.single()?;
    let mut missing: Vec<String> = Vec::new();
    for l in labels {
        if table.get(l).is_none() && !missing.contains(l) {
            missing.push(l.clone());
        }
    }
    if !missing.is_empty() {
        return Err(ZshError::MissingLabels { labels: missing });
    }
    let mut y = DMatrix::zeros(table.dim(), labels.len());
    for (j, l) in labels.iter().enumerate() {
        y.set_column(j, table.get(l).expect("checked above"));
    }
    Ok(y)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ZshError::Dimension(format!(
            "cosine of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(ZshError::param("vector", "cosine similarity of a zero vector"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_normalized() {
        let t = parse_embeddings("1 2\ncat 3.0 4.0\n").unwrap();
        let v = t.get("cat").unwrap();
        assert_eq!(v.as_slice(), &[0.6, 0.8]);
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(matches!(
            parse_embeddings("1 2\ndog 0.0 0.0\n"),
            Err(ZshError::ZeroVector { token }) if token == "dog"
        ));
    }

    #[test]
    fn ragged_and_duplicate_rejected() {
        assert!(matches!(
            parse_embeddings("2 2\na 1 0\nb 1 0 0\n"),
            Err(ZshError::RaggedRow { row: 3, expected: 2, found: 3, .. })
        ));
        assert!(matches!(
            LabelEmbeddingTable::new(vec![("a".into(), vec![1.0, 0.0]), ("b".into(), vec![1.0, 0.0, 0.0])]),
            Err(ZshError::RaggedRow { .. })
        ));
        assert!(matches!(
            parse_embeddings("2 2\na 1 0\na 0 1\n"),
            Err(ZshError::Duplicate { .. })
        ));
        assert!(matches!(parse_embeddings("3 2\na 1 0\n"), Err(ZshError::Format(_))));
    }

    #[test]
    fn assemble_looks_up_columns() {
        let t = parse_embeddings("2 2\ncat 3 4\ndog 0 2\n").unwrap();
        let labels = LabelList::Single(vec!["cat".into(), "cat".into(), "dog".into()]);
        let y = assemble_y(&labels, &t).unwrap();
        assert_eq!(y.shape(), (2, 3));
        assert_eq!(y.column(0), y.column(1));
        assert_eq!(y.column(2).as_slice(), &[0.0, 1.0]);
        for c in y.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn assemble_single_item() {
        let t = parse_embeddings("1 3\nu 0 0 1\n").unwrap();
        let y = assemble_y(&LabelList::Single(vec!["u".into()]), &t).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn assemble_lists_every_missing_label() {
        let t = parse_embeddings("1 2\ncat 1 0\n").unwrap();
        let labels = LabelList::Single(vec!["bird".into(), "cat".into(), "Cat".into(), "bird".into()]);
        match assemble_y(&labels, &t) {
            Err(ZshError::MissingLabels { labels }) => assert_eq!(labels, vec!["bird", "Cat"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        // 0.6*0.8 + 0.8*0.6
        let c = cosine_similarity(&[0.6, 0.8], &[0.8, 0.6]).unwrap();
        assert!((c - 0.96).abs() < 1e-15);
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn normalizing_unit_table_is_idempotent() {
        let t = parse_embeddings("2 3\na 1 2 3\nb -0.3 0.1 7\n").unwrap();
        let again = LabelEmbeddingTable::new(t.iter().map(|(k, v)| (k.clone(), v.as_slice().to_vec()))).unwrap();
        for (k, v) in t.iter() {
            let w = again.get(k).unwrap();
            assert!((v - w).amax() <= 1e-15);
        }
    }
}
