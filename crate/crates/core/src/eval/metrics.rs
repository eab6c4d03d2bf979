//! Retrieval metrics.
//!
//! `MAP_related` follows its published definition literally: the mean over
//! cutoffs `i = 1..K` of `n_related(i) / i`. Unlike average precision it
//! rewards related items at every cutoff, not only at the ranks where they
//! occur.

use std::collections::HashSet;

use serde::Serialize;

use super::search::RankedRetrieval;
use crate::error::{Result, ZshError};
use crate::io::RelatedPairs;

/// Normalizer of average precision at K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ApDenominator {
    /// `min(|relevant|, K)`
    #[default]
    Relevant,
    /// Number of relevant items inside the top K.
    Retrieved,
}

impl std::str::FromStr for ApDenominator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "relevant" => Ok(ApDenominator::Relevant),
            "retrieved" => Ok(ApDenominator::Retrieved),
            other => Err(format!("unknown AP denominator {other:?} (expected relevant|retrieved)")),
        }
    }
}

/// AP@K of one ranked relevance sequence; `total_relevant` counts every relevant database item.
pub fn average_precision(
    ranked: impl IntoIterator<Item = bool>,
    total_relevant: usize,
    k: usize,
    denominator: ApDenominator,
) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, rel) in ranked.into_iter().take(k).enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    let denom = match denominator {
        ApDenominator::Relevant => total_relevant.min(k),
        ApDenominator::Retrieved => hits,
    };
    if denom == 0 {
        0.0
    } else {
        sum / denom as f64
    }
}

/// Fraction of retrieved items that are relevant; 0 when nothing was retrieved.
pub fn radius_precision(retrieved: impl IntoIterator<Item = bool>) -> f64 {
    let (mut n, mut hits) = (0usize, 0usize);
    for rel in retrieved {
        n += 1;
        hits += rel as usize;
    }
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

/// `(1/K) Σ_{i≤K} n_related(i) / i`, with K clipped to the ranking length.
pub fn related_average_precision(ranked: impl IntoIterator<Item = bool>, k: usize) -> f64 {
    let mut related = 0usize;
    let mut sum = 0.0;
    let mut cutoffs = 0usize;
    for (i, rel) in ranked.into_iter().take(k).enumerate() {
        related += rel as usize;
        sum += related as f64 / (i + 1) as f64;
        cutoffs += 1;
    }
    if cutoffs == 0 {
        0.0
    } else {
        sum / cutoffs as f64
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut n, mut total) = (0usize, 0.0);
    for v in values {
        n += 1;
        total += v;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

fn check_queries(a: usize, b: usize) -> Result<()> {
    if a == 0 {
        return Err(ZshError::param("queries", "empty query set"));
    }
    if a != b {
        return Err(ZshError::Dimension(format!("{a} rankings but {b} relevance sets")));
    }
    Ok(())
}

/// Mean AP@K over queries.
pub fn map_at_k(
    rankings: &[RankedRetrieval],
    relevant: &[HashSet<usize>],
    k: usize,
    denominator: ApDenominator,
) -> Result<f64> {
    check_queries(rankings.len(), relevant.len())?;
    if k == 0 {
        return Err(ZshError::param("k", "must be >= 1"));
    }
    Ok(mean(rankings.iter().zip(relevant).map(|(r, rel)| {
        average_precision(r.indices().map(|j| rel.contains(&j)), rel.len(), k, denominator)
    })))
}

/// Mean precision of the items retrieved within a Hamming radius.
pub fn precision_at_radius(retrieved: &[Vec<usize>], relevant: &[HashSet<usize>]) -> f64 {
    mean(
        retrieved
            .iter()
            .zip(relevant)
            .map(|(items, rel)| radius_precision(items.iter().map(|j| rel.contains(j)))),
    )
}

/// Whether a database item labelled `item` counts as related to a query labelled `query`.
pub fn is_related(related: &RelatedPairs, query: &str, item: &str) -> bool {
    query != item && related.is_related(query, item)
}

pub fn map_related(
    rankings: &[RankedRetrieval],
    query_labels: &[String],
    db_labels: &[String],
    related: &RelatedPairs,
    k: usize,
) -> Result<f64> {
    check_queries(rankings.len(), query_labels.len())?;
    Ok(mean(rankings.iter().zip(query_labels).map(|(r, q)| {
        if !related.mentions(q) {
            log::warn!("query label {q:?} appears in no related pair");
        }
        related_average_precision(r.indices().map(|j| is_related(related, q, &db_labels[j])), k)
    })))
}

pub fn precision_related(
    retrieved: &[Vec<usize>],
    query_labels: &[String],
    db_labels: &[String],
    related: &RelatedPairs,
) -> f64 {
    mean(
        retrieved
            .iter()
            .zip(query_labels)
            .map(|(items, q)| radius_precision(items.iter().map(|&j| is_related(related, q, &db_labels[j])))),
    )
}

/// Items sharing at least `min_shared` tags with the query.
pub fn shared_tag_relevance(query_tags: &[String], db_tags: &[Vec<String>], min_shared: usize) -> HashSet<usize> {
    db_tags
        .iter()
        .enumerate()
        .filter(|(_, tags)| shared_tags(query_tags, tags) >= min_shared)
        .map(|(j, _)| j)
        .collect()
}

pub(crate) fn shared_tags(a: &[String], b: &[String]) -> usize {
    let a: HashSet<&String> = a.iter().collect();
    b.iter().collect::<HashSet<_>>().into_iter().filter(|t| a.contains(t)).count()
}
