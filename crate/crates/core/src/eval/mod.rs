//! Hamming-space retrieval, metrics and the zero-shot experimental protocol.

mod metrics;
mod protocol;
mod search;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

pub use metrics::{
    average_precision, is_related, map_at_k, map_related, precision_at_radius, precision_related, radius_precision,
    related_average_precision, shared_tag_relevance, ApDenominator,
};
pub use protocol::{
    run_sweep, run_zeroshot_experiment, sweep_csv, DbComposition, ExperimentResult, ProtocolOptions, Sweep,
    SweepRow,
};
pub use search::{distances, search_radius, search_topk, Hit, RankedRetrieval};

use crate::codes::{hamming_words, CodeDatabase};
use crate::error::{Result, ZshError};
use crate::io::{LabelList, RelatedPairs};

/// How ground-truth relevance is decided for a query/item pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relevance {
    /// Identical single label.
    SameLabel,
    /// At least this many shared tags (multi-label data).
    SharedTags(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalOptions {
    /// Ranking depth for MAP@K and MAP_related.
    pub k: usize,
    /// Hamming radius for the precision metrics.
    pub radius: u32,
    pub ap_denominator: ApDenominator,
    pub relevance: Relevance,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            k: 5000,
            radius: 2,
            ap_denominator: ApDenominator::Relevant,
            relevance: Relevance::SameLabel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ap: f64,
    pub precision: f64,
    pub retrieved_within_radius: usize,
    pub relevant_in_db: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_related: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_related: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub k: usize,
    pub radius: u32,
    pub map_at_k: f64,
    pub precision_at_radius: f64,
    pub map_related: Option<f64>,
    pub precision_related: Option<f64>,
    pub per_query: Vec<QueryMetrics>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    summary: bool,
    queries: usize,
    k: usize,
    radius: u32,
    map_at_k: f64,
    precision_at_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    map_related: &'a Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    precision_related: &'a Option<f64>,
}

impl MetricReport {
    /// One JSON object per query followed by a summary object.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for q in &self.per_query {
            out.push_str(&serde_json::to_string(q).expect("plain data serializes"));
            out.push('\n');
        }
        let summary = SummaryRow {
            summary: true,
            queries: self.per_query.len(),
            k: self.k,
            radius: self.radius,
            map_at_k: self.map_at_k,
            precision_at_radius: self.precision_at_radius,
            map_related: &self.map_related,
            precision_related: &self.precision_related,
        };
        out.push_str(&serde_json::to_string(&summary).expect("plain data serializes"));
        out.push('\n');
        out
    }
}

fn ordered_mean(values: impl Iterator<Item = f64>) -> f64 {
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

/// Scores every query code against `db`.
///
/// Both databases must carry labels. Related-category metrics are computed
/// when `related` is given (single-label data only).
pub fn evaluate(
    db: &CodeDatabase,
    queries: &CodeDatabase,
    options: &EvalOptions,
    related: Option<&RelatedPairs>,
) -> Result<MetricReport> {
    if queries.is_empty() {
        return Err(ZshError::param("queries", "empty query set"));
    }
    if options.k == 0 {
        return Err(ZshError::param("k", "must be >= 1"));
    }
    if db.bits() != queries.bits() {
        return Err(ZshError::Dimension(format!(
            "{}-bit queries against a {}-bit database",
            queries.bits(),
            db.bits()
        )));
    }
    let db_labels = db.require_labels()?;
    let query_labels = queries.require_labels()?;
    if related.is_some() && (db_labels.single().is_err() || query_labels.single().is_err()) {
        return Err(ZshError::param("related", "related-category metrics need single-label data"));
    }

    let same_label_counts: HashMap<&str, usize> = match (options.relevance, db_labels) {
        (Relevance::SameLabel, LabelList::Single(v)) => {
            let mut counts = HashMap::new();
            for l in v {
                *counts.entry(l.as_str()).or_insert(0) += 1;
            }
            counts
        }
        (Relevance::SameLabel, LabelList::Multi(_)) => {
            return Err(ZshError::param("relevance", "same-label relevance needs single-label data"))
        }
        _ => HashMap::new(),
    };

    let per_query: Vec<QueryMetrics> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let dist: Vec<u32> = (0..db.len())
                .map(|j| hamming_words(queries.words(q), db.words(j)))
                .collect();
            let ranking = search::rank_by_distance(&dist, db.bits(), options.k);
            let within: Vec<usize> = (0..db.len()).filter(|&j| dist[j] <= options.radius).collect();

            let q_tags = query_labels.tags(q);
            let relevant = |j: usize| match options.relevance {
                Relevance::SameLabel => db_labels.tags(j) == q_tags,
                Relevance::SharedTags(min) => metrics::shared_tags(q_tags, db_labels.tags(j)) >= min,
            };
            let total_relevant = match options.relevance {
                Relevance::SameLabel => same_label_counts.get(q_tags[0].as_str()).copied().unwrap_or(0),
                Relevance::SharedTags(_) => (0..db.len()).filter(|&j| relevant(j)).count(),
            };
            let ap = average_precision(
                ranking.indices().map(relevant),
                total_relevant,
                options.k,
                options.ap_denominator,
            );
            let precision = radius_precision(within.iter().map(|&j| relevant(j)));

            let (ap_related, precision_related) = match related {
                Some(pairs) => {
                    let ql = &q_tags[0];
                    let rel = |j: usize| is_related(pairs, ql, &db_labels.tags(j)[0]);
                    (
                        Some(related_average_precision(ranking.indices().map(rel), options.k)),
                        Some(radius_precision(within.iter().map(|&j| rel(j)))),
                    )
                }
                None => (None, None),
            };
            QueryMetrics {
                query_id: queries.ids()[q].clone(),
                ap,
                precision,
                retrieved_within_radius: within.len(),
                relevant_in_db: total_relevant,
                ap_related,
                precision_related,
            }
        })
        .collect();

    if let Some(pairs) = related {
        for q in 0..queries.len() {
            let l = &query_labels.tags(q)[0];
            if !pairs.mentions(l) {
                log::warn!("query label {l:?} appears in no related pair");
            }
        }
    }

    Ok(MetricReport {
        k: options.k,
        radius: options.radius,
        map_at_k: ordered_mean(per_query.iter().map(|q| q.ap)),
        precision_at_radius: ordered_mean(per_query.iter().map(|q| q.precision)),
        map_related: related.map(|_| ordered_mean(per_query.iter().filter_map(|q| q.ap_related))),
        precision_related: related.map(|_| ordered_mean(per_query.iter().filter_map(|q| q.precision_related))),
        per_query,
    })
}
