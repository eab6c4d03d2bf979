//! Seen/unseen experimental protocol and parameter sweeps.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{evaluate, EvalOptions, MetricReport};
use crate::codes::encode_database;
use crate::error::{Result, ZshError};
use crate::graph::GraphConfig;
use crate::io::{FeatureMatrix, LabelEmbeddingTable, LabelList, RelatedPairs, SplitSpec};
use crate::train::{fit, Hyperparameters, KernelConfig, TrainTrace, ZshModel};

/// Which items form the retrieval database.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum DbComposition {
    /// Every seen item (training items included) plus the unseen items not used as queries.
    #[default]
    SeenPlusUnseenRest,
    /// Every item that is neither a training item nor a query.
    AllRest,
}

impl std::str::FromStr for DbComposition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "seen+unseen-rest" => Ok(DbComposition::SeenPlusUnseenRest),
            "all-rest" => Ok(DbComposition::AllRest),
            other => Err(format!("unknown database composition {other:?} (expected seen+unseen-rest|all-rest)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOptions {
    /// Training items sampled from the seen classes; `None` uses all of them.
    pub n_train: Option<usize>,
    /// Queries sampled from the unseen classes.
    pub n_queries: usize,
    pub db: DbComposition,
    pub eval: EvalOptions,
    pub hyper: Hyperparameters,
    pub kernel: KernelConfig,
    pub graph: GraphConfig,
    /// Seed of the train/query sampling.
    pub seed: u64,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            n_train: Some(10_000),
            n_queries: 1000,
            db: DbComposition::default(),
            eval: EvalOptions::default(),
            hyper: Hyperparameters::default(),
            kernel: KernelConfig::default(),
            graph: GraphConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub report: MetricReport,
    pub trace: TrainTrace,
    pub model: ZshModel,
    pub train_indices: Vec<usize>,
    pub query_indices: Vec<usize>,
    pub db_indices: Vec<usize>,
}

/// Trains on seen items only and scores unseen-class queries against the database.
pub fn run_zeroshot_experiment(
    features: &FeatureMatrix,
    labels: &LabelList,
    table: &LabelEmbeddingTable,
    split: &SplitSpec,
    options: &ProtocolOptions,
    related: Option<&RelatedPairs>,
) -> Result<ExperimentResult> {
    labels.check_len(features.n())?;
    let names = labels.single()?;
    if split.unseen().is_empty() {
        return Err(ZshError::Protocol("no unseen categories: zero-shot retrieval is undefined".into()));
    }
    if split.seen().is_empty() {
        return Err(ZshError::Protocol("no seen categories to train on".into()));
    }
    let seen: Vec<usize> = (0..names.len()).filter(|&j| split.is_seen(&names[j])).collect();
    let unseen: Vec<usize> = (0..names.len()).filter(|&j| split.is_unseen(&names[j])).collect();
    if seen.is_empty() {
        return Err(ZshError::Protocol("no items belong to a seen category".into()));
    }
    if unseen.is_empty() {
        return Err(ZshError::Protocol("no items belong to an unseen category".into()));
    }
    if options.n_queries == 0 {
        return Err(ZshError::param("queries", "must be >= 1"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut train = seen.clone();
    train.shuffle(&mut rng);
    train.truncate(options.n_train.unwrap_or(usize::MAX).min(seen.len()));
    train.sort_unstable();
    let mut queries = unseen.clone();
    queries.shuffle(&mut rng);
    queries.truncate(options.n_queries.min(unseen.len()));
    queries.sort_unstable();

    let train_labels: Vec<String> = train.iter().map(|&j| names[j].clone()).collect();
    split.check_training_labels(&train_labels)?;

    let is_query = membership(names.len(), &queries);
    let is_train = membership(names.len(), &train);
    let db: Vec<usize> = (0..names.len())
        .filter(|&j| !is_query[j])
        .filter(|&j| match options.db {
            DbComposition::SeenPlusUnseenRest => split.is_seen(&names[j]) || split.is_unseen(&names[j]),
            DbComposition::AllRest => !is_train[j],
        })
        .collect();
    if db.is_empty() {
        return Err(ZshError::Protocol("retrieval database is empty".into()));
    }

    let mut kernel = options.kernel;
    if kernel.anchors > train.len() {
        log::warn!("only {} training items; using that many anchors instead of {}", train.len(), kernel.anchors);
        kernel.anchors = train.len();
    }
    let out = fit(
        &features.select(&train)?,
        &LabelList::Single(train_labels),
        table,
        &options.hyper,
        &kernel,
        &options.graph,
    )?;

    let db_codes = encode_database(&features.select(&db)?, &out.model, Some(labels.select(&db)))?;
    let query_codes = encode_database(&features.select(&queries)?, &out.model, Some(labels.select(&queries)))?;
    let report = evaluate(&db_codes, &query_codes, &options.eval, related)?;

    Ok(ExperimentResult {
        report,
        trace: out.trace,
        model: out.model,
        train_indices: train,
        query_indices: queries,
        db_indices: db,
    })
}

fn membership(n: usize, indices: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &j in indices {
        mask[j] = true;
    }
    mask
}

/// Parameter grids for repeated experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Each category in turn is the single unseen class.
    UnseenCategory,
    /// Fraction of categories (randomly chosen) treated as seen.
    SeenRatio(Vec<f64>),
    /// Number of training items, with a fixed split.
    TrainSize(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: String,
    pub map: f64,
    pub precision: f64,
}

pub fn run_sweep(
    features: &FeatureMatrix,
    labels: &LabelList,
    table: &LabelEmbeddingTable,
    split: Option<&SplitSpec>,
    sweep: &Sweep,
    options: &ProtocolOptions,
) -> Result<Vec<SweepRow>> {
    let categories: BTreeSet<String> = labels.single()?.iter().cloned().collect();
    let categories: Vec<String> = categories.into_iter().collect();
    let row = |x: String, split: &SplitSpec, opts: &ProtocolOptions| -> Result<SweepRow> {
        let r = run_zeroshot_experiment(features, labels, table, split, opts, None)?;
        log::info!("sweep point {x}: MAP {:.4} precision {:.4}", r.report.map_at_k, r.report.precision_at_radius);
        Ok(SweepRow {
            x,
            map: r.report.map_at_k,
            precision: r.report.precision_at_radius,
        })
    };
    match sweep {
        Sweep::UnseenCategory => categories
            .iter()
            .map(|c| {
                let split = SplitSpec::new(categories.iter().filter(|o| *o != c).cloned(), [c.clone()])?;
                row(c.clone(), &split, options)
            })
            .collect(),
        Sweep::SeenRatio(ratios) => {
            if categories.len() < 2 {
                return Err(ZshError::Protocol("a seen-ratio sweep needs at least two categories".into()));
            }
            ratios
                .iter()
                .map(|&ratio| {
                    if !(ratio > 0.0 && ratio < 1.0) {
                        return Err(ZshError::param("grid", format!("seen ratio {ratio} must lie in (0, 1)")));
                    }
                    let mut order = categories.clone();
                    order.shuffle(&mut ChaCha8Rng::seed_from_u64(options.seed));
                    let n_seen = ((ratio * order.len() as f64).round() as usize).clamp(1, order.len() - 1);
                    let unseen = order.split_off(n_seen);
                    let split = SplitSpec::new(order, unseen)?;
                    row(format!("{ratio}"), &split, options)
                })
                .collect()
        }
        Sweep::TrainSize(sizes) => {
            let split = split.ok_or_else(|| ZshError::param("split", "a train-size sweep needs a split"))?;
            sizes
                .iter()
                .map(|&size| {
                    let opts = ProtocolOptions {
                        n_train: Some(size),
                        ..options.clone()
                    };
                    row(size.to_string(), split, &opts)
                })
                .collect()
        }
    }
}

/// `x,map,precision` rows.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("x,map,precision\n");
    for r in rows {
        writeln!(out, "{},{:?},{:?}", r.x, r.map, r.precision).unwrap();
    }
    out
}
