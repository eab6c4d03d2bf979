use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use zsh_core::codes::{encode_database, load_codes, save_codes, CodeDatabase};
use zsh_core::eval::{
    evaluate, run_sweep, run_zeroshot_experiment, search_topk, sweep_csv, ProtocolOptions, Sweep,
};
use zsh_core::io::{
    assemble_y, load_embeddings, load_features, load_labels, load_model, load_related, load_split, save_model,
    FeatureFormat, FeatureMatrix, LabelList, LabelMode, RelatedPairs,
};
use zsh_core::train::{objective_terms, sgn, Variables};
use zsh_core::{build_similarity, fit, kernel_map_batch, laplacian, ErrorKind, GraphConfig, ZshError};

use crate::args::{Command, DataArgs, EncodeArgs, EvalArgs, ExpArgs, InspectArgs, SearchArgs, SweepArg, TrainArgs};

/// A failed command: exit-code class plus a message naming the offending flag where known.
#[derive(Debug)]
pub struct Failure {
    pub kind: ErrorKind,
    pub message: String,
}

impl Failure {
    fn flag(flag: &str, message: impl std::fmt::Display) -> Self {
        Failure {
            kind: ErrorKind::Validation,
            message: format!("--{flag}: {message}"),
        }
    }
}

impl From<ZshError> for Failure {
    fn from(e: ZshError) -> Self {
        let message = match &e {
            ZshError::InvalidParameter { name, message } => format!("--{name}: {message}"),
            other => other.to_string(),
        };
        Failure { kind: e.kind(), message }
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Attaches the flag that supplied a file to errors raised while reading it.
fn via<T>(flag: &'static str, r: zsh_core::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        if f.kind == ErrorKind::Validation {
            f.message = format!("--{flag}: {}", f.message);
        }
        f
    })
}

fn label_mode(multi: bool) -> LabelMode {
    if multi {
        LabelMode::Multi
    } else {
        LabelMode::Single
    }
}

fn read_features(flag: &'static str, path: &Path) -> std::result::Result<FeatureMatrix, Failure> {
    via(flag, load_features(path, FeatureFormat::from_path(path)))
}

fn write_out(flag: &'static str, path: &Path, data: &[u8]) -> Outcome {
    fs::write(path, data).map_err(|e| Failure::flag(flag, format!("cannot write {}: {e}", path.display())))
}

fn emit(flag: &'static str, path: Option<&PathBuf>, text: &str) -> Outcome {
    match path {
        Some(p) => write_out(flag, p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

struct Data {
    features: FeatureMatrix,
    labels: LabelList,
    table: zsh_core::LabelEmbeddingTable,
}

fn read_data(args: &DataArgs) -> std::result::Result<Data, Failure> {
    let features = read_features("features", &args.features)?;
    let labels = via("labels", load_labels(&args.labels, label_mode(args.multi_label)))?;
    via("labels", labels.check_len(features.n()))?;
    let table = via("embeddings", load_embeddings(&args.embeddings))?;
    Ok(Data { features, labels, table })
}

fn read_related(path: Option<&PathBuf>) -> std::result::Result<Option<RelatedPairs>, Failure> {
    path.map(|p| via("related", load_related(p))).transpose()
}

pub fn run(command: &Command) -> Outcome {
    match command {
        Command::Train(a) => train(a),
        Command::Encode(a) => encode(a),
        Command::Search(a) => search(a),
        Command::Eval(a) => eval(a),
        Command::ExpZeroshot(a) => exp_zeroshot(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn train(args: &TrainArgs) -> Outcome {
    let hyper = args.hyper.hyper();
    hyper.validate()?;
    let data = read_data(&args.data)?;
    if let Some(path) = &args.split {
        let split = via("split", load_split(path))?;
        for j in 0..data.labels.len() {
            split.check_training_labels(data.labels.tags(j))?;
        }
    }
    let graph = args.hyper.graph();
    let out = fit(&data.features, &data.labels, &data.table, &hyper, &args.hyper.kernel(), &graph)?;
    log::info!(
        "trained {} bits in {} iterations ({:?})",
        hyper.bits,
        out.trace.iterations.len(),
        out.trace.stop
    );
    via("model", save_model(&out.model, &args.model))?;
    let trace_path = args.trace.clone().unwrap_or_else(|| {
        let mut p = args.model.clone().into_os_string();
        p.push(".trace.csv");
        PathBuf::from(p)
    });
    write_out("trace", &trace_path, out.trace.to_csv().as_bytes())?;
    if let Some(path) = &args.dump_graph {
        let g = build_similarity(data.features.values(), &graph)?;
        write_out("dump-graph", path, g.to_triplets().as_bytes())?;
    }
    Ok(())
}

fn encode(args: &EncodeArgs) -> Outcome {
    let model = via("model", load_model(&args.model))?;
    let features = read_features("features", &args.features)?;
    let labels = args
        .labels
        .as_ref()
        .map(|p| via("labels", load_labels(p, label_mode(args.multi_label))))
        .transpose()?;
    let db = via("features", encode_database(&features, &model, labels))?;
    via("output", save_codes(&db, &args.output))
}

fn search(args: &SearchArgs) -> Outcome {
    if args.k == 0 {
        return Err(Failure::flag("k", "must be >= 1"));
    }
    let db = via("db", load_codes(&args.db))?;
    let queries: CodeDatabase = match (&args.queries, &args.query_features) {
        (Some(p), None) => via("queries", load_codes(p))?,
        (None, Some(p)) => {
            let model_path = args.model.as_ref().ok_or_else(|| Failure::flag("model", "required with --query-features"))?;
            let model = via("model", load_model(model_path))?;
            let features = read_features("query-features", p)?;
            via("query-features", encode_database(&features, &model, None))?
        }
        _ => return Err(Failure::flag("queries", "one of --queries or --query-features is required")),
    };
    if queries.bits() != db.bits() {
        return Err(Failure::flag(
            "queries",
            format!("{}-bit queries against a {}-bit database", queries.bits(), db.bits()),
        ));
    }
    let mut out = String::new();
    for q in 0..queries.len() {
        let qid = &queries.ids()[q];
        // widen the scan just enough to absorb excluded self-matches
        let extra = if args.exclude_self { db.ids().iter().filter(|id| *id == qid).count() } else { 0 };
        let ranked = search_topk(&queries.code(q), &db, (args.k + extra).min(db.len().max(1)))?;
        let hits = ranked
            .hits
            .iter()
            .filter(|h| !(args.exclude_self && &db.ids()[h.index] == qid))
            .take(args.k);
        for h in hits {
            writeln!(out, "{qid} {} {}", db.ids()[h.index], h.distance).unwrap();
        }
    }
    emit("output", args.output.as_ref(), &out)
}

fn eval(args: &EvalArgs) -> Outcome {
    let db = via("db", load_codes(&args.db))?;
    let queries = via("queries", load_codes(&args.queries))?;
    let related = read_related(args.metrics.related.as_ref())?;
    let report = evaluate(&db, &queries, &args.metrics.options(), related.as_ref())?;
    emit("output", args.output.as_ref(), &report.to_jsonl())
}

fn parse_grid<T: std::str::FromStr>(grid: Option<&String>) -> std::result::Result<Vec<T>, Failure> {
    let grid = grid.ok_or_else(|| Failure::flag("grid", "required for this sweep"))?;
    grid.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| Failure::flag("grid", format!("bad value {v:?}"))))
        .collect()
}

fn exp_zeroshot(args: &ExpArgs) -> Outcome {
    let hyper = args.hyper.hyper();
    hyper.validate()?;
    let n_train = match args.train_size.as_str() {
        "all" => None,
        v => Some(
            v.parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Failure::flag("train-size", format!("expected a positive count or `all`, got {v:?}")))?,
        ),
    };
    if args.num_queries == 0 {
        return Err(Failure::flag("num-queries", "must be >= 1"));
    }
    let sweep = match args.sweep {
        None => None,
        Some(SweepArg::UnseenCategory) => Some(Sweep::UnseenCategory),
        Some(SweepArg::SeenRatio) => Some(Sweep::SeenRatio(parse_grid(args.grid.as_ref())?)),
        Some(SweepArg::TrainSize) => Some(Sweep::TrainSize(parse_grid(args.grid.as_ref())?)),
    };
    let needs_split = matches!(sweep, None | Some(Sweep::TrainSize(_)));
    if needs_split && args.split.is_none() {
        return Err(Failure::flag("split", "required for this experiment"));
    }
    let data = read_data(&args.data)?;
    let split = args.split.as_ref().map(|p| via("split", load_split(p))).transpose()?;
    let related = read_related(args.metrics.related.as_ref())?;
    let options = ProtocolOptions {
        n_train,
        n_queries: args.num_queries,
        db: args.db,
        eval: args.metrics.options(),
        hyper,
        kernel: args.hyper.kernel(),
        graph: args.hyper.graph(),
        seed: args.hyper.seed,
    };

    match sweep {
        Some(sweep) => {
            let rows = run_sweep(&data.features, &data.labels, &data.table, split.as_ref(), &sweep, &options)?;
            emit("output", args.output.as_ref(), &sweep_csv(&rows))
        }
        None => {
            let split = split.expect("checked above");
            let r = run_zeroshot_experiment(&data.features, &data.labels, &data.table, &split, &options, related.as_ref())?;
            if let Some(path) = &args.trace {
                write_out("trace", path, r.trace.to_csv().as_bytes())?;
            }
            emit("output", args.output.as_ref(), &r.report.to_jsonl())
        }
    }
}

fn inspect(args: &InspectArgs) -> Outcome {
    let model = via("model", load_model(&args.model))?;
    let h = &model.hyper;
    let mut out = String::new();
    writeln!(out, "bits {}", model.bits()).unwrap();
    writeln!(out, "feature_dim {}", model.feature_dim()).unwrap();
    writeln!(out, "anchors {}", model.anchors.m()).unwrap();
    writeln!(out, "embedding_dim {}", model.embedding_dim()).unwrap();
    writeln!(out, "bandwidth {:?}", model.anchors.delta()).unwrap();
    writeln!(out, "orthogonality_residual {:e}", model.orthogonality_residual()).unwrap();
    writeln!(
        out,
        "hyperparameters alpha={:?} beta={:?} gamma={:?} lambda={:?} iters={} tol={:?} seed={}",
        h.alpha, h.beta, h.gamma, h.lambda, h.max_iters, h.tol, h.seed
    )
    .unwrap();

    if let Some(path) = &args.features {
        let features = read_features("features", path)?;
        let labels_path = args.labels.as_ref().ok_or_else(|| Failure::flag("labels", "required with --features"))?;
        let table_path =
            args.embeddings.as_ref().ok_or_else(|| Failure::flag("embeddings", "required with --features"))?;
        let labels = via("labels", load_labels(labels_path, label_mode(args.multi_label)))?;
        via("labels", labels.check_len(features.n()))?;
        let table = via("embeddings", load_embeddings(table_path))?;
        let y = via("embeddings", assemble_y(&labels, &table))?;
        let phi = via("features", kernel_map_batch(&features, &model.anchors))?;
        let codes = model.projection.tr_mul(&phi.values).map(sgn);
        let graph = GraphConfig {
            k: args.knn,
            sigma: args.sigma,
            affinity: args.affinity,
        };
        let lap = laplacian(&build_similarity(features.values(), &graph)?);
        let vars = Variables {
            projection: &model.projection,
            semantic_map: &model.semantic_map,
            rotation: &model.rotation,
            codes: &codes,
        };
        let terms = objective_terms(&vars, &phi.values, &y, &lap, &model.hyper)?;
        let [t1, t2, t3, t4, t5] = terms.as_array();
        writeln!(out, "items {}", features.n()).unwrap();
        writeln!(out, "objective {:?}", terms.total()).unwrap();
        writeln!(out, "terms {t1:?} {t2:?} {t3:?} {t4:?} {t5:?}").unwrap();
    }
    print!("{out}");
    Ok(())
}
