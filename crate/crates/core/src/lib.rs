//! Zero-shot hashing: binary codes for images of categories never seen in
//! training, learned by aligning hash codes with label word embeddings.
//!
//! The pipeline is
//!
//! 1. [`featurize`]: RBF anchor-kernel map of raw features,
//! 2. [`graph`]: kNN affinity graph and Laplacian over the training items,
//! 3. [`train`]: alternating optimization of the projection, codes, rotation and semantic map,
//! 4. [`codes`]: query-time encoding and Hamming search primitives,
//! 5. [`eval`]: retrieval metrics and the seen/unseen protocol.
//!
//! ```
//! use zsh_core::synth::{zeroshot_fixture, UnseenPlacement};
//! use zsh_core::{fit, GraphConfig, Hyperparameters, KernelConfig};
//!
//! let fx = zeroshot_fixture(UnseenPlacement::Related, 10, 8, 3.0, 0.3, 1).unwrap();
//! let hyper = Hyperparameters { bits: 8, max_iters: 3, ..Default::default() };
//! let kernel = KernelConfig { anchors: 16, bandwidth: None };
//! let out = fit(&fx.data.features, &fx.data.labels, &fx.data.table, &hyper, &kernel, &GraphConfig::default()).unwrap();
//! assert_eq!(out.codes.nrows(), 8);
//! ```

pub mod codes;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod graph;
pub mod io;
pub mod synth;
pub mod train;

pub use codes::{encode, encode_database, hamming, load_codes, save_codes, BinaryCode, CodeDatabase};
pub use error::{ErrorKind, Result, ZshError};
pub use eval::{
    evaluate, run_sweep, run_zeroshot_experiment, search_radius, search_topk, ApDenominator, DbComposition,
    EvalOptions, MetricReport, ProtocolOptions, RankedRetrieval, Relevance, Sweep,
};
pub use featurize::{kernel_map, kernel_map_batch, sample_anchors, AnchorSet, KernelizedFeatures};
pub use graph::{build_similarity, laplacian, Affinity, GraphConfig, LaplacianMatrix, SimilarityGraph};
pub use io::{FeatureMatrix, LabelEmbeddingTable, LabelList, RelatedPairs, SplitSpec};
pub use train::{fit, train, Hyperparameters, KernelConfig, TrainOutput, TrainTrace, Trainer, ZshModel};
