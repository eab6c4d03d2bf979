//! Loading and saving of every external file format.
//!
//! | file | layout |
//! |------|--------|
//! | features (binary) | `ZSHF`, u32 version, u64 n, u64 d, n·d f32 column-major, n id lines |
//! | features (csv) | `id,v1,...,vd` per line |
//! | embeddings | word2vec text: `count dim` header, then `token v1 ... ve` |
//! | labels | one label per line (multi-label: comma-separated tags) |
//! | split | `[seen]` and `[unseen]` sections, one label per line |
//! | related pairs | `labelA<TAB>labelB` per line |
//! | model | see [`model_to_bytes`] |

pub(crate) mod bytes;
mod embeddings;
mod features;
mod labels;
mod model_file;

pub use embeddings::{
    assemble_y, cosine_similarity, format_embeddings, load_embeddings, parse_embeddings, LabelEmbeddingTable,
};
pub use features::{
    decode_features_binary, encode_features_binary, format_features_csv, load_features, parse_features_csv,
    save_features, FeatureFormat, FeatureMatrix,
};
pub use labels::{
    format_labels, format_split, load_labels, load_related, load_split, parse_labels, parse_related, parse_split,
    LabelList, LabelMode, RelatedPairs, SplitSpec,
};
pub use model_file::{load_model, model_from_bytes, model_to_bytes, save_model};
