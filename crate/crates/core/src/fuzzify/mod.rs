//! k-means fuzzification of normalized features into transactions of
//! linguistic items labeled with next month's dengue class.

mod encode;
mod kmeans;
mod model;

pub(crate) use model::check_schema;
mod sets;

pub use encode::{
    encode_transactions, fuzzify_row, read_transactions, write_transactions, DengueClass, Encoding,
    Item, ItemCatalog, ItemId, Transaction,
};
pub use kmeans::{kmeans, Centroids, KMeans, KMeansFit};
pub use model::{FeatureModel, FuzzyModel, FUZZY_MODEL_SCHEMA};
pub use sets::{build_fuzzy_sets, membership, FuzzySetDef, Shape};
