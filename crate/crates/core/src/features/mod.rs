//! Rotation-invariant point pair features and the descriptors built on them.

mod descriptor;
mod import;
mod ppf;
mod superpoints;

pub use descriptor::{
    describe_points, ppf_histogram_descriptor, DescriptorSource, DescriptorTable, HistogramBins, Support,
    DEFAULT_DESCRIPTOR_RADIUS,
};
pub use import::{export_features, import_features, FEATURE_MAGIC, FEATURE_VERSION};
pub use ppf::{ppf, Ppf};
pub use superpoints::{sample_superpoints, SuperpointSet, DEFAULT_MAX_SUPERPOINTS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cloud has no normals")]
    MissingNormals,
    #[error("descriptor support must be positive")]
    InvalidSupport,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("feature file has {found} rows but {expected} superpoints were given")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("feature file is not in the expected format: {0}")]
    BadHeader(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
