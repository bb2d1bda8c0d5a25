//! Similarity transforms, closed-form alignment, normalization and normals.

mod cloud;
mod normalize;
mod normals;
mod transform;
mod umeyama;

pub use cloud::OrientedCloud;
pub use normalize::{
    largest_singular_value, normalize_cloud, normalize_pair, NormalizationInfo, NormalizationMode,
    NormalizedPair, SigmaConvention,
};
pub use normals::{estimate_normals, orient_normals, orient_normals_outward, DEFAULT_NORMAL_K};
pub use transform::SimilarityTransform;
pub use umeyama::fit_umeyama;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("degenerate cloud: all points coincide")]
    DegenerateCloud,
    #[error("too few points for normal estimation: {have} < {need}")]
    TooFewPoints { have: usize, need: usize },
    #[error("cloud row {row} has no observing image")]
    MissingTrack { row: usize },
    #[error("cloud has no normals")]
    MissingNormals,
    #[error("invalid cloud: {0}")]
    InvalidCloud(String),
}

/// Angle between two vectors in `[0, π]`, stable near 0 and π.
pub fn angle_between(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}
