//! Benchmark construction from a single reconstruction: image trajectories,
//! random-point partials, overlap scoring and perturbed pair manifests.

mod manifest;
mod overlap;
mod partial;
mod pipeline;
mod trajectory;

pub use manifest::{
    build_pair_manifest, perturbed_cloud, read_manifest, write_dataset, GtTransform, ManifestParams, PairEntry,
    PairManifest, MANIFEST_SCHEMA,
};
pub use overlap::{compute_overlap, directional_hits, DEFAULT_OVERLAP_TAU};
pub use partial::{build_partial, partial_from_model, sample_partial_random_points, PartialOrigin, PartialReconstruction};
pub use pipeline::{generate_dataset, DatasetParams, GeneratedDataset, Retriangulate};
pub use trajectory::{
    generate_all_trajectories, generate_trajectory, pose_distance, PoseTable, Trajectory, TrajectoryParams,
};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::recon::ReconError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("remaining image set is empty")]
    EmptyIndexSet,
    #[error("no point survives track filtering for this image subset")]
    EmptyPartial,
    #[error("need at least two partials, have {0}")]
    TooFewPartials(usize),
    #[error("invalid dataset parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Recon(#[from] ReconError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}
