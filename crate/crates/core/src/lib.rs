//! Geometry-only registration of Structure-from-Motion reconstructions.
//!
//! The crate estimates the similarity transform `x ↦ sRx + t` relating two
//! partial reconstructions of the same scene from their 3D points and normals
//! alone, and contains the tooling needed to build and score benchmarks:
//!
//! - [`recon`]: COLMAP text ingestion, PLY and match export.
//! - [`geometry`]: similarity transforms, Umeyama alignment, normalization,
//!   normal estimation and orientation.
//! - [`spatial`]: exact k-d tree for k-NN and radius queries.
//! - [`features`]: point pair features, farthest point sampling, PPF
//!   histogram descriptors, imported descriptors.
//! - [`matching`]: coarse superpoint matching, local groups, Sinkhorn with
//!   slack, final correspondence extraction.
//! - [`ransac`]: score-weighted 3-point RANSAC over correspondences.
//! - [`register`]: the end-to-end pipeline wiring the above together.
//! - [`dataset`]: synthetic trajectories, partial reconstructions, overlaps,
//!   and pair manifests.
//! - [`metrics`]: IR / FMR / RR and benchmark aggregation.
//! - [`synthetic`]: procedural scenes used as fixtures.

pub mod dataset;
pub mod features;
pub mod geometry;
pub mod matching;
pub mod metrics;
pub mod ransac;
pub mod recon;
pub mod register;
pub mod rng;
pub mod spatial;
pub mod synthetic;

pub use geometry::{NormalizationInfo, NormalizationMode, OrientedCloud, SimilarityTransform};
pub use matching::CorrespondenceSet;
pub use recon::Reconstruction;
