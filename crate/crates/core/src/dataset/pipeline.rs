use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_pair_manifest, build_partial, generate_all_trajectories, partial_from_model, sample_partial_random_points,
    DatasetError, ManifestParams, PairManifest, PartialOrigin, PartialReconstruction, Trajectory, TrajectoryParams,
};
use crate::geometry::{normalize_cloud, NormalizationInfo, SigmaConvention};
use crate::recon::{extract_cloud, Reconstruction};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub trajectory: TrajectoryParams,
    /// Number of random-point partials; 0 disables them.
    pub random_partials: usize,
    pub random_target_images: usize,
    pub min_track: usize,
    pub manifest: ManifestParams,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            trajectory: TrajectoryParams::default(),
            random_partials: 10,
            random_target_images: 200,
            min_track: 2,
            manifest: ManifestParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub trajectories: Vec<Trajectory>,
    pub partials: Vec<PartialReconstruction>,
    /// Parent scene normalization in which overlaps are measured.
    pub frame: NormalizationInfo,
    pub manifest: PairManifest,
}

impl GeneratedDataset {
    pub fn mean_overlap(&self) -> Option<f64> {
        let pairs = &self.manifest.pairs;
        (!pairs.is_empty()).then(|| pairs.iter().map(|p| p.overlap).sum::<f64>() / pairs.len() as f64)
    }
}

/// Replaces the track-filtered model of a partial, e.g. by running a real
/// triangulator at the parent's fixed poses.
pub type Retriangulate<'a> = dyn Fn(usize, &PartialReconstruction) -> Result<Reconstruction, DatasetError> + Sync + 'a;

/// Trajectory partials followed by random-point partials, then the pair
/// manifest over all of them. Subsets that leave no point are skipped.
pub fn generate_dataset(
    recon: &Reconstruction,
    params: &DatasetParams,
    config: serde_json::Value,
    retriangulate: Option<&Retriangulate<'_>>,
) -> Result<GeneratedDataset, DatasetError> {
    let seed = params.manifest.seed;
    let trajectories = generate_all_trajectories(recon, &params.trajectory, seed)?;
    let mut subsets: Vec<(Vec<u32>, PartialOrigin)> =
        trajectories.iter().map(|t| (t.image_ids.clone(), PartialOrigin::Trajectory)).collect();
    if params.random_partials > 0 && !recon.points.is_empty() {
        subsets.extend(
            sample_partial_random_points(recon, params.random_target_images, params.random_partials, seed)
                .into_iter()
                .map(|s| (s, PartialOrigin::RandomPoints)),
        );
    }
    let built: Vec<Result<PartialReconstruction, DatasetError>> = subsets
        .par_iter()
        .enumerate()
        .map(|(k, (ids, origin))| build_partial(recon, ids, params.min_track, *origin, derive_seed(seed, "partial", k as u64)))
        .collect();
    let mut partials = Vec::new();
    for r in built {
        match r {
            Ok(p) => partials.push(p),
            Err(DatasetError::EmptyPartial) => {}
            Err(e) => return Err(e),
        }
    }
    if let Some(tri) = retriangulate {
        partials = partials
            .iter()
            .enumerate()
            .map(|(k, p)| partial_from_model(tri(k, p)?, p.origin, derive_seed(seed, "partial", k as u64)))
            .collect::<Result<_, _>>()?;
    }
    let (_, frame) = normalize_cloud(&extract_cloud(recon)?, SigmaConvention::PerPoint)?;
    let manifest = build_pair_manifest(&partials, &frame, &params.manifest, config)?;
    Ok(GeneratedDataset { trajectories, partials, frame, manifest })
}
