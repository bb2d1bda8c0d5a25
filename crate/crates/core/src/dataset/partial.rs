use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::geometry::{estimate_normals, orient_normals, OrientedCloud, DEFAULT_NORMAL_K};
use crate::recon::{extract_cloud, Reconstruction, TrackElement};
use crate::rng::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialOrigin {
    RandomPoints,
    Trajectory,
}

impl PartialOrigin {
    pub fn label(self) -> &'static str {
        match self {
            PartialOrigin::RandomPoints => "random_points",
            PartialOrigin::Trajectory => "trajectory",
        }
    }
}

/// A reconstruction restricted to an image subset, sharing the parent frame.
#[derive(Debug, Clone)]
pub struct PartialReconstruction {
    pub image_ids: Vec<u32>,
    pub point_ids: Vec<u64>,
    pub cloud: OrientedCloud,
    /// The subset as a standalone model: only subset images, restricted tracks.
    pub model: Reconstruction,
    pub origin: PartialOrigin,
}

/// Image subsets grown from random points until each reaches
/// `target_images` images or no unseen point is left.
pub fn sample_partial_random_points(recon: &Reconstruction, target_images: usize, n_partials: usize, seed: u64) -> Vec<Vec<u32>> {
    let ids: Vec<u64> = recon.points.keys().copied().collect();
    (0..n_partials)
        .map(|k| {
            let mut rng = derived_rng(seed, "random-points", k as u64);
            let mut pool = ids.clone();
            let mut subset = BTreeSet::new();
            while subset.len() < target_images && !pool.is_empty() {
                let pick = pool.swap_remove(rng.random_range(0..pool.len()));
                subset.extend(recon.points[&pick].track.iter().map(|e| e.image_id));
            }
            subset.into_iter().collect()
        })
        .collect()
}

fn restrict(recon: &Reconstruction, images: &BTreeSet<u32>, min_track: usize) -> Result<Reconstruction, DatasetError> {
    let mut points = BTreeMap::new();
    for p in recon.points.values() {
        let track: Vec<TrackElement> = p.track.iter().filter(|e| images.contains(&e.image_id)).copied().collect();
        let observers: BTreeSet<u32> = track.iter().map(|e| e.image_id).collect();
        if observers.len() >= min_track {
            let mut q = p.clone();
            q.track = track;
            points.insert(p.id, q);
        }
    }
    let mut kept_images = BTreeMap::new();
    for &id in images {
        if let Some(img) = recon.images.get(&id) {
            let mut img = img.clone();
            for obs in &mut img.points2d {
                if obs.point3d_id.is_some_and(|pid| !points.contains_key(&pid)) {
                    obs.point3d_id = None;
                }
            }
            kept_images.insert(id, img);
        }
    }
    let cameras = kept_images
        .values()
        .map(|img| (img.camera_id, recon.cameras[&img.camera_id].clone()))
        .collect();
    Ok(Reconstruction::new(cameras, kept_images, points)?)
}

/// Keep points seen by at least `min_track` subset images, then estimate
/// normals and orient them towards subset cameras only.
pub fn build_partial(
    recon: &Reconstruction,
    image_ids: &[u32],
    min_track: usize,
    origin: PartialOrigin,
    seed: u64,
) -> Result<PartialReconstruction, DatasetError> {
    if image_ids.is_empty() {
        return Err(DatasetError::InvalidParameter("image subset is empty".into()));
    }
    let subset: BTreeSet<u32> = image_ids.iter().copied().collect();
    let model = restrict(recon, &subset, min_track.max(1))?;
    partial_from_model(model, origin, seed)
}

/// Wraps an already restricted (or externally re-triangulated) model in the
/// parent frame as a partial.
pub fn partial_from_model(model: Reconstruction, origin: PartialOrigin, seed: u64) -> Result<PartialReconstruction, DatasetError> {
    if model.points.is_empty() {
        return Err(DatasetError::EmptyPartial);
    }
    let raw = extract_cloud(&model)?;
    let k = DEFAULT_NORMAL_K.min(raw.len());
    let cloud = orient_normals(&model, &estimate_normals(&raw, k)?, seed)?;
    Ok(PartialReconstruction {
        image_ids: model.images.keys().copied().collect(),
        point_ids: cloud.source_point_ids.clone(),
        cloud,
        model,
        origin,
    })
}
