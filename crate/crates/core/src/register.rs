//! End-to-end registration of two point clouds.
//!
//! normalize → normals (if absent) → FPS superpoints → descriptors → coarse
//! mutual matching → local groups → per-group Sinkhorn → match extraction →
//! RANSAC in the normalized frame → map back to input coordinates.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    describe_points, sample_superpoints, DescriptorTable, FeatureError, HistogramBins, Support, SuperpointSet,
    DEFAULT_DESCRIPTOR_RADIUS, DEFAULT_MAX_SUPERPOINTS,
};
use crate::geometry::{
    estimate_normals, normalize_pair, orient_normals_outward, GeometryError, NormalizationMode, NormalizedPair,
    OrientedCloud, SigmaConvention, SimilarityTransform, DEFAULT_NORMAL_K,
};
use crate::matching::{
    coarse_match, extract_local_groups, extract_matches, CoarseCorrespondences, CoarseParams, CorrespondenceSet,
    LocalGroupPair, MatchingError, SinkhornParams, DEFAULT_GROUP_SIZE,
};
use crate::ransac::{ransac_register, RansacError, RansacParams, RegistrationResult};
use crate::rng::derive_seed;
use crate::spatial::SpatialIndex;

#[derive(Debug, Error)]
pub enum RegisterError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Ransac(#[from] RansacError),
}

/// Support of the per-point descriptors used inside local groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FineSupport {
    /// A fraction of the superpoint support radius.
    RadiusFraction(f64),
    Knn(usize),
}

pub const DEFAULT_KNN_SUPPORT: usize = 32;
pub const DEFAULT_FINE_KNN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistrationConfig {
    pub mode: NormalizationMode,
    pub sigma_convention: SigmaConvention,
    pub normal_k: usize,
    pub max_superpoints: usize,
    pub descriptor_support: Support,
    pub fine_support: FineSupport,
    pub bins: HistogramBins,
    pub coarse: CoarseParams,
    pub group_size: usize,
    pub sinkhorn: SinkhornParams,
    pub confidence_min: f64,
    pub ransac: RansacParams,
    pub seed: u64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self::for_mode(NormalizationMode::Sim3)
    }
}

impl RegistrationConfig {
    /// Defaults for one mode. SE3 keeps the fixed-radius support; Sim3
    /// normalizes each cloud by its own spread, so a fixed radius would
    /// cover different neighbourhoods in the two clouds and k-NN support is
    /// used instead.
    pub fn for_mode(mode: NormalizationMode) -> Self {
        let (descriptor_support, fine_support) = match mode {
            NormalizationMode::Se3 => (Support::Radius(DEFAULT_DESCRIPTOR_RADIUS), FineSupport::RadiusFraction(0.25)),
            NormalizationMode::Sim3 => (Support::Knn(DEFAULT_KNN_SUPPORT), FineSupport::Knn(DEFAULT_FINE_KNN)),
        };
        Self {
            mode,
            sigma_convention: SigmaConvention::PerPoint,
            normal_k: DEFAULT_NORMAL_K,
            max_superpoints: DEFAULT_MAX_SUPERPOINTS,
            descriptor_support,
            fine_support,
            bins: HistogramBins::default(),
            coarse: CoarseParams::default(),
            group_size: DEFAULT_GROUP_SIZE,
            sinkhorn: SinkhornParams::default(),
            confidence_min: 0.1,
            ransac: RansacParams { mode, ..RansacParams::default() },
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.ransac.seed = derive_seed(seed, "ransac", 0);
        self
    }
}

/// Descriptors supplied from outside, one row per superpoint of each cloud.
pub type ImportedDescriptors<'a> = dyn Fn(&SuperpointSet, &SuperpointSet) -> Result<(DescriptorTable, DescriptorTable), FeatureError> + 'a;

#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub stages: Vec<(&'static str, Duration)>,
}

impl StageTimings {
    fn mark(&mut self, name: &'static str, since: &mut Instant) {
        let now = Instant::now();
        self.stages.push((name, now - *since));
        *since = now;
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationOutput {
    /// `src → dst` in input coordinates.
    pub transform: SimilarityTransform,
    pub normalized_transform: SimilarityTransform,
    pub ransac: RegistrationResult,
    pub correspondences: CorrespondenceSet,
    pub coarse: CoarseCorrespondences,
    /// FPS rows of each input cloud, in selection order.
    pub superpoints: (SuperpointSet, SuperpointSet),
    pub timings: StageTimings,
}

fn ensure_normals(cloud: &OrientedCloud, k: usize) -> Result<OrientedCloud, GeometryError> {
    if cloud.has_normals() {
        return Ok(cloud.clone());
    }
    let est = estimate_normals(cloud, k.min(cloud.len()))?;
    orient_normals_outward(&est)
}

fn fine_support(config: &RegistrationConfig) -> Support {
    match (config.fine_support, config.descriptor_support) {
        (FineSupport::Knn(k), _) => Support::Knn(k),
        (FineSupport::RadiusFraction(f), Support::Radius(r)) => Support::Radius(r * f),
        (FineSupport::RadiusFraction(f), Support::Knn(k)) => Support::Knn(((k as f64) * f).round().max(3.0) as usize),
    }
}

/// Descriptors for the rows appearing in any group, scattered into a table
/// addressed by cloud row.
fn group_descriptors(
    cloud: &OrientedCloud,
    index: &SpatialIndex,
    rows: &[Vec<usize>],
    support: Support,
    bins: HistogramBins,
) -> Result<(Vec<usize>, DescriptorTable), FeatureError> {
    let used: BTreeSet<usize> = rows.iter().flatten().copied().collect();
    let used: Vec<usize> = used.into_iter().collect();
    let table = describe_points(cloud, index, &used, support, bins)?;
    let mut slot = vec![usize::MAX; cloud.len()];
    for (k, &r) in used.iter().enumerate() {
        slot[r] = k;
    }
    Ok((slot, table))
}

fn group_costs(groups: &LocalGroupPair, slots: (&[usize], &[usize]), tables: (&DescriptorTable, &DescriptorTable)) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    let g = groups.g;
    (0..groups.len())
        .into_par_iter()
        .map(|r| {
            let mut cost = Vec::with_capacity(g * g);
            for &i in &groups.src_indices[r] {
                for &j in &groups.dst_indices[r] {
                    let d = tables.0.dot(slots.0[i], tables.1, slots.1[j]);
                    cost.push(1.0 - d);
                }
            }
            cost
        })
        .collect()
}

pub fn register_pair(
    src: &OrientedCloud,
    dst: &OrientedCloud,
    config: &RegistrationConfig,
    imported: Option<&ImportedDescriptors<'_>>,
) -> Result<RegistrationOutput, RegisterError> {
    let mut timings = StageTimings::default();
    let mut clock = Instant::now();
    let src = ensure_normals(src, config.normal_k)?;
    let dst = ensure_normals(dst, config.normal_k)?;
    let pair: NormalizedPair = normalize_pair(&src, &dst, config.mode, config.sigma_convention)?;
    let (p, q) = (&pair.src, &pair.dst);
    let index_p = SpatialIndex::build(&p.points).map_err(|e| GeometryError::InvalidCloud(e.to_string()))?;
    let index_q = SpatialIndex::build(&q.points).map_err(|e| GeometryError::InvalidCloud(e.to_string()))?;
    timings.mark("normalize", &mut clock);

    let sp_p = sample_superpoints(p, config.max_superpoints.min(p.len()), derive_seed(config.seed, "fps", 0));
    let sp_q = sample_superpoints(q, config.max_superpoints.min(q.len()), derive_seed(config.seed, "fps", 1));
    timings.mark("superpoints", &mut clock);

    let (desc_p, desc_q) = match imported {
        Some(load) => load(&sp_p, &sp_q)?,
        None => (
            describe_points(p, &index_p, &sp_p.indices, config.descriptor_support, config.bins)?,
            describe_points(q, &index_q, &sp_q.indices, config.descriptor_support, config.bins)?,
        ),
    };
    timings.mark("descriptors", &mut clock);

    let coarse = coarse_match(&desc_p, &desc_q, &config.coarse)?;
    let groups = extract_local_groups(p, &index_p, q, &index_q, &sp_p, &sp_q, &coarse, config.group_size);
    timings.mark("coarse", &mut clock);

    let support = fine_support(config);
    let (slot_p, fine_p) = group_descriptors(p, &index_p, &groups.src_indices, support, config.bins)?;
    let (slot_q, fine_q) = group_descriptors(q, &index_q, &groups.dst_indices, support, config.bins)?;
    let costs = group_costs(&groups, (&slot_p, &slot_q), (&fine_p, &fine_q));
    let plans = crate::matching::sinkhorn_batch(&costs, groups.g, &groups.src_pad, &groups.dst_pad, &config.sinkhorn)?;
    let correspondences = extract_matches(&groups, &plans, config.confidence_min);
    timings.mark("fine", &mut clock);

    let mut ransac_params = config.ransac;
    ransac_params.mode = config.mode;
    let ransac = ransac_register(p, q, &correspondences, &ransac_params)?;
    timings.mark("ransac", &mut clock);

    Ok(RegistrationOutput {
        transform: pair.denormalize_transform(&ransac.transform),
        normalized_transform: ransac.transform,
        ransac,
        correspondences,
        coarse,
        superpoints: (sp_p, sp_q),
        timings,
    })
}
