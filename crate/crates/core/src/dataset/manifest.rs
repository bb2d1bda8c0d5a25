use std::path::Path;

use nalgebra::Vector3;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_overlap, DatasetError, PartialReconstruction, DEFAULT_OVERLAP_TAU};
use crate::geometry::{NormalizationInfo, NormalizationMode, OrientedCloud, SimilarityTransform};
use crate::recon::export_cloud_ply;
use crate::rng::derived_rng;

pub const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifestParams {
    /// Pairs need overlap strictly above this.
    pub min_overlap: f64,
    pub overlap_tau: f64,
    pub mode: NormalizationMode,
    /// Log-uniform bounds for the Sim3 scale; ignored in SE3 mode.
    pub scale_range: (f64, f64),
    /// Half-width of the translation box, in scene-normalized units.
    pub translation_extent: f64,
    pub seed: u64,
}

impl Default for ManifestParams {
    fn default() -> Self {
        Self {
            min_overlap: 0.30,
            overlap_tau: DEFAULT_OVERLAP_TAU,
            mode: NormalizationMode::Sim3,
            scale_range: (0.5, 2.0),
            translation_extent: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtTransform {
    pub s: f64,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl From<&SimilarityTransform> for GtTransform {
    fn from(t: &SimilarityTransform) -> Self {
        Self { s: t.scale, r: t.rotation_row_major(), t: [t.translation.x, t.translation.y, t.translation.z] }
    }
}

impl GtTransform {
    pub fn to_transform(&self) -> SimilarityTransform {
        SimilarityTransform::from_row_major(self.s, &self.r, &self.t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    /// PLY of the source partial, relative to the manifest.
    pub a: String,
    /// PLY of the perturbed target partial, relative to the manifest.
    pub b: String,
    pub a_partial: usize,
    pub b_partial: usize,
    pub overlap: f64,
    /// Maps cloud `a` onto the stored cloud `b`.
    pub gt: GtTransform,
    pub mode: NormalizationMode,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub schema: u32,
    pub config: serde_json::Value,
    pub pairs: Vec<PairEntry>,
}

pub fn partial_file(index: usize) -> String {
    format!("partials/partial_{index:03}.ply")
}

fn pair_file(index: usize) -> String {
    format!("pairs/pair_{index:04}_b.ply")
}

fn perturbation(params: &ManifestParams, frame: &NormalizationInfo, stream: u64) -> SimilarityTransform {
    let mut rng = derived_rng(params.seed, "perturbation", stream);
    let tau = std::f64::consts::TAU;
    let (alpha, beta, gamma) = (rng.random::<f64>() * tau, rng.random::<f64>() * tau, rng.random::<f64>() * tau);
    let e = params.translation_extent;
    let t = Vector3::new(
        rng.random_range(-e..=e),
        rng.random_range(-e..=e),
        rng.random_range(-e..=e),
    );
    let s = match params.mode {
        NormalizationMode::Se3 => 1.0,
        NormalizationMode::Sim3 => {
            let (lo, hi) = params.scale_range;
            (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
        }
    };
    let local = SimilarityTransform::new(s, SimilarityTransform::from_euler(alpha, beta, gamma), t);
    // perturb about the scene centroid so clouds stay near their original extent
    frame.to_input().compose(&local).compose(&frame.to_normalized())
}

/// All partial pairs overlapping by more than `min_overlap` in the parent
/// frame, each with its target perturbed by a seeded random similarity.
pub fn build_pair_manifest(
    partials: &[PartialReconstruction],
    frame: &NormalizationInfo,
    params: &ManifestParams,
    config: serde_json::Value,
) -> Result<PairManifest, DatasetError> {
    if partials.len() < 2 {
        return Err(DatasetError::TooFewPartials(partials.len()));
    }
    if !(params.scale_range.0 > 0.0 && params.scale_range.0 <= params.scale_range.1) {
        return Err(DatasetError::InvalidParameter("scale_range must satisfy 0 < lo ≤ hi".into()));
    }
    let normalized: Vec<OrientedCloud> = partials.iter().map(|p| frame.apply(&p.cloud)).collect();
    let n = partials.len();
    let candidates: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let identity = SimilarityTransform::identity();
    let overlaps: Vec<f64> = candidates
        .par_iter()
        .map(|&(i, j)| compute_overlap(&normalized[i], &normalized[j], &identity, params.overlap_tau))
        .collect();
    let mut pairs = Vec::new();
    for (&(i, j), &overlap) in candidates.iter().zip(&overlaps) {
        if !(overlap > params.min_overlap) {
            continue;
        }
        let gt = perturbation(params, frame, (i * n + j) as u64);
        let (oa, ob) = (partials[i].origin, partials[j].origin);
        pairs.push(PairEntry {
            a: partial_file(i),
            b: pair_file(pairs.len()),
            a_partial: i,
            b_partial: j,
            overlap,
            gt: GtTransform::from(&gt),
            mode: params.mode,
            origin: if oa == ob { oa.label().to_string() } else { "mixed".to_string() },
        });
    }
    Ok(PairManifest { schema: MANIFEST_SCHEMA, config, pairs })
}

/// The target cloud of `entry` exactly as stored: partial `b` under `gt`.
pub fn perturbed_cloud(entry: &PairEntry, partials: &[PartialReconstruction]) -> OrientedCloud {
    entry.gt.to_transform().apply(&partials[entry.b_partial].cloud)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Writes every partial, every perturbed target and `manifest.json` under `dir`.
pub fn write_dataset(dir: &Path, partials: &[PartialReconstruction], manifest: &PairManifest) -> Result<(), DatasetError> {
    for sub in ["partials", "pairs"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    partials
        .par_iter()
        .enumerate()
        .try_for_each(|(i, p)| export_cloud_ply(&p.cloud, dir.join(partial_file(i))))?;
    manifest
        .pairs
        .par_iter()
        .try_for_each(|e| export_cloud_ply(&perturbed_cloud(e, partials), dir.join(&e.b)))?;
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<PairManifest, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let m: PairManifest = serde_json::from_str(&text)?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(DatasetError::InvalidParameter(format!("unsupported manifest schema {}", m.schema)));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_partial, PartialOrigin};
    use crate::geometry::{fit_umeyama, normalize_cloud, SigmaConvention};
    use crate::recon::{extract_cloud, read_cloud_ply};
    use crate::synthetic::{synthetic_scene, SceneParams};
    use crate::Reconstruction;

    fn setup() -> (Reconstruction, NormalizationInfo) {
        let r = synthetic_scene(&SceneParams { num_points: 800, num_images: 16, ..Default::default() }, 11).unwrap();
        let (_, frame) = normalize_cloud(&extract_cloud(&r).unwrap(), SigmaConvention::PerPoint).unwrap();
        (r, frame)
    }

    #[test]
    fn identical_partials_pair_up() {
        let (r, frame) = setup();
        let ids: Vec<u32> = r.images.keys().copied().take(8).collect();
        let p = build_partial(&r, &ids, 2, PartialOrigin::Trajectory, 0).unwrap();
        let m = build_pair_manifest(&[p.clone(), p], &frame, &ManifestParams::default(), serde_json::json!({})).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].overlap, 1.0);
    }

    #[test]
    fn too_few_partials() {
        let (r, frame) = setup();
        let ids: Vec<u32> = r.images.keys().copied().collect();
        let p = build_partial(&r, &ids, 2, PartialOrigin::Trajectory, 0).unwrap();
        assert!(matches!(build_pair_manifest(&[p], &frame, &ManifestParams::default(), serde_json::json!({})), Err(DatasetError::TooFewPartials(1))));
    }

    #[test]
    fn disjoint_partials_excluded() {
        let (r, frame) = setup();
        let ids: Vec<u32> = r.images.keys().copied().collect();
        let a = build_partial(&r, &ids, 2, PartialOrigin::Trajectory, 0).unwrap();
        let mut b = a.clone();
        b.cloud = SimilarityTransform::rigid(nalgebra::Matrix3::identity(), Vector3::new(1e3, 0.0, 0.0)).apply(&b.cloud);
        let m = build_pair_manifest(&[a, b], &frame, &ManifestParams::default(), serde_json::json!({})).unwrap();
        assert!(m.pairs.is_empty());
    }

    #[test]
    fn gt_round_trips_and_cheat_matcher_recovers_it() {
        let (r, frame) = setup();
        let ids: Vec<u32> = r.images.keys().copied().collect();
        let a = build_partial(&r, &ids[..10], 2, PartialOrigin::Trajectory, 0).unwrap();
        let b = build_partial(&r, &ids[4..], 2, PartialOrigin::Trajectory, 1).unwrap();
        let partials = vec![a, b];
        let params = ManifestParams { min_overlap: 0.0, seed: 5, ..Default::default() };
        let m = build_pair_manifest(&partials, &frame, &params, serde_json::json!({})).unwrap();
        let e = &m.pairs[0];
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &partials, &m).unwrap();
        let stored = read_cloud_ply(dir.path().join(&e.b)).unwrap();
        let gt = e.gt.to_transform();
        let moved = gt.apply(&partials[1].cloud);
        for (x, y) in moved.points.iter().zip(&stored.points) {
            assert!((x - y).norm() < 1e-9);
        }
        // correspondences by shared point id
        let (pa, pb) = (&partials[0], &partials[1]);
        let mut src = vec![];
        let mut dst = vec![];
        for (ia, id) in pa.point_ids.iter().enumerate() {
            if let Ok(ib) = pb.point_ids.binary_search(id) {
                src.push(pa.cloud.points[ia]);
                dst.push(stored.points[ib]);
            }
        }
        let fit = fit_umeyama(&src, &dst, None, true).unwrap();
        assert!((fit.scale - gt.scale).abs() < 1e-9);
        assert!((fit.rotation - gt.rotation).abs().max() < 1e-9);
        assert!((fit.translation - gt.translation).norm() < 1e-9 * (1.0 + gt.translation.norm()));
        let back = read_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(back, m);
    }
}
