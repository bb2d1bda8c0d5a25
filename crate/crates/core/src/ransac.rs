//! Score-weighted three-point RANSAC over putative correspondences.

use nalgebra::Point3;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{fit_umeyama, NormalizationMode, OrientedCloud, SimilarityTransform};
use crate::matching::CorrespondenceSet;
use crate::rng::rng_from_seed;

#[derive(Debug, Error, PartialEq)]
pub enum RansacError {
    #[error("need at least 3 correspondences, have {have}")]
    InsufficientCorrespondences { have: usize },
    #[error("no sample produced a model with at least 3 inliers")]
    NoModelFound,
    #[error("invalid RANSAC parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub inlier_threshold: f64,
    pub max_correspondences: usize,
    pub max_iterations: usize,
    pub confidence: f64,
    pub mode: NormalizationMode,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.05,
            max_correspondences: 1000,
            max_iterations: 50_000,
            confidence: 0.999,
            mode: NormalizationMode::Sim3,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), RansacError> {
        if !(self.inlier_threshold > 0.0) {
            return Err(RansacError::InvalidParameter("inlier_threshold must be > 0".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(RansacError::InvalidParameter("confidence must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 || self.max_correspondences < 3 {
            return Err(RansacError::InvalidParameter(
                "max_iterations must be ≥ 1 and max_correspondences ≥ 3".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub transform: SimilarityTransform,
    /// Over `used_correspondence_indices`.
    pub inlier_mask: Vec<bool>,
    pub iterations: usize,
    /// Rows of the input correspondence set that RANSAC actually saw.
    pub used_correspondence_indices: Vec<usize>,
}

impl RegistrationResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&m| m).count()
    }
}

fn sampling_weights(scores: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = scores.iter().map(|&s| if s.is_finite() && s > 0.0 { s } else { 0.0 }).collect();
    if w.iter().all(|&x| x == 0.0) {
        vec![1.0; scores.len()]
    } else {
        w
    }
}

/// Indices of a score-weighted sample without replacement, ascending.
///
/// Uses exponential keys `u^(1/w)`, which realise sequential proportional
/// draws in a single pass. Returns every index when the set already fits.
pub fn subsample_indices(corrs: &CorrespondenceSet, max: usize, seed: u64) -> Vec<usize> {
    let n = corrs.len();
    if n <= max {
        return (0..n).collect();
    }
    let weights = sampling_weights(&corrs.scores);
    let mut rng = rng_from_seed(seed);
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut picked: Vec<usize> = keys[..max].iter().map(|&(_, i)| i).collect();
    picked.sort_unstable();
    picked
}

pub fn subsample_correspondences(corrs: &CorrespondenceSet, params: &RansacParams) -> CorrespondenceSet {
    corrs.subset(&subsample_indices(corrs, params.max_correspondences, params.seed))
}

/// Inliers are pairs with `‖T(p) − q‖ < threshold`; rms is over inliers only.
pub fn count_inliers(
    transform: &SimilarityTransform,
    src: &OrientedCloud,
    dst: &OrientedCloud,
    corrs: &CorrespondenceSet,
    threshold: f64,
) -> (usize, Vec<bool>, f64) {
    let mut mask = Vec::with_capacity(corrs.len());
    let mut count = 0;
    let mut sq = 0.0;
    for &[i, j] in &corrs.pairs {
        let d2 = (transform.transform_point(&src.points[i]) - dst.points[j]).norm_squared();
        let inlier = d2.sqrt() < threshold;
        if inlier {
            count += 1;
            sq += d2;
        }
        mask.push(inlier);
    }
    let rms = if count > 0 { (sq / count as f64).sqrt() } else { 0.0 };
    (count, mask, rms)
}

fn near_collinear(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> bool {
    let sides = [(b - a).norm(), (c - b).norm(), (a - c).norm()];
    let longest = sides.iter().copied().fold(0.0, f64::max);
    if longest == 0.0 {
        return true;
    }
    // smallest altitude drops onto the longest side
    let area2 = (b - a).cross(&(c - a)).norm();
    area2 / longest < 1e-6 * longest
}

fn draw_weighted(cumulative: &[f64], rng: &mut crate::rng::Rng) -> usize {
    let total = *cumulative.last().expect("non-empty");
    let u = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

pub(crate) fn adaptive_bound(confidence: f64, inlier_ratio: f64, cap: usize) -> usize {
    let w3 = inlier_ratio.powi(3);
    if w3 >= 1.0 {
        return 1;
    }
    if w3 <= 0.0 {
        return cap;
    }
    let n = ((1.0 - confidence).ln() / (1.0 - w3).ln()).ceil();
    if n.is_finite() && n < cap as f64 {
        (n as usize).max(1)
    } else {
        cap
    }
}

pub fn ransac_register(
    src: &OrientedCloud,
    dst: &OrientedCloud,
    corrs: &CorrespondenceSet,
    params: &RansacParams,
) -> Result<RegistrationResult, RansacError> {
    params.validate()?;
    if corrs.len() < 3 {
        return Err(RansacError::InsufficientCorrespondences { have: corrs.len() });
    }
    let used = subsample_indices(corrs, params.max_correspondences, params.seed);
    let work = corrs.subset(&used);
    let with_scale = params.mode.with_scale();
    let n = work.len();

    let mut cumulative = sampling_weights(&work.scores);
    for k in 1..n {
        cumulative[k] += cumulative[k - 1];
    }
    let src_pts: Vec<Point3<f64>> = work.pairs.iter().map(|&[i, _]| src.points[i]).collect();
    let dst_pts: Vec<Point3<f64>> = work.pairs.iter().map(|&[_, j]| dst.points[j]).collect();

    let mut rng = rng_from_seed(crate::rng::derive_seed(params.seed, "ransac", 0));
    let mut best: Option<(SimilarityTransform, usize, f64)> = None;
    let mut bound = params.max_iterations;
    let mut iterations = 0;
    while iterations < bound {
        iterations += 1;
        let a = draw_weighted(&cumulative, &mut rng);
        let mut b = draw_weighted(&cumulative, &mut rng);
        let mut c = draw_weighted(&cumulative, &mut rng);
        let mut guard = 0;
        while (b == a || c == a || c == b) && guard < 64 {
            if b == a {
                b = draw_weighted(&cumulative, &mut rng);
            } else {
                c = draw_weighted(&cumulative, &mut rng);
            }
            guard += 1;
        }
        if b == a || c == a || c == b {
            continue;
        }
        if near_collinear(&src_pts[a], &src_pts[b], &src_pts[c]) || near_collinear(&dst_pts[a], &dst_pts[b], &dst_pts[c]) {
            continue;
        }
        let Ok(t) = fit_umeyama(
            &[src_pts[a], src_pts[b], src_pts[c]],
            &[dst_pts[a], dst_pts[b], dst_pts[c]],
            None,
            with_scale,
        ) else {
            continue;
        };
        let (count, _, rms) = count_inliers(&t, src, dst, &work, params.inlier_threshold);
        let better = match &best {
            None => count > 0,
            Some((_, bc, br)) => count > *bc || (count == *bc && rms < *br),
        };
        if better {
            best = Some((t, count, rms));
            bound = adaptive_bound(params.confidence, count as f64 / n as f64, params.max_iterations);
        }
    }

    let (mut transform, mut count, _) = match best {
        Some(b) if b.1 >= 3 => b,
        _ => return Err(RansacError::NoModelFound),
    };
    let (_, mut mask, _) = count_inliers(&transform, src, dst, &work, params.inlier_threshold);
    // refit on the consensus set while it does not shrink
    for _ in 0..5 {
        let idx: Vec<usize> = (0..n).filter(|&k| mask[k]).collect();
        let s: Vec<Point3<f64>> = idx.iter().map(|&k| src_pts[k]).collect();
        let d: Vec<Point3<f64>> = idx.iter().map(|&k| dst_pts[k]).collect();
        let Ok(refit) = fit_umeyama(&s, &d, None, with_scale) else {
            break;
        };
        let (rc, rmask, _) = count_inliers(&refit, src, dst, &work, params.inlier_threshold);
        if rc < count {
            break;
        }
        let stable = rmask == mask;
        transform = refit;
        count = rc;
        mask = rmask;
        if stable {
            break;
        }
    }
    Ok(RegistrationResult {
        transform,
        inlier_mask: mask,
        iterations,
        used_correspondence_indices: used,
    })
}
