//! Inlier ratio, feature-matching recall, registration recall and report
//! aggregation.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_pair, NormalizationMode, OrientedCloud, SigmaConvention, SimilarityTransform};
use crate::matching::CorrespondenceSet;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("matrix is not a rotation")]
    NotARotation,
    #[error("cannot aggregate an empty list")]
    EmptyList,
    #[error("pair has no ground-truth transform")]
    MissingGroundTruth,
    #[error("cannot normalize pair: {0}")]
    Geometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricThresholds {
    pub tau_ir: f64,
    pub tau_fmr: f64,
    pub rr_rot_deg: f64,
    pub rr_trans: f64,
}

impl Default for MetricThresholds {
    fn default() -> Self {
        Self { tau_ir: 0.1, tau_fmr: 0.05, rr_rot_deg: 5.0, rr_trans: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InlierRatio {
    pub ratio: f64,
    pub within: usize,
    pub total: usize,
    /// No correspondences at all; the ratio is 0 by convention.
    pub empty: bool,
}

/// Fraction of pairs with `‖gt(p) − q‖ < tau`.
pub fn inlier_ratio(
    corrs: &CorrespondenceSet,
    src: &OrientedCloud,
    dst: &OrientedCloud,
    gt: &SimilarityTransform,
    tau: f64,
) -> InlierRatio {
    let within = corrs
        .pairs
        .iter()
        .filter(|&&[i, j]| (gt.transform_point(&src.points[i]) - dst.points[j]).norm() < tau)
        .count();
    let total = corrs.len();
    InlierRatio {
        ratio: if total == 0 { 0.0 } else { within as f64 / total as f64 },
        within,
        total,
        empty: total == 0,
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<(), MetricsError> {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !(ortho < 1e-6) || !(r.determinant() > 0.0) {
        return Err(MetricsError::NotARotation);
    }
    Ok(())
}

/// Geodesic angle of `Rᵀ·R_gt`, in radians.
///
/// Evaluated as `atan2(‖skew‖, trace − 1)`, which equals
/// `acos((trace − 1)/2)` but keeps full precision near 0 and π.
pub fn rotation_error(r: &Matrix3<f64>, r_gt: &Matrix3<f64>) -> Result<f64, MetricsError> {
    check_rotation(r)?;
    check_rotation(r_gt)?;
    let m = |i: usize, j: usize| (0..3).map(|k| r[(k, i)] * r_gt[(k, j)]).sum::<f64>();
    let trace = m(0, 0) + m(1, 1) + m(2, 2);
    let skew = Vector3::new(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)).norm();
    Ok(skew.atan2(trace - 1.0).clamp(0.0, std::f64::consts::PI))
}

pub fn translation_error(t: &Vector3<f64>, t_gt: &Vector3<f64>) -> f64 {
    (t - t_gt).norm()
}

/// Share of pairs whose inlier ratio is strictly above `tau_fmr`.
pub fn feature_matching_recall(ratios: &[f64], tau_fmr: f64) -> Result<f64, MetricsError> {
    if ratios.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    Ok(ratios.iter().filter(|&&r| r > tau_fmr).count() as f64 / ratios.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    #[serde(default)]
    pub label: String,
    pub inlier_ratio: f64,
    pub inliers_within_tau: usize,
    pub num_matches: usize,
    pub empty: bool,
    /// `None` when registration failed.
    pub rot_error_rad: Option<f64>,
    pub trans_error: Option<f64>,
    pub registered: bool,
}

impl PairEvaluation {
    fn passes(&self, t: &MetricThresholds) -> bool {
        match (self.rot_error_rad, self.trans_error) {
            (Some(r), Some(e)) => r.to_degrees() < t.rr_rot_deg && e < t.rr_trans,
            _ => false,
        }
    }
}

/// Share of pairs with rotation and translation errors both strictly below
/// their thresholds. Failed registrations count as misses.
pub fn registration_recall(evals: &[PairEvaluation], thresholds: &MetricThresholds) -> f64 {
    if evals.is_empty() {
        return 0.0;
    }
    evals.iter().filter(|e| e.passes(thresholds)).count() as f64 / evals.len() as f64
}

/// Scores one pair. Clouds, ground truth and estimate are in input
/// coordinates; every distance is measured after normalizing the pair the
/// same way the registration pipeline does.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_pair(
    label: &str,
    src: &OrientedCloud,
    dst: &OrientedCloud,
    mode: NormalizationMode,
    gt: Option<&SimilarityTransform>,
    corrs: &CorrespondenceSet,
    estimate: Option<&SimilarityTransform>,
    thresholds: &MetricThresholds,
) -> Result<PairEvaluation, MetricsError> {
    let gt = gt.ok_or(MetricsError::MissingGroundTruth)?;
    let pair = normalize_pair(src, dst, mode, SigmaConvention::PerPoint).map_err(|e| MetricsError::Geometry(e.to_string()))?;
    let gt_n = pair.normalize_transform(gt);
    let ir = inlier_ratio(corrs, &pair.src, &pair.dst, &gt_n, thresholds.tau_ir);
    let (rot, trans) = match estimate {
        Some(est) => {
            let est_n = pair.normalize_transform(est);
            (
                Some(rotation_error(&est_n.rotation, &gt_n.rotation)?),
                Some(translation_error(&est_n.translation, &gt_n.translation)),
            )
        }
        None => (None, None),
    };
    let mut eval = PairEvaluation {
        label: label.to_string(),
        inlier_ratio: ir.ratio,
        inliers_within_tau: ir.within,
        num_matches: ir.total,
        empty: ir.empty,
        rot_error_rad: rot,
        trans_error: trans,
        registered: false,
    };
    eval.registered = eval.passes(thresholds);
    Ok(eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub ir_mean: f64,
    pub ir_pooled: f64,
    pub fmr: f64,
    pub rr: f64,
    pub matches_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub config: serde_json::Value,
    pub pairs: Vec<PairEvaluation>,
    pub aggregates: Aggregates,
}

fn sorted_mean(mut v: Vec<f64>) -> f64 {
    // summing in sorted order makes the mean independent of pair order
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn aggregate_rows(evals: &[PairEvaluation], thresholds: &MetricThresholds) -> Result<Aggregates, MetricsError> {
    if evals.is_empty() {
        return Err(MetricsError::EmptyList);
    }
    let ratios: Vec<f64> = evals.iter().map(|e| e.inlier_ratio).collect();
    let within: usize = evals.iter().map(|e| e.inliers_within_tau).sum();
    let total: usize = evals.iter().map(|e| e.num_matches).sum();
    Ok(Aggregates {
        ir_mean: sorted_mean(ratios.clone()),
        ir_pooled: if total == 0 { 0.0 } else { within as f64 / total as f64 },
        fmr: feature_matching_recall(&ratios, thresholds.tau_fmr)?,
        rr: registration_recall(evals, thresholds),
        matches_mean: total as f64 / evals.len() as f64,
    })
}

pub fn aggregate(
    evals: Vec<PairEvaluation>,
    thresholds: &MetricThresholds,
    config: serde_json::Value,
) -> Result<BenchmarkReport, MetricsError> {
    let aggregates = aggregate_rows(&evals, thresholds)?;
    Ok(BenchmarkReport { schema: REPORT_SCHEMA, config, pairs: evals, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Point3, Unit};
    use proptest::prelude::*;

    fn row(ir: f64, rot_deg: Option<f64>, trans: Option<f64>) -> PairEvaluation {
        PairEvaluation {
            label: String::new(),
            inlier_ratio: ir,
            inliers_within_tau: (ir * 10.0).round() as usize,
            num_matches: 10,
            empty: false,
            rot_error_rad: rot_deg.map(f64::to_radians),
            trans_error: trans,
            registered: false,
        }
    }

    fn pts(n: usize) -> OrientedCloud {
        OrientedCloud::from_points((0..n).map(|i| Point3::new(i as f64, (i * i % 7) as f64, (i % 3) as f64)).collect()).unwrap()
    }

    #[test]
    fn exact_matches_give_unit_ratio() {
        let p = pts(20);
        let gt = SimilarityTransform::from_axis_angle(Vector3::z(), 0.4, 1.0, Vector3::new(1.0, 2.0, 3.0));
        let q = gt.apply(&p);
        let c = CorrespondenceSet::unscored((0..20).map(|i| [i, i]).collect());
        assert_eq!(inlier_ratio(&c, &p, &q, &gt, 0.1).ratio, 1.0);
    }

    #[test]
    fn empty_set_is_flagged() {
        let p = pts(5);
        let r = inlier_ratio(&CorrespondenceSet::default(), &p, &p, &SimilarityTransform::identity(), 0.1);
        assert_eq!(r.ratio, 0.0);
        assert!(r.empty);
    }

    #[test]
    fn constructed_seven_of_twenty() {
        let p = pts(20);
        let q = OrientedCloud::from_points(
            p.points.iter().enumerate().map(|(i, x)| if i < 7 { *x + Vector3::new(0.05, 0.0, 0.0) } else { *x + Vector3::new(0.0, 0.2, 0.0) }).collect(),
        )
        .unwrap();
        let c = CorrespondenceSet::unscored((0..20).map(|i| [i, i]).collect());
        assert!((inlier_ratio(&c, &p, &q, &SimilarityTransform::identity(), 0.1).ratio - 0.35).abs() < 1e-15);
    }

    #[test]
    fn rotation_error_examples() {
        let r = SimilarityTransform::from_axis_angle(Vector3::new(1.0, 2.0, -0.5), 0.7, 1.0, Vector3::zeros()).rotation;
        assert_eq!(rotation_error(&r, &r).unwrap(), 0.0);
        for axis in [Vector3::x(), Vector3::new(0.3, -0.2, 0.9), Vector3::new(-1.0, 1.0, 1.0)] {
            let extra = nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(axis), 10f64.to_radians());
            let e = rotation_error(&(extra.matrix() * r), &r).unwrap();
            assert!((e - 10f64.to_radians()).abs() < 1e-9);
        }
        assert_eq!(rotation_error(&(Matrix3::identity() * 2.0), &r), Err(MetricsError::NotARotation));
    }

    #[test]
    fn translation_three_four_five() {
        let t = Vector3::new(0.1, -0.2, 0.3);
        assert!((translation_error(&(t + Vector3::new(0.03, 0.04, 0.0)), &t) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn fmr_boundary() {
        assert_eq!(feature_matching_recall(&[1.0, 1.0], 0.05).unwrap(), 1.0);
        assert!((feature_matching_recall(&[0.04, 0.05, 0.06], 0.05).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(feature_matching_recall(&[], 0.05), Err(MetricsError::EmptyList));
    }

    #[test]
    fn rr_needs_both_errors() {
        let t = MetricThresholds::default();
        assert_eq!(registration_recall(&[row(1.0, Some(0.0), Some(0.0))], &t), 1.0);
        assert_eq!(registration_recall(&[row(1.0, Some(4.9), Some(0.051))], &t), 0.0);
        let mixed = vec![
            row(0.5, Some(1.0), Some(0.01)),
            row(0.5, Some(5.0), Some(0.01)),
            row(0.5, Some(4.99), Some(0.0499)),
            row(0.5, None, None),
            row(0.5, Some(0.1), Some(0.05)),
            row(0.5, Some(6.0), Some(0.1)),
            row(0.5, Some(2.0), Some(0.02)),
            row(0.5, Some(3.0), Some(0.2)),
            row(0.5, Some(0.0), Some(0.0)),
            row(0.5, Some(179.0), Some(0.0)),
        ];
        assert!((registration_recall(&mixed, &t) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn perfect_pair_evaluates_registered() {
        let p = pts(30);
        let gt = SimilarityTransform::from_axis_angle(Vector3::y(), 1.0, 2.0, Vector3::new(0.5, 0.0, -1.0));
        let q = gt.apply(&p);
        let c = CorrespondenceSet::unscored((0..30).map(|i| [i, i]).collect());
        let e = evaluate_pair("x", &p, &q, NormalizationMode::Sim3, Some(&gt), &c, Some(&gt), &MetricThresholds::default()).unwrap();
        assert_eq!(e.inlier_ratio, 1.0);
        assert!(e.registered);
        assert_eq!(
            evaluate_pair("x", &p, &q, NormalizationMode::Sim3, None, &c, Some(&gt), &MetricThresholds::default()),
            Err(MetricsError::MissingGroundTruth)
        );
    }

    #[test]
    fn aggregates_match_recomputation() {
        let rows = vec![row(0.3, Some(1.0), Some(0.01)), row(0.0, None, None), row(0.04, Some(10.0), Some(0.01))];
        let t = MetricThresholds::default();
        let rep = aggregate(rows.clone(), &t, serde_json::json!({})).unwrap();
        assert!((rep.aggregates.ir_mean - (0.3 + 0.0 + 0.04) / 3.0).abs() < 1e-15);
        assert!((rep.aggregates.fmr - 1.0 / 3.0).abs() < 1e-15);
        assert!((rep.aggregates.rr - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rep.aggregates.matches_mean, 10.0);
        assert!((rep.aggregates.ir_pooled - 3.0 / 30.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rotation_error_is_symmetric(a in prop::array::uniform3(-3.0f64..3.0), b in prop::array::uniform3(-3.0f64..3.0)) {
            let ra = nalgebra::Rotation3::new(Vector3::from(a)).into_inner();
            let rb = nalgebra::Rotation3::new(Vector3::from(b)).into_inner();
            prop_assert_eq!(rotation_error(&ra, &rb).unwrap(), rotation_error(&rb, &ra).unwrap());
        }

        #[test]
        fn recalls_monotone_in_thresholds(
            ratios in prop::collection::vec(0.0f64..1.0, 1..40),
            errs in prop::collection::vec((0.0f64..20.0, 0.0f64..0.2), 1..40),
            lo in 0.0f64..0.5, hi_extra in 0.0f64..0.5,
        ) {
            let hi = lo + hi_extra;
            // raising the IR threshold can only lower FMR
            prop_assert!(feature_matching_recall(&ratios, hi).unwrap() <= feature_matching_recall(&ratios, lo).unwrap());
            let rows: Vec<_> = errs.iter().map(|&(r, t)| row(0.5, Some(r), Some(t))).collect();
            let tl = MetricThresholds { rr_rot_deg: 1.0 + lo * 10.0, rr_trans: lo / 5.0, ..Default::default() };
            let th = MetricThresholds { rr_rot_deg: 1.0 + hi * 10.0, rr_trans: hi / 5.0, ..Default::default() };
            prop_assert!(registration_recall(&rows, &tl) <= registration_recall(&rows, &th));
        }

        #[test]
        fn aggregate_permutation_invariant(vals in prop::collection::vec((0.0f64..1.0, 0.0f64..10.0, 0.0f64..0.1), 1..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let rows: Vec<_> = vals.iter().map(|&(ir, r, t)| row(ir, Some(r), Some(t))).collect();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let t = MetricThresholds::default();
            prop_assert_eq!(aggregate_rows(&rows, &t).unwrap(), aggregate_rows(&shuffled, &t).unwrap());
        }

        #[test]
        fn ir_invariant_under_common_rigid_motion(axis in prop::array::uniform3(-2.0f64..2.0), shift in prop::array::uniform3(-5.0f64..5.0)) {
            let p = pts(25);
            let gt = SimilarityTransform::from_axis_angle(Vector3::x(), 0.3, 1.0, Vector3::new(0.02, 0.0, 0.0));
            let q = OrientedCloud::from_points(gt.apply(&p).points.iter().enumerate().map(|(i, x)| x + Vector3::new(0.0, 0.0, 0.01 * i as f64 + 0.0047)).collect()).unwrap();
            let c = CorrespondenceSet::unscored((0..25).map(|i| [i, i]).collect());
            let g = SimilarityTransform::rigid(nalgebra::Rotation3::new(Vector3::from(axis)).into_inner(), Vector3::from(shift));
            let gt2 = g.compose(&gt).compose(&g.inverse());
            let a = inlier_ratio(&c, &p, &q, &gt, 0.1).within;
            let b = inlier_ratio(&c, &g.apply(&p), &g.apply(&q), &gt2, 0.1).within;
            prop_assert_eq!(a, b);
        }
    }
}
