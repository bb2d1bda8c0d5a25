use nalgebra::{DMatrix, Matrix3, Point3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, OrientedCloud, SimilarityTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    /// Both clouds divided by `σ_P`; relative scale is preserved.
    Se3,
    /// Each cloud divided by its own `σ/√2`; relative scale is removed.
    #[default]
    Sim3,
}

impl NormalizationMode {
    pub fn with_scale(self) -> bool {
        matches!(self, NormalizationMode::Sim3)
    }
}

/// How `σ` is read off the centered cloud.
///
/// `Raw` is the largest singular value of the centered N×3 matrix. It grows
/// with `√N`, which makes fixed thresholds mean different things for clouds
/// of different sizes. `PerPoint` divides that value by `√N` (the standard
/// deviation along the principal axis) and is what the registration pipeline
/// uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConvention {
    Raw,
    #[default]
    PerPoint,
}

/// Maps an input frame to its normalized frame: `x ↦ (x − centroid) / divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationInfo {
    pub centroid: Point3<f64>,
    pub divisor: f64,
    pub mode: NormalizationMode,
    pub convention: SigmaConvention,
}

impl NormalizationInfo {
    pub fn to_normalized(&self) -> SimilarityTransform {
        let s = 1.0 / self.divisor;
        SimilarityTransform::new(s, Matrix3::identity(), -(s * self.centroid.coords))
    }

    pub fn to_input(&self) -> SimilarityTransform {
        SimilarityTransform::new(self.divisor, Matrix3::identity(), self.centroid.coords)
    }

    pub fn apply(&self, cloud: &OrientedCloud) -> OrientedCloud {
        let mut out = cloud.clone();
        for p in &mut out.points {
            *p = Point3::from((*p - self.centroid) / self.divisor);
        }
        out
    }
}

/// Largest singular value of the cloud centered at `centroid`.
pub fn largest_singular_value(points: &[Point3<f64>], centroid: &Point3<f64>, convention: SigmaConvention) -> f64 {
    let n = points.len();
    let m = DMatrix::from_fn(n, 3, |r, c| points[r][c] - centroid[c]);
    let sigma = m
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    match convention {
        SigmaConvention::Raw => sigma,
        SigmaConvention::PerPoint => sigma / (n as f64).sqrt(),
    }
}

fn sigma_of(cloud: &OrientedCloud, convention: SigmaConvention) -> Result<(Point3<f64>, f64), GeometryError> {
    let c = cloud.centroid();
    let sigma = largest_singular_value(&cloud.points, &c, convention);
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(GeometryError::DegenerateCloud);
    }
    Ok((c, sigma))
}

/// Sim(3)-style normalization of a single cloud (`σ/√2`).
pub fn normalize_cloud(
    cloud: &OrientedCloud,
    convention: SigmaConvention,
) -> Result<(OrientedCloud, NormalizationInfo), GeometryError> {
    let (centroid, sigma) = sigma_of(cloud, convention)?;
    let info = NormalizationInfo {
        centroid,
        divisor: sigma / std::f64::consts::SQRT_2,
        mode: NormalizationMode::Sim3,
        convention,
    };
    Ok((info.apply(cloud), info))
}

/// A source/target pair in their joint normalized frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPair {
    pub src: OrientedCloud,
    pub dst: OrientedCloud,
    pub src_info: NormalizationInfo,
    pub dst_info: NormalizationInfo,
}

impl NormalizedPair {
    /// Express an input-frame transform `src → dst` in the normalized frame.
    pub fn normalize_transform(&self, t: &SimilarityTransform) -> SimilarityTransform {
        self.dst_info
            .to_normalized()
            .compose(t)
            .compose(&self.src_info.to_input())
    }

    /// Map a normalized-frame transform back to the input frames.
    pub fn denormalize_transform(&self, t: &SimilarityTransform) -> SimilarityTransform {
        self.dst_info
            .to_input()
            .compose(t)
            .compose(&self.src_info.to_normalized())
    }
}

/// Center each cloud on its own centroid and rescale.
///
/// Sim3 divides `P` by `σ_P/√2` and `Q` by `σ_Q/√2`; SE3 divides both by `σ_P`.
pub fn normalize_pair(
    p: &OrientedCloud,
    q: &OrientedCloud,
    mode: NormalizationMode,
    convention: SigmaConvention,
) -> Result<NormalizedPair, GeometryError> {
    let (cp, sp) = sigma_of(p, convention)?;
    let (cq, sq) = sigma_of(q, convention)?;
    let (dp, dq) = match mode {
        NormalizationMode::Sim3 => (sp / std::f64::consts::SQRT_2, sq / std::f64::consts::SQRT_2),
        NormalizationMode::Se3 => (sp, sp),
    };
    let src_info = NormalizationInfo {
        centroid: cp,
        divisor: dp,
        mode,
        convention,
    };
    let dst_info = NormalizationInfo {
        centroid: cq,
        divisor: dq,
        mode,
        convention,
    };
    Ok(NormalizedPair {
        src: src_info.apply(p),
        dst: dst_info.apply(q),
        src_info,
        dst_info,
    })
}
