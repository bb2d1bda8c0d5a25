use nalgebra::{Matrix3, Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::OrientedCloud;

/// A 3D similarity `x ↦ s·R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            scale,
            rotation,
            translation,
        }
    }

    pub fn rigid(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(1.0, rotation, translation)
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, scale: f64, translation: Vector3<f64>) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self::new(scale, *rot.matrix(), translation)
    }

    /// `R = Rz(alpha) · Ry(beta) · Rx(gamma)`.
    pub fn from_euler(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), alpha);
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), beta);
        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), gamma);
        *(rz * ry * rx).matrix()
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * v)
    }

    pub fn rotate_normal(&self, n: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * n
    }

    /// Points map to `sRp + t`; normals only feel the rotation.
    pub fn apply(&self, cloud: &OrientedCloud) -> OrientedCloud {
        let points = cloud.points.iter().map(|p| self.transform_point(p)).collect();
        let normals = cloud
            .normals
            .as_ref()
            .map(|ns| ns.iter().map(|n| self.rotate_normal(n)).collect());
        OrientedCloud {
            points,
            normals,
            source_point_ids: cloud.source_point_ids.clone(),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let inv_scale = 1.0 / self.scale;
        let rt = self.rotation.transpose();
        SimilarityTransform {
            scale: inv_scale,
            rotation: rt,
            translation: -(inv_scale * (rt * self.translation)),
        }
    }

    /// Checks `‖RᵀR − I‖∞ < tol`, `det R > 0` and `s > 0`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        self.scale > 0.0
            && self.scale.is_finite()
            && err < tol
            && self.rotation.determinant() > 0.0
            && self.translation.iter().all(|v| v.is_finite())
    }

    /// Row-major rotation, the layout used by every JSON schema in the crate.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    pub fn from_row_major(scale: f64, r: &[f64; 9], t: &[f64; 3]) -> Self {
        Self::new(
            scale,
            Matrix3::from_row_slice(r),
            Vector3::new(t[0], t[1], t[2]),
        )
    }
}
