use nalgebra::{Point3, Vector3};

use super::GeometryError;

/// Points with optional unit normals and the ids of the reconstruction
/// points they were extracted from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrientedCloud {
    pub points: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub source_point_ids: Vec<u64>,
}

impl OrientedCloud {
    /// Cloud without normals; ids default to the row index.
    pub fn from_points(points: Vec<Point3<f64>>) -> Result<Self, GeometryError> {
        let ids = (0..points.len() as u64).collect();
        Self::new(points, None, ids)
    }

    pub fn with_normals(points: Vec<Point3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self, GeometryError> {
        let ids = (0..points.len() as u64).collect();
        Self::new(points, Some(normals), ids)
    }

    pub fn new(
        points: Vec<Point3<f64>>,
        normals: Option<Vec<Vector3<f64>>>,
        source_point_ids: Vec<u64>,
    ) -> Result<Self, GeometryError> {
        let cloud = Self {
            points,
            normals,
            source_point_ids,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.points.is_empty() {
            return Err(GeometryError::InvalidCloud("cloud is empty".into()));
        }
        if self.source_point_ids.len() != self.points.len() {
            return Err(GeometryError::InvalidCloud("id table length differs from point count".into()));
        }
        if let Some(row) = self.points.iter().position(|p| !p.coords.iter().all(|v| v.is_finite())) {
            return Err(GeometryError::InvalidCloud(format!("non-finite coordinate at row {row}")));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(GeometryError::InvalidCloud("normal count differs from point count".into()));
            }
            if let Some(row) = normals.iter().position(|n| (n.norm() - 1.0).abs() > 1e-6) {
                return Err(GeometryError::InvalidCloud(format!("normal at row {row} is not unit length")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn normals(&self) -> Result<&[Vector3<f64>], GeometryError> {
        self.normals.as_deref().ok_or(GeometryError::MissingNormals)
    }

    pub fn centroid(&self) -> Point3<f64> {
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Point3::from(sum / self.points.len() as f64)
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> OrientedCloud {
        OrientedCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
            source_point_ids: indices.iter().map(|&i| self.source_point_ids[i]).collect(),
        }
    }
}
