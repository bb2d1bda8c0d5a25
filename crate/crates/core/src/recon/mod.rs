//! Sparse SfM reconstructions: the in-memory model, COLMAP text ingestion,
//! and PLY / JSON export for inspection.

mod colmap;
mod matches;
mod ply;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use nalgebra::{Matrix3, Point3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::geometry::OrientedCloud;

pub use colmap::{parse_colmap_text, write_colmap_text};
pub use matches::{export_matches_json, read_matches_json, MatchesFile, MATCHES_SCHEMA};
pub use ply::{export_cloud_ply, read_cloud_ply};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefKind {
    PointToImage,
    ImageToPoint,
    ImageToCamera,
    PointToKeypoint,
}

impl fmt::Display for RefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefKind::PointToImage => "point→image",
            RefKind::ImageToPoint => "image→point",
            RefKind::ImageToCamera => "image→camera",
            RefKind::PointToKeypoint => "point→keypoint",
        })
    }
}

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{file}: line {line}: {reason}")]
    MalformedLine { file: String, line: usize, reason: String },
    #[error("dangling reference ({kind}): id {id}")]
    DanglingReference { kind: RefKind, id: u64 },
    #[error("point {point} and image {image} disagree about keypoint {keypoint}")]
    InconsistentIncidence { point: u64, image: u32, keypoint: usize },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("reconstruction has no points")]
    EmptyReconstruction,
    #[error("cloud is empty")]
    EmptyCloud,
    #[error("I/O failure on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON failure: {0}")]
    Json(#[from] serde_json::Error),
}

impl ReconError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ReconError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Number of intrinsic parameters for each COLMAP camera model.
pub fn camera_model_arity(model: &str) -> Option<usize> {
    Some(match model {
        "SIMPLE_PINHOLE" => 3,
        "PINHOLE" => 4,
        "SIMPLE_RADIAL" => 4,
        "SIMPLE_RADIAL_FISHEYE" => 4,
        "RADIAL" => 5,
        "RADIAL_FISHEYE" => 5,
        "FOV" => 5,
        "OPENCV" => 8,
        "OPENCV_FISHEYE" => 8,
        "FULL_OPENCV" => 12,
        "THIN_PRISM_FISHEYE" => 12,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub id: u32,
    pub model_name: String,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

/// One 2D keypoint of an image, optionally linked to a 3D point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub xy: [f64; 2],
    pub point3d_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosedImage {
    pub id: u32,
    /// `[qw, qx, qy, qz]` of the world→camera rotation, as stored on disk.
    pub qvec: [f64; 4],
    /// World→camera translation.
    pub translation: Vector3<f64>,
    pub camera_id: u32,
    pub name: String,
    pub points2d: Vec<Observation>,
}

impl PosedImage {
    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.qvec;
        UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z))
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation().to_rotation_matrix().matrix()
    }

    /// Camera center in world coordinates, `−Rᵀt`.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation_matrix().transpose() * self.translation))
    }

    /// Ids of the 3D points this image observes, in keypoint order.
    pub fn observed_points(&self) -> Vec<u64> {
        self.points2d.iter().filter_map(|o| o.point3d_id).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TrackElement {
    pub image_id: u32,
    pub point2d_idx: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub id: u64,
    pub position: Point3<f64>,
    pub color: [u8; 3],
    pub error: f64,
    pub track: Vec<TrackElement>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reconstruction {
    pub cameras: BTreeMap<u32, CameraModel>,
    pub images: BTreeMap<u32, PosedImage>,
    pub points: BTreeMap<u64, TrackPoint>,
    /// Points discarded at construction because their track had < 2 entries.
    pub dropped_short_tracks: usize,
}

impl Reconstruction {
    /// Assemble and validate. Points with fewer than two track entries are
    /// dropped (and their keypoint links cleared) rather than rejected.
    pub fn new(
        cameras: BTreeMap<u32, CameraModel>,
        mut images: BTreeMap<u32, PosedImage>,
        mut points: BTreeMap<u64, TrackPoint>,
    ) -> Result<Self, ReconError> {
        let short: Vec<u64> = points
            .values()
            .filter(|p| p.track.len() < 2)
            .map(|p| p.id)
            .collect();
        for id in &short {
            points.remove(id);
        }
        if !short.is_empty() {
            for img in images.values_mut() {
                for obs in &mut img.points2d {
                    if obs.point3d_id.is_some_and(|pid| short.binary_search(&pid).is_ok()) {
                        obs.point3d_id = None;
                    }
                }
            }
        }
        if !short.is_empty() {
            log::warn!("dropped {} points with track length < 2", short.len());
        }
        let recon = Reconstruction {
            cameras,
            images,
            points,
            dropped_short_tracks: short.len(),
        };
        recon.validate()?;
        Ok(recon)
    }

    /// Referential integrity in both directions.
    pub fn validate(&self) -> Result<(), ReconError> {
        for p in self.points.values() {
            for el in &p.track {
                let img = self.images.get(&el.image_id).ok_or(ReconError::DanglingReference {
                    kind: RefKind::PointToImage,
                    id: u64::from(el.image_id),
                })?;
                let obs = img.points2d.get(el.point2d_idx).ok_or(ReconError::DanglingReference {
                    kind: RefKind::PointToKeypoint,
                    id: el.point2d_idx as u64,
                })?;
                if obs.point3d_id != Some(p.id) {
                    return Err(ReconError::InconsistentIncidence {
                        point: p.id,
                        image: el.image_id,
                        keypoint: el.point2d_idx,
                    });
                }
            }
        }
        for img in self.images.values() {
            if !self.cameras.contains_key(&img.camera_id) {
                return Err(ReconError::DanglingReference {
                    kind: RefKind::ImageToCamera,
                    id: u64::from(img.camera_id),
                });
            }
            for (idx, obs) in img.points2d.iter().enumerate() {
                if let Some(pid) = obs.point3d_id {
                    let point = self.points.get(&pid).ok_or(ReconError::DanglingReference {
                        kind: RefKind::ImageToPoint,
                        id: pid,
                    })?;
                    let el = TrackElement {
                        image_id: img.id,
                        point2d_idx: idx,
                    };
                    if !point.track.contains(&el) {
                        return Err(ReconError::InconsistentIncidence {
                            point: pid,
                            image: img.id,
                            keypoint: idx,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distinct observing images of a point, ascending.
    pub fn observing_images(&self, point_id: u64) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .points
            .get(&point_id)
            .map(|p| p.track.iter().map(|e| e.image_id).collect())
            .unwrap_or_default();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Largest pairwise distance between camera centers.
    pub fn scene_diameter(&self) -> f64 {
        let centers: Vec<Point3<f64>> = self.images.values().map(|i| i.center()).collect();
        let mut best = 0.0f64;
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                best = best.max((centers[i] - centers[j]).norm());
            }
        }
        best
    }
}

/// Point positions in ascending point-id order, without normals.
pub fn extract_cloud(recon: &Reconstruction) -> Result<OrientedCloud, ReconError> {
    if recon.points.is_empty() {
        return Err(ReconError::EmptyReconstruction);
    }
    let (ids, points): (Vec<u64>, Vec<Point3<f64>>) =
        recon.points.values().map(|p| (p.id, p.position)).unzip();
    Ok(OrientedCloud {
        points,
        normals: None,
        source_point_ids: ids,
    })
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extract_cloud_orders_by_id_and_keeps_duplicates() {
        let mut recon = fixtures::minimal();
        let mut p = recon.points[&7].clone();
        for (id, x) in [(3u64, 1.0), (11, 1.0), (5, 2.0)] {
            p.id = id;
            p.position = Point3::new(x, 0.0, 0.0);
            p.track = vec![];
            recon.points.insert(id, p.clone());
        }
        let cloud = extract_cloud(&recon).unwrap();
        assert_eq!(cloud.source_point_ids, vec![3, 5, 7, 11]);
        assert_eq!(cloud.points[0], cloud.points[3]);
        assert_eq!(cloud.len(), recon.points.len());
        assert!(cloud.normals.is_none());
    }

    #[test]
    fn empty_reconstruction_rejected() {
        assert!(matches!(
            extract_cloud(&Reconstruction::default()),
            Err(ReconError::EmptyReconstruction)
        ));
    }

    #[test]
    fn short_tracks_dropped_with_counter() {
        let r = fixtures::minimal();
        let mut points = r.points.clone();
        points.get_mut(&7).unwrap().track.truncate(1);
        let recon = Reconstruction::new(r.cameras.clone(), r.images.clone(), points).unwrap();
        assert_eq!(recon.dropped_short_tracks, 1);
        assert!(recon.points.is_empty());
        assert!(recon.images.values().all(|i| i.observed_points().is_empty()));
        assert_eq!(recon.images.len(), 2);
    }

    #[test]
    fn camera_center_is_minus_rt_t() {
        let r = fixtures::minimal();
        let c = r.images[&2].center();
        assert!((c - Point3::new(-2.0, 0.0, -5.0)).norm() < 1e-12);
    }

    #[test]
    fn dangling_camera_detected() {
        let r = fixtures::minimal();
        let mut images = r.images.clone();
        images.get_mut(&1).unwrap().camera_id = 9;
        let err = Reconstruction::new(r.cameras.clone(), images, r.points.clone()).unwrap_err();
        assert!(matches!(err, ReconError::DanglingReference { kind: RefKind::ImageToCamera, id: 9 }));
    }
}
