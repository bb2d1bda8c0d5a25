use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Point3};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::recon::{PosedImage, Reconstruction};
use crate::rng::{derived_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    pub n_low: usize,
    pub n_high: usize,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self { n_low: 75, n_high: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub image_ids: Vec<u32>,
    pub weight_w: f64,
}

fn geodesic(ra: &Matrix3<f64>, rb: &Matrix3<f64>) -> f64 {
    let c = (((ra * rb.transpose()).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos()
}

fn mixed_distance(ra: &Matrix3<f64>, ca: &Point3<f64>, rb: &Matrix3<f64>, cb: &Point3<f64>, w: f64, diameter: f64) -> f64 {
    w * (geodesic(ra, rb) / std::f64::consts::PI) + (1.0 - w) * ((ca - cb).norm() / diameter)
}

/// `w · angle/π + (1−w) · ‖c_a − c_b‖ / diameter`.
pub fn pose_distance(a: &PosedImage, b: &PosedImage, w: f64, scene_diameter: f64) -> f64 {
    mixed_distance(&a.rotation_matrix(), &a.center(), &b.rotation_matrix(), &b.center(), w, scene_diameter)
}

/// Rotations and centers of every image, computed once.
#[derive(Debug, Clone)]
pub struct PoseTable {
    poses: BTreeMap<u32, (Matrix3<f64>, Point3<f64>)>,
    pub diameter: f64,
}

impl PoseTable {
    pub fn new(images: &BTreeMap<u32, PosedImage>) -> Self {
        let poses: BTreeMap<u32, (Matrix3<f64>, Point3<f64>)> =
            images.iter().map(|(&id, img)| (id, (img.rotation_matrix(), img.center()))).collect();
        let centers: Vec<&Point3<f64>> = poses.values().map(|(_, c)| c).collect();
        let mut diameter = 0.0f64;
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                diameter = diameter.max((centers[i] - centers[j]).norm());
            }
        }
        Self { poses, diameter }
    }

    pub fn ids(&self) -> BTreeSet<u32> {
        self.poses.keys().copied().collect()
    }

    pub fn distance(&self, a: u32, b: u32, w: f64) -> f64 {
        let (ra, ca) = &self.poses[&a];
        let (rb, cb) = &self.poses[&b];
        // coincident cameras everywhere: translation term carries no information
        let diameter = if self.diameter > 0.0 { self.diameter } else { 1.0 };
        mixed_distance(ra, ca, rb, cb, w, diameter)
    }
}

/// One nearest-neighbour chain through the remaining images.
///
/// Draws, in order: the start position within the ascending remaining set,
/// the length `n ∈ [n_low, n_high]`, and the weight `w ∈ [0, 1)`. The result
/// holds `n` images (start included) unless the pool runs dry; ties go to
/// the smallest id.
pub fn generate_trajectory(
    poses: &PoseTable,
    remaining: &mut BTreeSet<u32>,
    params: &TrajectoryParams,
    rng: &mut Rng,
) -> Result<Trajectory, DatasetError> {
    if remaining.is_empty() {
        return Err(DatasetError::EmptyIndexSet);
    }
    if params.n_low == 0 || params.n_low > params.n_high {
        return Err(DatasetError::InvalidParameter(format!(
            "need 1 ≤ n_low ≤ n_high, got {}..{}",
            params.n_low, params.n_high
        )));
    }
    let start_pos = rng.random_range(0..remaining.len());
    let n = rng.random_range(params.n_low..=params.n_high);
    let w: f64 = rng.random();
    let mut current = *remaining.iter().nth(start_pos).expect("position in range");
    remaining.remove(&current);
    let mut ids = vec![current];
    while ids.len() < n && !remaining.is_empty() {
        let mut best = (f64::INFINITY, u32::MAX);
        for &cand in remaining.iter() {
            let d = poses.distance(current, cand, w);
            if d < best.0 {
                best = (d, cand);
            }
        }
        current = best.1;
        remaining.remove(&current);
        ids.push(current);
    }
    Ok(Trajectory { image_ids: ids, weight_w: w })
}

/// Chains until fewer than `n_low` images remain; short leftovers are dropped.
pub fn generate_all_trajectories(recon: &Reconstruction, params: &TrajectoryParams, seed: u64) -> Result<Vec<Trajectory>, DatasetError> {
    let poses = PoseTable::new(&recon.images);
    let mut remaining = poses.ids();
    let mut rng = derived_rng(seed, "trajectories", 0);
    let mut out = Vec::new();
    while !remaining.is_empty() && remaining.len() >= params.n_low {
        let t = generate_trajectory(&poses, &mut remaining, params, &mut rng)?;
        if t.image_ids.len() >= params.n_low {
            out.push(t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::{CameraModel, PosedImage};
    use crate::rng::rng_from_seed;
    use nalgebra::{UnitQuaternion, Vector3};

    pub(crate) fn image_at(id: u32, center: Point3<f64>, rot: UnitQuaternion<f64>) -> PosedImage {
        let t = -(rot.to_rotation_matrix().matrix() * center.coords);
        let q = rot.quaternion();
        PosedImage { id, qvec: [q.w, q.i, q.j, q.k], translation: t, camera_id: 1, name: format!("{id}.jpg"), points2d: vec![] }
    }

    fn cams() -> BTreeMap<u32, CameraModel> {
        BTreeMap::from([(1, CameraModel { id: 1, model_name: "SIMPLE_PINHOLE".into(), width: 100, height: 100, params: vec![50.0, 50.0, 50.0] })])
    }

    #[test]
    fn distance_examples() {
        let a = image_at(1, Point3::new(1.0, 2.0, 3.0), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
        for w in [0.0, 0.3, 1.0] {
            assert_eq!(pose_distance(&a, &a, w, 5.0), 0.0);
        }
        let b = image_at(2, Point3::new(1.0, 2.0, 3.0), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3) * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), std::f64::consts::PI));
        assert!((pose_distance(&a, &b, 1.0, 5.0) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn single_image_pool() {
        let images = BTreeMap::from([(4, image_at(4, Point3::origin(), UnitQuaternion::identity()))]);
        let poses = PoseTable::new(&images);
        let mut rem = poses.ids();
        let t = generate_trajectory(&poses, &mut rem, &TrajectoryParams::default(), &mut rng_from_seed(1)).unwrap();
        assert_eq!(t.image_ids, vec![4]);
        assert!(rem.is_empty());
        assert!(matches!(generate_trajectory(&poses, &mut rem, &TrajectoryParams::default(), &mut rng_from_seed(1)), Err(DatasetError::EmptyIndexSet)));
    }

    #[test]
    fn cameras_on_a_line_visit_in_order() {
        // same rotation everywhere, so the chain is spatial for any w
        let images: BTreeMap<u32, PosedImage> = [0.0, 1.0, 1.5, 3.0, 3.2]
            .iter()
            .enumerate()
            .map(|(k, &x)| (k as u32 * 7 % 5, Point3::new(x, 0.0, 0.0)))
            .map(|(id, c)| (id, image_at(id, c, UnitQuaternion::identity())))
            .collect();
        let poses = PoseTable::new(&images);
        let p = TrajectoryParams { n_low: 5, n_high: 5 };
        for seed in 0..40 {
            let mut rem = poses.ids();
            let t = generate_trajectory(&poses, &mut rem, &p, &mut rng_from_seed(seed)).unwrap();
            if t.image_ids[0] == 0 {
                assert_eq!(t.image_ids, vec![0, 2, 4, 1, 3]);
                return;
            }
        }
        panic!("no seed started at the end camera");
    }

    #[test]
    fn all_trajectories_disjoint_and_bounded() {
        let mut rng = rng_from_seed(5);
        let images: BTreeMap<u32, PosedImage> = (0..400u32)
            .map(|id| {
                let c = Point3::new(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0, rng.random::<f64>());
                (id, image_at(id, c, UnitQuaternion::from_euler_angles(0.0, 0.0, rng.random::<f64>() * 6.0)))
            })
            .collect();
        let recon = Reconstruction::new(cams(), images, BTreeMap::new()).unwrap();
        let ts = generate_all_trajectories(&recon, &TrajectoryParams::default(), 3).unwrap();
        assert!((1..=5).contains(&ts.len()), "{}", ts.len());
        let mut seen = BTreeSet::new();
        for t in &ts {
            assert!(t.image_ids.len() >= 75 && t.image_ids.len() <= 300);
            for id in &t.image_ids {
                assert!(seen.insert(*id));
            }
        }
    }
}
