//! Procedural two-facade scenes with cameras, used as test fixtures and by
//! the `synth` command.
//!
//! Two walls meet at the origin (`x = 0` facing `+x`, `y = 0` facing `+y`)
//! above a ground plane `z = 0`. Window recesses, balconies and ground
//! clutter are placed at seeded random positions, so no two regions of the
//! scene look alike. Cameras stand on an arc in the open quadrant.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetParams, ManifestParams, TrajectoryParams};
use crate::geometry::NormalizationMode;
use crate::recon::{CameraModel, Observation, PosedImage, ReconError, Reconstruction, TrackElement, TrackPoint};
use crate::rng::{derived_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub num_points: usize,
    pub num_images: usize,
    pub facade_a_length: f64,
    pub facade_b_length: f64,
    pub facade_height: f64,
    pub ground_extent: f64,
    /// Gaussian jitter added to point positions, in scene units.
    pub point_noise: f64,
    pub image_width: u64,
    pub image_height: u64,
    pub focal: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            num_points: 5000,
            num_images: 120,
            facade_a_length: 22.0,
            facade_b_length: 16.0,
            facade_height: 11.0,
            ground_extent: 18.0,
            point_noise: 0.0,
            image_width: 1024,
            image_height: 768,
            focal: 700.0,
        }
    }
}

/// Planar rectangle `origin + a·u + b·v`, `a, b ∈ [0, 1]`.
#[derive(Debug, Clone, Copy)]
struct Quad {
    origin: Point3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
}

impl Quad {
    fn area(&self) -> f64 {
        self.u.cross(&self.v).norm()
    }

    fn sample(&self, rng: &mut Rng) -> Point3<f64> {
        self.origin + self.u * rng.random::<f64>() + self.v * rng.random::<f64>()
    }
}

/// Axis-aligned rectangle on a wall: along-wall span `s0..s1`, height `z0..z1`,
/// offset along the wall normal (negative = recess).
#[derive(Debug, Clone, Copy)]
struct Relief {
    s0: f64,
    s1: f64,
    z0: f64,
    z1: f64,
    offset: f64,
}

struct Wall {
    length: f64,
    height: f64,
    /// Maps `(s, z, offset)` to world coordinates.
    to_world: fn(f64, f64, f64) -> Point3<f64>,
    reliefs: Vec<Relief>,
}

impl Wall {
    fn offset_at(&self, s: f64, z: f64) -> f64 {
        self.reliefs
            .iter()
            .find(|r| s >= r.s0 && s < r.s1 && z >= r.z0 && z < r.z1)
            .map_or(0.0, |r| r.offset)
    }

    fn side_quads(&self) -> Vec<Quad> {
        let w = self.to_world;
        let mut out = Vec::new();
        for r in &self.reliefs {
            let o = r.offset;
            let corners = [(r.s0, r.z0, r.s1, r.z0), (r.s0, r.z1, r.s1, r.z1), (r.s0, r.z0, r.s0, r.z1), (r.s1, r.z0, r.s1, r.z1)];
            for (sa, za, sb, zb) in corners {
                let origin = w(sa, za, 0.0);
                out.push(Quad { origin, u: w(sb, zb, 0.0) - origin, v: w(sa, za, o) - origin });
            }
        }
        out
    }
}

fn wall_a(s: f64, z: f64, off: f64) -> Point3<f64> {
    Point3::new(off, s, z)
}

fn wall_b(s: f64, z: f64, off: f64) -> Point3<f64> {
    Point3::new(s, off, z)
}

fn overlaps(a: &Relief, b: &Relief, margin: f64) -> bool {
    a.s0 < b.s1 + margin && b.s0 < a.s1 + margin && a.z0 < b.z1 + margin && b.z0 < a.z1 + margin
}

fn random_reliefs(length: f64, height: f64, rng: &mut Rng) -> Vec<Relief> {
    let mut out: Vec<Relief> = Vec::new();
    let attempts = (length * height / 3.0) as usize;
    for _ in 0..attempts {
        let kind = rng.random::<f64>();
        let (w, h, offset) = if kind < 0.6 {
            (rng.random_range(0.8..2.2), rng.random_range(1.0..2.4), -rng.random_range(0.25..0.6))
        } else if kind < 0.85 {
            (rng.random_range(1.5..4.0), rng.random_range(0.6..1.4), rng.random_range(0.5..1.2))
        } else {
            (rng.random_range(0.5..1.2), rng.random_range(2.0..5.0), rng.random_range(0.3..0.7))
        };
        let s0 = rng.random_range(0.5..(length - w - 0.5).max(0.6));
        let z0 = rng.random_range(0.3..(height - h - 0.3).max(0.4));
        let r = Relief { s0, s1: s0 + w, z0, z1: z0 + h, offset };
        if !out.iter().any(|o| overlaps(o, &r, 0.4)) {
            out.push(r);
        }
    }
    out
}

fn box_quads(min: Point3<f64>, size: Vector3<f64>) -> Vec<Quad> {
    let (x, y, z) = (Vector3::x() * size.x, Vector3::y() * size.y, Vector3::z() * size.z);
    vec![
        Quad { origin: min + z, u: x, v: y },
        Quad { origin: min, u: x, v: z },
        Quad { origin: min + y, u: x, v: z },
        Quad { origin: min, u: y, v: z },
        Quad { origin: min + x, u: y, v: z },
    ]
}

struct Layout {
    walls: [Wall; 2],
    ground: Quad,
    clutter: Vec<(Point3<f64>, Vector3<f64>)>,
    quads: Vec<Quad>,
    /// Area-proportional selection over walls, ground, then `quads`.
    cumulative: Vec<f64>,
}

impl Layout {
    fn new(params: &SceneParams, rng: &mut Rng) -> Self {
        let (la, lb, h) = (params.facade_a_length, params.facade_b_length, params.facade_height);
        let walls = [
            Wall { length: la, height: h, to_world: wall_a, reliefs: random_reliefs(la, h, rng) },
            Wall { length: lb, height: h * 0.8, to_world: wall_b, reliefs: random_reliefs(lb, h * 0.8, rng) },
        ];
        let g = params.ground_extent;
        let mut quads: Vec<Quad> = walls.iter().flat_map(Wall::side_quads).collect();
        let mut clutter = Vec::new();
        for _ in 0..14 {
            let size = Vector3::new(rng.random_range(0.6..3.0), rng.random_range(0.6..3.0), rng.random_range(0.4..2.2));
            let min = Point3::new(rng.random_range(2.0..g - 3.0), rng.random_range(2.0..g - 3.0), 0.0);
            clutter.push((min, size));
            quads.extend(box_quads(min, size));
        }
        let ground = Quad { origin: Point3::new(1.5, 1.5, 0.0), u: Vector3::x() * (g - 1.5), v: Vector3::y() * (g - 1.5) };
        let mut areas: Vec<f64> = walls.iter().map(|w| w.length * w.height).collect();
        areas.push(ground.area());
        areas.extend(quads.iter().map(Quad::area));
        let total: f64 = areas.iter().sum();
        let mut acc = 0.0;
        let cumulative = areas
            .iter()
            .map(|a| {
                acc += a / total;
                acc
            })
            .collect();
        Self { walls, ground, clutter, quads, cumulative }
    }

    fn sample(&self, rng: &mut Rng) -> Point3<f64> {
        loop {
            let u = rng.random::<f64>();
            let piece = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
            return match piece {
                0 | 1 => {
                    let w = &self.walls[piece];
                    let (s, z) = (rng.random::<f64>() * w.length, rng.random::<f64>() * w.height);
                    (w.to_world)(s, z, w.offset_at(s, z))
                }
                2 => {
                    let p = self.ground.sample(rng);
                    if self.clutter.iter().any(|(m, s)| p.x > m.x && p.x < m.x + s.x && p.y > m.y && p.y < m.y + s.y) {
                        continue;
                    }
                    p
                }
                k => self.quads[k - 3].sample(rng),
            };
        }
    }
}

fn look_at(center: &Point3<f64>, target: &Point3<f64>) -> Matrix3<f64> {
    let z = (target - center).normalize();
    let mut x = z.cross(&Vector3::z());
    if x.norm() < 1e-9 {
        x = Vector3::x();
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

fn camera_poses(params: &SceneParams, rng: &mut Rng) -> Vec<(Matrix3<f64>, Point3<f64>)> {
    let n = params.num_images.max(1);
    let quarter = std::f64::consts::FRAC_PI_2;
    (0..n)
        .map(|k| {
            // walk along the arc with jitter so neighbouring cameras stay close
            let phi = quarter * (0.06 + 0.88 * (k as f64 + rng.random::<f64>() * 0.8) / n as f64);
            let radius = rng.random_range(9.0..16.0);
            let center = Point3::new(radius * phi.cos(), radius * phi.sin(), rng.random_range(1.5..5.0));
            let u = phi / quarter;
            let along = rng.random_range(2.0..12.0);
            let target = Point3::new(u * along, (1.0 - u) * along, rng.random_range(0.5..5.0));
            (look_at(&center, &target), center)
        })
        .collect()
}

/// A complete reconstruction of a procedural scene: cameras, projected
/// keypoints and full tracks. Only points seen by at least two cameras are
/// kept, up to `num_points`.
pub fn synthetic_scene(params: &SceneParams, seed: u64) -> Result<Reconstruction, ReconError> {
    let mut rng = derived_rng(seed, "scene-geometry", 0);
    let mut cam_rng = derived_rng(seed, "scene-cameras", 0);
    let poses = camera_poses(params, &mut cam_rng);
    let (w, h, f) = (params.image_width as f64, params.image_height as f64, params.focal);
    let project = |r: &Matrix3<f64>, c: &Point3<f64>, p: &Point3<f64>, n: &Option<Vector3<f64>>| -> Option<[f64; 2]> {
        if n.is_some_and(|n| n.dot(&(c - p)) <= 0.0) {
            return None;
        }
        let pc = r * (p - c);
        if pc.z < 0.5 {
            return None;
        }
        let (x, y) = (f * pc.x / pc.z + w / 2.0, f * pc.y / pc.z + h / 2.0);
        ((0.0..w).contains(&x) && (0.0..h).contains(&y)).then_some([x, y])
    };

    // keep only points at least two cameras see, until the budget is met
    let layout = Layout::new(params, &mut rng);
    let noise = Normal::new(0.0, params.point_noise.max(0.0)).expect("finite sigma");
    let mut positions = Vec::with_capacity(params.num_points);
    let mut views: Vec<Vec<(usize, [f64; 2])>> = Vec::with_capacity(params.num_points);
    let mut attempts = 0;
    while positions.len() < params.num_points && attempts < 50 * params.num_points.max(1) {
        attempts += 1;
        let surface = layout.sample(&mut rng);
        let n = surface_normal(&surface);
        let p = if params.point_noise > 0.0 {
            surface + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
        } else {
            surface
        };
        let seen: Vec<(usize, [f64; 2])> = poses
            .iter()
            .enumerate()
            .filter_map(|(k, (r, c))| project(r, c, &p, &n).map(|xy| (k, xy)))
            .collect();
        if seen.len() >= 2 {
            positions.push(p);
            views.push(seen);
        }
    }

    let cameras = BTreeMap::from([(
        1,
        CameraModel { id: 1, model_name: "SIMPLE_PINHOLE".into(), width: params.image_width, height: params.image_height, params: vec![f, w / 2.0, h / 2.0] },
    )]);
    let mut keypoints: Vec<Vec<Observation>> = vec![Vec::new(); poses.len()];
    let mut tracks: Vec<Vec<TrackElement>> = vec![Vec::new(); positions.len()];
    for (pid, seen) in views.iter().enumerate() {
        for &(k, xy) in seen {
            tracks[pid].push(TrackElement { image_id: k as u32 + 1, point2d_idx: keypoints[k].len() });
            keypoints[k].push(Observation { xy, point3d_id: Some(pid as u64 + 1) });
        }
    }
    let mut images = BTreeMap::new();
    for (k, ((r, c), points2d)) in poses.iter().zip(keypoints).enumerate() {
        let id = k as u32 + 1;
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
        let q = q.quaternion();
        let qvec = if q.w < 0.0 { [-q.w, -q.i, -q.j, -q.k] } else { [q.w, q.i, q.j, q.k] };
        images.insert(id, PosedImage { id, qvec, translation: -(r * c.coords), camera_id: 1, name: format!("img_{id:04}.jpg"), points2d });
    }
    let points = positions
        .iter()
        .zip(tracks)
        .enumerate()
        .map(|(pid, (p, track))| {
            let id = pid as u64 + 1;
            (id, TrackPoint { id, position: *p, color: [128, 128, 128], error: 0.0, track })
        })
        .collect();
    Reconstruction::new(cameras, images, points)
}

/// Rough facing direction, for visibility only: walls face into the open
/// quadrant; the ground and clutter are visible from anywhere.
/// Dataset parameters scaled to a default synthetic scene: trajectories of
/// 20..=40 of its 120 images and ten random-point partials of 30 images.
pub fn benchmark_dataset_params(mode: NormalizationMode, seed: u64) -> DatasetParams {
    DatasetParams {
        trajectory: TrajectoryParams { n_low: 20, n_high: 40 },
        random_partials: 10,
        random_target_images: 30,
        min_track: 2,
        manifest: ManifestParams { mode, seed, ..ManifestParams::default() },
    }
}

fn surface_normal(p: &Point3<f64>) -> Option<Vector3<f64>> {
    if p.x.abs() < 1.3 && p.y > 1.0 {
        Some(Vector3::x())
    } else if p.y.abs() < 1.3 && p.x > 1.0 {
        Some(Vector3::y())
    } else {
        None
    }
}
