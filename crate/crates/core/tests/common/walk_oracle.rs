//! Step-by-step transcription of the nearest-neighbour trajectory procedure,
//! written against raw image poses.

use rand::Rng as _;
use sfmreg_core::recon::PosedImage;
use sfmreg_core::rng::Rng;

struct Pose {
    r: [[f64; 3]; 3],
    c: [f64; 3],
}

fn pose(img: &PosedImage) -> Pose {
    let [w, x, y, z] = img.qvec;
    let n = (w * w + x * x + y * y + z * z).sqrt();
    let (w, x, y, z) = (w / n, x / n, y / n, z / n);
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let t = img.translation;
    let mut c = [0.0; 3];
    for (k, ck) in c.iter_mut().enumerate() {
        *ck = -(r[0][k] * t.x + r[1][k] * t.y + r[2][k] * t.z);
    }
    Pose { r, c }
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn distance(a: &Pose, b: &Pose, w: f64, diameter: f64) -> f64 {
    // trace(Ra Rbᵀ) = Σ Ra[i][k] Rb[i][k]
    let mut tr = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            tr += a.r[i][k] * b.r[i][k];
        }
    }
    let angle = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    w * angle / std::f64::consts::PI + (1.0 - w) * dist3(&a.c, &b.c) / diameter
}

/// Images keyed by position in `ids`; `remaining` is kept ascending.
pub struct Oracle {
    ids: Vec<u32>,
    poses: Vec<Pose>,
    diameter: f64,
}

impl Oracle {
    pub fn new(images: &[PosedImage]) -> Self {
        let poses: Vec<Pose> = images.iter().map(pose).collect();
        let mut diameter = 0.0f64;
        for a in &poses {
            for b in &poses {
                diameter = diameter.max(dist3(&a.c, &b.c));
            }
        }
        if diameter == 0.0 {
            diameter = 1.0;
        }
        Self { ids: images.iter().map(|i| i.id).collect(), poses, diameter }
    }

    fn slot(&self, id: u32) -> usize {
        self.ids.iter().position(|&i| i == id).expect("known id")
    }

    pub fn trajectory(&self, remaining: &mut Vec<u32>, n_low: usize, n_high: usize, rng: &mut Rng) -> (Vec<u32>, f64) {
        // pick a start image uniformly from the remaining set
        let start = rng.random_range(0..remaining.len());
        // draw the trajectory length
        let n = rng.random_range(n_low..=n_high);
        // draw the mixing weight
        let w: f64 = rng.random();
        let mut tau = vec![remaining.remove(start)];
        // lines 6-11: repeatedly append the nearest remaining image
        while tau.len() < n && !remaining.is_empty() {
            let cur = &self.poses[self.slot(*tau.last().unwrap())];
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, &id) in remaining.iter().enumerate() {
                let d = distance(cur, &self.poses[self.slot(id)], w, self.diameter);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            tau.push(remaining.remove(best));
        }
        (tau, w)
    }
}
