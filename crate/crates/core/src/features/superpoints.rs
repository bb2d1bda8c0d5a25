use rand::Rng as _;

use super::DEFAULT_DESCRIPTOR_RADIUS;
use crate::geometry::OrientedCloud;
use crate::rng::rng_from_seed;

pub const DEFAULT_MAX_SUPERPOINTS: usize = 1024;

/// Row indices of the coarse superpoints, in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointSet {
    pub indices: Vec<usize>,
    /// Descriptor support radius.
    pub radius: f64,
}

impl SuperpointSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Farthest point sampling from a seeded random start. Ties go to the lower
/// row index. `n_prime` is clamped to the cloud size.
pub fn sample_superpoints(cloud: &OrientedCloud, n_prime: usize, seed: u64) -> SuperpointSet {
    let n = cloud.len();
    let n_prime = n_prime.min(n);
    let mut indices = Vec::with_capacity(n_prime);
    if n_prime == 0 {
        return SuperpointSet { indices, radius: DEFAULT_DESCRIPTOR_RADIUS };
    }
    let mut rng = rng_from_seed(seed);
    let mut current = rng.random_range(0..n);
    let mut taken = vec![false; n];
    let mut min_d2 = vec![f64::INFINITY; n];
    loop {
        indices.push(current);
        taken[current] = true;
        if indices.len() == n_prime {
            break;
        }
        let c = cloud.points[current];
        let mut best = usize::MAX;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, p) in cloud.points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d2 = (p - c).norm_squared();
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
            if min_d2[i] > best_d2 {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        current = best;
    }
    SuperpointSet { indices, radius: DEFAULT_DESCRIPTOR_RADIUS }
}
