use rayon::prelude::*;

use crate::geometry::{OrientedCloud, SimilarityTransform};
use crate::spatial::SpatialIndex;

pub const DEFAULT_OVERLAP_TAU: f64 = 0.1;

/// Number of points of `from` that land within `tau` of `to` after `t`.
pub fn directional_hits(from: &OrientedCloud, to: &SpatialIndex, t: &SimilarityTransform, tau: f64) -> usize {
    from.points
        .par_iter()
        .filter(|p| to.nearest(&t.transform_point(p)).distance <= tau)
        .count()
}

/// Geometric mean of the two directional IoUs.
pub fn compute_overlap(p: &OrientedCloud, q: &OrientedCloud, t: &SimilarityTransform, tau: f64) -> f64 {
    if p.is_empty() || q.is_empty() {
        return 0.0;
    }
    let ip = SpatialIndex::build(&p.points).expect("validated cloud");
    let iq = SpatialIndex::build(&q.points).expect("validated cloud");
    let pq = directional_hits(p, &iq, t, tau) as f64 / p.len() as f64;
    let qp = directional_hits(q, &ip, &t.inverse(), tau) as f64 / q.len() as f64;
    (pq * qp).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Point3, Vector3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, seed: u64) -> OrientedCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OrientedCloud::from_points((0..n).map(|_| Point3::new(rng.random(), rng.random(), rng.random())).collect()).unwrap()
    }

    fn t() -> SimilarityTransform {
        SimilarityTransform::from_axis_angle(Vector3::new(1.0, 1.0, 0.0), 0.8, 1.3, Vector3::new(0.5, -2.0, 1.0))
    }

    #[test]
    fn exact_copy_is_full_overlap() {
        let p = random_cloud(200, 1);
        assert_eq!(compute_overlap(&p, &t().apply(&p), &t(), 0.1), 1.0);
    }

    #[test]
    fn far_apart_is_zero() {
        let p = random_cloud(100, 2);
        let q = SimilarityTransform::rigid(nalgebra::Matrix3::identity(), Vector3::new(100.0, 0.0, 0.0)).apply(&p);
        assert_eq!(compute_overlap(&p, &q, &SimilarityTransform::identity(), 0.1), 0.0);
    }

    #[test]
    fn half_subset_closed_form() {
        // points spread far apart so only exact images count as hits
        let p = OrientedCloud::from_points((0..100).map(|i| Point3::new(i as f64, (i % 7) as f64, 0.0)).collect()).unwrap();
        let q = t().apply(&p.select(&(0..50).collect::<Vec<_>>()));
        assert!((compute_overlap(&p, &q, &t(), 0.1) - 0.5f64.sqrt()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn swapped_arguments_agree(seed in any::<u64>(), angle in 0.0f64..6.0, s in 0.5f64..2.0) {
            let p = random_cloud(150, seed);
            let q = random_cloud(120, seed ^ 0xABCD);
            let t = SimilarityTransform::from_axis_angle(Vector3::new(0.2, 1.0, -0.3), angle, s, Vector3::new(0.1, 0.0, 0.2));
            prop_assert_eq!(compute_overlap(&p, &q, &t, 0.1), compute_overlap(&q, &p, &t.inverse(), 0.1));
        }

        #[test]
        fn monotone_in_tau(seed in any::<u64>(), lo in 0.0f64..0.2, extra in 0.0f64..0.2) {
            let p = random_cloud(100, seed);
            let q = random_cloud(100, seed.wrapping_add(1));
            let id = SimilarityTransform::identity();
            prop_assert!(compute_overlap(&p, &q, &id, lo) <= compute_overlap(&p, &q, &id, lo + extra));
        }
    }
}
