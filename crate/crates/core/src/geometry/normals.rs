use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::Rng as _;
use rayon::prelude::*;

use super::{GeometryError, OrientedCloud};
use crate::recon::Reconstruction;
use crate::rng::rng_from_seed;
use crate::spatial::SpatialIndex;

/// Neighborhood size, counting the query point itself.
pub const DEFAULT_NORMAL_K: usize = 33;

/// PCA normals: the smallest-eigenvalue eigenvector of the covariance of each
/// point's `k` nearest neighbors (the point included). Signs are arbitrary.
pub fn estimate_normals(cloud: &OrientedCloud, k: usize) -> Result<OrientedCloud, GeometryError> {
    if cloud.len() < k || k < 3 {
        return Err(GeometryError::TooFewPoints {
            have: cloud.len(),
            need: k.max(3),
        });
    }
    let index = SpatialIndex::build(&cloud.points).map_err(|e| GeometryError::InvalidCloud(e.to_string()))?;
    let normals: Vec<Vector3<f64>> = cloud
        .points
        .par_iter()
        .map(|p| {
            let nbrs = index.knn(p, k).expect("k <= N checked above");
            let mean = nbrs
                .iter()
                .fold(Vector3::zeros(), |acc, n| acc + cloud.points[n.index].coords)
                / k as f64;
            let mut cov = Matrix3::zeros();
            for n in &nbrs {
                let d = cloud.points[n.index].coords - mean;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let min = eig.eigenvalues.imin();
            let n = eig.eigenvectors.column(min).into_owned();
            let norm = n.norm();
            if norm > 0.0 {
                n / norm
            } else {
                Vector3::z()
            }
        })
        .collect();
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok(out)
}

/// Flip each normal towards the center of one observing camera, chosen by a
/// generator seeded with `seed` and consumed in row order.
pub fn orient_normals(recon: &Reconstruction, cloud: &OrientedCloud, seed: u64) -> Result<OrientedCloud, GeometryError> {
    let normals = cloud.normals()?;
    let mut rng = rng_from_seed(seed);
    let mut oriented = Vec::with_capacity(normals.len());
    for (row, (p, n)) in cloud.points.iter().zip(normals).enumerate() {
        let images = recon.observing_images(cloud.source_point_ids[row]);
        if images.is_empty() {
            return Err(GeometryError::MissingTrack { row });
        }
        let chosen = images[rng.random_range(0..images.len())];
        let center = recon.images[&chosen].center();
        oriented.push(if n.dot(&(center - p)) < 0.0 { -n } else { *n });
    }
    let mut out = cloud.clone();
    out.normals = Some(oriented);
    Ok(out)
}

/// Orientation fallback for clouds without cameras: point away from the centroid.
pub fn orient_normals_outward(cloud: &OrientedCloud) -> Result<OrientedCloud, GeometryError> {
    let normals = cloud.normals()?;
    let c = cloud.centroid();
    let oriented = cloud
        .points
        .iter()
        .zip(normals)
        .map(|(p, n)| if n.dot(&(p - c)) < 0.0 { -n } else { *n })
        .collect();
    let mut out = cloud.clone();
    out.normals = Some(oriented);
    Ok(out)
}
