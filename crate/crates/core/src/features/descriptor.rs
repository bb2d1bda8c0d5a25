use std::f64::consts::PI;

use rayon::prelude::*;

use super::{ppf, FeatureError, SuperpointSet};
use crate::geometry::OrientedCloud;
use crate::spatial::SpatialIndex;

/// Descriptor support radius, in normalized units.
pub const DEFAULT_DESCRIPTOR_RADIUS: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorSource {
    PpfHistogram,
    Imported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HistogramBins {
    pub distance: usize,
    pub angle: usize,
}

impl Default for HistogramBins {
    fn default() -> Self {
        Self { distance: 5, angle: 9 }
    }
}

impl HistogramBins {
    /// `b_d + 3·b_a`
    pub fn dim(&self) -> usize {
        self.distance + 3 * self.angle
    }
}

/// Neighborhood used around each described point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// All points within the radius; distance bins span `[0, radius]`.
    Radius(f64),
    /// The `k` nearest other points; distance bins span `[0, d_k]`.
    Knn(usize),
}

/// Row-major table of L2-normalized descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorTable {
    pub vectors: Vec<f64>,
    pub dim: usize,
    pub source: DescriptorSource,
    /// Rows that fell back to the uniform vector (empty support, zero rows).
    pub fallback: Vec<bool>,
}

impl DescriptorTable {
    pub fn from_rows(rows: Vec<Vec<f64>>, source: DescriptorSource) -> Result<Self, FeatureError> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(FeatureError::DimensionMismatch("descriptors must have positive dimension".into()));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(FeatureError::DimensionMismatch("rows differ in length".into()));
        }
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        let mut fallback = Vec::with_capacity(rows.len());
        for mut r in rows {
            fallback.push(normalize_or_uniform(&mut r));
            vectors.extend_from_slice(&r);
        }
        Ok(Self {
            vectors,
            dim,
            source,
            fallback,
        })
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.vectors.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dot(&self, i: usize, other: &DescriptorTable, j: usize) -> f64 {
        self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b).sum()
    }
}

/// Normalize in place; all-zero (or non-finite) rows become `1/√c`. Returns
/// whether the fallback was used.
fn normalize_or_uniform(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        v.iter_mut().for_each(|x| *x /= norm);
        false
    } else {
        let u = 1.0 / (v.len() as f64).sqrt();
        v.iter_mut().for_each(|x| *x = u);
        true
    }
}

/// Linear (two-bin) vote of `value ∈ [0, max]` into `bins` equal cells.
fn vote(hist: &mut [f64], value: f64, max: f64) {
    let b = hist.len();
    let x = (value / max).clamp(0.0, 1.0) * b as f64 - 0.5;
    if x <= 0.0 {
        hist[0] += 1.0;
    } else if x >= (b - 1) as f64 {
        hist[b - 1] += 1.0;
    } else {
        let lo = x.floor();
        let frac = x - lo;
        let lo = lo as usize;
        hist[lo] += 1.0 - frac;
        hist[lo + 1] += frac;
    }
}

/// PPF histogram of the neighborhood of every row in `centers`.
///
/// Each neighbor `q` contributes `ppf(center, q, n_center, n_q)`, voted into
/// `b_d` distance bins and `b_a` bins for each of the three angle channels.
/// Votes are split linearly between the two nearest bin centers, so the
/// descriptor is a continuous function of the geometry.
pub fn describe_points(
    cloud: &OrientedCloud,
    index: &SpatialIndex,
    centers: &[usize],
    support: Support,
    bins: HistogramBins,
) -> Result<DescriptorTable, FeatureError> {
    let normals = cloud.normals.as_deref().ok_or(FeatureError::MissingNormals)?;
    match support {
        Support::Radius(r) if !(r > 0.0) => return Err(FeatureError::InvalidSupport),
        Support::Knn(0) => return Err(FeatureError::InvalidSupport),
        _ => {}
    }
    let dim = bins.dim();
    let rows: Vec<(Vec<f64>, bool)> = centers
        .par_iter()
        .map(|&c| {
            let center = cloud.points[c];
            let (nbrs, range) = match support {
                Support::Radius(r) => (index.radius(&center, r), r),
                Support::Knn(k) => {
                    let hits = index.knn(&center, (k + 1).min(index.len())).expect("k clamped to index size");
                    let range = hits.last().map_or(0.0, |h| h.distance);
                    (hits, range)
                }
            };
            let mut hist = vec![0.0; dim];
            let mut used = 0usize;
            for nb in nbrs.iter().filter(|nb| nb.index != c) {
                let f = ppf(&center, &cloud.points[nb.index], &normals[c], &normals[nb.index]);
                if f.coincident || !(range > 0.0) {
                    continue;
                }
                used += 1;
                let (d, a) = hist.split_at_mut(bins.distance);
                vote(d, f.dist, range);
                let (a1, rest) = a.split_at_mut(bins.angle);
                let (a2, a3) = rest.split_at_mut(bins.angle);
                vote(a1, f.angle_n1_d, PI);
                vote(a2, f.angle_n2_d, PI);
                vote(a3, f.angle_n1_n2, PI);
            }
            let fallback = normalize_or_uniform(&mut hist) || used == 0;
            (hist, fallback)
        })
        .collect();
    let mut vectors = Vec::with_capacity(centers.len() * dim);
    let mut fallback = Vec::with_capacity(centers.len());
    for (r, f) in rows {
        vectors.extend(r);
        fallback.push(f);
    }
    Ok(DescriptorTable {
        vectors,
        dim,
        source: DescriptorSource::PpfHistogram,
        fallback,
    })
}

/// Radius-supported PPF histograms for every superpoint.
pub fn ppf_histogram_descriptor(
    cloud: &OrientedCloud,
    index: &SpatialIndex,
    sp: &SuperpointSet,
    radius: f64,
    bins: HistogramBins,
) -> Result<DescriptorTable, FeatureError> {
    describe_points(cloud, index, &sp.indices, Support::Radius(radius), bins)
}
