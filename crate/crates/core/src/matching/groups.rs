use rayon::prelude::*;

use super::CoarseCorrespondences;
use crate::features::SuperpointSet;
use crate::geometry::OrientedCloud;
use crate::spatial::SpatialIndex;

pub const DEFAULT_GROUP_SIZE: usize = 64;

/// For every coarse pair, the `g` cloud points nearest to each superpoint.
///
/// Rows with fewer than `g` available points are padded by repeating the
/// nearest point; the pad masks mark the repeats.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGroupPair {
    pub g: usize,
    pub src_indices: Vec<Vec<usize>>,
    pub dst_indices: Vec<Vec<usize>>,
    pub src_pad: Vec<Vec<bool>>,
    pub dst_pad: Vec<Vec<bool>>,
}

impl LocalGroupPair {
    pub fn len(&self) -> usize {
        self.src_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src_indices.is_empty()
    }
}

fn group(cloud: &OrientedCloud, index: &SpatialIndex, center: usize, g: usize) -> (Vec<usize>, Vec<bool>) {
    let take = g.min(cloud.len());
    let hits = index.knn(&cloud.points[center], take).expect("take <= N");
    let mut idx: Vec<usize> = hits.iter().map(|h| h.index).collect();
    let mut pad = vec![false; idx.len()];
    let nearest = idx[0];
    while idx.len() < g {
        idx.push(nearest);
        pad.push(true);
    }
    (idx, pad)
}

#[allow(clippy::too_many_arguments)]
pub fn extract_local_groups(
    cloud_p: &OrientedCloud,
    index_p: &SpatialIndex,
    cloud_q: &OrientedCloud,
    index_q: &SpatialIndex,
    sp_p: &SuperpointSet,
    sp_q: &SuperpointSet,
    coarse: &CoarseCorrespondences,
    g: usize,
) -> LocalGroupPair {
    let rows: Vec<_> = coarse
        .pairs
        .par_iter()
        .map(|&[i, j]| {
            let (s, sm) = group(cloud_p, index_p, sp_p.indices[i], g);
            let (d, dm) = group(cloud_q, index_q, sp_q.indices[j], g);
            (s, sm, d, dm)
        })
        .collect();
    let mut out = LocalGroupPair {
        g,
        src_indices: Vec::with_capacity(rows.len()),
        dst_indices: Vec::with_capacity(rows.len()),
        src_pad: Vec::with_capacity(rows.len()),
        dst_pad: Vec::with_capacity(rows.len()),
    };
    for (s, sm, d, dm) in rows {
        out.src_indices.push(s);
        out.src_pad.push(sm);
        out.dst_indices.push(d);
        out.dst_pad.push(dm);
    }
    out
}
