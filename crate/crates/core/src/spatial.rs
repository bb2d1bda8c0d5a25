//! Exact k-d tree over an immutable 3D point table.
//!
//! Splits at the median of the widest bounding-box axis (lower axis on ties).
//! Results are exact and ordered by `(distance, index)`, which makes every
//! query reproducible against a brute-force scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Point3;
use thiserror::Error;

pub const DEFAULT_LEAF_SIZE: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("point {0} has a non-finite coordinate")]
    NonFinitePoint(usize),
    #[error("cannot index an empty point set")]
    Empty,
    #[error("asked for {k} neighbors but only {n} points are indexed")]
    KTooLarge { k: usize, n: usize },
}

/// A neighbor hit: row index into the indexed table and Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3<f64>>,
    order: Vec<usize>,
    nodes: Vec<Node>,
    leaf_size: usize,
}

#[derive(PartialEq)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

#[inline]
fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (a - b).norm_squared()
}

impl SpatialIndex {
    pub fn build(points: &[Point3<f64>]) -> Result<Self, SpatialError> {
        Self::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &[Point3<f64>], leaf_size: usize) -> Result<Self, SpatialError> {
        if points.is_empty() {
            return Err(SpatialError::Empty);
        }
        if let Some(i) = points.iter().position(|p| !p.coords.iter().all(|v| v.is_finite())) {
            return Err(SpatialError::NonFinitePoint(i));
        }
        let mut index = SpatialIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
            leaf_size: leaf_size.max(1),
        };
        index.build_node(0, points.len());
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            lo,
            hi,
            kind: NodeKind::Leaf { start, end },
        });
        if end - start <= self.leaf_size {
            return id;
        }
        let mut axis = 0;
        for a in 1..3 {
            if hi[a] - lo[a] > hi[axis] - lo[axis] {
                axis = a;
            }
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].kind = NodeKind::Split { left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    /// Depth of the deepest leaf; a single leaf is depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn box_dist2(node: &Node, q: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let v = if q[a] < node.lo[a] {
                node.lo[a] - q[a]
            } else if q[a] > node.hi[a] {
                q[a] - node.hi[a]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// The `k` nearest indexed points, ascending by distance then index.
    pub fn knn(&self, query: &Point3<f64>, k: usize) -> Result<Vec<Neighbor>, SpatialError> {
        if k > self.points.len() {
            return Err(SpatialError::KTooLarge { k, n: self.points.len() });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![(0usize, 0.0f64)];
        while let Some((id, bound)) = stack.pop() {
            if heap.len() == k && bound > heap.peek().map_or(f64::INFINITY, |c| c.dist2) {
                continue;
            }
            match self.nodes[id].kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let cand = Candidate {
                            dist2: dist2(&self.points[i], query),
                            index: i,
                        };
                        if heap.len() < k {
                            heap.push(cand);
                        } else if cand < *heap.peek().expect("heap is full") {
                            heap.pop();
                            heap.push(cand);
                        }
                    }
                }
                NodeKind::Split { left, right } => {
                    let dl = Self::box_dist2(&self.nodes[left], query);
                    let dr = Self::box_dist2(&self.nodes[right], query);
                    // push the farther child first so the nearer one is explored first
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
            })
            .collect())
    }

    /// Nearest indexed point.
    pub fn nearest(&self, query: &Point3<f64>) -> Neighbor {
        self.knn(query, 1).expect("index is non-empty")[0]
    }

    /// Every indexed point with `‖p − query‖² ≤ r²`, ascending by distance then index.
    pub fn radius(&self, query: &Point3<f64>, r: f64) -> Vec<Neighbor> {
        let r2 = r * r;
        let mut hits: Vec<Candidate> = Vec::new();
        if !(r >= 0.0) {
            return Vec::new();
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if Self::box_dist2(node, query) > r2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let d2 = dist2(&self.points[i], query);
                        if d2 <= r2 {
                            hits.push(Candidate { dist2: d2, index: i });
                        }
                    }
                }
                NodeKind::Split { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        hits.sort();
        hits.into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Point3<f64>], q: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (dist2(p, q), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(d, i)| (i, d.sqrt())).collect()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| Point3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
            .collect()
    }

    #[test]
    fn single_point_has_depth_zero() {
        let idx = SpatialIndex::build(&[Point3::new(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!(idx.depth(), 0);
        assert_eq!(idx.nearest(&Point3::origin()).index, 0);
    }

    #[test]
    fn duplicates_are_both_retrievable() {
        let p = Point3::new(0.5, 0.5, 0.5);
        let pts = vec![p, Point3::new(3.0, 0.0, 0.0), p];
        let idx = SpatialIndex::build(&pts).unwrap();
        let hits = idx.knn(&p, 2).unwrap();
        assert_eq!(hits.iter().map(|h| h.index).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(idx.radius(&p, 0.0).len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(SpatialIndex::build(&[]).unwrap_err(), SpatialError::Empty);
        let pts = vec![Point3::new(0.0, f64::NAN, 0.0)];
        assert_eq!(SpatialIndex::build(&pts).unwrap_err(), SpatialError::NonFinitePoint(0));
        let idx = SpatialIndex::build(&[Point3::origin()]).unwrap();
        assert_eq!(idx.knn(&Point3::origin(), 2).unwrap_err(), SpatialError::KTooLarge { k: 2, n: 1 });
    }

    #[test]
    fn query_on_indexed_point_ranks_it_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 200);
        let idx = SpatialIndex::build(&pts).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let h = idx.knn(p, 1).unwrap()[0];
            assert_eq!((h.index, h.distance), (i, 0.0));
        }
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 1000);
        let idx = SpatialIndex::build(&pts).unwrap();
        for _ in 0..100 {
            let q = Point3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let k = rng.random_range(1..50);
            let got: Vec<_> = idx.knn(&q, k).unwrap().into_iter().map(|n| (n.index, n.distance)).collect();
            assert_eq!(got, brute_knn(&pts, &q, k));
            let r = rng.random_range(0.0..0.2);
            let got: Vec<_> = idx.radius(&q, r).into_iter().map(|n| (n.index, n.distance)).collect();
            let want: Vec<_> = brute_knn(&pts, &q, pts.len())
                .into_iter()
                .filter(|&(i, _)| dist2(&pts[i], &q) <= r * r)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn ties_break_by_lower_index_on_grid() {
        let mut pts = Vec::new();
        for x in 0..6 {
            for y in 0..6 {
                for z in 0..6 {
                    pts.push(Point3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let idx = SpatialIndex::with_leaf_size(&pts, 4).unwrap();
        for q in [Point3::new(2.5, 2.5, 2.5), Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 2.5, 1.0)] {
            for k in [1, 7, 27, 50] {
                let got: Vec<_> = idx.knn(&q, k).unwrap().into_iter().map(|n| (n.index, n.distance)).collect();
                assert_eq!(got, brute_knn(&pts, &q, k));
            }
        }
    }
}
