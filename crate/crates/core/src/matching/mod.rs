//! Coarse-to-fine correspondence search.
//!
//! Superpoint descriptors are matched with a mutual top-3 filter, each coarse
//! pair is expanded into two local groups of `g` points, and a Sinkhorn plan
//! with a slack row and column decides which points inside the groups match.

mod coarse;
mod extract;
mod groups;
mod sinkhorn;

pub use coarse::{coarse_match, CoarseCorrespondences, CoarseParams};
pub use extract::extract_matches;
pub use groups::{extract_local_groups, LocalGroupPair, DEFAULT_GROUP_SIZE};
pub use sinkhorn::{sinkhorn, sinkhorn_log_scores, SinkhornParams, TransportPlan};
pub(crate) use sinkhorn::sinkhorn_batch;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("mutual filtering left no coarse correspondences")]
    NoSurvivingPairs,
    #[error("cost matrix has a non-finite entry at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("descriptor tables disagree in dimension ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Row pairs `(row in P, row in Q)` with confidences in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pub pairs: Vec<[usize; 2]>,
    pub scores: Vec<f64>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<[usize; 2]>, scores: Vec<f64>) -> Self {
        assert_eq!(pairs.len(), scores.len(), "one score per pair");
        Self { pairs, scores }
    }

    /// Uniform scores of 1.
    pub fn unscored(pairs: Vec<[usize; 2]>) -> Self {
        let scores = vec![1.0; pairs.len()];
        Self { pairs, scores }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> CorrespondenceSet {
        CorrespondenceSet {
            pairs: indices.iter().map(|&i| self.pairs[i]).collect(),
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
        }
    }
}
