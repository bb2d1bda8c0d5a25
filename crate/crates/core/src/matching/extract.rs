use std::collections::BTreeMap;

use super::{CorrespondenceSet, LocalGroupPair, TransportPlan};

/// Mutual interior argmaxes with plan mass `≥ confidence_min`, mapped to
/// cloud rows. A pair found in several groups keeps its highest score; the
/// output is ordered by `(src, dst)`.
pub fn extract_matches(groups: &LocalGroupPair, plans: &[TransportPlan], confidence_min: f64) -> CorrespondenceSet {
    assert_eq!(groups.len(), plans.len(), "one plan per group");
    let mut best: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (r, plan) in plans.iter().enumerate() {
        let (m, n) = (plan.rows, plan.cols);
        let src_pad = &groups.src_pad[r];
        let dst_pad = &groups.dst_pad[r];
        let mut col_arg = vec![usize::MAX; n];
        for (j, arg) in col_arg.iter_mut().enumerate() {
            if dst_pad[j] {
                continue;
            }
            let mut bv = f64::NEG_INFINITY;
            for i in (0..m).filter(|&i| !src_pad[i]) {
                if plan.at(i, j) > bv {
                    bv = plan.at(i, j);
                    *arg = i;
                }
            }
        }
        for i in (0..m).filter(|&i| !src_pad[i]) {
            let mut bj = usize::MAX;
            let mut bv = f64::NEG_INFINITY;
            for j in (0..n).filter(|&j| !dst_pad[j]) {
                if plan.at(i, j) > bv {
                    bv = plan.at(i, j);
                    bj = j;
                }
            }
            if bj == usize::MAX || col_arg[bj] != i || !(bv >= confidence_min) || !(bv > 0.0) {
                continue;
            }
            let key = (groups.src_indices[r][i], groups.dst_indices[r][bj]);
            let score = bv.min(1.0);
            best.entry(key)
                .and_modify(|s| *s = s.max(score))
                .or_insert(score);
        }
    }
    let (pairs, scores) = best.into_iter().map(|((s, d), v)| ([s, d], v)).unzip();
    CorrespondenceSet { pairs, scores }
}
