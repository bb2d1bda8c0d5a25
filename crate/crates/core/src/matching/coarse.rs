use rayon::prelude::*;

use super::MatchingError;
use crate::features::DescriptorTable;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoarseParams {
    /// Number of coarse correspondences kept.
    pub k: usize,
    /// A pair survives if each side ranks the other within its top `mutual_top`.
    pub mutual_top: usize,
    /// Pairs scoring below this are discarded.
    pub min_score: f64,
}

impl Default for CoarseParams {
    fn default() -> Self {
        Self { k: 256, mutual_top: 3, min_score: 0.0 }
    }
}

/// Superpoint pairs `(i in P', j in Q')`, scores descending.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseCorrespondences {
    pub pairs: Vec<[usize; 2]>,
    pub scores: Vec<f64>,
}

impl CoarseCorrespondences {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Indices of the `m` largest values, ties to the lower index.
fn top_m(values: impl Iterator<Item = f64>, m: usize) -> Vec<usize> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(m + 1);
    for (i, v) in values.enumerate() {
        if best.len() < m || v > best[best.len() - 1].0 {
            let pos = best.partition_point(|&(b, _)| b >= v);
            best.insert(pos, (v, i));
            best.truncate(m);
        }
    }
    best.into_iter().map(|(_, i)| i).collect()
}

/// Top-`k` mutual matches by descriptor dot product; score `(1 + sim) / 2`.
pub fn coarse_match(
    desc_p: &DescriptorTable,
    desc_q: &DescriptorTable,
    params: &CoarseParams,
) -> Result<CoarseCorrespondences, MatchingError> {
    if desc_p.is_empty() || desc_q.is_empty() {
        return Err(MatchingError::Empty("descriptor table"));
    }
    if desc_p.dim != desc_q.dim {
        return Err(MatchingError::DimensionMismatch(desc_p.dim, desc_q.dim));
    }
    let (np, nq) = (desc_p.len(), desc_q.len());
    let sim: Vec<f64> = (0..np)
        .into_par_iter()
        .flat_map_iter(|i| (0..nq).map(move |j| desc_p.dot(i, desc_q, j)))
        .collect();
    let m = params.mutual_top.max(1);
    let row_top: Vec<Vec<usize>> = (0..np)
        .into_par_iter()
        .map(|i| top_m(sim[i * nq..(i + 1) * nq].iter().copied(), m))
        .collect();
    let col_top: Vec<Vec<usize>> = (0..nq)
        .into_par_iter()
        .map(|j| top_m((0..np).map(|i| sim[i * nq + j]), m))
        .collect();
    let mut survivors: Vec<(f64, usize, usize)> = Vec::new();
    for (i, tops) in row_top.iter().enumerate() {
        for &j in tops {
            if col_top[j].contains(&i) {
                let score = ((1.0 + sim[i * nq + j]) / 2.0).clamp(0.0, 1.0);
                if score >= params.min_score {
                    survivors.push((score, i, j));
                }
            }
        }
    }
    if survivors.is_empty() {
        return Err(MatchingError::NoSurvivingPairs);
    }
    survivors.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    survivors.truncate(params.k.max(1));
    Ok(CoarseCorrespondences {
        pairs: survivors.iter().map(|&(_, i, j)| [i, j]).collect(),
        scores: survivors.iter().map(|&(s, _, _)| s).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DescriptorSource;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(rows: Vec<Vec<f64>>) -> DescriptorTable {
        DescriptorTable::from_rows(rows, DescriptorSource::Imported).unwrap()
    }

    fn random_table(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DescriptorTable {
        table((0..n).map(|_| (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()).collect())
    }

    fn identity_rows(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
    }

    #[test]
    fn self_match_on_orthonormal_rows() {
        let t = table(identity_rows(6));
        let c = coarse_match(&t, &t, &CoarseParams { k: 6, ..Default::default() }).unwrap();
        assert_eq!(c.pairs, (0..6).map(|i| [i, i]).collect::<Vec<_>>());
        assert!(c.scores.iter().all(|&s| s == 1.0));
    }

    #[test]
    fn orthogonal_sets_do_not_survive_threshold() {
        let rows = identity_rows(8);
        let a = table(rows[..4].to_vec());
        let b = table(rows[4..].to_vec());
        for k in [1, 4, 16] {
            let err = coarse_match(&a, &b, &CoarseParams { k, mutual_top: 3, min_score: 0.51 }).unwrap_err();
            assert_eq!(err, MatchingError::NoSurvivingPairs);
        }
    }

    /// Exhaustive oracle: rank all pairs per row and per column independently.
    fn brute_force(a: &DescriptorTable, b: &DescriptorTable, k: usize) -> Vec<[usize; 2]> {
        let (na, nb) = (a.len(), b.len());
        let s = |i: usize, j: usize| a.row(i).iter().zip(b.row(j)).map(|(x, y)| x * y).sum::<f64>();
        let rank_in_row = |i: usize, j: usize| (0..nb).filter(|&l| s(i, l) > s(i, j) || (s(i, l) == s(i, j) && l < j)).count();
        let rank_in_col = |i: usize, j: usize| (0..na).filter(|&l| s(l, j) > s(i, j) || (s(l, j) == s(i, j) && l < i)).count();
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..na {
            for j in 0..nb {
                if rank_in_row(i, j) < 3 && rank_in_col(i, j) < 3 {
                    all.push((s(i, j), i, j));
                }
            }
        }
        all.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        all.into_iter().take(k).map(|(_, i, j)| [i, j]).collect()
    }

    #[test]
    fn equals_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_table(&mut rng, 20, 32);
            let b = random_table(&mut rng, 20, 32);
            let c = coarse_match(&a, &b, &CoarseParams { k: 10, ..Default::default() }).unwrap();
            assert_eq!(c.pairs, brute_force(&a, &b, 10));
            assert!(c.scores.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn swapping_arguments_transposes_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_table(&mut rng, 30, 16);
        let b = random_table(&mut rng, 25, 16);
        let params = CoarseParams { k: 1000, ..Default::default() };
        let mut ab: Vec<[usize; 2]> = coarse_match(&a, &b, &params).unwrap().pairs;
        let mut ba: Vec<[usize; 2]> = coarse_match(&b, &a, &params).unwrap().pairs.into_iter().map(|[i, j]| [j, i]).collect();
        ab.sort_unstable();
        ba.sort_unstable();
        assert_eq!(ab, ba);
    }

    #[test]
    fn dimension_mismatch() {
        let a = table(vec![vec![1.0, 0.0]]);
        let b = table(vec![vec![1.0, 0.0, 0.0]]);
        assert_eq!(coarse_match(&a, &b, &CoarseParams::default()).unwrap_err(), MatchingError::DimensionMismatch(2, 3));
    }
}
