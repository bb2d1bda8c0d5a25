use rayon::prelude::*;

use super::MatchingError;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SinkhornParams {
    pub iters: usize,
    pub temperature: f64,
    /// Cost of assigning a point to the slack bin, in the same units as the
    /// match costs.
    pub slack_score: f64,
    /// Convergence threshold on the largest row-marginal violation.
    pub tolerance: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            iters: 100,
            temperature: 0.1,
            slack_score: 0.5,
            tolerance: 1e-6,
        }
    }
}

/// Plan over the `(m+1)×(n+1)` augmented problem, row-major; the last row
/// and column are slack. Real rows and columns carry unit mass, the slack row
/// carries the number of valid columns and the slack column the number of
/// valid rows, so interior entries read as match probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub plan: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl TransportPlan {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.plan[i * (self.cols + 1) + j]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        (0..=self.cols).map(|j| self.at(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..=self.rows).map(|i| self.at(i, j)).sum()
    }
}

#[inline]
fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on an already augmented `(m+1)×(n+1)` score matrix.
///
/// `row_pad` / `col_pad` mark interior rows / columns to exclude (their
/// marginal is zero). Adding a constant to every entry of `scores` leaves the
/// plan unchanged.
pub fn sinkhorn_log_scores(
    scores: &[f64],
    m: usize,
    n: usize,
    row_pad: &[bool],
    col_pad: &[bool],
    iters: usize,
    tolerance: f64,
) -> TransportPlan {
    let w = n + 1;
    debug_assert_eq!(scores.len(), (m + 1) * w);
    let valid_rows = row_pad.iter().filter(|&&p| !p).count();
    let valid_cols = col_pad.iter().filter(|&&p| !p).count();
    let mut plan = vec![0.0; (m + 1) * w];
    if valid_rows == 0 || valid_cols == 0 {
        return TransportPlan { rows: m, cols: n, plan, converged: true, iterations_used: 0 };
    }
    let log_a: Vec<f64> = (0..=m)
        .map(|i| match i {
            i if i == m => (valid_cols as f64).ln(),
            i if row_pad[i] => f64::NEG_INFINITY,
            _ => 0.0,
        })
        .collect();
    let log_b: Vec<f64> = (0..=n)
        .map(|j| match j {
            j if j == n => (valid_rows as f64).ln(),
            j if col_pad[j] => f64::NEG_INFINITY,
            _ => 0.0,
        })
        .collect();
    let live_rows: Vec<usize> = (0..=m).filter(|&i| log_a[i].is_finite()).collect();
    let live_cols: Vec<usize> = (0..=n).filter(|&j| log_b[j].is_finite()).collect();
    let (lr, lc) = (live_rows.len(), live_cols.len());
    let a: Vec<f64> = live_rows.iter().map(|&i| log_a[i].exp()).collect();
    let b: Vec<f64> = live_cols.iter().map(|&j| log_b[j].exp()).collect();

    // Log potentials f, g plus scalings u, v with K = exp(S + f ⊕ g); the
    // scalings are folded back into the potentials whenever they drift far
    // from 1, so every quantity stays representable.
    let mut f = vec![0.0; lr];
    let mut g = vec![0.0; lc];
    let kernel = |f: &[f64], g: &[f64]| -> Vec<f64> {
        let mut k = Vec::with_capacity(lr * lc);
        for (r, &i) in live_rows.iter().enumerate() {
            let row = &scores[i * w..(i + 1) * w];
            k.extend(live_cols.iter().enumerate().map(|(c, &j)| (row[j] + f[r] + g[c]).exp()));
        }
        k
    };
    // start from the exact first row update in log space
    for (r, &i) in live_rows.iter().enumerate() {
        let row = &scores[i * w..(i + 1) * w];
        f[r] = log_a[i] - logsumexp(live_cols.iter().map(|&j| row[j]));
    }
    let mut k = kernel(&f, &g);
    let mut u = vec![1.0; lr];
    let mut v = vec![1.0; lc];
    let mut kv = vec![0.0; lr];
    let mut converged = false;
    let mut used = 0;
    for it in 0..iters.max(1) {
        used = it + 1;
        if it > 0 {
            for r in 0..lr {
                u[r] = a[r] / kv[r];
            }
        }
        for (c, vc) in v.iter_mut().enumerate() {
            let s: f64 = (0..lr).map(|r| k[r * lc + c] * u[r]).sum();
            *vc = b[c] / s;
        }
        let mut violation = 0.0f64;
        for r in 0..lr {
            kv[r] = k[r * lc..(r + 1) * lc].iter().zip(&v).map(|(x, y)| x * y).sum();
            violation = violation.max((u[r] * kv[r] - a[r]).abs());
        }
        let drift = u.iter().chain(&v).any(|x| !(x.abs() < 1e30 && x.abs() > 1e-30));
        if drift {
            f.iter_mut().zip(&u).for_each(|(f, u)| *f += u.ln());
            g.iter_mut().zip(&v).for_each(|(g, v)| *g += v.ln());
            u.iter_mut().for_each(|x| *x = 1.0);
            v.iter_mut().for_each(|x| *x = 1.0);
            k = kernel(&f, &g);
            for r in 0..lr {
                kv[r] = k[r * lc..(r + 1) * lc].iter().sum();
            }
        }
        if violation < tolerance {
            converged = true;
            break;
        }
    }
    for (r, &i) in live_rows.iter().enumerate() {
        let fi = f[r] + u[r].ln();
        for (c, &j) in live_cols.iter().enumerate() {
            plan[i * w + j] = (scores[i * w + j] + fi + g[c] + v[c].ln()).exp();
        }
    }
    TransportPlan { rows: m, cols: n, plan, converged, iterations_used: used }
}

/// Entropic OT with slack on an `m×n` cost matrix (row-major).
///
/// Scores are `−cost / temperature` over the augmented cost matrix whose
/// slack row and column cost `slack_score` and whose slack-to-slack cell is
/// free.
pub fn sinkhorn(
    cost: &[f64],
    m: usize,
    n: usize,
    row_pad: &[bool],
    col_pad: &[bool],
    params: &SinkhornParams,
) -> Result<TransportPlan, MatchingError> {
    if cost.len() != m * n || row_pad.len() != m || col_pad.len() != n {
        return Err(MatchingError::InvalidParameter("cost / mask shapes disagree".into()));
    }
    if !(params.temperature > 0.0) {
        return Err(MatchingError::InvalidParameter("temperature must be positive".into()));
    }
    if params.iters == 0 {
        return Err(MatchingError::InvalidParameter("at least one iteration is required".into()));
    }
    if let Some(k) = cost.iter().position(|c| !c.is_finite()) {
        return Err(MatchingError::NonFiniteCost { row: k / n, col: k % n });
    }
    let w = n + 1;
    let mut scores = vec![-params.slack_score / params.temperature; (m + 1) * w];
    scores[m * w + n] = 0.0;
    for i in 0..m {
        for j in 0..n {
            scores[i * w + j] = -cost[i * n + j] / params.temperature;
        }
    }
    Ok(sinkhorn_log_scores(&scores, m, n, row_pad, col_pad, params.iters, params.tolerance))
}

/// Batch solve, one plan per group, in group order.
pub(crate) fn sinkhorn_batch(
    costs: &[Vec<f64>],
    g: usize,
    row_pads: &[Vec<bool>],
    col_pads: &[Vec<bool>],
    params: &SinkhornParams,
) -> Result<Vec<TransportPlan>, MatchingError> {
    costs
        .par_iter()
        .zip(row_pads.par_iter().zip(col_pads.par_iter()))
        .map(|(c, (rp, cp))| sinkhorn(c, g, g, rp, cp, params))
        .collect()
}
