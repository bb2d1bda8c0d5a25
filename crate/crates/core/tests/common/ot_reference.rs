//! Entropic optimal transport solved by Newton's method on the dual.
//!
//! Finds `f, g` with `P = exp(S + f ⊕ g)` matching the row marginals `r` and
//! column marginals `c`. The last column potential is pinned to zero to
//! remove the gauge freedom.

use nalgebra::{DMatrix, DVector};

fn plan(s: &[f64], m: usize, n: usize, f: &[f64], g: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            p[i * n + j] = (s[i * n + j] + f[i] + g[j]).exp();
        }
    }
    p
}

fn objective(s: &[f64], m: usize, n: usize, f: &[f64], g: &[f64], r: &[f64], c: &[f64]) -> f64 {
    let total: f64 = plan(s, m, n, f, g).iter().sum();
    total - f.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() - g.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()
}

/// Row-major `m × n` plan; `s` is the full score matrix including slack.
pub fn solve(s: &[f64], m: usize, n: usize, r: &[f64], c: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let dim = m + n - 1;
    for _ in 0..200 {
        let p = plan(s, m, n, &f, &g);
        let rows: Vec<f64> = (0..m).map(|i| (0..n).map(|j| p[i * n + j]).sum()).collect();
        let cols: Vec<f64> = (0..n).map(|j| (0..m).map(|i| p[i * n + j]).sum()).collect();
        let mut grad = DVector::zeros(dim);
        for i in 0..m {
            grad[i] = rows[i] - r[i];
        }
        for j in 0..n - 1 {
            grad[m + j] = cols[j] - c[j];
        }
        if grad.amax() < 1e-13 {
            break;
        }
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..m {
            h[(i, i)] = rows[i];
        }
        for j in 0..n - 1 {
            h[(m + j, m + j)] = cols[j];
            for i in 0..m {
                h[(i, m + j)] = p[i * n + j];
                h[(m + j, i)] = p[i * n + j];
            }
        }
        let step = h.lu().solve(&grad).expect("dual Hessian is positive definite");
        let base = objective(s, m, n, &f, &g, r, c);
        let mut t = 1.0;
        loop {
            let nf: Vec<f64> = (0..m).map(|i| f[i] - t * step[i]).collect();
            let mut ng = g.clone();
            for j in 0..n - 1 {
                ng[j] -= t * step[m + j];
            }
            if objective(s, m, n, &nf, &ng, r, c) <= base || t < 1e-12 {
                f = nf;
                g = ng;
                break;
            }
            t *= 0.5;
        }
    }
    plan(s, m, n, &f, &g)
}
