//! Independent oracles shared by the integration suites: exhaustive grid
//! searches over feasible plans and couplings, with objectives written out
//! directly rather than taken from the library.
#![allow(dead_code)]

use std::cell::RefCell;

use ndarray::Array2;

/// Minimum of `f` over the box `[lo, hi]` by exhaustive grid search with
/// `points` per axis, zooming around the best point `levels` times.
/// `f` returns `None` outside the feasible set.
pub fn zoom_grid_min(lo: &[f64], hi: &[f64], points: usize, levels: usize, f: impl Fn(&[f64]) -> Option<f64>) -> f64 {
    let d = lo.len();
    let (mut a, mut b) = (lo.to_vec(), hi.to_vec());
    let mut best = (f64::INFINITY, Vec::new());
    if d == 0 {
        return f(&[]).unwrap_or(f64::INFINITY);
    }
    let mut x = vec![0.0; d];
    for _ in 0..levels {
        let total = points.pow(d as u32);
        let mut best_idx = None;
        for idx in 0..total {
            let mut r = idx;
            for l in 0..d {
                x[l] = a[l] + (b[l] - a[l]) * (r % points) as f64 / (points - 1) as f64;
                r /= points;
            }
            if let Some(v) = f(&x) {
                if v < best.0 {
                    best = (v, x.clone());
                    best_idx = Some(idx);
                }
            }
        }
        if best.1.is_empty() {
            return f64::INFINITY;
        }
        let mut at_edge = vec![false; d];
        if let Some(mut r) = best_idx {
            for (l, edge) in at_edge.iter_mut().enumerate() {
                let s = r % points;
                r /= points;
                *edge = (s == 0 && a[l] > lo[l]) || (s == points - 1 && b[l] < hi[l]);
            }
        }
        // Shrink around the best point unless it sits on the window edge,
        // in which case the window only moves.
        for l in 0..d {
            let half = if at_edge[l] {
                (b[l] - a[l]) / 2.0
            } else {
                1.5 * (b[l] - a[l]) / (points - 1) as f64
            };
            a[l] = (best.1[l] - half).max(lo[l]);
            b[l] = (best.1[l] + half).min(hi[l]);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Div {
    Kl,
    Tv,
}

/// `sum_k q_k f(p_k / q_k)` with `0 log 0 = 0`.
pub fn divergence(div: Div, p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pk, &qk)| match div {
            Div::Kl if pk > 0.0 => pk * (pk / qk).ln(),
            Div::Kl => 0.0,
            Div::Tv => 0.5 * (pk - qk).abs(),
        })
        .sum()
}

/// `sum_ik gamma_ik C_ik + lambda sum_i m_i D(gamma_i / m_i, p0)`.
pub fn prp_value(gamma: &Array2<f64>, cost: &Array2<f64>, prior: &[f64], div: Div, lambda: f64) -> f64 {
    let mut total: f64 = gamma.iter().zip(cost.iter()).map(|(g, c)| g * c).sum();
    for row in gamma.rows() {
        let m: f64 = row.sum();
        if m > 0.0 {
            let d: f64 = row
                .iter()
                .zip(prior)
                .map(|(&g, &q)| match div {
                    Div::Kl if g > 0.0 => g / m * (g / (m * q)).ln(),
                    Div::Kl => 0.0,
                    Div::Tv => 0.5 * (g / m - q).abs(),
                })
                .sum();
            total += lambda * m * d;
        }
    }
    total
}

/// Global minimum of the convex problem over `n x K` plans with columns
/// summing to `prior`. Each column is parametrized by all rows but one
/// dependent row; every choice of that row is searched, so entries near
/// zero are free coordinates in at least one search.
pub fn prp_grid_oracle(cost: &Array2<f64>, prior: &[f64], div: Div, lambda: f64) -> f64 {
    let (n, k) = cost.dim();
    let free = (n - 1) * k;
    let hi: Vec<f64> = (0..free).map(|j| prior[j % k]).collect();
    let points = match free {
        0..=3 => 11,
        4 => 8,
        _ => 6,
    };
    (0..n)
        .map(|dep| {
            let rows: Vec<usize> = (0..n).filter(|&i| i != dep).collect();
            let buffer = RefCell::new(Array2::zeros((n, k)));
            zoom_grid_min(&vec![0.0; free], &hi, points, 40, |u| {
                let mut gamma = buffer.borrow_mut();
                for j in 0..k {
                    let mut rest = prior[j];
                    for (slot, &i) in rows.iter().enumerate() {
                        gamma[[i, j]] = u[slot * k + j];
                        rest -= u[slot * k + j];
                    }
                    if rest < -1e-15 {
                        return None;
                    }
                    gamma[[dep, j]] = rest.max(0.0);
                }
                Some(prp_value(&gamma, cost, prior, div, lambda))
            })
        })
        .fold(f64::INFINITY, f64::min)
}

/// `<gamma, C> + lambda KL(gamma | alpha x beta)`.
pub fn entropic_value(gamma: &Array2<f64>, cost: &Array2<f64>, alpha: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let mut total = 0.0;
    for ((i, j), &g) in gamma.indexed_iter() {
        total += g * cost[[i, j]];
        if g > 0.0 {
            total += lambda * g * (g / (alpha[i] * beta[j])).ln();
        }
    }
    total
}

/// Minimum of the entropic transport problem over couplings of `alpha`
/// and `beta`. The free coordinates are the entries outside one dependent
/// row and column; every such pair is searched.
pub fn entropic_grid_oracle(cost: &Array2<f64>, alpha: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let (n, m) = cost.dim();
    let free = (n - 1) * (m - 1);
    let points = match free {
        0..=2 => 15,
        _ => 9,
    };
    let mut best = f64::INFINITY;
    for r in 0..n {
        for c in 0..m {
            let rows: Vec<usize> = (0..n).filter(|&i| i != r).collect();
            let cols: Vec<usize> = (0..m).filter(|&j| j != c).collect();
            let hi: Vec<f64> = (0..free)
                .map(|idx| alpha[rows[idx / (m - 1)]].min(beta[cols[idx % (m - 1)]]))
                .collect();
            let buffer = RefCell::new(Array2::zeros((n, m)));
            let value = zoom_grid_min(&vec![0.0; free], &hi, points, 40, |u| {
                let mut gamma = buffer.borrow_mut();
                for (a, &i) in rows.iter().enumerate() {
                    for (b, &j) in cols.iter().enumerate() {
                        gamma[[i, j]] = u[a * (m - 1) + b];
                    }
                }
                for &i in &rows {
                    let s: f64 = cols.iter().map(|&j| gamma[[i, j]]).sum();
                    gamma[[i, c]] = alpha[i] - s;
                }
                for j in 0..m {
                    let s: f64 = rows.iter().map(|&i| gamma[[i, j]]).sum();
                    gamma[[r, j]] = beta[j] - s;
                }
                if gamma.iter().any(|&g| g < -1e-15) {
                    return None;
                }
                gamma.mapv_inplace(|g| g.max(0.0));
                Some(entropic_value(&gamma, cost, alpha, beta, lambda))
            });
            best = best.min(value);
        }
    }
    best
}

/// All `2^d` vertices of the box.
pub fn vertices(bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    (0..1usize << bounds.len())
        .map(|mask| {
            bounds
                .iter()
                .enumerate()
                .map(|(l, &(a, b))| if mask >> l & 1 == 1 { b } else { a })
                .collect()
        })
        .collect()
}
