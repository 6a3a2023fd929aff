//! Projected gradient for `lambda * sum_i privacy(gamma_i) + <L, gamma>` over
//! plans whose columns sum to the prior.
//!
//! Shared by the grid solver (`L = C`) and the convex step of the
//! difference-of-convex scheme (`L = -s`). Steps are chosen by Armijo
//! backtracking on the quadratic upper model. The privacy term is smoothed
//! (see `row_privacy_grad`) with a decreasing sequence of widths, each stage
//! warm-started from the previous one.

use ndarray::Array2;

use crate::divergence::{row_privacy, row_privacy_grad, FDivergence};
use crate::grad::project_scaled_simplex;

const WIDTHS: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
const MAX_BACKTRACKS: usize = 80;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub gamma: Array2<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Problem<'a> {
    pub div: &'a FDivergence,
    pub prior: &'a [f64],
    pub lambda: f64,
    pub linear: &'a Array2<f64>,
}

impl Problem<'_> {
    pub fn objective(&self, gamma: &Array2<f64>) -> f64 {
        let lin: f64 = gamma.iter().zip(self.linear.iter()).map(|(g, l)| g * l).sum();
        if self.lambda == 0.0 {
            return lin;
        }
        let privacy: f64 = gamma
            .rows()
            .into_iter()
            .map(|r| row_privacy(self.div, &r.to_vec(), self.prior))
            .sum();
        lin + self.lambda * privacy
    }

    fn smoothed(&self, gamma: &Array2<f64>, mu: f64, grad: &mut Array2<f64>) -> f64 {
        let k = self.prior.len();
        let mut value = 0.0;
        let mut row_grad = vec![0.0; k];
        for (i, r) in gamma.rows().into_iter().enumerate() {
            let row = r.to_vec();
            value += self.lambda * row_privacy_grad(self.div, &row, self.prior, mu, &mut row_grad);
            for j in 0..k {
                grad[[i, j]] = self.lambda * row_grad[j] + self.linear[[i, j]];
                value += row[j] * self.linear[[i, j]];
            }
        }
        value
    }

    fn project(&self, gamma: &mut Array2<f64>) {
        for (k, mut col) in gamma.columns_mut().into_iter().enumerate() {
            let p = project_scaled_simplex(&col.to_vec(), self.prior[k]);
            col.iter_mut().zip(p).for_each(|(c, v)| *c = v);
        }
    }

    /// Exact minimizer at `lambda = 0`: each column's mass goes to its
    /// smallest entry of `L`, ties to the lowest row.
    fn linear_program(&self, n: usize) -> Array2<f64> {
        let k = self.prior.len();
        let mut gamma = Array2::zeros((n, k));
        for j in 0..k {
            let mut best = 0;
            for i in 1..n {
                if self.linear[[i, j]] < self.linear[[best, j]] {
                    best = i;
                }
            }
            gamma[[best, j]] = self.prior[j];
        }
        gamma
    }

    /// Tries emptying each row into the remaining rows, column by column in
    /// proportion to their entries, keeping moves that lower the objective.
    /// Drains rows that gradient steps only shrink slowly.
    fn drain_rows(&self, gamma: &mut Array2<f64>, value: &mut f64) -> bool {
        let (n, k) = gamma.dim();
        let mut improved = false;
        for i in 0..n {
            if gamma.row(i).sum() <= 0.0 {
                continue;
            }
            let mut cand = gamma.clone();
            let mut ok = true;
            for j in 0..k {
                let moved = cand[[i, j]];
                if moved == 0.0 {
                    continue;
                }
                let rest: f64 = (0..n).filter(|&r| r != i).map(|r| cand[[r, j]]).sum();
                if rest <= 0.0 {
                    ok = false;
                    break;
                }
                for r in (0..n).filter(|&r| r != i) {
                    cand[[r, j]] += moved * cand[[r, j]] / rest;
                }
                cand[[i, j]] = 0.0;
            }
            if !ok {
                continue;
            }
            let v = self.objective(&cand);
            if v < *value {
                *gamma = cand;
                *value = v;
                improved = true;
            }
        }
        improved
    }

    /// Minimizes from `init`, returning the best iterate seen.
    pub fn solve(&self, init: &Array2<f64>, settings: Settings) -> Outcome {
        let (n, k) = init.dim();
        if self.lambda == 0.0 {
            let gamma = self.linear_program(n);
            return Outcome {
                objective: self.objective(&gamma),
                gamma,
                iterations: 0,
                converged: true,
            };
        }
        let mut gamma = init.clone();
        let mut best_value = self.objective(&gamma);
        let mut best = gamma.clone();
        let mut grad = Array2::zeros((n, k));
        let mut scratch = Array2::zeros((n, k));
        let mut step = 1.0;
        let mut iterations = 0;
        let mut converged = false;
        for mu in WIDTHS {
            converged = false;
            let stage_tol = settings.tol.max(mu);
            // Accelerated steps from the extrapolated point `y`, restarted
            // whenever the objective goes up.
            let mut value = self.smoothed(&gamma, mu, &mut scratch);
            let mut y = gamma.clone();
            let mut momentum: f64 = 1.0;
            for _ in 0..settings.max_iter {
                iterations += 1;
                let y_value = self.smoothed(&y, mu, &mut grad);
                let mut accepted = None;
                for _ in 0..MAX_BACKTRACKS {
                    let mut cand = &y - &(&grad * step);
                    self.project(&mut cand);
                    let diff = &cand - &y;
                    let lin: f64 = grad.iter().zip(diff.iter()).map(|(g, d)| g * d).sum();
                    let sq: f64 = diff.iter().map(|d| d * d).sum();
                    let cand_value = self.smoothed(&cand, mu, &mut scratch);
                    let slack = 1e-15 * (1.0 + y_value.abs());
                    if cand_value <= y_value + lin + sq / (2.0 * step) + slack {
                        let gap = diff.iter().fold(0.0f64, |m, d| m.max(d.abs())) / step;
                        accepted = Some((cand, cand_value, gap));
                        break;
                    }
                    step *= 0.5;
                }
                let Some((cand, cand_value, gap)) = accepted else {
                    break;
                };
                if cand_value > value {
                    if momentum == 1.0 {
                        // No plain step decreases the objective: stationary
                        // up to rounding.
                        converged = cand_value - value <= 1e-14 * (1.0 + value.abs());
                        break;
                    }
                    momentum = 1.0;
                    y.assign(&gamma);
                    continue;
                }
                let next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
                let beta = (momentum - 1.0) / next;
                y = &cand + &((&cand - &gamma) * beta);
                momentum = next;
                gamma = cand;
                value = cand_value;
                let exact = self.objective(&gamma);
                if exact < best_value {
                    best_value = exact;
                    best.assign(&gamma);
                }
                if gap < stage_tol {
                    converged = true;
                    break;
                }
                step = (step * 1.1).min(1e6);
            }
            if self.drain_rows(&mut best, &mut best_value) {
                gamma.assign(&best);
                converged = false;
            }
        }
        Outcome {
            gamma: best,
            objective: best_value,
            iterations,
            converged,
        }
    }
}
