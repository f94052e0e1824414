//! Deterministic limited-memory BFGS with Armijo backtracking.
//!
//! The training objectives are strongly convex (Hessian bounded below by
//! `lambda * n * I`), so plain backtracking plus the usual curvature guard
//! on the (s, y) pairs converges; the contract callers rely on is the
//! attained gradient norm, which is always checked, never assumed.

use ndarray::{Array1, ArrayView1};
use std::collections::VecDeque;

const MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const CURVATURE_C2: f64 = 0.9;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

pub(crate) struct MinimizeResult {
    pub w: Array1<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` from `w0` until `||grad f|| <= grad_tol` or `max_iters`.
///
/// `eval` returns the objective value and gradient together. The result
/// carries the best iterate seen (lowest gradient norm), whether or not
/// the tolerance was reached.
pub(crate) fn minimize<F>(
    mut eval: F,
    w0: Array1<f64>,
    grad_tol: f64,
    max_iters: usize,
) -> MinimizeResult
where
    F: FnMut(&ArrayView1<'_, f64>) -> (f64, Array1<f64>),
{
    let mut w = w0;
    let (mut value, mut grad) = eval(&w.view());
    let mut grad_norm = norm(&grad);

    let mut best_w = w.clone();
    let mut best_grad_norm = grad_norm;

    let mut s_hist: VecDeque<Array1<f64>> = VecDeque::with_capacity(MEMORY);
    let mut y_hist: VecDeque<Array1<f64>> = VecDeque::with_capacity(MEMORY);
    let mut rho_hist: VecDeque<f64> = VecDeque::with_capacity(MEMORY);

    let mut iterations = 0;
    while grad_norm > grad_tol && iterations < max_iters {
        iterations += 1;

        let mut dir = two_loop(&grad, &s_hist, &y_hist, &rho_hist);
        let mut slope = dir.dot(&grad);
        if slope >= 0.0 {
            // Memory produced an ascent direction; fall back to steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -grad.clone();
            slope = dir.dot(&grad);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = &w + &(&dir * step);
            let (cand_value, cand_grad) = eval(&candidate.view());
            let armijo = cand_value <= value + ARMIJO_C1 * step * slope;
            // Near the optimum the Armijo decrease (~||g||^2) falls below the
            // floating-point resolution of f itself; accept on the
            // approximate Wolfe conditions instead, which read the
            // directional derivative and keep the gradient norm shrinking.
            let flat = cand_value <= value + 1e-11 * (1.0 + value.abs());
            let approx_wolfe = flat
                && cand_grad.dot(&dir) >= CURVATURE_C2 * slope
                && norm(&cand_grad) < grad_norm;
            if armijo || approx_wolfe {
                accepted = Some((candidate, cand_value, cand_grad));
                break;
            }
            step *= BACKTRACK;
        }
        let Some((new_w, new_value, new_grad)) = accepted else {
            if !s_hist.is_empty() {
                // Retry from steepest descent before giving up.
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            break;
        };

        let s = &new_w - &w;
        let y = &new_grad - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if s_hist.len() == MEMORY {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
        }

        w = new_w;
        value = new_value;
        grad = new_grad;
        grad_norm = norm(&grad);
        if grad_norm < best_grad_norm {
            best_w = w.clone();
            best_grad_norm = grad_norm;
        }
    }

    let converged = best_grad_norm <= grad_tol;
    MinimizeResult {
        w: best_w,
        grad_norm: best_grad_norm,
        iterations,
        converged,
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn two_loop(
    grad: &Array1<f64>,
    s_hist: &VecDeque<Array1<f64>>,
    y_hist: &VecDeque<Array1<f64>>,
    rho_hist: &VecDeque<f64>,
) -> Array1<f64> {
    let mut q = grad.clone();
    let k = s_hist.len();
    let mut alphas = vec![0.0; k];
    for i in (0..k).rev() {
        let alpha = rho_hist[i] * s_hist[i].dot(&q);
        alphas[i] = alpha;
        q.scaled_add(-alpha, &y_hist[i]);
    }
    if let (Some(s), Some(y)) = (s_hist.back(), y_hist.back()) {
        let scale = s.dot(y) / y.dot(y);
        q *= scale;
    }
    for i in 0..k {
        let beta = rho_hist[i] * y_hist[i].dot(&q);
        q.scaled_add(alphas[i] - beta, &s_hist[i]);
    }
    -q
}
