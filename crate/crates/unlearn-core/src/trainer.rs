//! Training of removal-enabled models: sample the perturbation vector,
//! minimize the perturbed regularized empirical risk
//! `L_b(w) = sum_i l(w^T x_i, y_i) + (lambda n / 2) ||w||^2 + b^T w`,
//! and package the result with everything needed to reproduce it.

use ndarray::{Array1, ArrayView1};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::lbfgs;
use crate::loss::ConvexLoss;
use crate::perturb;

/// Default gradient tolerance: `1e-10 * max(1, n)`.
pub fn default_grad_tol(n: usize) -> f64 {
    1e-10 * (n as f64).max(1.0)
}

/// Hyperparameters for [`train`].
#[derive(Clone, Copy, Debug)]
pub struct TrainParams {
    pub lambda: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    /// `None` selects [`default_grad_tol`] for the dataset size.
    pub grad_tol: Option<f64>,
    pub max_iters: usize,
}

impl TrainParams {
    pub fn new(lambda: f64, sigma: f64, epsilon: f64, delta: f64, seed: u64) -> Self {
        Self {
            lambda,
            sigma,
            epsilon,
            delta,
            seed,
            grad_tol: None,
            max_iters: 50_000,
        }
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = Some(tol);
        self
    }
}

/// A trained model: weights, the perturbation that was baked into its
/// objective, and the hyperparameters required to audit or remove from it.
#[derive(Clone, Debug)]
pub struct PerturbedModel {
    pub weights: Array1<f64>,
    pub perturbation: Array1<f64>,
    pub lambda: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    /// Gradient-norm tolerance the optimizer attained at creation.
    pub grad_tol: f64,
}

/// Value and gradient of the perturbed objective at `w`.
///
/// The regularizer is `(lambda * n / 2) ||w||^2` with `n` the number of
/// rows in `data`; the perturbation enters as `b^T w`.
pub fn objective_and_gradient(
    w: &ArrayView1<'_, f64>,
    data: &Dataset,
    loss: &ConvexLoss,
    lambda: f64,
    b: &ArrayView1<'_, f64>,
) -> Result<(f64, Array1<f64>)> {
    let (n, d) = (data.n(), data.dim());
    if w.len() != d {
        return Err(Error::Shape(format!(
            "weight vector has length {}, expected {d}",
            w.len()
        )));
    }
    if b.len() != d {
        return Err(Error::Shape(format!(
            "perturbation vector has length {}, expected {d}",
            b.len()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }

    let margins = data.features().dot(&w.to_owned());
    let mut value = 0.0;
    let mut factors = Array1::<f64>::zeros(n);
    for i in 0..n {
        let y = data.target(i);
        value += loss.value(margins[i], y)?;
        factors[i] = loss.first_deriv(margins[i], y)?;
    }

    let ln = lambda * n as f64;
    let w_owned = w.to_owned();
    let mut grad = data.features().t().dot(&factors);
    grad.scaled_add(ln, &w_owned);
    grad += &b.to_owned();

    value += 0.5 * ln * w_owned.dot(&w_owned) + b.dot(&w_owned);
    Ok((value, grad))
}

/// Margins `X w`, e.g. for accuracy reporting.
pub fn decision_values(data: &Dataset, w: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if w.len() != data.dim() {
        return Err(Error::Shape(format!(
            "weight vector has length {}, expected {}",
            w.len(),
            data.dim()
        )));
    }
    Ok(data.features().dot(&w.to_owned()))
}

/// Minimize the perturbed objective over `data` from `w0`.
///
/// Shared by [`train`] and the oracle's exact retraining; the Newton
/// removal path never goes through here.
pub(crate) fn minimize_objective(
    data: &Dataset,
    loss: &ConvexLoss,
    lambda: f64,
    b: &ArrayView1<'_, f64>,
    w0: Array1<f64>,
    grad_tol: f64,
    max_iters: usize,
) -> Result<(Array1<f64>, f64, usize)> {
    // Surface any domain/shape error once, up front, so the optimizer
    // closure below can stay infallible.
    objective_and_gradient(&w0.view(), data, loss, lambda, b)?;

    let eval = |w: &ArrayView1<'_, f64>| {
        objective_and_gradient(w, data, loss, lambda, b).expect("inputs validated before minimize")
    };
    let result = lbfgs::minimize(eval, w0, grad_tol, max_iters);
    if !result.converged {
        return Err(Error::Convergence {
            grad_tol,
            grad_norm: result.grad_norm,
            iters: result.iterations,
            best_weights: result.w.to_vec(),
        });
    }
    Ok((result.w, result.grad_norm, result.iterations))
}

/// Train a removal-enabled model: draw `b ~ N(0, sigma^2)^d` from the seed
/// and minimize `L_b` to the requested gradient tolerance, starting at 0.
pub fn train(data: &Dataset, loss: &ConvexLoss, params: &TrainParams) -> Result<PerturbedModel> {
    if !data.normalized() {
        return Err(Error::Parameter(
            "dataset must be normalized before training (call Dataset::normalize)".into(),
        ));
    }
    if !(params.lambda > 0.0) {
        return Err(Error::Parameter(format!(
            "lambda must be positive, got {}",
            params.lambda
        )));
    }
    let grad_tol = params.grad_tol.unwrap_or_else(|| default_grad_tol(data.n()));
    if !(grad_tol > 0.0) {
        return Err(Error::Parameter(format!(
            "grad_tol must be positive, got {grad_tol}"
        )));
    }

    let b = perturb::sample_gaussian(data.dim(), params.sigma, params.seed)?;
    let (weights, _grad_norm, _iters) = minimize_objective(
        data,
        loss,
        params.lambda,
        &b.view(),
        Array1::zeros(data.dim()),
        grad_tol,
        params.max_iters,
    )?;

    Ok(PerturbedModel {
        weights,
        perturbation: b,
        lambda: params.lambda,
        sigma: params.sigma,
        epsilon: params.epsilon,
        delta: params.delta,
        seed: params.seed,
        grad_tol,
    })
}
