//! Newton-update removal of training points, with the data-dependent and
//! worst-case gradient-residual bounds and incremental Gram bookkeeping.
//!
//! Removing a batch `B` from a model trained to weights `w` works on the
//! live rows only:
//!
//! ```text
//! delta = |B| lambda w + sum_{i in B} l'(w.x_i, y_i) x_i
//! H     = sum_{i live, i not in B} l''(w.x_i, y_i) x_i x_i^T + lambda n_live I
//! s     = H^{-1} delta            (SPD solve, never an explicit inverse)
//! w'    = w + s
//! ```
//!
//! The per-batch residual-bound increment is
//! `gamma * sqrt(||K||_2) * ||s||_2 * ||X s||_2` over the post-removal rows,
//! where `K = X^T X` is maintained by subtracting the removed outer
//! products. If the increment would exceed the remaining budget, nothing is
//! mutated and retraining is signalled instead.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::ConvexLoss;
use crate::trainer::PerturbedModel;

/// Relative inflation applied to eigenvalue-based norms so the eigensolver's
/// own residual cannot push a reported upper bound below the true value.
const EIG_SLACK: f64 = 1e-10;

/// Required relative accuracy of the Newton solve `||H s - delta|| / ||delta||`.
const SOLVE_TOL: f64 = 1e-10;

/// Live-row bookkeeping: the Gram matrix over live rows, and which of the
/// original dataset's rows are still present.
#[derive(Clone, Debug)]
pub struct RemovalState {
    gram: Array2<f64>,
    live_mask: Vec<bool>,
    live_count: usize,
}

impl RemovalState {
    /// Fresh state over a full dataset: `K = sum_i x_i x_i^T`, all rows live.
    pub fn new(data: &Dataset) -> Result<Self> {
        let gram = linalg::gram(&data.features())?;
        Ok(Self {
            gram,
            live_mask: vec![true; data.n()],
            live_count: data.n(),
        })
    }

    /// Rebuild from persisted parts, revalidating the invariants that can
    /// be checked cheaply.
    pub fn from_parts(gram: Array2<f64>, live_mask: Vec<bool>, live_count: usize) -> Result<Self> {
        if gram.nrows() != gram.ncols() {
            return Err(Error::Shape(format!(
                "gram matrix must be square, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let counted = live_mask.iter().filter(|&&m| m).count();
        if counted != live_count {
            return Err(Error::Parameter(format!(
                "live_count {live_count} does not match mask with {counted} live rows"
            )));
        }
        Ok(Self {
            gram,
            live_mask,
            live_count,
        })
    }

    pub fn gram(&self) -> ArrayView2<'_, f64> {
        self.gram.view()
    }

    pub fn live_mask(&self) -> &[bool] {
        &self.live_mask
    }

    pub fn live_count(&self) -> usize {
        self.live_count
    }

    pub fn n_rows(&self) -> usize {
        self.live_mask.len()
    }

    pub fn is_live(&self, row: usize) -> bool {
        self.live_mask.get(row).copied().unwrap_or(false)
    }

    /// Indices of live rows, ascending.
    pub fn live_rows(&self) -> Vec<usize> {
        self.live_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    fn validate_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Parameter("removal batch is empty".into()));
        }
        let mut seen = batch.to_vec();
        seen.sort_unstable();
        for pair in seen.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::StaleIndex(format!(
                    "row {} appears more than once in the batch",
                    pair[0]
                )));
            }
        }
        for &i in batch {
            if i >= self.live_mask.len() {
                return Err(Error::StaleIndex(format!(
                    "row {i} out of range for dataset with {} rows",
                    self.live_mask.len()
                )));
            }
            if !self.live_mask[i] {
                return Err(Error::StaleIndex(format!("row {i} was already removed")));
            }
        }
        if batch.len() >= self.live_count {
            return Err(Error::Parameter(
                "removing the batch would leave no live rows".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of a batch removal attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RemovalStatus {
    Applied,
    RetrainRequired,
}

#[derive(Clone, Debug)]
pub struct RemovalOutcome {
    pub status: RemovalStatus,
    /// Updated weights, present when the removal was applied.
    pub new_weights: Option<Array1<f64>>,
    /// The data-dependent residual-bound increment for this batch.
    pub residual_bound_increment: f64,
    /// The worst-case bound for this batch size, for diagnostics; absent
    /// when the loss carries no gradient-norm bound (least squares).
    pub worst_case_increment: Option<f64>,
}

/// `delta = m lambda w + sum_{i in removed} l'(w.x_i, y_i) x_i`.
pub fn compute_delta(
    w: &ArrayView1<'_, f64>,
    removed_rows: &[usize],
    data: &Dataset,
    loss: &ConvexLoss,
    lambda: f64,
) -> Result<Array1<f64>> {
    if removed_rows.is_empty() {
        return Err(Error::Parameter("removed_rows is empty".into()));
    }
    if w.len() != data.dim() {
        return Err(Error::Shape(format!(
            "weight vector has length {}, expected {}",
            w.len(),
            data.dim()
        )));
    }
    let mut delta = w.to_owned() * (removed_rows.len() as f64 * lambda);
    for &i in removed_rows {
        if i >= data.n() {
            return Err(Error::StaleIndex(format!(
                "row {i} out of range for dataset with {} rows",
                data.n()
            )));
        }
        let x = data.row(i);
        let z = x.dot(w);
        let s = loss.first_deriv(z, data.target(i))?;
        delta.scaled_add(s, &x.to_owned());
    }
    Ok(delta)
}

/// `H = sum_{i in live} l''(w.x_i, y_i) x_i x_i^T + lambda n_live I`.
///
/// Formed as `(S X)^T (S X)` with `S = diag(sqrt(l''))` so the heavy part
/// is a single rank-k update.
pub fn compute_hessian(
    w: &ArrayView1<'_, f64>,
    live_rows: &[usize],
    data: &Dataset,
    loss: &ConvexLoss,
    lambda: f64,
) -> Result<Array2<f64>> {
    if live_rows.is_empty() {
        return Err(Error::Parameter("live_rows is empty".into()));
    }
    let d = data.dim();
    if w.len() != d {
        return Err(Error::Shape(format!(
            "weight vector has length {}, expected {d}",
            w.len()
        )));
    }
    let n_live = live_rows.len();
    let mut scaled = Array2::<f64>::zeros((n_live, d));
    for (out, &i) in live_rows.iter().enumerate() {
        if i >= data.n() {
            return Err(Error::StaleIndex(format!(
                "row {i} out of range for dataset with {} rows",
                data.n()
            )));
        }
        let x = data.row(i);
        let z = x.dot(w);
        let c = loss.second_deriv(z, data.target(i))?;
        let root = c.max(0.0).sqrt();
        let mut row = scaled.row_mut(out);
        row.assign(&x);
        row *= root;
    }
    let mut h = linalg::gram(&scaled.view())?;
    let ridge = lambda * n_live as f64;
    for i in 0..d {
        h[[i, i]] += ridge;
    }
    Ok(h)
}

/// `s = H^{-1} delta` via an SPD Cholesky solve with a certified residual:
/// errors if `||H s - delta|| > 1e-10 ||delta||` even after refinement.
pub fn newton_step(hessian: &ArrayView2<'_, f64>, delta: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let factor = linalg::CholeskyFactor::new(hessian)?;
    let s = factor.solve(delta)?;
    let rel = factor.relative_residual(&s.view(), delta);
    if rel > SOLVE_TOL {
        return Err(Error::Numeric(format!(
            "Newton solve residual {rel:.3e} exceeds tolerance {SOLVE_TOL:.1e}"
        )));
    }
    Ok(s)
}

/// The one-step removal update `w + H^{-1} delta`.
pub fn newton_update(
    w: &ArrayView1<'_, f64>,
    hessian: &ArrayView2<'_, f64>,
    delta: &ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    if w.len() != delta.len() || hessian.nrows() != w.len() {
        return Err(Error::Shape(format!(
            "dimension mismatch: w {}, hessian {}x{}, delta {}",
            w.len(),
            hessian.nrows(),
            hessian.ncols(),
            delta.len()
        )));
    }
    let s = newton_step(hessian, delta)?;
    Ok(&w.to_owned() + &s)
}

/// `||X||_2 = sqrt(lambda_max(K))` from the Gram matrix `K = X^T X`, by
/// exact symmetric eigendecomposition, inflated by 1e-10 relative so the
/// result stays an upper bound despite eigensolver residual.
pub fn spectral_norm_from_gram(gram: &ArrayView2<'_, f64>) -> Result<f64> {
    let lam_max = linalg::sym_eig_max(gram)?;
    Ok(lam_max.max(0.0).sqrt() * (1.0 + EIG_SLACK))
}

/// Data-dependent residual bound
/// `gamma * ||X|| * ||s|| * ||X s||` with `X` ranging over `live_rows`.
pub fn residual_bound_data_dependent(
    gamma: f64,
    gram: &ArrayView2<'_, f64>,
    update_s: &ArrayView1<'_, f64>,
    data: &Dataset,
    live_rows: &[usize],
) -> Result<f64> {
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let spectral = spectral_norm_from_gram(gram)?;
    let s_norm = update_s.dot(update_s).sqrt();
    let mut xs_sq = 0.0;
    for &i in live_rows {
        let t = data.row(i).dot(update_s);
        xs_sq += t * t;
    }
    Ok(gamma * spectral * s_norm * xs_sq.sqrt())
}

/// Worst-case residual bound `4 gamma m^2 C^2 / (lambda^2 (n - m))` for
/// removing `m` of `n_before` points.
pub fn residual_bound_worst_case(
    gamma: f64,
    grad_norm_bound_c: Option<f64>,
    lambda: f64,
    n_before: usize,
    m: usize,
) -> Result<f64> {
    let c = grad_norm_bound_c.ok_or_else(|| {
        Error::Unsupported(
            "worst-case residual bound requires a gradient-norm bound C; none is set for this loss"
                .into(),
        )
    })?;
    if m == 0 || n_before <= m {
        return Err(Error::Parameter(format!(
            "need n_before > m >= 1, got n_before={n_before}, m={m}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::Parameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let m = m as f64;
    let remaining = (n_before as f64) - m;
    Ok(4.0 * gamma * m * m * c * c / (lambda * lambda * remaining))
}

/// Remove a batch of live rows from the model, if the budget allows.
///
/// Computes `delta` and `H` over the post-removal live set at the current
/// weights, solves for the Newton step, downdates the Gram matrix, and
/// evaluates the residual-bound increment against `budget_remaining`. When
/// the increment is strictly larger than the budget, the model and state
/// are left untouched and `RetrainRequired` is returned; otherwise the
/// weights, Gram matrix, and live mask are committed atomically.
pub fn remove_batch(
    model: &mut PerturbedModel,
    state: &mut RemovalState,
    batch: &[usize],
    data: &Dataset,
    loss: &ConvexLoss,
    budget_remaining: f64,
) -> Result<RemovalOutcome> {
    if state.n_rows() != data.n() {
        return Err(Error::Shape(format!(
            "state tracks {} rows but dataset has {}",
            state.n_rows(),
            data.n()
        )));
    }
    state.validate_batch(batch)?;
    let n_before = state.live_count;
    let m = batch.len();

    let delta = compute_delta(&model.weights.view(), batch, data, loss, model.lambda)?;

    let mut removed = vec![false; state.n_rows()];
    for &i in batch {
        removed[i] = true;
    }
    let live_after: Vec<usize> = state
        .live_rows()
        .into_iter()
        .filter(|&i| !removed[i])
        .collect();

    let hessian = compute_hessian(&model.weights.view(), &live_after, data, loss, model.lambda)?;
    let step = newton_step(&hessian.view(), &delta.view())?;

    // Downdate K before the bound: the spectral norm is taken over the
    // post-removal rows.
    let mut gram_after = state.gram.clone();
    for &i in batch {
        let x = data.row(i);
        for r in 0..data.dim() {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for c in 0..data.dim() {
                gram_after[[r, c]] -= xr * x[c];
            }
        }
    }

    let increment = residual_bound_data_dependent(
        loss.gamma(),
        &gram_after.view(),
        &step.view(),
        data,
        &live_after,
    )?;
    let worst_case = match loss.grad_norm_bound() {
        Some(c) => Some(residual_bound_worst_case(
            loss.gamma(),
            Some(c),
            model.lambda,
            n_before,
            m,
        )?),
        None => None,
    };

    if increment > budget_remaining {
        return Ok(RemovalOutcome {
            status: RemovalStatus::RetrainRequired,
            new_weights: None,
            residual_bound_increment: increment,
            worst_case_increment: worst_case,
        });
    }

    model.weights += &step;
    state.gram = gram_after;
    for &i in batch {
        state.live_mask[i] = false;
    }
    state.live_count = n_before - m;

    Ok(RemovalOutcome {
        status: RemovalStatus::Applied,
        new_weights: Some(model.weights.clone()),
        residual_bound_increment: increment,
        worst_case_increment: worst_case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::oracle;
    use crate::trainer::{self, TrainParams};
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_logistic_dataset(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let features = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let targets =
            Array1::from_iter((0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }));
        let (data, _) = Dataset::new(features, targets).unwrap().normalize();
        data
    }

    #[test]
    fn delta_single_row_at_zero_weights() {
        let data = Dataset::new(array![[0.4, -0.2], [0.1, 0.9]], array![1.0, -1.0])
            .unwrap()
            .assert_normalized()
            .unwrap();
        let w = Array1::zeros(2);
        let delta =
            compute_delta(&w.view(), &[0], &data, &ConvexLoss::logistic(), 0.7).unwrap();
        // lambda*0 + (sigmoid(0)-1) y x = -x/2 for y = +1
        assert!((delta[0] + 0.2).abs() < 1e-15);
        assert!((delta[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn delta_is_additive_over_identical_rows() {
        let data = Dataset::new(array![[0.4, -0.2], [0.4, -0.2]], array![1.0, 1.0])
            .unwrap()
            .assert_normalized()
            .unwrap();
        let w = Array1::zeros(2);
        let loss = ConvexLoss::logistic();
        let one = compute_delta(&w.view(), &[0], &data, &loss, 0.7).unwrap();
        let two = compute_delta(&w.view(), &[0, 1], &data, &loss, 0.7).unwrap();
        for (t, o) in two.iter().zip(one.iter()) {
            assert!((t - 2.0 * o).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_matches_brute_force_summation() {
        let data = random_logistic_dataset(50, 5, 31);
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let w = Array1::from_shape_fn(5, |_| rng.gen_range(-1.0..1.0));
        let loss = ConvexLoss::logistic();
        let lambda = 0.02;
        let batch = [3usize, 17, 44];
        let delta = compute_delta(&w.view(), &batch, &data, &loss, lambda).unwrap();
        // independent re-summation
        let mut expected = w.clone() * (batch.len() as f64 * lambda);
        for &i in &batch {
            let z: f64 = data
                .row(i)
                .iter()
                .zip(w.iter())
                .map(|(a, b)| a * b)
                .sum();
            let s = loss.first_deriv(z, data.target(i)).unwrap();
            for j in 0..5 {
                expected[j] += s * data.row(i)[j];
            }
        }
        for (d, e) in delta.iter().zip(expected.iter()) {
            assert!((d - e).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_rejects_out_of_range() {
        let data = random_logistic_dataset(5, 2, 1);
        let w = Array1::zeros(2);
        assert!(matches!(
            compute_delta(&w.view(), &[9], &data, &ConvexLoss::logistic(), 0.1),
            Err(Error::StaleIndex(_))
        ));
    }

    #[test]
    fn hessian_least_squares_orthonormal_rows() {
        let data = Dataset::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.3, -0.4])
            .unwrap()
            .assert_normalized()
            .unwrap();
        let w = Array1::zeros(2);
        let h = compute_hessian(&w.view(), &[0, 1], &data, &ConvexLoss::least_squares(), 0.5)
            .unwrap();
        // l'' = 2 on orthonormal rows: 2 I + 0.5 * 2 * I = 3 I
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 3.0 } else { 0.0 };
                assert!((h[[i, j]] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hessian_logistic_single_row_at_zero() {
        let data = Dataset::new(array![[0.6, 0.8]], array![1.0])
            .unwrap()
            .assert_normalized()
            .unwrap();
        let w = Array1::zeros(2);
        let lambda = 0.3;
        let h =
            compute_hessian(&w.view(), &[0], &data, &ConvexLoss::logistic(), lambda).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected =
                    0.25 * data.row(0)[i] * data.row(0)[j] + if i == j { lambda } else { 0.0 };
                assert!((h[[i, j]] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hessian_eigenvalue_floor_is_lambda_n_live() {
        let data = random_logistic_dataset(40, 6, 77);
        let mut rng = ChaCha12Rng::seed_from_u64(78);
        let w = Array1::from_shape_fn(6, |_| rng.gen_range(-1.0..1.0));
        let lambda = 0.05;
        let live: Vec<usize> = (0..40).collect();
        let h = compute_hessian(&w.view(), &live, &data, &ConvexLoss::logistic(), lambda).unwrap();
        let eigmin = crate::linalg::sym_eigenvalues(&h.view()).unwrap()[0];
        assert!(eigmin >= lambda * 40.0 - 1e-9, "eigmin {eigmin}");
    }

    #[test]
    fn newton_update_identity_hessian_adds_delta() {
        let w = array![1.0, 2.0];
        let h = Array2::<f64>::eye(2);
        let delta = array![0.5, -0.5];
        let out = newton_update(&w.view(), &h.view(), &delta.view()).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-14);
        assert!((out[1] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn newton_update_zero_delta_is_identity() {
        let w = array![1.0, 2.0, 3.0];
        let mut h = Array2::<f64>::eye(3);
        h[[0, 1]] = 0.2;
        h[[1, 0]] = 0.2;
        let delta = Array1::zeros(3);
        let out = newton_update(&w.view(), &h.view(), &delta.view()).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn spectral_norm_examples() {
        let eye = Array2::<f64>::eye(3);
        let s = spectral_norm_from_gram(&eye.view()).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
        let diag = array![[4.0, 0.0], [0.0, 1.0]];
        let s = spectral_norm_from_gram(&diag.view()).unwrap();
        assert!((s - 2.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_matches_svd_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((30, 4), |_| rng.gen_range(-1.0..1.0));
        let k = crate::linalg::gram(&x.view()).unwrap();
        let from_gram = spectral_norm_from_gram(&k.view()).unwrap();
        let sigma_max = crate::linalg::singular_value_max(&x.view()).unwrap();
        assert!((from_gram - sigma_max).abs() < 1e-9);
        // and the inflation keeps it an upper bound
        assert!(from_gram >= sigma_max);
    }

    #[test]
    fn data_dependent_bound_zero_cases() {
        let data = random_logistic_dataset(10, 3, 90);
        let k = crate::linalg::gram(&data.features()).unwrap();
        let live: Vec<usize> = (0..10).collect();
        let zero_s = Array1::zeros(3);
        let b = residual_bound_data_dependent(0.25, &k.view(), &zero_s.view(), &data, &live)
            .unwrap();
        assert_eq!(b, 0.0);
        let some_s = array![1.0, 0.0, 0.0];
        let b = residual_bound_data_dependent(0.0, &k.view(), &some_s.view(), &data, &live)
            .unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn worst_case_bound_values() {
        // 4 * 0.25 * 1 / (1e-6 * 1000) = 1000
        let b = residual_bound_worst_case(0.25, Some(1.0), 1e-3, 1001, 1).unwrap();
        assert!((b - 1000.0).abs() / 1000.0 < 1e-12);
        // doubling m at the same n - m quadruples the bound
        let b2 = residual_bound_worst_case(0.25, Some(1.0), 1e-3, 1002, 2).unwrap();
        assert!((b2 / b - 4.0).abs() < 1e-12);
        // gamma = 0 (least squares with a supplied C)
        let b0 = residual_bound_worst_case(0.0, Some(1.0), 1e-3, 100, 1).unwrap();
        assert_eq!(b0, 0.0);
    }

    #[test]
    fn worst_case_bound_errors() {
        assert!(matches!(
            residual_bound_worst_case(0.25, None, 1e-3, 100, 1),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            residual_bound_worst_case(0.25, Some(1.0), 1e-3, 5, 5),
            Err(Error::Parameter(_))
        ));
    }

    fn train_least_squares(n: usize, d: usize, seed: u64) -> (Dataset, PerturbedModel) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let features = Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
        let targets = Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
        let (data, _) = Dataset::new(features, targets).unwrap().normalize();
        let params = TrainParams::new(0.1, 0.2, 1.0, 1e-4, seed).with_grad_tol(1e-12);
        let model = trainer::train(&data, &ConvexLoss::least_squares(), &params).unwrap();
        (data, model)
    }

    #[test]
    fn least_squares_newton_removal_is_exact() {
        let (data, model) = train_least_squares(12, 3, 44);
        let loss = ConvexLoss::least_squares();
        let removed = [7usize];
        let live_after: Vec<usize> = (0..12).filter(|i| !removed.contains(i)).collect();
        let delta =
            compute_delta(&model.weights.view(), &removed, &data, &loss, model.lambda).unwrap();
        let h = compute_hessian(&model.weights.view(), &live_after, &data, &loss, model.lambda)
            .unwrap();
        let w_minus = newton_update(&model.weights.view(), &h.view(), &delta.view()).unwrap();
        let w_retrain = oracle::retrain_exact(
            &data,
            &live_after,
            &loss,
            model.lambda,
            &model.perturbation.view(),
            1e-12,
        )
        .unwrap();
        let gap = (&w_minus - &w_retrain).mapv(|v| v * v).sum().sqrt();
        assert!(gap <= 1e-8, "gap {gap}");
    }

    #[test]
    fn remove_batch_least_squares_applies_with_zero_increment() {
        let (data, mut model) = train_least_squares(15, 4, 45);
        let mut state = RemovalState::new(&data).unwrap();
        let loss = ConvexLoss::least_squares();
        let out = remove_batch(&mut model, &mut state, &[2], &data, &loss, 0.0).unwrap();
        assert_eq!(out.status, RemovalStatus::Applied);
        assert_eq!(out.residual_bound_increment, 0.0);
        assert!(out.worst_case_increment.is_none());
        assert_eq!(state.live_count(), 14);
        assert!(!state.is_live(2));
        let w_retrain = oracle::retrain_exact(
            &data,
            &state.live_rows(),
            &loss,
            model.lambda,
            &model.perturbation.view(),
            1e-12,
        )
        .unwrap();
        let gap = (&model.weights - &w_retrain).mapv(|v| v * v).sum().sqrt();
        assert!(gap <= 1e-8, "gap {gap}");
    }

    #[test]
    fn remove_batch_over_budget_leaves_state_untouched() {
        let data = random_logistic_dataset(30, 4, 46);
        let params = TrainParams::new(1e-3, 0.1, 1.0, 1e-4, 46).with_grad_tol(1e-11);
        let loss = ConvexLoss::logistic();
        let mut model = trainer::train(&data, &loss, &params).unwrap();
        let mut state = RemovalState::new(&data).unwrap();
        let weights_before = model.weights.clone();
        let gram_before = state.gram().to_owned();

        let out = remove_batch(&mut model, &mut state, &[5], &data, &loss, 0.0).unwrap();
        assert_eq!(out.status, RemovalStatus::RetrainRequired);
        assert!(out.new_weights.is_none());
        assert!(out.residual_bound_increment > 0.0);
        assert_eq!(model.weights, weights_before);
        assert_eq!(state.gram().to_owned(), gram_before);
        assert_eq!(state.live_count(), 30);
        assert!(state.is_live(5));
    }

    #[test]
    fn remove_batch_weight_gap_is_within_strong_convexity_bound() {
        let n = 1000;
        let data = random_logistic_dataset(n, 20, 47);
        let lambda = 1e-2;
        let params = TrainParams::new(lambda, 0.5, 1.0, 1e-4, 47).with_grad_tol(1e-9);
        let loss = ConvexLoss::logistic();
        let mut model = trainer::train(&data, &loss, &params).unwrap();
        let mut state = RemovalState::new(&data).unwrap();
        let removed = [123usize];
        let out =
            remove_batch(&mut model, &mut state, &removed, &data, &loss, f64::INFINITY).unwrap();
        assert_eq!(out.status, RemovalStatus::Applied);
        let w_retrain = oracle::retrain_exact(
            &data,
            &state.live_rows(),
            &loss,
            lambda,
            &model.perturbation.view(),
            1e-11,
        )
        .unwrap();
        let gap = (&model.weights - &w_retrain).mapv(|v| v * v).sum().sqrt();
        let bound = out.residual_bound_increment / (lambda * (n as f64 - 1.0));
        // small slack for the retrain oracle's own tolerance
        assert!(
            gap <= bound + 1e-7,
            "gap {gap} exceeds strong-convexity bound {bound}"
        );
    }

    #[test]
    fn remove_batch_rejects_duplicates_stale_and_final_row() {
        let data = random_logistic_dataset(3, 2, 48);
        let params = TrainParams::new(0.1, 0.0, 1.0, 1e-4, 48);
        let loss = ConvexLoss::logistic();
        let mut model = trainer::train(&data, &loss, &params).unwrap();
        let mut state = RemovalState::new(&data).unwrap();

        assert!(matches!(
            remove_batch(&mut model, &mut state, &[1, 1], &data, &loss, 1.0),
            Err(Error::StaleIndex(_))
        ));
        assert!(matches!(
            remove_batch(&mut model, &mut state, &[0, 1, 2], &data, &loss, 1.0),
            Err(Error::Parameter(_))
        ));
        let out = remove_batch(&mut model, &mut state, &[0], &data, &loss, f64::INFINITY).unwrap();
        assert_eq!(out.status, RemovalStatus::Applied);
        assert!(matches!(
            remove_batch(&mut model, &mut state, &[0], &data, &loss, 1.0),
            Err(Error::StaleIndex(_))
        ));
    }

    #[test]
    fn gram_stays_consistent_across_removals() {
        let data = random_logistic_dataset(25, 4, 49);
        let params = TrainParams::new(0.05, 0.0, 1.0, 1e-4, 49);
        let loss = ConvexLoss::logistic();
        let mut model = trainer::train(&data, &loss, &params).unwrap();
        let mut state = RemovalState::new(&data).unwrap();
        for batch in [vec![1usize, 3], vec![0], vec![10, 20, 15]] {
            remove_batch(&mut model, &mut state, &batch, &data, &loss, f64::INFINITY).unwrap();
        }
        let live = state.live_rows();
        let sub = data.subset(&live).unwrap();
        let recomputed = crate::linalg::gram(&sub.features()).unwrap();
        let num = (&state.gram().to_owned() - &recomputed)
            .mapv(|v| v * v)
            .sum()
            .sqrt();
        let den = recomputed.mapv(|v| v * v).sum().sqrt();
        assert!(num / den <= 1e-8, "relative Frobenius error {}", num / den);
    }
}
