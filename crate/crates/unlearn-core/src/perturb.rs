//! Samplers for the random linear perturbation added to the training
//! objective.
//!
//! Two schemes are supported: i.i.d. Gaussian coordinates (the (ε,δ)
//! guarantee) and a uniform direction on the sphere scaled by a
//! Gamma-distributed norm (the pure-ε guarantee).

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Length-`d` vector of independent `N(0, sigma^2)` draws, deterministic
/// given the seed. `sigma = 0` yields the zero vector.
pub fn sample_gaussian(d: usize, sigma: f64, seed: u64) -> Result<Array1<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(Array1::zeros(d));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(Array1::from_iter(
        (0..d).map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
    ))
}

/// Uniformly distributed direction on the unit sphere in `R^d`.
pub fn sample_sphere_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v = Array1::from_iter(
            (0..d).map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)),
        );
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Uniform unit direction scaled by a `Gamma(shape = d, scale = eps'/eps)`
/// norm, deterministic given the seed.
pub fn sample_spherical_gamma(
    d: usize,
    epsilon: f64,
    epsilon_prime: f64,
    seed: u64,
) -> Result<Array1<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(epsilon_prime > 0.0) {
        return Err(Error::Parameter(format!(
            "epsilon_prime must be positive, got {epsilon_prime}"
        )));
    }
    if d == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let direction = sample_sphere_direction(d, &mut rng);
    let gamma = Gamma::new(d as f64, epsilon_prime / epsilon)
        .map_err(|e| Error::Parameter(format!("invalid Gamma parameters: {e}")))?;
    let radius: f64 = gamma.sample(&mut rng);
    Ok(direction * radius)
}
