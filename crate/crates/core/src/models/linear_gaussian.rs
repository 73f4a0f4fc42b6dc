//! Non-interacting linear-Gaussian verification model
//! dX = a X dt + sigma dW, y_t ~ N(x_t, sigma_obs^2), X0 = x0 deterministic.
//! Its level-l discretization is itself a linear-Gaussian state-space model,
//! so the Kalman filter gives the exact marginal likelihood the particle
//! filters must reproduce.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::Level;
use crate::model::{
    CoordTransform, Dataset, InteractionKernel, Model, ParamTransform, ParamVector, StateVec,
};
use crate::rng::RandStream;

use super::neuron::LN_2PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearGaussianParams {
    pub a: f64,
    pub sigma: f64,
    pub x0: f64,
    pub sigma_obs: f64,
}

impl Default for LinearGaussianParams {
    fn default() -> Self {
        LinearGaussianParams {
            a: -0.5,
            sigma: 1.0,
            x0: 0.5,
            sigma_obs: 0.5,
        }
    }
}

/// The inferred parameter is the drift coefficient a (unconstrained, standard
/// normal prior).
pub struct LinearGaussianModel {
    pub params: LinearGaussianParams,
    transform: ParamTransform,
}

impl LinearGaussianModel {
    pub fn new(params: LinearGaussianParams) -> Self {
        LinearGaussianModel {
            params,
            transform: ParamTransform::new(vec![CoordTransform::Identity]),
        }
    }

    pub fn reference_theta(&self) -> ParamVector {
        ParamVector::new(vec![self.params.a])
    }
}

impl Model for LinearGaussianModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> &[&'static str] {
        &["a"]
    }

    fn transform(&self) -> &ParamTransform {
        &self.transform
    }

    fn initial_state(&self, _: &ParamVector, _: &mut RandStream) -> StateVec {
        vec![self.params.x0]
    }

    fn drift(&self, theta: &ParamVector, x: &[f64], _: f64) -> Vec<f64> {
        vec![theta.values[0] * x[0]]
    }

    fn diffusion(&self, _: &ParamVector, _: &[f64], _: f64) -> Vec<f64> {
        vec![self.params.sigma]
    }

    fn kernel(&self, _: InteractionKernel, _: &ParamVector, _: &[f64], _: &[f64]) -> f64 {
        // no interaction; any constant works and never reaches the dynamics
        0.0
    }

    fn log_obs(&self, _: &ParamVector, x: &[f64], y: &[f64]) -> f64 {
        let s = self.params.sigma_obs;
        let z = (y[0] - x[0]) / s;
        -0.5 * (LN_2PI + z * z) - s.ln()
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        let v = theta.values[0];
        -0.5 * (LN_2PI + v * v)
    }

    fn sample_obs(
        &self,
        _: &ParamVector,
        x: &[f64],
        stream: &mut RandStream,
    ) -> Result<Vec<f64>> {
        Ok(vec![x[0] + self.params.sigma_obs * stream.standard_normal()])
    }

    fn sample_prior(&self, stream: &mut RandStream) -> ParamVector {
        ParamVector::new(vec![stream.standard_normal()])
    }
}

/// Unit-interval transition moments of the level-l Euler discretization:
/// x_{t+1} | x_t ~ N(phi x_t, q) with phi = (1 + a Delta)^{2^l} and
/// q = sigma^2 Delta sum_{j=0}^{2^l - 1} (1 + a Delta)^{2j}.
pub fn unit_transition_moments(a: f64, sigma: f64, level: Level) -> (f64, f64) {
    let delta = level.delta();
    let steps = level.steps_per_unit();
    let r = 1.0 + a * delta;
    let phi = r.powi(steps as i32);
    let mut q = 0.0;
    let mut pow = 1.0;
    for _ in 0..steps {
        q += pow;
        pow *= r * r;
    }
    (phi, sigma * sigma * delta * q)
}

/// Unit-interval moments for affine drift a x + b: mean map x -> phi x + c.
pub fn affine_unit_transition(a: f64, b: f64, sigma: f64, level: Level) -> (f64, f64, f64) {
    let delta = level.delta();
    let steps = level.steps_per_unit();
    let r = 1.0 + a * delta;
    let phi = r.powi(steps as i32);
    let mut geo = 0.0; // sum r^j
    let mut q_geo = 0.0; // sum r^{2j}
    let mut pow = 1.0;
    let mut pow2 = 1.0;
    for _ in 0..steps {
        geo += pow;
        q_geo += pow2;
        pow *= r;
        pow2 *= r * r;
    }
    (phi, b * delta * geo, sigma * sigma * delta * q_geo)
}

/// Exact log-likelihood of the observations under the level-l discretized
/// linear system, via the standard Kalman predict/update recursion.
pub fn kalman_loglik(
    a: f64,
    sigma: f64,
    x0: f64,
    sigma_obs: f64,
    data: &Dataset,
    level: Level,
) -> Result<f64> {
    kalman_loglik_affine(a, 0.0, sigma, x0, sigma_obs, data, level)
}

/// Kalman log-likelihood for affine drift dX = (a X + b) dt + sigma dW.
pub fn kalman_loglik_affine(
    a: f64,
    b: f64,
    sigma: f64,
    x0: f64,
    sigma_obs: f64,
    data: &Dataset,
    level: Level,
) -> Result<f64> {
    let (phi, c, q) = affine_unit_transition(a, b, sigma, level);
    let r = sigma_obs * sigma_obs;
    let mut mean = x0;
    let mut var = 0.0;
    let mut log_lik = 0.0;
    for (t, y) in data.observations.iter().enumerate() {
        // predict over one unit interval
        mean = phi * mean + c;
        var = phi * phi * var + q;
        // update
        let innov_var = var + r;
        if innov_var <= 0.0 || !innov_var.is_finite() {
            return Err(Error::Singular(t + 1));
        }
        let innov = y[0] - mean;
        log_lik += -0.5 * (LN_2PI + innov_var.ln() + innov * innov / innov_var);
        let gain = var / innov_var;
        mean += gain * innov;
        var *= 1.0 - gain;
    }
    Ok(log_lik)
}
