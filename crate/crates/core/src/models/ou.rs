//! Mean-field Ornstein-Uhlenbeck verification model:
//! dX = pull (zeta1_bar - X) dt + sigma dW with zeta1(x, z) = z, so the drift
//! pulls every particle toward the cloud mean. The limiting mean is constant.

use serde::{Deserialize, Serialize};

use crate::model::{
    CoordTransform, InteractionKernel, Model, ParamTransform, ParamVector, StateVec,
};
use crate::rng::RandStream;

use super::neuron::LN_2PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OUMeanFieldParams {
    pub pull: f64,
    pub sigma: f64,
    pub m0: f64,
    pub sigma_obs: f64,
    /// Log-sd of the lognormal prior on the pull rate.
    pub prior_log_sd: f64,
}

impl Default for OUMeanFieldParams {
    fn default() -> Self {
        OUMeanFieldParams {
            pull: 1.0,
            sigma: 0.5,
            m0: 1.0,
            sigma_obs: 0.5,
            prior_log_sd: 0.7,
        }
    }
}

/// The inferred parameter is the pull rate (positive, log-transformed), with a
/// lognormal prior centered at the reference value.
pub struct OUMeanFieldModel {
    pub params: OUMeanFieldParams,
    transform: ParamTransform,
    prior_log_mean: f64,
    prior_log_sd: f64,
}

impl OUMeanFieldModel {
    pub fn new(params: OUMeanFieldParams) -> Self {
        let prior_log_mean = params.pull.ln();
        let prior_log_sd = params.prior_log_sd;
        OUMeanFieldModel {
            params,
            transform: ParamTransform::new(vec![CoordTransform::Log]),
            prior_log_mean,
            prior_log_sd,
        }
    }

    pub fn reference_theta(&self) -> ParamVector {
        ParamVector::new(vec![self.params.pull])
    }
}

impl Model for OUMeanFieldModel {
    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> &[&'static str] {
        &["pull"]
    }

    fn transform(&self) -> &ParamTransform {
        &self.transform
    }

    fn initial_state(&self, _: &ParamVector, _: &mut RandStream) -> StateVec {
        vec![self.params.m0]
    }

    fn drift(&self, theta: &ParamVector, x: &[f64], zeta1_bar: f64) -> Vec<f64> {
        vec![theta.values[0] * (zeta1_bar - x[0])]
    }

    fn diffusion(&self, _: &ParamVector, _: &[f64], _: f64) -> Vec<f64> {
        vec![self.params.sigma]
    }

    fn kernel(&self, which: InteractionKernel, _: &ParamVector, _: &[f64], z: &[f64]) -> f64 {
        match which {
            InteractionKernel::Drift => z[0],
            InteractionKernel::Diffusion => 1.0,
        }
    }

    fn log_obs(&self, _: &ParamVector, x: &[f64], y: &[f64]) -> f64 {
        let s = self.params.sigma_obs;
        let z = (y[0] - x[0]) / s;
        -0.5 * (LN_2PI + z * z) - s.ln()
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        let v = theta.values[0];
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (v.ln() - self.prior_log_mean) / self.prior_log_sd;
        -0.5 * (LN_2PI + z * z) - self.prior_log_sd.ln() - v.ln()
    }

    fn sample_obs(
        &self,
        _: &ParamVector,
        x: &[f64],
        stream: &mut RandStream,
    ) -> crate::error::Result<Vec<f64>> {
        Ok(vec![x[0] + self.params.sigma_obs * stream.standard_normal()])
    }

    fn sample_prior(&self, stream: &mut RandStream) -> ParamVector {
        let draw = self.prior_log_mean + self.prior_log_sd * stream.standard_normal();
        ParamVector::new(vec![draw.exp()])
    }
}
