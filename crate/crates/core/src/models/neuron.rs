//! Three-dimensional stochastic neuron population model (FitzHugh-Nagumo
//! membrane/recovery dynamics plus a synaptic gating variable) with mean-field
//! coupling through the population average of the gating variable.

use serde::{Deserialize, Serialize};

use crate::model::{
    CoordTransform, InteractionKernel, Model, ParamTransform, ParamVector, StateVec,
};
use crate::rng::RandStream;

pub const LN_2PI: f64 = 1.8378770664093453;

/// Full parameter set with reference values; the inferred subset
/// {I, J, c, lambda, b_ext, gamma, sigma1, sigma2, sigma3} is carried by the
/// chain's ParamVector and overrides the corresponding fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub i_ext: f64,
    pub b_ext: f64,
    pub v_rev: f64,
    pub a_r: f64,
    pub a_d: f64,
    pub t_max: f64,
    pub lambda: f64,
    pub j_coupling: f64,
    pub b_j: f64,
    pub v_t: f64,
    pub gamma: f64,
    pub big_lambda: f64,
    pub v0: f64,
    pub sigma_v0: f64,
    pub w0: f64,
    pub sigma_w0: f64,
    pub y0: f64,
    pub sigma_y0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    /// Sample X0 from the Gaussian initial law; false pins X0 at its mean.
    pub gaussian_init: bool,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            a: 0.7,
            b: 0.8,
            c: 0.08,
            i_ext: 0.5,
            b_ext: 0.5,
            v_rev: 1.0,
            a_r: 1.0,
            a_d: 1.0,
            t_max: 1.0,
            lambda: 0.2,
            j_coupling: 1.0,
            b_j: 0.2,
            v_t: 2.0,
            gamma: 0.1,
            big_lambda: 0.5,
            v0: 0.0,
            sigma_v0: 0.4,
            w0: 0.5,
            sigma_w0: 0.4,
            y0: 0.3,
            sigma_y0: 0.05,
            sigma1: 0.2,
            sigma2: 0.1,
            sigma3: 0.02,
            gaussian_init: true,
        }
    }
}

/// Index layout of the inferred parameter vector.
pub const NEURON_PARAM_NAMES: [&str; 9] = [
    "I", "J", "c", "lambda", "b_ext", "gamma", "sigma1", "sigma2", "sigma3",
];

pub struct NeuronModel {
    pub params: NeuronParams,
    transform: ParamTransform,
    prior_means: [f64; 9],
    prior_sds: [f64; 9],
}

impl NeuronModel {
    pub fn new(params: NeuronParams) -> Self {
        // I and J keep Gaussian priors on the natural scale; the positive
        // parameters get Gaussian priors on their logs. Priors are centered at
        // the reference values with moderate spread.
        let theta = reference_theta(&params);
        let mut prior_means = [0.0; 9];
        let mut prior_sds = [0.0; 9];
        for (i, &v) in theta.iter().enumerate() {
            if i < 2 {
                prior_means[i] = v;
                prior_sds[i] = 1.0;
            } else {
                prior_means[i] = v.ln();
                prior_sds[i] = 0.5;
            }
        }
        let mut flags = vec![CoordTransform::Identity; 2];
        flags.extend(vec![CoordTransform::Log; 7]);
        NeuronModel {
            params,
            transform: ParamTransform::new(flags),
            prior_means,
            prior_sds,
        }
    }

    pub fn reference_theta(&self) -> ParamVector {
        ParamVector::new(reference_theta(&self.params).to_vec())
    }

    /// Effective parameters: the chain's theta overriding the stored fields.
    fn effective(&self, theta: &ParamVector) -> NeuronParams {
        let mut p = self.params.clone();
        p.i_ext = theta.values[0];
        p.j_coupling = theta.values[1];
        p.c = theta.values[2];
        p.lambda = theta.values[3];
        p.b_ext = theta.values[4];
        p.gamma = theta.values[5];
        p.sigma1 = theta.values[6];
        p.sigma2 = theta.values[7];
        p.sigma3 = theta.values[8];
        p
    }
}

fn reference_theta(p: &NeuronParams) -> [f64; 9] {
    [
        p.i_ext, p.j_coupling, p.c, p.lambda, p.b_ext, p.gamma, p.sigma1, p.sigma2, p.sigma3,
    ]
}

/// Sigmoid gate a_r T_max (1 - x3) / (1 + exp(-lambda (x1 - V_T))).
fn gate(p: &NeuronParams, x1: f64, x3: f64) -> f64 {
    p.a_r * p.t_max * (1.0 - x3) / (1.0 + (-p.lambda * (x1 - p.v_t)).exp())
}

/// State-dependent gating noise amplitude b_32.
pub fn b32(p: &NeuronParams, x1: f64, x3: f64) -> f64 {
    if !(0.0 < x3 && x3 < 1.0) {
        return 0.0;
    }
    // The sqrt argument can dip to about -1e-17 near x3 = 0 from rounding.
    let arg = (gate(p, x1, x3) + p.a_d * x3).max(0.0);
    let u = 2.0 * x3 - 1.0;
    arg.sqrt() * p.gamma * (-p.big_lambda / (1.0 - u * u)).exp()
}

impl Model for NeuronModel {
    fn state_dim(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn param_names(&self) -> &[&'static str] {
        &NEURON_PARAM_NAMES
    }

    fn transform(&self) -> &ParamTransform {
        &self.transform
    }

    fn initial_state(&self, _theta: &ParamVector, stream: &mut RandStream) -> StateVec {
        let p = &self.params;
        let means = [p.v0, p.w0, p.y0];
        if !p.gaussian_init {
            return means.to_vec();
        }
        let sds = [p.sigma_v0, p.sigma_w0, p.sigma_y0];
        means
            .iter()
            .zip(&sds)
            .map(|(m, s)| m + s * stream.standard_normal())
            .collect()
    }

    fn drift(&self, theta: &ParamVector, x: &[f64], zeta1_bar: f64) -> Vec<f64> {
        let p = self.effective(theta);
        vec![
            x[0] - x[0].powi(3) / 3.0 - x[1] + p.i_ext - zeta1_bar,
            p.c * (x[0] + p.a - p.b * x[1]),
            gate(&p, x[0], x[2]) - p.a_d * x[2],
        ]
    }

    fn diffusion(&self, theta: &ParamVector, x: &[f64], zeta2_bar: f64) -> Vec<f64> {
        let p = self.effective(theta);
        vec![
            p.b_ext, 0.0, -zeta2_bar, //
            0.0, 0.0, 0.0, //
            0.0, b32(&p, x[0], x[2]), 0.0,
        ]
    }

    fn kernel(&self, which: InteractionKernel, theta: &ParamVector, x: &[f64], z: &[f64]) -> f64 {
        let p = self.effective(theta);
        match which {
            InteractionKernel::Drift => p.j_coupling * (x[0] - p.v_rev) * z[2],
            InteractionKernel::Diffusion => p.b_j * (x[0] - p.v_rev) * z[2],
        }
    }

    fn log_obs(&self, theta: &ParamVector, x: &[f64], y: &[f64]) -> f64 {
        let p = self.effective(theta);
        let sigmas = [p.sigma1, p.sigma2, p.sigma3];
        let mut total = 0.0;
        for i in 0..3 {
            let z = (y[i] - x[i]) / sigmas[i];
            total += -0.5 * (LN_2PI + z * z) - sigmas[i].ln();
        }
        total
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        let mut total = 0.0;
        for (i, &v) in theta.values.iter().enumerate() {
            let (m, s) = (self.prior_means[i], self.prior_sds[i]);
            if i < 2 {
                let z = (v - m) / s;
                total += -0.5 * (LN_2PI + z * z) - s.ln();
            } else {
                if v <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                // lognormal density on the natural scale
                let z = (v.ln() - m) / s;
                total += -0.5 * (LN_2PI + z * z) - s.ln() - v.ln();
            }
        }
        total
    }

    fn sample_obs(
        &self,
        theta: &ParamVector,
        x: &[f64],
        stream: &mut RandStream,
    ) -> crate::error::Result<Vec<f64>> {
        let p = self.effective(theta);
        let sigmas = [p.sigma1, p.sigma2, p.sigma3];
        Ok(x.iter()
            .zip(&sigmas)
            .map(|(xi, s)| xi + s * stream.standard_normal())
            .collect())
    }

    fn sample_prior(&self, stream: &mut RandStream) -> ParamVector {
        let values = (0..9)
            .map(|i| {
                let draw = self.prior_means[i] + self.prior_sds[i] * stream.standard_normal();
                if i < 2 {
                    draw
                } else {
                    draw.exp()
                }
            })
            .collect();
        ParamVector::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eval_interaction, EmpiricalMeasure};
    use crate::rng::StreamKey;

    fn model() -> NeuronModel {
        NeuronModel::new(NeuronParams::default())
    }

    fn one_atom(x: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(vec![x.to_vec()]).unwrap()
    }

    #[test]
    fn drift_hand_value_at_reference_point() {
        let m = model();
        let theta = m.reference_theta();
        let x = [0.0, 0.5, 0.3];
        let mu = one_atom(&x);
        let z1 = eval_interaction(&m, InteractionKernel::Drift, &theta, &x, &mu).unwrap();
        let a = m.drift(&theta, &x, z1);
        assert!((a[0] - 0.3).abs() < 1e-12, "a1 = {}", a[0]);
        assert!((a[1] - 0.024).abs() < 1e-12, "a2 = {}", a[1]);
        let expect3 = 0.7 / (1.0 + 0.4f64.exp()) - 0.3;
        assert!((a[2] - expect3).abs() < 1e-12, "a3 = {}", a[2]);
    }

    #[test]
    fn drift_interaction_kernel_one_atom() {
        // zeta1(x, z) = J (x1 - V_rev) z3 with J = 1, V_rev = 1, x1 = 0 and a
        // one-atom measure with z3 = 0.3 gives -0.3.
        let m = model();
        let theta = m.reference_theta();
        let x = [0.0, 0.5, 0.3];
        let z1 = eval_interaction(&m, InteractionKernel::Drift, &theta, &x, &one_atom(&x)).unwrap();
        assert!((z1 + 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_decouples_measure() {
        let m = model();
        let mut theta = m.reference_theta();
        theta.values[1] = 0.0; // J = 0
        let x = [0.2, -0.1, 0.4];
        let mu1 = one_atom(&[5.0, 5.0, 5.0]);
        let mu2 = one_atom(&[-3.0, 0.0, 0.9]);
        let z1 = eval_interaction(&m, InteractionKernel::Drift, &theta, &x, &mu1).unwrap();
        let z2 = eval_interaction(&m, InteractionKernel::Drift, &theta, &x, &mu2).unwrap();
        assert_eq!(m.drift(&theta, &x, z1), m.drift(&theta, &x, z2));
    }

    #[test]
    fn gate_saturates_to_minus_a_d() {
        let m = model();
        let mut theta = m.reference_theta();
        theta.values[3] = 50.0; // large lambda so the sigmoid saturates
        let x = [10.0, 0.0, 1.0];
        let a = m.drift(&theta, &x, 0.0);
        assert!((a[2] + m.params.a_d).abs() < 1e-9, "a3 = {}", a[2]);
    }

    #[test]
    fn b32_zero_outside_unit_interval() {
        let p = NeuronParams::default();
        assert_eq!(b32(&p, 0.0, 1.2), 0.0);
        assert_eq!(b32(&p, 0.0, 0.0), 0.0);
        assert_eq!(b32(&p, 0.0, 1.0), 0.0);
        assert_eq!(b32(&p, 0.0, -0.3), 0.0);
    }

    #[test]
    fn b32_vanishes_at_boundary() {
        let p = NeuronParams::default();
        assert!(b32(&p, 0.0, 1e-4).abs() < 1e-6);
        assert!(b32(&p, 0.0, 1.0 - 1e-4).abs() < 1e-6);
    }

    #[test]
    fn diffusion_hand_value_at_reference_point() {
        let m = model();
        let theta = m.reference_theta();
        let x = [0.0, 0.5, 0.5];
        let mu = one_atom(&x);
        let z2 = eval_interaction(&m, InteractionKernel::Diffusion, &theta, &x, &mu).unwrap();
        let b = m.diffusion(&theta, &x, z2);
        // entry (1,3) = -b_J (x1 - V_rev) E[z3] = -0.2 * (-1) * 0.5 = 0.1
        assert!((b[2] - 0.1).abs() < 1e-12, "b13 = {}", b[2]);
        assert_eq!(b[0], 0.5); // b_ext
        // b32 = sqrt(0.5/(1+e^{0.4}) + 0.5) * 0.1 * e^{-0.5}
        let expect = (0.5 / (1.0 + 0.4f64.exp()) + 0.5).sqrt() * 0.1 * (-0.5f64).exp();
        assert!((b[7] - expect).abs() < 1e-12, "b32 = {}", b[7]);
        for idx in [1, 3, 4, 5, 6, 8] {
            assert_eq!(b[idx], 0.0);
        }
    }

    #[test]
    fn obs_density_mode_and_z_score() {
        let m = model();
        let theta = m.reference_theta();
        let x = [0.1, -0.4, 0.6];
        let mode = m.log_obs(&theta, &x, &x);
        let expect_mode: f64 = [0.2f64, 0.1, 0.02]
            .iter()
            .map(|s| -(s * (2.0 * std::f64::consts::PI).sqrt()).ln())
            .sum();
        assert!((mode - expect_mode).abs() < 1e-12);
        // shift the first coordinate by one sigma
        let y = [x[0] + 0.2, x[1], x[2]];
        assert!((m.log_obs(&theta, &x, &y) - (mode - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn obs_density_monte_carlo_indicator() {
        // Sampling y ~ N(x, Sigma) reproduces P(y1 > x1) = 1/2 within 3 sigma.
        let m = model();
        let _ = m.reference_theta();
        let x = [0.0, 0.0, 0.5];
        let mut s = StreamKey::root(42).derive("mc", 0).stream();
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let y1 = x[0] + 0.2 * s.standard_normal();
            if y1 > x[0] {
                hits += 1;
            }
        }
        let f = hits as f64 / n as f64;
        let sd = (0.25 / n as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * sd, "freq {f}");
    }

    #[test]
    fn measure_enters_only_through_mean_z3() {
        let m = model();
        let theta = m.reference_theta();
        let x = [0.3, 0.1, 0.4];
        let cloud = EmpiricalMeasure::new(vec![
            vec![9.0, -2.0, 0.2],
            vec![-1.0, 5.0, 0.8],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let mean_z3 = 0.5;
        let atom = one_atom(&[100.0, -100.0, mean_z3]);
        for which in [InteractionKernel::Drift, InteractionKernel::Diffusion] {
            let a = eval_interaction(&m, which, &theta, &x, &cloud).unwrap();
            let b = eval_interaction(&m, which, &theta, &x, &atom).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_init_pins_means() {
        let mut p = NeuronParams::default();
        p.gaussian_init = false;
        let m = NeuronModel::new(p);
        let mut s = StreamKey::root(1).stream();
        let x = m.initial_state(&m.reference_theta(), &mut s);
        assert_eq!(x, vec![0.0, 0.5, 0.3]);
    }

    #[test]
    fn prior_sampler_in_support() {
        let m = model();
        let mut s = StreamKey::root(5).derive("prior", 0).stream();
        for _ in 0..100 {
            let theta = m.sample_prior(&mut s);
            assert!(m.log_prior(&theta).is_finite());
            // positive parameters stay positive
            for &v in &theta.values[2..] {
                assert!(v > 0.0);
            }
        }
    }
}
