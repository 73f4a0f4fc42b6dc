//! Abstract mean-field model interface: parameters, empirical measures,
//! datasets, and the averaged interaction terms every other module consumes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::RandStream;

/// State of one particle, a point in R^d.
pub type StateVec = Vec<f64>;

/// Parameter vector on the natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        ParamVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-coordinate map between the natural scale and the unconstrained
/// sampling scale. Positive coordinates are log-transformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordTransform {
    Identity,
    Log,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamTransform {
    pub flags: Vec<CoordTransform>,
}

impl ParamTransform {
    pub fn identity(dim: usize) -> Self {
        ParamTransform {
            flags: vec![CoordTransform::Identity; dim],
        }
    }

    pub fn new(flags: Vec<CoordTransform>) -> Self {
        ParamTransform { flags }
    }

    pub fn to_unconstrained(&self, theta: &ParamVector) -> Result<Vec<f64>> {
        if theta.len() != self.flags.len() {
            return Err(Error::Domain(format!(
                "parameter length {} does not match transform length {}",
                theta.len(),
                self.flags.len()
            )));
        }
        theta
            .values
            .iter()
            .zip(&self.flags)
            .map(|(&v, flag)| match flag {
                CoordTransform::Identity => Ok(v),
                CoordTransform::Log => {
                    if v > 0.0 {
                        Ok(v.ln())
                    } else {
                        Err(Error::Domain(format!(
                            "log-transformed coordinate must be positive, got {v}"
                        )))
                    }
                }
            })
            .collect()
    }

    pub fn from_unconstrained(&self, v: &[f64]) -> ParamVector {
        let values = v
            .iter()
            .zip(&self.flags)
            .map(|(&u, flag)| match flag {
                CoordTransform::Identity => u,
                CoordTransform::Log => u.exp(),
            })
            .collect();
        ParamVector { values }
    }

    /// Log-Jacobian of the map unconstrained -> natural at the natural-scale
    /// point theta: sum of log(theta_i) over log-flagged coordinates.
    pub fn log_jacobian(&self, theta: &ParamVector) -> f64 {
        theta
            .values
            .iter()
            .zip(&self.flags)
            .map(|(&v, flag)| match flag {
                CoordTransform::Identity => 0.0,
                CoordTransform::Log => v.ln(),
            })
            .sum()
    }
}

/// Uniform-weight atomic approximation of a law on R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub particles: Vec<StateVec>,
}

impl EmpiricalMeasure {
    pub fn new(particles: Vec<StateVec>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::DegenerateMeasure("empty particle list".into()));
        }
        Ok(EmpiricalMeasure { particles })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].len()
    }

    /// Mean of one coordinate across particles.
    pub fn coord_mean(&self, coord: usize) -> f64 {
        self.particles.iter().map(|p| p[coord]).sum::<f64>() / self.particles.len() as f64
    }
}

/// Observation record: T vectors of dimension d_Y at unit time intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub observations: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(observations: Vec<Vec<f64>>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Config("dataset must have at least one observation".into()));
        }
        Ok(Dataset { observations })
    }

    pub fn horizon(&self) -> usize {
        self.observations.len()
    }
}

/// Which of the two interaction kernels to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionKernel {
    Drift,
    Diffusion,
}

/// A McKean-Vlasov model: drift, diffusion, interaction kernels, observation
/// density, prior, and initial condition. Implementations are immutable and
/// safe to share across workers.
pub trait Model: Send + Sync {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn param_names(&self) -> &[&'static str];
    fn transform(&self) -> &ParamTransform;

    fn param_dim(&self) -> usize {
        self.param_names().len()
    }

    /// Initial state for one particle (deterministic point or sampled).
    fn initial_state(&self, theta: &ParamVector, stream: &mut RandStream) -> StateVec;

    /// Drift a(theta, x, zeta1_bar) in R^d.
    fn drift(&self, theta: &ParamVector, x: &[f64], zeta1_bar: f64) -> Vec<f64>;

    /// Diffusion b(theta, x, zeta2_bar), row-major d x d.
    fn diffusion(&self, theta: &ParamVector, x: &[f64], zeta2_bar: f64) -> Vec<f64>;

    /// Scalar interaction kernel zeta_m(theta, x, z).
    fn kernel(&self, which: InteractionKernel, theta: &ParamVector, x: &[f64], z: &[f64]) -> f64;

    /// Log observation density log g(theta, x, y).
    fn log_obs(&self, theta: &ParamVector, x: &[f64], y: &[f64]) -> f64;

    /// Log prior density log nu(theta); -inf outside the support.
    fn log_prior(&self, theta: &ParamVector) -> f64;

    fn sample_prior(&self, stream: &mut RandStream) -> ParamVector;

    /// Draw y ~ g(theta, x, .) for data synthesis. Models used only as
    /// inference targets may leave this unimplemented.
    fn sample_obs(
        &self,
        _theta: &ParamVector,
        _x: &[f64],
        _stream: &mut RandStream,
    ) -> Result<Vec<f64>> {
        Err(Error::Config(
            "model does not implement observation sampling".into(),
        ))
    }

    fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|n| *n == name)
    }

    /// Sum of the kernel over a list of atoms. Provided so the hot O(N) inner
    /// loop of `eval_interaction` is monomorphized per model (one virtual call
    /// per particle instead of one per atom).
    fn kernel_sum(
        &self,
        which: InteractionKernel,
        theta: &ParamVector,
        x: &[f64],
        atoms: &[StateVec],
    ) -> f64 {
        let mut sum = 0.0;
        for z in atoms {
            sum += self.kernel(which, theta, x, z);
        }
        sum
    }
}

/// Averaged interaction (1/N) sum_n zeta_m(theta, x, particle_n).
/// The naive O(N) sum over all atoms, including x's own atom when present.
pub fn eval_interaction(
    model: &dyn Model,
    which: InteractionKernel,
    theta: &ParamVector,
    x: &[f64],
    measure: &EmpiricalMeasure,
) -> Result<f64> {
    if measure.is_empty() {
        return Err(Error::DegenerateMeasure("empty driving measure".into()));
    }
    let avg = model.kernel_sum(which, theta, x, &measure.particles) / measure.len() as f64;
    if !avg.is_finite() {
        return Err(Error::NumericOverflow(format!(
            "interaction average is not finite ({avg})"
        )));
    }
    Ok(avg)
}

/// Real-valued functional of (theta, x_{1:T}) whose posterior expectation is
/// the estimation target.
#[derive(Clone)]
pub struct TestFunctional {
    pub label: String,
    eval: Arc<dyn Fn(&ParamVector, &[StateVec]) -> f64 + Send + Sync>,
}

impl TestFunctional {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(&ParamVector, &[StateVec]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFunctional {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    /// The functional phi(theta, x_{1:T}) = theta_i.
    pub fn param_coord(label: impl Into<String>, index: usize) -> Self {
        TestFunctional::new(label, move |theta: &ParamVector, _: &[StateVec]| {
            theta.values[index]
        })
    }

    pub fn eval(&self, theta: &ParamVector, trajectory: &[StateVec]) -> f64 {
        (self.eval)(theta, trajectory)
    }
}

impl std::fmt::Debug for TestFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunctional")
            .field("label", &self.label)
            .finish()
    }
}

/// Multiply the d x d row-major matrix by the vector v.
pub fn mat_vec(mat: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &mat[i * d..(i + 1) * d];
        *o = row.iter().zip(v).map(|(m, x)| m * x).sum();
    }
    out
}
