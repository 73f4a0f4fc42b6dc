//! Euler-Maruyama propagation of the N-particle systems approximating the
//! McKean-Vlasov laws: single-level blocks, coupled (fine, coarse) blocks with
//! correlated Brownian increments, and path sampling through frozen laws.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    eval_interaction, mat_vec, EmpiricalMeasure, InteractionKernel, Model, ParamVector, StateVec,
};
use crate::rng::{RandStream, StreamKey};

/// Any coordinate beyond this magnitude aborts the step; the neuron model is
/// not globally Lipschitz and a bad proposal can explode.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Dyadic discretization level with step 2^-l.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub l: u32,
}

impl Level {
    pub fn new(l: u32) -> Self {
        Level { l }
    }

    pub fn delta(&self) -> f64 {
        0.5f64.powi(self.l as i32)
    }

    pub fn steps_per_unit(&self) -> usize {
        1usize << self.l
    }

    pub fn coarser(&self) -> Result<Level> {
        if self.l == 0 {
            return Err(Error::NoCoarserLevel);
        }
        Ok(Level { l: self.l - 1 })
    }
}

/// Fine-grid Gaussian increments for one unit interval:
/// [steps_per_unit x N x d], each coordinate N(0, delta).
#[derive(Debug, Clone)]
pub struct BrownianBlock {
    pub steps: usize,
    pub n_particles: usize,
    pub dim: usize,
    increments: Vec<f64>,
}

impl BrownianBlock {
    /// Draw a block from per-particle substreams of `key`, so the result does
    /// not depend on scheduling.
    pub fn sample(key: &StreamKey, steps: usize, n_particles: usize, dim: usize, delta: f64) -> Result<Self> {
        let per_particle: Vec<Vec<f64>> = (0..n_particles)
            .into_par_iter()
            .map(|i| {
                let mut s = key.derive("particle", i as u64).stream();
                s.gaussian_vector(steps * dim, delta)
            })
            .collect::<Result<_>>()?;
        let mut increments = vec![0.0; steps * n_particles * dim];
        for (i, draws) in per_particle.iter().enumerate() {
            for j in 0..steps {
                let src = &draws[j * dim..(j + 1) * dim];
                let dst = (j * n_particles + i) * dim;
                increments[dst..dst + dim].copy_from_slice(src);
            }
        }
        Ok(BrownianBlock {
            steps,
            n_particles,
            dim,
            increments,
        })
    }

    pub fn increment(&self, step: usize, particle: usize) -> &[f64] {
        let off = (step * self.n_particles + particle) * self.dim;
        &self.increments[off..off + self.dim]
    }

    /// Coarse block with half the steps: increment j is the exact sum of fine
    /// increments 2j and 2j+1 per particle and coordinate.
    pub fn pairwise_coarse(&self) -> Result<BrownianBlock> {
        if self.steps % 2 != 0 {
            return Err(Error::Domain(format!(
                "cannot coarsen an odd number of steps ({})",
                self.steps
            )));
        }
        let steps = self.steps / 2;
        let mut increments = vec![0.0; steps * self.n_particles * self.dim];
        for j in 0..steps {
            for i in 0..self.n_particles {
                let a = self.increment(2 * j, i);
                let b = self.increment(2 * j + 1, i);
                let off = (j * self.n_particles + i) * self.dim;
                for k in 0..self.dim {
                    increments[off + k] = a[k] + b[k];
                }
            }
        }
        Ok(BrownianBlock {
            steps,
            n_particles: self.n_particles,
            dim: self.dim,
            increments,
        })
    }
}

/// The empirical measures over one unit interval at one level. `measures[j]`
/// is the cloud at time t-1 + j*delta, used to drive the step to
/// t-1 + (j+1)*delta; `end_particles` is the cloud at time t.
#[derive(Debug, Clone)]
pub struct LawPath {
    pub level: Level,
    pub measures: Vec<EmpiricalMeasure>,
    pub end_particles: EmpiricalMeasure,
}

/// Synchronized fine/coarse law paths built from the same particle count and
/// correlated increments.
#[derive(Debug, Clone)]
pub struct CoupledLawPath {
    pub fine: LawPath,
    pub coarse: LawPath,
    pub fine_noise: BrownianBlock,
    pub coarse_noise: BrownianBlock,
}

/// One Euler-Maruyama step of the whole cloud:
/// X' = X + a(theta, X, zeta1_bar) * delta + b(theta, X, zeta2_bar) * dW,
/// with interactions averaged against `driving`.
pub fn euler_step(
    model: &dyn Model,
    theta: &ParamVector,
    particles: &EmpiricalMeasure,
    driving: &EmpiricalMeasure,
    delta: f64,
    noise: &BrownianBlock,
    noise_step: usize,
) -> Result<EmpiricalMeasure> {
    if driving.is_empty() {
        return Err(Error::DegenerateMeasure("empty driving measure".into()));
    }
    let d = model.state_dim();
    let next: Vec<StateVec> = particles
        .particles
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<StateVec> {
            let z1 = eval_interaction(model, InteractionKernel::Drift, theta, x, driving)?;
            let z2 = eval_interaction(model, InteractionKernel::Diffusion, theta, x, driving)?;
            let a = model.drift(theta, x, z1);
            let b = model.diffusion(theta, x, z2);
            let dw = noise.increment(noise_step, i);
            let bdw = mat_vec(&b, dw, d);
            let mut out = Vec::with_capacity(d);
            for k in 0..d {
                let v = x[k] + a[k] * delta + bdw[k];
                if !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD {
                    return Err(Error::NumericBlowUp {
                        particle: i,
                        substep: noise_step,
                    });
                }
                out.push(v);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(EmpiricalMeasure { particles: next })
}

/// Evolve a cloud through one unit interval at `level`, each substep driven by
/// the cloud itself (pre-update), recording every intermediate measure.
pub fn propagate_law_block(
    model: &dyn Model,
    theta: &ParamVector,
    init: EmpiricalMeasure,
    level: Level,
    key: &StreamKey,
) -> Result<LawPath> {
    let steps = level.steps_per_unit();
    let delta = level.delta();
    let noise = BrownianBlock::sample(key, steps, init.len(), model.state_dim(), delta)?;
    propagate_with_noise(model, theta, init, level, &noise)
}

fn propagate_with_noise(
    model: &dyn Model,
    theta: &ParamVector,
    init: EmpiricalMeasure,
    level: Level,
    noise: &BrownianBlock,
) -> Result<LawPath> {
    let steps = level.steps_per_unit();
    let delta = level.delta();
    let mut measures = Vec::with_capacity(steps);
    let mut cloud = init;
    for j in 0..steps {
        let next = euler_step(model, theta, &cloud, &cloud, delta, noise, j)?;
        measures.push(cloud);
        cloud = next;
    }
    Ok(LawPath {
        level,
        measures,
        end_particles: cloud,
    })
}

/// Advance coupled clouds over one unit interval: the fine cloud with fresh
/// increments at level l, the coarse cloud at level l-1 with the pairwise sums
/// of the fine increments. Each cloud is self-driven by its own measure.
pub fn propagate_coupled_law_block(
    model: &dyn Model,
    theta: &ParamVector,
    fine_init: EmpiricalMeasure,
    coarse_init: EmpiricalMeasure,
    fine_level: Level,
    key: &StreamKey,
) -> Result<CoupledLawPath> {
    let coarse_level = fine_level.coarser()?;
    if fine_init.len() != coarse_init.len() {
        return Err(Error::Domain(format!(
            "fine and coarse clouds must have equal particle counts ({} vs {})",
            fine_init.len(),
            coarse_init.len()
        )));
    }
    let steps = fine_level.steps_per_unit();
    let fine_noise =
        BrownianBlock::sample(key, steps, fine_init.len(), model.state_dim(), fine_level.delta())?;
    let coarse_noise = fine_noise.pairwise_coarse()?;
    let fine = propagate_with_noise(model, theta, fine_init, fine_level, &fine_noise)?;
    let coarse = propagate_with_noise(model, theta, coarse_init, coarse_level, &coarse_noise)?;
    Ok(CoupledLawPath {
        fine,
        coarse,
        fine_noise,
        coarse_noise,
    })
}

/// Drive one particle through the frozen measure sequence of `laws` (the
/// driving measure at substep j is laws.measures[j], never the particle
/// itself). Returns the endpoint and the full intermediate path.
pub fn sample_transition_path(
    model: &dyn Model,
    theta: &ParamVector,
    start: &[f64],
    laws: &LawPath,
    stream: &mut RandStream,
) -> Result<(StateVec, Vec<StateVec>)> {
    let delta = laws.level.delta();
    let d = model.state_dim();
    let mut x = start.to_vec();
    let mut path = Vec::with_capacity(laws.measures.len());
    for (j, driving) in laws.measures.iter().enumerate() {
        let dw = stream.gaussian_vector(d, delta)?;
        x = single_step(model, theta, &x, driving, delta, &dw, j)?;
        path.push(x.clone());
    }
    Ok((x, path))
}

/// As `sample_transition_path` on each component, with coarse increments
/// formed as pairwise sums of the fine increments drawn from `stream`.
#[allow(clippy::type_complexity)]
pub fn sample_coupled_transition_path(
    model: &dyn Model,
    theta: &ParamVector,
    fine_start: &[f64],
    coarse_start: &[f64],
    coupled: &CoupledLawPath,
    stream: &mut RandStream,
) -> Result<((StateVec, Vec<StateVec>), (StateVec, Vec<StateVec>))> {
    let d = model.state_dim();
    let fine_delta = coupled.fine.level.delta();
    let coarse_delta = coupled.coarse.level.delta();
    let fine_steps = coupled.fine.level.steps_per_unit();

    let mut fine_x = fine_start.to_vec();
    let mut fine_path = Vec::with_capacity(fine_steps);
    let mut coarse_x = coarse_start.to_vec();
    let mut coarse_path = Vec::with_capacity(fine_steps / 2);
    let mut pending: Option<Vec<f64>> = None;

    for j in 0..fine_steps {
        let dw = stream.gaussian_vector(d, fine_delta)?;
        fine_x = single_step(model, theta, &fine_x, &coupled.fine.measures[j], fine_delta, &dw, j)?;
        fine_path.push(fine_x.clone());
        match pending.take() {
            None => pending = Some(dw),
            Some(prev) => {
                let summed: Vec<f64> = prev.iter().zip(&dw).map(|(a, b)| a + b).collect();
                let cj = j / 2;
                coarse_x = single_step(
                    model,
                    theta,
                    &coarse_x,
                    &coupled.coarse.measures[cj],
                    coarse_delta,
                    &summed,
                    cj,
                )?;
                coarse_path.push(coarse_x.clone());
            }
        }
    }
    Ok(((fine_x, fine_path), (coarse_x, coarse_path)))
}

fn single_step(
    model: &dyn Model,
    theta: &ParamVector,
    x: &[f64],
    driving: &EmpiricalMeasure,
    delta: f64,
    dw: &[f64],
    substep: usize,
) -> Result<StateVec> {
    let d = model.state_dim();
    let z1 = eval_interaction(model, InteractionKernel::Drift, theta, x, driving)?;
    let z2 = eval_interaction(model, InteractionKernel::Diffusion, theta, x, driving)?;
    let a = model.drift(theta, x, z1);
    let b = model.diffusion(theta, x, z2);
    let bdw = mat_vec(&b, dw, d);
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let v = x[k] + a[k] * delta + bdw[k];
        if !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD {
            return Err(Error::NumericBlowUp {
                particle: 0,
                substep,
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Build the law sequence for the whole horizon [0, T]: the cloud is
/// initialized from the model's initial condition and each unit interval
/// continues from the previous end cloud.
pub fn propagate_laws(
    model: &dyn Model,
    theta: &ParamVector,
    horizon: usize,
    level: Level,
    n_particles: usize,
    key: &StreamKey,
) -> Result<Vec<LawPath>> {
    let mut cloud = initial_cloud(model, theta, n_particles, key);
    let mut laws = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let block = propagate_law_block(model, theta, cloud, level, &key.derive("t", t as u64))?;
        cloud = block.end_particles.clone();
        laws.push(block);
    }
    Ok(laws)
}

/// Coupled analog of `propagate_laws`; fine and coarse clouds share the same
/// sampled initial particles.
pub fn propagate_coupled_laws(
    model: &dyn Model,
    theta: &ParamVector,
    horizon: usize,
    fine_level: Level,
    n_particles: usize,
    key: &StreamKey,
) -> Result<Vec<CoupledLawPath>> {
    let init = initial_cloud(model, theta, n_particles, key);
    let mut fine_cloud = init.clone();
    let mut coarse_cloud = init;
    let mut laws = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let block = propagate_coupled_law_block(
            model,
            theta,
            fine_cloud,
            coarse_cloud,
            fine_level,
            &key.derive("t", t as u64),
        )?;
        fine_cloud = block.fine.end_particles.clone();
        coarse_cloud = block.coarse.end_particles.clone();
        laws.push(block);
    }
    Ok(laws)
}

pub fn initial_cloud(
    model: &dyn Model,
    theta: &ParamVector,
    n_particles: usize,
    key: &StreamKey,
) -> EmpiricalMeasure {
    let particles = (0..n_particles)
        .map(|i| {
            let mut s = key.derive("init", i as u64).stream();
            model.initial_state(theta, &mut s)
        })
        .collect();
    EmpiricalMeasure { particles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamTransform;
    use crate::rng::StreamKey;

    /// 1D model with configurable drift/diffusion behavior for the
    /// hand-checkable cases.
    struct LineModel {
        transform: ParamTransform,
        drift_mode: DriftMode,
        unit_diffusion: bool,
    }

    enum DriftMode {
        Zero,
        Constant(f64),
        NegInteraction, // a = -zeta1_bar with zeta1(x, z) = x - z
    }

    impl LineModel {
        fn new(drift_mode: DriftMode, unit_diffusion: bool) -> Self {
            LineModel {
                transform: ParamTransform::identity(1),
                drift_mode,
                unit_diffusion,
            }
        }
    }

    impl Model for LineModel {
        fn state_dim(&self) -> usize {
            1
        }
        fn obs_dim(&self) -> usize {
            1
        }
        fn param_names(&self) -> &[&'static str] {
            &["theta"]
        }
        fn transform(&self) -> &ParamTransform {
            &self.transform
        }
        fn initial_state(&self, _: &ParamVector, _: &mut RandStream) -> StateVec {
            vec![0.0]
        }
        fn drift(&self, _: &ParamVector, _: &[f64], z1: f64) -> Vec<f64> {
            match self.drift_mode {
                DriftMode::Zero => vec![0.0],
                DriftMode::Constant(c) => vec![c],
                DriftMode::NegInteraction => vec![-z1],
            }
        }
        fn diffusion(&self, _: &ParamVector, _: &[f64], _: f64) -> Vec<f64> {
            vec![if self.unit_diffusion { 1.0 } else { 0.0 }]
        }
        fn kernel(&self, which: InteractionKernel, _: &ParamVector, x: &[f64], z: &[f64]) -> f64 {
            match which {
                InteractionKernel::Drift => x[0] - z[0],
                InteractionKernel::Diffusion => 1.0,
            }
        }
        fn log_obs(&self, _: &ParamVector, _: &[f64], _: &[f64]) -> f64 {
            0.0
        }
        fn log_prior(&self, _: &ParamVector) -> f64 {
            0.0
        }
        fn sample_prior(&self, _: &mut RandStream) -> ParamVector {
            ParamVector::new(vec![0.0])
        }
    }

    fn theta() -> ParamVector {
        ParamVector::new(vec![0.0])
    }

    fn cloud(xs: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn level_arithmetic() {
        let l = Level::new(3);
        assert_eq!(l.delta(), 0.125);
        assert_eq!(l.steps_per_unit(), 8);
        assert_eq!(l.delta() * l.steps_per_unit() as f64, 1.0);
        assert!(Level::new(0).coarser().is_err());
    }

    #[test]
    fn euler_step_pure_noise() {
        // a = 0, b = I: X' = X + dW
        let m = LineModel::new(DriftMode::Zero, true);
        let key = StreamKey::root(1).derive("blk", 0);
        let init = cloud(&[0.0, 1.0, -2.0]);
        let noise = BrownianBlock::sample(&key, 1, 3, 1, 0.5).unwrap();
        let next = euler_step(&m, &theta(), &init, &init, 0.5, &noise, 0).unwrap();
        for i in 0..3 {
            let expect = init.particles[i][0] + noise.increment(0, i)[0];
            assert_eq!(next.particles[i][0], expect);
        }
    }

    #[test]
    fn euler_step_deterministic_drift() {
        // b = 0, a = c: X' = X + c * delta regardless of noise
        let m = LineModel::new(DriftMode::Constant(2.0), false);
        let key = StreamKey::root(2).derive("blk", 0);
        let init = cloud(&[1.0, -1.0]);
        let noise = BrownianBlock::sample(&key, 1, 2, 1, 0.25).unwrap();
        let next = euler_step(&m, &theta(), &init, &init, 0.25, &noise, 0).unwrap();
        assert_eq!(next.particles[0][0], 1.5);
        assert_eq!(next.particles[1][0], -0.5);
    }

    #[test]
    fn euler_step_two_atom_interaction_hand_value() {
        // a = -zeta1_bar with zeta1(x,z) = x - z, b = 0, self-driving cloud {0, 2}:
        // zeta1_bar at x=0 is -1, at x=2 is +1; delta = 0.5 -> {0.5, 1.5}
        let m = LineModel::new(DriftMode::NegInteraction, false);
        let key = StreamKey::root(3).derive("blk", 0);
        let init = cloud(&[0.0, 2.0]);
        let noise = BrownianBlock::sample(&key, 1, 2, 1, 0.5).unwrap();
        let next = euler_step(&m, &theta(), &init, &init, 0.5, &noise, 0).unwrap();
        assert!((next.particles[0][0] - 0.5).abs() < 1e-15);
        assert!((next.particles[1][0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn law_block_level_zero_single_step() {
        let m = LineModel::new(DriftMode::Zero, true);
        let key = StreamKey::root(4).derive("blk", 0);
        let init = cloud(&[0.0, 1.0]);
        let path = propagate_law_block(&m, &theta(), init.clone(), Level::new(0), &key).unwrap();
        assert_eq!(path.measures.len(), 1);
        assert_eq!(path.measures[0], init);
    }

    #[test]
    fn law_block_frozen_dynamics() {
        // a = 0 and b = 0: end cloud equals the initial cloud
        let m = LineModel::new(DriftMode::Zero, false);
        let key = StreamKey::root(5).derive("blk", 0);
        let init = cloud(&[0.3, -0.7, 2.0]);
        let path = propagate_law_block(&m, &theta(), init.clone(), Level::new(4), &key).unwrap();
        assert_eq!(path.end_particles, init);
        assert_eq!(path.measures.len(), 16);
    }

    #[test]
    fn coupled_block_requires_fine_level_at_least_one() {
        let m = LineModel::new(DriftMode::Zero, false);
        let key = StreamKey::root(6).derive("blk", 0);
        let init = cloud(&[0.0]);
        let err = propagate_coupled_law_block(&m, &theta(), init.clone(), init, Level::new(0), &key);
        assert!(matches!(err, Err(Error::NoCoarserLevel)));
    }

    #[test]
    fn coupled_block_coarse_increments_are_pairwise_sums() {
        let m = LineModel::new(DriftMode::Zero, true);
        let key = StreamKey::root(7).derive("blk", 0);
        let init = cloud(&[0.0, 1.0, 2.0]);
        let coupled =
            propagate_coupled_law_block(&m, &theta(), init.clone(), init, Level::new(3), &key)
                .unwrap();
        for j in 0..coupled.coarse_noise.steps {
            for i in 0..3 {
                let sum = coupled.fine_noise.increment(2 * j, i)[0]
                    + coupled.fine_noise.increment(2 * j + 1, i)[0];
                assert_eq!(coupled.coarse_noise.increment(j, i)[0].to_bits(), sum.to_bits());
            }
        }
    }

    #[test]
    fn coupled_block_degenerate_without_noise_or_drift() {
        // a = 0, b = 0: fine and coarse end particles are identical
        let m = LineModel::new(DriftMode::Zero, false);
        let key = StreamKey::root(8).derive("blk", 0);
        let init = cloud(&[0.4, -1.2]);
        let coupled =
            propagate_coupled_law_block(&m, &theta(), init.clone(), init, Level::new(2), &key)
                .unwrap();
        assert_eq!(coupled.fine.end_particles, coupled.coarse.end_particles);
    }

    #[test]
    fn transition_path_level_zero_pure_noise() {
        let m = LineModel::new(DriftMode::Zero, true);
        let key = StreamKey::root(9);
        let init = cloud(&[0.0]);
        let laws =
            propagate_law_block(&m, &theta(), init, Level::new(0), &key.derive("blk", 0)).unwrap();
        let mut s = key.derive("path", 0).stream();
        let (end, path) = sample_transition_path(&m, &theta(), &[0.25], &laws, &mut s).unwrap();
        // end = start + one unit-variance increment
        let mut s2 = key.derive("path", 0).stream();
        let dw = s2.gaussian_vector(1, 1.0).unwrap();
        assert_eq!(end[0], 0.25 + dw[0]);
        assert_eq!(path.len(), 1);
    }

    #[test]
    fn transition_path_zero_diffusion_is_euler_polygon() {
        let m = LineModel::new(DriftMode::Constant(1.0), false);
        let key = StreamKey::root(10);
        let init = cloud(&[0.0]);
        let laws =
            propagate_law_block(&m, &theta(), init, Level::new(2), &key.derive("blk", 0)).unwrap();
        let mut s = key.derive("path", 0).stream();
        let (end, path) = sample_transition_path(&m, &theta(), &[0.0], &laws, &mut s).unwrap();
        let expect: Vec<f64> = (1..=4).map(|j| j as f64 * 0.25).collect();
        for (p, e) in path.iter().zip(&expect) {
            assert!((p[0] - e).abs() < 1e-15);
        }
        assert!((end[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coupled_transition_path_shares_increments() {
        // a = 0, b = I: coarse end = start + sum of all fine increments = fine end
        let m = LineModel::new(DriftMode::Zero, true);
        let key = StreamKey::root(11);
        let init = cloud(&[0.0, 0.0]);
        let coupled = propagate_coupled_law_block(
            &m,
            &theta(),
            init.clone(),
            init,
            Level::new(3),
            &key.derive("blk", 0),
        )
        .unwrap();
        let mut s = key.derive("path", 0).stream();
        let ((fine_end, fine_path), (coarse_end, coarse_path)) =
            sample_coupled_transition_path(&m, &theta(), &[0.5], &[0.5], &coupled, &mut s).unwrap();
        assert_eq!(fine_path.len(), 8);
        assert_eq!(coarse_path.len(), 4);
        // With identity diffusion and zero drift both ends accumulate the same sum.
        assert!((fine_end[0] - coarse_end[0]).abs() < 1e-12);
        // Coarse path points sit on the fine path's even-index grid.
        for (cj, c) in coarse_path.iter().enumerate() {
            assert!((c[0] - fine_path[2 * cj + 1][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn blow_up_is_reported_with_particle_index() {
        struct Exploder(ParamTransform);
        impl Model for Exploder {
            fn state_dim(&self) -> usize {
                1
            }
            fn obs_dim(&self) -> usize {
                1
            }
            fn param_names(&self) -> &[&'static str] {
                &["theta"]
            }
            fn transform(&self) -> &ParamTransform {
                &self.0
            }
            fn initial_state(&self, _: &ParamVector, _: &mut RandStream) -> StateVec {
                vec![0.0]
            }
            fn drift(&self, _: &ParamVector, x: &[f64], _: f64) -> Vec<f64> {
                vec![if x[0] > 0.5 { f64::INFINITY } else { 0.0 }]
            }
            fn diffusion(&self, _: &ParamVector, _: &[f64], _: f64) -> Vec<f64> {
                vec![0.0]
            }
            fn kernel(&self, _: InteractionKernel, _: &ParamVector, _: &[f64], _: &[f64]) -> f64 {
                0.0
            }
            fn log_obs(&self, _: &ParamVector, _: &[f64], _: &[f64]) -> f64 {
                0.0
            }
            fn log_prior(&self, _: &ParamVector) -> f64 {
                0.0
            }
            fn sample_prior(&self, _: &mut RandStream) -> ParamVector {
                ParamVector::new(vec![0.0])
            }
        }
        let m = Exploder(ParamTransform::identity(1));
        let key = StreamKey::root(12).derive("blk", 0);
        let init = cloud(&[0.0, 1.0]);
        let noise = BrownianBlock::sample(&key, 1, 2, 1, 1.0).unwrap();
        let err = euler_step(&m, &theta(), &init, &init, 1.0, &noise, 0);
        match err {
            Err(Error::NumericBlowUp { particle, .. }) => assert_eq!(particle, 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
