//! Particle filters: the bootstrap filter for single-level likelihood
//! estimation and the delta filter that propagates coupled fine/coarse pairs
//! under the averaged observation density H, plus the H / H-check weights.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::law::{sample_coupled_transition_path, sample_transition_path, CoupledLawPath, LawPath};
use crate::model::{Dataset, Model, ParamVector, StateVec};
use crate::rng::{RandStream, StreamKey};

/// Normalized importance weights with their log-space source.
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub log_weights: Vec<f64>,
    pub normalized: Vec<f64>,
    /// log( (1/M) sum exp(log_weights) ), the per-step likelihood factor.
    pub log_mean: f64,
}

/// Output of the bootstrap particle filter.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub log_likelihood: f64,
    /// Ancestrally traced latent states at integer times 1..T.
    pub trajectory: Vec<StateVec>,
}

/// Output of the delta particle filter: one coupled trajectory pair sharing
/// resampling ancestry.
#[derive(Debug, Clone)]
pub struct CoupledFilterOutput {
    pub log_likelihood: f64,
    pub fine_trajectory: Vec<StateVec>,
    pub coarse_trajectory: Vec<StateVec>,
}

/// Weighting rule for the delta filter. `Averaged` is the standard coupled
/// density H; `FineOnly` weights by g of the fine component, used to validate
/// the fine marginal against the bootstrap filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaWeightMode {
    Averaged,
    FineOnly,
}

/// Softmax of `log_w` by max-shift, plus the log of the mean unnormalized
/// weight. Errors if every entry is -inf.
pub fn normalize_log_weights(log_w: &[f64], step: usize) -> Result<WeightVector> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::WeightCollapse { step });
    }
    let shifted: Vec<f64> = log_w.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = shifted.iter().sum();
    let normalized = shifted.iter().map(|v| v / total).collect();
    let log_mean = max + (total / log_w.len() as f64).ln();
    Ok(WeightVector {
        log_weights: log_w.to_vec(),
        normalized,
        log_mean,
    })
}

/// M i.i.d. categorical draws from the normalized weights (0-based indices).
pub fn multinomial_resample(w: &WeightVector, m: usize, stream: &mut RandStream) -> Vec<usize> {
    let n = w.normalized.len();
    (0..m)
        .map(|_| {
            let u = stream.uniform();
            let mut acc = 0.0;
            for (i, p) in w.normalized.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            n - 1
        })
        .collect()
}

/// log( (exp(a) + exp(b)) / 2 ) by max-shift; commutative in (a, b) so the
/// result is bitwise symmetric.
fn log_mean_exp2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if !m.is_finite() {
        return m;
    }
    m + (((a - m).exp() + (b - m).exp()) / 2.0).ln()
}

/// log H(x_fine, x_coarse; y) = log( (g(x_fine,y) + g(x_coarse,y)) / 2 ).
pub fn coupled_weight_h(
    model: &dyn Model,
    theta: &ParamVector,
    x_fine: &[f64],
    x_coarse: &[f64],
    y: &[f64],
) -> f64 {
    let gf = model.log_obs(theta, x_fine, y);
    let gc = model.log_obs(theta, x_coarse, y);
    log_mean_exp2(gf, gc)
}

/// log H-check(x_first, x_second; y) = log g(x_first, y) - log H; the linear
/// value lies in (0, 2) and pairs to 2 with its argument swap.
pub fn correction_weight_hcheck(
    model: &dyn Model,
    theta: &ParamVector,
    x_first: &[f64],
    x_second: &[f64],
    y: &[f64],
) -> f64 {
    model.log_obs(theta, x_first, y) - coupled_weight_h(model, theta, x_first, x_second, y)
}

/// Bootstrap particle filter through the frozen laws: propagate M particles,
/// weight by g, resample multinomially each step, accumulate the log of the
/// mean unnormalized weight, and trace one trajectory through the ancestry.
pub fn bootstrap_pf(
    model: &dyn Model,
    theta: &ParamVector,
    laws: &[LawPath],
    data: &Dataset,
    m: usize,
    key: &StreamKey,
) -> Result<FilterOutput> {
    let t_max = data.horizon();
    if laws.len() != t_max {
        return Err(Error::Config(format!(
            "laws cover {} unit intervals but dataset has horizon {}",
            laws.len(),
            t_max
        )));
    }
    if m == 0 {
        return Err(Error::Config("filter needs at least one particle".into()));
    }

    let mut particles: Vec<StateVec> = (0..m)
        .map(|i| {
            let mut s = key.derive("pf-init", i as u64).stream();
            model.initial_state(theta, &mut s)
        })
        .collect();

    let mut log_likelihood = 0.0;
    let mut ends_history: Vec<Vec<StateVec>> = Vec::with_capacity(t_max);
    let mut anc_history: Vec<Vec<usize>> = Vec::with_capacity(t_max);
    let mut last_weights: Option<WeightVector> = None;

    for s in 0..t_max {
        let step_key = key.derive("step", s as u64);
        let ends: Vec<StateVec> = particles
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut stream = step_key.derive("particle", i as u64).stream();
                let (end, _path) = sample_transition_path(model, theta, x, &laws[s], &mut stream)?;
                Ok(end)
            })
            .collect::<Result<_>>()?;
        let log_w: Vec<f64> = ends
            .iter()
            .map(|x| model.log_obs(theta, x, &data.observations[s]))
            .collect();
        let weights = normalize_log_weights(&log_w, s + 1)?;
        log_likelihood += weights.log_mean;

        let mut rs = step_key.derive("resample", 0).stream();
        let ancestors = multinomial_resample(&weights, m, &mut rs);
        particles = ancestors.iter().map(|&a| ends[a].clone()).collect();

        ends_history.push(ends);
        anc_history.push(ancestors);
        last_weights = Some(weights);
    }

    let trajectory = trace_ancestry(&ends_history, &anc_history, last_weights.as_ref().unwrap(), key);
    Ok(FilterOutput {
        log_likelihood,
        trajectory,
    })
}

/// Sample a final index from the last weights, then follow ancestors backward
/// collecting one state per integer time.
fn trace_ancestry(
    ends_history: &[Vec<StateVec>],
    anc_history: &[Vec<usize>],
    last_weights: &WeightVector,
    key: &StreamKey,
) -> Vec<StateVec> {
    let t_max = ends_history.len();
    let mut select = key.derive("select", 0).stream();
    let mut idx = categorical_draw(&last_weights.normalized, &mut select);
    let mut trajectory = vec![Vec::new(); t_max];
    for s in (0..t_max).rev() {
        trajectory[s] = ends_history[s][idx].clone();
        if s > 0 {
            idx = anc_history[s - 1][idx];
        }
    }
    trajectory
}

fn categorical_draw(probs: &[f64], stream: &mut RandStream) -> usize {
    let u = stream.uniform();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Delta particle filter: M coupled fine/coarse pairs, weighted by the
/// averaged density H and resampled with ONE shared ancestor vector, so the
/// pair ancestry stays maximally coupled. The likelihood is the product of
/// mean unnormalized H-weights.
pub fn delta_pf(
    model: &dyn Model,
    theta: &ParamVector,
    coupled_laws: &[CoupledLawPath],
    data: &Dataset,
    m: usize,
    key: &StreamKey,
    mode: DeltaWeightMode,
) -> Result<CoupledFilterOutput> {
    let t_max = data.horizon();
    if coupled_laws.len() != t_max {
        return Err(Error::Config(format!(
            "coupled laws cover {} unit intervals but dataset has horizon {}",
            coupled_laws.len(),
            t_max
        )));
    }
    if m == 0 {
        return Err(Error::Config("filter needs at least one particle".into()));
    }

    // Fine and coarse components share sampled initial states.
    let mut fine: Vec<StateVec> = (0..m)
        .map(|i| {
            let mut s = key.derive("pf-init", i as u64).stream();
            model.initial_state(theta, &mut s)
        })
        .collect();
    let mut coarse = fine.clone();

    let mut log_likelihood = 0.0;
    let mut fine_history: Vec<Vec<StateVec>> = Vec::with_capacity(t_max);
    let mut coarse_history: Vec<Vec<StateVec>> = Vec::with_capacity(t_max);
    let mut anc_history: Vec<Vec<usize>> = Vec::with_capacity(t_max);
    let mut last_weights: Option<WeightVector> = None;

    for s in 0..t_max {
        let step_key = key.derive("step", s as u64);
        let pairs: Vec<(StateVec, StateVec)> = fine
            .par_iter()
            .zip(coarse.par_iter())
            .enumerate()
            .map(|(i, (xf, xc))| {
                let mut stream = step_key.derive("particle", i as u64).stream();
                let ((fe, _), (ce, _)) = sample_coupled_transition_path(
                    model,
                    theta,
                    xf,
                    xc,
                    &coupled_laws[s],
                    &mut stream,
                )?;
                Ok((fe, ce))
            })
            .collect::<Result<_>>()?;
        let y = &data.observations[s];
        let log_w: Vec<f64> = pairs
            .iter()
            .map(|(fe, ce)| match mode {
                DeltaWeightMode::Averaged => coupled_weight_h(model, theta, fe, ce, y),
                DeltaWeightMode::FineOnly => model.log_obs(theta, fe, y),
            })
            .collect();
        let weights = normalize_log_weights(&log_w, s + 1)?;
        log_likelihood += weights.log_mean;

        let mut rs = step_key.derive("resample", 0).stream();
        let ancestors = multinomial_resample(&weights, m, &mut rs);
        fine = ancestors.iter().map(|&a| pairs[a].0.clone()).collect();
        coarse = ancestors.iter().map(|&a| pairs[a].1.clone()).collect();

        fine_history.push(pairs.iter().map(|p| p.0.clone()).collect());
        coarse_history.push(pairs.iter().map(|p| p.1.clone()).collect());
        anc_history.push(ancestors);
        last_weights = Some(weights);
    }

    // Trace both components through the SAME sampled index chain.
    let weights = last_weights.unwrap();
    let mut select = key.derive("select", 0).stream();
    let mut idx = categorical_draw(&weights.normalized, &mut select);
    let mut fine_trajectory = vec![Vec::new(); t_max];
    let mut coarse_trajectory = vec![Vec::new(); t_max];
    for s in (0..t_max).rev() {
        fine_trajectory[s] = fine_history[s][idx].clone();
        coarse_trajectory[s] = coarse_history[s][idx].clone();
        if s > 0 {
            idx = anc_history[s - 1][idx];
        }
    }
    Ok(CoupledFilterOutput {
        log_likelihood,
        fine_trajectory,
        coarse_trajectory,
    })
}
