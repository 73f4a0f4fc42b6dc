//! The multilevel estimator: base-level empirical average, self-normalized
//! H-check-weighted bi-level increments, the telescoping sum, and the
//! theory-driven level allocation.

use crate::error::{Error, Result};
use crate::filter::correction_weight_hcheck;
use crate::mcmc::{ChainSample, CoupledChainSample};
use crate::model::{Dataset, Model, TestFunctional};

/// Resource allocation across levels l_star..=l_max: particle counts N_l,
/// iteration counts K_l, filter particles M.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPlan {
    pub l_star: u32,
    pub l_max: u32,
    /// N_l for l = l_star..=l_max, indexed by l - l_star.
    pub n_per_level: Vec<usize>,
    /// K_l for l = l_star..=l_max, indexed by l - l_star.
    pub k_per_level: Vec<usize>,
    pub filter_particles: usize,
    pub epsilon: Option<f64>,
}

impl LevelPlan {
    pub fn validate(&self) -> Result<()> {
        if self.l_star >= self.l_max {
            return Err(Error::Config(format!(
                "l_star {} must be below L {}",
                self.l_star, self.l_max
            )));
        }
        let levels = (self.l_max - self.l_star + 1) as usize;
        if self.n_per_level.len() != levels || self.k_per_level.len() != levels {
            return Err(Error::Config(format!(
                "plan needs N_l and K_l for each of {levels} levels"
            )));
        }
        if self
            .n_per_level
            .iter()
            .chain(&self.k_per_level)
            .any(|&c| c == 0)
            || self.filter_particles == 0
        {
            return Err(Error::Config("all plan counts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_at(&self, l: u32) -> usize {
        self.n_per_level[(l - self.l_star) as usize]
    }

    pub fn k_at(&self, l: u32) -> usize {
        self.k_per_level[(l - self.l_star) as usize]
    }

    /// Increment levels l = l_star+1..=l_max.
    pub fn increment_levels(&self) -> impl Iterator<Item = u32> + '_ {
        (self.l_star + 1)..=self.l_max
    }
}

/// The combined multilevel estimate with its components.
#[derive(Debug, Clone)]
pub struct MLEstimate {
    pub value: f64,
    pub base_term: f64,
    /// One increment per level l_star+1..=l_max.
    pub increments: Vec<f64>,
    /// (fine, coarse) effective sample sizes per increment level.
    pub ess: Vec<(f64, f64)>,
}

/// A bi-level increment with the effective sample sizes of its two
/// self-normalized averages.
#[derive(Debug, Clone, Copy)]
pub struct IncrementEstimate {
    pub value: f64,
    pub fine_ess: f64,
    pub coarse_ess: f64,
}

/// Empirical average of phi over post-burn-in samples of a base-level chain.
pub fn estimate_base(
    samples: &[ChainSample],
    phi: &TestFunctional,
    burn_in: usize,
) -> Result<f64> {
    let retained = &samples[burn_in.min(samples.len())..];
    if retained.is_empty() {
        return Err(Error::InsufficientSamples(format!(
            "burn_in {burn_in} leaves no samples out of {}",
            samples.len()
        )));
    }
    let sum: f64 = retained
        .iter()
        .map(|s| phi.eval(&s.theta, &s.trajectory))
        .sum();
    Ok(sum / retained.len() as f64)
}

/// Self-normalized bi-level increment:
/// [sum phi(fine) W_fine] / [sum W_fine] - [sum phi(coarse) W_coarse] / [sum W_coarse],
/// where log W accumulates the per-time H-check corrections along each
/// trajectory. Computed in log space with max-shift.
pub fn estimate_increment(
    samples: &[CoupledChainSample],
    model: &dyn Model,
    data: &Dataset,
    phi: &TestFunctional,
    burn_in: usize,
) -> Result<IncrementEstimate> {
    let retained = &samples[burn_in.min(samples.len())..];
    if retained.is_empty() {
        return Err(Error::InsufficientSamples(format!(
            "burn_in {burn_in} leaves no samples out of {}",
            samples.len()
        )));
    }
    let mut log_w_fine = Vec::with_capacity(retained.len());
    let mut log_w_coarse = Vec::with_capacity(retained.len());
    let mut phi_fine = Vec::with_capacity(retained.len());
    let mut phi_coarse = Vec::with_capacity(retained.len());
    for s in retained {
        let mut lf = 0.0;
        let mut lc = 0.0;
        for (t, y) in data.observations.iter().enumerate() {
            let xf = &s.fine_trajectory[t];
            let xc = &s.coarse_trajectory[t];
            lf += correction_weight_hcheck(model, &s.theta, xf, xc, y);
            lc += correction_weight_hcheck(model, &s.theta, xc, xf, y);
        }
        log_w_fine.push(lf);
        log_w_coarse.push(lc);
        phi_fine.push(phi.eval(&s.theta, &s.fine_trajectory));
        phi_coarse.push(phi.eval(&s.theta, &s.coarse_trajectory));
    }
    let (fine_avg, fine_ess) = self_normalized_average(&phi_fine, &log_w_fine, "fine")?;
    let (coarse_avg, coarse_ess) = self_normalized_average(&phi_coarse, &log_w_coarse, "coarse")?;
    Ok(IncrementEstimate {
        value: fine_avg - coarse_avg,
        fine_ess,
        coarse_ess,
    })
}

/// Max-shifted weighted average plus the effective sample size 1 / sum(w_bar^2).
fn self_normalized_average(
    values: &[f64],
    log_w: &[f64],
    side: &'static str,
) -> Result<(f64, f64)> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::WeightDegeneracy { side });
    }
    let w: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    let avg = values
        .iter()
        .zip(&w)
        .map(|(v, wi)| v * wi)
        .sum::<f64>()
        / total;
    let ess = 1.0 / w.iter().map(|wi| (wi / total).powi(2)).sum::<f64>();
    Ok((avg, ess))
}

/// Telescoping combination: value = base + sum of increments, components kept.
pub fn combine_ml_estimate(base: f64, increments: &[f64], ess: Vec<(f64, f64)>) -> MLEstimate {
    MLEstimate {
        value: base + increments.iter().sum::<f64>(),
        base_term: base,
        increments: increments.to_vec(),
        ess,
    }
}

/// Theory-driven allocation: L = max(l_star+1, ceil(log2(1/epsilon))),
/// K_l = ceil(c_k epsilon^-2 Delta_l^{6/7}), N_l = ceil(c_n epsilon^-2 Delta_l^{1/2}).
pub fn allocate_levels(
    epsilon: f64,
    l_star: u32,
    c_k: f64,
    c_n: f64,
    filter_particles: usize,
) -> Result<LevelPlan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if c_k <= 0.0 || c_n <= 0.0 {
        return Err(Error::Domain("allocation constants must be positive".into()));
    }
    let l_max = ((1.0 / epsilon).log2().ceil() as u32).max(l_star + 1);
    let eps2 = epsilon.powi(-2);
    let mut n_per_level = Vec::new();
    let mut k_per_level = Vec::new();
    for l in l_star..=l_max {
        let delta = 0.5f64.powi(l as i32);
        k_per_level.push((c_k * eps2 * delta.powf(6.0 / 7.0)).ceil().max(1.0) as usize);
        n_per_level.push((c_n * eps2 * delta.sqrt()).ceil().max(1.0) as usize);
    }
    Ok(LevelPlan {
        l_star,
        l_max,
        n_per_level,
        k_per_level,
        filter_particles,
        epsilon: Some(epsilon),
    })
}
