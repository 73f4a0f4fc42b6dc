//! Cost-versus-MSE benchmark: sweep an accuracy budget, run single-level and
//! multilevel chains at matched target accuracy, and fit the log-log scaling
//! of cost against mean squared error.
//!
//! The ground truth for the squared error is a deterministic grid-quadrature
//! posterior mean for the mean-field OU pull parameter, whose mean-field limit
//! is an affine linear-Gaussian system with an exact Kalman likelihood.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::Level;
use crate::mcmc::{run_bilevel_chain, run_pmcmc_chain, ChainConfig, ProposalConfig};
use crate::model::{Dataset, Model, ParamVector, TestFunctional};
use crate::models::ou::{OUMeanFieldModel, OUMeanFieldParams};
use crate::multilevel::{allocate_levels, estimate_base, estimate_increment, LevelPlan};
use crate::rng::StreamKey;

use super::experiment::{generate_data, plan_cost, single_level_cost};
use super::output::write_json;

/// Ordinary least-squares fit of log(second coordinate) on log(first
/// coordinate) over the given points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fit log(y) = slope * log(x) + intercept over points (x, y) by least
/// squares. Needs at least two distinct abscissae; all coordinates must be
/// positive and finite.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(Error::Domain(format!(
                "log-log fit needs positive finite coordinates, got ({x}, {y})"
            )));
        }
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mut distinct = logs.iter().map(|&(x, _)| x).collect::<Vec<_>>();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientPoints(format!(
            "log-log fit needs at least 2 distinct abscissae, got {}",
            distinct.len()
        )));
    }
    let mx = logs.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let my = logs.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx = logs.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum::<f64>();
    let sxy = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum::<f64>();
    let syy = logs.iter().map(|&(_, y)| (y - my) * (y - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Cumulative running mean of a series, for chain convergence diagnostics.
pub fn running_mean(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for (i, v) in series.iter().enumerate() {
        sum += v;
        out.push(sum / (i + 1) as f64);
    }
    out
}

/// Deterministic reference posterior mean of the pull parameter: the
/// mean-field limit of the OU model is dX = pull (m0 - X) dt + sigma dW, an
/// affine linear-Gaussian system, so the likelihood at each grid point is an
/// exact Kalman evaluation and the posterior mean is a quadrature over a
/// log-spaced grid.
pub fn ou_reference_posterior_mean(
    model: &OUMeanFieldModel,
    data: &Dataset,
    level: Level,
    grid_points: usize,
) -> Result<f64> {
    if grid_points < 3 {
        return Err(Error::InsufficientPoints(
            "quadrature grid needs at least 3 points".into(),
        ));
    }
    let p = &model.params;
    let center = p.pull.ln();
    let half_width = 5.0 * p.prior_log_sd; // +-5 prior log-sd covers the mass
    let mut log_posts = Vec::with_capacity(grid_points);
    let mut pulls = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let u = center - half_width
            + 2.0 * half_width * i as f64 / (grid_points - 1) as f64;
        let pull = u.exp();
        let theta = ParamVector::new(vec![pull]);
        let ll = crate::models::linear_gaussian::kalman_loglik_affine(
            -pull,
            pull * p.m0,
            p.sigma,
            p.m0,
            p.sigma_obs,
            data,
            level,
        )?;
        // uniform grid in u = ln(pull): density transforms with factor pull
        log_posts.push(model.log_prior(&theta) + ll + u);
        pulls.push(pull);
    }
    let max = log_posts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Domain(
            "quadrature posterior has no finite mass".into(),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (lp, pull) in log_posts.iter().zip(&pulls) {
        let w = (lp - max).exp();
        num += w * pull;
        den += w;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// OU model parameter overrides.
    pub overrides: OUMeanFieldParams,
    pub horizon: usize,
    pub sim_level: u32,
    pub sim_cloud: usize,
    /// Accuracy budgets epsilon, each in (0, 1).
    pub epsilons: Vec<f64>,
    /// Independent chain replicates per budget (MSE averages over them).
    pub replicates: usize,
    pub l_star: u32,
    /// Multilevel allocation constants.
    pub c_k: f64,
    pub c_n: f64,
    /// Single-level resources: K = ceil(sl_c_k eps^-2), N = ceil(sl_c_n eps^-2)
    /// at level L(eps) = ceil(log2(1/eps)).
    pub sl_c_k: f64,
    pub sl_c_n: f64,
    pub filter_particles: usize,
    /// Initial pull value for every chain, deliberately offset from the
    /// data-generating value so that the short chains run at loose budgets
    /// carry an honest burn-in error instead of sitting on the posterior mode.
    pub start_pull: f64,
    /// Burn-in as a fraction of each chain's iteration count.
    pub burn_frac: f64,
    pub proposal_scale: f64,
    pub seed: u64,
    /// Discretization level of the deterministic Kalman reference.
    pub reference_level: u32,
    pub reference_grid: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        // A process noise somewhat below the observation noise keeps the
        // likelihood-estimate variance (roughly (sigma/sigma_obs)^2 T/N)
        // small even for the coarse law clouds used at loose budgets, so
        // pseudo-marginal chains stay well mixed across the whole sweep and
        // the MSE decays at the allocated epsilon^2 rate.
        BenchmarkConfig {
            overrides: OUMeanFieldParams {
                sigma: 0.2,
                prior_log_sd: 0.3,
                ..OUMeanFieldParams::default()
            },
            horizon: 6,
            sim_level: 8,
            sim_cloud: 2000,
            epsilons: vec![0.7071, 0.5, 0.25, 0.125, 0.0625],
            replicates: 8,
            l_star: 2,
            c_k: 40.0,
            c_n: 2.0,
            sl_c_k: 16.0,
            sl_c_n: 1.0,
            filter_particles: 16,
            start_pull: 1.25,
            burn_frac: 0.2,
            proposal_scale: 0.35,
            seed: 1,
            reference_level: 10,
            reference_grid: 2001,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkPoint {
    pub epsilon: f64,
    /// Deterministic operation-count cost of one replicate.
    pub cost: f64,
    /// Mean squared error of the replicate estimates against the reference.
    pub mse: f64,
    pub estimates: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub reference: f64,
    pub ml_points: Vec<BenchmarkPoint>,
    pub sl_points: Vec<BenchmarkPoint>,
    /// Slope of log(cost) per unit log(MSE), obtained by regressing the
    /// noisy log(MSE) on the deterministic log(cost) and inverting; the
    /// expected multilevel slope is about -3 and the single-level slope
    /// about -3.5.
    pub ml_fit: LogLogFit,
    pub sl_fit: LogLogFit,
}

fn chain_config(
    k: usize,
    level: u32,
    n: usize,
    cfg: &BenchmarkConfig,
    start: &ParamVector,
) -> ChainConfig {
    ChainConfig {
        iterations: k,
        burn_in: ((k as f64 * cfg.burn_frac) as usize).min(k.saturating_sub(1)),
        level: Level::new(level),
        law_particles: n,
        filter_particles: cfg.filter_particles,
        proposal: ProposalConfig {
            step_scales: vec![cfg.proposal_scale],
        },
        start: Some(start.clone()),
    }
}

fn ml_replicate(
    model: &dyn Model,
    data: &Dataset,
    plan: &LevelPlan,
    cfg: &BenchmarkConfig,
    start: &ParamVector,
    phi: &TestFunctional,
    key: &StreamKey,
) -> Result<f64> {
    let base_cfg = chain_config(plan.k_at(plan.l_star), plan.l_star, plan.n_at(plan.l_star), cfg, start);
    let base_samples = run_pmcmc_chain(model, data, &base_cfg, &key.derive("level", plan.l_star as u64))?;
    let mut value = estimate_base(&base_samples, phi, base_cfg.burn_in)?;
    for l in plan.increment_levels() {
        let c = chain_config(plan.k_at(l), l, plan.n_at(l), cfg, start);
        let samples = run_bilevel_chain(model, data, &c, &key.derive("level", l as u64))?;
        value += estimate_increment(&samples, model, data, phi, c.burn_in)?.value;
    }
    Ok(value)
}

/// Run the full sweep. With `out_dir` set, persists `benchmark.json`.
pub fn benchmark_cost_mse(cfg: &BenchmarkConfig, out_dir: Option<&Path>) -> Result<BenchmarkResult> {
    if cfg.replicates == 0 || cfg.epsilons.is_empty() {
        return Err(Error::Config(
            "benchmark needs at least one budget and one replicate".into(),
        ));
    }
    let model = OUMeanFieldModel::new(cfg.overrides.clone());
    let truth = model.reference_theta();
    let start = ParamVector::new(vec![cfg.start_pull]);
    let phi = TestFunctional::param_coord("pull", 0);
    let root = StreamKey::root(cfg.seed);

    let generated = generate_data(
        &model,
        &truth,
        cfg.horizon,
        cfg.sim_level,
        cfg.sim_cloud,
        &root.derive("data", 0),
    )?;
    let data = &generated.dataset;
    let reference =
        ou_reference_posterior_mean(&model, data, Level::new(cfg.reference_level), cfg.reference_grid)?;

    // Plans and deterministic costs per budget.
    let mut ml_plans = Vec::with_capacity(cfg.epsilons.len());
    let mut sl_resources = Vec::with_capacity(cfg.epsilons.len());
    for &eps in &cfg.epsilons {
        ml_plans.push(allocate_levels(eps, cfg.l_star, cfg.c_k, cfg.c_n, cfg.filter_particles)?);
        let level = (1.0 / eps).log2().ceil().max(1.0) as u32;
        let k = (cfg.sl_c_k * eps.powi(-2)).ceil() as usize;
        let n = (cfg.sl_c_n * eps.powi(-2)).ceil().max(2.0) as usize;
        sl_resources.push((level, k.max(10), n));
    }

    // All (budget, replicate, arm) chains in parallel; derived streams make
    // the result independent of scheduling.
    enum Arm {
        Ml(usize),
        Sl(usize),
    }
    let mut jobs = Vec::new();
    for b in 0..cfg.epsilons.len() {
        for r in 0..cfg.replicates {
            jobs.push((Arm::Ml(b), r));
            jobs.push((Arm::Sl(b), r));
        }
    }
    let estimates: Vec<(usize, bool, f64)> = jobs
        .par_iter()
        .map(|(arm, r)| {
            let (b, is_ml) = match arm {
                Arm::Ml(b) => (*b, true),
                Arm::Sl(b) => (*b, false),
            };
            let key = root
                .derive(if is_ml { "ml" } else { "sl" }, b as u64)
                .derive("rep", *r as u64);
            let est = if is_ml {
                ml_replicate(&model, data, &ml_plans[b], cfg, &start, &phi, &key)?
            } else {
                let (level, k, n) = sl_resources[b];
                let c = chain_config(k, level, n, cfg, &start);
                let samples = run_pmcmc_chain(&model, data, &c, &key)?;
                estimate_base(&samples, &phi, c.burn_in)?
            };
            Ok((b, is_ml, est))
        })
        .collect::<Result<_>>()?;

    let mut ml_points = Vec::with_capacity(cfg.epsilons.len());
    let mut sl_points = Vec::with_capacity(cfg.epsilons.len());
    for (b, &eps) in cfg.epsilons.iter().enumerate() {
        let collect = |want_ml: bool| -> Vec<f64> {
            estimates
                .iter()
                .filter(|(bb, ml, _)| *bb == b && *ml == want_ml)
                .map(|(_, _, e)| *e)
                .collect()
        };
        let mse = |ests: &[f64]| {
            ests.iter().map(|e| (e - reference) * (e - reference)).sum::<f64>() / ests.len() as f64
        };
        let ml_ests = collect(true);
        let sl_ests = collect(false);
        let (level, k, n) = sl_resources[b];
        ml_points.push(BenchmarkPoint {
            epsilon: eps,
            cost: plan_cost(&ml_plans[b], cfg.horizon),
            mse: mse(&ml_ests),
            estimates: ml_ests,
        });
        sl_points.push(BenchmarkPoint {
            epsilon: eps,
            cost: single_level_cost(k, level, n, cfg.filter_particles, cfg.horizon),
            mse: mse(&sl_ests),
            estimates: sl_ests,
        });
    }

    // Cost is deterministic while the MSE estimates carry sampling noise, so
    // the line is fitted with cost as the predictor (avoiding attenuation
    // from a noisy regressor) and then inverted to express the slope as
    // d log(cost) / d log(MSE).
    let to_fit = |pts: &[BenchmarkPoint]| -> Result<LogLogFit> {
        let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p.cost, p.mse)).collect();
        let f = fit_loglog_slope(&pairs)?;
        if f.slope == 0.0 {
            return Err(Error::Domain("flat cost-MSE curve has no finite slope".into()));
        }
        Ok(LogLogFit {
            slope: 1.0 / f.slope,
            intercept: -f.intercept / f.slope,
            r_squared: f.r_squared,
        })
    };
    let ml_fit = to_fit(&ml_points)?;
    let sl_fit = to_fit(&sl_points)?;

    let result = BenchmarkResult {
        reference,
        ml_points,
        sl_points,
        ml_fit,
        sl_fit,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("benchmark.json"), &serde_json::to_value(&result)?)?;
    }
    Ok(result)
}
