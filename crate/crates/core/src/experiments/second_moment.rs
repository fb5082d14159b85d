//! Second-moment analysis of the number of uncovered targets.

use serde::Serialize;

use super::stats::ordered_trials;
use super::ExperimentConfig;
use crate::bodies::{ball_overlap_volume, cube_overlap_volume, Body, Shape};
use crate::coverage::uncovered_count;
use crate::error::{input, Result};
use crate::pointset::PointSet;
use crate::sampling::sample_ppp;
use crate::torus::{greedy_maximal_packing, CandidateStream, Norm, Torus};

/// An empirical moment with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondMomentReport {
    pub intensity: f64,
    pub trials: usize,
    pub target_norm: Norm,
    pub target_separation: f64,
    pub targets: usize,
    /// `e^{-ρ vol(K)}`.
    pub single_uncovered: f64,
    pub expectation: f64,
    /// Variance from pairwise covariances over all pairs.
    pub variance: f64,
    /// `E[B²] − E[B]²` from the pair expectations directly.
    pub variance_direct: f64,
    pub variance_identity_residual: f64,
    pub isotropic_constant: f64,
    /// `8 L (f_n + log_3 ρ)`.
    pub delta_split: f64,
    /// Ordered pairs (including `p = p'`) within `Δ`: sum of `E[B_p B_p']`.
    pub sigma1: f64,
    /// Same pairs: sum of covariances.
    pub sigma1_covariance: f64,
    /// Ordered pairs beyond `Δ`: sum of covariances.
    pub sigma2: f64,
    /// `|σ1_cov + σ2 − Var| / Var`.
    pub partition_residual: f64,
    /// `Var / E²`.
    pub analytic_bound: f64,
    /// `(σ1 + σ2) / E²`, the split bound.
    pub split_bound: f64,
    pub empirical_mean: MomentEstimate,
    pub empirical_variance: MomentEstimate,
    pub empirical_zero: MomentEstimate,
    /// Empirical `Var / E²`.
    pub empirical_bound: f64,
    /// `(uncovered count per trial)`.
    pub per_trial: Vec<usize>,
}

/// Targets: a greedy packing with the configured separation (Euclidean 1 for
/// balls; for cubes ℓ1 separation `2a`, `a = min(2 ln n, min_side / 4)`).
pub fn run_second_moment(config: &ExperimentConfig) -> Result<SecondMomentReport> {
    config.validate()?;
    let body = &config.body;
    let n = config.dim();
    let nf = n as f64;
    let rho = config.intensities[0];
    let (norm, default_sep) = match body.shape() {
        Shape::Ball { .. } => (Norm::L2, 1.0),
        Shape::Cube { .. } => {
            let a = (2.0 * nf.ln()).min(config.torus.min_side() / 4.0);
            (Norm::L1, 2.0 * a)
        }
        _ => return input("second-moment analysis needs exact overlaps: ball or cube bodies only"),
    };
    let separation = config.target_separation.unwrap_or(default_sep);
    if !(separation > 0.0) {
        return input(format!("target separation must be positive, got {separation}"));
    }
    let step = match norm {
        Norm::L1 => separation / (2.0 * nf),
        _ => separation / (2.0 * nf.sqrt()),
    };
    let targets = greedy_maximal_packing(&config.torus, separation, norm, &CandidateStream::Grid { step })?;
    if targets.len() < 2 {
        return input(format!("second moment needs at least two targets, got {}", targets.len()));
    }
    let vol = body.volume();
    let e1 = (-rho * vol).exp();
    let cov_self = e1 * (1.0 - e1);
    let lk = match config.isotropic_constant {
        Some(l) => l,
        None => body.isotropic_constant()?,
    };
    let delta_split = 8.0 * lk * (config.f_n + rho.ln() / 3f64.ln());

    let count = targets.len();
    let mut pair_expect = 0.0;
    let mut pair_cov = 0.0;
    let mut sigma1 = count as f64 * e1;
    let mut sigma1_cov = count as f64 * cov_self;
    let mut sigma2 = 0.0;
    for i in 0..count {
        for j in (i + 1)..count {
            let (p, q) = (targets.point(i), targets.point(j));
            let joint = pair_expectation(body, &config.torus, rho, p, q)?;
            let cov = joint - e1 * e1;
            pair_expect += 2.0 * joint;
            pair_cov += 2.0 * cov;
            if config.torus.distance(p, q) <= delta_split {
                sigma1 += 2.0 * joint;
                sigma1_cov += 2.0 * cov;
            } else {
                sigma2 += 2.0 * cov;
            }
        }
    }
    let expectation = count as f64 * e1;
    let variance = count as f64 * cov_self + pair_cov;
    let second = expectation + pair_expect;
    let variance_direct = second - expectation * expectation;
    let rel = |a: f64, b: f64| if b != 0.0 { (a - b).abs() / b.abs() } else { (a - b).abs() };

    let per_trial = empirical(config, &targets, rho)?;
    let t = per_trial.len() as f64;
    let values: Vec<f64> = per_trial.iter().map(|&b| b as f64).collect();
    let mean = values.iter().sum::<f64>() / t;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / t;
    let var = m2 * t / (t - 1.0).max(1.0);
    let zero = per_trial.iter().filter(|&&b| b == 0).count() as f64 / t;
    Ok(SecondMomentReport {
        intensity: rho,
        trials: per_trial.len(),
        target_norm: norm,
        target_separation: separation,
        targets: count,
        single_uncovered: e1,
        expectation,
        variance,
        variance_direct,
        variance_identity_residual: rel(variance, variance_direct),
        isotropic_constant: lk,
        delta_split,
        sigma1,
        sigma1_covariance: sigma1_cov,
        sigma2,
        partition_residual: rel(sigma1_cov + sigma2, variance),
        analytic_bound: variance / (expectation * expectation),
        split_bound: (sigma1 + sigma2) / (expectation * expectation),
        empirical_mean: MomentEstimate {
            value: mean,
            std_error: (var / t).sqrt(),
        },
        empirical_variance: MomentEstimate {
            value: var,
            std_error: ((m4 - m2 * m2).max(0.0) / t).sqrt(),
        },
        empirical_zero: MomentEstimate {
            value: zero,
            std_error: (zero * (1.0 - zero) / t).sqrt(),
        },
        empirical_bound: if mean > 0.0 { var / (mean * mean) } else { f64::INFINITY },
        per_trial,
    })
}

/// `E[B_p B_q] = exp(−2ρ vol(K) + ρ vol(K ∩ (K + p − q)))` with the
/// minimum-image offset, for ball and cube bodies.
pub fn pair_expectation(body: &Body, torus: &Torus, rho: f64, p: &[f64], q: &[f64]) -> Result<f64> {
    let d = torus.min_image(p, q);
    let overlap = match body.shape() {
        Shape::Cube { side } => cube_overlap_volume(*side, &d),
        Shape::Ball { radius } => ball_overlap_volume(body.dim(), *radius, Norm::L2.length(&d))?,
        _ => return input("exact overlaps exist for ball and cube bodies only"),
    };
    Ok((-2.0 * rho * body.volume() + rho * overlap).exp())
}

fn empirical(config: &ExperimentConfig, targets: &PointSet, rho: f64) -> Result<Vec<usize>> {
    ordered_trials(config.trials, |t| {
        let x = sample_ppp(&config.torus, rho, &config.seed(t as u64))?
            .with_query_radius(config.body.max_half_extent());
        uncovered_count(targets, &x, &config.body)
    })
}
