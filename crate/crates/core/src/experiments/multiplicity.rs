//! Fixed-point multiplicity law and whole-torus multiplicity bounds.

use serde::Serialize;

use super::stats::{mean_se, ordered_trials};
use super::ExperimentConfig;
use crate::analytic::poisson_pmf;
use crate::coverage::{covering_density, max_multiplicity, multiplicity_at};
use crate::error::Result;
use crate::sampling::sample_ppp;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfRow {
    pub k: usize,
    pub count: usize,
    pub empirical: f64,
    pub poisson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub intensity: f64,
    pub trials: usize,
    pub reference_point: Vec<f64>,
    /// `ρ vol(K)`, the mean of the fixed-point multiplicity.
    pub poisson_mean: f64,
    pub pmf: Vec<PmfRow>,
    /// Half the L1 distance between the empirical and Poisson pmfs,
    /// including the Poisson mass beyond the largest observed value.
    pub total_variation: f64,
    pub mean_multiplicity: f64,
    pub mean_density: f64,
    pub density_std_error: f64,
    /// `ρ vol(K)`, the expected covering density on a packing torus.
    pub expected_density: f64,
    /// `(mean_density - expected_density) / density_std_error`.
    pub density_z: f64,
    pub bounds_net_radius: Option<f64>,
    /// `(lower, upper)` multiplicity bounds of the first trials.
    pub bounds: Vec<(usize, usize)>,
    /// Per-trial `(trial_index, point_count, multiplicity at the reference point)`.
    pub per_trial: Vec<(u64, usize, usize)>,
}

/// Multiplicity profile at the first configured intensity.
pub fn run_multiplicity_profile(config: &ExperimentConfig) -> Result<MultiplicityReport> {
    config.validate()?;
    let rho = config.intensities[0];
    let body = &config.body;
    let reference = config
        .reference_point
        .clone()
        .unwrap_or_else(|| vec![0.0; config.dim()]);
    let net = config.multiplicity_net()?;
    let bound_trials = if net.is_some() {
        config.multiplicity_trials.min(config.trials)
    } else {
        0
    };
    let results = ordered_trials(config.trials, |t| {
        let x = sample_ppp(&config.torus, rho, &config.seed(t as u64))?.with_query_radius(body.max_half_extent());
        let k = multiplicity_at(&x, body, &reference)?;
        let density = covering_density(&x, body)?;
        let bounds = match (&net, t < bound_trials) {
            (Some(net), true) => {
                let b = max_multiplicity(&x, body, net)?;
                Some((b.lower, b.upper))
            }
            _ => None,
        };
        Ok((x.len(), k, density, bounds))
    })?;

    let lambda = rho * body.volume();
    let max_k = results.iter().map(|r| r.1).max().unwrap_or(0);
    let mut counts = vec![0usize; max_k + 1];
    for r in &results {
        counts[r.1] += 1;
    }
    let trials = results.len() as f64;
    let mut tv = 0.0;
    let mut poisson_mass = 0.0;
    let pmf: Vec<PmfRow> = counts
        .iter()
        .enumerate()
        .map(|(k, &count)| {
            let empirical = count as f64 / trials;
            let poisson = poisson_pmf(lambda, k as u64);
            tv += (empirical - poisson).abs();
            poisson_mass += poisson;
            PmfRow {
                k,
                count,
                empirical,
                poisson,
            }
        })
        .collect();
    let total_variation = 0.5 * (tv + (1.0 - poisson_mass).max(0.0));
    let densities: Vec<f64> = results.iter().map(|r| r.2).collect();
    let (mean_density, density_std_error) = mean_se(&densities);
    let expected_density = lambda;
    let density_z = if density_std_error > 0.0 {
        (mean_density - expected_density) / density_std_error
    } else {
        0.0
    };
    Ok(MultiplicityReport {
        intensity: rho,
        trials: results.len(),
        reference_point: reference,
        poisson_mean: lambda,
        pmf,
        total_variation,
        mean_multiplicity: results.iter().map(|r| r.1 as f64).sum::<f64>() / trials,
        mean_density,
        density_std_error,
        expected_density,
        density_z,
        bounds_net_radius: net.map(|n| n.covering_radius()),
        bounds: results.iter().filter_map(|r| r.3).collect(),
        per_trial: results
            .iter()
            .enumerate()
            .map(|(t, r)| (t as u64, r.0, r.1))
            .collect(),
    })
}
