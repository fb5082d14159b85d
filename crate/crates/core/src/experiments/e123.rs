//! Frequencies of the three events behind the ball covering construction.

use serde::Serialize;

use super::stats::{ordered_trials, wilson};
use super::ExperimentConfig;
use crate::analytic::{choose_beta, solve_xi};
use crate::bodies::Shape;
use crate::coverage::saturation_threshold;
use crate::error::{input, Error, Result};
use crate::pointset::PointSet;
use crate::sampling::sample_ppp;
use crate::torus::{greedy_maximal_packing, nearest_assignment, CandidateStream, Norm};

pub const E123_LABEL: &str = "diagnostic only: the events are guaranteed only in the limit n -> infinity";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct E123Row {
    pub intensity: f64,
    pub trials: usize,
    pub e1: usize,
    pub e2: usize,
    pub e3: usize,
    pub all: usize,
    pub e1_ci: (f64, f64),
    pub e2_ci: (f64, f64),
    pub e3_ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct E123Report {
    pub label: &'static str,
    pub n: usize,
    pub radius: f64,
    pub delta: f64,
    pub beta: f64,
    pub xi: f64,
    pub epsilon: f64,
    pub mu: f64,
    /// `(β/2) n ln n`.
    pub saturation_threshold: f64,
    /// `(ξ + 10δ) n ln n`.
    pub neighbourhood_bound: f64,
    pub p_epsilon_size: usize,
    pub p_mu_size: usize,
    /// Covering radius guaranteed by the greedy constructions (separation plus grid half-diagonal).
    pub p_epsilon_covering_bound: f64,
    pub p_mu_covering_bound: f64,
    pub phi_max_distance: f64,
    pub rows: Vec<E123Row>,
    /// `(intensity index, trial, E1, E2, E3)`.
    pub per_trial: Vec<(usize, u64, bool, bool, bool)>,
}

fn packing(config: &ExperimentConfig, separation: f64, knob: &str) -> Result<(PointSet, f64)> {
    let n = config.dim() as f64;
    let step = separation / n.sqrt();
    let set = greedy_maximal_packing(&config.torus, separation, Norm::L2, &CandidateStream::Grid { step })
        .map_err(|e| match e {
            Error::Resource { required, cap, .. } => Error::Resource {
                what: format!("{knob}-net candidates at {knob} = {separation} (raise the `{knob}` override)"),
                required,
                cap,
            },
            other => other,
        })?;
    Ok((set, separation + 0.5 * step * n.sqrt()))
}

/// Per intensity and trial, whether every `P_μ` point is saturated (E1), every
/// `P_ε` point has at most `(ξ + 10δ) n ln n` centers within `r + ε` (E2), and
/// every `P_ε` point either has a center within `r − ε` or an unsaturated
/// image under `φ` (E3). Radii are `ε = r / (n ln n)` and `μ = r n^{-1/2-δ/4}`
/// unless overridden.
pub fn run_e123_diagnostics(config: &ExperimentConfig) -> Result<E123Report> {
    config.validate()?;
    let radius = match config.body.shape() {
        Shape::Ball { radius } => *radius,
        _ => return input("E1/E2/E3 diagnostics are defined for Euclidean balls only"),
    };
    let n = config.dim();
    if n < 2 {
        return input("E1/E2/E3 diagnostics need n >= 2 so that ln n > 0");
    }
    let nf = n as f64;
    let nln = nf * nf.ln();
    let delta = config.delta;
    let epsilon = config.epsilon.unwrap_or(radius / nln);
    let mu = config.mu.unwrap_or(radius * nf.powf(-0.5 - delta / 4.0));
    if epsilon >= radius {
        return input(format!("epsilon {epsilon} must be below the radius {radius}"));
    }
    let beta = choose_beta(delta)?;
    let xi = solve_xi(1e-12)?.value;
    let sat = saturation_threshold(beta, n);
    let bound = (xi + 10.0 * delta) * nln;
    let (p_eps, eps_cover) = packing(config, epsilon, "epsilon")?;
    let (p_mu, mu_cover) = packing(config, mu, "mu")?;
    let phi = nearest_assignment(&p_eps, &p_mu)?;

    let trials = config.trials;
    let mut rows = Vec::new();
    let mut per_trial = Vec::new();
    for (j, &rho) in config.intensities.iter().enumerate() {
        let outcomes = ordered_trials(trials, |t| {
            let seed = config.seed(((j as u64) << 32) | t as u64);
            let x = sample_ppp(&config.torus, rho, &seed)?.with_query_radius(radius + epsilon);
            let saturated: Vec<bool> = p_mu
                .iter()
                .map(|y| x.count_within(y, radius - epsilon, Norm::L2) as f64 >= sat)
                .collect();
            let e1 = saturated.iter().all(|&s| s);
            let mut e2 = true;
            let mut e3 = true;
            let mut all_near = true;
            for (i, z) in p_eps.iter().enumerate() {
                if e2 && x.count_within(z, radius + epsilon, Norm::L2) as f64 > bound {
                    e2 = false;
                }
                let near = x.count_within(z, radius - epsilon, Norm::L2) > 0;
                all_near &= near;
                if !near && saturated[phi.targets[i]] {
                    e3 = false;
                }
            }
            if e1 && e3 && !all_near {
                return Err(Error::Numeric {
                    what: format!("E1 and E3 hold but a P_epsilon point has no center within r - epsilon (trial {t})"),
                    achieved: 0.0,
                    requested: 1.0,
                });
            }
            Ok((e1, e2, e3))
        })?;
        let count = |f: fn(&(bool, bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count();
        let (e1, e2, e3) = (count(|o| o.0), count(|o| o.1), count(|o| o.2));
        rows.push(E123Row {
            intensity: rho,
            trials,
            e1,
            e2,
            e3,
            all: count(|o| o.0 && o.1 && o.2),
            e1_ci: wilson(e1, trials),
            e2_ci: wilson(e2, trials),
            e3_ci: wilson(e3, trials),
        });
        per_trial.extend(outcomes.iter().enumerate().map(|(t, o)| (j, t as u64, o.0, o.1, o.2)));
    }
    Ok(E123Report {
        label: E123_LABEL,
        n,
        radius,
        delta,
        beta,
        xi,
        epsilon,
        mu,
        saturation_threshold: sat,
        neighbourhood_bound: bound,
        p_epsilon_size: p_eps.len(),
        p_mu_size: p_mu.len(),
        p_epsilon_covering_bound: eps_cover,
        p_mu_covering_bound: mu_cover,
        phi_max_distance: phi.max_distance,
        rows,
        per_trial,
    })
}
