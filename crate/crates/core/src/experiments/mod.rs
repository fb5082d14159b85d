//! Experiment pipelines.
//!
//! Every pipeline is a pure function of its [`ExperimentConfig`]. Trials run
//! in parallel, keyed by trial index, and are folded in index order, so the
//! reports do not depend on the number of worker threads.

mod e123;
mod lemmas;
mod multiplicity;
mod scan;
mod second_moment;
pub mod stats;

pub use e123::{run_e123_diagnostics, E123Report, E123Row, E123_LABEL};
pub use lemmas::{run_lemma_suite, LemmaLedger, LemmaRow};
pub use multiplicity::{run_multiplicity_profile, MultiplicityReport, PmfRow};
pub use scan::{
    pilot_grid, run_coverage_scan, threshold_gap, ScanRow, ScanTable, ThresholdGap, TrialRecord, PILOT_TRIAL_OFFSET,
};
pub use second_moment::{pair_expectation, run_second_moment, MomentEstimate, SecondMomentReport};

use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::bodies::Body;
use crate::coverage::{check_geometry, expanded_body};
use crate::error::{input, Error, Result};
use crate::sampling::SeedSpec;
use crate::torus::{build_probe_net_capped, ProbeNet, Torus};

/// Substream for the nested-coupling marks.
pub const SUBSTREAM_MARKS: u64 = 3;
/// Substream for bootstrap resampling.
pub const SUBSTREAM_BOOTSTRAP: u64 = 4;
/// Trial index reserved for run-level draws (bootstrap, lemma sampling).
pub const RUN_TRIAL: u64 = u64::MAX;

/// How the samples of different intensities relate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// One marked process per trial; thinning by mark gives every intensity.
    Nested,
    /// Independent samples per intensity and trial.
    Independent,
}

/// Certificate used for independent coverage verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certifier {
    /// Flat probe net of radius `net_radius`.
    Net,
    /// Cell refinement down to `cell_radius`.
    Adaptive,
}

/// Configuration shared by all pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub body: Body,
    pub torus: Torus,
    /// Intensity grid; single-intensity pipelines use the first entry.
    pub intensities: Vec<f64>,
    pub trials: usize,
    /// Probe-net radius for flat certificates and multiplicity bounds.
    pub net_radius: f64,
    /// Smallest cell radius for refinement certificates.
    pub cell_radius: f64,
    pub master_seed: u64,
    pub delta: f64,
    /// Target-packing separation in the target norm (second moment).
    pub target_separation: Option<f64>,
    /// Overrides the computed isotropic constant.
    pub isotropic_constant: Option<f64>,
    pub f_n: f64,
    pub omega: f64,
    pub mc_samples: usize,
    /// Largest tolerated undetermined fraction per grid point.
    pub undetermined_cap: f64,
    pub bootstrap_resamples: usize,
    pub coupling: Coupling,
    pub certifier: Certifier,
    /// Trials contributing multiplicity bounds.
    pub multiplicity_trials: usize,
    /// Cap on the probe net used for multiplicity bounds.
    pub multiplicity_net_points: usize,
    /// Overrides of the diagnostic radii `ε` and `μ`.
    pub epsilon: Option<f64>,
    pub mu: Option<f64>,
    /// Fixed reference point of the multiplicity profile (origin by default).
    pub reference_point: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// Defaults for everything but the body, torus, intensities and trials.
    pub fn new(body: Body, torus: Torus, intensities: Vec<f64>, trials: usize) -> Self {
        let net_radius = Self::default_net_radius(&body);
        ExperimentConfig {
            cell_radius: 0.001 * body.circumradius(),
            body,
            torus,
            intensities,
            trials,
            net_radius,
            master_seed: 0,
            delta: 0.3,
            target_separation: None,
            isotropic_constant: None,
            f_n: 2.0,
            omega: 1.0,
            mc_samples: 1_000_000,
            undetermined_cap: 0.05,
            bootstrap_resamples: 1000,
            coupling: Coupling::Nested,
            certifier: Certifier::Net,
            multiplicity_trials: 20,
            multiplicity_net_points: 4096,
            epsilon: None,
            mu: None,
            reference_point: None,
        }
    }

    /// `min(0.02, inradius / 10)`.
    pub fn default_net_radius(body: &Body) -> f64 {
        0.02f64.min(body.inradius() / 10.0)
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    pub fn seed(&self, trial: u64) -> SeedSpec {
        SeedSpec::new(self.master_seed, trial)
    }

    /// `M = (vol(T) / ν_n)^{1/n}`.
    pub fn torus_volume_ratio(&self) -> f64 {
        let n = self.dim() as f64;
        ((self.torus.volume().ln() - analytic::ln_unit_ball_volume(self.dim())) / n).exp()
    }

    /// Checks the invariants every pipeline relies on.
    pub fn validate(&self) -> Result<()> {
        if self.body.dim() != self.torus.dim() {
            return input(format!(
                "body dimension {} does not match torus dimension {}",
                self.body.dim(),
                self.torus.dim()
            ));
        }
        if !self.torus.is_packing_torus(&self.body.difference_body()) {
            return input(
                "torus is not a packing torus of K - K: lattice translates of the difference body overlap, \
                 so translates of K do not embed injectively",
            );
        }
        check_geometry(&self.body, &self.torus, 0.0)?;
        if self.intensities.is_empty() {
            return input("intensity grid is empty");
        }
        if self.intensities.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return input("intensities must be finite and nonnegative");
        }
        if self.trials == 0 {
            return input("trials must be positive");
        }
        positive("net_radius", self.net_radius)?;
        positive("cell_radius", self.cell_radius)?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return input(format!("delta must be positive, got {}", self.delta));
        }
        if self.mc_samples == 0 || self.bootstrap_resamples == 0 || self.multiplicity_net_points == 0 {
            return input("mc_samples, bootstrap_resamples and multiplicity_net_points must be positive");
        }
        if !(0.0..=1.0).contains(&self.undetermined_cap) {
            return input("undetermined_cap must lie in [0, 1]");
        }
        for (name, v) in [
            ("target_separation", self.target_separation),
            ("isotropic_constant", self.isotropic_constant),
            ("epsilon", self.epsilon),
            ("mu", self.mu),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if let Some(p) = &self.reference_point {
            if p.len() != self.dim() || p.iter().any(|x| !x.is_finite()) {
                return input("reference_point must be a finite point of the torus dimension");
            }
        }
        Ok(())
    }

    /// Probe net for multiplicity bounds: the configured radius, doubled
    /// until the net has at most `multiplicity_net_points` points. `None` when
    /// the expanded body breaks the circumradius precondition at that radius.
    pub(crate) fn multiplicity_net(&self) -> Result<Option<ProbeNet>> {
        let norm = self.body.net_norm();
        let mut h = self.net_radius;
        let net = loop {
            match build_probe_net_capped(&self.torus, h, norm, self.multiplicity_net_points as f64) {
                Ok(net) => break net,
                Err(Error::Resource { .. }) => h *= 2.0,
                Err(e) => return Err(e),
            }
        };
        let h = net.covering_radius();
        let margin = self.body.margin(&vec![0.0; self.dim()]);
        if h >= margin || check_geometry(&expanded_body(&self.body, h), &self.torus, 0.0).is_err() {
            return Ok(None);
        }
        Ok(Some(net))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        input(format!("{name} must be positive and finite, got {v}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_tori_and_grids() {
        let body = Body::ball(2, 1.0).unwrap();
        let ok = ExperimentConfig::new(body.clone(), Torus::cubic(2, 5.0).unwrap(), vec![1.0], 10);
        ok.validate().unwrap();
        assert!((ok.net_radius - 0.02).abs() < 1e-15);
        let small = ExperimentConfig::new(body.clone(), Torus::cubic(2, 1.9).unwrap(), vec![1.0], 10);
        let err = small.validate().unwrap_err().to_string();
        assert!(err.contains("packing torus"), "{err}");
        let empty = ExperimentConfig::new(body.clone(), Torus::cubic(2, 5.0).unwrap(), vec![], 10);
        assert!(empty.validate().is_err());
        let zero = ExperimentConfig::new(body, Torus::cubic(2, 5.0).unwrap(), vec![1.0], 0);
        assert!(zero.validate().is_err());
    }

    #[test]
    fn volume_ratio() {
        let cfg = ExperimentConfig::new(
            Body::ball(2, 1.0).unwrap(),
            Torus::cubic(2, std::f64::consts::PI.sqrt()).unwrap(),
            vec![1.0],
            1,
        );
        assert!((cfg.torus_volume_ratio() - 1.0).abs() < 1e-12);
    }
}
