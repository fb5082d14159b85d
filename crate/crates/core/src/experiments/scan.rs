//! Intensity scans of the coverage probability.

use rand::Rng;
use serde::Serialize;

use super::stats::{first_crossing, isotonic_nondecreasing, mean_se, ordered_trials, quantile, Crossing};
use super::{Certifier, Coupling, ExperimentConfig, RUN_TRIAL, SUBSTREAM_BOOTSTRAP, SUBSTREAM_MARKS};
use crate::coverage::{
    certify_coverage, certify_coverage_adaptive, coverage_time_at_levels, expanded_body, AdaptiveLimits,
    VerdictStatus,
};
use crate::error::{input, Result};
use crate::pointset::PointSet;
use crate::sampling::{sample_ppp, SeedSpec};
use crate::torus::{build_probe_net, ProbeNet};

/// Outcome of one trial across the whole intensity grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    /// Points present at each intensity.
    pub point_counts: Vec<usize>,
    pub verdicts: Vec<VerdictStatus>,
    /// Bracket on the coverage time (nested coupling only).
    pub coverage_time: Option<(f64, f64)>,
    pub cells_evaluated: usize,
    pub unresolved_cells: usize,
    /// Per-intensity multiplicity bounds, when computed for this trial.
    pub multiplicity: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub intensity: f64,
    pub trials: usize,
    pub covered: usize,
    pub uncovered: usize,
    pub undetermined: usize,
    pub covered_fraction: f64,
    pub fraction_ci: (f64, f64),
    /// Isotonic fit of the fraction covered among determined trials.
    pub smoothed_fraction: f64,
    pub mean_density: f64,
    pub density_ci: (f64, f64),
    pub mean_mult_lower: Option<f64>,
    pub mean_mult_upper: Option<f64>,
    pub undetermined_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    /// Intensity where the smoothed fraction crosses 1/2.
    pub threshold: Option<f64>,
    pub threshold_ci: Option<(f64, f64)>,
    /// The crossing lies outside the scanned interval.
    pub extrapolated: bool,
    /// Threshold and its interval lie inside the scanned interval.
    pub bracketed: bool,
    /// `threshold · vol(K) / (n ln n)`.
    pub normalized_threshold: Option<f64>,
    pub normalized_ci: Option<(f64, f64)>,
    pub coupling: Coupling,
    pub multiplicity_net_radius: Option<f64>,
    pub multiplicity_trials: usize,
    pub warnings: Vec<String>,
    pub trials: Vec<TrialRecord>,
}

/// How undetermined verdicts enter a coverage fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Resolution {
    /// Fraction among determined trials.
    Determined,
    AllCovered,
    AllUncovered,
}

/// Scans the intensity grid.
///
/// With nested coupling each trial draws one process at the largest intensity
/// with uniform marks in `[0, ρ_max]`; the points with mark at most `ρ` form
/// the process at intensity `ρ`, and one refinement pass decides every grid
/// point. Independent coupling draws trial `t` of grid point `j` with trial
/// index `j·2^32 + t` and certifies it with the configured certifier.
pub fn run_coverage_scan(config: &ExperimentConfig) -> Result<ScanTable> {
    config.validate()?;
    let levels = &config.intensities;
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return input("scan intensities must be strictly increasing");
    }
    let mult_net = config.multiplicity_net()?;
    let mult_trials = if mult_net.is_some() {
        config.multiplicity_trials.min(config.trials)
    } else {
        0
    };
    let net = match (config.coupling, config.certifier) {
        (Coupling::Independent, Certifier::Net) => {
            Some(build_probe_net(&config.torus, config.net_radius, config.body.net_norm())?)
        }
        _ => None,
    };
    let records = ordered_trials(config.trials, |t| {
        let probes = if t < mult_trials { mult_net.as_ref() } else { None };
        match config.coupling {
            Coupling::Nested => nested_trial(config, t as u64, probes),
            Coupling::Independent => independent_trial(config, t as u64, net.as_ref(), probes),
        }
    })?;
    Ok(summarize(config, records, mult_net.map(|n| n.covering_radius()), mult_trials))
}

/// Trial indices at and above this offset are reserved for pilot runs.
pub const PILOT_TRIAL_OFFSET: u64 = 1 << 40;

/// Grid of `points` intensities spanning the central 94% of pilot coverage
/// times. Runs `pilot_trials` nested trials on `config.intensities` (a coarse
/// sorted grid whose top exceeds the expected thresholds) with trial indices
/// from [`PILOT_TRIAL_OFFSET`], so pilots never share draws with a scan.
pub fn pilot_grid(config: &ExperimentConfig, pilot_trials: usize, points: usize) -> Result<Vec<f64>> {
    config.validate()?;
    let levels = &config.intensities;
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return input("pilot intensities must be strictly increasing");
    }
    if pilot_trials < 2 || points < 2 {
        return input("pilot needs at least two trials and two grid points");
    }
    let records = ordered_trials(pilot_trials, |t| nested_trial(config, PILOT_TRIAL_OFFSET + t as u64, None))?;
    // Midpoint of the grid interval holding each coverage time.
    let mut mids: Vec<f64> = records
        .iter()
        .map(|r| match r.verdicts.iter().position(|v| *v == VerdictStatus::Covered) {
            Some(0) => levels[0],
            Some(j) => 0.5 * (levels[j - 1] + levels[j]),
            None => f64::INFINITY,
        })
        .collect();
    mids.sort_by(f64::total_cmp);
    let lo = quantile(&mids, 0.03);
    let hi = quantile(&mids, 0.97);
    if !hi.is_finite() {
        return input("pilot grid top is below the coverage times of some pilot trials; extend the pilot grid");
    }
    let (lo, hi) = if hi > lo { (lo, hi) } else { (0.9 * lo, 1.1 * hi.max(1e-9)) };
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

fn nested_trial(config: &ExperimentConfig, t: u64, probes: Option<&ProbeNet>) -> Result<TrialRecord> {
    let levels = &config.intensities;
    let rho_max = *levels.last().expect("validated");
    let seed = config.seed(t);
    let x = sample_ppp(&config.torus, rho_max, &seed)?.with_query_radius(config.body.max_half_extent());
    let mut rng = seed.stream(SUBSTREAM_MARKS);
    let marks: Vec<f64> = (0..x.len()).map(|_| rho_max * rng.random::<f64>()).collect();
    let limits = AdaptiveLimits::new(config.cell_radius);
    let time = coverage_time_at_levels(&x, &marks, &config.body, &limits, levels)?;
    let verdicts = levels
        .iter()
        .map(|&rho| {
            if time.upper <= rho {
                VerdictStatus::Covered
            } else if time.lower > rho {
                VerdictStatus::Uncovered
            } else {
                VerdictStatus::Undetermined
            }
        })
        .collect();
    let point_counts = levels.iter().map(|&rho| marks.iter().filter(|&&m| m <= rho).count()).collect();
    Ok(TrialRecord {
        trial_index: t,
        point_counts,
        verdicts,
        coverage_time: Some((time.lower, time.upper)),
        cells_evaluated: time.cells_evaluated,
        unresolved_cells: time.unresolved_cells,
        multiplicity: probes.map(|net| marked_multiplicity(config, &x, &marks, net)),
    })
}

fn independent_trial(
    config: &ExperimentConfig,
    t: u64,
    net: Option<&ProbeNet>,
    probes: Option<&ProbeNet>,
) -> Result<TrialRecord> {
    let mut record = TrialRecord {
        trial_index: t,
        point_counts: Vec::new(),
        verdicts: Vec::new(),
        coverage_time: None,
        cells_evaluated: 0,
        unresolved_cells: 0,
        multiplicity: probes.map(|_| Vec::new()),
    };
    for (j, &rho) in config.intensities.iter().enumerate() {
        let seed = config.seed(((j as u64) << 32) | t);
        let x = sample_ppp(&config.torus, rho, &seed)?.with_query_radius(config.body.max_half_extent());
        let verdict = match net {
            Some(net) => certify_coverage(&x, &config.body, net)?,
            None => certify_coverage_adaptive(&x, &config.body, &AdaptiveLimits::new(config.cell_radius))?,
        };
        record.point_counts.push(x.len());
        record.verdicts.push(verdict.status);
        record.cells_evaluated += verdict.probes_evaluated;
        record.unresolved_cells += verdict.unresolved_cells;
        if let (Some(net), Some(m)) = (probes, record.multiplicity.as_mut()) {
            let zero = vec![0.0; x.len()];
            let b = marked_multiplicity_at(config, &x, &zero, net, &[0.0]);
            m.push(b[0]);
        }
    }
    Ok(record)
}

fn marked_multiplicity(config: &ExperimentConfig, x: &PointSet, marks: &[f64], net: &ProbeNet) -> Vec<(usize, usize)> {
    marked_multiplicity_at(config, x, marks, net, &config.intensities)
}

/// Per level, the largest count over probes of centers with mark at most the
/// level whose body contains the probe, and whose body expanded by the net
/// radius contains it.
fn marked_multiplicity_at(
    config: &ExperimentConfig,
    x: &PointSet,
    marks: &[f64],
    net: &ProbeNet,
    levels: &[f64],
) -> Vec<(usize, usize)> {
    let body = &config.body;
    let big = expanded_body(body, net.covering_radius());
    let extent = big.max_half_extent();
    let mut best = vec![(0usize, 0usize); levels.len()];
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for q in net.iter() {
        inner.clear();
        outer.clear();
        x.for_each_near(&q, extent, |i, d| {
            if big.member(d) {
                outer.push(marks[i]);
                if body.member(d) {
                    inner.push(marks[i]);
                }
            }
        });
        inner.sort_by(f64::total_cmp);
        outer.sort_by(f64::total_cmp);
        for (b, &rho) in best.iter_mut().zip(levels) {
            b.0 = b.0.max(inner.partition_point(|&m| m <= rho));
            b.1 = b.1.max(outer.partition_point(|&m| m <= rho));
        }
    }
    best
}

fn fractions(matrix: &[Vec<VerdictStatus>], rows: usize, take: &[usize], mode: Resolution) -> (Vec<f64>, Vec<f64>) {
    let mut values = Vec::with_capacity(rows);
    let mut weights = Vec::with_capacity(rows);
    for j in 0..rows {
        let (mut cov, mut unc, mut und) = (0usize, 0usize, 0usize);
        for &t in take {
            match matrix[t][j] {
                VerdictStatus::Covered => cov += 1,
                VerdictStatus::Uncovered => unc += 1,
                VerdictStatus::Undetermined => und += 1,
            }
        }
        let total = (cov + unc + und) as f64;
        let (v, w) = match mode {
            Resolution::Determined => {
                let det = (cov + unc) as f64;
                (if det > 0.0 { cov as f64 / det } else { 0.0 }, det)
            }
            Resolution::AllCovered => ((cov + und) as f64 / total, total),
            Resolution::AllUncovered => (cov as f64 / total, total),
        };
        values.push(v);
        weights.push(w);
    }
    (values, weights)
}

fn fit(levels: &[f64], matrix: &[Vec<VerdictStatus>], take: &[usize], mode: Resolution) -> (Vec<f64>, Crossing) {
    let (values, weights) = fractions(matrix, levels.len(), take, mode);
    let smooth = isotonic_nondecreasing(&values, &weights);
    let filled: Vec<f64> = smooth.iter().map(|v| if v.is_nan() { 0.0 } else { *v }).collect();
    let crossing = first_crossing(levels, &filled, 0.5);
    (filled, crossing)
}

fn summarize(
    config: &ExperimentConfig,
    trials: Vec<TrialRecord>,
    mult_radius: Option<f64>,
    mult_trials: usize,
) -> ScanTable {
    let levels = &config.intensities;
    let rows_n = levels.len();
    let count = trials.len();
    let matrix: Vec<Vec<VerdictStatus>> = trials.iter().map(|r| r.verdicts.clone()).collect();
    let all: Vec<usize> = (0..count).collect();
    let ratio = config.body.volume() / config.torus.volume();
    let density = |t: usize, j: usize| trials[t].point_counts[j] as f64 * ratio;

    let warn_rows: Vec<bool> = (0..rows_n)
        .map(|j| {
            let und = matrix.iter().filter(|v| v[j] == VerdictStatus::Undetermined).count();
            und as f64 > config.undetermined_cap * count as f64
        })
        .collect();
    let any_warning = warn_rows.iter().any(|&w| w);
    let modes: &[Resolution] = if any_warning {
        &[Resolution::Determined, Resolution::AllCovered, Resolution::AllUncovered]
    } else {
        &[Resolution::Determined]
    };

    let (smooth, crossing) = fit(levels, &matrix, &all, Resolution::Determined);

    // Bootstrap over trials: thresholds per resolution, fractions and densities per row.
    let resamples = config.bootstrap_resamples;
    let mut rng = config.seed(RUN_TRIAL).stream(SUBSTREAM_BOOTSTRAP);
    let mut thresholds: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); modes.len()];
    let mut misses = vec![0usize; modes.len()];
    let mut frac_boot: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); rows_n];
    let mut dens_boot: Vec<Vec<f64>> = vec![Vec::with_capacity(resamples); rows_n];
    let mut take = vec![0usize; count];
    for _ in 0..resamples {
        for slot in take.iter_mut() {
            *slot = rng.random_range(0..count);
        }
        for (k, &mode) in modes.iter().enumerate() {
            match fit(levels, &matrix, &take, mode).1 {
                Crossing::At(x) => thresholds[k].push(x),
                _ => misses[k] += 1,
            }
        }
        for j in 0..rows_n {
            let cov = take.iter().filter(|&&t| matrix[t][j] == VerdictStatus::Covered).count();
            frac_boot[j].push(cov as f64 / count as f64);
            dens_boot[j].push(take.iter().map(|&t| density(t, j)).sum::<f64>() / count as f64);
        }
    }
    let interval = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (quantile(v, 0.025), quantile(v, 0.975))
    };

    let mut rows = Vec::with_capacity(rows_n);
    for j in 0..rows_n {
        let covered = matrix.iter().filter(|v| v[j] == VerdictStatus::Covered).count();
        let uncovered = matrix.iter().filter(|v| v[j] == VerdictStatus::Uncovered).count();
        let undetermined = count - covered - uncovered;
        let dens: Vec<f64> = (0..count).map(|t| density(t, j)).collect();
        let mult: Vec<(usize, usize)> = trials
            .iter()
            .filter_map(|r| r.multiplicity.as_ref().map(|m| m[j]))
            .collect();
        let mean_of = |f: fn(&(usize, usize)) -> usize| {
            if mult.is_empty() {
                None
            } else {
                Some(mult.iter().map(|m| f(m) as f64).sum::<f64>() / mult.len() as f64)
            }
        };
        rows.push(ScanRow {
            intensity: levels[j],
            trials: count,
            covered,
            uncovered,
            undetermined,
            covered_fraction: covered as f64 / count as f64,
            fraction_ci: interval(&mut frac_boot[j]),
            smoothed_fraction: smooth[j],
            mean_density: mean_se(&dens).0,
            density_ci: interval(&mut dens_boot[j]),
            mean_mult_lower: mean_of(|m| m.0),
            mean_mult_upper: mean_of(|m| m.1),
            undetermined_warning: warn_rows[j],
        });
    }

    let mut warnings = Vec::new();
    for (j, &w) in warn_rows.iter().enumerate() {
        if w {
            warnings.push(format!(
                "undetermined fraction {:.4} at intensity {} exceeds cap {}; threshold interval brackets both resolutions",
                rows[j].undetermined as f64 / count as f64,
                levels[j],
                config.undetermined_cap
            ));
        }
    }
    let threshold = match crossing {
        Crossing::At(x) => Some(x),
        _ => None,
    };
    let extrapolated = threshold.is_none();
    if extrapolated {
        warnings.push(match crossing {
            Crossing::BelowGrid => "coverage fraction is at least 1/2 at the lowest intensity; threshold extrapolated below the grid".into(),
            _ => "coverage fraction stays below 1/2 on the grid; threshold extrapolated above the grid".into(),
        });
    }
    // A percentile interval needs crossings in at least 97.5% of resamples.
    let threshold_ci = if modes.iter().enumerate().all(|(k, _)| misses[k] as f64 <= 0.025 * resamples as f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in thresholds.iter_mut() {
            let (a, b) = interval(v);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Some((lo, hi))
    } else {
        warnings.push("threshold crossing missing in more than 2.5% of bootstrap resamples; no interval".into());
        None
    };
    let (first, last) = (levels[0], levels[rows_n - 1]);
    let bracketed = threshold.is_some() && threshold_ci.is_some_and(|(lo, hi)| lo >= first && hi <= last);
    let n = config.dim() as f64;
    let scale = config.body.volume() / (n * n.ln());
    let normalized = n > 1.0;
    ScanTable {
        rows,
        threshold,
        threshold_ci,
        extrapolated,
        bracketed,
        normalized_threshold: threshold.filter(|_| normalized).map(|x| x * scale),
        normalized_ci: threshold_ci.filter(|_| normalized).map(|(a, b)| (a * scale, b * scale)),
        coupling: config.coupling,
        multiplicity_net_radius: mult_radius,
        multiplicity_trials: mult_trials,
        warnings,
        trials,
    }
}

/// Difference `b − a` of two scan thresholds with a percentile bootstrap
/// interval, resampling the trials of each scan independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdGap {
    pub estimate: f64,
    pub ci: (f64, f64),
    /// Resample pairs in which either scan had no crossing.
    pub misses: usize,
}

/// `None` when either scan has no threshold or a crossing is missing in
/// more than 2.5% of resamples.
pub fn threshold_gap(a: &ScanTable, b: &ScanTable, resamples: usize, seed: &SeedSpec) -> Option<ThresholdGap> {
    let estimate = b.threshold? - a.threshold?;
    let parts = |s: &ScanTable| {
        let levels: Vec<f64> = s.rows.iter().map(|r| r.intensity).collect();
        let matrix: Vec<Vec<VerdictStatus>> = s.trials.iter().map(|r| r.verdicts.clone()).collect();
        (levels, matrix)
    };
    let (la, ma) = parts(a);
    let (lb, mb) = parts(b);
    if ma.is_empty() || mb.is_empty() || resamples == 0 {
        return None;
    }
    let mut rng = seed.stream(SUBSTREAM_BOOTSTRAP);
    let mut draw = |count: usize| -> Vec<usize> { (0..count).map(|_| rng.random_range(0..count)).collect() };
    let mut gaps = Vec::with_capacity(resamples);
    let mut misses = 0;
    for _ in 0..resamples {
        let ta = draw(ma.len());
        let tb = draw(mb.len());
        match (fit(&la, &ma, &ta, Resolution::Determined).1, fit(&lb, &mb, &tb, Resolution::Determined).1) {
            (Crossing::At(x), Crossing::At(y)) => gaps.push(y - x),
            _ => misses += 1,
        }
    }
    if misses as f64 > 0.025 * resamples as f64 {
        return None;
    }
    gaps.sort_by(f64::total_cmp);
    Some(ThresholdGap {
        estimate,
        ci: (quantile(&gaps, 0.025), quantile(&gaps, 0.975)),
        misses,
    })
}
