//! Seeded random streams, Poisson counts, Poisson point processes and
//! fixed-count uniform configurations on tori.
//!
//! Every random draw comes from a ChaCha8 stream seeded by
//! [`SeedSpec::stream_seed`]. Substream 0 draws Poisson counts and substream 1
//! draws point coordinates, so a fixed-count sample of `N` points is a prefix
//! of any larger fixed-count sample with the same seed, and of the Poisson
//! sample whenever its count is at least `N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{input, Error, Result};
use crate::pointset::PointSet;
use crate::torus::Torus;

/// Default cap on expected or requested point counts.
pub const DEFAULT_POINT_CAP: f64 = 1e8;

pub const SUBSTREAM_COUNT: u64 = 0;
pub const SUBSTREAM_COORDS: u64 = 1;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const MIX_1: u64 = 0xbf58_476d_1ce4_e5b9;
const MIX_2: u64 = 0x94d0_49bb_1331_11eb;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
    z ^ (z >> 31)
}

/// Identifies the random stream of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        SeedSpec {
            master_seed,
            trial_index,
        }
    }

    pub fn with_trial(self, trial_index: u64) -> Self {
        SeedSpec {
            trial_index,
            ..self
        }
    }

    /// `mix64(mix64(mix64(master + γ) ^ (trial + γ)) ^ (substream + γ))`
    /// with `γ = 0x9e3779b97f4a7c15` and wrapping arithmetic.
    pub fn stream_seed(&self, substream: u64) -> u64 {
        let h = mix64(self.master_seed.wrapping_add(GOLDEN_GAMMA));
        let h = mix64(h ^ self.trial_index.wrapping_add(GOLDEN_GAMMA));
        mix64(h ^ substream.wrapping_add(GOLDEN_GAMMA))
    }

    pub fn stream(&self, substream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.stream_seed(substream))
    }
}

/// Poisson(λ) draw: sequential inversion below λ = 30, PTRS transformed
/// rejection (Hörmann) from 30 on.
pub fn poisson_from_rng<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return input(format!("Poisson mean must be finite and nonnegative, got {lambda}"));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    if lambda < 30.0 {
        return Ok(poisson_inversion(lambda, rng));
    }
    Ok(poisson_ptrs(lambda, rng))
}

fn poisson_inversion<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        let next = cdf + p;
        if next == cdf {
            break;
        }
        cdf = next;
    }
    k
}

fn poisson_ptrs<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_gamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Poisson(λ) draw from substream 0 of `seed`.
pub fn sample_poisson_count(lambda: f64, seed: &SeedSpec) -> Result<u64> {
    poisson_from_rng(lambda, &mut seed.stream(SUBSTREAM_COUNT))
}

/// Poisson point process of the given intensity on `torus`.
pub fn sample_ppp(torus: &Torus, intensity: f64, seed: &SeedSpec) -> Result<PointSet> {
    sample_ppp_capped(torus, intensity, seed, DEFAULT_POINT_CAP)
}

pub fn sample_ppp_capped(torus: &Torus, intensity: f64, seed: &SeedSpec, cap: f64) -> Result<PointSet> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return input(format!("intensity must be finite and nonnegative, got {intensity}"));
    }
    let mean = intensity * torus.volume();
    if mean > cap {
        return Err(Error::Resource {
            what: "expected Poisson point count".into(),
            required: mean,
            cap,
        });
    }
    let count = sample_poisson_count(mean, seed)?;
    Ok(uniform_points(torus, count as usize, seed))
}

/// `count` independent uniform points on `torus`.
pub fn sample_fixed_count(torus: &Torus, count: usize, seed: &SeedSpec) -> Result<PointSet> {
    sample_fixed_count_capped(torus, count, seed, DEFAULT_POINT_CAP)
}

pub fn sample_fixed_count_capped(torus: &Torus, count: usize, seed: &SeedSpec, cap: f64) -> Result<PointSet> {
    if count as f64 > cap {
        return Err(Error::Resource {
            what: "fixed point count".into(),
            required: count as f64,
            cap,
        });
    }
    Ok(uniform_points(torus, count, seed))
}

fn uniform_points(torus: &Torus, count: usize, seed: &SeedSpec) -> PointSet {
    let mut rng = seed.stream(SUBSTREAM_COORDS);
    let n = torus.dim();
    let mut coords = Vec::with_capacity(count * n);
    for _ in 0..count {
        for &c in torus.sides() {
            let x = c * rng.random::<f64>();
            coords.push(if x < c { x } else { 0.0 });
        }
    }
    PointSet::from_reduced(torus.clone(), coords)
}
