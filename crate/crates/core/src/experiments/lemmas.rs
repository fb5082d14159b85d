//! Ledger of non-asymptotic inequalities, each checked on an instance grid.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use super::{ExperimentConfig, RUN_TRIAL};
use crate::analytic::{
    ln_unit_ball_volume, nu_asymptotic, nu_exact, poisson_lower_tail, poisson_tail_at_least, poisson_tail_at_most,
    poisson_upper_tail,
};
use crate::bodies::{
    ball_overlap_volume, ball_symmetric_difference_bound, cube_overlap_volume, slab_tail_volume_mc,
    small_overlap_bound, Body, SlabSpec,
};
use crate::error::Result;

/// Relative slack absorbing floating-point rounding in exact comparisons.
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRow {
    pub name: String,
    pub instances: usize,
    /// Smallest `bound − value` over the grid (MC rows include the 3σ slack).
    pub worst_margin: f64,
    pub passed: bool,
    /// Instance attaining the worst margin.
    pub witness: String,
    pub monte_carlo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaLedger {
    pub rows: Vec<LemmaRow>,
}

impl LemmaLedger {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    /// One tab-separated line per inequality after a header line.
    pub fn render(&self) -> String {
        let mut out = String::from("# name\tinstances\tworst_margin\tresult\tkind\twitness\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{:.6e}\t{}\t{}\t{}\n",
                r.name,
                r.instances,
                r.worst_margin,
                if r.passed { "PASS" } else { "FAIL" },
                if r.monte_carlo { "mc-3sigma" } else { "exact" },
                r.witness
            ));
        }
        out
    }
}

/// Accumulates `bound − value` margins of one inequality.
struct Check {
    name: String,
    instances: usize,
    worst: f64,
    witness: String,
    passed: bool,
    monte_carlo: bool,
}

impl Check {
    fn new(name: &str, monte_carlo: bool) -> Self {
        Check {
            name: name.into(),
            instances: 0,
            worst: f64::INFINITY,
            witness: String::new(),
            passed: true,
            monte_carlo,
        }
    }

    /// Records `value <= bound` up to `slack`.
    fn le(&mut self, value: f64, bound: f64, slack: f64, witness: impl FnOnce() -> String) {
        self.instances += 1;
        let margin = bound - value;
        let ok = value <= bound + slack;
        if margin < self.worst || (!ok && self.passed) {
            self.worst = margin.min(self.worst);
            self.witness = witness();
        }
        self.passed &= ok;
    }

    fn exact(&mut self, value: f64, bound: f64, witness: impl FnOnce() -> String) {
        let slack = ROUNDING * value.abs().max(bound.abs());
        self.le(value, bound, slack, witness);
    }

    fn finish(self) -> LemmaRow {
        LemmaRow {
            name: self.name,
            instances: self.instances,
            worst_margin: self.worst,
            passed: self.passed && self.instances > 0,
            witness: self.witness,
            monte_carlo: self.monte_carlo,
        }
    }
}

fn unit(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(","))
}

/// Runs every inequality of the ledger. Sampled instances and Monte-Carlo
/// estimates draw from the run-level seed of `config`; `mc_samples` sets the
/// Monte-Carlo sample count.
pub fn run_lemma_suite(config: &ExperimentConfig) -> Result<LemmaLedger> {
    let seed = config.seed(RUN_TRIAL);
    let mut rows = Vec::new();

    // Poisson tails against pmf-summed tails.
    let mut upper = Check::new("poisson_upper_tail", false);
    let mut lower = Check::new("poisson_lower_tail", false);
    for &lambda in &[5.0, 20.0] {
        for &sigma in &[0.5, 1.0] {
            let exact = poisson_tail_at_least(lambda, (1.0 + sigma) * lambda);
            upper.exact(exact, poisson_upper_tail(lambda, sigma)?, || format!("lambda={lambda} sigma={sigma}"));
            let exact = poisson_tail_at_most(lambda, (1.0 - sigma) * lambda);
            lower.exact(exact, poisson_lower_tail(lambda, sigma)?, || format!("lambda={lambda} sigma={sigma}"));
        }
    }
    rows.push(upper.finish());
    rows.push(lower.finish());

    // Symmetric difference of two nearby balls.
    let mut sym = Check::new("ball_symmetric_difference", false);
    for &n in &[10usize, 20] {
        let r = 1.0;
        let d = r * (n as f64).powf(-0.6);
        let full = (ln_unit_ball_volume(n) + n as f64 * f64::ln(r)).exp();
        let lhs = full - ball_overlap_volume(n, r, d)?;
        sym.exact(lhs, ball_symmetric_difference_bound(n, r, d)?, || format!("n={n} r={r} d={d:.6}"));
    }
    rows.push(sym.finish());

    // Small overlap of the unit cube at offsets of norm at least 4L.
    let mut rng = seed.stream(10);
    let mut small = Check::new("cube_small_overlap", false);
    let l = 1.0 / 12f64.sqrt();
    for n in 2..=8usize {
        let top = (4.0 * l).max((n as f64).sqrt()) + 0.5;
        for _ in 0..100 {
            let u = unit(&mut rng, n);
            let norm = rng.random_range(4.0 * l..top);
            let x: Vec<f64> = u.iter().map(|c| c * norm).collect();
            small.exact(cube_overlap_volume(1.0, &x), small_overlap_bound(l, norm)?, || {
                format!("n={n} x={}", fmt(&x))
            });
        }
    }
    rows.push(small.finish());

    // Slab tails of the unit cube at n = 6, against Monte-Carlo estimates.
    let cube = Body::cube(6, 1.0)?;
    let mut directions = vec![
        {
            let mut e = vec![0.0; 6];
            e[0] = 1.0;
            e
        },
        vec![1.0 / 6f64.sqrt(); 6],
    ];
    for _ in 0..3 {
        directions.push(unit(&mut rng, 6));
    }
    let mut quarter = Check::new("slab_markov_quarter", true);
    let mut borell = Check::new("slab_borell_tail", true);
    for (k, dir) in directions.iter().enumerate() {
        let est = slab_tail_volume_mc(&cube, &SlabSpec::new(dir.clone(), 2.0 * l)?, config.mc_samples, seed.stream_seed(20 + k as u64))?;
        quarter.le(est.estimate, 0.25, 3.0 * est.std_error, || format!("direction={}", fmt(dir)));
        for t in 1..=3 {
            let tf = t as f64;
            let slab = SlabSpec::new(dir.clone(), 2.0 * tf * l)?;
            let est = slab_tail_volume_mc(&cube, &slab, config.mc_samples, seed.stream_seed(40 + 4 * k as u64 + t))?;
            let bound = 3f64.sqrt() / 4.0 * 3f64.powf(-tf / 2.0);
            borell.le(est.estimate, bound, 3.0 * est.std_error, || format!("t={t} direction={}", fmt(dir)));
        }
    }
    rows.push(quarter.finish());
    rows.push(borell.finish());

    // Opposite slabs S and S + x are disjoint for S = S_x(|x|/2).
    let mut disjoint = Check::new("slab_translate_disjoint", false);
    for _ in 0..10 {
        let n = rng.random_range(2..=8usize);
        let u = unit(&mut rng, n);
        let norm = rng.random_range(0.1..3.0);
        let x: Vec<f64> = u.iter().map(|c| c * norm).collect();
        let slab = SlabSpec::new(x.clone(), 0.5 * norm)?;
        let mut both = 0usize;
        for _ in 0..10_000 {
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let shifted: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            if slab.contains(&y) && slab.contains(&shifted) {
                both += 1;
            }
        }
        disjoint.exact(both as f64, 0.0, || format!("n={n} x={}", fmt(&x)));
    }
    rows.push(disjoint.finish());

    // AM-GM chain for cube overlaps at l1 distance at least 2 ln n.
    let n = 9usize;
    let nf = n as f64;
    let floor = 2.0 * nf.ln();
    let mut amgm = [
        Check::new("cube_amgm_product", false),
        Check::new("cube_amgm_mean", false),
        Check::new("cube_amgm_floor", false),
    ];
    let fixed = (1.0 - floor / nf).max(0.0).powi(n as i32);
    for _ in 0..1000 {
        let s = rng.random_range(floor..floor + 3.0);
        let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = w.iter().sum();
        let x: Vec<f64> = w
            .iter()
            .map(|v| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * v * s / total
            })
            .collect();
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let product = cube_overlap_volume(1.0, &x);
        let mean = (1.0 - l1 / nf).max(0.0).powi(n as i32);
        amgm[0].exact(product, mean, || format!("x={}", fmt(&x)));
        amgm[1].exact(mean, fixed, || format!("x={}", fmt(&x)));
    }
    amgm[2].exact(fixed, 1.0 / (nf * nf), || format!("n={n}"));
    rows.extend(amgm.into_iter().map(Check::finish));

    // Unit-ball volumes: recursion and the Stirling estimate.
    let mut recursion = Check::new("nu_recursion", false);
    for n in 3..=100usize {
        let lhs = nu_exact(n)?;
        let rhs = 2.0 * std::f64::consts::PI / n as f64 * nu_exact(n - 2)?;
        let residual = ((lhs - rhs) / rhs).abs();
        recursion.le(residual, 1e-12, 0.0, || format!("n={n}"));
    }
    rows.push(recursion.finish());
    let mut stirling = Check::new("nu_stirling_ratio", false);
    let mut previous = f64::INFINITY;
    for &n in &[10usize, 50, 100] {
        let gap = (nu_asymptotic(n)? / nu_exact(n)? - 1.0).abs();
        stirling.le(gap, 0.05, 0.0, || format!("n={n}"));
        stirling.le(gap, previous, -f64::MIN_POSITIVE, || format!("n={n} against its predecessor"));
        previous = gap;
    }
    rows.push(stirling.finish());

    // e^x / (1+x)^{1+x} <= e^{-x²/10} on [0, 1].
    let mut crude = Check::new("poisson_crude_exponent", false);
    for k in 0..=1000 {
        let x = k as f64 / 1000.0;
        let lhs = x - (1.0 + x) * x.ln_1p();
        crude.exact(lhs, -x * x / 10.0, || format!("x={x}"));
    }
    rows.push(crude.finish());

    Ok(LemmaLedger { rows })
}
