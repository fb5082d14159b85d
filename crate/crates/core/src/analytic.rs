//! Closed-form quantities: the multiplicity constants ξ and ξ₀, the
//! saturation exponent β(δ), unit-ball volumes, Poisson tail bounds, the
//! theorem intensities and the second-moment inequality.
//!
//! Everything involving Γ or `x^λ` is evaluated in log space. Asymptotic
//! formulas are finite-n evaluations with their o(1) terms dropped; the
//! error of those evaluations is unquantified.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::bodies::Body;
use crate::error::{input, Result};

/// Label attached to every asymptotic evaluation.
pub const ASYMPTOTIC_LABEL: &str = "asymptotic, error unquantified";

/// ln Γ(n + 1).
pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// ln ν_k for k ≥ 0, with ν_0 = 1.
pub fn ln_unit_ball_volume(k: usize) -> f64 {
    let half = 0.5 * k as f64;
    half * std::f64::consts::PI.ln() - ln_gamma(half + 1.0)
}

/// ν_n = π^{n/2} / Γ(n/2 + 1).
pub fn nu_exact(n: usize) -> Result<f64> {
    if n == 0 {
        return input("nu_exact needs n >= 1");
    }
    Ok(ln_unit_ball_volume(n).exp())
}

/// Stirling form `(2πe)^{n/2} / sqrt(πn) · n^{-n/2}` of ν_n.
pub fn nu_asymptotic(n: usize) -> Result<f64> {
    if n == 0 {
        return input("nu_asymptotic needs n >= 1");
    }
    let n = n as f64;
    let ln = 0.5 * n * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()
        - 0.5 * (std::f64::consts::PI * n).ln()
        - 0.5 * n * n.ln();
    Ok(ln.exp())
}

/// A root with its defining-equation residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: f64,
    pub residual: f64,
}

fn bracketed_root<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, tolerance: f64) -> Root
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let f_lo = f(lo);
    let f_hi = f(hi);
    assert!(f_lo.signum() != f_hi.signum(), "bracket [{lo}, {hi}] has no sign change");
    let increasing = f_hi > f_lo;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            break;
        }
        if (fx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / df(x);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() && fx.abs() <= tolerance {
            x = next;
            break;
        }
        x = next;
    }
    Root {
        value: x,
        residual: f(x).abs(),
    }
}

fn check_tolerance(tolerance: f64) -> Result<()> {
    if tolerance.is_finite() && tolerance >= 1e-14 {
        Ok(())
    } else {
        input(format!("root tolerance must be at least 1e-14, got {tolerance}"))
    }
}

/// ξ ≈ 1.79556, the positive root of `ln(2x/e) = 1/(2x)`, on the bracket [1, 3].
pub fn solve_xi(tolerance: f64) -> Result<Root> {
    check_tolerance(tolerance)?;
    Ok(bracketed_root(
        |x| (2.0 * x).ln() - 1.0 - 0.5 / x,
        |x| 1.0 / x + 0.5 / (x * x),
        1.0,
        3.0,
        tolerance,
    ))
}

/// ξ₀ ≈ 2.59112, the root of `e^x / (1+x)^{1+x} = e^{-2}` in log form
/// `x - (1+x) ln(1+x) + 2 = 0`, on the bracket [2, 3].
pub fn solve_xi0(tolerance: f64) -> Result<Root> {
    check_tolerance(tolerance)?;
    Ok(bracketed_root(
        |x| x - (1.0 + x) * x.ln_1p() + 2.0,
        |x| -x.ln_1p(),
        2.0,
        3.0,
        tolerance,
    ))
}

/// Log of the left side of the β condition minus the log of its right side:
/// `(1 + δ/2)(β - 1 - β ln β) + 1`, nonpositive exactly when β is admissible.
pub fn beta_condition(delta: f64, beta: f64) -> f64 {
    let beta_ln_beta = if beta == 0.0 { 0.0 } else { beta * beta.ln() };
    (1.0 + 0.5 * delta) * (beta - 1.0 - beta_ln_beta) + 1.0
}

/// Largest β ∈ (0, 1) with `(e^{β-1} / β^β)^{1+δ/2} <= e^{-1}`.
///
/// The condition is monotone in β on (0, 1), so bisection keeps the
/// admissible end of the bracket.
pub fn choose_beta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return input(format!("choose_beta needs 0 < delta < 1, got {delta}"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_condition(delta, mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Resolved constants of the upper-bound construction.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyticConstants {
    pub xi: Root,
    pub xi0: Root,
    pub xi0_identity_gap: f64,
    pub delta: f64,
    pub beta: f64,
    pub beta_residual: f64,
    pub tolerance: f64,
}

impl AnalyticConstants {
    pub fn compute(tolerance: f64, delta: f64) -> Result<Self> {
        let xi = solve_xi(tolerance)?;
        let xi0 = solve_xi0(tolerance)?;
        let beta = choose_beta(delta)?;
        Ok(AnalyticConstants {
            xi0_identity_gap: (xi0.value - (2.0 * xi.value - 1.0)).abs(),
            xi,
            xi0,
            delta,
            beta,
            beta_residual: beta_condition(delta, beta),
            tolerance,
        })
    }
}

fn tail_args(lambda: f64, sigma: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return input(format!("Poisson mean must be positive, got {lambda}"));
    }
    if !sigma.is_finite() {
        return input("sigma must be finite");
    }
    Ok(())
}

/// Bound `(e^σ / (1+σ)^{1+σ})^λ` on `P[X >= (1+σ)λ]`, for σ >= 0.
pub fn poisson_upper_tail(lambda: f64, sigma: f64) -> Result<f64> {
    tail_args(lambda, sigma)?;
    if sigma < 0.0 {
        return input(format!("upper-tail sigma must be nonnegative, got {sigma}"));
    }
    Ok((lambda * (sigma - (1.0 + sigma) * sigma.ln_1p())).exp())
}

/// Bound `(e^{-σ} / (1-σ)^{1-σ})^λ` on `P[X <= (1-σ)λ]`, for σ ∈ (0, 1].
///
/// σ = 1 is the continuous limit `e^{-λ}`, which equals `P[X = 0]`.
pub fn poisson_lower_tail(lambda: f64, sigma: f64) -> Result<f64> {
    tail_args(lambda, sigma)?;
    if !(sigma > 0.0 && sigma <= 1.0) {
        return input(format!("lower-tail sigma must lie in (0, 1], got {sigma}"));
    }
    let rest = 1.0 - sigma;
    let rest_ln = if rest == 0.0 { 0.0 } else { rest * rest.ln() };
    Ok((lambda * (-sigma - rest_ln)).exp())
}

pub fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)
}

pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    poisson_ln_pmf(lambda, k).exp()
}

/// `P[X >= threshold]` by direct summation of the pmf from the threshold up.
pub fn poisson_tail_at_least(lambda: f64, threshold: f64) -> f64 {
    let start = threshold.max(0.0).ceil() as u64;
    let mut total = 0.0;
    let mut k = start;
    loop {
        let term = poisson_pmf(lambda, k);
        total += term;
        if (k as f64) > lambda && term <= total * 1e-18 {
            return total;
        }
        k += 1;
    }
}

/// `P[X <= threshold]` by direct summation of the pmf.
pub fn poisson_tail_at_most(lambda: f64, threshold: f64) -> f64 {
    if threshold < 0.0 {
        return 0.0;
    }
    let end = threshold.floor() as u64;
    (0..=end).map(|k| poisson_pmf(lambda, k)).sum()
}

/// Inputs of [`intensity_formulas`]. Natural logarithms throughout.
#[derive(Debug, Clone, Copy)]
pub struct IntensityInputs {
    pub n: usize,
    pub delta: f64,
    pub body_volume: f64,
    /// `|P|` for the isotropic-body intensity; omitted rows are skipped.
    pub packing_cardinality: Option<f64>,
    pub omega: f64,
}

/// The four theorem intensities at finite n.
#[derive(Debug, Clone, Serialize)]
pub struct IntensityFormulas {
    /// `(1/2 + δ) n ln n / ν_n` (Euclidean ball, upper bound).
    pub ball_upper: f64,
    /// `(n ln n / 2 - (1+δ) n ln ln n) / vol(K)` (any body, lower bound).
    pub general_lower: f64,
    /// `n ln n - (1+δ) n ln ln n` (unit cube, lower bound).
    pub cube_lower: f64,
    /// `ln|P| - n(ln ln ln|P| + ω)` (isotropic body, second-moment form).
    pub isotropic_lower: Option<f64>,
    pub label: &'static str,
}

pub fn intensity_formulas(inputs: &IntensityInputs) -> Result<IntensityFormulas> {
    let IntensityInputs {
        n,
        delta,
        body_volume,
        packing_cardinality,
        omega,
    } = *inputs;
    if n < 3 {
        return input(format!("intensity formulas need n >= 3 so that ln ln n > 0, got n = {n}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return input(format!(
            "ball upper-bound intensity requires 0 < delta < 1 (hypothesis of the ball covering theorem), got {delta}"
        ));
    }
    if !(body_volume.is_finite() && body_volume > 0.0) {
        return input(format!("body volume must be positive, got {body_volume}"));
    }
    let nf = n as f64;
    let nln = nf * nf.ln();
    let nlnln = nf * nf.ln().ln();
    let isotropic_lower = match packing_cardinality {
        None => None,
        Some(p) => {
            if !(p > std::f64::consts::E.exp()) {
                return input(format!(
                    "isotropic lower-bound intensity needs |P| > e^e so that ln ln ln |P| is defined, got {p}"
                ));
            }
            Some(p.ln() - nf * (p.ln().ln().ln() + omega))
        }
    };
    Ok(IntensityFormulas {
        ball_upper: (0.5 + delta) * nln / nu_exact(n)?,
        general_lower: (0.5 * nln - (1.0 + delta) * nlnln) / body_volume,
        cube_lower: nln - (1.0 + delta) * nlnln,
        isotropic_lower,
        label: ASYMPTOTIC_LABEL,
    })
}

/// Volume bounds `(vol(T)/vol(2K), vol(T)/vol(K/2))` on the size of a maximal packing.
///
/// Valid for any maximal packing by translates of a symmetric convex `K'`
/// with `K/2 ⊆ K' ⊆ K`: the packing bound uses `K' ⊇ K/2` and the covering
/// bound from maximality uses `2K' ⊆ 2K`.
pub fn packing_cardinality_bounds(torus_volume: f64, body: &Body) -> Result<(f64, f64)> {
    if !(torus_volume.is_finite() && torus_volume > 0.0) {
        return input(format!("torus volume must be positive, got {torus_volume}"));
    }
    let ln_t = torus_volume.ln();
    let shift = body.dim() as f64 * 2f64.ln();
    let ln_k = body.ln_volume();
    Ok(((ln_t - ln_k - shift).exp(), (ln_t - ln_k + shift).exp()))
}

/// `Var[X] / E[X]^2`, an upper bound on `P[X = 0]` for integer `X >= 0`.
pub fn second_moment_bound(expectation: f64, variance: f64) -> Result<f64> {
    if !(expectation > 0.0) {
        return input(format!("second-moment bound needs E[X] > 0, got {expectation}"));
    }
    if !(variance >= 0.0) {
        return input(format!("variance must be nonnegative, got {variance}"));
    }
    Ok(variance / (expectation * expectation))
}

/// Smallest n at which the finite-n steps of the saturation estimate hold:
/// `(1/2+δ)(1-ε)^n >= 1/2` and `(2/(2+δ))(1/2+δ)(1-ε)^n >= 1/2 + δ/3`
/// with `ε = 1/(n ln n)`. Both sides are monotone in n, so the first hit is final.
pub fn saturation_chain_min_n(delta: f64, n_max: usize) -> Option<usize> {
    (2..=n_max).find(|&n| {
        let nf = n as f64;
        let shrink = (nf * (-1.0 / (nf * nf.ln())).ln_1p()).exp();
        let a = (0.5 + delta) * shrink;
        a >= 0.5 && 2.0 / (2.0 + delta) * a >= 0.5 + delta / 3.0
    })
}

/// Smallest n with `(1/2+δ)(1+ε)^n <= 1/2 + 2δ`, `ε = 1/(n ln n)`.
pub fn multiplicity_chain_min_n(delta: f64, n_max: usize) -> Option<usize> {
    (2..=n_max).find(|&n| {
        let nf = n as f64;
        let grow = (nf * (1.0 / (nf * nf.ln())).ln_1p()).exp();
        (0.5 + delta) * grow <= 0.5 + 2.0 * delta
    })
}
