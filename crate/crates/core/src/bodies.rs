//! Closed-form convex bodies centred at the origin.
//!
//! Every supported body is centrally symmetric, so `K - K = 2K` and the
//! overlap `vol(K ∩ (K + x))` is an even function of `x`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{input, Error, Result};
use crate::quadrature;
use crate::sampling::SeedSpec;
use crate::torus::Norm;

/// Shape parameters of a [`Body`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { radius: f64 },
    Cube { side: f64 },
    CrossPolytope { l1_radius: f64 },
    Ellipsoid { semi_axes: Vec<f64> },
}

/// A convex body in `R^n`, closed and centred at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    dim: usize,
    #[serde(flatten)]
    shape: Shape,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        input(format!("{name} must be a positive finite number, got {v}"))
    }
}

impl Body {
    pub fn new(dim: usize, shape: Shape) -> Result<Self> {
        if dim == 0 {
            return input("body dimension must be at least 1");
        }
        match &shape {
            Shape::Ball { radius } => positive("radius", *radius)?,
            Shape::Cube { side } => positive("side", *side)?,
            Shape::CrossPolytope { l1_radius } => positive("l1_radius", *l1_radius)?,
            Shape::Ellipsoid { semi_axes } => {
                if semi_axes.len() != dim {
                    return input(format!(
                        "ellipsoid needs {dim} semi-axes, got {}",
                        semi_axes.len()
                    ));
                }
                for &a in semi_axes {
                    positive("semi_axes entry", a)?;
                }
            }
        }
        Ok(Body { dim, shape })
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, Shape::Ball { radius })
    }

    pub fn cube(dim: usize, side: f64) -> Result<Self> {
        Self::new(dim, Shape::Cube { side })
    }

    pub fn cross_polytope(dim: usize, l1_radius: f64) -> Result<Self> {
        Self::new(dim, Shape::CrossPolytope { l1_radius })
    }

    pub fn ellipsoid(semi_axes: Vec<f64>) -> Result<Self> {
        Self::new(semi_axes.len(), Shape::Ellipsoid { semi_axes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Ball { .. } => "ball",
            Shape::Cube { .. } => "cube",
            Shape::CrossPolytope { .. } => "cross_polytope",
            Shape::Ellipsoid { .. } => "ellipsoid",
        }
    }

    /// Membership of `point` in the closed body.
    pub fn contains(&self, point: &[f64]) -> Result<bool> {
        self.check_dim(point)?;
        Ok(self.member(point))
    }

    pub(crate) fn check_dim(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return input(format!(
                "point has dimension {}, body has dimension {}",
                point.len(),
                self.dim
            ));
        }
        Ok(())
    }

    /// Membership without the dimension check.
    pub(crate) fn member(&self, v: &[f64]) -> bool {
        self.member_with(|i| v[i])
    }

    /// Membership of the point with coordinates `coord(0), ..., coord(n-1)`.
    fn member_with(&self, coord: impl Fn(usize) -> f64) -> bool {
        let n = self.dim;
        match &self.shape {
            Shape::Ball { radius } => (0..n).map(|i| coord(i) * coord(i)).sum::<f64>() <= radius * radius,
            Shape::Cube { side } => {
                let h = 0.5 * side;
                (0..n).all(|i| coord(i).abs() <= h)
            }
            Shape::CrossPolytope { l1_radius } => (0..n).map(|i| coord(i).abs()).sum::<f64>() <= *l1_radius,
            Shape::Ellipsoid { semi_axes } => {
                (0..n).map(|i| (coord(i) / semi_axes[i]).powi(2)).sum::<f64>() <= 1.0
            }
        }
    }

    /// Membership in the form used by the refinement loops.
    pub(crate) fn gauge(&self) -> Gauge {
        match &self.shape {
            Shape::Ball { radius } => Gauge::SumSquares(SumSquares(radius * radius)),
            Shape::Cube { side } => Gauge::MaxAbs(MaxAbs(0.5 * side)),
            Shape::CrossPolytope { l1_radius } => Gauge::SumAbs(SumAbs(*l1_radius)),
            Shape::Ellipsoid { semi_axes } => Gauge::ScaledSquares(ScaledSquares(semi_axes.iter().map(|a| 1.0 / a).collect())),
        }
    }

    /// Whether the box `v + ∏[-a_i, a_i]` lies in the body (exact for the
    /// supported bodies, which are symmetric under coordinate sign changes).
    pub fn contains_box(&self, v: &[f64], half_widths: &[f64]) -> bool {
        self.member_with(|i| v[i].abs() + half_widths[i])
    }

    /// Whether the box `v + ∏[-a_i, a_i]` meets the body (exact, as above).
    pub fn meets_box(&self, v: &[f64], half_widths: &[f64]) -> bool {
        self.member_with(|i| (v[i].abs() - half_widths[i]).max(0.0))
    }

    /// Natural log of the Lebesgue volume.
    pub fn ln_volume(&self) -> f64 {
        let n = self.dim as f64;
        match &self.shape {
            Shape::Ball { radius } => analytic::ln_unit_ball_volume(self.dim) + n * radius.ln(),
            Shape::Cube { side } => n * side.ln(),
            Shape::CrossPolytope { l1_radius } => {
                n * (2.0 * l1_radius).ln() - analytic::ln_factorial(self.dim)
            }
            Shape::Ellipsoid { semi_axes } => {
                analytic::ln_unit_ball_volume(self.dim) + semi_axes.iter().map(|a| a.ln()).sum::<f64>()
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Cube { side } => side.powi(self.dim as i32),
            _ => self.ln_volume().exp(),
        }
    }

    /// Uniform rescaling about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Body> {
        positive("scale factor", factor)?;
        let shape = match &self.shape {
            Shape::Ball { radius } => Shape::Ball { radius: radius * factor },
            Shape::Cube { side } => Shape::Cube { side: side * factor },
            Shape::CrossPolytope { l1_radius } => Shape::CrossPolytope {
                l1_radius: l1_radius * factor,
            },
            Shape::Ellipsoid { semi_axes } => Shape::Ellipsoid {
                semi_axes: semi_axes.iter().map(|a| a * factor).collect(),
            },
        };
        Body::new(self.dim, shape)
    }

    /// The same body rescaled to volume one.
    pub fn with_unit_volume(&self) -> Body {
        let factor = (-self.ln_volume() / self.dim as f64).exp();
        self.scaled(factor).expect("positive factor")
    }

    /// `K - K`, which is `2K` for every supported variant.
    pub fn difference_body(&self) -> Body {
        self.scaled(2.0).expect("positive factor")
    }

    /// Largest Euclidean norm of a point of the body.
    pub fn circumradius(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => *radius,
            Shape::Cube { side } => 0.5 * side * (self.dim as f64).sqrt(),
            Shape::CrossPolytope { l1_radius } => *l1_radius,
            Shape::Ellipsoid { semi_axes } => semi_axes.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Largest Euclidean ball centred at the origin contained in the body.
    pub fn inradius(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => *radius,
            Shape::Cube { side } => 0.5 * side,
            Shape::CrossPolytope { l1_radius } => l1_radius / (self.dim as f64).sqrt(),
            Shape::Ellipsoid { semi_axes } => semi_axes.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    /// Half-width of the axis-aligned bounding box along `axis`.
    pub fn half_extent(&self, axis: usize) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => *radius,
            Shape::Cube { side } => 0.5 * side,
            Shape::CrossPolytope { l1_radius } => *l1_radius,
            Shape::Ellipsoid { semi_axes } => semi_axes[axis],
        }
    }

    pub fn max_half_extent(&self) -> f64 {
        (0..self.dim).map(|i| self.half_extent(i)).fold(0.0, f64::max)
    }

    /// Norm in which probe nets certify this body: ℓ2 for round bodies, ℓ∞ otherwise.
    pub fn net_norm(&self) -> Norm {
        match self.shape {
            Shape::Ball { .. } | Shape::Ellipsoid { .. } => Norm::L2,
            Shape::Cube { .. } | Shape::CrossPolytope { .. } => Norm::LInf,
        }
    }

    /// Certificate function for coverage in the body's [`net_norm`](Self::net_norm).
    ///
    /// * `margin(v) >= 0` iff `v` lies in the body;
    /// * `margin(v) >= t >= 0` implies the net-norm ball of radius `t` about `v` lies in the body;
    /// * `margin` is 1-Lipschitz in the net norm.
    ///
    /// For balls, cubes and cross-polytopes this reproduces the shrink/expand
    /// rules `r ± h`, `side ± 2h` and `a ± n h`.
    pub fn margin(&self, v: &[f64]) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => radius - v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Shape::Cube { side } => 0.5 * side - v.iter().map(|x| x.abs()).fold(0.0, f64::max),
            Shape::CrossPolytope { l1_radius } => {
                (l1_radius - v.iter().map(|x| x.abs()).sum::<f64>()) / self.dim as f64
            }
            Shape::Ellipsoid { semi_axes } => {
                let a_min = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                let s = v
                    .iter()
                    .zip(semi_axes)
                    .map(|(x, a)| (x / a) * (x / a))
                    .sum::<f64>()
                    .sqrt();
                a_min * (1.0 - s)
            }
        }
    }

    /// Draws a point uniformly from the body.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim;
        match &self.shape {
            Shape::Ball { radius } => sample_ball(rng, n, *radius),
            Shape::Cube { side } => (0..n).map(|_| (rng.random::<f64>() - 0.5) * side).collect(),
            Shape::CrossPolytope { l1_radius } => {
                // Normalized exponential spacings are uniform on the simplex.
                let e: Vec<f64> = (0..=n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let total: f64 = e.iter().sum();
                e[..n]
                    .iter()
                    .map(|x| {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        sign * l1_radius * x / total
                    })
                    .collect()
            }
            Shape::Ellipsoid { semi_axes } => {
                let mut p = sample_ball(rng, n, 1.0);
                p.iter_mut().zip(semi_axes).for_each(|(x, a)| *x *= a);
                p
            }
        }
    }

    /// Isotropic constant `L_K` of the body rescaled to volume one.
    ///
    /// Ellipsoids with unequal semi-axes are rejected with their per-axis
    /// second moments; no whitening is attempted.
    pub fn isotropic_constant(&self) -> Result<f64> {
        let n = self.dim as f64;
        let moment_sq = match &self.shape {
            Shape::Cube { .. } => 1.0 / 12.0,
            Shape::Ball { .. } => {
                let r = (-analytic::ln_unit_ball_volume(self.dim) / n).exp();
                r * r / (n + 2.0)
            }
            Shape::CrossPolytope { .. } => {
                let a = 0.5 * (analytic::ln_factorial(self.dim) / n).exp();
                2.0 * a * a / ((n + 1.0) * (n + 2.0))
            }
            Shape::Ellipsoid { semi_axes } => {
                let s = (-self.ln_volume() / n).exp();
                let moments: Vec<f64> = semi_axes
                    .iter()
                    .map(|a| (a * s) * (a * s) / (n + 2.0))
                    .collect();
                let first = moments[0];
                if moments.iter().any(|m| ((m - first) / first).abs() > 1e-12) {
                    return Err(Error::NotIsotropic { moments });
                }
                first
            }
        };
        Ok(moment_sq.sqrt())
    }
}

fn sample_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let scale = radius * rng.random::<f64>().powf(1.0 / n as f64) / norm;
            return g.into_iter().map(|x| x * scale).collect();
        }
    }
}

/// Membership as `combine_i g_i(|v_i|) <= threshold`, where `combine` is a
/// sum or a max and each `g_i` is nondecreasing on `[0, inf)`.
pub(crate) trait GaugeOps {
    fn term(&self, i: usize, t: f64) -> f64;
    fn combine(acc: f64, term: f64) -> f64;
    fn threshold(&self) -> f64;
}

pub(crate) struct SumSquares(pub(crate) f64);
pub(crate) struct MaxAbs(pub(crate) f64);
pub(crate) struct SumAbs(pub(crate) f64);
pub(crate) struct ScaledSquares(pub(crate) Vec<f64>);

pub(crate) enum Gauge {
    SumSquares(SumSquares),
    MaxAbs(MaxAbs),
    SumAbs(SumAbs),
    ScaledSquares(ScaledSquares),
}

impl GaugeOps for SumSquares {
    #[inline(always)]
    fn term(&self, _: usize, t: f64) -> f64 {
        t * t
    }
    #[inline(always)]
    fn combine(acc: f64, term: f64) -> f64 {
        acc + term
    }
    fn threshold(&self) -> f64 {
        self.0
    }
}

impl GaugeOps for MaxAbs {
    #[inline(always)]
    fn term(&self, _: usize, t: f64) -> f64 {
        t
    }
    #[inline(always)]
    fn combine(acc: f64, term: f64) -> f64 {
        acc.max(term)
    }
    fn threshold(&self) -> f64 {
        self.0
    }
}

impl GaugeOps for SumAbs {
    #[inline(always)]
    fn term(&self, _: usize, t: f64) -> f64 {
        t
    }
    #[inline(always)]
    fn combine(acc: f64, term: f64) -> f64 {
        acc + term
    }
    fn threshold(&self) -> f64 {
        self.0
    }
}

impl GaugeOps for ScaledSquares {
    #[inline(always)]
    fn term(&self, i: usize, t: f64) -> f64 {
        let u = t * self.0[i];
        u * u
    }
    #[inline(always)]
    fn combine(acc: f64, term: f64) -> f64 {
        acc + term
    }
    fn threshold(&self) -> f64 {
        1.0
    }
}

/// A slab `{y : |<x, y>| < w ||x||}` in direction `x` with half-width `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabSpec {
    direction: Vec<f64>,
    unit: Vec<f64>,
    half_width: f64,
}

impl SlabSpec {
    pub fn new(direction: Vec<f64>, half_width: f64) -> Result<Self> {
        let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return input("slab direction must have strictly positive norm");
        }
        if !(half_width.is_finite() && half_width >= 0.0) {
            return input(format!("slab half-width must be nonnegative, got {half_width}"));
        }
        let unit = direction.iter().map(|x| x / norm).collect();
        Ok(SlabSpec {
            direction,
            unit,
            half_width,
        })
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Strict (open) slab membership.
    pub fn contains(&self, y: &[f64]) -> bool {
        dot(&self.unit, y).abs() < self.half_width
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Monte-Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// `vol(K ∩ (K + offset))` for the cube of the given side.
pub fn cube_overlap_volume(side: f64, offset: &[f64]) -> f64 {
    offset.iter().map(|x| (side - x.abs()).max(0.0)).product()
}

/// `vol(B_r(0) ∩ B_r(x))` with `||x|| = center_distance`, by adaptive quadrature.
///
/// Integrates the cap cross-sections in the angular variable `t = r cos θ`,
/// which removes the endpoint singularity of `(r² - t²)^{(n-1)/2}`. The
/// absolute tolerance is `1e-12` of the ball volume.
pub fn ball_overlap_volume(n: usize, radius: f64, center_distance: f64) -> Result<f64> {
    if n == 0 {
        return input("dimension must be at least 1");
    }
    positive("radius", radius)?;
    if !(center_distance.is_finite() && center_distance >= 0.0) {
        return input(format!("center distance must be nonnegative, got {center_distance}"));
    }
    if center_distance >= 2.0 * radius {
        return Ok(0.0);
    }
    let ln_nu_n = analytic::ln_unit_ball_volume(n);
    let ln_nu_m = analytic::ln_unit_ball_volume(n - 1);
    if center_distance == 0.0 {
        return Ok((ln_nu_n + n as f64 * radius.ln()).exp());
    }
    let theta0 = (center_distance / (2.0 * radius)).acos();
    // Integral in units where the full value (θ0 = π/2) is ν_n / (2 ν_{n-1}).
    let full = 0.5 * (ln_nu_n - ln_nu_m).exp();
    let exponent = n as i32;
    let q = quadrature::integrate(|t: f64| t.sin().powi(exponent), 0.0, theta0, 1e-12 * full)?;
    Ok(2.0 * q.value * (ln_nu_m + n as f64 * radius.ln()).exp())
}

/// Upper bound `d · vol(B_r^{n-1})` on `vol(B_r(x1) \ B_r(x2))` for `||x1 - x2|| = d`.
///
/// For `n = 1` the convention `vol(B^0) = 1` applies.
pub fn ball_symmetric_difference_bound(n: usize, radius: f64, center_distance: f64) -> Result<f64> {
    if n == 0 {
        return input("dimension must be at least 1");
    }
    positive("radius", radius)?;
    if !(center_distance.is_finite() && center_distance >= 0.0) {
        return input(format!("center distance must be nonnegative, got {center_distance}"));
    }
    let ln_lower = analytic::ln_unit_ball_volume(n - 1) + (n - 1) as f64 * radius.ln();
    Ok(center_distance * ln_lower.exp())
}

/// `3^{-||x|| / (8 L)}`, the overlap bound for isotropic bodies, valid for `||x|| >= 4L`.
pub fn small_overlap_bound(isotropic_constant: f64, offset_norm: f64) -> Result<f64> {
    positive("isotropic constant", isotropic_constant)?;
    if !(offset_norm >= 4.0 * isotropic_constant) {
        return input(format!(
            "offset norm {offset_norm} is below 4L = {}; the bound is not asserted there",
            4.0 * isotropic_constant
        ));
    }
    Ok(3f64.powf(-offset_norm / (8.0 * isotropic_constant)))
}

/// Monte-Carlo estimate of `vol(K \ S_direction(half_width))`.
pub fn slab_tail_volume_mc(body: &Body, slab: &SlabSpec, sample_count: usize, seed: u64) -> Result<McEstimate> {
    if slab.direction.len() != body.dim {
        return input("slab direction dimension does not match the body");
    }
    if sample_count == 0 {
        return input("sample count must be positive");
    }
    let mut rng = SeedSpec::new(seed, 0).stream(0);
    let mut outside = 0u64;
    for _ in 0..sample_count {
        let y = body.sample_uniform(&mut rng);
        if dot(&slab.unit, &y).abs() >= slab.half_width {
            outside += 1;
        }
    }
    let vol = body.volume();
    let p = outside as f64 / sample_count as f64;
    Ok(McEstimate {
        estimate: vol * p,
        std_error: vol * (p * (1.0 - p) / sample_count as f64).sqrt(),
    })
}

/// Monte-Carlo estimate of `vol(K ∩ (K + offset))` from uniform samples of `K`.
pub fn overlap_volume_mc(body: &Body, offset: &[f64], sample_count: usize, seed: u64) -> Result<McEstimate> {
    body.check_dim(offset)?;
    if sample_count == 0 {
        return input("sample count must be positive");
    }
    let mut rng = SeedSpec::new(seed, 0).stream(0);
    let mut buf = vec![0.0; body.dim];
    let mut hits = 0u64;
    for _ in 0..sample_count {
        let y = body.sample_uniform(&mut rng);
        buf.iter_mut().zip(y.iter().zip(offset)).for_each(|(b, (y, o))| *b = y - o);
        if body.member(&buf) {
            hits += 1;
        }
    }
    let vol = body.volume();
    let p = hits as f64 / sample_count as f64;
    Ok(McEstimate {
        estimate: vol * p,
        std_error: vol * (p * (1.0 - p) / sample_count as f64).sqrt(),
    })
}
