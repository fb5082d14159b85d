//! Coverage certification, covering density and multiplicities of `X + K`.
//!
//! All certificates go through [`Body::margin`]: if the largest margin of
//! `q - p` over centers `p` is at least `t`, every point within net-norm
//! distance `t` of `q` is covered; if it is negative, `q` itself is uncovered.
//! Centers whose margin at `q` is at least `-t` include every center covering
//! some point within distance `t` of `q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{Body, Gauge, GaugeOps};
use crate::error::{input, Result};
use crate::pointset::PointSet;
use crate::torus::{Norm, ProbeNet, Torus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Covered,
    Uncovered,
    Undetermined,
}

impl VerdictStatus {
    pub fn name(self) -> &'static str {
        match self {
            VerdictStatus::Covered => "covered",
            VerdictStatus::Uncovered => "uncovered",
            VerdictStatus::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageVerdict {
    pub status: VerdictStatus,
    /// Probe with multiplicity zero when `status` is `Uncovered`.
    pub witness: Option<Vec<f64>>,
    /// Net radius `h` (flat nets) or the finest cell radius reached (adaptive).
    pub probe_radius_used: f64,
    /// Number of probe points or cells evaluated.
    pub probes_evaluated: usize,
    /// Cells left unresolved at the finest level (adaptive only).
    pub unresolved_cells: usize,
}

/// `lower <= μ_K(X, T) <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplicityBounds {
    pub lower: usize,
    pub upper: usize,
}

/// Margin at the origin: the body's inradius in its net norm.
fn base_margin(body: &Body) -> f64 {
    body.margin(&vec![0.0; body.dim()])
}

/// `{v : margin(v) >= -slack}` as a dilate of the body.
pub fn expanded_body(body: &Body, slack: f64) -> Body {
    body.scaled(1.0 + slack / base_margin(body)).expect("positive factor")
}

/// Rejects dimension mismatches and bodies (expanded by `slack`) whose
/// translates are not injectively projected onto the torus.
pub fn check_geometry(body: &Body, torus: &Torus, slack: f64) -> Result<()> {
    if body.dim() != torus.dim() {
        return input(format!(
            "body has dimension {}, torus has dimension {}",
            body.dim(),
            torus.dim()
        ));
    }
    let radius = expanded_body(body, slack.max(0.0)).circumradius();
    if !(radius < 0.5 * torus.min_side()) {
        return input(format!(
            "body circumradius {radius} (with slack {slack}) must be below half the smallest torus side {}; \
             otherwise the projection to the torus is not injective on translates",
            0.5 * torus.min_side()
        ));
    }
    Ok(())
}

/// Largest margin of `q - p` over centers `p` that can contain `q`.
fn max_margin(x: &PointSet, body: &Body, q: &[f64], extent: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    x.for_each_near(q, extent, |_, d| {
        let m = body.margin(d);
        if m > best {
            best = m;
        }
    });
    best
}

fn query_extent(body: &Body, slack: f64) -> f64 {
    expanded_body(body, slack).max_half_extent()
}

/// Number of centers `p` with `q - p ∈ K` on the torus.
pub fn multiplicity_at(x: &PointSet, body: &Body, point: &[f64]) -> Result<usize> {
    check_geometry(body, x.torus(), 0.0)?;
    body.check_dim(point)?;
    let mut count = 0;
    x.for_each_near(point, body.max_half_extent(), |_, d| {
        if body.member(d) {
            count += 1;
        }
    });
    Ok(count)
}

/// `(exact multiplicity at q, count of centers with margin >= -slack)`.
pub fn multiplicity_pair(x: &PointSet, body: &Body, q: &[f64], slack: f64) -> (usize, usize) {
    let mut full = 0;
    let mut expanded = 0;
    x.for_each_near(q, query_extent(body, slack), |_, d| {
        if body.member(d) {
            full += 1;
        }
        if body.margin(d) >= -slack {
            expanded += 1;
        }
    });
    (full, expanded.max(full))
}

/// `|X| vol(K) / vol(T)`.
pub fn covering_density(x: &PointSet, body: &Body) -> Result<f64> {
    check_geometry(body, x.torus(), 0.0)?;
    Ok(x.len() as f64 * body.volume() / x.torus().volume())
}

fn check_net(body: &Body, net: &ProbeNet) -> Result<f64> {
    if net.norm() != body.net_norm() {
        return input(format!(
            "a {} body needs a {} probe net, got {}",
            body.kind(),
            body.net_norm().name(),
            net.norm().name()
        ));
    }
    let h = net.covering_radius();
    if h >= base_margin(body) {
        return input(format!(
            "probe radius {h} leaves no shrunk body (inner margin {}); use a finer net",
            base_margin(body)
        ));
    }
    Ok(h)
}

/// Sound coverage verdict from a probe net.
///
/// `Covered` when every probe has margin at least `h`; `Uncovered` with the
/// first (in net order) probe of multiplicity zero; otherwise `Undetermined`.
pub fn certify_coverage(x: &PointSet, body: &Body, net: &ProbeNet) -> Result<CoverageVerdict> {
    check_geometry(body, x.torus(), 0.0)?;
    if net.torus() != x.torus() {
        return input("probe net and point set live on different tori");
    }
    let h = check_net(body, net)?;
    let extent = body.max_half_extent();
    let mut all_covered = true;
    for (i, q) in net.iter().enumerate() {
        let m = max_margin(x, body, &q, extent);
        if m >= h {
            continue;
        }
        all_covered = false;
        if m < 0.0 && multiplicity_at(x, body, &q)? == 0 {
            return Ok(CoverageVerdict {
                status: VerdictStatus::Uncovered,
                witness: Some(q),
                probe_radius_used: h,
                probes_evaluated: i + 1,
                unresolved_cells: 0,
            });
        }
    }
    Ok(CoverageVerdict {
        status: if all_covered {
            VerdictStatus::Covered
        } else {
            VerdictStatus::Undetermined
        },
        witness: None,
        probe_radius_used: h,
        probes_evaluated: net.len(),
        unresolved_cells: 0,
    })
}

/// Limits for cell refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveLimits {
    /// Cells whose net-norm radius is at most this are not subdivided.
    pub min_radius: f64,
    /// Budget on the total number of cells evaluated.
    pub max_cells: usize,
}

impl AdaptiveLimits {
    pub fn new(min_radius: f64) -> Self {
        AdaptiveLimits {
            min_radius,
            max_cells: 200_000_000,
        }
    }
}

/// Bracket on the coverage time `max_x min{m_p : x ∈ K + p}` of marked centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTime {
    /// Largest coverage time observed at a cell center (`inf` if some center is never covered).
    pub lower: f64,
    /// Upper bound on the coverage time (`inf` if unbounded).
    pub upper: f64,
    /// Cell center attaining `lower`.
    pub witness: Option<Vec<f64>>,
    pub cells_evaluated: usize,
    pub unresolved_cells: usize,
    /// Net-norm radius of the finest cell reached.
    pub finest_radius: f64,
}

/// Candidate rows: displacement from the cell center (n values), then the mark.
struct Engine<'a, G> {
    gauge: G,
    torus: &'a Torus,
    n: usize,
    norm: Norm,
    limits: AdaptiveLimits,
    stop_when_uncovered: bool,
    lower: f64,
    witness: Option<Vec<f64>>,
    unresolved_upper: f64,
    levels: &'a [f64],
    bound: f64,
    evaluated: usize,
    unresolved: usize,
    finest: f64,
    pool: Vec<(Vec<f64>, Vec<f64>)>,
}

fn prune_bound(levels: &[f64], lower: f64) -> f64 {
    if levels.is_empty() {
        return lower;
    }
    levels.iter().copied().find(|&l| l >= lower).unwrap_or(f64::INFINITY)
}

impl<G: GaugeOps> Engine<'_, G> {
    fn stopped(&self) -> bool {
        self.stop_when_uncovered && self.lower == f64::INFINITY
    }

    fn raise_lower(&mut self, t: f64, center: &[f64]) {
        self.lower = t;
        self.witness = Some(self.torus.reduce(center));
        self.bound = prune_bound(self.levels, t);
    }

    fn refine(&mut self, center: &mut Vec<f64>, half: &mut Vec<f64>, cands: &[f64], depth: usize) {
        let n = self.n;
        let stride = n + 1;
        let thr = self.gauge.threshold();
        self.evaluated += 1;
        let g = &self.gauge;
        // Smallest mark of a translate containing the cell, and at the center.
        // Rows are sorted by mark, so the first hits are the minima.
        let mut upper = f64::INFINITY;
        let mut at_center = f64::INFINITY;
        for row in cands.chunks_exact(stride) {
            let mark = row[n];
            let mut corner = 0.0;
            if at_center.is_finite() {
                for i in 0..n {
                    corner = G::combine(corner, g.term(i, row[i].abs() + half[i]));
                }
            } else {
                let mut mid = 0.0;
                for i in 0..n {
                    let t = row[i].abs();
                    corner = G::combine(corner, g.term(i, t + half[i]));
                    mid = G::combine(mid, g.term(i, t));
                }
                if mid <= thr {
                    at_center = mark;
                }
            }
            if corner <= thr {
                upper = mark;
                break;
            }
        }
        if at_center > self.lower {
            self.raise_lower(at_center, center);
            if self.stopped() {
                return;
            }
        }
        if upper <= self.bound {
            if upper > self.lower {
                self.unresolved_upper = self.unresolved_upper.max(upper);
            }
            return;
        }
        let radius = self.norm.length(half);
        self.finest = self.finest.min(radius);
        if radius <= self.limits.min_radius || self.evaluated >= self.limits.max_cells {
            self.unresolved += 1;
            self.unresolved_upper = self.unresolved_upper.max(upper);
            return;
        }
        let axis = (0..n).fold(0, |best, i| if half[i] > half[best] { i } else { best });
        let old_half = half[axis];
        let old_center = center[axis];
        let child_half = 0.5 * old_half;
        if self.pool.len() <= depth {
            self.pool.push((Vec::new(), Vec::new()));
        }
        let (mut low, mut high) = std::mem::take(&mut self.pool[depth]);
        let g = &self.gauge;
        low.clear();
        high.clear();
        for row in cands.chunks_exact(stride) {
            if row[n] > upper {
                break;
            }
            let mut rest = 0.0;
            for i in 0..n {
                if i != axis {
                    rest = G::combine(rest, g.term(i, (row[i].abs() - half[i]).max(0.0)));
                }
            }
            if rest > thr {
                continue;
            }
            let dk = row[axis];
            for (list, offset) in [(&mut low, -child_half), (&mut high, child_half)] {
                let t = ((dk + offset).abs() - child_half).max(0.0);
                if G::combine(rest, g.term(axis, t)) <= thr {
                    let start = list.len();
                    list.extend_from_slice(row);
                    list[start + axis] = dk + offset;
                }
            }
        }
        half[axis] = child_half;
        center[axis] = old_center - child_half;
        self.refine(center, half, &low, depth + 1);
        if !self.stopped() {
            center[axis] = old_center + child_half;
            self.refine(center, half, &high, depth + 1);
        }
        center[axis] = old_center;
        half[axis] = old_half;
        self.pool[depth] = (low, high);
    }
}

/// Brackets the coverage time of centers `X` carrying `marks`: the smallest
/// `t` such that the centers with mark at most `t` cover the torus.
///
/// Branch and bound over axis-aligned cells: a cell's coverage time is at most
/// the smallest mark of a translate containing the whole cell, and the time at
/// its center is exact. Cells are halved along their widest axis until their
/// net-norm radius reaches `limits.min_radius`. Root cells are visited in grid
/// order after a first pass over their centers, children lower half first, so
/// the result is deterministic.
pub fn coverage_time(x: &PointSet, marks: &[f64], body: &Body, limits: &AdaptiveLimits) -> Result<CoverageTime> {
    coverage_time_at_levels(x, marks, body, limits, &[])
}

/// [`coverage_time`] resolved only as far as the sorted `levels` require: a
/// cell is pruned once its bound does not exceed the smallest level at or
/// above the current lower bound. For every level `l`, `upper <= l` or
/// `lower > l` holds unless cells were left unresolved; `upper` may exceed
/// the exact coverage time when it is not needed to decide a level.
pub fn coverage_time_at_levels(
    x: &PointSet,
    marks: &[f64],
    body: &Body,
    limits: &AdaptiveLimits,
    levels: &[f64],
) -> Result<CoverageTime> {
    if marks.len() != x.len() {
        return input(format!("{} marks for {} centers", marks.len(), x.len()));
    }
    if marks.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return input("marks must be finite and nonnegative");
    }
    if levels.iter().any(|l| l.is_nan()) || levels.windows(2).any(|w| w[0] > w[1]) {
        return input("levels must be sorted");
    }
    run_engine(x, marks, body, limits, false, levels)
}

fn root_cells(body: &Body, torus: &Torus) -> Result<(Vec<usize>, Vec<f64>)> {
    // Largest cells such that only one lift of each center can meet a cell:
    // c_i > 2 (e_i + a_i) for body half-extent e_i and cell half-width a_i.
    let mut counts = Vec::with_capacity(torus.dim());
    let mut half = Vec::with_capacity(torus.dim());
    for (i, &c) in torus.sides().iter().enumerate() {
        let room = 0.5 * c - body.half_extent(i);
        let mut m = (c / (2.0 * room)).floor().max(1.0);
        while c / (2.0 * m) >= room {
            m += 1.0;
        }
        counts.push(m as usize);
        half.push(c / (2.0 * m));
    }
    let total: f64 = counts.iter().map(|&m| m as f64).product();
    if total > crate::torus::DEFAULT_NET_CAP {
        return Err(crate::error::Error::Resource {
            what: "root refinement cells".into(),
            required: total,
            cap: crate::torus::DEFAULT_NET_CAP,
        });
    }
    Ok((counts, half))
}

fn run_engine(
    x: &PointSet,
    marks: &[f64],
    body: &Body,
    limits: &AdaptiveLimits,
    stop: bool,
    levels: &[f64],
) -> Result<CoverageTime> {
    match body.gauge() {
        Gauge::SumSquares(g) => run_engine_with(g, x, marks, body, limits, stop, levels),
        Gauge::MaxAbs(g) => run_engine_with(g, x, marks, body, limits, stop, levels),
        Gauge::SumAbs(g) => run_engine_with(g, x, marks, body, limits, stop, levels),
        Gauge::ScaledSquares(g) => run_engine_with(g, x, marks, body, limits, stop, levels),
    }
}

fn run_engine_with<G: GaugeOps>(
    gauge: G,
    x: &PointSet,
    marks: &[f64],
    body: &Body,
    limits: &AdaptiveLimits,
    stop: bool,
    levels: &[f64],
) -> Result<CoverageTime> {
    let torus = x.torus();
    check_geometry(body, torus, 0.0)?;
    if !(limits.min_radius > 0.0) {
        return input("minimum cell radius must be positive");
    }
    let n = torus.dim();
    let (counts, root_half) = root_cells(body, torus)?;
    let total: usize = counts.iter().product();
    let center_of = |idx: usize, center: &mut [f64]| {
        let mut rest = idx;
        for axis in (0..n).rev() {
            let m = counts[axis];
            center[axis] = ((rest % m) as f64 + 0.5) * torus.sides()[axis] / m as f64;
            rest /= m;
        }
    };
    let mut engine = Engine {
        gauge,
        torus,
        n,
        norm: body.net_norm(),
        limits: *limits,
        stop_when_uncovered: stop,
        lower: 0.0,
        witness: None,
        unresolved_upper: 0.0,
        levels,
        bound: prune_bound(levels, 0.0),
        evaluated: 0,
        unresolved: 0,
        finest: body.net_norm().length(&root_half),
        pool: Vec::new(),
    };
    let mut center = vec![0.0; n];
    // First pass: exact coverage times at root centers seed the lower bound.
    for idx in 0..total {
        center_of(idx, &mut center);
        let mut t = f64::INFINITY;
        x.for_each_near(&center, body.max_half_extent(), |i, d| {
            if marks[i] < t && body.member(d) {
                t = marks[i];
            }
        });
        if t > engine.lower {
            engine.raise_lower(t, &center);
            if engine.stopped() {
                return Ok(engine.finish());
            }
        }
    }
    let query = body.max_half_extent() + root_half.iter().cloned().fold(0.0, f64::max);
    let mut rows = Vec::new();
    let mut cands = Vec::new();
    let mut half = root_half.clone();
    for idx in 0..total {
        center_of(idx, &mut center);
        rows.clear();
        x.for_each_near(&center, query, |i, d| {
            if body.meets_box(d, &root_half) {
                let mut row = d.to_vec();
                row.push(marks[i]);
                rows.push(row);
            }
        });
        // Stable sort keeps the neighbour order among equal marks.
        rows.sort_by(|a, b| a[n].total_cmp(&b[n]));
        cands.clear();
        rows.iter().for_each(|r| cands.extend_from_slice(r));
        engine.refine(&mut center, &mut half, &cands, 0);
        if engine.stopped() {
            break;
        }
    }
    Ok(engine.finish())
}

impl<G> Engine<'_, G> {
    fn finish(self) -> CoverageTime {
        CoverageTime {
            lower: self.lower,
            upper: self.lower.max(self.unresolved_upper),
            witness: self.witness,
            cells_evaluated: self.evaluated,
            unresolved_cells: self.unresolved,
            finest_radius: self.finest,
        }
    }
}

/// Coverage verdict by refinement of axis-aligned cells.
///
/// Runs [`coverage_time`] with every mark zero and stops at the first cell
/// center no translate contains. Box containment and intersection tests are
/// exact because every supported body is symmetric under coordinate sign
/// changes, so `Covered` and `Uncovered` are sound; cells still undecided at
/// `limits.min_radius` make the verdict `Undetermined`.
pub fn certify_coverage_adaptive(x: &PointSet, body: &Body, limits: &AdaptiveLimits) -> Result<CoverageVerdict> {
    let marks = vec![0.0; x.len()];
    let t = run_engine(x, &marks, body, limits, true, &[])?;
    let status = if t.lower == f64::INFINITY {
        VerdictStatus::Uncovered
    } else if t.unresolved_cells == 0 {
        VerdictStatus::Covered
    } else {
        VerdictStatus::Undetermined
    };
    Ok(CoverageVerdict {
        status,
        witness: if status == VerdictStatus::Uncovered { t.witness } else { None },
        probe_radius_used: t.finest_radius,
        probes_evaluated: t.cells_evaluated,
        unresolved_cells: t.unresolved_cells,
    })
}

fn x_covers(x: &PointSet, body: &Body, q: &[f64], extent: f64) -> bool {
    let mut hit = false;
    x.for_each_near(q, extent, |_, d| {
        if !hit && body.member(d) {
            hit = true;
        }
    });
    hit
}

/// Bounds on the maximal multiplicity from a probe net.
pub fn max_multiplicity(x: &PointSet, body: &Body, net: &ProbeNet) -> Result<MultiplicityBounds> {
    let h = check_net(body, net)?;
    check_geometry(body, x.torus(), h)?;
    if net.torus() != x.torus() {
        return input("probe net and point set live on different tori");
    }
    let (lower, upper) = (0..net.len())
        .into_par_iter()
        .map(|i| multiplicity_pair(x, body, &net.point(i), h))
        .reduce(|| (0, 0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(MultiplicityBounds { lower, upper })
}

/// Number of targets not covered by `X + K`.
pub fn uncovered_count(targets: &PointSet, x: &PointSet, body: &Body) -> Result<usize> {
    check_geometry(body, x.torus(), 0.0)?;
    if targets.torus() != x.torus() {
        return input("targets and centers live on different tori");
    }
    let extent = body.max_half_extent();
    Ok(targets.iter().filter(|q| !x_covers(x, body, q, extent)).count())
}

/// `(β/2) n ln n`.
pub fn saturation_threshold(beta: f64, n: usize) -> f64 {
    let n = n as f64;
    0.5 * beta * n * n.ln()
}

/// Whether at least `(β/2) n ln n` points of `X` lie within torus distance
/// `radius − eps` of `y`.
pub fn is_saturated(y: &[f64], x: &PointSet, radius: f64, eps: f64, beta: f64, n: usize) -> Result<bool> {
    if !(eps > 0.0 && eps < radius) {
        return input(format!("need 0 < eps < radius, got eps = {eps}, radius = {radius}"));
    }
    let count = x.count_within(y, radius - eps, Norm::L2);
    Ok(count as f64 >= saturation_threshold(beta, n))
}
