//! Rectangular flat tori: quotient metric, packing-torus checks, probe nets,
//! greedy packings and nearest-point assignment.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bodies::Body;
use crate::error::{input, Error, Result};
use crate::pointset::{CellGrid, PointSet};
use crate::sampling::SeedSpec;

/// Default cap on the number of points in a probe net or candidate grid.
pub const DEFAULT_NET_CAP: f64 = 1e8;

/// Cap on lattice vectors enumerated by the packing checks.
const LATTICE_ENUMERATION_CAP: f64 = 1e7;

/// Norm used for distances and net certification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    #[serde(rename = "linf")]
    LInf,
}

impl Norm {
    pub fn length(self, d: &[f64]) -> f64 {
        match self {
            Norm::L1 => d.iter().map(|x| x.abs()).sum(),
            Norm::L2 => d.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::LInf => d.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::LInf => "linf",
        }
    }
}

/// Rectangular lattice `diag(c_1, ..., c_n) Z^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    side_lengths: Vec<f64>,
}

impl Lattice {
    pub fn rectangular(side_lengths: Vec<f64>) -> Result<Self> {
        if side_lengths.is_empty() {
            return input("lattice needs at least one side length");
        }
        if side_lengths.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return input("lattice side lengths must be positive and finite");
        }
        Ok(Lattice { side_lengths })
    }

    pub fn dim(&self) -> usize {
        self.side_lengths.len()
    }

    pub fn side_lengths(&self) -> &[f64] {
        &self.side_lengths
    }

    pub fn determinant(&self) -> f64 {
        self.side_lengths.iter().product()
    }
}

/// The flat torus `R^n / Λ` for a rectangular lattice `Λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Torus {
    lattice: Lattice,
    volume: f64,
}

impl Torus {
    pub fn new(side_lengths: Vec<f64>) -> Result<Self> {
        Ok(Self::from_lattice(Lattice::rectangular(side_lengths)?))
    }

    /// Cubic torus with `n` equal sides.
    pub fn cubic(n: usize, side: f64) -> Result<Self> {
        Self::new(vec![side; n])
    }

    pub fn from_lattice(lattice: Lattice) -> Self {
        let volume = lattice.determinant();
        Torus { lattice, volume }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn sides(&self) -> &[f64] {
        self.lattice.side_lengths()
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn min_side(&self) -> f64 {
        self.sides().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn reduce_axis(&self, i: usize, x: f64) -> f64 {
        let c = self.sides()[i];
        let r = x - c * (x / c).floor();
        if r >= c || r < 0.0 {
            0.0
        } else {
            r
        }
    }

    /// Canonical representative in `∏ [0, c_i)`.
    pub fn reduce(&self, p: &[f64]) -> Vec<f64> {
        p.iter().enumerate().map(|(i, &x)| self.reduce_axis(i, x)).collect()
    }

    /// Representative of `d` modulo `c_i` in `[-c_i/2, c_i/2]`.
    pub fn wrap_axis(&self, i: usize, d: f64) -> f64 {
        let c = self.sides()[i];
        d - c * (d / c).round()
    }

    /// Shortest lift of `x - y`.
    pub fn min_image(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(i, (a, b))| self.wrap_axis(i, a - b))
            .collect()
    }

    /// Quotient Euclidean distance.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.distance_in(Norm::L2, x, y)
    }

    pub fn distance_in(&self, norm: Norm, x: &[f64], y: &[f64]) -> f64 {
        norm.length(&self.min_image(x, y))
    }

    /// Largest distance between two torus points in `norm`.
    pub fn diameter(&self, norm: Norm) -> f64 {
        let half: Vec<f64> = self.sides().iter().map(|c| c / 2.0).collect();
        norm.length(&half)
    }

    /// True iff the lattice translates of `body` are pairwise disjoint
    /// (closed bodies; tangency counts as overlap).
    pub fn is_packing_torus(&self, body: &Body) -> bool {
        if body.dim() != self.dim() {
            return false;
        }
        // K ∩ (K + λ) ≠ ∅ iff λ ∈ K − K = 2K for centrally symmetric K.
        let doubled = body.difference_body();
        let reach = 2.0 * body.circumradius();
        for i in 0..self.dim() {
            let mut v = vec![0.0; self.dim()];
            v[i] = self.sides()[i];
            if doubled.member(&v) {
                return false;
            }
        }
        let ranges: Vec<i64> = self.sides().iter().map(|c| (reach / c).floor() as i64).collect();
        let total: f64 = ranges.iter().map(|&k| (2 * k + 1) as f64).product();
        if total > LATTICE_ENUMERATION_CAP {
            // Every supported body is unconditional: λ ∈ 2K implies λ_i e_i ∈ 2K,
            // hence c_i e_i ∈ 2K, which the axis check above already excluded.
            return true;
        }
        let mut found = false;
        for_each_lattice_vector(self.sides(), &ranges, |v, zero| {
            if !zero && !found && doubled.member(v) {
                found = true;
            }
        });
        !found
    }

    /// Number of lifts `q ≡ diff (mod Λ)` with `body ∩ (body + q) ≠ ∅`.
    pub fn overlapping_lifts(&self, body: &Body, diff: &[f64]) -> usize {
        let doubled = body.difference_body();
        let reach = 2.0 * body.circumradius();
        let base = self.min_image(diff, &vec![0.0; self.dim()]);
        let ranges: Vec<i64> = self
            .sides()
            .iter()
            .map(|c| (reach / c).ceil() as i64 + 1)
            .collect();
        let mut count = 0;
        let mut q = vec![0.0; self.dim()];
        for_each_lattice_vector(self.sides(), &ranges, |v, _| {
            for i in 0..q.len() {
                q[i] = base[i] + v[i];
            }
            if doubled.member(&q) {
                count += 1;
            }
        });
        count
    }
}

fn for_each_lattice_vector(sides: &[f64], ranges: &[i64], mut f: impl FnMut(&[f64], bool)) {
    let n = sides.len();
    let mut k: Vec<i64> = ranges.iter().map(|&r| -r).collect();
    let mut v = vec![0.0; n];
    loop {
        for i in 0..n {
            v[i] = k[i] as f64 * sides[i];
        }
        f(&v, k.iter().all(|&x| x == 0));
        let mut axis = n;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            k[axis] += 1;
            if k[axis] <= ranges[axis] {
                break;
            }
            k[axis] = -ranges[axis];
        }
    }
}

/// Per-axis grid counts: the smallest `m_i` with `c_i / m_i <= spacing`.
fn grid_counts(torus: &Torus, spacing: f64, cap: f64, what: &str) -> Result<Vec<usize>> {
    let mut counts = Vec::with_capacity(torus.dim());
    let mut total = 1.0f64;
    for &c in torus.sides() {
        let mut m = (c / spacing).ceil().max(1.0);
        if m > cap {
            return Err(Error::Resource {
                what: what.to_string(),
                required: m * total,
                cap,
            });
        }
        while m > 1.0 && c / (m - 1.0) <= spacing {
            m -= 1.0;
        }
        while c / m > spacing {
            m += 1.0;
        }
        total *= m;
        counts.push(m as usize);
    }
    if total > cap {
        return Err(Error::Resource {
            what: what.to_string(),
            required: total,
            cap,
        });
    }
    Ok(counts)
}

/// Axis-aligned grid of probes with a certified covering radius.
///
/// Points are generated on demand in lexicographic index order (last axis
/// fastest); point `j` has coordinates `j_i c_i / m_i`.
#[derive(Debug, Clone)]
pub struct ProbeNet {
    torus: Torus,
    counts: Vec<usize>,
    covering_radius: f64,
    norm: Norm,
}

impl ProbeNet {
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let n = self.counts.len();
        let mut p = vec![0.0; n];
        for i in (0..n).rev() {
            let m = self.counts[i];
            p[i] = (index % m) as f64 * self.torus.sides()[i] / m as f64;
            index /= m;
        }
        p
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn to_point_set(&self) -> PointSet {
        let coords: Vec<f64> = self.iter().flatten().collect();
        PointSet::from_reduced(self.torus.clone(), coords)
    }
}

/// Grid net whose covering radius in `norm` is at most `h`.
pub fn build_probe_net(torus: &Torus, h: f64, norm: Norm) -> Result<ProbeNet> {
    build_probe_net_capped(torus, h, norm, DEFAULT_NET_CAP)
}

pub fn build_probe_net_capped(torus: &Torus, h: f64, norm: Norm, cap: f64) -> Result<ProbeNet> {
    if !(h > 0.0 && h.is_finite()) {
        return input("probe radius must be positive and finite");
    }
    let n = torus.dim();
    if h >= torus.diameter(norm) {
        return Ok(ProbeNet {
            torus: torus.clone(),
            counts: vec![1; n],
            covering_radius: torus.diameter(norm),
            norm,
        });
    }
    let spacing = match norm {
        Norm::L2 => 2.0 * h / (n as f64).sqrt(),
        Norm::LInf => 2.0 * h,
        Norm::L1 => 2.0 * h / n as f64,
    };
    let counts = grid_counts(torus, spacing, cap, "probe net points")?;
    let half: Vec<f64> = torus
        .sides()
        .iter()
        .zip(&counts)
        .map(|(c, &m)| c / (2.0 * m as f64))
        .collect();
    let covering_radius = norm.length(&half).min(h);
    Ok(ProbeNet {
        torus: torus.clone(),
        counts,
        covering_radius,
        norm,
    })
}

/// Source of packing candidates, consumed in order.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateStream {
    /// Grid points `j_i c_i / m_i` with `m_i` the smallest count giving spacing
    /// at most `step`, in lexicographic order (last axis fastest).
    Grid { step: f64 },
    /// `count` uniform points from substream 2 of `seed`.
    SeededUniform { seed: SeedSpec, count: usize },
}

/// Greedy packing: a candidate is accepted iff its torus distance in `norm` to
/// every accepted point exceeds `separation`.
pub fn greedy_maximal_packing(
    torus: &Torus,
    separation: f64,
    norm: Norm,
    stream: &CandidateStream,
) -> Result<PointSet> {
    if !(separation > 0.0 && separation.is_finite()) {
        return input("separation must be positive and finite");
    }
    let n = torus.dim();
    let grid = CellGrid::new(torus.sides(), separation, usize::MAX / 2);
    let mut cells: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut accepted: Vec<f64> = Vec::new();
    let mut buf = vec![0usize; n];
    let mut consider = |p: Vec<f64>, accepted: &mut Vec<f64>| {
        let axes = grid.neighbor_axes(&p, separation);
        let mut ok = true;
        grid.for_each_cell(&axes, |cell| {
            if !ok {
                return;
            }
            if let Some(members) = cells.get(&cell) {
                for &idx in members {
                    let q = &accepted[idx * n..(idx + 1) * n];
                    if torus.distance_in(norm, &p, q) <= separation {
                        ok = false;
                        return;
                    }
                }
            }
        });
        if ok {
            grid.cell_coords(&p, &mut buf);
            let idx = accepted.len() / n;
            cells.entry(grid.linear(&buf)).or_default().push(idx);
            accepted.extend_from_slice(&p);
        }
    };
    match stream {
        CandidateStream::Grid { step } => {
            if !(*step > 0.0 && step.is_finite()) {
                return input("grid step must be positive and finite");
            }
            let counts = grid_counts(torus, *step, DEFAULT_NET_CAP, "packing candidates")?;
            let net = ProbeNet {
                torus: torus.clone(),
                counts,
                covering_radius: 0.0,
                norm,
            };
            for p in net.iter() {
                consider(p, &mut accepted);
            }
        }
        CandidateStream::SeededUniform { seed, count } => {
            if *count as f64 > DEFAULT_NET_CAP {
                return Err(Error::Resource {
                    what: "packing candidates".into(),
                    required: *count as f64,
                    cap: DEFAULT_NET_CAP,
                });
            }
            let mut rng = seed.stream(2);
            for _ in 0..*count {
                let p: Vec<f64> = torus
                    .sides()
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| torus.reduce_axis(i, c * rng.random::<f64>()))
                    .collect();
                consider(p, &mut accepted);
            }
        }
    }
    Ok(PointSet::from_reduced(torus.clone(), accepted))
}

/// Map from each point of `from` to a nearest point of `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub targets: Vec<usize>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
}

/// Assigns each point of `from` to a torus-nearest (Euclidean) point of `to`,
/// breaking ties by lexicographic order of the target coordinates.
pub fn nearest_assignment(from: &PointSet, to: &PointSet) -> Result<Assignment> {
    if to.is_empty() {
        return input("nearest assignment needs a nonempty target set");
    }
    if from.torus() != to.torus() {
        return input("point sets live on different tori");
    }
    let mut targets = Vec::with_capacity(from.len());
    let mut distances = Vec::with_capacity(from.len());
    for p in from.iter() {
        let (idx, d) = to.nearest(p, Norm::L2).expect("nonempty");
        targets.push(idx);
        distances.push(d);
    }
    let max_distance = distances.iter().cloned().fold(0.0, f64::max);
    Ok(Assignment {
        targets,
        distances,
        max_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Body;

    fn t(sides: &[f64]) -> Torus {
        Torus::new(sides.to_vec()).unwrap()
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(t(&[4.0, 4.0]).reduce(&[5.0, -1.0]), vec![1.0, 3.0]);
        assert_eq!(t(&[4.0, 4.0]).reduce(&[1.5, 2.5]), vec![1.5, 2.5]);
        assert_eq!(t(&[4.0, 4.0]).reduce(&[4.0, 4.0]), vec![0.0, 0.0]);
        let r = t(&[1.0]).reduce(&[-1e-18]);
        assert!(r[0] >= 0.0 && r[0] < 1.0);
    }

    #[test]
    fn distance_examples() {
        assert!((t(&[1.0]).distance(&[0.0], &[0.9]) - 0.1).abs() < 1e-15);
        assert_eq!(t(&[4.0, 4.0]).distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(t(&[4.0, 4.0]).distance(&[0.0, 0.0], &[2.0, 2.0]), 8f64.sqrt());
    }

    #[test]
    fn packing_torus_examples() {
        let ball = Body::ball(2, 2.0).unwrap();
        assert!(!t(&[4.0, 4.0]).is_packing_torus(&ball));
        assert!(t(&[4.0 + 1e-9, 4.0 + 1e-9]).is_packing_torus(&ball));
        let cube = Body::cube(3, 2.0).unwrap();
        assert!(!t(&[2.0, 2.0, 2.0]).is_packing_torus(&cube));
        assert!(t(&[2.001, 2.001, 2.001]).is_packing_torus(&cube));
        let cross = Body::cross_polytope(2, 1.0).unwrap();
        assert!(t(&[10.0, 10.0]).is_packing_torus(&cross));
        assert!(!t(&[2.0, 10.0]).is_packing_torus(&cross));
    }

    #[test]
    fn overlapping_lifts_single_under_packing() {
        let body = Body::ball(2, 0.5).unwrap();
        let torus = t(&[2.1, 2.1]);
        assert!(torus.is_packing_torus(&body.difference_body()));
        assert_eq!(torus.overlapping_lifts(&body, &[0.3, 0.2]), 1);
        assert_eq!(torus.overlapping_lifts(&body, &[1.05, 1.05]), 0);
        // On a small torus both sides of the circle overlap.
        let small = t(&[1.5]);
        let seg = Body::ball(1, 0.5).unwrap();
        assert_eq!(small.overlapping_lifts(&seg, &[0.7]), 2);
    }

    #[test]
    fn probe_net_examples() {
        let net = build_probe_net(&t(&[1.0]), 0.25, Norm::L2).unwrap();
        assert_eq!(net.iter().collect::<Vec<_>>(), vec![vec![0.0], vec![0.5]]);
        let single = build_probe_net(&t(&[1.0, 1.0]), 0.8, Norm::L2).unwrap();
        assert_eq!(single.len(), 1);
        let grid = build_probe_net(&t(&[4.0, 4.0]), 0.1, Norm::LInf).unwrap();
        assert_eq!(grid.counts(), &[20, 20]);
        // Every cell center lies within 0.1 of a grid point.
        let torus = t(&[4.0, 4.0]);
        for i in 0..20 {
            for j in 0..20 {
                let c = [0.2 * i as f64 + 0.1, 0.2 * j as f64 + 0.1];
                let best = grid
                    .iter()
                    .map(|p| torus.distance_in(Norm::LInf, &c, &p))
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= 0.1 + 1e-12);
            }
        }
        assert!(matches!(
            build_probe_net_capped(&t(&[4.0, 4.0]), 0.001, Norm::LInf, 1e4),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn greedy_examples() {
        let circle = t(&[1.0]);
        let one = greedy_maximal_packing(&circle, 0.6, Norm::L2, &CandidateStream::Grid { step: 0.01 }).unwrap();
        assert_eq!(one.len(), 1);
        let three = greedy_maximal_packing(&circle, 0.3, Norm::L2, &CandidateStream::Grid { step: 0.01 }).unwrap();
        let pts: Vec<f64> = three.iter().map(|p| p[0]).collect();
        assert_eq!(pts, vec![0.0, 0.31, 0.62]);
    }

    #[test]
    fn assignment_examples() {
        let circle = t(&[1.0]);
        let to = PointSet::new(&circle, vec![vec![0.0], vec![0.5]]).unwrap();
        let same = nearest_assignment(&to, &to).unwrap();
        assert_eq!(same.targets, vec![0, 1]);
        assert_eq!(same.max_distance, 0.0);
        let a = nearest_assignment(&PointSet::new(&circle, vec![vec![0.2]]).unwrap(), &to).unwrap();
        assert_eq!(a.targets, vec![0]);
        assert!((a.max_distance - 0.2).abs() < 1e-15);
        let tie = nearest_assignment(&PointSet::new(&circle, vec![vec![0.25]]).unwrap(), &to).unwrap();
        assert_eq!(tie.targets, vec![0]);
        assert_eq!(tie.max_distance, 0.25);
        assert!(nearest_assignment(&to, &PointSet::empty(&circle)).is_err());
    }
}
