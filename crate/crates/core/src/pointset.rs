//! Finite point configurations on a torus with a periodic cell-list index.

use std::sync::OnceLock;

use crate::error::{input, Result};
use crate::torus::{Norm, Torus};

/// Uniform periodic grid of cells covering the fundamental domain.
#[derive(Debug, Clone)]
pub(crate) struct CellGrid {
    counts: Vec<usize>,
    widths: Vec<f64>,
}

impl CellGrid {
    /// Cells with edge at least `min_edge` along every axis, coarsened until
    /// there are at most `max_cells` of them.
    pub(crate) fn new(sides: &[f64], min_edge: f64, max_cells: usize) -> Self {
        let mut counts: Vec<usize> = sides
            .iter()
            .map(|&c| {
                if min_edge > 0.0 && min_edge.is_finite() {
                    ((c / min_edge).floor() as usize).max(1)
                } else {
                    1
                }
            })
            .collect();
        let max_cells = max_cells.max(1);
        loop {
            let total = counts
                .iter()
                .try_fold(1usize, |acc, &k| acc.checked_mul(k))
                .unwrap_or(usize::MAX);
            if total <= max_cells {
                break;
            }
            // Coarsen the axis with the most cells.
            let (axis, _) = counts.iter().enumerate().max_by_key(|(_, &k)| k).expect("nonempty");
            counts[axis] = (counts[axis] / 2).max(1);
        }
        let widths = sides.iter().zip(&counts).map(|(c, &k)| c / k as f64).collect();
        CellGrid { counts, widths }
    }

    pub(crate) fn total(&self) -> usize {
        self.counts.iter().product()
    }

    pub(crate) fn cell_coords(&self, p: &[f64], out: &mut [usize]) {
        for (i, (&x, (&w, &k))) in p.iter().zip(self.widths.iter().zip(&self.counts)).enumerate() {
            out[i] = ((x / w).floor() as usize).min(k - 1);
        }
    }

    pub(crate) fn linear(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.counts)
            .fold(0usize, |acc, (&c, &k)| acc * k + c)
    }

    /// Distinct cell indices along each axis within `extent` of the point's cell.
    pub(crate) fn neighbor_axes(&self, p: &[f64], extent: f64) -> Vec<Vec<usize>> {
        p.iter()
            .zip(self.widths.iter().zip(&self.counts))
            .map(|(&x, (&w, &k))| {
                let reach = (extent / w).ceil().max(0.0) as usize;
                if 2 * reach + 1 >= k {
                    (0..k).collect()
                } else {
                    let c = ((x / w).floor() as usize).min(k - 1);
                    (0..=2 * reach).map(|j| (c + k + j - reach) % k).collect()
                }
            })
            .collect()
    }

    /// Calls `f` with the linear index of every cell in the product of `axes`.
    pub(crate) fn for_each_cell(&self, axes: &[Vec<usize>], mut f: impl FnMut(usize)) {
        let n = axes.len();
        let mut odo = vec![0usize; n];
        loop {
            let lin = odo
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &j)| acc * self.counts[i] + axes[i][j]);
            f(lin);
            let mut axis = n;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                odo[axis] += 1;
                if odo[axis] < axes[axis].len() {
                    break;
                }
                odo[axis] = 0;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct CellIndex {
    grid: CellGrid,
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl CellIndex {
    fn build(torus: &Torus, coords: &[f64], edge: f64) -> Self {
        let n = torus.dim();
        let count = coords.len() / n;
        let grid = CellGrid::new(torus.sides(), edge, (2 * count).max(64));
        let mut cell_of = Vec::with_capacity(count);
        let mut buf = vec![0usize; n];
        for p in coords.chunks_exact(n) {
            grid.cell_coords(p, &mut buf);
            cell_of.push(grid.linear(&buf));
        }
        let mut starts = vec![0usize; grid.total() + 1];
        for &c in &cell_of {
            starts[c + 1] += 1;
        }
        for i in 0..grid.total() {
            starts[i + 1] += starts[i];
        }
        let mut fill = starts.clone();
        let mut order = vec![0usize; count];
        for (idx, &c) in cell_of.iter().enumerate() {
            order[fill[c]] = idx;
            fill[c] += 1;
        }
        CellIndex { grid, starts, order }
    }
}

/// Points reduced into the fundamental domain `∏ [0, c_i)`.
///
/// The cell index is built on first query with edge equal to the registered
/// query radius (see [`with_query_radius`](Self::with_query_radius)) or, if
/// none was registered, the radius of that first query. Queries of any radius
/// are exact regardless of the edge.
#[derive(Debug, Clone)]
pub struct PointSet {
    torus: Torus,
    coords: Vec<f64>,
    query_radius: Option<f64>,
    index: OnceLock<CellIndex>,
}

impl PointSet {
    /// Builds a point set from rows of coordinates, reducing each one.
    pub fn new(torus: &Torus, points: impl IntoIterator<Item = Vec<f64>>) -> Result<Self> {
        let n = torus.dim();
        let mut coords = Vec::new();
        for p in points {
            if p.len() != n {
                return input(format!("point has dimension {}, torus has dimension {n}", p.len()));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return input("point coordinates must be finite");
            }
            coords.extend(torus.reduce(&p));
        }
        Ok(Self::from_reduced(torus.clone(), coords))
    }

    pub fn empty(torus: &Torus) -> Self {
        Self::from_reduced(torus.clone(), Vec::new())
    }

    pub(crate) fn from_reduced(torus: Torus, coords: Vec<f64>) -> Self {
        PointSet {
            torus,
            coords,
            query_radius: None,
            index: OnceLock::new(),
        }
    }

    /// Registers the query radius used to size the cell index.
    pub fn with_query_radius(mut self, radius: f64) -> Self {
        let current = self.query_radius.unwrap_or(0.0);
        if radius > current {
            self.query_radius = Some(radius);
            self.index = OnceLock::new();
        }
        self
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn dim(&self) -> usize {
        self.torus.dim()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.coords[i * n..(i + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim())
    }

    /// The first `count` points, with the same torus.
    pub fn prefix(&self, count: usize) -> PointSet {
        let n = self.dim();
        let end = (count * n).min(self.coords.len());
        Self::from_reduced(self.torus.clone(), self.coords[..end].to_vec())
    }

    /// All points of both sets, `self` first.
    pub fn union(&self, other: &PointSet) -> Result<PointSet> {
        if self.torus != other.torus {
            return input("cannot merge point sets on different tori");
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(Self::from_reduced(self.torus.clone(), coords))
    }

    fn index(&self, radius: f64) -> &CellIndex {
        self.index.get_or_init(|| {
            let edge = self.query_radius.unwrap_or(radius);
            CellIndex::build(&self.torus, &self.coords, edge)
        })
    }

    /// Visits every point `p` whose minimal-image displacement `d = q - p`
    /// satisfies `|d_i| <= extent` on every axis. `f` receives the point index
    /// and `d`.
    pub fn for_each_near(&self, q: &[f64], extent: f64, mut f: impl FnMut(usize, &[f64])) {
        if self.is_empty() {
            return;
        }
        let n = self.dim();
        let index = self.index(extent);
        let q = self.torus.reduce(q);
        let axes = index.grid.neighbor_axes(&q, extent);
        let mut d = vec![0.0; n];
        let sides = self.torus.sides();
        index.grid.for_each_cell(&axes, |cell| {
            for &idx in &index.order[index.starts[cell]..index.starts[cell + 1]] {
                let p = self.point(idx);
                let mut inside = true;
                for i in 0..n {
                    let di = wrap_reduced(q[i] - p[i], sides[i]);
                    if di.abs() > extent {
                        inside = false;
                        break;
                    }
                    d[i] = di;
                }
                if inside {
                    f(idx, &d);
                }
            }
        });
    }

    /// Indices of points within torus distance `radius` of `q` in `norm`, ascending.
    pub fn within(&self, q: &[f64], radius: f64, norm: Norm) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_near(q, radius, |idx, d| {
            if norm.length(d) <= radius {
                out.push(idx);
            }
        });
        out.sort_unstable();
        out
    }

    /// Number of points within torus distance `radius` of `q` in `norm`.
    pub fn count_within(&self, q: &[f64], radius: f64, norm: Norm) -> usize {
        let mut count = 0;
        self.for_each_near(q, radius, |_, d| {
            if norm.length(d) <= radius {
                count += 1;
            }
        });
        count
    }

    /// Torus-nearest point to `q` in `norm`; ties go to the lexicographically
    /// smallest coordinates. `None` only for an empty set.
    pub fn nearest(&self, q: &[f64], norm: Norm) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let max_dist = self.torus.diameter(norm);
        let mut radius = self
            .query_radius
            .unwrap_or_else(|| self.torus.sides().iter().cloned().fold(f64::INFINITY, f64::min) / 4.0);
        loop {
            let mut best: Option<(usize, f64)> = None;
            self.for_each_near(q, radius, |idx, d| {
                let dist = norm.length(d);
                if dist > radius {
                    return;
                }
                best = match best {
                    None => Some((idx, dist)),
                    Some((b, bd)) => {
                        if dist < bd || (dist == bd && lex_less(self.point(idx), self.point(b))) {
                            Some((idx, dist))
                        } else {
                            Some((b, bd))
                        }
                    }
                };
            });
            if best.is_some() || radius >= max_dist {
                return best;
            }
            radius = (2.0 * radius).min(max_dist);
        }
    }
}

/// Minimal image of a difference of two reduced coordinates.
#[inline]
fn wrap_reduced(d: f64, c: f64) -> f64 {
    if d > 0.5 * c {
        d - c
    } else if d < -0.5 * c {
        d + c
    } else {
        d
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}
