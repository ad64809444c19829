//! Exact nearest-neighbor queries on uniform grids of buckets.
//!
//! Points are bucketed by cell (counting sort, cell order then point order).
//! A query grows Chebyshev rings around its own cell until it finds any point,
//! then scans every cell meeting the ball through that point. Ties go to the
//! lowest point index.
//!
//! [`NearestIndex`] adds, for a fixed point set, a finer grid of per-cell
//! candidate lists so that repeated queries near the set touch a handful of
//! points each.

use rayon::prelude::*;

use crate::Vec3;

/// Cells per axis never exceed this.
const MAX_CELLS_PER_AXIS: usize = 128;
/// Target points per occupied cell for surface-like point sets.
const POINTS_PER_CELL: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub index: usize,
    pub dist2: f64,
}

impl Nearest {
    const NONE: Nearest = Nearest { index: usize::MAX, dist2: f64::INFINITY };

    #[inline]
    fn offer(&mut self, index: usize, d2: f64) {
        if d2 < self.dist2 || (d2 == self.dist2 && index < self.index) {
            *self = Nearest { index, dist2: d2 };
        }
    }
}

fn bounds(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Regular cell layout over an axis-aligned box.
#[derive(Clone, Debug)]
struct Layout {
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
}

impl Layout {
    fn new(lo: Vec3, hi: Vec3, cell: f64) -> Self {
        let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell).floor() as usize + 1).min(MAX_CELLS_PER_AXIS));
        Layout { origin: lo, cell, dims }
    }

    fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    fn axis_cell(&self, a: usize, x: f64) -> usize {
        let g = ((x - self.origin[a]) / self.cell).floor();
        if g <= 0.0 {
            0
        } else {
            (g as usize).min(self.dims[a] - 1)
        }
    }

    #[inline]
    fn cell_coords(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|a| self.axis_cell(a, p[a]))
    }

    #[inline]
    fn linear(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    fn center(&self, n: usize) -> Vec3 {
        let c = [n % self.dims[0], (n / self.dims[0]) % self.dims[1], n / (self.dims[0] * self.dims[1])];
        self.origin + Vec3::from_fn(|a, _| (c[a] as f64 + 0.5) * self.cell)
    }

    /// Cells whose centers may lie within `radius` of some point (a superset).
    fn cells_near(&self, points: &[Vec3], radius: f64) -> Vec<bool> {
        let reach = (radius / self.cell).ceil() as usize + 1;
        let mut near = vec![false; self.len()];
        let mut seen = vec![false; self.len()];
        for p in points {
            let c = self.cell_coords(p);
            let l = self.linear(c);
            if seen[l] {
                continue;
            }
            seen[l] = true;
            let lo = c.map(|x| x.saturating_sub(reach));
            let hi = [0, 1, 2].map(|a| (c[a] + reach).min(self.dims[a] - 1));
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        near[self.linear([i, j, k])] = true;
                    }
                }
            }
        }
        near
    }

    /// True when `p` lies inside the covered box, not merely clamped into it.
    fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| {
            let g = (p[a] - self.origin[a]) / self.cell;
            g >= 0.0 && g < self.dims[a] as f64
        })
    }
}

/// Bucket structure without a borrowed point slice.
#[derive(Clone, Debug)]
struct Buckets {
    layout: Layout,
    starts: Vec<u32>,
    order: Vec<u32>,
}

impl Buckets {
    fn new(points: &[Vec3], min_cell: f64) -> Self {
        assert!(!points.is_empty(), "cannot index an empty point set");
        let (lo, hi) = bounds(points);
        let extent = (hi - lo).max().max(1e-12);
        // Surface-like sets: occupied cells ~ (extent / cell)^2.
        let per_axis = (points.len() as f64 / POINTS_PER_CELL).sqrt().ceil() as usize;
        let per_axis = per_axis.clamp(1, MAX_CELLS_PER_AXIS);
        let cell = (extent / per_axis as f64 * (1.0 + 1e-9)).max(min_cell);
        let layout = Layout::new(lo, hi, cell);

        let ncells = layout.len();
        let cell_of: Vec<usize> = points.iter().map(|p| layout.linear(layout.cell_coords(p))).collect();
        let mut starts = vec![0u32; ncells + 1];
        for &c in &cell_of {
            starts[c + 1] += 1;
        }
        for c in 0..ncells {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        Buckets { layout, starts, order }
    }

    #[inline]
    fn cell_points(&self, c: [usize; 3]) -> &[u32] {
        let l = self.layout.linear(c);
        &self.order[self.starts[l] as usize..self.starts[l + 1] as usize]
    }

    fn scan_cell(&self, points: &[Vec3], q: &Vec3, c: [usize; 3], best: &mut Nearest) {
        for &i in self.cell_points(c) {
            best.offer(i as usize, (points[i as usize] - q).norm_squared());
        }
    }

    fn scan_ring(&self, points: &[Vec3], q: &Vec3, c: [usize; 3], r: usize, best: &mut Nearest) {
        let dims = self.layout.dims;
        let lo = c.map(|x| x as isize - r as isize);
        let hi = c.map(|x| x as isize + r as isize);
        for z in lo[2].max(0)..=hi[2].min(dims[2] as isize - 1) {
            for y in lo[1].max(0)..=hi[1].min(dims[1] as isize - 1) {
                let on_shell = z == lo[2] || z == hi[2] || y == lo[1] || y == hi[1];
                for x in lo[0].max(0)..=hi[0].min(dims[0] as isize - 1) {
                    if on_shell || x == lo[0] || x == hi[0] {
                        self.scan_cell(points, q, [x as usize, y as usize, z as usize], best);
                    }
                }
            }
        }
    }

    /// Visit every point whose cell meets the box `q +- radius`.
    fn for_each_in_box(&self, q: &Vec3, radius: f64, mut f: impl FnMut(u32)) {
        let l = &self.layout;
        let lo = [0, 1, 2].map(|a| l.axis_cell(a, q[a] - radius));
        let hi = [0, 1, 2].map(|a| l.axis_cell(a, q[a] + radius));
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    for &i in self.cell_points([x, y, z]) {
                        f(i);
                    }
                }
            }
        }
    }

    fn nearest(&self, points: &[Vec3], q: &Vec3) -> Nearest {
        let dims = self.layout.dims;
        let c = self.layout.cell_coords(q);
        let mut best = Nearest::NONE;
        // Grow rings until some point is found; everything closer than it
        // then lies in the box of cells covering its distance ball.
        let max_ring = (0..3).map(|a| c[a].max(dims[a] - 1 - c[a])).max().unwrap();
        for r in 0..=max_ring {
            self.scan_ring(points, q, c, r, &mut best);
            if best.dist2.is_finite() {
                break;
            }
        }
        let radius = best.dist2.sqrt() * (1.0 + 1e-12);
        self.for_each_in_box(q, radius, |i| best.offer(i as usize, (points[i as usize] - q).norm_squared()));
        best
    }
}

/// Grid over a borrowed point set.
pub struct PointGrid<'a> {
    points: &'a [Vec3],
    buckets: Buckets,
}

impl<'a> PointGrid<'a> {
    /// Panics if `points` is empty.
    pub fn new(points: &'a [Vec3]) -> Self {
        Self::with_min_cell(points, 0.0)
    }

    /// Cells are at least `min_cell` wide; useful when queries are known to
    /// lie about that far from the set.
    pub fn with_min_cell(points: &'a [Vec3], min_cell: f64) -> Self {
        PointGrid { points, buckets: Buckets::new(points, min_cell) }
    }

    pub fn nearest(&self, q: &Vec3) -> Nearest {
        self.buckets.nearest(self.points, q)
    }

    /// Nearest point for every query, in query order.
    pub fn nearest_all(&self, queries: &[Vec3]) -> Vec<Nearest> {
        queries.par_iter().map(|q| self.nearest(q)).collect()
    }
}

/// Owned point set with precomputed candidate lists on a fine grid around it.
///
/// For a cell with center `c`, half-diagonal `h` and nearest distance `d`,
/// every point that can be nearest to some query inside the cell lies within
/// `d + 2h` of `c`; those points form the cell's list. Cells farther than
/// `margin` from the set keep no list, and queries there or outside the
/// covered box fall back to the bucket search.
#[derive(Clone, Debug)]
pub struct NearestIndex {
    points: Vec<Vec3>,
    buckets: Buckets,
    fine: Layout,
    list_starts: Vec<u32>,
    lists: Vec<u32>,
}

impl NearestIndex {
    /// Candidate grid covers the bounding box grown by `margin`, with cells of
    /// width `cell` (coarsened if the box would need too many cells).
    pub fn new(points: Vec<Vec3>, cell: f64, margin: f64) -> Self {
        let (lo, hi) = bounds(&points);
        let lo = lo - Vec3::repeat(margin);
        let hi = hi + Vec3::repeat(margin);
        let cell = cell.max((hi - lo).max() / MAX_CELLS_PER_AXIS as f64 * (1.0 + 1e-9)).max(1e-12);
        let buckets = Buckets::new(&points, cell);
        let fine = Layout::new(lo, hi, cell);
        let half_diag = 0.5 * cell * 3f64.sqrt();
        let near = fine.cells_near(&points, margin + half_diag);
        let per_cell: Vec<Vec<u32>> = (0..fine.len())
            .into_par_iter()
            .map(|n| {
                if !near[n] {
                    return Vec::new();
                }
                let c = fine.center(n);
                let d = buckets.nearest(&points, &c).dist2.sqrt();
                if d > margin + half_diag {
                    return Vec::new();
                }
                let r = (d + 2.0 * half_diag) * (1.0 + 1e-9) + 1e-15;
                let mut list = Vec::new();
                buckets.for_each_in_box(&c, r, |i| {
                    if (points[i as usize] - c).norm() <= r {
                        list.push(i);
                    }
                });
                list.sort_unstable();
                list
            })
            .collect();
        let mut list_starts = Vec::with_capacity(per_cell.len() + 1);
        list_starts.push(0u32);
        let mut lists = Vec::new();
        for l in per_cell {
            lists.extend_from_slice(&l);
            list_starts.push(lists.len() as u32);
        }
        NearestIndex { points, buckets, fine, list_starts, lists }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn nearest(&self, q: &Vec3) -> Nearest {
        if !self.fine.contains(q) {
            return self.buckets.nearest(&self.points, q);
        }
        let l = self.fine.linear(self.fine.cell_coords(q));
        let list = &self.lists[self.list_starts[l] as usize..self.list_starts[l + 1] as usize];
        if list.is_empty() {
            return self.buckets.nearest(&self.points, q);
        }
        let mut best = Nearest::NONE;
        for &i in list {
            best.offer(i as usize, (self.points[i as usize] - q).norm_squared());
        }
        best
    }

    pub fn nearest_all(&self, queries: &[Vec3]) -> Vec<Nearest> {
        queries.par_iter().map(|q| self.nearest(q)).collect()
    }
}

/// O(N M) reference used by tests and tiny inputs.
pub fn brute_force_nearest(points: &[Vec3], q: &Vec3) -> Nearest {
    let mut best = Nearest::NONE;
    for (i, p) in points.iter().enumerate() {
        best.offer(i, (p - q).norm_squared());
    }
    best
}
