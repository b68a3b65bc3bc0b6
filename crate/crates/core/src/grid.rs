//! Overset grid on S² made of six graph charts centred on `±e_k`.
//!
//! Every chart carries an `N × N` Cartesian grid on `[-L, L]²` in its graph
//! coordinates. A point is *owned* by the chart whose centre is closest
//! (the cube face containing it). Nodes outside their owner's face are
//! *fringe* nodes whose values are tied to tensor Lagrange interpolation in
//! the owner chart. Quadrature is the trapezoid sum in each chart against a
//! C⁵ partition of unity.

use std::sync::{Arc, OnceLock};

use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Solve;
use faer::Mat;

use crate::error::{Error, Result};
use crate::sphere_geom::{chart_at, AmbientPoint, Chart, Hemisphere};

pub const HALF_WIDTH: f64 = 0.9;
pub const MIN_GRID: usize = 32;
const VALID_RADIUS: f64 = 0.99;
const NONE: usize = usize::MAX;

pub const CHART_LABELS: [&str; 6] = ["N", "S", "E", "W", "F", "B"];
const CENTERS: [[f64; 3]; 6] = [
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
];

pub type Vec3 = [f64; 3];

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn normalize3(a: Vec3) -> Vec3 {
    let r = dot3(&a, &a).sqrt();
    [a[0] / r, a[1] / r, a[2] / r]
}

/// Rows `e1, e2, e3` of a chart frame and the sign of the graph height
/// (`sign · e3` is the chart centre).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame(pub [Vec3; 3], pub f64);

impl Frame {
    pub fn from_chart(c: &Chart) -> Frame {
        let f = c.frame();
        let row = |i: usize| [f[(i, 0)], f[(i, 1)], f[(i, 2)]];
        Frame([row(0), row(1), row(2)], c.hemisphere().sign())
    }

    /// Upper-graph frame with the given rows.
    pub fn upper(rows: [Vec3; 3]) -> Frame {
        Frame(rows, 1.0)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        [dot3(&self.0[0], p), dot3(&self.0[1], p), dot3(&self.0[2], p)]
    }

    pub fn apply_transpose(&self, y: &Vec3) -> Vec3 {
        let r = &self.0;
        [
            r[0][0] * y[0] + r[1][0] * y[1] + r[2][0] * y[2],
            r[0][1] * y[0] + r[1][1] * y[1] + r[2][1] * y[2],
            r[0][2] * y[0] + r[1][2] * y[1] + r[2][2] * y[2],
        ]
    }

    /// Graph point over this frame with height `sign · β(x)`.
    pub fn lift(&self, x: [f64; 2]) -> Vec3 {
        let b = (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0).sqrt();
        self.apply_transpose(&[x[0], x[1], self.1 * b])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub chart: usize,
    pub i: usize,
    pub j: usize,
    pub x: [f64; 2],
    pub point: Vec3,
    pub owned: bool,
    pub quad_weight: f64,
    /// Interpolation donors for fringe nodes (empty for owned nodes).
    pub donors: Vec<(usize, f64)>,
}

/// Bicubic Lagrange stencil: 16 node ids and weights, plus weights for the
/// two chart-coordinate derivatives of the interpolant.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub chart: usize,
    pub nodes: [usize; 16],
    pub w: [f64; 16],
    pub dw: [[f64; 16]; 2],
}

pub struct SphereGrid {
    pub size: usize,
    pub h: f64,
    pub charts: Vec<Arc<Chart>>,
    pub frames: [Frame; 6],
    nodes: Vec<Node>,
    /// `index[(c * size + i) * size + j]` is the node id or `NONE`.
    index: Vec<usize>,
    owned: Vec<usize>,
    fringe: Vec<usize>,
    /// Position of a fringe node in `fringe` (`NONE` for owned nodes).
    fringe_pos: Vec<usize>,
    fringe_lu: OnceLock<Lu<usize, f64>>,
}

/// Blend profile in `s = <p, centre>`: `(s - s₀)⁶₊`, supported on the disc
/// `|x| < 0.898` inside the chart square.
fn bump(s: f64) -> f64 {
    const S0: f64 = 0.44;
    if s > S0 {
        (s - S0).powi(6)
    } else {
        0.0
    }
}

/// Lagrange weights on nodes `0..K` at `s`, and their `s`-derivatives.
fn lagrange<const K: usize>(s: f64) -> ([f64; K], [f64; K]) {
    let mut w = [0.0; K];
    let mut dw = [0.0; K];
    for k in 0..K {
        let mut den = 1.0;
        let mut num = 1.0;
        for m in (0..K).filter(|&m| m != k) {
            den *= (k as f64) - (m as f64);
            num *= s - m as f64;
        }
        let mut dnum = 0.0;
        for skip in (0..K).filter(|&m| m != k) {
            dnum += (0..K).filter(|&m| m != k && m != skip).map(|m| s - m as f64).product::<f64>();
        }
        w[k] = num / den;
        dw[k] = dnum / den;
    }
    (w, dw)
}

fn lagrange4(s: f64) -> ([f64; 4], [f64; 4]) {
    lagrange::<4>(s)
}

/// Width of the tensor Lagrange stencil tying fringe nodes to their owner.
const DONOR_WIDTH: usize = 6;

impl SphereGrid {
    pub fn new(size: usize) -> Result<SphereGrid> {
        if size < MIN_GRID {
            return Err(Error::InvalidGrid(format!("grid size {size} is below the minimum {MIN_GRID}")));
        }
        if size > 512 {
            return Err(Error::InvalidGrid(format!("grid size {size} is above the maximum 512")));
        }
        let h = 2.0 * HALF_WIDTH / (size - 1) as f64;
        let charts: Vec<Arc<Chart>> = CENTERS
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let hemi = if k == 1 { Hemisphere::Lower } else { Hemisphere::Upper };
                Arc::new(chart_at(&AmbientPoint::new(c.to_vec()).unwrap(), hemi))
            })
            .collect();
        let frames: [Frame; 6] = std::array::from_fn(|k| Frame::from_chart(&charts[k]));
        let mut grid = SphereGrid {
            size,
            h,
            charts,
            frames,
            nodes: Vec::new(),
            index: vec![NONE; 6 * size * size],
            owned: Vec::new(),
            fringe: Vec::new(),
            fringe_pos: Vec::new(),
            fringe_lu: OnceLock::new(),
        };
        grid.build()?;
        Ok(grid)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -HALF_WIDTH + i as f64 * self.h
    }

    fn valid(&self, i: usize, j: usize) -> bool {
        let (a, b) = (self.coord(i), self.coord(j));
        (a * a + b * b).sqrt() < VALID_RADIUS
    }

    /// Chart whose centre is closest to `p` (lowest label on ties).
    pub fn owner_of(p: &Vec3) -> usize {
        let mut best = 0;
        let mut bv = f64::NEG_INFINITY;
        for (k, c) in CENTERS.iter().enumerate() {
            let v = dot3(p, c);
            if v > bv + 1e-15 {
                bv = v;
                best = k;
            }
        }
        best
    }

    /// Graph coordinates of `p` in chart `c`; `p` must lie in its hemisphere.
    pub fn chart_coords(&self, c: usize, p: &Vec3) -> [f64; 2] {
        let f = self.frames[c].apply(p);
        [f[0], f[1]]
    }

    fn pou(p: &Vec3, c: usize) -> f64 {
        let total: f64 = CENTERS.iter().map(|d| bump(dot3(p, d))).sum();
        bump(dot3(p, &CENTERS[c])) / total
    }

    fn raw_stencil(&self, c: usize, x: [f64; 2]) -> Option<([usize; 16], [(usize, usize); 16], [f64; 16], [[f64; 16]; 2])> {
        let n = self.size;
        let mut base = [0usize; 2];
        let mut wts = [([0.0; 4], [0.0; 4]); 2];
        for d in 0..2 {
            let s = (x[d] + HALF_WIDTH) / self.h;
            let f = s.floor() as isize - 1;
            if f < 0 || f as usize + 3 >= n {
                return None;
            }
            base[d] = f as usize;
            wts[d] = lagrange4(s - f as f64);
        }
        let mut ids = [NONE; 16];
        let mut pos = [(0, 0); 16];
        let mut w = [0.0; 16];
        let mut dw = [[0.0; 16]; 2];
        for a in 0..4 {
            for b in 0..4 {
                let k = 4 * a + b;
                let (i, j) = (base[0] + a, base[1] + b);
                pos[k] = (i, j);
                ids[k] = self.index[(c * n + i) * n + j];
                w[k] = wts[0].0[a] * wts[1].0[b];
                dw[0][k] = wts[0].1[a] * wts[1].0[b] / self.h;
                dw[1][k] = wts[0].0[a] * wts[1].1[b] / self.h;
            }
        }
        Some((ids, pos, w, dw))
    }

    /// Grid positions and weights of the `DONOR_WIDTH²` interpolation
    /// stencil around chart coordinates `x`.
    /// Falls back to the bicubic stencil near the rim of the valid disc.
    fn donor_stencil(&self, x: [f64; 2]) -> Option<Vec<((usize, usize), f64)>> {
        self.tensor_stencil::<DONOR_WIDTH>(x)
            .filter(|st| st.iter().all(|&((i, j), _)| self.valid(i, j)))
            .or_else(|| self.tensor_stencil::<4>(x))
    }

    fn tensor_stencil<const K: usize>(&self, x: [f64; 2]) -> Option<Vec<((usize, usize), f64)>> {
        let n = self.size;
        let mut base = [0usize; 2];
        let mut wts = [[0.0; K]; 2];
        for d in 0..2 {
            let s = (x[d] + HALF_WIDTH) / self.h;
            let f = s.floor() as isize - (K as isize / 2 - 1);
            if f < 0 || f as usize + K > n {
                return None;
            }
            base[d] = f as usize;
            wts[d] = lagrange::<K>(s - f as f64).0;
        }
        let mut out = Vec::with_capacity(K * K);
        for a in 0..K {
            for b in 0..K {
                out.push(((base[0] + a, base[1] + b), wts[0][a] * wts[1][b]));
            }
        }
        Some(out)
    }

    fn build(&mut self) -> Result<()> {
        let n = self.size;
        // Candidate nodes with owner, needed flag.
        let mut needed = vec![false; 6 * n * n];
        let flat = |c: usize, i: usize, j: usize| (c * n + i) * n + j;
        let point_of = |g: &SphereGrid, c: usize, i: usize, j: usize| g.frames[c].lift([g.coord(i), g.coord(j)]);
        let mut queue = Vec::new();
        for c in 0..6 {
            for i in 0..n {
                for j in 0..n {
                    if !self.valid(i, j) {
                        continue;
                    }
                    let p = point_of(self, c, i, j);
                    let owned = Self::owner_of(&p) == c;
                    let quad = Self::pou(&p, c) > 0.0;
                    if owned {
                        for (di, dj) in stencil_offsets() {
                            let (ii, jj) = (i as isize + di, j as isize + dj);
                            if ii < 0 || jj < 0 || ii as usize >= n || jj as usize >= n || !self.valid(ii as usize, jj as usize) {
                                return Err(Error::InvalidGrid("finite-difference stencil leaves the chart".into()));
                            }
                            let k = flat(c, ii as usize, jj as usize);
                            if !needed[k] {
                                needed[k] = true;
                                queue.push(k);
                            }
                        }
                    }
                    if quad {
                        let k = flat(c, i, j);
                        if !needed[k] {
                            needed[k] = true;
                            queue.push(k);
                        }
                    }
                }
            }
        }
        // Close under interpolation donors.
        let mut donor_map: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 6 * n * n];
        while let Some(k) = queue.pop() {
            let (c, i, j) = (k / (n * n), (k / n) % n, k % n);
            let p = point_of(self, c, i, j);
            let o = Self::owner_of(&p);
            if o == c {
                continue;
            }
            let x = self.chart_coords(o, &p);
            let stencil = self
                .donor_stencil(x)
                .ok_or_else(|| Error::InvalidGrid("interpolation stencil leaves the chart".into()))?;
            let mut d = Vec::with_capacity(stencil.len());
            for &((ii, jj), w) in &stencil {
                if !self.valid(ii, jj) {
                    return Err(Error::InvalidGrid("interpolation donor outside the valid disc".into()));
                }
                let kk = flat(o, ii, jj);
                d.push((kk, w));
                if !needed[kk] {
                    needed[kk] = true;
                    queue.push(kk);
                }
            }
            donor_map[k] = d;
        }
        for k in 0..6 * n * n {
            if needed[k] {
                self.index[k] = self.nodes.len();
                let (c, i, j) = (k / (n * n), (k / n) % n, k % n);
                let x = [self.coord(i), self.coord(j)];
                let p = point_of(self, c, i, j);
                let owned = Self::owner_of(&p) == c;
                let b = (1.0 - x[0] * x[0] - x[1] * x[1]).sqrt();
                self.nodes.push(Node {
                    chart: c,
                    i,
                    j,
                    x,
                    point: p,
                    owned,
                    quad_weight: self.h * self.h / b * Self::pou(&p, c),
                    donors: Vec::new(),
                });
            }
        }
        for k in 0..6 * n * n {
            if needed[k] && !donor_map[k].is_empty() {
                let id = self.index[k];
                self.nodes[id].donors = donor_map[k].iter().map(|&(kk, w)| (self.index[kk], w)).collect();
            }
        }
        self.owned = (0..self.nodes.len()).filter(|&k| self.nodes[k].owned).collect();
        self.fringe = (0..self.nodes.len()).filter(|&k| !self.nodes[k].owned).collect();
        self.fringe_pos = vec![NONE; self.nodes.len()];
        for (r, &k) in self.fringe.iter().enumerate() {
            self.fringe_pos[k] = r;
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Ids of owned nodes; together they cover the sphere once.
    pub fn owned(&self) -> &[usize] {
        &self.owned
    }

    pub fn node_at(&self, c: usize, i: isize, j: isize) -> Option<usize> {
        let n = self.size as isize;
        if i < 0 || j < 0 || i >= n || j >= n {
            return None;
        }
        let id = self.index[(c * self.size + i as usize) * self.size + j as usize];
        (id != NONE).then_some(id)
    }

    /// Node id at a stencil offset from an existing node (must be active).
    pub fn neighbor(&self, id: usize, di: isize, dj: isize) -> usize {
        let nd = &self.nodes[id];
        self.node_at(nd.chart, nd.i as isize + di, nd.j as isize + dj).expect("stencil node is active")
    }

    /// Bicubic stencil for evaluating a nodal field at `p` in its owner chart.
    pub fn stencil(&self, p: &Vec3) -> Option<Stencil> {
        let c = Self::owner_of(p);
        let x = self.chart_coords(c, p);
        let (ids, _, w, dw) = self.raw_stencil(c, x)?;
        if ids.contains(&NONE) {
            return None;
        }
        Some(Stencil { chart: c, nodes: ids, w, dw })
    }

    /// Bicubic interpolation of a nodal field at `p`.
    pub fn interpolate(&self, values: &[f64], p: &Vec3) -> Option<f64> {
        self.stencil(p).map(|s| s.nodes.iter().zip(&s.w).map(|(&k, w)| w * values[k]).sum())
    }

    /// Sum of quadrature weights times `values`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.nodes.iter().zip(values).map(|(n, v)| n.quad_weight * v).sum()
    }

    /// Nodal field sampled from a function of the ambient point.
    pub fn sample(&self, f: impl Fn(&Vec3) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|n| f(&n.point)).collect()
    }

    /// Overwrites fringe values so that every fringe node equals its
    /// interpolant. Donor chains form cycles near the cube corners, so the
    /// relations are solved jointly.
    pub fn sync_fringe(&self, values: &mut [f64]) {
        let lu = self.fringe_lu.get_or_init(|| {
            let trip: Vec<Triplet<usize, usize, f64>> = self
                .fringe
                .iter()
                .enumerate()
                .flat_map(|(r, &k)| {
                    let mut row = vec![Triplet::new(r, r, 1.0)];
                    for &(d, w) in &self.nodes[k].donors {
                        if !self.nodes[d].owned {
                            row.push(Triplet::new(r, self.fringe_pos[d], -w));
                        }
                    }
                    row
                })
                .collect();
            let m = self.fringe.len();
            SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &trip)
                .expect("fringe matrix")
                .sp_lu()
                .expect("fringe relations are nonsingular")
        });
        let rhs = Mat::<f64>::from_fn(self.fringe.len(), 1, |r, _| {
            self.nodes[self.fringe[r]]
                .donors
                .iter()
                .filter(|(d, _)| self.nodes[*d].owned)
                .map(|&(d, w)| w * values[d])
                .sum()
        });
        let x = lu.solve(&rhs);
        for (r, &k) in self.fringe.iter().enumerate() {
            values[k] = x[(r, 0)];
        }
    }

    /// Ids of fringe nodes, in increasing order.
    pub fn fringe(&self) -> &[usize] {
        &self.fringe
    }
}

/// The 5 × 5 block touched by the fourth-order derivative stencils.
pub fn stencil_offsets() -> impl Iterator<Item = (isize, isize)> {
    (-2isize..=2).flat_map(|a| (-2isize..=2).map(move |b| (a, b)))
}

pub const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
pub const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Gradient, Hessian and the stencil weights behind them at an owned node.
#[derive(Debug, Clone, Copy)]
pub struct NodalDerivatives {
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// Fourth-order in-chart derivatives of a nodal field at node `id`.
pub fn derivatives(grid: &SphereGrid, values: &[f64], id: usize) -> NodalDerivatives {
    let h = grid.h;
    let at = |di: isize, dj: isize| values[grid.neighbor(id, di, dj)];
    let mut g = [0.0; 2];
    let mut hs = [[0.0; 2]; 2];
    for (k, o) in (-2isize..=2).enumerate() {
        g[0] += D1[k] * at(o, 0) / h;
        g[1] += D1[k] * at(0, o) / h;
        hs[0][0] += D2[k] * at(o, 0) / (h * h);
        hs[1][1] += D2[k] * at(0, o) / (h * h);
    }
    for (a, oa) in (-2isize..=2).enumerate() {
        for (b, ob) in (-2isize..=2).enumerate() {
            if oa != 0 && ob != 0 {
                hs[0][1] += D1[a] * D1[b] * at(oa, ob) / (h * h);
            }
        }
    }
    hs[1][0] = hs[0][1];
    NodalDerivatives { grad: g, hess: hs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_small_grids() {
        assert!(matches!(SphereGrid::new(16), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn owned_nodes_tile_each_face() {
        let g = SphereGrid::new(32).unwrap();
        for &k in g.owned() {
            let nd = &g.nodes()[k];
            assert_eq!(SphereGrid::owner_of(&nd.point), nd.chart);
            assert!(nd.donors.is_empty());
        }
        for nd in g.nodes().iter().filter(|n| !n.owned) {
            let s: f64 = nd.donors.iter().map(|d| d.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // Node points lie on the sphere and re-map to their chart coordinates.
        for nd in g.nodes() {
            assert!((dot3(&nd.point, &nd.point) - 1.0).abs() < 1e-14);
            let x = g.chart_coords(nd.chart, &nd.point);
            assert!((x[0] - nd.x[0]).abs() < 1e-14 && (x[1] - nd.x[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn quadrature_converges() {
        for (n, tol) in [(32, 5e-3), (48, 2e-4), (64, 1e-5), (96, 1e-7)] {
            let g = SphereGrid::new(n).unwrap();
            let area = g.integrate(&vec![1.0; g.len()]);
            assert!((area - 4.0 * PI).abs() < tol, "n={n}: {area}");
            let z2 = g.integrate(&g.sample(|p| p[2] * p[2]));
            assert!((z2 - 4.0 * PI / 3.0).abs() < tol);
            // Odd integrands cancel by the symmetry of the chart layout.
            let odd = g.integrate(&g.sample(|p| p[0] * p[1] * p[1] + p[2]));
            assert!(odd.abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_is_fourth_order() {
        let f = |p: &Vec3| (1.3 * p[0] - 0.4 * p[1] + 0.7 * p[2]).sin();
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = SphereGrid::new(n).unwrap();
            let v = g.sample(f);
            let mut worst: f64 = 0.0;
            for k in 0..500 {
                let t = k as f64 * 0.7;
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / 500.0;
                let r = (1.0 - z * z).sqrt();
                let p = [r * t.cos(), r * t.sin(), z];
                worst = worst.max((g.interpolate(&v, &p).unwrap() - f(&p)).abs());
            }
            errs.push(worst);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 3.5, "{errs:?}");
    }

    #[test]
    fn fringe_values_match_samples() {
        let g = SphereGrid::new(48).unwrap();
        let f = |p: &Vec3| p[0] * p[1] + p[2].exp();
        let exact = g.sample(f);
        let mut v = exact.clone();
        for nd in v.iter_mut().zip(g.nodes()).filter(|(_, n)| !n.owned) {
            *nd.0 = 0.0;
        }
        g.sync_fringe(&mut v);
        let worst = v.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn derivatives_recover_a_quadratic() {
        let g = SphereGrid::new(32).unwrap();
        let id = g.owned()[g.owned().len() / 3];
        let c = g.nodes()[id].chart;
        let f = g.frames[c];
        let vals: Vec<f64> = g
            .nodes()
            .iter()
            .map(|n| {
                let x = g.chart_coords(c, &n.point);
                if dot3(&n.point, &f.0[2]) * f.1 > 0.0 {
                    1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1]
                } else {
                    f64::NAN
                }
            })
            .collect();
        let d = derivatives(&g, &vals, id);
        let x = g.nodes()[id].x;
        assert!((d.grad[0] - (2.0 + x[0] + 3.0 * x[1])).abs() < 1e-10);
        assert!((d.grad[1] - (-1.0 + 3.0 * x[0] - 2.0 * x[1])).abs() < 1e-10);
        assert!((d.hess[0][0] - 1.0).abs() < 1e-9);
        assert!((d.hess[0][1] - 3.0).abs() < 1e-9);
        assert!((d.hess[1][1] + 2.0).abs() < 1e-9);
    }
}
