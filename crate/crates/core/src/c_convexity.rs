//! c-convex analysis of potentials sampled on the sphere grid.
//!
//! Transforms are exact maxima over the owned node set, so every owned node
//! stands for one point of the sphere. Values at fringe nodes are filled in
//! by the same formula; identities are compared at owned nodes only.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::cost_kernel::{y_minus, y_plus};
use crate::error::{Error, Result};
use crate::grid::{derivatives, dot3, SphereGrid, Vec3};
use crate::sphere_geom::{covector_norm, AmbientPoint, ChartPoint};

/// Tolerance for support touching and for grid c-convexity.
pub const TOUCH_TOL: f64 = 1e-8;

/// The nonsplitting threshold on `‖Du‖∞`.
pub const NONSPLITTING_THRESHOLD: f64 = 2.0 / PI;

#[derive(Clone)]
pub struct Potential {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
    mean_zero: bool,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential").field("nodes", &self.values.len()).field("mean_zero", &self.mean_zero).finish()
    }
}

fn cost3(x: &Vec3, y: &Vec3) -> f64 {
    (1.0 - dot3(x, y)).clamp(0.0, 2.0)
}

impl Potential {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Potential> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential values must be finite".into()));
        }
        Ok(Potential { grid, values, mean_zero: false })
    }

    pub fn zero(grid: Arc<SphereGrid>) -> Potential {
        let n = grid.len();
        Potential { grid, values: vec![0.0; n], mean_zero: true }
    }

    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn(&Vec3) -> f64) -> Result<Potential> {
        let v = grid.sample(f);
        Self::new(grid, v)
    }

    /// Subtracts the quadrature mean.
    pub fn normalized(mut self) -> Potential {
        let vol: f64 = self.grid.nodes().iter().map(|n| n.quad_weight).sum();
        let mean = self.grid.integrate(&self.values) / vol;
        for v in &mut self.values {
            *v -= mean;
        }
        self.mean_zero = true;
        self
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// In-chart gradient at an owned node.
    pub fn gradient(&self, id: usize) -> [f64; 2] {
        derivatives(&self.grid, &self.values, id).grad
    }

    /// `max |Du|` over owned nodes in the round metric.
    pub fn gradient_sup(&self) -> f64 {
        self.grid
            .owned()
            .iter()
            .map(|&id| covector_norm(&self.grid.nodes()[id].x, &self.gradient(id)))
            .fold(0.0, f64::max)
    }
}

/// `u^c(y) = max_x (-c(x, y) - u(x))` over owned `x`, at every node `y`.
pub fn c_transform(u: &Potential) -> Potential {
    let g = u.grid();
    let nodes = g.nodes();
    let src: Vec<(Vec3, f64)> = g.owned().iter().map(|&k| (nodes[k].point, u.values[k])).collect();
    let values = nodes
        .par_iter()
        .map(|ny| src.iter().map(|(x, ux)| -cost3(x, &ny.point) - ux).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Potential { grid: g.clone(), values, mean_zero: false }
}

/// Largest `|a - b|` over owned nodes.
pub fn owned_max_diff(a: &Potential, b: &Potential) -> f64 {
    a.grid.owned().iter().map(|&k| (a.values[k] - b.values[k]).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CConvexity {
    pub convex: bool,
    /// `max |(u^c)^c - u|` over owned nodes.
    pub defect: f64,
}

pub fn is_c_convex(u: &Potential) -> CConvexity {
    is_c_convex_with(u, TOUCH_TOL)
}

pub fn is_c_convex_with(u: &Potential, tol: f64) -> CConvexity {
    let ucc = c_transform(&c_transform(u));
    let defect = owned_max_diff(&ucc, u);
    CConvexity { convex: defect <= tol, defect }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub node: usize,
    pub y: Vec3,
    pub lambda: f64,
}

/// Target points whose supports `-c(·, y) + λ` touch `u` at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdifferentialWitness {
    pub node: usize,
    pub x: Vec3,
    pub supports: Vec<Support>,
}

/// A potential together with its transform, for repeated support queries.
pub struct SupportSearch<'a> {
    u: &'a Potential,
    uc: Potential,
    defect: f64,
}

impl<'a> SupportSearch<'a> {
    /// Fails with `NotCConvex` when the grid defect exceeds `tol`.
    pub fn new(u: &'a Potential, tol: f64) -> Result<SupportSearch<'a>> {
        let uc = c_transform(u);
        let ucc = c_transform(&uc);
        let defect = owned_max_diff(&ucc, u);
        if defect > tol {
            return Err(Error::NotCConvex(defect));
        }
        Ok(SupportSearch { u, uc, defect })
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn transform(&self) -> &Potential {
        &self.uc
    }

    /// `u(x) + c(x, y) + u^c(y) ≥ 0` at every owned `y`.
    fn gaps(&self, x: usize) -> Vec<(usize, f64)> {
        let g = self.u.grid();
        let nodes = g.nodes();
        let px = nodes[x].point;
        g.owned().iter().map(|&k| (k, self.u.values[x] + cost3(&px, &nodes[k].point) + self.uc.values[k])).collect()
    }

    fn witness_from(&self, x: usize, keep: impl Fn(f64) -> bool) -> SubdifferentialWitness {
        let nodes = self.u.grid().nodes();
        let px = nodes[x].point;
        let supports = self
            .gaps(x)
            .into_iter()
            .filter(|&(_, gap)| keep(gap))
            .map(|(k, _)| Support { node: k, y: nodes[k].point, lambda: self.u.values[x] + cost3(&px, &nodes[k].point) })
            .collect();
        SubdifferentialWitness { node: x, x: px, supports }
    }

    /// Supports touching within `tol`.
    pub fn witness(&self, x: usize, tol: f64) -> SubdifferentialWitness {
        self.witness_from(x, |gap| gap <= tol)
    }

    /// Supports within `tol` of the best one; never empty.
    pub fn best_supports(&self, x: usize, tol: f64) -> SubdifferentialWitness {
        let min = self.gaps(x).iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        self.witness_from(x, |gap| gap <= min + tol)
    }
}

/// `∂_c u(x)` at node `x`, for a grid c-convex `u`.
pub fn c_subdifferential(u: &Potential, x: usize) -> Result<SubdifferentialWitness> {
    Ok(SupportSearch::new(u, TOUCH_TOL)?.witness(x, TOUCH_TOL))
}

fn branch_at(u: &Potential, id: usize, plus: bool) -> Result<Vec3> {
    let g = u.grid();
    let nd = &g.nodes()[id];
    let p = u.gradient(id);
    let norm = covector_norm(&nd.x, &p);
    if !(norm < 1.0) {
        return Err(Error::GradientTooLarge(norm));
    }
    let cp = ChartPoint::new(g.charts[nd.chart].clone(), nd.x.to_vec())?;
    let y: AmbientPoint = if plus { y_plus(&cp, &p)? } else { y_minus(&cp, &p)? };
    let c = y.coords();
    Ok([c[0], c[1], c[2]])
}

fn branch_map(u: &Potential, plus: bool) -> Result<Vec<Vec3>> {
    u.grid().owned().par_iter().map(|&id| branch_at(u, id, plus)).collect()
}

/// `T⁺(x) = Y⁺(x, Du(x))` at each owned node, in `grid.owned()` order.
pub fn t_plus_map(u: &Potential) -> Result<Vec<Vec3>> {
    branch_map(u, true)
}

/// `T⁻(x) = Y⁻(x, Du(x))` at each owned node.
pub fn t_minus_map(u: &Potential) -> Result<Vec<Vec3>> {
    branch_map(u, false)
}

/// Geodesic distance from `y` to `t` in units of the ambient width `h/β(x)`
/// of the source node's cell.
pub fn cell_distance(grid: &SphereGrid, x: usize, t: &Vec3, y: &Vec3) -> f64 {
    let nd = &grid.nodes()[x];
    let b = (1.0 - nd.x[0] * nd.x[0] - nd.x[1] * nd.x[1]).sqrt();
    dot3(t, y).clamp(-1.0, 1.0).acos() * b / grid.h
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonsplittingCertificate {
    pub pass: bool,
    pub grad_max: f64,
    /// `grad_max < 2/π`, the regime where the lemma applies.
    pub in_regime: bool,
    pub convexity_defect: f64,
    pub nodes_checked: usize,
    pub worst_node: usize,
    /// Largest witness distance from `T⁺(x)`, in grid cells.
    pub worst_cells: f64,
}

/// Every best support at an owned `x` must lie within 1.5 cells of `T⁺(x)`
/// (or of each other where `T⁺` is undefined).
pub fn nonsplitting_check(u: &Potential) -> Result<NonsplittingCertificate> {
    nonsplitting_check_with(u, TOUCH_TOL)
}

/// As [`nonsplitting_check`], accepting a grid c-convexity defect up to
/// `convexity_tol` (sampled smooth potentials carry an `O(h²)` defect).
pub fn nonsplitting_check_with(u: &Potential, convexity_tol: f64) -> Result<NonsplittingCertificate> {
    let search = SupportSearch::new(u, convexity_tol)?;
    let g = u.grid();
    let grad_max = u.gradient_sup();
    let worst = g
        .owned()
        .par_iter()
        .map(|&x| {
            let w = search.best_supports(x, TOUCH_TOL);
            // Without T⁺ (gradient ≥ 1) the witness spread is measured instead.
            let d = match branch_at(u, x, true) {
                Ok(t) => w.supports.iter().map(|s| cell_distance(g, x, &t, &s.y)).fold(0.0, f64::max),
                Err(_) => w
                    .supports
                    .iter()
                    .flat_map(|a| w.supports.iter().map(move |b| (a, b)))
                    .map(|(a, b)| cell_distance(g, x, &a.y, &b.y))
                    .fold(0.0, f64::max),
            };
            (d, x)
        })
        .reduce(|| (0.0, usize::MAX), |a, b| if b.0 > a.0 { b } else { a });
    Ok(NonsplittingCertificate {
        pass: worst.0 <= 1.5,
        grad_max,
        in_regime: grad_max < NONSPLITTING_THRESHOLD,
        convexity_defect: search.defect(),
        nodes_checked: g.owned().len(),
        worst_node: worst.1,
        worst_cells: worst.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectivityReport {
    /// Pairs of non-adjacent nodes whose images are within half a cell.
    pub collisions: usize,
    pub min_image_gap: f64,
}

/// Grid injectivity of a map on owned nodes: nodes more than two cells apart
/// must have images at least half a cell apart.
pub fn map_injectivity(grid: &SphereGrid, images: &[Vec3]) -> InjectivityReport {
    let ids = grid.owned();
    let r = 0.5 * grid.h;
    let key = |p: &Vec3| -> [i64; 3] { std::array::from_fn(|a| (p[a] / r).floor() as i64) };
    let mut buckets: std::collections::HashMap<[i64; 3], Vec<usize>> = std::collections::HashMap::new();
    for (k, p) in images.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(k);
    }
    let dist = |a: &Vec3, b: &Vec3| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let mut collisions = 0;
    let mut min_gap = f64::INFINITY;
    for (k, p) in images.iter().enumerate() {
        let c = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(list) = buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else { continue };
                    for &l in list {
                        if l <= k {
                            continue;
                        }
                        let src = dist(&grid.nodes()[ids[k]].point, &grid.nodes()[ids[l]].point);
                        if src < 2.0 * grid.h {
                            continue;
                        }
                        let d = dist(p, &images[l]);
                        min_gap = min_gap.min(d);
                        if d < r {
                            collisions += 1;
                        }
                    }
                }
            }
        }
    }
    InjectivityReport { collisions, min_image_gap: min_gap }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarInequalityReport {
    /// `min (1 - s t - cos t)` over the sample grid.
    pub min_margin: f64,
    pub argmin: (f64, f64),
    pub samples: usize,
}

/// Samples `s t + cos t < 1` on a `ns × nt` grid of `[0, s_max] × [π/2, π]`.
pub fn scalar_inequality(s_max: f64, ns: usize, nt: usize) -> ScalarInequalityReport {
    let mut best = (f64::INFINITY, (0.0, 0.0));
    for a in 0..ns {
        let s = s_max * a as f64 / (ns.max(2) - 1) as f64;
        for b in 0..nt {
            let t = PI / 2.0 + (PI / 2.0) * b as f64 / (nt.max(2) - 1) as f64;
            let m = 1.0 - s * t - t.cos();
            if m < best.0 {
                best = (m, (s, t));
            }
        }
    }
    ScalarInequalityReport { min_margin: best.0, argmin: best.1, samples: ns * nt }
}
