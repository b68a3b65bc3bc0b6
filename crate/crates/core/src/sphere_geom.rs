//! Hemisphere graph charts on the unit sphere `S^n ⊂ R^{n+1}`.
//!
//! A chart is an orthogonal frame that rotates its center onto `±e_{n+1}`.
//! Points of the open hemisphere around the center are written as graphs
//! `(x, ±β(x))` over the open unit ball, with `β(x) = sqrt(1 - |x|²)`.
//! The jets of `β` and of the round metric in these coordinates feed the
//! cost derivatives and the PDE discretization.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3, Tensor4};

const UNIT_TOL: f64 = 1e-12;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A point on `S^n` in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint {
    coords: Vec<f64>,
}

impl AmbientPoint {
    /// Wraps `coords`, which must already have unit norm within `1e-12`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let r = norm(&coords);
        if (r - 1.0).abs() > UNIT_TOL || coords.len() < 2 {
            return Err(Error::NotUnitNorm(r));
        }
        Ok(Self { coords })
    }

    /// Projects a nonzero vector radially onto the sphere.
    pub fn normalized(coords: Vec<f64>) -> Result<Self> {
        let r = norm(&coords);
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::NotUnitNorm(r));
        }
        Ok(Self { coords: coords.into_iter().map(|c| c / r).collect() })
    }

    /// Basis vector `e_k` (zero based) of `R^{ambient_dim}`.
    pub fn basis(ambient_dim: usize, k: usize) -> Self {
        let mut coords = vec![0.0; ambient_dim];
        coords[k] = 1.0;
        Self { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Sphere dimension `n` (the ambient space is `R^{n+1}`).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn dot(&self, other: &AmbientPoint) -> f64 {
        dot(&self.coords, &other.coords)
    }

    pub fn antipode(&self) -> Self {
        Self { coords: self.coords.iter().map(|c| -c).collect() }
    }
}

/// Which graph of the chart frame a chart uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    Upper,
    Lower,
}

impl Hemisphere {
    pub fn sign(self) -> f64 {
        match self {
            Hemisphere::Upper => 1.0,
            Hemisphere::Lower => -1.0,
        }
    }

    /// Hemisphere of a frame height; the equator goes to the upper chart.
    pub fn of_height(h: f64) -> Self {
        if h < 0.0 {
            Hemisphere::Lower
        } else {
            Hemisphere::Upper
        }
    }
}

/// Orthogonal frame rotating `center` onto `sign · e_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    center: AmbientPoint,
    frame: DMatrix<f64>,
    hemisphere: Hemisphere,
}

impl Chart {
    pub fn center(&self) -> &AmbientPoint {
        &self.center
    }

    /// Rows are the frame basis; `frame · p` gives frame coordinates of `p`.
    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn hemisphere(&self) -> Hemisphere {
        self.hemisphere
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Frame coordinates `frame · p`.
    pub fn frame_coords(&self, p: &[f64]) -> Vec<f64> {
        let v = &self.frame * DVector::from_column_slice(p);
        v.iter().copied().collect()
    }

    /// Ambient vector with the given frame coordinates, `frameᵀ · y`.
    pub fn from_frame_coords(&self, y: &[f64]) -> Vec<f64> {
        let v = self.frame.transpose() * DVector::from_column_slice(y);
        v.iter().copied().collect()
    }
}

/// Graph coordinates `x` of a point in the open unit ball of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    x: Vec<f64>,
    chart: Arc<Chart>,
}

impl ChartPoint {
    pub fn new(chart: Arc<Chart>, x: Vec<f64>) -> Result<Self> {
        if x.len() != chart.dim() {
            return Err(Error::DimensionMismatch { expected: chart.dim(), got: x.len() });
        }
        let r = norm(&x);
        if !(r < 1.0) {
            return Err(Error::OutsideUnitBall(r));
        }
        Ok(Self { x, chart })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn beta(&self) -> f64 {
        beta(&self.x)
    }
}

/// `β(x) = sqrt(1 - |x|²)`.
pub fn beta(x: &[f64]) -> f64 {
    (1.0 - dot(x, x)).max(0.0).sqrt()
}

/// Builds the chart around `center`.
///
/// The first `n` frame rows come from Gram-Schmidt on standard basis
/// vectors ordered by decreasing length of their component orthogonal to
/// `center` (ties to the lower index); the last row is `sign · center`.
pub fn chart_at(center: &AmbientPoint, hemisphere: Hemisphere) -> Chart {
    let dim = center.coords.len();
    let c = &center.coords;
    let mut order: Vec<usize> = (0..dim).collect();
    let perp = |k: usize| (1.0 - c[k] * c[k]).max(0.0).sqrt();
    // Stable sort keeps lower indices first on ties.
    order.sort_by(|&a, &b| perp(b).partial_cmp(&perp(a)).unwrap());

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    for &k in order.iter().take(dim - 1) {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        // Twice for numerical orthogonality.
        for _ in 0..2 {
            let a = dot(&v, c);
            v.iter_mut().zip(c).for_each(|(vi, ci)| *vi -= a * ci);
            for r in &rows {
                let a = dot(&v, r);
                v.iter_mut().zip(r).for_each(|(vi, ri)| *vi -= a * ri);
            }
        }
        let len = norm(&v);
        rows.push(v.into_iter().map(|vi| vi / len).collect());
    }
    let s = hemisphere.sign();
    rows.push(c.iter().map(|ci| s * ci).collect());

    let frame = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    Chart { center: center.clone(), frame, hemisphere }
}

/// Graph coordinates of `p` in `chart`.
pub fn to_chart(chart: &Arc<Chart>, p: &AmbientPoint) -> Result<ChartPoint> {
    if p.coords.len() != chart.dim() + 1 {
        return Err(Error::DimensionMismatch { expected: chart.dim() + 1, got: p.coords.len() });
    }
    let inner = p.dot(&chart.center);
    if inner <= 0.0 {
        return Err(Error::PointOutsideChart(inner));
    }
    let mut y = chart.frame_coords(&p.coords);
    y.pop();
    ChartPoint::new(chart.clone(), y)
}

/// Ambient point `frameᵀ (x, ±β(x))`.
pub fn lift(q: &ChartPoint) -> AmbientPoint {
    let mut y = q.x.clone();
    y.push(q.chart.hemisphere.sign() * beta(&q.x));
    let mut coords = q.chart.from_frame_coords(&y);
    let r = norm(&coords);
    coords.iter_mut().for_each(|c| *c /= r);
    AmbientPoint { coords }
}

/// Derivatives of `β` up to third order.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaJet {
    pub beta: f64,
    pub d1: Vec<f64>,
    pub d2: Matrix,
    pub d3: Tensor3,
}

pub fn beta_jet(x: &[f64]) -> BetaJet {
    let n = x.len();
    let b = beta(x);
    let b3 = b * b * b;
    let b5 = b3 * b * b;
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let d1 = x.iter().map(|xi| -xi / b).collect();
    let d2 = Matrix::from_fn(n, |[i, j]| -d(i, j) / b - x[i] * x[j] / b3);
    let d3 = Tensor3::from_fn(n, |[i, j, k]| {
        -(d(i, j) * x[k] + d(i, k) * x[j] + d(j, k) * x[i]) / b3 - 3.0 * x[i] * x[j] * x[k] / b5
    });
    BetaJet { beta: b, d1, d2, d3 }
}

/// Round metric in graph coordinates with its first two derivatives,
/// and the inverse metric with its first two derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub g: Matrix,
    /// `dg[[i, j, k]] = ∂_k g_ij`
    pub dg: Tensor3,
    /// `d2g[[i, j, k, l]] = ∂_k ∂_l g_ij`
    pub d2g: Tensor4,
    pub ginv: Matrix,
    pub dginv: Tensor3,
    pub d2ginv: Tensor4,
}

pub fn metric_jet(x: &[f64]) -> MetricJet {
    let n = x.len();
    let bj = beta_jet(x);
    let b1 = &bj.d1;
    let b2 = |i: usize, j: usize| bj.d2.get([i, j]);
    let b3 = |i: usize, j: usize, k: usize| bj.d3.get([i, j, k]);
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };

    let g = Matrix::from_fn(n, |[i, j]| d(i, j) + b1[i] * b1[j]);
    let dg = Tensor3::from_fn(n, |[i, j, k]| b2(i, k) * b1[j] + b1[i] * b2(j, k));
    let d2g = Tensor4::from_fn(n, |[i, j, k, l]| {
        b3(i, k, l) * b1[j] + b2(i, k) * b2(j, l) + b2(i, l) * b2(j, k) + b1[i] * b3(j, k, l)
    });

    let ginv_na = g.to_nalgebra().try_inverse().expect("metric is positive definite");
    let ginv = Matrix::from_nalgebra(&ginv_na);
    // ∂_k G⁻¹ = -G⁻¹ (∂_k G) G⁻¹, differentiated once more for the second jet.
    let slice_k = |k: usize| DMatrix::from_fn(n, n, |i, j| dg.get([i, j, k]));
    let slice_kl = |k: usize, l: usize| DMatrix::from_fn(n, n, |i, j| d2g.get([i, j, k, l]));
    let gk: Vec<DMatrix<f64>> = (0..n).map(slice_k).collect();
    let mut dginv = Tensor3::zeros(n);
    let mut d2ginv = Tensor4::zeros(n);
    for k in 0..n {
        let m = -(&ginv_na * &gk[k] * &ginv_na);
        for i in 0..n {
            for j in 0..n {
                dginv.set([i, j, k], m[(i, j)]);
            }
        }
        for l in 0..n {
            let m = &ginv_na * &gk[l] * &ginv_na * &gk[k] * &ginv_na
                + &ginv_na * &gk[k] * &ginv_na * &gk[l] * &ginv_na
                - &ginv_na * slice_kl(k, l) * &ginv_na;
            for i in 0..n {
                for j in 0..n {
                    d2ginv.set([i, j, k, l], m[(i, j)]);
                }
            }
        }
    }
    MetricJet { g, dg, d2g, ginv, dginv, d2ginv }
}

/// `g̊`-length of a covector `p` at chart coordinates `x`.
pub fn covector_norm(x: &[f64], p: &[f64]) -> f64 {
    // g^{ij} = δ_ij - x_i x_j in graph coordinates.
    let xp = dot(x, p);
    (dot(p, p) - xp * xp).max(0.0).sqrt()
}

/// `g̊`-length of a tangent vector `v` at chart coordinates `x`.
pub fn vector_norm(x: &[f64], v: &[f64]) -> f64 {
    let b = beta(x);
    let bv: f64 = x.iter().zip(v).map(|(xi, vi)| -xi / b * vi).sum();
    (dot(v, v) + bv * bv).sqrt()
}

/// Great-circle distance, `arccos <x, y>` with the inner product clamped to `[-1, 1]`.
pub fn geodesic_distance(x: &AmbientPoint, y: &AmbientPoint) -> f64 {
    x.dot(y).clamp(-1.0, 1.0).acos()
}
