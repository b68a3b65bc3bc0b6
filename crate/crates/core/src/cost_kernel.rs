//! The cost `c(x, y) = |x - y|² / 2 = 1 - <x, y>` on the sphere.
//!
//! Derivatives are taken in a graph chart: `x` lives in its own chart and
//! `y` is written over the same frame, using the hemisphere graph that
//! contains it (the equator goes to the upper graph). With frame heights
//! `h_x = s_x β(x)` and `h_y = s_y β(y)` the cost is
//! `1 - x·y - σ β(x) β(y)` where `σ = s_x s_y`.
//!
//! Index convention: unprimed indices before the comma differentiate in
//! `x`, indices after the comma differentiate in `y`, so `ci_k[[i, k]]`
//! is `∂²c / ∂x_i ∂y_k`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lowdisc::{unit_vector, Halton};
use crate::sphere_geom::{
    beta_jet, chart_at, covector_norm, dot, geodesic_distance, lift, vector_norm, AmbientPoint,
    Chart, ChartPoint, Hemisphere,
};
use crate::tensor::{Matrix, Tensor3, Tensor4};

const EQUATOR_TOL: f64 = 1e-8;
const GRADIENT_MARGIN: f64 = 1e-10;
const DET_TOL: f64 = 1e-12;

/// `c(x, y) = 1 - <x, y>`, equal to `|x - y|²/2` on the sphere. Clamped to
/// `[0, 2]` against rounding in the inner product.
pub fn cost(x: &AmbientPoint, y: &AmbientPoint) -> f64 {
    (1.0 - x.dot(y)).clamp(0.0, 2.0)
}

/// Complete derivative bundle of `c` at a pair of points.
#[derive(Debug, Clone, PartialEq)]
pub struct CostJet {
    pub c: f64,
    pub ci: Vec<f64>,
    pub cij: Matrix,
    pub ci_k: Matrix,
    pub cij_k: Tensor3,
    pub ci_kl: Tensor3,
    pub cij_kl: Tensor4,
    /// Graph coordinates of `y` over the frame of `x`'s chart.
    pub y_coords: Vec<f64>,
    /// Graph used for `y`.
    pub y_hemisphere: Hemisphere,
}

/// Graph coordinates of an ambient point over `chart`'s frame, with the
/// hemisphere selected by the sign of the frame height.
pub fn frame_graph_coords(chart: &Chart, y: &AmbientPoint) -> (Vec<f64>, f64) {
    let mut yf = chart.frame_coords(y.coords());
    let h = yf.pop().unwrap();
    (yf, h)
}

pub fn cost_jet(x: &ChartPoint, y: &AmbientPoint) -> Result<CostJet> {
    let chart = x.chart();
    let n = chart.dim();
    if y.coords().len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, got: y.coords().len() });
    }
    let (yc, hy) = frame_graph_coords(chart, y);
    let bx = beta_jet(x.x());
    if bx.beta < EQUATOR_TOL || hy.abs() < EQUATOR_TOL {
        return Err(Error::ChartDegeneracy);
    }
    let y_hemisphere = Hemisphere::of_height(hy);
    let by = beta_jet(&yc);
    let sigma = chart.hemisphere().sign() * y_hemisphere.sign();
    let xs = x.x();

    let c = 1.0 - dot(xs, &yc) - sigma * bx.beta * by.beta;
    let ci = (0..n).map(|i| -yc[i] - sigma * bx.d1[i] * by.beta).collect();
    let cij = Matrix::from_fn(n, |[i, j]| -sigma * bx.d2.get([i, j]) * by.beta);
    let ci_k = Matrix::from_fn(n, |[i, k]| {
        -(if i == k { 1.0 } else { 0.0 }) - sigma * bx.d1[i] * by.d1[k]
    });
    let cij_k = Tensor3::from_fn(n, |[i, j, k]| -sigma * bx.d2.get([i, j]) * by.d1[k]);
    let ci_kl = Tensor3::from_fn(n, |[i, k, l]| -sigma * bx.d1[i] * by.d2.get([k, l]));
    let cij_kl =
        Tensor4::from_fn(n, |[i, j, k, l]| -sigma * bx.d2.get([i, j]) * by.d2.get([k, l]));

    Ok(CostJet { c, ci, cij, ci_k, cij_k, ci_kl, cij_kl, y_coords: yc, y_hemisphere })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Branch {
    Plus,
    Minus,
}

fn branch_inverse(x: &ChartPoint, p: &[f64], branch: Branch) -> Result<AmbientPoint> {
    let chart = x.chart();
    let n = chart.dim();
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: p.len() });
    }
    let xs = x.x();
    let pn = covector_norm(xs, p);
    if pn >= 1.0 - GRADIENT_MARGIN {
        return Err(Error::GradientTooLarge(pn));
    }
    // y = p + τ x and h_y = τ h_x solve -∂_x c = p on the sphere; then
    // <x, y> = x·p + τ and τ² + 2τ(x·p) + |p|² - 1 = 0.
    let xp = dot(xs, p);
    let root = (1.0 - pn * pn).sqrt();
    let tau = match branch {
        Branch::Plus => -xp + root,
        Branch::Minus => -xp - root,
    };
    let hx = chart.hemisphere().sign() * x.beta();
    let mut yf: Vec<f64> = (0..n).map(|i| p[i] + tau * xs[i]).collect();
    yf.push(tau * hx);
    AmbientPoint::normalized(chart.from_frame_coords(&yf))
}

/// The branch of the cost exponential with `<x, Y⁺> > 0`.
pub fn y_plus(x: &ChartPoint, p: &[f64]) -> Result<AmbientPoint> {
    branch_inverse(x, p, Branch::Plus)
}

/// The branch of the cost exponential with `<x, Y⁻> < 0`.
pub fn y_minus(x: &ChartPoint, p: &[f64]) -> Result<AmbientPoint> {
    branch_inverse(x, p, Branch::Minus)
}

/// Contracted MTW tensor at a pair: `coefficients[[i, j, k, l]]` pairs with
/// `V^i W^j η_k ζ_l` for tangent vectors `V, W` and covectors `η, ζ` at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MtwForm {
    pub coefficients: Tensor4,
    pub x: ChartPoint,
    pub y: AmbientPoint,
}

impl MtwForm {
    pub fn eval(&self, v: &[f64], w: &[f64], eta: &[f64], zeta: &[f64]) -> f64 {
        let n = v.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        s += self.coefficients.get([i, j, k, l]) * v[i] * w[j] * eta[k] * zeta[l];
                    }
                }
            }
        }
        s
    }
}

/// Assembles `(c_{ij,r} c^{r,s} c_{s,pq} - c_{ij,pq}) c^{p,k} c^{q,l}` from a jet.
pub fn mtw_from_jet(jet: &CostJet) -> Result<Tensor4> {
    let n = jet.ci.len();
    let cross = jet.ci_k.to_nalgebra();
    let det = cross.determinant();
    if det.abs() < DET_TOL {
        return Err(Error::SingularCrossDifference(det.abs()));
    }
    // inv[(r, s)]: r is a y index, s an x index.
    let inv: DMatrix<f64> = cross.try_inverse().ok_or(Error::SingularCrossDifference(det.abs()))?;
    let mut lowered = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for p in 0..n {
                for q in 0..n {
                    let mut acc = -jet.cij_kl.get([i, j, p, q]);
                    for r in 0..n {
                        for s in 0..n {
                            acc += jet.cij_k.get([i, j, r]) * inv[(r, s)] * jet.ci_kl.get([s, p, q]);
                        }
                    }
                    lowered.set([i, j, p, q], acc);
                }
            }
        }
    }
    Ok(Tensor4::from_fn(n, |[i, j, k, l]| {
        let mut acc = 0.0;
        for p in 0..n {
            for q in 0..n {
                acc += lowered.get([i, j, p, q]) * inv[(p, k)] * inv[(q, l)];
            }
        }
        acc
    }))
}

pub fn mtw_form(x: &ChartPoint, y: &AmbientPoint) -> Result<MtwForm> {
    let d = geodesic_distance(&lift(x), y);
    if d <= 1e-6 {
        return Err(Error::InvalidInput(format!("MTW tensor needs distinct points (distance {d})")));
    }
    let jet = cost_jet(x, y)?;
    Ok(MtwForm { coefficients: mtw_from_jet(&jet)?, x: x.clone(), y: y.clone() })
}

/// `S(V, V, η, η) / (|V|² |η|²)` in the metric at `x`.
pub fn mtw_ratio(form: &MtwForm, v: &[f64], eta: &[f64]) -> f64 {
    let xs = form.x.x();
    let vn = vector_norm(xs, v);
    let en = covector_norm(xs, eta);
    form.eval(v, v, eta, eta) / (vn * vn * en * en)
}

fn halton_vector(h: &[f64], x: &[f64], covector: bool) -> Vec<f64> {
    let mut v = unit_vector(h);
    let len = if covector { covector_norm(x, &v) } else { vector_norm(x, &v) };
    v.iter_mut().for_each(|c| *c /= len);
    v
}

/// Minimum of `S(V, V, η, η)` over `samples` metric-unit pairs `(V, η)`
/// drawn from a Halton sequence (seed 0).
pub fn a3s_margin(x: &ChartPoint, y: &AmbientPoint, samples: usize) -> Result<f64> {
    let form = mtw_form(x, y)?;
    let n = x.x().len();
    let mut seq = Halton::new(2 * n, 0);
    let mut min = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let u = seq.next_point();
        let v = halton_vector(&u[..n], x.x(), false);
        let eta = halton_vector(&u[n..], x.x(), true);
        min = min.min(form.eval(&v, &v, &eta, &eta));
    }
    Ok(min)
}

/// Outcome of a scan of MTW ratios over sampled quadruples.
#[derive(Debug, Clone)]
pub struct MtwScan {
    pub min_margin: f64,
    pub argmin_x: AmbientPoint,
    pub argmin_y: AmbientPoint,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Scans `S(V,V,η,η)/(|V|²|η|²)` over `samples` Halton quadruples with
/// `x` in the unit-ball chart at `e_{n+1}` (`|x| ≤ 0.9`) and `y` at
/// geodesic distance in `(dmin, dmax)` from `x`. Quadruples landing on a
/// degenerate chart configuration are skipped and counted.
pub fn mtw_scan(n: usize, samples: usize, dmin: f64, dmax: f64, seed: u64) -> Result<MtwScan> {
    if n < 1 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    let chart = Arc::new(chart_at(&AmbientPoint::basis(n + 1, n), Hemisphere::Upper));
    let mut seq = Halton::new(4 * n + 3, seed);
    let mut best: Option<(f64, AmbientPoint, AmbientPoint)> = None;
    let (mut evaluated, mut skipped) = (0, 0);
    while evaluated < samples {
        let u = seq.next_point();
        let dir = unit_vector(&u[..n]);
        let r = 0.9 * u[n].powf(1.0 / n as f64);
        let xpt = ChartPoint::new(chart.clone(), dir.iter().map(|d| r * d).collect())?;
        let xa = lift(&xpt);
        // Tangent direction at x: project a sampled ambient direction.
        let raw = unit_vector(&u[n + 1..2 * n + 2]);
        let a = dot(&raw, xa.coords());
        let mut t: Vec<f64> = raw.iter().zip(xa.coords()).map(|(r, x)| r - a * x).collect();
        let tl = dot(&t, &t).sqrt();
        if tl < 1e-9 {
            skipped += 1;
            continue;
        }
        t.iter_mut().for_each(|c| *c /= tl);
        let d = dmin + (dmax - dmin) * u[2 * n + 2];
        let ya = AmbientPoint::normalized(
            xa.coords().iter().zip(&t).map(|(x, t)| d.cos() * x + d.sin() * t).collect(),
        )?;
        let form = match mtw_form(&xpt, &ya) {
            Ok(f) => f,
            Err(Error::ChartDegeneracy) | Err(Error::SingularCrossDifference(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let v = halton_vector(&u[2 * n + 3..3 * n + 3], xpt.x(), false);
        let eta = halton_vector(&u[3 * n + 3..4 * n + 3], xpt.x(), true);
        let ratio = form.eval(&v, &v, &eta, &eta);
        evaluated += 1;
        if best.as_ref().is_none_or(|b| ratio < b.0) {
            best = Some((ratio, xa, ya));
        }
    }
    let (min_margin, argmin_x, argmin_y) = best.ok_or(Error::InvalidInput("no samples".into()))?;
    Ok(MtwScan { min_margin, argmin_x, argmin_y, evaluated, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn north() -> Arc<Chart> {
        Arc::new(chart_at(&AmbientPoint::basis(3, 2), Hemisphere::Upper))
    }

    fn point_over(chart: &Arc<Chart>, y: &[f64], lower: bool) -> AmbientPoint {
        let mut f = y.to_vec();
        let b = crate::sphere_geom::beta(y);
        f.push(if lower { -b } else { b });
        AmbientPoint::new(chart.from_frame_coords(&f)).unwrap()
    }

    #[test]
    fn cost_examples() {
        let x = AmbientPoint::basis(3, 0);
        assert_eq!(cost(&x, &x), 0.0);
        assert_eq!(cost(&x, &x.antipode()), 2.0);
        assert_eq!(cost(&x, &AmbientPoint::basis(3, 1)), 1.0);
    }

    #[test]
    fn jet_at_chart_center() {
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.0, 0.0]).unwrap();
        let yc = [0.3, -0.2];
        let y = point_over(&chart, &yc, false);
        let j = cost_jet(&x, &y).unwrap();
        let by = crate::sphere_geom::beta(&yc);
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        for i in 0..2 {
            assert_abs_diff_eq!(j.ci[i], -yc[i], epsilon = 1e-15);
            for k in 0..2 {
                assert_abs_diff_eq!(j.cij.get([i, k]), d(i, k) * by, epsilon = 1e-15);
                assert_abs_diff_eq!(j.ci_k.get([i, k]), -d(i, k), epsilon = 1e-15);
                for l in 0..2 {
                    assert_abs_diff_eq!(j.cij_k.get([i, k, l]), -d(i, k) * yc[l] / by, epsilon = 1e-14);
                    assert_eq!(j.ci_kl.get([i, k, l]), 0.0);
                    for m in 0..2 {
                        let expect = -d(i, k) * (d(l, m) / by + yc[l] * yc[m] / by.powi(3));
                        assert_abs_diff_eq!(j.cij_kl.get([i, k, l, m]), expect, epsilon = 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn jet_at_coincident_center() {
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.0, 0.0]).unwrap();
        let j = cost_jet(&x, chart.center()).unwrap();
        assert_eq!(j.c, 0.0);
        assert_eq!(j.ci, vec![0.0, 0.0]);
        assert_eq!(j.cij, Matrix::identity(2));
    }

    #[test]
    fn jet_rejects_equator() {
        let chart = north();
        let x = ChartPoint::new(chart, vec![0.1, 0.0]).unwrap();
        assert_eq!(cost_jet(&x, &AmbientPoint::basis(3, 1)), Err(Error::ChartDegeneracy));
    }

    #[test]
    fn jet_cost_agrees_with_ambient_for_lower_y() {
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.4, 0.1]).unwrap();
        let y = point_over(&chart, &[0.2, 0.5], true);
        let j = cost_jet(&x, &y).unwrap();
        assert_eq!(j.y_hemisphere, Hemisphere::Lower);
        assert_abs_diff_eq!(j.c, cost(&lift(&x), &y), epsilon = 1e-14);
    }

    #[test]
    fn y_plus_examples() {
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.0, 0.0]).unwrap();
        assert_eq!(y_plus(&x, &[0.0, 0.0]).unwrap(), lift(&x));
        let y = y_plus(&x, &[0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(y.coords()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(y.coords()[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.coords()[2], 0.75f64.sqrt(), epsilon = 1e-15);
        let y = y_minus(&x, &[0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(y.coords()[2], -0.75f64.sqrt(), epsilon = 1e-15);
        let y = y_minus(&x, &[0.0, 0.0]).unwrap();
        assert_eq!(y, lift(&x).antipode());
    }

    #[test]
    fn branch_inverse_rejects_large_gradient() {
        let x = ChartPoint::new(north(), vec![0.3, 0.0]).unwrap();
        // |p|_g = sqrt(|p|² - (x·p)²)
        assert!(matches!(y_plus(&x, &[0.0, 1.0]), Err(Error::GradientTooLarge(_))));
        assert!(y_plus(&x, &[1.0, 0.0]).is_ok());
    }

    #[test]
    fn branch_residuals_at_generic_point() {
        let chart = Arc::new(chart_at(&AmbientPoint::normalized(vec![0.2, -0.5, 0.7]).unwrap(), Hemisphere::Lower));
        let x = ChartPoint::new(chart, vec![0.35, -0.25]).unwrap();
        let p = [0.3, 0.45];
        for (y, sign) in [(y_plus(&x, &p).unwrap(), 1.0), (y_minus(&x, &p).unwrap(), -1.0)] {
            let j = cost_jet(&x, &y).unwrap();
            assert_abs_diff_eq!(-j.ci[0], p[0], epsilon = 1e-10);
            assert_abs_diff_eq!(-j.ci[1], p[1], epsilon = 1e-10);
            assert!(sign * lift(&x).dot(&y) > 0.0);
        }
    }

    #[test]
    fn mtw_closed_form_at_center() {
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.0, 0.0]).unwrap();
        let yc = [0.3, 0.0];
        let y = point_over(&chart, &yc, false);
        let form = mtw_form(&x, &y).unwrap();
        let b = 0.91f64.sqrt();
        for (v, eta) in [([1.0, 0.0], [1.0, 0.0]), ([0.6, 0.8], [0.0, 1.0]), ([0.2, -0.3], [0.5, 0.5])] {
            let vv = v[0] * v[0] + v[1] * v[1];
            let ee = eta[0] * eta[0] + eta[1] * eta[1];
            let ye = yc[0] * eta[0] + yc[1] * eta[1];
            let expect = vv / b * (ee + ye * ye / (b * b));
            assert_abs_diff_eq!(form.eval(&v, &v, &eta, &eta), expect, epsilon = 1e-13);
        }
    }

    #[test]
    fn mtw_tends_to_one_for_orthogonal_eta() {
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.0, 0.0]).unwrap();
        let y = point_over(&chart, &[1e-4, 0.0], false);
        let form = mtw_form(&x, &y).unwrap();
        let s = form.eval(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]);
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn mtw_rejects_coincident_points() {
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.0, 0.0]).unwrap();
        assert!(mtw_form(&x, chart.center()).is_err());
    }

    #[test]
    fn a3s_margin_examples() {
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.0, 0.0]).unwrap();
        // Barely separated from x: β(y) → 1 and the margin tends to 1.
        let y = point_over(&chart, &[1e-5, 0.0], false);
        assert_abs_diff_eq!(a3s_margin(&x, &y, 500).unwrap(), 1.0, epsilon = 1e-8);
        // Near the equator the margin grows like 1/β(y).
        let yc = [0.0, 0.999];
        let y = point_over(&chart, &yc, false);
        let m = a3s_margin(&x, &y, 2000).unwrap();
        let b = crate::sphere_geom::beta(&yc);
        assert!(m >= 1.0 / b - 1e-3 && m >= 1.0);
    }

    #[test]
    fn margin_changes_sign_past_the_equator_of_x() {
        // With <x, y> < 0 the height of y is negative and the closed form
        // at x = 0 becomes (|V|²/h)(|η|² + <y,η>²/h²) ≤ -|V|²|η|².
        let chart = north();
        let x = ChartPoint::new(chart.clone(), vec![0.0, 0.0]).unwrap();
        let yc = [0.3, 0.0];
        let y = point_over(&chart, &yc, true);
        let form = mtw_form(&x, &y).unwrap();
        let h = -0.91f64.sqrt();
        let s = form.eval(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]);
        assert_abs_diff_eq!(s, (1.0 + 0.09 / (h * h)) / h, epsilon = 1e-13);
        assert!(a3s_margin(&x, &y, 500).unwrap() <= -1.0 + 1e-12);
    }

    #[test]
    fn scan_is_reproducible() {
        let a = mtw_scan(2, 200, 0.01, 1.5, 5).unwrap();
        let b = mtw_scan(2, 200, 0.01, 1.5, 5).unwrap();
        assert_eq!(a.min_margin, b.min_margin);
        assert!(a.min_margin >= 1.0 - 1e-8);
        assert_eq!(a.evaluated, 200);
    }
}
