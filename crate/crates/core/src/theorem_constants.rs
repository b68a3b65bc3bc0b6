//! Constants and hypothesis checks for the regularity results.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Root of `ω e^ω = 2`.
pub fn omega0() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() < 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        // Pick the endpoint with the smaller residual.
        if (lo * lo.exp() - 2.0).abs() <= (hi * hi.exp() - 2.0).abs() {
            lo
        } else {
            hi
        }
    })
}

/// Surface measure of the unit sphere `S^k`.
pub fn sphere_volume(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        _ => {
            let a = (k as f64 + 1.0) / 2.0;
            2.0 * PI.powf(a) / gamma(a)
        }
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`. The interval
/// is first cut into 16 panels so that symmetric integrands cannot stop the
/// refinement early.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 16;
    let w = (b - a) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * w, a + (k + 1) as f64 * w);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = simpson(lo, hi, fa, fm, fb);
            adaptive(&f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 40)
        })
        .sum()
}

/// `∫₀^{π/2} cos^{n+2}φ sin^{n-2}φ dφ` by adaptive quadrature.
pub fn angular_integral(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    let (p, q) = ((n + 2) as i32, (n - 2) as i32);
    Ok(integrate(|t| t.cos().powi(p) * t.sin().powi(q), 0.0, PI / 2.0, 1e-13))
}

/// The same integral as `B((n-1)/2, (n+3)/2)/2`.
pub fn angular_integral_beta(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    Ok(0.5 * beta((n as f64 - 1.0) / 2.0, (n as f64 + 3.0) / 2.0))
}

fn base(n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(sphere_volume(n - 2) / (nf * (nf + 1.0) * (nf + 2.0))
        * (2.0 / PI).powi(n as i32 + 2)
        * angular_integral(n)?)
}

pub fn delta1(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    base(n)
}

pub fn delta2(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    Ok(PI * sphere_volume(n) * base(n)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremConstants {
    pub n: usize,
    pub omega0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub thm11_threshold: f64,
    /// `vol_sphere[k]` is `Vol(S^k)` for `k ≤ n`.
    pub vol_sphere: Vec<f64>,
}

impl TheoremConstants {
    /// Memoized per dimension.
    pub fn for_dim(n: usize) -> Result<TheoremConstants> {
        static CACHE: OnceLock<RwLock<HashMap<usize, TheoremConstants>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(c) = cache.read().unwrap().get(&n) {
            return Ok(c.clone());
        }
        let w = omega0();
        let c = TheoremConstants {
            n,
            omega0: w,
            delta1: delta1(n)?,
            delta2: delta2(n)?,
            thm11_threshold: (n as f64 - 1.0) * w / PI,
            vol_sphere: (0..=n).map(sphere_volume).collect(),
        };
        cache.write().unwrap().entry(n).or_insert_with(|| c.clone());
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub theorem_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
}

impl HypothesisReport {
    /// `satisfied` is `margin > 0` for every theorem, including the ones
    /// stated with `≤`; exact equality is reported as a failure.
    pub fn new(id: &str, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        HypothesisReport { theorem_id: id.into(), lhs, rhs, margin, satisfied: margin > 0.0 }
    }
}

/// Summary statistics of a log-density that the hypotheses depend on.
pub trait DensitySummary {
    fn dim(&self) -> usize;
    /// `sup |D log ρ|` in the round metric.
    fn gradient_sup(&self) -> f64;
    fn density_max(&self) -> f64;
    fn density_min(&self) -> f64;
}

/// Plain numbers standing in for a density field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityStats {
    pub dim: usize,
    pub gradient_sup: f64,
    pub density_max: f64,
    pub density_min: f64,
}

impl DensitySummary for DensityStats {
    fn dim(&self) -> usize {
        self.dim
    }
    fn gradient_sup(&self) -> f64 {
        self.gradient_sup
    }
    fn density_max(&self) -> f64 {
        self.density_max
    }
    fn density_min(&self) -> f64 {
        self.density_min
    }
}

fn same_dim(f: &dyn DensitySummary, g: &dyn DensitySummary) -> Result<usize> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: g.dim() });
    }
    Ok(f.dim())
}

pub fn check_thm11(f: &dyn DensitySummary, g: &dyn DensitySummary) -> Result<HypothesisReport> {
    let n = same_dim(f, g)?;
    let c = TheoremConstants::for_dim(n)?;
    Ok(HypothesisReport::new("1.1", f.gradient_sup() + g.gradient_sup(), c.thm11_threshold))
}

pub fn check_thm12(w2_squared: f64, rho_min: f64, rhobar_min: f64, n: usize) -> Result<HypothesisReport> {
    let rhs = rho_min.max(rhobar_min) * delta1(n)?;
    Ok(HypothesisReport::new("1.2", w2_squared, rhs))
}

pub fn check_cor13(linf_gap: f64, rho_min: f64, rhobar_min: f64, n: usize) -> Result<HypothesisReport> {
    let rhs = rho_min.max(rhobar_min) * delta2(n)?;
    Ok(HypothesisReport::new("1.3", linf_gap, rhs))
}

/// A priori bound on `‖Du‖∞` from the densities.
pub fn gradient_bound_thm41(f: &dyn DensitySummary, g: &dyn DensitySummary) -> Result<f64> {
    let n = same_dim(f, g)?;
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    Ok(gradient_bound_from_scalars(
        n,
        f.density_max() / g.density_min(),
        f.gradient_sup() + g.gradient_sup(),
    ))
}

/// `(1/(n-1)) · ratio^{1/(n-1)} · d`.
pub fn gradient_bound_from_scalars(n: usize, density_ratio: f64, gradient_sum: f64) -> f64 {
    let k = n as f64 - 1.0;
    density_ratio.powf(1.0 / k) * gradient_sum / k
}

/// Bound on `‖Du‖∞` in terms of the transport cost `w2_squared`.
pub fn wasserstein_gradient_bound(w2_squared: f64, rho_min: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    if !(rho_min > 0.0) || w2_squared < 0.0 {
        return Err(Error::InvalidInput("rho_min must be positive and w2_squared nonnegative".into()));
    }
    let nf = n as f64;
    let bracket = nf * (nf + 1.0) * (nf + 2.0) / sphere_volume(n - 2) / angular_integral(n)?
        * w2_squared
        / rho_min;
    Ok(bracket.powf(1.0 / (nf + 2.0)))
}
