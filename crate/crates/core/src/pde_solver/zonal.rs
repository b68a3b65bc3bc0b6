//! Monotone rearrangement of latitude distributions, the exact transport map
//! between two densities that depend on the polar angle only.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Vec3;

const INTERVALS: usize = 20_000;

/// Latitude CDFs on a dense θ table, with cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct ZonalOracle {
    theta: Vec<f64>,
    f: Vec<f64>,
    df: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<f64>,
}

fn cdf(rho: &dyn Fn(f64) -> f64, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dens = |s: f64| rho(s) * s.sin();
    let mut c = vec![0.0; theta.len()];
    for k in 1..theta.len() {
        let (a, b) = (theta[k - 1], theta[k]);
        c[k] = c[k - 1] + (b - a) / 6.0 * (dens(a) + 4.0 * dens(0.5 * (a + b)) + dens(b));
    }
    let z = c[theta.len() - 1];
    if !(z > 0.0) || theta.iter().any(|&t| !(rho(t) > 0.0)) {
        return Err(Error::InvalidInput("zonal profile must be positive".into()));
    }
    let d = theta.iter().map(|&t| dens(t) / z).collect();
    Ok((c.into_iter().map(|v| v / z).collect(), d))
}

fn hermite(h: f64, s: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let (s2, s3) = (s * s, s * s * s);
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * d1;
    let dv = ((6.0 * s2 - 6.0 * s) * y0 + (-6.0 * s2 + 6.0 * s) * y1) / h + (3.0 * s2 - 4.0 * s + 1.0) * d0 + (3.0 * s2 - 2.0 * s) * d1;
    (v, dv)
}

impl ZonalOracle {
    fn eval(&self, y: &[f64], d: &[f64], theta: f64) -> f64 {
        let t = theta.clamp(0.0, PI);
        let k = self.theta.partition_point(|&a| a <= t).clamp(1, self.theta.len() - 1);
        let h = self.theta[k] - self.theta[k - 1];
        hermite(h, (t - self.theta[k - 1]) / h, y[k - 1], y[k], d[k - 1], d[k]).0
    }

    /// Source latitude CDF.
    pub fn source_cdf(&self, theta: f64) -> f64 {
        self.eval(&self.f, &self.df, theta)
    }

    /// Target latitude CDF.
    pub fn target_cdf(&self, theta: f64) -> f64 {
        self.eval(&self.g, &self.dg, theta)
    }

    /// `Θ(θ) = Ḡ⁻¹(F(θ))`.
    pub fn map(&self, theta: f64) -> f64 {
        let v = self.source_cdf(theta);
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 1.0 {
            return PI;
        }
        let k = self.g.partition_point(|&a| a <= v).clamp(1, self.theta.len() - 1);
        let (lo, hi) = (self.theta[k - 1], self.theta[k]);
        let h = hi - lo;
        // Newton on the monotone cubic, safeguarded by bisection.
        let (mut a, mut b) = (0.0, 1.0);
        let mut s = 0.5;
        for _ in 0..60 {
            let (y, dy) = hermite(h, s, self.g[k - 1], self.g[k], self.dg[k - 1], self.dg[k]);
            let r = y - v;
            if r.abs() < 1e-16 {
                break;
            }
            if r > 0.0 {
                b = s;
            } else {
                a = s;
            }
            let step = s - r / (dy * h);
            s = if dy > 0.0 && step > a && step < b { step } else { 0.5 * (a + b) };
        }
        lo + s * h
    }

    /// Image of a point: same longitude, polar angle `Θ(θ)`.
    pub fn image(&self, p: &Vec3) -> Vec3 {
        let th = p[2].clamp(-1.0, 1.0).acos();
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let big = self.map(th);
        if r < 1e-15 {
            return [0.0, 0.0, big.cos()];
        }
        [big.sin() * p[0] / r, big.sin() * p[1] / r, big.cos()]
    }

    pub fn max_displacement(&self) -> f64 {
        self.theta.iter().map(|&t| (self.map(t) - t).abs()).fold(0.0, f64::max)
    }

    /// `max |Ḡ(Θ(θ)) - F(θ)|` over `samples` equispaced angles.
    pub fn cdf_residual(&self, samples: usize) -> f64 {
        (0..=samples)
            .map(|k| PI * k as f64 / samples as f64)
            .map(|t| (self.target_cdf(self.map(t)) - self.source_cdf(t)).abs())
            .fold(0.0, f64::max)
    }
}

/// Monotone map between zonal profiles `ρ(θ)` and `ρ̄(θ)` (unnormalized).
pub fn zonal_oracle(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<ZonalOracle> {
    let theta: Vec<f64> = (0..=INTERVALS).map(|k| PI * k as f64 / INTERVALS as f64).collect();
    let (fc, fd) = cdf(&f, &theta)?;
    let (gc, gd) = cdf(&g, &theta)?;
    let o = ZonalOracle { theta, f: fc, df: fd, g: gc, dg: gd };
    let m = o.max_displacement();
    if !(m < PI / 2.0) {
        return Err(Error::DisplacementTooLarge(m));
    }
    Ok(o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_profiles_give_identity() {
        let o = zonal_oracle(|t| 1.0 + 0.3 * t.cos(), |t| 1.0 + 0.3 * t.cos()).unwrap();
        for k in 0..=50 {
            let t = PI * k as f64 / 50.0;
            assert!((o.map(t) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_for_uniform_target() {
        let eps = 0.2;
        let o = zonal_oracle(|t| 1.0 + eps * t.cos(), |_| 1.0).unwrap();
        for k in 0..=40 {
            let t = PI * k as f64 / 40.0;
            let f = 0.5 * ((1.0 - t.cos()) + 0.5 * eps * t.sin().powi(2));
            let exact = (1.0 - 2.0 * f).clamp(-1.0, 1.0).acos();
            assert!((o.map(t) - exact).abs() < 1e-9, "{t}");
        }
        assert!(o.cdf_residual(1000) < 1e-10);
    }

    #[test]
    fn rejects_large_displacements() {
        let r = zonal_oracle(|t| (-(30.0) * t).exp() + 1e-9, |t| (-(30.0) * (PI - t)).exp() + 1e-9);
        assert!(matches!(r, Err(Error::DisplacementTooLarge(_))));
    }
}
