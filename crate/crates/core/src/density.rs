//! Probability densities on the overset grid, stored as log-densities with
//! respect to the round volume.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{derivatives, dot3, normalize3, SphereGrid, Vec3};
use crate::sphere_geom::covector_norm;
use crate::theorem_constants::DensitySummary;

/// `log ρ` at every active node, normalized so the grid quadrature of `ρ`
/// is one.
#[derive(Clone)]
pub struct DensityField {
    grid: Arc<SphereGrid>,
    logrho: Vec<f64>,
}

impl std::fmt::Debug for DensityField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityField").field("size", &self.grid.size).field("nodes", &self.logrho.len()).finish()
    }
}

/// Grid volume `Σ w`, the discrete stand-in for `4π`.
pub fn grid_volume(grid: &SphereGrid) -> f64 {
    grid.nodes().iter().map(|n| n.quad_weight).sum()
}

impl DensityField {
    /// Normalizes nodal log-densities by the grid quadrature.
    pub fn from_logrho(grid: Arc<SphereGrid>, mut logrho: Vec<f64>) -> Result<DensityField> {
        if logrho.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: logrho.len() });
        }
        if logrho.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("log-density must be finite".into()));
        }
        let shift = logrho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mass: f64 = grid.nodes().iter().zip(&logrho).map(|(n, l)| n.quad_weight * (l - shift).exp()).sum();
        let c = shift + mass.ln();
        for l in &mut logrho {
            *l -= c;
        }
        Ok(DensityField { grid, logrho })
    }

    /// Samples an unnormalized positive density and normalizes it.
    pub fn from_density(grid: Arc<SphereGrid>, rho: impl Fn(&Vec3) -> f64) -> Result<DensityField> {
        let vals = grid.sample(|p| rho(p));
        if vals.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("density must be positive and finite".into()));
        }
        let l = vals.iter().map(|v| v.ln()).collect();
        Self::from_logrho(grid, l)
    }

    pub fn uniform(grid: Arc<SphereGrid>) -> DensityField {
        let v = -grid_volume(&grid).ln();
        let n = grid.len();
        DensityField { grid, logrho: vec![v; n] }
    }

    /// `ρ ∝ 1 + ε cos θ`, θ the polar angle from `e3`.
    pub fn zonal(grid: Arc<SphereGrid>, eps: f64) -> Result<DensityField> {
        if !(eps.abs() < 1.0) {
            return Err(Error::InvalidInput(format!("zonal eps must lie in (-1, 1), got {eps}")));
        }
        Self::from_density(grid, |p| 1.0 + eps * p[2])
    }

    /// `ρ ∝ 1 + ε exp(-4 (1 - <p, centre>))`.
    pub fn bump(grid: Arc<SphereGrid>, center: Vec3, eps: f64) -> Result<DensityField> {
        if !(eps > -1.0) {
            return Err(Error::InvalidInput(format!("bump eps must exceed -1, got {eps}")));
        }
        let norm = dot3(&center, &center).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("bump centre must be nonzero".into()));
        }
        let c = normalize3(center);
        Self::from_density(grid, move |p| 1.0 + eps * (-4.0 * (1.0 - dot3(p, &c))).exp())
    }

    /// Zonal profile given as `(θ, log ρ)` samples, interpolated linearly in θ.
    pub fn from_zonal_table(grid: Arc<SphereGrid>, table: &[(f64, f64)]) -> Result<DensityField> {
        if table.len() < 2 {
            return Err(Error::InvalidInput("zonal table needs at least two rows".into()));
        }
        if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidInput("zonal table angles must increase".into()));
        }
        let lo = table[0].0;
        let hi = table[table.len() - 1].0;
        if lo > 1e-12 || hi < std::f64::consts::PI - 1e-12 {
            return Err(Error::InvalidInput("zonal table must cover [0, π]".into()));
        }
        let l = grid.sample(|p| {
            let th = p[2].clamp(-1.0, 1.0).acos();
            let k = table.partition_point(|r| r.0 <= th).clamp(1, table.len() - 1);
            let (a, b) = (table[k - 1], table[k]);
            let s = (th - a.0) / (b.0 - a.0);
            a.1 + s * (b.1 - a.1)
        });
        Self::from_logrho(grid, l)
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn logrho(&self) -> &[f64] {
        &self.logrho
    }

    pub fn density(&self, id: usize) -> f64 {
        self.logrho[id].exp()
    }

    pub fn mass(&self) -> f64 {
        self.grid.nodes().iter().zip(&self.logrho).map(|(n, l)| n.quad_weight * l.exp()).sum()
    }

    /// Interpolated `log ρ` and its gradient in the owner chart of `p`.
    pub fn log_at(&self, p: &Vec3) -> Option<(f64, [f64; 2], usize)> {
        let s = self.grid.stencil(p)?;
        let mut v = 0.0;
        let mut d = [0.0; 2];
        for k in 0..16 {
            let l = self.logrho[s.nodes[k]];
            v += s.w[k] * l;
            d[0] += s.dw[0][k] * l;
            d[1] += s.dw[1][k] * l;
        }
        Some((v, d, s.chart))
    }

    /// Round-metric length of `D log ρ` at each owned node.
    pub fn gradient_norms(&self) -> Vec<f64> {
        self.grid
            .owned()
            .iter()
            .map(|&id| {
                let d = derivatives(&self.grid, &self.logrho, id);
                covector_norm(&self.grid.nodes()[id].x, &d.grad)
            })
            .collect()
    }
}

impl DensitySummary for DensityField {
    fn dim(&self) -> usize {
        2
    }
    fn gradient_sup(&self) -> f64 {
        self.gradient_norms().into_iter().fold(0.0, f64::max)
    }
    fn density_max(&self) -> f64 {
        self.logrho.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp()
    }
    fn density_min(&self) -> f64 {
        self.logrho.iter().cloned().fold(f64::INFINITY, f64::min).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(n).unwrap())
    }

    #[test]
    fn generators_are_normalized() {
        let g = grid(40);
        for f in [
            DensityField::uniform(g.clone()),
            DensityField::zonal(g.clone(), 0.3).unwrap(),
            DensityField::bump(g.clone(), [1.0, 1.0, 0.0], 0.5).unwrap(),
        ] {
            assert!((f.mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zonal_gradient_matches_closed_form() {
        let eps = 0.2;
        let f = DensityField::zonal(grid(64), eps).unwrap();
        let exact = eps / (1.0 - eps * eps).sqrt();
        assert!((f.gradient_sup() - exact).abs() < 1e-4, "{}", f.gradient_sup());
        let ratio = f.density_max() / f.density_min();
        assert!((ratio - 1.2 / 0.8).abs() < 1e-3);
    }

    #[test]
    fn uniform_is_near_one_over_four_pi() {
        let f = DensityField::uniform(grid(64));
        assert!((f.density(0) - 1.0 / (4.0 * PI)).abs() < 1e-6);
        assert!(f.gradient_sup() < 1e-12);
    }

    #[test]
    fn zonal_table_reproduces_generator() {
        let g = grid(40);
        let eps = 0.25;
        let table: Vec<(f64, f64)> =
            (0..=4000).map(|k| PI * k as f64 / 4000.0).map(|t| (t, (1.0 + eps * t.cos()).ln())).collect();
        let a = DensityField::from_zonal_table(g.clone(), &table).unwrap();
        let b = DensityField::zonal(g, eps).unwrap();
        let worst = a.logrho().iter().zip(b.logrho()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn interpolated_log_density_and_gradient() {
        let g = grid(48);
        let f = DensityField::zonal(g, 0.3).unwrap();
        let p = normalize3([0.3, -0.2, 0.8]);
        let (v, d, c) = f.log_at(&p).unwrap();
        let shift = f.logrho()[0] - (1.0 + 0.3 * f.grid().nodes()[0].point[2]).ln();
        assert!((v - shift - (1.0 + 0.3 * p[2]).ln()).abs() < 1e-6, "{}", v - shift - (1.0 + 0.3 * p[2]).ln());
        // Gradient against a central difference of the exact profile in the owner chart.
        let g = f.grid();
        let x = g.chart_coords(c, &p);
        let exact = |x: [f64; 2]| (1.0 + 0.3 * g.frames[c].lift(x)[2]).ln();
        for a in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += 1e-6;
            xm[a] -= 1e-6;
            let fd = (exact(xp) - exact(xm)) / 2e-6;
            assert!((d[a] - fd).abs() < 1e-4, "{} {}", d[a], fd);
        }
    }
}
