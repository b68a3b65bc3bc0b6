//! Discrete Kantorovich problem between weighted point clouds on the sphere.
//!
//! Transport costs use `c(x, y) = 1 - <x, y> = |x - y|²/2`, so every
//! `w2_squared` value here is the half-squared-distance convention.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cost_kernel::cost;
use crate::error::{Error, Result};
use crate::network_simplex::{self, Problem};
use crate::sphere_geom::AmbientPoint;
use crate::theorem_constants::{sphere_volume, wasserstein_gradient_bound, HypothesisReport};

pub const DEFAULT_SIZE_CAP: usize = 2048;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const BALANCE_TOL: f64 = 1e-9;
const MAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudMeasure {
    points: Vec<AmbientPoint>,
    weights: Vec<f64>,
}

impl PointCloudMeasure {
    pub fn new(points: Vec<AmbientPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
        }
        if points.is_empty() {
            return Err(Error::InvalidInput("empty point cloud".into()));
        }
        let d = points[0].dim();
        if let Some(p) = points.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InfeasibleWeights("weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InfeasibleWeights(format!("weights sum to {s}")));
        }
        Ok(PointCloudMeasure { points, weights })
    }

    /// Rescales nonnegative masses to a probability vector.
    pub fn normalized(points: Vec<AmbientPoint>, masses: Vec<f64>) -> Result<Self> {
        let s: f64 = masses.iter().sum();
        if !(s > 0.0) {
            return Err(Error::InfeasibleWeights(format!("total mass {s}")));
        }
        Self::new(points, masses.iter().map(|m| m / s).collect())
    }

    pub fn uniform(points: Vec<AmbientPoint>) -> Result<Self> {
        let w = vec![1.0 / points.len() as f64; points.len()];
        Self::new(points, w)
    }

    pub fn points(&self) -> &[AmbientPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Sparse transport plan. `entries` holds `(row, col, mass)`, sorted.
#[derive(Debug, Clone)]
pub struct CouplingPlan {
    pub source: PointCloudMeasure,
    pub target: PointCloudMeasure,
    pub entries: Vec<(usize, usize, f64)>,
    pub objective: f64,
    /// Most negative reduced cost of the dual certificate, when available.
    pub dual_residual: Option<f64>,
}

impl CouplingPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source.len()];
        self.entries.iter().for_each(|&(i, _, g)| r[i] += g);
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target.len()];
        self.entries.iter().for_each(|&(_, j, g)| c[j] += g);
        c
    }

    /// Largest deviation of either marginal from its prescribed weights.
    pub fn marginal_residual(&self) -> f64 {
        let (rows, cols) = (self.row_sums(), self.col_sums());
        let r = rows.iter().zip(self.source.weights()).map(|(a, b)| (a - b).abs());
        let c = cols.iter().zip(self.target.weights()).map(|(a, b)| (a - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }

    /// Objective recomputed from the entries.
    pub fn recompute_objective(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, g)| g * cost(&self.source.points()[i], &self.target.points()[j]))
            .sum()
    }

    /// The image column of every row, if the plan is a map.
    pub fn as_map(&self) -> Result<Vec<usize>> {
        let mut best = vec![(0usize, -1.0f64); self.source.len()];
        for &(i, j, g) in &self.entries {
            if g > best[i].1 {
                best[i] = (j, g);
            }
        }
        for (i, (&(_, g), w)) in best.iter().zip(self.source.weights()).enumerate() {
            if *w > 0.0 && g < (1.0 - MAP_TOL) * w {
                return Err(Error::NotAMap { row: i, fraction: g.max(0.0) / w });
            }
        }
        Ok(best.into_iter().map(|(j, _)| j).collect())
    }
}

/// Row-major `m × n` matrix of `1 - <x_a, y_b>`.
pub fn cost_matrix(mu: &PointCloudMeasure, nu: &PointCloudMeasure) -> Vec<f64> {
    let n = nu.len();
    let mut c = vec![0.0; mu.len() * n];
    c.par_chunks_mut(n).zip(mu.points().par_iter()).for_each(|(row, x)| {
        for (v, y) in row.iter_mut().zip(nu.points()) {
            *v = cost(x, y);
        }
    });
    c
}

fn check_pair(mu: &PointCloudMeasure, nu: &PointCloudMeasure, cap: usize) -> Result<()> {
    if mu.len() > cap || nu.len() > cap {
        return Err(Error::SizeCap { rows: mu.len(), cols: nu.len(), cap });
    }
    if mu.points()[0].dim() != nu.points()[0].dim() {
        return Err(Error::DimensionMismatch { expected: mu.points()[0].dim(), got: nu.points()[0].dim() });
    }
    let (a, b): (f64, f64) = (mu.weights().iter().sum(), nu.weights().iter().sum());
    if (a - b).abs() > BALANCE_TOL {
        return Err(Error::InfeasibleWeights(format!("source mass {a} vs target mass {b}")));
    }
    Ok(())
}

pub fn solve_kantorovich(mu: &PointCloudMeasure, nu: &PointCloudMeasure) -> Result<CouplingPlan> {
    solve_kantorovich_capped(mu, nu, DEFAULT_SIZE_CAP)
}

pub fn solve_kantorovich_capped(
    mu: &PointCloudMeasure,
    nu: &PointCloudMeasure,
    cap: usize,
) -> Result<CouplingPlan> {
    check_pair(mu, nu, cap)?;
    let (m, n) = (mu.len(), nu.len());
    let c = cost_matrix(mu, nu);
    // Balance exactly; the sums already agree to within 1e-9.
    let scale = mu.weights().iter().sum::<f64>() / nu.weights().iter().sum::<f64>();
    let demand: Vec<f64> = nu.weights().iter().map(|w| w * scale).collect();
    let pb = Problem { m, n, cost: &c, supply: mu.weights(), demand: &demand };
    let max_pivots = 200 * (m + n) * (m + n).max(16);
    let sol = network_simplex::solve(&pb, max_pivots).ok_or(Error::NonConvergence(max_pivots))?;

    let dual_residual = c
        .par_chunks(n)
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .zip(&sol.col_pot)
                .map(|(cij, pj)| cij + sol.row_pot[i] - pj)
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let objective = sol.flows.iter().map(|&(i, j, g)| g * c[i * n + j]).sum();
    Ok(CouplingPlan {
        source: mu.clone(),
        target: nu.clone(),
        entries: sol.flows,
        objective,
        dual_residual: Some(dual_residual),
    })
}

/// Half-squared transport cost `Σ γ |x - y|²/2` of a plan.
pub fn w2_squared(plan: &CouplingPlan) -> f64 {
    plan.recompute_objective()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Largest amount by which the inequality fails (0 when none do).
    pub worst_violation: f64,
}

/// Checks `<x₀,y₀> + <x₁,y₁> ≥ <x₁,y₀> + <x₀,y₁> - 1e-9` on all support pairs.
pub fn check_monotonicity(plan: &CouplingPlan) -> MonotonicityReport {
    let support: Vec<(&AmbientPoint, &AmbientPoint)> = plan
        .entries
        .iter()
        .filter(|e| e.2 > 0.0)
        .map(|&(i, j, _)| (&plan.source.points()[i], &plan.target.points()[j]))
        .collect();
    let (violations, worst) = (0..support.len())
        .into_par_iter()
        .map(|a| {
            let (x0, y0) = support[a];
            let mut count = 0usize;
            let mut worst = 0.0f64;
            for &(x1, y1) in &support[a + 1..] {
                let gap = x0.dot(y0) + x1.dot(y1) - x1.dot(y0) - x0.dot(y1);
                if gap < -1e-9 {
                    count += 1;
                    worst = worst.max(-gap);
                }
            }
            (count, worst)
        })
        .reduce(|| (0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)));
    let k = support.len();
    MonotonicityReport { pairs_checked: k * k.saturating_sub(1) / 2, violations, worst_violation: worst }
}

/// Maximum length of the tangential part of `T(x) - x` over the support.
pub fn max_tangential_displacement(plan: &CouplingPlan) -> Result<f64> {
    let map = plan.as_map()?;
    Ok(map
        .iter()
        .enumerate()
        .filter(|(i, _)| plan.source.weights()[*i] > 0.0)
        .map(|(i, &j)| {
            let (x, y) = (&plan.source.points()[i], &plan.target.points()[j]);
            let d = x.dot(y);
            (1.0 - d * d).max(0.0).sqrt()
        })
        .fold(0.0, f64::max))
}

/// Compares the tangential displacement of a map-like plan with the bound
/// obtained from its transport cost. The boundary-distance precondition of
/// the flat statement has no counterpart on the closed sphere and is not
/// checked.
pub fn displacement_bound_check(plan: &CouplingPlan, rho_min: f64, n: usize) -> Result<HypothesisReport> {
    let a = max_tangential_displacement(plan)?;
    let bound = wasserstein_gradient_bound(w2_squared(plan), rho_min, n)?;
    Ok(HypothesisReport::new("5.2", a, bound * (1.0 + 1e-12) + 1e-15))
}

/// Roughly equal-area points on S² (Fibonacci lattice).
pub fn fibonacci_sphere(count: usize) -> Vec<AmbientPoint> {
    let golden = PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            AmbientPoint::normalized(vec![r * phi.cos(), r * phi.sin(), z]).unwrap()
        })
        .collect()
}

/// Result of comparing a discrete transport cost with the `L∞` gap bound.
#[derive(Debug, Clone)]
pub struct LinfW2Report {
    pub report: HypothesisReport,
    pub w2_squared: f64,
    pub linf_gap: f64,
}

/// Discretizes both densities on an equal-area Fibonacci cloud of `nodes`
/// points on S², solves the LP, and checks `W₂² ≤ π Vol(S²) ‖ρ - ρ̄‖∞`.
pub fn linf_w2_bound_check(
    rho: &dyn Fn(&AmbientPoint) -> f64,
    rhobar: &dyn Fn(&AmbientPoint) -> f64,
    nodes: usize,
) -> Result<LinfW2Report> {
    let pts = fibonacci_sphere(nodes);
    let area = sphere_volume(2) / nodes as f64;
    let r: Vec<f64> = pts.iter().map(rho).collect();
    let rb: Vec<f64> = pts.iter().map(rhobar).collect();
    let mu = PointCloudMeasure::normalized(pts.clone(), r.iter().map(|v| v * area).collect())?;
    let nu = PointCloudMeasure::normalized(pts, rb.iter().map(|v| v * area).collect())?;
    let linf_gap = r.iter().zip(&rb).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let plan = solve_kantorovich(&mu, &nu)?;
    let w2 = w2_squared(&plan);
    Ok(LinfW2Report {
        report: HypothesisReport::new("5.4", w2, PI * sphere_volume(2) * linf_gap),
        w2_squared: w2,
        linf_gap,
    })
}

fn logsumexp(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub const SINKHORN_MAX_ITERS: usize = 10_000;

/// Log-domain Sinkhorn with epsilon scaling. Iterations stop once the row
/// residual is below 1e-6; the plan is then rounded onto the transport
/// polytope, so its marginals are exact up to rounding and its objective is
/// an upper bound on the LP value.
pub fn sinkhorn(mu: &PointCloudMeasure, nu: &PointCloudMeasure, epsilon: f64) -> Result<CouplingPlan> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    check_pair(mu, nu, usize::MAX)?;
    let (m, n) = (mu.len(), nu.len());
    let c = cost_matrix(mu, nu);
    let la: Vec<f64> = mu.weights().iter().map(|w| w.ln()).collect();
    let lb: Vec<f64> = nu.weights().iter().map(|w| w.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut eps = epsilon.max(1.0);
    let mut iters = 0;
    let plan_entry = |f: &[f64], g: &[f64], e: f64, i: usize, j: usize| -> f64 {
        ((f[i] + g[j] - c[i * n + j]) / e).exp()
    };
    loop {
        let on_target = eps <= epsilon;
        let tol = if on_target { 1e-6 } else { 1e-3 };
        loop {
            iters += 1;
            if iters > SINKHORN_MAX_ITERS {
                return Err(Error::NonConvergence(SINKHORN_MAX_ITERS));
            }
            for i in 0..m {
                if la[i].is_finite() {
                    f[i] = eps * la[i] - eps * logsumexp((0..n).map(|j| (g[j] - c[i * n + j]) / eps));
                }
            }
            for j in 0..n {
                if lb[j].is_finite() {
                    g[j] = eps * lb[j] - eps * logsumexp((0..m).map(|i| (f[i] - c[i * n + j]) / eps));
                }
            }
            let res = (0..m)
                .map(|i| {
                    let s: f64 = (0..n).map(|j| plan_entry(&f, &g, eps, i, j)).sum();
                    (s - mu.weights()[i]).abs()
                })
                .fold(0.0, f64::max);
            if res < tol {
                break;
            }
        }
        if on_target {
            break;
        }
        eps = (eps / 2.0).max(epsilon);
    }

    // Round onto the polytope: scale rows and columns down, then add the
    // rank-one correction of the remaining marginal errors.
    let mut p: Vec<f64> = (0..m * n).map(|k| plan_entry(&f, &g, eps, k / n, k % n)).collect();
    for i in 0..m {
        let s: f64 = p[i * n..(i + 1) * n].iter().sum();
        if s > mu.weights()[i] {
            let r = mu.weights()[i] / s;
            p[i * n..(i + 1) * n].iter_mut().for_each(|v| *v *= r);
        }
    }
    for j in 0..n {
        let s: f64 = (0..m).map(|i| p[i * n + j]).sum();
        if s > nu.weights()[j] {
            let r = nu.weights()[j] / s;
            (0..m).for_each(|i| p[i * n + j] *= r);
        }
    }
    let er: Vec<f64> = (0..m).map(|i| mu.weights()[i] - p[i * n..(i + 1) * n].iter().sum::<f64>()).collect();
    let ec: Vec<f64> = (0..n).map(|j| nu.weights()[j] - (0..m).map(|i| p[i * n + j]).sum::<f64>()).collect();
    let total: f64 = er.iter().sum();
    if total > 0.0 {
        for i in 0..m {
            for j in 0..n {
                p[i * n + j] += er[i].max(0.0) * ec[j].max(0.0) / total;
            }
        }
    }
    let entries: Vec<(usize, usize, f64)> =
        (0..m * n).filter(|&k| p[k] > 0.0).map(|k| (k / n, k % n, p[k])).collect();
    let objective = entries.iter().map(|&(i, j, v)| v * c[i * n + j]).sum();
    Ok(CouplingPlan { source: mu.clone(), target: nu.clone(), entries, objective, dual_residual: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: [f64; 3]) -> AmbientPoint {
        AmbientPoint::normalized(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_clouds_give_the_identity() {
        let pts = fibonacci_sphere(12);
        let mu = PointCloudMeasure::uniform(pts).unwrap();
        let plan = solve_kantorovich(&mu, &mu).unwrap();
        assert!(plan.objective.abs() < 1e-14);
        assert!(plan.entries.iter().all(|&(i, j, _)| i == j));
        assert_eq!(w2_squared(&plan), 0.0);
    }

    #[test]
    fn two_point_pairing() {
        let mu = PointCloudMeasure::uniform(vec![p([1.0, 0.0, 0.0]), p([0.0, 1.0, 0.0])]).unwrap();
        let nu = PointCloudMeasure::uniform(vec![p([0.1, 1.0, 0.0]), p([1.0, 0.1, 0.0])]).unwrap();
        let plan = solve_kantorovich(&mu, &nu).unwrap();
        assert_eq!(plan.as_map().unwrap(), vec![1, 0]);
        let crossed = 0.5 * (cost(&mu.points()[0], &nu.points()[0]) + cost(&mu.points()[1], &nu.points()[1]));
        assert!(plan.objective < crossed);
    }

    #[test]
    fn antipodal_mass_costs_two() {
        let x = p([0.0, 0.0, 1.0]);
        let mu = PointCloudMeasure::uniform(vec![x.clone()]).unwrap();
        let nu = PointCloudMeasure::uniform(vec![x.antipode()]).unwrap();
        assert_eq!(w2_squared(&solve_kantorovich(&mu, &nu).unwrap()), 2.0);
    }

    #[test]
    fn swapped_plan_violates_monotonicity() {
        let mu = PointCloudMeasure::uniform(vec![p([1.0, 0.0, 0.0]), p([0.0, 1.0, 0.0])]).unwrap();
        let plan = CouplingPlan {
            source: mu.clone(),
            target: mu.clone(),
            entries: vec![(0, 1, 0.5), (1, 0, 0.5)],
            objective: 1.0,
            dual_residual: None,
        };
        let r = check_monotonicity(&plan);
        assert_eq!(r.violations, 1);
        assert!((r.worst_violation - 2.0).abs() < 1e-12);
        let id = solve_kantorovich(&mu, &mu).unwrap();
        assert_eq!(check_monotonicity(&id).violations, 0);
    }

    #[test]
    fn errors() {
        let pts = fibonacci_sphere(4);
        assert!(matches!(
            PointCloudMeasure::new(pts.clone(), vec![0.5; 4]),
            Err(Error::InfeasibleWeights(_))
        ));
        let big = PointCloudMeasure::uniform(fibonacci_sphere(10)).unwrap();
        assert!(matches!(solve_kantorovich_capped(&big, &big, 8), Err(Error::SizeCap { .. })));
        let split = CouplingPlan {
            source: PointCloudMeasure::uniform(vec![pts[0].clone()]).unwrap(),
            target: PointCloudMeasure::uniform(pts[..2].to_vec()).unwrap(),
            entries: vec![(0, 0, 0.5), (0, 1, 0.5)],
            objective: 0.0,
            dual_residual: None,
        };
        assert!(matches!(split.as_map(), Err(Error::NotAMap { row: 0, .. })));
    }

    #[test]
    fn rhs_constant() {
        assert!((PI * sphere_volume(2) - 39.478).abs() < 1e-3);
    }
}
