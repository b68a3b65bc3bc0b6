//! A-posteriori checks on a computed map: Jacobians, mass transport,
//! nonsplitting and grid injectivity.

use rayon::prelude::*;

use super::{injectivity_for, nonsplitting_for, SolveReport, TransportProblem};
use crate::c_convexity::{t_plus_map, InjectivityReport, NonsplittingCertificate, Potential, NONSPLITTING_THRESHOLD};
use crate::cost_kernel::y_plus;
use crate::error::{Error, Result};
use crate::grid::{dot3, cross3, SphereGrid, Vec3};
use crate::sphere_geom::ChartPoint;

#[derive(Debug, Clone)]
pub struct MapDiagnostics {
    pub grad_max: f64,
    /// `T⁺` at owned nodes, in `grid.owned()` order.
    pub images: Vec<Vec3>,
    pub jacobians: Vec<f64>,
    pub jacobian_min: f64,
    pub pushforward_l1: f64,
    pub nonsplitting: NonsplittingCertificate,
    pub injectivity: InjectivityReport,
}

/// `T⁺` at an arbitrary point from the interpolated gradient of `u`.
fn map_at(u: &Potential, p: &Vec3) -> Result<Vec3> {
    let g = u.grid();
    let s = g.stencil(p).ok_or_else(|| Error::InvalidGrid("no stencil for map evaluation".into()))?;
    let mut d = [0.0; 2];
    for k in 0..16 {
        d[0] += s.dw[0][k] * u.values()[s.nodes[k]];
        d[1] += s.dw[1][k] * u.values()[s.nodes[k]];
    }
    let x = g.chart_coords(s.chart, p);
    let y = y_plus(&ChartPoint::new(g.charts[s.chart].clone(), x.to_vec())?, &d)?;
    let c = y.coords();
    Ok([c[0], c[1], c[2]])
}

fn det3(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    dot3(a, &cross3(b, c))
}

/// Area ratio of `T` at each owned node by central differences in the
/// node's chart.
pub fn jacobian_field(u: &Potential, images: &[Vec3]) -> Result<Vec<f64>> {
    let g = u.grid();
    let mut pos = vec![usize::MAX; g.len()];
    for (k, &id) in g.owned().iter().enumerate() {
        pos[id] = k;
    }
    let image_of = |id: usize| -> Result<Vec3> {
        if pos[id] != usize::MAX {
            Ok(images[pos[id]])
        } else {
            map_at(u, &g.nodes()[id].point)
        }
    };
    g.owned()
        .par_iter()
        .map(|&id| {
            let nb = |di, dj| g.neighbor(id, di, dj);
            let (e, w, n, s) = (nb(1, 0), nb(-1, 0), nb(0, 1), nb(0, -1));
            let pt = |k: usize| g.nodes()[k].point;
            let diff = |a: Vec3, b: Vec3| -> Vec3 { std::array::from_fn(|k| a[k] - b[k]) };
            let t0 = images[pos[id]];
            let num = det3(&t0, &diff(image_of(e)?, image_of(w)?), &diff(image_of(n)?, image_of(s)?));
            let den = det3(&pt(id), &diff(pt(e), pt(w)), &diff(pt(n), pt(s)));
            Ok(num / den)
        })
        .collect()
}

/// `Σ |e^f(x) - e^g(T(x)) J(x)| dA` over owned cells of area `h²/β`.
pub fn pushforward_l1(problem: &TransportProblem, images: &[Vec3], jacobians: &[f64]) -> Result<f64> {
    let g: &SphereGrid = problem.grid();
    let mut total = 0.0;
    for (k, &id) in g.owned().iter().enumerate() {
        let nd = &g.nodes()[id];
        let beta = (1.0 - nd.x[0] * nd.x[0] - nd.x[1] * nd.x[1]).sqrt();
        let (lg, _, _) = problem
            .target()
            .log_at(&images[k])
            .ok_or_else(|| Error::InvalidGrid("no stencil at image point".into()))?;
        let gap = problem.source().density(id) - lg.exp() * jacobians[k];
        total += g.h * g.h / beta * gap.abs();
    }
    Ok(total)
}

pub(super) fn diagnose(problem: &TransportProblem, u: &Potential) -> Result<MapDiagnostics> {
    let images = t_plus_map(u)?;
    let jacobians = jacobian_field(u, &images)?;
    let jacobian_min = jacobians.iter().cloned().fold(f64::INFINITY, f64::min);
    let pushforward_l1 = pushforward_l1(problem, &images, &jacobians)?;
    let nonsplitting = nonsplitting_for(u)?;
    let injectivity = injectivity_for(u, &images);
    Ok(MapDiagnostics {
        grad_max: u.gradient_sup(),
        images,
        jacobians,
        jacobian_min,
        pushforward_l1,
        nonsplitting,
        injectivity,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub ok: bool,
    /// Failed conditions among `gradient`, `jacobian`, `nonsplitting`,
    /// `injectivity`.
    pub reasons: Vec<&'static str>,
}

/// Gradient below `2/π`, positive Jacobian, nonsplitting and injectivity.
pub fn diffeomorphism_certificate(report: &SolveReport) -> Certificate {
    let m = &report.map;
    let mut reasons = Vec::new();
    if !(m.grad_max < NONSPLITTING_THRESHOLD) {
        reasons.push("gradient");
    }
    if !(m.jacobian_min > 0.0) {
        reasons.push("jacobian");
    }
    if !m.nonsplitting.pass {
        reasons.push("nonsplitting");
    }
    if m.injectivity.collisions > 0 {
        reasons.push("injectivity");
    }
    Certificate { ok: reasons.is_empty() && report.converged, reasons }
}
