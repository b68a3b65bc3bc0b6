#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use sphere_ot::c_convexity::{t_plus_map, Potential};
use sphere_ot::cost_kernel::cost_jet;
use sphere_ot::density::DensityField;
use sphere_ot::grid::{dot3, SphereGrid};
use sphere_ot::pde_solver::*;
use sphere_ot::sphere_geom::{beta_jet, AmbientPoint, ChartPoint};
use sphere_ot::theorem_constants::{check_thm11, TheoremConstants};

fn grid(n: usize) -> Arc<SphereGrid> {
    Arc::new(SphereGrid::new(n).unwrap())
}

/// Zonal amplitude whose gradient sup `ε/√(1-ε²)` is half the threshold.
fn half_margin_eps() -> f64 {
    let k = 0.5 * TheoremConstants::for_dim(2).unwrap().thm11_threshold;
    k / (1.0 + k * k).sqrt()
}

fn smooth_potential(g: &Arc<SphereGrid>) -> Potential {
    Potential::from_fn(g.clone(), |z| 0.04 * z[0] * z[1] + 0.03 * z[2] * z[2] - 0.05 * z[1] + 0.02 * z[0] * z[2])
        .unwrap()
        .normalized()
}

#[test]
fn path_endpoints_and_mass() {
    let g = grid(32);
    let f = DensityField::zonal(g.clone(), 0.4).unwrap();
    let p0 = density_path(&f, 0.0);
    assert!(p0.logrho().iter().all(|&l| (l - p0.logrho()[0]).abs() < 1e-14));
    assert!((p0.density(0) - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-4);
    let p1 = density_path(&f, 1.0);
    assert!(p1.logrho().iter().zip(f.logrho()).all(|(a, b)| (a - b).abs() < 1e-13));
    for t in [0.0, 0.3, 0.7, 1.0] {
        assert!((density_path(&f, t).mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn w_at_zero_potential() {
    let g = grid(49);
    let w = assemble_w(&Potential::zero(g.clone())).unwrap();
    let pos = |id: usize| g.owned().iter().position(|&k| k == id).unwrap();
    let centre = w.w[pos(g.node_at(0, 24, 24).unwrap())];
    assert!((centre[0][0] - 1.0).abs() < 1e-14 && (centre[1][1] - 1.0).abs() < 1e-14 && centre[0][1].abs() < 1e-14);
    let id = g.node_at(0, 40, 24).unwrap();
    let x = g.nodes()[id].x;
    assert!((x[0] - 0.6).abs() < 1e-12);
    let bj = beta_jet(&x);
    let got = w.w[pos(id)];
    for a in 0..2 {
        for b in 0..2 {
            assert!((got[a][b] + bj.d2.get([a, b]) * bj.beta).abs() < 1e-12);
        }
    }
    assert!(w.min_eig > 0.0);
}

#[test]
fn w_for_small_quadratic_near_centre() {
    // ε|x|²/2 in the north chart is ε(1 - z3²)/2 on the sphere.
    let g = grid(49);
    let eps = 1e-3;
    let u = Potential::from_fn(g.clone(), move |z| 0.5 * eps * (1.0 - z[2] * z[2])).unwrap();
    let w = assemble_w(&u).unwrap();
    let k = g.owned().iter().position(|&id| id == g.node_at(0, 24, 24).unwrap()).unwrap();
    for a in 0..2 {
        assert!((w.w[k][a][a] - (1.0 + eps)).abs() < 1e-5);
    }
}

#[test]
fn residual_vanishes_at_the_identity() {
    let g = grid(32);
    let f = DensityField::zonal(g.clone(), 0.3).unwrap();
    let uni = DensityField::uniform(g.clone());
    let zero = Potential::zero(g.clone());
    let r0 = residual(&zero, 0.0, &f, &uni).unwrap();
    assert!(r0.iter().all(|v| v.abs() < 1e-13));
    for t in [0.25, 1.0] {
        let r = residual(&zero, t, &f, &f).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12), "{t}");
    }
}

/// The same equation written in each node's own chart through the general
/// cost jet: `log det w - log|det c_{i,j}| - log ρ(x)/β(x) + log ρ̄(T)/β(T)`.
#[test]
fn residual_matches_chart_formula() {
    let g = grid(40);
    let f = DensityField::zonal(g.clone(), 0.3).unwrap();
    let b = DensityField::bump(g.clone(), [0.3, -1.0, 0.2], 0.4).unwrap();
    let u = smooth_potential(&g);
    let t = 0.6;
    let r = residual(&u, t, &f, &b).unwrap();
    let ft = density_path(&f, t);
    let gt = density_path(&b, t);
    let w = assemble_w(&u).unwrap();
    let tm = t_plus_map(&u).unwrap();
    for (k, &id) in g.owned().iter().enumerate() {
        let nd = &g.nodes()[id];
        let cp = ChartPoint::new(g.charts[nd.chart].clone(), nd.x.to_vec()).unwrap();
        let jet = cost_jet(&cp, &AmbientPoint::new(tm[k].to_vec()).unwrap()).unwrap();
        let cross = jet.ci_k.get([0, 0]) * jet.ci_k.get([1, 1]) - jet.ci_k.get([0, 1]) * jet.ci_k.get([1, 0]);
        let ww = w.w[k];
        let det = ww[0][0] * ww[1][1] - ww[0][1] * ww[1][0];
        let beta_x = cp.beta();
        let yc = &jet.y_coords;
        let beta_y = (1.0 - yc[0] * yc[0] - yc[1] * yc[1]).sqrt();
        let (lg, _, _) = gt.log_at(&tm[k]).unwrap();
        let expect = det.ln() - cross.abs().ln() - (ft.logrho()[id] - beta_x.ln()) + (lg - beta_y.ln());
        assert!((r[k] - expect).abs() < 1e-11, "{} vs {}", r[k], expect);
    }
}

#[test]
fn linearization_matches_difference_quotients() {
    let g = grid(32);
    let f = DensityField::zonal(g.clone(), 0.3).unwrap();
    let b = DensityField::bump(g.clone(), [1.0, 0.5, 0.0], 0.3).unwrap();
    let pb = TransportProblem::new(f, b).unwrap();
    let u = smooth_potential(&g);
    let t = 0.8;
    let v: Vec<f64> = g.nodes().iter().map(|n| (2.0 * n.point[0]).sin() * n.point[2] + 0.3 * n.point[1]).collect();
    let lin = pb.linearized_apply(&u, t, &v).unwrap();
    let r0 = pb.residual(&u, t).unwrap();
    let mut errs = Vec::new();
    for s in [1e-4, 1e-5] {
        let shifted: Vec<f64> = u.values().iter().zip(&v).map(|(a, b)| a + s * b).collect();
        let r1 = pb.residual(&Potential::new(g.clone(), shifted).unwrap(), t).unwrap();
        let mut e: Vec<f64> = r1.iter().zip(&r0).zip(&lin).map(|((a, b), l)| ((a - b) / s - l).abs()).collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // The target interpolant is only continuous across cell and chart
        // boundaries, so a few nodes whose image crosses one are excluded.
        errs.push(e[e.len() * 99 / 100]);
    }
    assert!(errs[1] < 0.2 * errs[0] && errs[1] < 1e-3, "{errs:?}");
    let ones = vec![1.0; g.len()];
    assert!(pb.linearized_apply(&u, t, &ones).unwrap().iter().all(|x| x.abs() < 1e-9));
}

#[test]
fn newton_contracts_on_the_zonal_instance() {
    let g = grid(32);
    let f = DensityField::zonal(g.clone(), half_margin_eps()).unwrap();
    let pb = TransportProblem::new(f, DensityField::uniform(g.clone())).unwrap();
    let s0 = pb.state(Potential::zero(g.clone()), 0.0, 0.1).unwrap();
    let s1 = pb.newton_step(&s0).unwrap();
    assert!(s1.residual_norm * 5.0 <= s0.residual_norm);
    let (s, hist) = pb.solve_at(s0, 1e-12, 8).unwrap();
    assert!(hist.len() >= 3);
    // Quadratic contraction on every step that ends above the rounding floor.
    for w in hist.windows(2).filter(|w| w[1] > 1e-12) {
        assert!(w[1] <= 1e3 * w[0] * w[0], "{hist:?}");
    }
    // Restarting at the solution takes no step.
    let (again, h2) = pb.solve_at(s, 1e-12, 8).unwrap();
    assert_eq!(h2.len(), 1);
    assert_eq!(again.newton_iters, 0);
}

#[test]
fn uniform_pair_is_trivial() {
    let g = grid(32);
    let u = DensityField::uniform(g.clone());
    let r = continuity_solve(&u, &u, 10).unwrap();
    assert!(r.converged && r.grad_max < 1e-12);
    assert!(diffeomorphism_certificate(&r).ok);
}

#[test]
fn zonal_solve_matches_rearrangement() {
    let g = grid(32);
    let eps = half_margin_eps();
    let f = DensityField::zonal(g.clone(), eps).unwrap();
    let uni = DensityField::uniform(g.clone());
    assert!(check_thm11(&f, &uni).unwrap().satisfied);
    let r = continuity_solve(&f, &uni, 10).unwrap();
    assert!(r.residual_norm < 1e-8);
    assert!(r.per_t.iter().all(|s| s.residuals.len() <= 9));
    let o = zonal_oracle(|t| 1.0 + eps * t.cos(), |_| 1.0).unwrap();
    let err = g
        .owned()
        .iter()
        .zip(&r.map.images)
        .map(|(&id, y)| dot3(&o.image(&g.nodes()[id].point), y).clamp(-1.0, 1.0).acos())
        .fold(0.0, f64::max);
    assert!(err < 5e-3, "{err}");
    assert!(r.grad_max <= r.thm41_bound * (1.0 + THM41_SLACK));
    assert!(r.pushforward_l1 < 1e-2);
    let cert = diffeomorphism_certificate(&r);
    assert!(cert.ok, "{:?}", cert.reasons);
}

#[test]
fn steep_source_fails_the_gradient_certificate() {
    let g = grid(32);
    let f = DensityField::from_density(g.clone(), |p| (2.0 * p[2]).exp()).unwrap();
    let uni = DensityField::uniform(g.clone());
    assert!(!check_thm11(&f, &uni).unwrap().satisfied);
    let r = continuity_solve(&f, &uni, 10).unwrap();
    assert!(r.converged && r.grad_max > 2.0 / std::f64::consts::PI);
    let cert = diffeomorphism_certificate(&r);
    assert!(!cert.ok && cert.reasons.contains(&"gradient"), "{:?}", cert.reasons);
}
