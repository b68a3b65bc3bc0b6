#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use proptest::prelude::*;
use sphere_ot::cost_kernel::{cost, cost_jet, mtw_form, y_minus, y_plus, CostJet};
use sphere_ot::sphere_geom::{
    beta, chart_at, covector_norm, geodesic_distance, lift, AmbientPoint, Chart, ChartPoint,
    Hemisphere,
};

const H: f64 = 1e-5;

fn chart(center: [f64; 3], hemi: Hemisphere) -> Arc<Chart> {
    Arc::new(chart_at(&AmbientPoint::normalized(center.to_vec()).unwrap(), hemi))
}

/// Point over `chart`'s frame with graph coordinates `y` on the graph of sign `s`.
fn over(chart: &Chart, y: &[f64], s: f64) -> AmbientPoint {
    let mut f = y.to_vec();
    f.push(s * beta(y));
    AmbientPoint::normalized(chart.from_frame_coords(&f)).unwrap()
}

fn jet_at(chart: &Arc<Chart>, x: &[f64], y: &[f64], s: f64) -> CostJet {
    let xp = ChartPoint::new(chart.clone(), x.to_vec()).unwrap();
    cost_jet(&xp, &over(chart, y, s)).unwrap()
}

fn shift(v: &[f64], k: usize, d: f64) -> Vec<f64> {
    let mut w = v.to_vec();
    w[k] += d;
    w
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0)
}

/// Central difference in x (`wrt_x`) or in y of a scalar extracted from the jet.
fn fd(
    chart: &Arc<Chart>,
    x: &[f64],
    y: &[f64],
    s: f64,
    k: usize,
    wrt_x: bool,
    f: impl Fn(&CostJet) -> f64,
) -> f64 {
    let (p, m) = if wrt_x {
        (jet_at(chart, &shift(x, k, H), y, s), jet_at(chart, &shift(x, k, -H), y, s))
    } else {
        (jet_at(chart, x, &shift(y, k, H), s), jet_at(chart, x, &shift(y, k, -H), s))
    };
    (f(&p) - f(&m)) / (2.0 * H)
}

fn check_jet(c: &Arc<Chart>, x: &[f64], y: &[f64], s: f64) -> f64 {
    let j = jet_at(c, x, y, s);
    let n = x.len();
    let mut worst: f64 = 0.0;
    // c_i against the ambient cost composed with the lift.
    let ya = over(c, y, s);
    for i in 0..n {
        let cp = cost(&lift(&ChartPoint::new(c.clone(), shift(x, i, H)).unwrap()), &ya);
        let cm = cost(&lift(&ChartPoint::new(c.clone(), shift(x, i, -H)).unwrap()), &ya);
        let scale = j.ci.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        worst = worst.max(rel(j.ci[i], (cp - cm) / (2.0 * H), scale));
    }
    for i in 0..n {
        for a in 0..n {
            let d = fd(c, x, y, s, a, true, |q| q.ci[i]);
            worst = worst.max(rel(j.cij.get([i, a]), d, j.cij.max_abs()));
            let d = fd(c, x, y, s, a, false, |q| q.ci[i]);
            worst = worst.max(rel(j.ci_k.get([i, a]), d, j.ci_k.max_abs()));
            for b in 0..n {
                let d = fd(c, x, y, s, b, false, |q| q.cij.get([i, a]));
                worst = worst.max(rel(j.cij_k.get([i, a, b]), d, j.cij_k.max_abs()));
                let d = fd(c, x, y, s, b, false, |q| q.ci_k.get([i, a]));
                worst = worst.max(rel(j.ci_kl.get([i, a, b]), d, j.ci_kl.max_abs()));
                for e in 0..n {
                    let d = fd(c, x, y, s, e, false, |q| q.cij_k.get([i, a, b]));
                    worst = worst.max(rel(j.cij_kl.get([i, a, b, e]), d, j.cij_kl.max_abs()));
                }
            }
        }
    }
    worst
}

#[test]
fn jet_blocks_match_finite_differences() {
    let cases = [
        (chart([0.0, 0.0, 1.0], Hemisphere::Upper), [0.2, -0.3], [0.4, 0.1], 1.0),
        (chart([0.3, -0.5, 0.8], Hemisphere::Lower), [-0.45, 0.2], [0.1, 0.55], 1.0),
        (chart([0.3, -0.5, 0.8], Hemisphere::Upper), [0.35, 0.3], [-0.2, 0.6], -1.0),
        (chart([1.0, 0.0, 0.0], Hemisphere::Upper), [0.6, 0.5], [-0.3, -0.1], -1.0),
    ];
    for (c, x, y, s) in cases {
        let err = check_jet(&c, &x, &y, s);
        assert!(err < 1e-6, "relative error {err}");
    }
}

#[test]
fn jet_blocks_match_finite_differences_in_three_dimensions() {
    let c = Arc::new(chart_at(
        &AmbientPoint::normalized(vec![0.1, 0.2, -0.4, 0.9]).unwrap(),
        Hemisphere::Upper,
    ));
    let err = check_jet(&c, &[0.2, -0.1, 0.3], &[-0.3, 0.25, 0.1], 1.0);
    assert!(err < 1e-6, "relative error {err}");
}

/// The MTW form equals -∂²/∂p_k∂p_l of c_ij(x, Y⁺(x, p)) with x fixed.
#[test]
fn mtw_matches_second_variation_along_the_branch() {
    let c = chart([0.3, -0.5, 0.8], Hemisphere::Upper);
    let x = ChartPoint::new(c.clone(), vec![0.3, -0.2]).unwrap();
    let p0 = [0.25, 0.4];
    let y0 = y_plus(&x, &p0).unwrap();
    let form = mtw_form(&x, &y0).unwrap();
    let cij = |p: &[f64]| cost_jet(&x, &y_plus(&x, p).unwrap()).unwrap().cij;
    let h = 1e-4;
    let scale = form.coefficients.max_abs().max(1.0);
    for k in 0..2 {
        for l in 0..2 {
            let pp = shift(&shift(&p0, k, h), l, h);
            let pm = shift(&shift(&p0, k, h), l, -h);
            let mp = shift(&shift(&p0, k, -h), l, h);
            let mm = shift(&shift(&p0, k, -h), l, -h);
            let (a, b, cc, d) = (cij(&pp), cij(&pm), cij(&mp), cij(&mm));
            for i in 0..2 {
                for j in 0..2 {
                    let second =
                        (a.get([i, j]) - b.get([i, j]) - cc.get([i, j]) + d.get([i, j])) / (4.0 * h * h);
                    let err = (form.coefficients.get([i, j, k, l]) + second).abs() / scale;
                    assert!(err < 1e-5, "({i}{j},{k}{l}) error {err}");
                }
            }
        }
    }
}

#[test]
fn mtw_form_is_symmetric() {
    let c = chart([0.2, 0.7, 0.4], Hemisphere::Lower);
    let x = ChartPoint::new(c.clone(), vec![-0.1, 0.5]).unwrap();
    let f = mtw_form(&x, &over(&c, &[0.3, 0.2], 1.0)).unwrap();
    assert!(f.coefficients.is_symmetric_in(0, 1, 1e-12));
    assert!(f.coefficients.is_symmetric_in(2, 3, 1e-12));
}

fn arb_case() -> impl Strategy<Value = ([f64; 3], bool, [f64; 2], [f64; 2])> {
    (
        prop::array::uniform3(-1.0f64..1.0).prop_filter("nonzero", |v| v.iter().map(|a| a * a).sum::<f64>() > 0.01),
        any::<bool>(),
        (0.0f64..std::f64::consts::TAU, 0.0f64..0.9),
        (0.0f64..std::f64::consts::TAU, 0.0f64..0.98),
    )
        .prop_map(|(c, up, (ax, rx), (ap, rp))| {
            (c, up, [rx * ax.cos(), rx * ax.sin()], [ap.cos(), ap.sin()].map(|t| t * rp))
        })
}

proptest! {
    #[test]
    fn branches_solve_the_defining_equation((c, up, x, dir) in arb_case()) {
        let hemi = if up { Hemisphere::Upper } else { Hemisphere::Lower };
        let chart = chart(c, hemi);
        let xp = ChartPoint::new(chart, x.to_vec()).unwrap();
        // Scale the covector so that |p|_g = rp.
        let rp = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        prop_assume!(rp > 1e-6);
        let g = covector_norm(&x, &dir);
        let p: Vec<f64> = dir.iter().map(|d| d * rp / g).collect();
        let xa = lift(&xp);
        for (y, sign) in [(y_plus(&xp, &p).unwrap(), 1.0), (y_minus(&xp, &p).unwrap(), -1.0)] {
            let j = cost_jet(&xp, &y).unwrap();
            for i in 0..2 {
                prop_assert!((j.ci[i] + p[i]).abs() < 1e-10);
            }
            prop_assert!(sign * xa.dot(&y) > 0.0);
            let d = geodesic_distance(&xa, &y);
            if sign < 0.0 {
                prop_assert!((std::f64::consts::FRAC_PI_2..=std::f64::consts::PI).contains(&d));
            }
            prop_assert!((j.c - (1.0 - xa.dot(&y))).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_branch_margin_is_at_least_one((c, up, x, dir) in arb_case()) {
        let hemi = if up { Hemisphere::Upper } else { Hemisphere::Lower };
        let chart = chart(c, hemi);
        let xp = ChartPoint::new(chart, x.to_vec()).unwrap();
        let g = covector_norm(&x, &dir);
        prop_assume!(g > 1e-3);
        let y = y_plus(&xp, &dir).unwrap();
        prop_assume!(geodesic_distance(&lift(&xp), &y) > 1e-3);
        let m = sphere_ot::cost_kernel::a3s_margin(&xp, &y, 64).unwrap();
        prop_assert!(m >= 1.0 - 1e-8, "margin {}", m);
    }
}
