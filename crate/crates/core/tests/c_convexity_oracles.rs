#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_ot::c_convexity::*;
use sphere_ot::cost_kernel::cost_jet;
use sphere_ot::grid::{dot3, normalize3, SphereGrid, Vec3};
use sphere_ot::sphere_geom::{AmbientPoint, ChartPoint};

fn grid(n: usize) -> Arc<SphereGrid> {
    Arc::new(SphereGrid::new(n).unwrap())
}

/// `u = <a, z>`: its supports touch where `y - a` is parallel to `x`.
fn linear(g: &Arc<SphereGrid>, a: Vec3) -> Potential {
    Potential::from_fn(g.clone(), move |z| dot3(&a, z)).unwrap()
}

fn linear_target(a: &Vec3, x: &Vec3) -> Vec3 {
    let ax = dot3(a, x);
    let r = -ax + (ax * ax + 1.0 - dot3(a, a)).sqrt();
    std::array::from_fn(|k| a[k] + r * x[k])
}

fn random_potential(g: &Arc<SphereGrid>, rng: &mut ChaCha8Rng) -> Potential {
    let dirs: Vec<(Vec3, f64)> = (0..4)
        .map(|_| {
            let v = normalize3([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            (v, rng.random_range(-0.5..0.5))
        })
        .collect();
    let noise: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-0.05..0.05)).collect();
    let smooth = g.sample(|z| dirs.iter().map(|(v, c)| c * dot3(v, z).powi(2)).sum());
    Potential::new(g.clone(), smooth.iter().zip(&noise).map(|(a, b)| a + b).collect()).unwrap()
}

#[test]
fn transform_algebra_on_random_potentials() {
    let g = grid(48);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let u = random_potential(&g, &mut rng);
        let uc = c_transform(&u);
        let ucc = c_transform(&uc);
        let uccc = c_transform(&ucc);
        assert!(owned_max_diff(&uccc, &uc) < 1e-10);
        for &k in g.owned() {
            assert!(ucc.values()[k] <= u.values()[k] + 1e-12);
        }
    }
}

#[test]
fn linear_potential_map_matches_closed_form() {
    let g = grid(48);
    let a = [0.3, -0.2, 0.33];
    let u = linear(&g, a);
    let t = t_plus_map(&u).unwrap();
    for (&id, y) in g.owned().iter().zip(&t) {
        let e = linear_target(&a, &g.nodes()[id].point);
        let err = (0..3).map(|k| (e[k] - y[k]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }
    let inj = map_injectivity(&g, &t);
    assert_eq!(inj.collisions, 0);
}

#[test]
fn branches_solve_the_first_order_relation() {
    let g = grid(40);
    let u = linear(&g, [0.1, 0.35, -0.2]);
    for (map, plus) in [(t_plus_map(&u).unwrap(), true), (t_minus_map(&u).unwrap(), false)] {
        for (&id, y) in g.owned().iter().zip(&map) {
            let nd = &g.nodes()[id];
            let cp = ChartPoint::new(g.charts[nd.chart].clone(), nd.x.to_vec()).unwrap();
            let jet = cost_jet(&cp, &AmbientPoint::new(y.to_vec()).unwrap()).unwrap();
            let du = u.gradient(id);
            for k in 0..2 {
                assert!((du[k] + jet.ci[k]).abs() < 1e-9);
            }
            let s = dot3(&nd.point, y);
            assert!(if plus { s > 0.0 } else { s < 0.0 });
        }
    }
}

#[test]
fn lower_branch_lands_past_the_equator() {
    let g = grid(40);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let d = normalize3([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let u = linear(&g, d.map(|v| 0.5 * v));
        assert!(u.gradient_sup() <= 0.5 + 1e-6);
        for (&id, y) in g.owned().iter().zip(&t_minus_map(&u).unwrap()) {
            let dist = dot3(&g.nodes()[id].point, y).clamp(-1.0, 1.0).acos();
            assert!((std::f64::consts::FRAC_PI_2..=std::f64::consts::PI).contains(&dist));
        }
    }
}

#[test]
fn smooth_potential_below_threshold_does_not_split() {
    let g = grid(32);
    let u = linear(&g, [0.3, -0.2, 0.33]);
    let cert = nonsplitting_check_with(&u, 0.1 * g.h).unwrap();
    assert!(cert.in_regime && cert.pass, "{cert:?}");
    let zero = nonsplitting_check(&Potential::zero(g)).unwrap();
    assert!(zero.pass && zero.worst_cells < 0.1, "{zero:?}");
}

#[test]
fn kinked_potential_splits() {
    let g = grid(33);
    let u = Potential::from_fn(g.clone(), |z| z[0].abs() - 1.0).unwrap();
    let cert = nonsplitting_check(&u).unwrap();
    assert!(!cert.pass && !cert.in_regime, "{cert:?}");
    assert!(cert.worst_cells > 10.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn double_transform_lies_below(seed in 0u64..1_000_000) {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_potential(&g, &mut rng);
        let ucc = c_transform(&c_transform(&u));
        for &k in g.owned() {
            prop_assert!(ucc.values()[k] <= u.values()[k] + 1e-12);
        }
    }
}
