use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};
use sphere_ot::c_convexity::NONSPLITTING_THRESHOLD;
use sphere_ot::density::DensityField;
use sphere_ot::discrete_ot::{
    check_monotonicity, fibonacci_sphere, linf_w2_bound_check, sinkhorn, solve_kantorovich, w2_squared,
    PointCloudMeasure,
};
use sphere_ot::grid::{dot3, normalize3, SphereGrid, Vec3};
use sphere_ot::pde_solver::{diffeomorphism_certificate, SolveReport, SolverOptions, TransportProblem};
use sphere_ot::sphere_geom::AmbientPoint;
use sphere_ot::theorem_constants::{
    check_cor13, check_thm11, check_thm12, gradient_bound_thm41, sphere_volume, DensityStats, DensitySummary,
    HypothesisReport, TheoremConstants,
};

use crate::input::{read_cloud, write_cloud, write_density_csv, write_zonal_csv, DensitySpec};
use crate::{json as js, CheckArgs, CliError, CliResult, Command, Convention, GenArgs, GenKind, Method, MtwArgs};
use crate::{SolveArgs, Theorem, W2Args, EXIT_FAIL, EXIT_OK};

pub fn dispatch(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Constants { dim, out } => {
            emit(&constants(dim)?, out.out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Check(a) => check(&a),
        Command::Solve(a) => solve(&a),
        Command::W2(a) => w2(&a),
        Command::MtwScan(a) => mtw(&a),
        Command::Verify(a) => crate::verify::command(&a),
        Command::Gen(a) => gen(&a),
    }
}

/// Writes versioned JSON to `out`, or to stdout.
pub fn emit(v: &Value, out: Option<&Path>) -> CliResult<()> {
    let text = js::to_string(&js::versioned(v.clone()));
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

pub fn constants(dim: usize) -> CliResult<Value> {
    let c = TheoremConstants::for_dim(dim)?;
    Ok(json!({
        "n": dim,
        "omega0": c.omega0,
        "delta1": c.delta1,
        "delta2": c.delta2,
        "thm11_threshold": c.thm11_threshold,
        "vol_sn": c.vol_sphere[dim],
    }))
}

pub fn hypothesis_json(r: &HypothesisReport) -> Value {
    json!({
        "theorem_id": r.theorem_id,
        "lhs": r.lhs,
        "rhs": r.rhs,
        "margin": r.margin,
        "satisfied": r.satisfied,
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(m), Value::Object(n)) = (&mut a, b) {
        m.extend(n);
    }
    a
}

fn check(a: &CheckArgs) -> CliResult<i32> {
    let (fs, gs) = (DensitySpec::parse(&a.f)?, DensitySpec::parse(&a.g)?);
    let (report, extra) = if fs == DensitySpec::Uniform && gs == DensitySpec::Uniform {
        // Exact statistics; no grid is needed.
        let rho = 1.0 / sphere_volume(a.dim);
        let s = DensityStats { dim: a.dim, gradient_sup: 0.0, density_max: rho, density_min: rho };
        match a.theorem {
            Theorem::T11 => (check_thm11(&s, &s)?, json!({"gradient_bound_thm41": gradient_bound_thm41(&s, &s)?})),
            Theorem::T12 => (check_thm12(0.0, rho, rho, a.dim)?, json!({"w2_squared": 0.0})),
            Theorem::T13 => (check_cor13(0.0, rho, rho, a.dim)?, json!({"linf_gap": 0.0})),
        }
    } else {
        if a.dim != 2 {
            return Err(CliError::usage("non-uniform densities are only supported on S² (--dim 2)"));
        }
        let grid = Arc::new(SphereGrid::new(a.grid)?);
        let f = fs.build(grid.clone())?;
        let g = gs.build(grid.clone())?;
        match a.theorem {
            Theorem::T11 => (check_thm11(&f, &g)?, json!({"gradient_bound_thm41": gradient_bound_thm41(&f, &g)?})),
            Theorem::T12 => {
                let rho = |p: &AmbientPoint, d: &DensityField| -> f64 {
                    let c = p.coords();
                    d.log_at(&[c[0], c[1], c[2]]).map(|v| v.0.exp()).unwrap_or(f64::NAN)
                };
                let r = linf_w2_bound_check(&|p| rho(p, &f), &|p| rho(p, &g), a.nodes)?;
                let rep = check_thm12(r.w2_squared, f.density_min(), g.density_min(), 2)?;
                (rep, json!({"w2_squared": r.w2_squared, "cloud_nodes": a.nodes}))
            }
            Theorem::T13 => {
                let gap = grid
                    .owned()
                    .iter()
                    .map(|&id| (f.density(id) - g.density(id)).abs())
                    .fold(0.0, f64::max);
                (check_cor13(gap, f.density_min(), g.density_min(), 2)?, json!({"linf_gap": gap}))
            }
        }
    };
    let v = merge(hypothesis_json(&report), merge(extra, json!({"dim": a.dim})));
    emit(&v, a.out.out.as_deref())?;
    Ok(if report.satisfied { EXIT_OK } else { EXIT_FAIL })
}

pub fn solve_json(r: &SolveReport) -> Value {
    let cert = diffeomorphism_certificate(r);
    let m = &r.map;
    let per_t: Vec<Value> = r
        .per_t
        .iter()
        .map(|s| {
            json!({
                "t": s.t,
                "residuals": s.residuals,
                "newton_iters": s.residuals.len().saturating_sub(1),
                "grad_max": s.grad_max,
                "min_eig": s.min_eig,
                "constant": s.constant,
            })
        })
        .collect();
    json!({
        "converged": r.converged,
        "grad_max": r.grad_max,
        "jacobian_min": r.jacobian_min,
        "pushforward_l1": r.pushforward_l1,
        "thm41_bound": r.thm41_bound,
        "residual_norm": r.residual_norm,
        "constant": r.constant,
        "per_t": per_t,
        "nonsplitting": {
            "pass": m.nonsplitting.pass,
            "in_regime": m.nonsplitting.in_regime,
            "convexity_defect": m.nonsplitting.convexity_defect,
            "nodes_checked": m.nonsplitting.nodes_checked,
            "worst_cells": m.nonsplitting.worst_cells,
        },
        "injectivity": {
            "collisions": m.injectivity.collisions,
            "min_image_gap": m.injectivity.min_image_gap,
        },
        "nonsplitting_threshold": NONSPLITTING_THRESHOLD,
        "certificate": {"ok": cert.ok, "reasons": cert.reasons},
    })
}

fn solve(a: &SolveArgs) -> CliResult<i32> {
    if a.t_steps == 0 {
        return Err(CliError::usage("--t-steps must be positive"));
    }
    let grid = Arc::new(SphereGrid::new(a.grid)?);
    let f = DensitySpec::parse(&a.f)?.build(grid.clone())?;
    let g = DensitySpec::parse(&a.g)?.build(grid.clone())?;
    let hyp = check_thm11(&f, &g)?;
    let setup = json!({"grid": a.grid, "t_steps": a.t_steps, "tol": a.tol, "hypothesis": hypothesis_json(&hyp)});
    if !hyp.satisfied && !a.force {
        let v = merge(setup, json!({"solved": false}));
        emit(&v, a.out.out.as_deref())?;
        eprintln!("gradient hypothesis fails (margin {:e}); rerun with --force to solve anyway", hyp.margin);
        return Ok(EXIT_FAIL);
    }
    let opts = SolverOptions { t_steps: a.t_steps, tol: a.tol, ..Default::default() };
    let report = TransportProblem::new(f, g)?.continuity_solve(opts)?;
    let ok = diffeomorphism_certificate(&report).ok;
    emit(&merge(setup, merge(solve_json(&report), json!({"solved": true}))), a.out.out.as_deref())?;
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

fn w2(a: &W2Args) -> CliResult<i32> {
    let mu = read_cloud(File::open(&a.mu).map_err(|e| CliError::Io(format!("{}: {e}", a.mu.display())))?, &a.mu)?;
    let nu = read_cloud(File::open(&a.nu).map_err(|e| CliError::Io(format!("{}: {e}", a.nu.display())))?, &a.nu)?;
    let plan = match a.method {
        Method::Lp => solve_kantorovich(&mu, &nu)?,
        Method::Sinkhorn => sinkhorn(&mu, &nu, a.epsilon)?,
    };
    let half = w2_squared(&plan);
    let (value, name) = match a.convention {
        Convention::Half => (half, "half"),
        Convention::Full => (2.0 * half, "full"),
    };
    let mut v = json!({
        "w2_squared": value,
        "convention": name,
        "monotonicity_violations": check_monotonicity(&plan).violations,
        "method": match a.method { Method::Lp => "lp", Method::Sinkhorn => "sinkhorn" },
        "marginal_residual": plan.marginal_residual(),
        "sizes": [mu.len(), nu.len()],
    });
    if a.method == Method::Sinkhorn {
        v["epsilon"] = a.epsilon.into();
    }
    emit(&v, a.out.out.as_deref())?;
    Ok(EXIT_OK)
}

fn mtw(a: &MtwArgs) -> CliResult<i32> {
    if !(a.dmin < a.dmax && a.dmax <= std::f64::consts::PI) {
        return Err(CliError::usage("need 0 < dmin < dmax ≤ π"));
    }
    if a.samples == 0 {
        return Err(CliError::usage("--samples must be positive"));
    }
    let s = sphere_ot::cost_kernel::mtw_scan(a.dim, a.samples, a.dmin, a.dmax, a.seed)?;
    let v = json!({
        "min_margin": s.min_margin,
        "argmin_pair": [js::point(s.argmin_x.coords()), js::point(s.argmin_y.coords())],
        "evaluated": s.evaluated,
        "skipped": s.skipped,
        "dim": a.dim,
        "dmin": a.dmin,
        "dmax": a.dmax,
        "seed": a.seed,
    });
    emit(&v, a.out.out.as_deref())?;
    Ok(EXIT_OK)
}

/// Unnormalized density of a built-in generator at a point.
pub fn analytic_density(spec: &DensitySpec) -> CliResult<Box<dyn Fn(&Vec3) -> f64>> {
    Ok(match *spec {
        DensitySpec::Uniform => Box::new(|_| 1.0),
        DensitySpec::Zonal { eps } => Box::new(move |p| 1.0 + eps * p[2]),
        DensitySpec::Bump { center, eps } => {
            let c = normalize3(center);
            Box::new(move |p| 1.0 + eps * (-4.0 * (1.0 - dot3(p, &c))).exp())
        }
        DensitySpec::File(_) => return Err(CliError::usage("this output needs a built-in density")),
    })
}

fn gen(a: &GenArgs) -> CliResult<i32> {
    let spec = DensitySpec::parse(&a.spec)?;
    let file = BufWriter::new(File::create(&a.out)?);
    match a.kind {
        GenKind::Nodal => write_density_csv(file, &spec.build(Arc::new(SphereGrid::new(a.grid)?))?)?,
        GenKind::Zonal => {
            let eps = match spec {
                DensitySpec::Uniform => 0.0,
                DensitySpec::Zonal { eps } => eps,
                _ => return Err(CliError::usage("zonal tables need a uniform or zonal density")),
            };
            if a.count < 2 {
                return Err(CliError::usage("--count must be at least 2"));
            }
            let table: Vec<(f64, f64)> = (0..a.count)
                .map(|k| std::f64::consts::PI * k as f64 / (a.count - 1) as f64)
                .map(|t| (t, (1.0 + eps * t.cos()).ln()))
                .collect();
            write_zonal_csv(file, &table)?
        }
        GenKind::Cloud => {
            let rho = analytic_density(&spec)?;
            let (s, c) = a.rotate.sin_cos();
            let pts: Vec<AmbientPoint> = fibonacci_sphere(a.count)
                .into_iter()
                .map(|p| {
                    let q = p.coords();
                    AmbientPoint::normalized(vec![c * q[0] - s * q[1], s * q[0] + c * q[1], q[2]])
                })
                .collect::<Result<_, _>>()?;
            let masses = pts.iter().map(|p| rho(&[p.coords()[0], p.coords()[1], p.coords()[2]])).collect();
            write_cloud(file, &PointCloudMeasure::normalized(pts, masses)?)?
        }
    }
    Ok(EXIT_OK)
}
