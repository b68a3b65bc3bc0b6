//! Continuity-method Newton solver for the transport equation on S².
//!
//! At an owned node `P` the equation is written in the graph chart centred
//! at `P`, where `x = 0`, `β(x) = 1`, `c_ij(0, y) = β(y) δ_ij` and
//! `c_{i,j}(0, y) = -δ_ij`. With `p = Du(P)` in that chart the target is
//! `T = (p, β_p)`, and the equation reads
//!
//! ```text
//! log det(D²u + β_p I) - log ρ_t(P) + log ρ̄_t(T) - log β_p = 0.
//! ```
//!
//! Derivatives are taken in the node's own chart and pulled back to the
//! centred chart. The unknowns are the nodal values of `u` on the whole
//! active set plus one constant `c` added to every equation; fringe values
//! are tied to their interpolants, one node is pinned in the Newton
//! direction and `u` is re-normalized to zero quadrature mean after each step.

mod certificate;
mod zonal;

pub use certificate::{
    diffeomorphism_certificate, jacobian_field, pushforward_l1, Certificate, MapDiagnostics,
};
pub use zonal::{zonal_oracle, ZonalOracle};

use std::sync::Arc;

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rayon::prelude::*;

use crate::c_convexity::{nonsplitting_check_with, t_plus_map, map_injectivity, Potential};
use crate::cost_kernel::cost_jet;
use crate::density::{grid_volume, DensityField};
use crate::error::{Error, Result};
use crate::grid::{derivatives, Frame, SphereGrid, Vec3, D1, D2};
use crate::sphere_geom::{chart_at, AmbientPoint, ChartPoint, Hemisphere};
use crate::theorem_constants::{gradient_bound_thm41, DensitySummary};

/// Steps with `|Du| ≥ MAX_GRADIENT` are rejected by the line search.
pub const MAX_GRADIENT: f64 = 0.99;
/// Relative slack allowed between the a priori gradient bound and `‖Du‖∞`.
pub const THM41_SLACK: f64 = 0.02;

/// `ρ_t = (1 - t)/Vol + t e^f` with `Vol` the grid volume, so the mass
/// stays exactly one.
pub fn density_path(field: &DensityField, t: f64) -> DensityField {
    let grid = field.grid().clone();
    let u = 1.0 / grid_volume(&grid);
    let l = field.logrho().iter().map(|&l| ((1.0 - t) * u + t * l.exp()).ln()).collect();
    DensityField::from_logrho(grid, l).expect("path stays positive")
}

/// `w_ij = u_ij + c_ij(x, T⁺(x))` at every owned node, in the node's chart.
#[derive(Debug, Clone)]
pub struct WField {
    pub w: Vec<[[f64; 2]; 2]>,
    pub min_eig: f64,
    pub argmin: usize,
}

fn sym_min_eig(w: &[[f64; 2]; 2]) -> f64 {
    let m = 0.5 * (w[0][0] + w[1][1]);
    let d = (0.25 * (w[0][0] - w[1][1]).powi(2) + w[0][1] * w[0][1]).sqrt();
    m - d
}

/// Reference assembly through the general cost jet.
pub fn assemble_w(u: &Potential) -> Result<WField> {
    let g = u.grid();
    let targets = t_plus_map(u)?;
    let w: Vec<[[f64; 2]; 2]> = g
        .owned()
        .par_iter()
        .zip(targets.par_iter())
        .map(|(&id, y)| {
            let nd = &g.nodes()[id];
            let d = derivatives(g, u.values(), id);
            let cp = ChartPoint::new(g.charts[nd.chart].clone(), nd.x.to_vec())?;
            let jet = cost_jet(&cp, &AmbientPoint::new(y.to_vec())?)?;
            let mut w = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    w[a][b] = d.hess[a][b] + jet.cij.get([a, b]);
                }
            }
            let off = 0.5 * (w[0][1] + w[1][0]);
            w[0][1] = off;
            w[1][0] = off;
            Ok(w)
        })
        .collect::<Result<_>>()?;
    let (argmin, min_eig) = w
        .iter()
        .map(sym_min_eig)
        .enumerate()
        .fold((usize::MAX, f64::INFINITY), |a, (k, e)| if e < a.1 { (k, e) } else { a });
    Ok(WField { w, min_eig, argmin: g.owned().get(argmin).copied().unwrap_or(usize::MAX) })
}

/// Pull-back from a node's chart to the chart centred at the node:
/// `x(ξ) = A ξ + b β(ξ)`.
#[derive(Debug, Clone, Copy)]
struct NodeFrame {
    a: [[f64; 2]; 2],
    b: [f64; 2],
    centred: Frame,
}

/// Per-node outcome of the residual evaluation.
struct NodeEval {
    r: f64,
    grad: f64,
    min_eig: f64,
    /// `(node, coefficient)` pairs of the linearization.
    row: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub t_steps: usize,
    pub tol: f64,
    pub max_newton: usize,
    pub min_dt: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { t_steps: 10, tol: 1e-10, max_newton: 8, min_dt: 1.0 / 160.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub u: Potential,
    /// Constant absorbing the discrete mass mismatch.
    pub c: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
    pub min_eig: f64,
    pub grad_max: f64,
}

/// Newton history at one value of `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub residuals: Vec<f64>,
    pub grad_max: f64,
    pub min_eig: f64,
    pub constant: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub grad_max: f64,
    pub jacobian_min: f64,
    pub pushforward_l1: f64,
    pub thm41_bound: f64,
    pub residual_norm: f64,
    pub constant: f64,
    pub per_t: Vec<StepRecord>,
    pub map: MapDiagnostics,
    pub state: SolverState,
}

/// Densities, grid geometry and the path between uniform and `(f, g)`.
pub struct TransportProblem {
    grid: Arc<SphereGrid>,
    f: DensityField,
    g: DensityField,
    frames: Vec<NodeFrame>,
}

impl TransportProblem {
    pub fn new(f: DensityField, g: DensityField) -> Result<TransportProblem> {
        if !Arc::ptr_eq(f.grid(), g.grid()) {
            return Err(Error::InvalidInput("densities live on different grids".into()));
        }
        let grid = f.grid().clone();
        let frames = grid
            .owned()
            .iter()
            .map(|&id| {
                let nd = &grid.nodes()[id];
                let centred = Frame::from_chart(&chart_at(&AmbientPoint::new(nd.point.to_vec())?, Hemisphere::Upper));
                let fc = &grid.frames[nd.chart];
                let m = |i: usize, a: usize| crate::grid::dot3(&fc.0[i], &centred.0[a]);
                Ok(NodeFrame { a: [[m(0, 0), m(0, 1)], [m(1, 0), m(1, 1)]], b: [m(0, 2), m(1, 2)], centred })
            })
            .collect::<Result<_>>()?;
        Ok(TransportProblem { grid, f, g, frames })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn source(&self) -> &DensityField {
        &self.f
    }

    pub fn target(&self) -> &DensityField {
        &self.g
    }

    fn eval_node(&self, k: usize, values: &[f64], lf: &DensityField, lg: &DensityField, jac: bool) -> Result<NodeEval> {
        let grid = &self.grid;
        let id = grid.owned()[k];
        let fr = &self.frames[k];
        let d = derivatives(grid, values, id);
        let (a, b) = (fr.a, fr.b);
        let gb = d.grad[0] * b[0] + d.grad[1] * b[1];
        let p = [a[0][0] * d.grad[0] + a[1][0] * d.grad[1], a[0][1] * d.grad[0] + a[1][1] * d.grad[1]];
        let np = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if !(np < MAX_GRADIENT) {
            return Err(Error::GradientTooLarge(np));
        }
        let bp = (1.0 - np * np).sqrt();
        // W = Aᵀ H A - (g·b) I + β_p I
        let mut w = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k1 in 0..2 {
                    for l1 in 0..2 {
                        s += a[k1][i] * d.hess[k1][l1] * a[l1][j];
                    }
                }
                w[i][j] = s + if i == j { bp - gb } else { 0.0 };
            }
        }
        let det = w[0][0] * w[1][1] - w[0][1] * w[1][0];
        let min_eig = sym_min_eig(&w);
        if !(min_eig > 0.0) {
            return Err(Error::NotAdmissible { node: id, min_eig });
        }
        let t = fr.centred.apply_transpose(&[p[0], p[1], bp]);
        let (lgt, dlg, dc) = lg
            .log_at(&t)
            .ok_or_else(|| Error::InvalidGrid("target point has no interpolation stencil".into()))?;
        let r = det.ln() - lf.logrho()[id] + lgt - bp.ln();
        if !jac {
            return Ok(NodeEval { r, grad: np, min_eig, row: Vec::new() });
        }

        let wi = [[w[1][1] / det, -w[0][1] / det], [-w[1][0] / det, w[0][0] / det]];
        let tr = wi[0][0] + wi[1][1];
        // K = A W⁻¹ Aᵀ
        let mut kk = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for a1 in 0..2 {
                    for b1 in 0..2 {
                        kk[i][j] += a[i][a1] * wi[a1][b1] * a[j][b1];
                    }
                }
            }
        }
        let fd = &grid.frames[dc];
        let mut s = [0.0; 2];
        for (ai, sa) in s.iter_mut().enumerate() {
            let mut e = [0.0, 0.0, -p[ai] / bp];
            e[ai] = 1.0;
            let dt: Vec3 = fr.centred.apply_transpose(&e);
            let v = fd.apply(&dt);
            *sa = dlg[0] * v[0] + dlg[1] * v[1];
        }
        let mut q = [0.0; 2];
        for (kq, qk) in q.iter_mut().enumerate() {
            for ai in 0..2 {
                *qk += a[kq][ai] * (-tr * p[ai] / bp + s[ai] + p[ai] / (bp * bp));
            }
            *qk -= tr * b[kq];
        }
        let h = grid.h;
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(26);
        for (m, o) in (-2isize..=2).enumerate() {
            row.push((grid.neighbor(id, o, 0), D2[m] / (h * h) * kk[0][0] + D1[m] / h * q[0]));
            row.push((grid.neighbor(id, 0, o), D2[m] / (h * h) * kk[1][1] + D1[m] / h * q[1]));
        }
        for (ma, oa) in (-2isize..=2).enumerate() {
            for (mb, ob) in (-2isize..=2).enumerate() {
                if oa != 0 && ob != 0 {
                    row.push((grid.neighbor(id, oa, ob), 2.0 * kk[0][1] * D1[ma] * D1[mb] / (h * h)));
                }
            }
        }
        row.sort_unstable_by_key(|e| e.0);
        row.dedup_by(|x, y| {
            if x.0 == y.0 {
                y.1 += x.1;
                true
            } else {
                false
            }
        });
        Ok(NodeEval { r, grad: np, min_eig, row })
    }

    fn eval(&self, values: &[f64], t: f64, jac: bool) -> Result<Vec<NodeEval>> {
        let lf = density_path(&self.f, t);
        let lg = density_path(&self.g, t);
        (0..self.grid.owned().len()).into_par_iter().map(|k| self.eval_node(k, values, &lf, &lg, jac)).collect()
    }

    /// Residual at every owned node, in `grid.owned()` order.
    pub fn residual(&self, u: &Potential, t: f64) -> Result<Vec<f64>> {
        Ok(self.eval(u.values(), t, false)?.into_iter().map(|e| e.r).collect())
    }

    /// Derivative of the residual at `u` in the direction `v`.
    pub fn linearized_apply(&self, u: &Potential, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .eval(u.values(), t, true)?
            .into_iter()
            .map(|e| e.row.iter().map(|&(k, c)| c * v[k]).sum())
            .collect())
    }

    /// Full discrete system: owned equations `R + c`, fringe relations and
    /// a pin on the first owned node. Also returns the worst gradient and eigenvalue.
    fn system(&self, values: &[f64], c: f64, t: f64, jac: bool) -> Result<(Vec<f64>, Vec<NodeEval>, f64, f64)> {
        let grid = &self.grid;
        let n = grid.len();
        let evals = self.eval(values, t, jac)?;
        let mut f = vec![0.0; n + 1];
        let mut gmax: f64 = 0.0;
        let mut emin = f64::INFINITY;
        for (k, &id) in grid.owned().iter().enumerate() {
            f[id] = evals[k].r + c;
            gmax = gmax.max(evals[k].grad);
            emin = emin.min(evals[k].min_eig);
        }
        for &id in grid.fringe() {
            f[id] = values[id] - grid.nodes()[id].donors.iter().map(|&(d, w)| w * values[d]).sum::<f64>();
        }
        // Gauge row: the Newton direction keeps the pinned node fixed.
        f[n] = 0.0;
        Ok((f, evals, gmax, emin))
    }

    fn solve_linear(&self, evals: &[NodeEval], rhs: &[f64]) -> Result<Vec<f64>> {
        let grid = &self.grid;
        let n = grid.len();
        let mut trip: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(n * 28);
        for (k, &id) in grid.owned().iter().enumerate() {
            for &(col, v) in &evals[k].row {
                trip.push(Triplet::new(id, col, v));
            }
            trip.push(Triplet::new(id, n, 1.0));
        }
        for &id in grid.fringe() {
            trip.push(Triplet::new(id, id, 1.0));
            for &(d, w) in &grid.nodes()[id].donors {
                trip.push(Triplet::new(id, d, -w));
            }
        }
        trip.push(Triplet::new(n, grid.owned()[0], 1.0));
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n + 1, n + 1, &trip)
            .map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        let x = lu.solve(Mat::<f64>::from_fn(n + 1, 1, |r, _| rhs[r]));
        let out: Vec<f64> = (0..n + 1).map(|r| x[(r, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailure("non-finite Newton direction".into()));
        }
        Ok(out)
    }

    /// State for `u` at parameter `t`.
    pub fn state(&self, u: Potential, c: f64, t: f64) -> Result<SolverState> {
        let (f, _, gmax, emin) = self.system(u.values(), c, t, false)?;
        Ok(SolverState { t, u, c, residual_norm: inf_norm(&f), newton_iters: 0, min_eig: emin, grad_max: gmax })
    }

    /// One damped Newton step with backtracking on the residual ∞-norm.
    pub fn newton_step(&self, state: &SolverState) -> Result<SolverState> {
        let n = self.grid.len();
        let (f, evals, _, _) = self.system(state.u.values(), state.c, state.t, true)?;
        let r0 = inf_norm(&f);
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let delta = self.solve_linear(&evals, &rhs)?;
        let mut alpha = 1.0;
        while alpha >= 1.0 / 256.0 {
            let vals: Vec<f64> = state.u.values().iter().zip(&delta).map(|(u, d)| u + alpha * d).collect();
            let c = state.c + alpha * delta[n];
            if let Ok((f1, _, gmax, emin)) = self.system(&vals, c, state.t, false) {
                let r1 = inf_norm(&f1);
                if r1 < r0 {
                    let u = Potential::new(self.grid.clone(), vals)?.normalized();
                    return Ok(SolverState {
                        t: state.t,
                        u,
                        c,
                        residual_norm: r1,
                        newton_iters: state.newton_iters + 1,
                        min_eig: emin,
                        grad_max: gmax,
                    });
                }
            }
            alpha *= 0.5;
        }
        Err(Error::LineSearchFailure(1.0 / 256.0))
    }

    /// Newton iterations at fixed `t` from `start`; returns the state and the
    /// residual history (starting residual first).
    pub fn solve_at(&self, start: SolverState, tol: f64, max_newton: usize) -> Result<(SolverState, Vec<f64>)> {
        let mut st = SolverState { newton_iters: 0, ..start };
        let mut hist = vec![st.residual_norm];
        while st.residual_norm > tol {
            if st.newton_iters >= max_newton {
                return Err(Error::ContinuationStall { t: st.t, step: 0.0 });
            }
            st = self.newton_step(&st)?;
            hist.push(st.residual_norm);
        }
        Ok((st, hist))
    }

    /// Marches `t` from 0 to 1, halving the step on failure.
    pub fn continuity_solve(&self, opts: SolverOptions) -> Result<SolveReport> {
        if opts.t_steps == 0 {
            return Err(Error::InvalidInput("t_steps must be positive".into()));
        }
        let mut st = self.state(Potential::zero(self.grid.clone()), 0.0, 0.0)?;
        let mut per_t = vec![StepRecord {
            t: 0.0,
            residuals: vec![st.residual_norm],
            grad_max: st.grad_max,
            min_eig: st.min_eig,
            constant: st.c,
        }];
        let mut dt = 1.0 / opts.t_steps as f64;
        let mut prev: Option<SolverState> = None;
        while st.t < 1.0 {
            // Snap the last step so rounding in the sum of steps cannot leave t short of 1.
            let t1 = if st.t + dt > 1.0 - 1e-9 { 1.0 } else { st.t + dt };
            // Secant predictor from the last two accepted states.
            let guess = match &prev {
                Some(p) if p.t < st.t => {
                    let s = (t1 - st.t) / (st.t - p.t);
                    let vals: Vec<f64> =
                        st.u.values().iter().zip(p.u.values()).map(|(a, b)| a + s * (a - b)).collect();
                    Potential::new(self.grid.clone(), vals)?.normalized()
                }
                _ => st.u.clone(),
            };
            let c_guess = st.c;
            let attempt = self
                .state(guess, c_guess, t1)
                .or_else(|_| self.state(st.u.clone(), st.c, t1))
                .and_then(|s0| self.solve_at(s0, opts.tol, opts.max_newton));
            match attempt {
                Ok((s1, hist)) => {
                    per_t.push(StepRecord {
                        t: t1,
                        residuals: hist,
                        grad_max: s1.grad_max,
                        min_eig: s1.min_eig,
                        constant: s1.c,
                    });
                    prev = Some(std::mem::replace(&mut st, s1));
                }
                Err(e) => {
                    if dt / 2.0 < opts.min_dt - 1e-15 {
                        return Err(match e {
                            Error::ContinuationStall { .. } => Error::ContinuationStall { t: st.t, step: dt },
                            other => other,
                        });
                    }
                    dt /= 2.0;
                }
            }
        }
        self.report(st, per_t)
    }

    fn report(&self, st: SolverState, per_t: Vec<StepRecord>) -> Result<SolveReport> {
        let map = certificate::diagnose(self, &st.u)?;
        let thm41_bound = gradient_bound_thm41(&self.f as &dyn DensitySummary, &self.g as &dyn DensitySummary)?;
        Ok(SolveReport {
            converged: true,
            grad_max: map.grad_max,
            jacobian_min: map.jacobian_min,
            pushforward_l1: map.pushforward_l1,
            thm41_bound,
            residual_norm: st.residual_norm,
            constant: st.c,
            per_t,
            map,
            state: st,
        })
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Residual of the equation at `t` for the pair `(f, g)`.
pub fn residual(u: &Potential, t: f64, f: &DensityField, g: &DensityField) -> Result<Vec<f64>> {
    TransportProblem::new(f.clone(), g.clone())?.residual(u, t)
}

pub fn continuity_solve(f: &DensityField, g: &DensityField, t_steps: usize) -> Result<SolveReport> {
    TransportProblem::new(f.clone(), g.clone())?.continuity_solve(SolverOptions { t_steps, ..Default::default() })
}

pub(crate) fn nonsplitting_for(u: &Potential) -> Result<crate::c_convexity::NonsplittingCertificate> {
    nonsplitting_check_with(u, 0.1 * u.grid().h)
}

pub(crate) fn injectivity_for(u: &Potential, images: &[Vec3]) -> crate::c_convexity::InjectivityReport {
    map_injectivity(u.grid(), images)
}
