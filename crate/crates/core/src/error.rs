use thiserror::Error;

/// Errors raised by the library. Each variant carries a stable code via
/// [`Error::code`] so the CLI can report module-qualified failures.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point is not unit norm (|p| = {0})")]
    NotUnitNorm(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point lies outside the open hemisphere of the chart (<p, center> = {0})")]
    PointOutsideChart(f64),
    #[error("chart coordinates outside the open unit ball (|x| = {0})")]
    OutsideUnitBall(f64),

    #[error("point within 1e-8 of its chart equator")]
    ChartDegeneracy,
    #[error("gradient length {0} is not below 1")]
    GradientTooLarge(f64),
    #[error("cross-difference matrix is singular (|det| = {0})")]
    SingularCrossDifference(f64),

    #[error("dimension {0} is below the minimum of 2")]
    DimensionTooSmall(usize),

    #[error("problem size {rows}x{cols} exceeds the cap {cap}")]
    SizeCap { rows: usize, cols: usize, cap: usize },
    #[error("weights are infeasible: {0}")]
    InfeasibleWeights(String),
    #[error("sinkhorn did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("coupling is not a map: row {row} keeps only {fraction} of its mass on one column")]
    NotAMap { row: usize, fraction: f64 },

    #[error("potential is not c-convex (defect {0})")]
    NotCConvex(f64),

    #[error("w is not positive definite at node {node} (min eigenvalue {min_eig})")]
    NotAdmissible { node: usize, min_eig: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("line search failed (step below {0})")]
    LineSearchFailure(f64),
    #[error("admissibility lost during the Newton update")]
    AdmissibilityLost,
    #[error("continuation stalled at t = {t} (step {step})")]
    ContinuationStall { t: f64, step: f64 },
    #[error("displacement {0} too large for the monotone rearrangement")]
    DisplacementTooLarge(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotUnitNorm(_) => "sphere_geom.not_unit_norm",
            Error::DimensionMismatch { .. } => "sphere_geom.dimension_mismatch",
            Error::PointOutsideChart(_) => "sphere_geom.point_outside_chart",
            Error::OutsideUnitBall(_) => "sphere_geom.outside_unit_ball",
            Error::ChartDegeneracy => "cost_kernel.chart_degeneracy",
            Error::GradientTooLarge(_) => "cost_kernel.gradient_too_large",
            Error::SingularCrossDifference(_) => "cost_kernel.singular_cross_difference",
            Error::DimensionTooSmall(_) => "theorem_constants.dimension_too_small",
            Error::SizeCap { .. } => "discrete_ot.size_cap",
            Error::InfeasibleWeights(_) => "discrete_ot.infeasible_weights",
            Error::NonConvergence(_) => "discrete_ot.non_convergence",
            Error::NotAMap { .. } => "discrete_ot.not_a_map",
            Error::NotCConvex(_) => "c_convexity.not_c_convex",
            Error::NotAdmissible { .. } => "pde_solver.not_admissible",
            Error::LinearSolveFailure(_) => "pde_solver.linear_solve_failure",
            Error::LineSearchFailure(_) => "pde_solver.line_search_failure",
            Error::AdmissibilityLost => "pde_solver.admissibility_lost",
            Error::ContinuationStall { .. } => "pde_solver.continuation_stall",
            Error::DisplacementTooLarge(_) => "pde_solver.displacement_too_large",
            Error::InvalidGrid(_) => "pde_solver.invalid_grid",
            Error::InvalidInput(_) => "input.invalid",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
