//! Optimal transport on the round sphere for the cost `|x - y|²/2`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity, clippy::too_many_arguments)]

pub mod c_convexity;
pub mod cost_kernel;
pub mod density;
pub mod discrete_ot;
pub mod error;
pub mod grid;
pub mod lowdisc;
mod network_simplex;
pub mod pde_solver;
pub mod sphere_geom;
pub mod tensor;
pub mod theorem_constants;

pub use error::{Error, Result};
