//! Solver-neutral MILP registry, piecewise curves and backends.

mod backend;
mod highs_backend;
mod lp_format;
mod model;
mod piecewise;

pub use backend::{backend_by_name, solve, Solution, SolveOptions, SolveStatus, SolverBackend, BACKEND_ENV};
pub use highs_backend::HighsBackend;
pub use lp_format::to_lp_string;
pub use model::{
    Constraint, ConstraintSense, LinExpr, ModelInstance, PiecewiseGroup, Var, VarDef, VarKind,
};
pub use piecewise::{linearize_power_curve, PiecewiseCurve};
