use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::model::{LinExpr, ModelInstance, Var};

/// Environment variable naming the default solver backend.
pub const BACKEND_ENV: &str = "DCFLEX_SOLVER";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub time_limit_s: f64,
    pub mip_rel_gap: f64,
    pub feasibility_tol: f64,
    pub random_seed: i32,
    /// Only solutions with an objective at or below this value are accepted;
    /// the solve reports infeasible when none exists.
    #[serde(default)]
    pub objective_cutoff: Option<f64>,
    /// Share of MIP effort spent in primal heuristics.
    #[serde(default = "default_heuristic_effort")]
    pub heuristic_effort: f64,
}

fn default_heuristic_effort() -> f64 {
    0.05
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit_s: 120.0,
            mip_rel_gap: 1e-6,
            feasibility_tol: 1e-7,
            random_seed: 0,
            objective_cutoff: None,
            heuristic_effort: default_heuristic_effort(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Incumbent found and proven within the requested gap but not to zero gap.
    FeasibleWithinGap,
    Infeasible,
    /// Stopped on the time limit; values are present only if an incumbent exists.
    TimeLimit,
    /// Backend error, distinct from infeasibility.
    Failed(String),
}

impl SolveStatus {
    pub fn label(&self) -> &str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleWithinGap => "feasible-within-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time-limit",
            SolveStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub mip_gap: Option<f64>,
    /// Primal values indexed like the model's variables; empty without an incumbent.
    pub values: Vec<f64>,
    pub elapsed: Duration,
}

impl Solution {
    pub fn has_values(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.values)
    }

    /// Values when an incumbent exists, an error naming the status otherwise.
    pub fn require_values(&self) -> Result<&[f64]> {
        if self.has_values() {
            Ok(&self.values)
        } else {
            Err(Error::Solver(format!("no incumbent (status {})", self.status.label())))
        }
    }
}

/// A MILP engine able to solve a [`ModelInstance`].
pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Whether piecewise groups are handled natively; otherwise the caller's
    /// model is lowered to the incremental binary encoding first.
    fn native_piecewise(&self) -> bool {
        false
    }

    fn solve_lowered(&self, model: &ModelInstance, opts: &SolveOptions) -> Solution;
}

/// Solves `model`, lowering piecewise groups when the backend lacks them.
///
/// Returned values cover only the variables registered in `model`.
pub fn solve(model: &ModelInstance, backend: &dyn SolverBackend, opts: &SolveOptions) -> Solution {
    if let Err(e) = model.validate() {
        return Solution {
            status: SolveStatus::Failed(e.to_string()),
            objective: None,
            mip_gap: None,
            values: Vec::new(),
            elapsed: Duration::ZERO,
        };
    }
    let mut sol = if backend.native_piecewise() || model.piecewise_groups().is_empty() {
        backend.solve_lowered(model, opts)
    } else {
        backend.solve_lowered(&model.lower_piecewise(), opts)
    };
    sol.values.truncate(model.num_vars());
    sol
}

/// Looks a backend up by name; `None` reads [`BACKEND_ENV`] and falls back to HiGHS.
pub fn backend_by_name(name: Option<&str>) -> Result<Box<dyn SolverBackend>> {
    let env = std::env::var(BACKEND_ENV).ok();
    let name = name.map(str::to_owned).or(env).unwrap_or_else(|| "highs".into());
    match name.to_ascii_lowercase().as_str() {
        "highs" => Ok(Box::new(crate::milp::highs_backend::HighsBackend)),
        other => Err(Error::invalid("solver", format!("unknown backend '{other}' (available: highs)"))),
    }
}
