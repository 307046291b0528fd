use std::time::Instant;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};

use crate::milp::backend::{Solution, SolveOptions, SolveStatus, SolverBackend};
use crate::milp::model::{ConstraintSense, ModelInstance, VarKind};

/// HiGHS branch-and-cut through the `highs` bindings.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl SolverBackend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve_lowered(&self, model: &ModelInstance, opts: &SolveOptions) -> Solution {
        let start = Instant::now();
        let n = model.num_vars();
        let failed = |msg: String| Solution {
            status: SolveStatus::Failed(msg),
            objective: None,
            mip_gap: None,
            values: Vec::new(),
            elapsed: start.elapsed(),
        };

        if n == 0 {
            // HiGHS reports no model status for a problem without columns.
            let ok = model.constraints().iter().all(|c| c.is_satisfied(&[], opts.feasibility_tol));
            return Solution {
                status: if ok { SolveStatus::Optimal } else { SolveStatus::Infeasible },
                objective: ok.then_some(model.objective().constant),
                mip_gap: ok.then_some(0.0),
                values: Vec::new(),
                elapsed: start.elapsed(),
            };
        }
        let mut cost = vec![0.0; n];
        for &(v, c) in &model.objective().terms {
            cost[v.index()] += c;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .vars()
            .iter()
            .zip(&cost)
            .map(|(d, &c)| match d.kind {
                VarKind::Continuous => pb.add_column(c, d.lb..=d.ub),
                VarKind::Binary => pb.add_integer_column(c, d.lb.max(0.0)..=d.ub.min(1.0)),
            })
            .collect();
        for c in model.constraints() {
            let row: Vec<_> = c.terms.iter().map(|&(v, k)| (cols[v.index()], k)).collect();
            match c.sense {
                ConstraintSense::Le => pb.add_row(..=c.rhs, row),
                ConstraintSense::Ge => pb.add_row(c.rhs.., row),
                ConstraintSense::Eq => pb.add_row(c.rhs..=c.rhs, row),
            }
        }
        let offset = model.objective().constant;

        let mut hm = match pb.try_optimise(Sense::Minimise) {
            Ok(m) => m,
            Err(e) => return failed(format!("could not load model: {e:?}")),
        };
        hm.make_quiet();
        hm.set_option("time_limit", opts.time_limit_s);
        hm.set_option("mip_rel_gap", opts.mip_rel_gap);
        hm.set_option("primal_feasibility_tolerance", opts.feasibility_tol);
        hm.set_option("mip_feasibility_tolerance", opts.feasibility_tol);
        hm.set_option("random_seed", opts.random_seed);
        hm.set_option("mip_heuristic_effort", opts.heuristic_effort);
        if let Some(cut) = opts.objective_cutoff {
            hm.set_option("objective_bound", cut - offset);
        }
        let solved = match hm.try_solve() {
            Ok(s) => s,
            Err(e) => return failed(format!("solver error: {e:?}")),
        };

        let has_incumbent = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let gap = solved.mip_gap();
        let status = match solved.status() {
            HighsModelStatus::Optimal if gap.is_finite() && gap > 1e-9 => SolveStatus::FeasibleWithinGap,
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::ReachedTimeLimit => SolveStatus::TimeLimit,
            other => SolveStatus::Failed(format!("{other:?}")),
        };
        let values = if has_incumbent || status == SolveStatus::Optimal {
            let v = solved.get_solution().columns().to_vec();
            if v.len() == n { v } else { vec![0.0; n] }
        } else {
            Vec::new()
        };
        let objective = (!values.is_empty()).then(|| {
            offset + model.objective().terms.iter().map(|(v, c)| c * values[v.index()]).sum::<f64>()
        });
        Solution {
            status,
            objective,
            mip_gap: gap.is_finite().then_some(gap),
            values,
            elapsed: start.elapsed(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::backend::solve;
    use crate::milp::model::LinExpr;
    use crate::milp::piecewise::PiecewiseCurve;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn empty_model_is_optimal_at_zero() {
        let m = ModelInstance::new();
        let s = solve(&m, &HighsBackend, &opts());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(0.0));
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut m = ModelInstance::new();
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        m.add_ge("lo", x.into(), 1.0);
        m.add_le("hi", x.into(), 0.0);
        let s = solve(&m, &HighsBackend, &opts());
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(!s.has_values());
    }

    #[test]
    fn small_milp() {
        // max x + y s.t. x + 2y <= 3.5, y binary, x <= 2
        let mut m = ModelInstance::new();
        let x = m.add_var("x", 0.0, 2.0);
        let y = m.add_binary("y");
        m.add_le("c", LinExpr::term(x, 1.0).with(y, 2.0), 3.5);
        m.add_objective(&LinExpr::term(x, -1.0).with(y, -1.0).plus(&LinExpr::constant(10.0), 1.0));
        let s = solve(&m, &HighsBackend, &opts());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value(x) - 1.5).abs() < 1e-7 && (s.value(y) - 1.0).abs() < 1e-9);
        assert!((s.objective.unwrap() - 7.5).abs() < 1e-7);
    }

    fn pinned_piecewise(x_at: f64) -> f64 {
        let curve = PiecewiseCurve::from_breakpoints(vec![(0.0, 1.0), (1.0, 2.0), (2.0, 5.0), (4.0, 6.0)]);
        let mut m = ModelInstance::new();
        let x = m.add_var("x", 0.0, 4.0);
        m.fix(x, x_at);
        let y = m.add_piecewise("f", x, &curve).unwrap();
        // Push the output both ways: only the curve itself is feasible.
        m.add_objective(&LinExpr::term(y, -1.0));
        let s = solve(&m, &HighsBackend, &opts());
        assert_eq!(s.values.len(), 2);
        let hi = s.value(y);
        let mut m2 = m.clone();
        m2.add_objective(&LinExpr::term(y, 2.0));
        let lo = solve(&m2, &HighsBackend, &opts()).value(y);
        assert!((hi - lo).abs() < 1e-6, "output not pinned: {lo}..{hi}");
        hi
    }

    #[test]
    fn piecewise_output_follows_breakpoints_and_chords() {
        assert!((pinned_piecewise(2.0) - 5.0).abs() < 1e-6);
        assert!((pinned_piecewise(1.5) - 3.5).abs() < 1e-6);
        assert!((pinned_piecewise(3.0) - 5.5).abs() < 1e-6);
    }
}
