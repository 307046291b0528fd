use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::piecewise::PiecewiseCurve;

/// Handle to a registered variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDef {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

/// Affine expression `Σ c_i x_i + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(Var, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: Var, c: f64) -> Self {
        Self {
            terms: vec![(v, c)],
            constant: 0.0,
        }
    }

    pub fn add(&mut self, v: Var, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms.push((v, c));
        }
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add(v, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn with(mut self, v: Var, c: f64) -> Self {
        self.add(v, c);
        self
    }

    pub fn plus(mut self, other: &LinExpr, scale: f64) -> Self {
        self.add_expr(other, scale);
        self
    }

    /// Merges duplicate variables and drops zero coefficients, ordered by variable.
    pub fn normalized(&self) -> LinExpr {
        let mut acc: BTreeMap<Var, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *acc.entry(v).or_insert(0.0) += c;
        }
        LinExpr {
            terms: acc.into_iter().filter(|(_, c)| *c != 0.0).collect(),
            constant: self.constant,
        }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::term(v, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintSense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for ConstraintSense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintSense::Le => "<=",
            ConstraintSense::Ge => ">=",
            ConstraintSense::Eq => "=",
        })
    }
}

/// `Σ c_i x_i  sense  rhs`; any expression constant is moved into `rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(Var, f64)>,
    pub sense: ConstraintSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn is_satisfied(&self, values: &[f64], tol: f64) -> bool {
        let lhs: f64 = self.terms.iter().map(|(v, c)| c * values[v.0]).sum();
        match self.sense {
            ConstraintSense::Le => lhs <= self.rhs + tol,
            ConstraintSense::Ge => lhs >= self.rhs - tol,
            ConstraintSense::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

/// `output = curve(input)` with at most two adjacent breakpoints active.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseGroup {
    pub name: String,
    pub input: Var,
    pub output: Var,
    pub breakpoints: Vec<(f64, f64)>,
}

/// Minimisation MILP: variables, linear rows, piecewise groups, linear objective.
#[derive(Debug, Clone, Default)]
pub struct ModelInstance {
    vars: Vec<VarDef>,
    constraints: Vec<Constraint>,
    piecewise: Vec<PiecewiseGroup>,
    objective: LinExpr,
}

impl ModelInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> Var {
        self.push_var(name.into(), VarKind::Continuous, lb, ub)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Var {
        self.push_var(name.into(), VarKind::Binary, 0.0, 1.0)
    }

    fn push_var(&mut self, name: String, kind: VarKind, lb: f64, ub: f64) -> Var {
        self.vars.push(VarDef { name, kind, lb, ub });
        Var(self.vars.len() - 1)
    }

    pub fn fix(&mut self, v: Var, value: f64) {
        let d = &mut self.vars[v.0];
        d.lb = value;
        d.ub = value;
    }

    pub fn set_bounds(&mut self, v: Var, lb: f64, ub: f64) {
        let d = &mut self.vars[v.0];
        d.lb = lb;
        d.ub = ub;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        expr: LinExpr,
        sense: ConstraintSense,
        rhs: f64,
    ) {
        let e = expr.normalized();
        self.constraints.push(Constraint {
            name: name.into(),
            terms: e.terms,
            sense,
            rhs: rhs - e.constant,
        });
    }

    pub fn add_le(&mut self, name: impl Into<String>, expr: LinExpr, rhs: f64) {
        self.add_constraint(name, expr, ConstraintSense::Le, rhs);
    }

    pub fn add_ge(&mut self, name: impl Into<String>, expr: LinExpr, rhs: f64) {
        self.add_constraint(name, expr, ConstraintSense::Ge, rhs);
    }

    pub fn add_eq(&mut self, name: impl Into<String>, expr: LinExpr, rhs: f64) {
        self.add_constraint(name, expr, ConstraintSense::Eq, rhs);
    }

    /// Adds `expr` to the minimised objective.
    pub fn add_objective(&mut self, expr: &LinExpr) {
        self.objective.add_expr(expr, 1.0);
    }

    /// Constrains a fresh output variable to the piecewise image of `input`.
    pub fn add_piecewise(
        &mut self,
        name: impl Into<String>,
        input: Var,
        curve: &PiecewiseCurve,
    ) -> Result<Var> {
        let name = name.into();
        let bp = &curve.breakpoints;
        if bp.len() < 2 || bp.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Model(format!(
                "{name}: piecewise curve needs at least two strictly increasing breakpoints"
            )));
        }
        let d = &self.vars[input.0];
        if !d.lb.is_finite() || !d.ub.is_finite() {
            return Err(Error::Model(format!(
                "{name}: piecewise input {} is unbounded",
                d.name
            )));
        }
        let (x0, xn) = (bp[0].0, bp[bp.len() - 1].0);
        if d.lb < x0 - 1e-12 || d.ub > xn + 1e-12 {
            return Err(Error::Model(format!(
                "{name}: input bounds [{}, {}] leave the breakpoint range [{x0}, {xn}]",
                d.lb, d.ub
            )));
        }
        let lo = bp.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = bp.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let output = self.add_var(format!("{name}_out"), lo, hi);
        self.piecewise.push(PiecewiseGroup {
            name,
            input,
            output,
            breakpoints: bp.clone(),
        });
        Ok(output)
    }

    pub fn vars(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn var(&self, v: Var) -> &VarDef {
        &self.vars[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn piecewise_groups(&self) -> &[PiecewiseGroup] {
        &self.piecewise
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Checks that every row and group references registered variables.
    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        for c in &self.constraints {
            if let Some((v, _)) = c.terms.iter().find(|(v, _)| v.0 >= n) {
                return Err(Error::Model(format!(
                    "constraint {} references unknown variable #{}",
                    c.name, v.0
                )));
            }
        }
        if let Some((v, _)) = self.objective.terms.iter().find(|(v, _)| v.0 >= n) {
            return Err(Error::Model(format!("objective references unknown variable #{}", v.0)));
        }
        for g in &self.piecewise {
            if g.input.0 >= n || g.output.0 >= n {
                return Err(Error::Model(format!("piecewise group {} references unknown variable", g.name)));
            }
        }
        Ok(())
    }

    /// Rewrites every piecewise group with the incremental (delta) binary formulation.
    ///
    /// Variables of `self` keep their indices in the returned model; the encoding
    /// appends its own fill and order variables after them.
    pub fn lower_piecewise(&self) -> ModelInstance {
        let mut m = ModelInstance {
            vars: self.vars.clone(),
            constraints: self.constraints.clone(),
            piecewise: Vec::new(),
            objective: self.objective.clone(),
        };
        for g in &self.piecewise {
            let n = g.breakpoints.len() - 1;
            let fill: Vec<Var> = (0..n)
                .map(|i| m.add_var(format!("{}_d{i}", g.name), 0.0, 1.0))
                .collect();
            let order: Vec<Var> = (0..n.saturating_sub(1))
                .map(|i| m.add_binary(format!("{}_y{i}", g.name)))
                .collect();
            let (x0, y0) = g.breakpoints[0];
            let mut x = LinExpr::term(g.input, 1.0);
            let mut y = LinExpr::term(g.output, 1.0);
            for (i, w) in g.breakpoints.windows(2).enumerate() {
                x.add(fill[i], -(w[1].0 - w[0].0));
                y.add(fill[i], -(w[1].1 - w[0].1));
            }
            m.add_eq(format!("{}_x", g.name), x, x0);
            m.add_eq(format!("{}_y", g.name), y, y0);
            // Segment i+1 may only fill once segment i is full.
            for i in 0..order.len() {
                m.add_le(
                    format!("{}_o{i}a", g.name),
                    LinExpr::term(fill[i + 1], 1.0).with(order[i], -1.0),
                    0.0,
                );
                m.add_le(
                    format!("{}_o{i}b", g.name),
                    LinExpr::term(order[i], 1.0).with(fill[i], -1.0),
                    0.0,
                );
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_move_to_the_right_hand_side() {
        let mut m = ModelInstance::new();
        let x = m.add_var("x", 0.0, 10.0);
        m.add_le("c", LinExpr::term(x, 2.0).with(x, 1.0).plus(&LinExpr::constant(3.0), 1.0), 9.0);
        let c = &m.constraints()[0];
        assert_eq!(c.terms, vec![(x, 3.0)]);
        assert_eq!(c.rhs, 6.0);
    }

    #[test]
    fn piecewise_rejects_unbounded_input() {
        let mut m = ModelInstance::new();
        let x = m.add_var("x", 0.0, f64::INFINITY);
        let curve = PiecewiseCurve::from_breakpoints(vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(m.add_piecewise("p", x, &curve).is_err());
    }

    #[test]
    fn piecewise_rejects_non_increasing_breakpoints() {
        let mut m = ModelInstance::new();
        let x = m.add_var("x", 0.0, 1.0);
        let curve = PiecewiseCurve::from_breakpoints(vec![(0.0, 0.0), (0.0, 1.0)]);
        assert!(m.add_piecewise("p", x, &curve).is_err());
    }

    #[test]
    fn lowering_keeps_original_indices() {
        let mut m = ModelInstance::new();
        let x = m.add_var("x", 0.0, 1.0);
        let curve = PiecewiseCurve::from_breakpoints(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 3.0)]);
        let y = m.add_piecewise("p", x, &curve).unwrap();
        let low = m.lower_piecewise();
        assert_eq!(low.var(x).name, "x");
        assert_eq!(low.var(y).name, "p_out");
        assert_eq!(low.num_vars(), m.num_vars() + 2 + 1);
        assert_eq!(low.num_binaries(), 1);
        assert!(low.piecewise_groups().is_empty());
    }
}
