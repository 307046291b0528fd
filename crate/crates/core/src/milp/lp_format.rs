//! CPLEX-style LP text dump for inspecting a model in external tools.
//!
//! Piecewise groups are written in their lowered incremental form. Variable
//! names are sanitised to `[A-Za-z0-9_.]` and prefixed with their index so they
//! stay unique.

use std::fmt::Write as _;

use crate::milp::model::{ModelInstance, VarKind};

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn write_terms(out: &mut String, names: &[String], terms: &[(crate::milp::Var, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names.first().cloned().unwrap_or_else(|| "x0".into()));
        return;
    }
    for (i, (v, c)) in terms.iter().enumerate() {
        let sign = if *c < 0.0 { "-" } else if i == 0 { "" } else { "+" };
        let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), names[v.index()]);
        if (i + 1) % 6 == 0 {
            out.push_str("\n   ");
        }
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "+inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.12}")
    }
}

pub fn to_lp_string(model: &ModelInstance) -> String {
    let m = model.lower_piecewise();
    let names: Vec<String> = m
        .vars()
        .iter()
        .enumerate()
        .map(|(i, d)| format!("v{i}_{}", sanitize(&d.name)))
        .collect();
    let mut out = String::new();
    out.push_str("\\ objective constant ");
    out.push_str(&fmt_num(m.objective().constant));
    out.push_str("\nMinimize\n obj:");
    write_terms(&mut out, &names, &m.objective().normalized().terms);
    out.push_str("\nSubject To\n");
    for (i, c) in m.constraints().iter().enumerate() {
        let _ = write!(out, " c{i}_{}:", sanitize(&c.name));
        write_terms(&mut out, &names, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense, fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for (d, n) in m.vars().iter().zip(&names) {
        if d.kind == VarKind::Binary {
            continue;
        }
        if d.lb == d.ub {
            let _ = writeln!(out, " {n} = {}", fmt_num(d.lb));
        } else {
            let _ = writeln!(out, " {} <= {n} <= {}", fmt_num(d.lb), fmt_num(d.ub));
        }
    }
    let bins: Vec<&String> = m
        .vars()
        .iter()
        .zip(&names)
        .filter(|(d, _)| d.kind == VarKind::Binary)
        .map(|(_, n)| n)
        .collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for chunk in bins.chunks(8) {
            out.push(' ');
            out.push_str(&chunk.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}
