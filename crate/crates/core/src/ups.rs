//! UPS battery block: state of charge, semi-continuous power bands, exclusivity.

use serde::{Deserialize, Serialize};

use crate::config::{SlotWindow, TimeGrid, UpsParams};
use crate::error::{Error, Result};
use crate::milp::{LinExpr, ModelInstance, Solution, Var};

/// Energy pinned at window boundaries. `None` leaves the state free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpsBoundary {
    pub start_kwh: Option<f64>,
    /// Boundary index (0..=len) and the energy required there.
    pub end: Option<(usize, f64)>,
}

impl UpsBoundary {
    /// Start and end of the cycle at `soc_start_end`.
    pub fn cyclic(params: &UpsParams, grid: &TimeGrid) -> Self {
        let at = if params.cyclic_at_main_end {
            grid.main_slots
        } else {
            grid.total_slots()
        };
        Self {
            start_kwh: Some(params.e_start_end_kwh()),
            end: Some((at, params.e_start_end_kwh())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UPSVars {
    pub window: SlotWindow,
    /// Stored energy at each slot boundary; `e[i + 1]` is the energy after slot `i`.
    pub e: Vec<Var>,
    pub p_ch: Vec<Var>,
    pub p_disch: Vec<Var>,
    pub z_ch: Vec<Var>,
    pub z_disch: Vec<Var>,
    pub p_net: Vec<LinExpr>,
}

/// Full-horizon UPS block with the cyclic endpoint condition.
pub fn add_ups(model: &mut ModelInstance, params: &UpsParams, grid: &TimeGrid) -> UPSVars {
    add_ups_window(
        model,
        params,
        grid.window(),
        grid.slot_duration_hours,
        UpsBoundary::cyclic(params, grid),
    )
}

pub fn add_ups_window(
    model: &mut ModelInstance,
    params: &UpsParams,
    window: SlotWindow,
    dt_h: f64,
    boundary: UpsBoundary,
) -> UPSVars {
    let n = window.len;
    let e: Vec<Var> = (0..=n)
        .map(|i| model.add_var(format!("e_ups_{}", window.first + i), params.e_min_kwh(), params.e_max_kwh()))
        .collect();
    if let Some(v) = boundary.start_kwh {
        model.fix(e[0], v);
    }
    if let Some((i, v)) = boundary.end {
        model.fix(e[i], v);
    }
    let mut vars = UPSVars {
        window,
        e,
        p_ch: Vec::with_capacity(n),
        p_disch: Vec::with_capacity(n),
        z_ch: Vec::with_capacity(n),
        z_disch: Vec::with_capacity(n),
        p_net: Vec::with_capacity(n),
    };
    for i in 0..n {
        let s = window.first + i;
        let pch = model.add_var(format!("p_ch_{s}"), 0.0, params.p_ch_max_kw);
        let pds = model.add_var(format!("p_dis_{s}"), 0.0, params.p_disch_max_kw);
        let zc = model.add_binary(format!("z_ch_{s}"));
        let zd = model.add_binary(format!("z_dis_{s}"));
        model.add_eq(
            format!("soc_{s}"),
            LinExpr::term(vars.e[i + 1], 1.0)
                .with(vars.e[i], -1.0)
                .with(pch, -params.eta_ch * dt_h)
                .with(pds, dt_h / params.eta_disch),
            0.0,
        );
        model.add_ge(format!("ch_min_{s}"), LinExpr::term(pch, 1.0).with(zc, -params.p_ch_min_kw), 0.0);
        model.add_le(format!("ch_max_{s}"), LinExpr::term(pch, 1.0).with(zc, -params.p_ch_max_kw), 0.0);
        model.add_ge(format!("dis_min_{s}"), LinExpr::term(pds, 1.0).with(zd, -params.p_disch_min_kw), 0.0);
        model.add_le(format!("dis_max_{s}"), LinExpr::term(pds, 1.0).with(zd, -params.p_disch_max_kw), 0.0);
        model.add_le(format!("ups_excl_{s}"), LinExpr::term(zc, 1.0).with(zd, 1.0), 1.0);
        vars.p_net.push(LinExpr::term(pch, 1.0).with(pds, -1.0));
        vars.p_ch.push(pch);
        vars.p_disch.push(pds);
        vars.z_ch.push(zc);
        vars.z_disch.push(zd);
    }
    vars
}

/// One explicit step of the SoC recursion.
pub fn soc_step(params: &UpsParams, e_kwh: f64, p_ch_kw: f64, p_disch_kw: f64, dt_h: f64) -> f64 {
    e_kwh + params.eta_ch * p_ch_kw * dt_h - p_disch_kw / params.eta_disch * dt_h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpsMode {
    Idle,
    Charging,
    Discharging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsTrajectory {
    pub e_kwh: Vec<f64>,
    pub p_ch_kw: Vec<f64>,
    pub p_disch_kw: Vec<f64>,
    pub mode: Vec<UpsMode>,
}

/// Powers below this are treated as exact zeros.
const POWER_EPS: f64 = 1e-6;

pub fn extract_ups_solution(sol: &Solution, vars: &UPSVars, params: &UpsParams) -> Result<UpsTrajectory> {
    sol.require_values()?;
    let clean = |x: f64| if x.abs() < POWER_EPS { 0.0 } else { x };
    let mut t = UpsTrajectory {
        e_kwh: vars.e.iter().map(|&v| sol.value(v)).collect(),
        p_ch_kw: vars.p_ch.iter().map(|&v| clean(sol.value(v))).collect(),
        p_disch_kw: vars.p_disch.iter().map(|&v| clean(sol.value(v))).collect(),
        mode: Vec::with_capacity(vars.p_ch.len()),
    };
    for i in 0..vars.p_ch.len() {
        let (zc, zd) = (sol.value(vars.z_ch[i]) > 0.5, sol.value(vars.z_disch[i]) > 0.5);
        let (pc, pd) = (t.p_ch_kw[i], t.p_disch_kw[i]);
        let tol = 1e-4;
        let consistent = match (zc, zd) {
            (true, true) => false,
            (true, false) => pc >= params.p_ch_min_kw - tol && pd == 0.0,
            (false, true) => pd >= params.p_disch_min_kw - tol && pc == 0.0,
            (false, false) => pc == 0.0 && pd == 0.0,
        };
        if !consistent {
            return Err(Error::Solver(format!(
                "UPS slot {}: binaries ({zc}, {zd}) disagree with powers ({pc}, {pd})",
                vars.window.first + i
            )));
        }
        t.mode.push(match (zc, zd) {
            (true, _) => UpsMode::Charging,
            (_, true) => UpsMode::Discharging,
            _ => UpsMode::Idle,
        });
    }
    Ok(t)
}
