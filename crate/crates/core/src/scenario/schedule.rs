use serde::{Deserialize, Serialize};

use crate::config::{FacilityConfig, SlotWindow};
use crate::cooling::{
    add_cooling_window, extract_cooling_solution, one_step_residuals, CoolingSolution, Temps, ThermalBoundary,
    ThermalInput, ThermalState, ThermalVars,
};
use crate::error::{Error, Result};
use crate::milp::{solve, LinExpr, ModelInstance, PiecewiseCurve, Solution, SolveOptions, SolveStatus, SolverBackend, Var};
use crate::ups::{add_ups_window, extract_ups_solution, UPSVars, UpsBoundary};
use crate::workload::{add_it_jobs, extract_it_solution, ITScheduleVars, ItDemand, ItSolution};

/// Solved trajectories of one scenario run over a slot window.
///
/// Per-slot vectors have one entry per window slot. State vectors (`e_*`,
/// `temps`) are boundary-indexed with one extra entry: index `i` is the state
/// at the start of window slot `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSolution {
    pub scenario: String,
    pub window: SlotWindow,
    pub slot_duration_hours: f64,
    pub main_slots: usize,
    pub price_gbp_per_mwh: Vec<f64>,
    pub p_grid_it_kw: Vec<f64>,
    pub p_grid_od_kw: Vec<f64>,
    pub p_ups_ch_kw: Vec<f64>,
    pub p_ups_disch_kw: Vec<f64>,
    pub p_chil_crac_kw: Vec<f64>,
    pub p_chil_tes_kw: Vec<f64>,
    pub q_chil_crac_kw: Vec<f64>,
    pub q_chil_tes_kw: Vec<f64>,
    pub q_tes_crac_kw: Vec<f64>,
    pub e_ups_kwh: Vec<f64>,
    pub e_tes_kwh: Vec<f64>,
    pub temps: Vec<Temps>,
    pub it: ItSolution,
    /// Cost over the whole window, GBP.
    pub total_cost_gbp: f64,
    /// Cost over the window slots that belong to the main day, GBP.
    pub main_day_cost_gbp: f64,
    pub status: SolveStatus,
    pub objective_gbp: Option<f64>,
    pub mip_gap: Option<f64>,
    pub solve_seconds: f64,
    pub ca_max_c: f64,
}

impl ScheduleSolution {
    pub fn len(&self) -> usize {
        self.window.len
    }

    pub fn is_empty(&self) -> bool {
        self.window.len == 0
    }

    /// Total grid draw of window slot `i`, kW.
    pub fn grid_kw(&self, i: usize) -> f64 {
        self.p_grid_it_kw[i] + self.p_grid_od_kw[i] + self.p_ups_ch_kw[i] + self.p_chil_crac_kw[i] + self.p_chil_tes_kw[i]
    }

    pub fn grid_series_kw(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.grid_kw(i)).collect()
    }

    pub fn slot_cost_gbp(&self, i: usize) -> f64 {
        self.grid_kw(i) * self.slot_duration_hours * self.price_gbp_per_mwh[i] / 1000.0
    }

    /// Recomputes the cost of the given window slots from the trajectories.
    pub fn cost_of(&self, slots: impl Iterator<Item = usize>) -> f64 {
        slots.map(|i| self.slot_cost_gbp(i)).sum()
    }

    /// Window-local index of an absolute slot.
    pub fn local(&self, slot: usize) -> usize {
        self.window.local(slot)
    }

    pub fn thermal_inputs(&self) -> Vec<ThermalInput> {
        (0..self.len())
            .map(|i| ThermalInput {
                p_it_kw: self.it.p_it_linear_kw[i],
                q_chil_crac_kw: self.q_chil_crac_kw[i],
                q_chil_tes_kw: self.q_chil_tes_kw[i],
                q_tes_crac_kw: self.q_tes_crac_kw[i],
            })
            .collect()
    }

    pub fn thermal_states(&self) -> Vec<ThermalState> {
        self.temps
            .iter()
            .zip(&self.e_tes_kwh)
            .map(|(t, e)| ThermalState { temps: *t, e_tes_kwh: *e })
            .collect()
    }

    /// Largest one-step disagreement between the stored temperatures and the recursions.
    pub fn replay_residual_c(&self, cfg: &FacilityConfig) -> f64 {
        one_step_residuals(
            &self.thermal_inputs(),
            &self.thermal_states(),
            &cfg.thermal,
            &cfg.cooling,
            self.slot_duration_hours,
        )
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Total IT energy under the linearised and the exact power law, kWh.
    pub fn it_energy_kwh(&self) -> (f64, f64) {
        let dt = self.slot_duration_hours;
        (
            self.it.p_it_linear_kw.iter().sum::<f64>() * dt,
            self.it.p_it_exact_kw.iter().sum::<f64>() * dt,
        )
    }
}

/// Upper/lower limit on total grid draw (overhead included) in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLimit {
    pub slot: usize,
    pub lo_kw: Option<f64>,
    pub hi_kw: Option<f64>,
}

/// Everything that distinguishes one window model from another.
#[derive(Debug, Clone)]
pub struct WindowSpec {
    pub demand: ItDemand,
    pub ups: UpsBoundary,
    pub thermal: ThermalBoundary,
    pub ca_max_c: Option<f64>,
    pub grid_limits: Vec<GridLimit>,
    /// Give each grid limit a slack and minimise total slack instead of cost.
    pub elastic: bool,
}

pub(crate) struct WindowModel {
    pub model: ModelInstance,
    pub window: SlotWindow,
    pub it: ITScheduleVars,
    pub ups: UPSVars,
    pub thermal: ThermalVars,
    pub g_it: Vec<Var>,
    pub slack: Vec<Var>,
    pub prices: Vec<f64>,
    pub ca_max_c: f64,
}

/// Assembles IT, UPS and cooling blocks, the grid coupling and the cost objective.
/// Total slack, kW, below which an elastic window counts as meeting its limits.
pub(crate) const SLACK_CUTOFF_KW: f64 = 1e-6;

impl WindowModel {
    pub fn elastic(&self) -> bool {
        !self.slack.is_empty()
    }
}

pub(crate) fn build_window(cfg: &FacilityConfig, curve: &PiecewiseCurve, spec: &WindowSpec) -> Result<WindowModel> {
    let w = spec.demand.window;
    let dt = cfg.time.slot_duration_hours;
    let all_prices = cfg.slot_prices();
    if w.end() > all_prices.len() {
        return Err(Error::OutOfRange(format!("window ends at slot {} past the horizon", w.end())));
    }
    let prices = all_prices[w.slots()].to_vec();
    let od = cfg.economic.p_grid_od_kw;
    let mut m = ModelInstance::new();
    let it = add_it_jobs(&mut m, &spec.demand, &cfg.it, curve)?;
    let ups = add_ups_window(&mut m, &cfg.ups, w, dt, spec.ups);
    let thermal = add_cooling_window(&mut m, &cfg.thermal, &cfg.cooling, &it.p_it, w, dt, spec.ca_max_c, spec.thermal)?;

    let mut g_it = Vec::with_capacity(w.len);
    let mut objective = LinExpr::new();
    for (i, s) in w.slots().enumerate() {
        let g = m.add_var(format!("g_it_{s}"), 0.0, f64::INFINITY);
        // Optimised IT power is met by the grid and the UPS discharge.
        m.add_eq(
            format!("it_balance_{s}"),
            it.p_it_opt[i].clone().with(g, -1.0).with(ups.p_disch[i], -1.0),
            0.0,
        );
        let draw = LinExpr::term(g, 1.0)
            .with(ups.p_ch[i], 1.0)
            .plus(&thermal.p_chil_crac[i], 1.0)
            .plus(&thermal.p_chil_tes[i], 1.0);
        let w_price = prices[i] * dt / 1000.0;
        objective.add_expr(&draw, w_price);
        objective.add_constant(od * w_price);
        g_it.push(g);
    }
    let mut slack = Vec::new();
    let mut slack_total = LinExpr::new();
    for lim in &spec.grid_limits {
        let i = w.local(lim.slot);
        let mut draw = LinExpr::term(g_it[i], 1.0)
            .with(ups.p_ch[i], 1.0)
            .plus(&thermal.p_chil_crac[i], 1.0)
            .plus(&thermal.p_chil_tes[i], 1.0);
        if spec.elastic {
            let sl = m.add_var(format!("slack_{}", lim.slot), 0.0, f64::INFINITY);
            let sign = if lim.hi_kw.is_some() { -1.0 } else { 1.0 };
            draw = draw.with(sl, sign);
            slack_total = slack_total.with(sl, 1.0);
            slack.push(sl);
        }
        if let Some(hi) = lim.hi_kw {
            m.add_le(format!("flex_hi_{}", lim.slot), draw.clone(), hi - od);
        }
        if let Some(lo) = lim.lo_kw {
            m.add_ge(format!("flex_lo_{}", lim.slot), draw, lo - od);
        }
    }
    m.add_objective(if spec.elastic { &slack_total } else { &objective });
    let ca_max_c = spec.ca_max_c.unwrap_or(cfg.thermal.bounds_c.ca.max_c);
    Ok(WindowModel { model: m, window: w, it, ups, thermal, g_it, slack, prices, ca_max_c })
}

pub(crate) fn solve_window(
    wm: &WindowModel,
    backend: &dyn SolverBackend,
    time_limit_s: f64,
    mip_rel_gap: f64,
) -> Solution {
    let opts = SolveOptions {
        time_limit_s,
        mip_rel_gap,
        objective_cutoff: wm.elastic().then_some(SLACK_CUTOFF_KW),
        ..SolveOptions::default()
    };
    solve(&wm.model, backend, &opts)
}

pub(crate) fn extract_window(
    sol: &Solution,
    wm: &WindowModel,
    cfg: &FacilityConfig,
    scenario: &str,
) -> Result<ScheduleSolution> {
    sol.require_values()?;
    let it = extract_it_solution(sol, &wm.it, &cfg.it)?;
    let ups = extract_ups_solution(sol, &wm.ups, &cfg.ups)?;
    let CoolingSolution { temps, e_tes_kwh, q_chil_crac_kw, q_chil_tes_kw, q_tes_crac_kw, .. } =
        extract_cooling_solution(sol, &wm.thermal)?;
    let cop = cfg.cooling.cop_chiller;
    let n = wm.window.len;
    let mut s = ScheduleSolution {
        scenario: scenario.to_owned(),
        window: wm.window,
        slot_duration_hours: cfg.time.slot_duration_hours,
        main_slots: cfg.time.main_slots,
        price_gbp_per_mwh: wm.prices.clone(),
        p_grid_it_kw: wm.g_it.iter().map(|&v| clean(sol.value(v))).collect(),
        p_grid_od_kw: vec![cfg.economic.p_grid_od_kw; n],
        p_ups_ch_kw: ups.p_ch_kw,
        p_ups_disch_kw: ups.p_disch_kw,
        p_chil_crac_kw: q_chil_crac_kw.iter().map(|q| q / cop).collect(),
        p_chil_tes_kw: q_chil_tes_kw.iter().map(|q| q / cop).collect(),
        q_chil_crac_kw,
        q_chil_tes_kw,
        q_tes_crac_kw,
        e_ups_kwh: ups.e_kwh,
        e_tes_kwh,
        temps,
        it,
        total_cost_gbp: 0.0,
        main_day_cost_gbp: 0.0,
        status: sol.status.clone(),
        objective_gbp: if wm.elastic() { None } else { sol.objective },
        mip_gap: sol.mip_gap,
        solve_seconds: sol.elapsed.as_secs_f64(),
        ca_max_c: wm.ca_max_c,
    };
    fill_costs(&mut s);
    Ok(s)
}

pub(crate) fn fill_costs(s: &mut ScheduleSolution) {
    s.total_cost_gbp = s.cost_of(0..s.len());
    let main_end = s.main_slots.saturating_sub(s.window.first).min(s.len());
    s.main_day_cost_gbp = s.cost_of(0..main_end);
}

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-9 {
        0.0
    } else {
        x
    }
}
