//! Base case, cost-optimal schedule and flexibility envelope.

mod flex;
mod schedule;

pub use flex::{
    check_flex_feasible, flex_sweep, max_duration, retranche, AssetBreakdown, CellStatus, FlexCheck, FlexibilityCell,
    RetranchedProfile, SearchStrategy,
};
pub use schedule::{GridLimit, ScheduleSolution, WindowSpec};

use serde::{Deserialize, Serialize};

use crate::config::{FacilityConfig, SlotWindow};
use crate::cooling::{steady_state_at_power, steady_state_init, ThermalBoundary};
use crate::error::{Error, Result};
use crate::milp::{linearize_power_curve, SolveStatus, SolverBackend};
use crate::ups::UpsBoundary;
use crate::workload::{base_it_power, Allocation, ItDemand, ItSolution, WorkloadProfile};

use schedule::{build_window, extract_window, fill_costs, solve_window};

/// Share of the average base draw attributed to auxiliary devices.
pub const OVERHEAD_SHARE: f64 = 0.07;

/// No-flexibility reference: all work at arrival, cold aisle held constant,
/// storage idle. Cooling is the per-slot stationary load of the air network.
pub fn run_scenario1(cfg: &FacilityConfig, profile: &WorkloadProfile) -> Result<ScheduleSolution> {
    let n = cfg.time.main_slots;
    let tp = &cfg.thermal;
    let cp = &cfg.cooling;
    let t_ca = cfg.model.base_t_ca_c;
    let base = base_it_power(profile, &cfg.it)?;
    let prices = cfg.slot_prices();
    let mc = tp.air_flow_kw_per_k();

    let mut temps = Vec::with_capacity(n + 1);
    let mut q_cc = Vec::with_capacity(n);
    for (t, &p) in base.iter().enumerate().take(n) {
        let ss = steady_state_at_power(p, tp, cp, t_ca)?;
        if ss.p_chiller_kw > cp.p_chiller_max_kw + 1e-9 {
            return Err(Error::Infeasible(format!(
                "slot {t}: stationary chiller load {:.1} kW exceeds {} kW",
                ss.p_chiller_kw, cp.p_chiller_max_kw
            )));
        }
        if ss.q_cool_kw > (ss.temps.ha - cfg.t_ca_min_c()) * mc + 1e-9 {
            return Err(Error::Infeasible(format!("slot {t}: stationary cooling overcools the cold aisle")));
        }
        if t == 0 {
            temps.push(ss.temps);
        }
        temps.push(ss.temps);
        q_cc.push(ss.q_cool_kw);
    }

    let mut allocations = Vec::new();
    let mut hist = vec![vec![0.0; profile.max_delay() + 1]; n];
    for job in profile.jobs() {
        let u = job.cpu_hours / profile.slot_duration_hours;
        hist[job.origin][0] += u;
        allocations.push(Allocation {
            origin: job.origin,
            tranche: job.tranche,
            release: job.release,
            deadline: job.deadline,
            slot: job.origin,
            u,
        });
    }
    let u_total: Vec<f64> = (0..n).map(|t| profile.u_total(t)).collect();
    let it = ItSolution {
        window: SlotWindow::new(0, n),
        allocations,
        u_fixed: profile.u_inflex[..n].to_vec(),
        u_total,
        p_it_linear_kw: base[..n].to_vec(),
        p_it_exact_kw: base[..n].to_vec(),
        shift_histogram: hist,
    };
    let e0 = cfg.ups.e_start_end_kwh();
    let mut s = ScheduleSolution {
        scenario: "base".into(),
        window: SlotWindow::new(0, n),
        slot_duration_hours: cfg.time.slot_duration_hours,
        main_slots: n,
        price_gbp_per_mwh: prices[..n].to_vec(),
        p_grid_it_kw: base[..n].to_vec(),
        p_grid_od_kw: vec![cfg.economic.p_grid_od_kw; n],
        p_ups_ch_kw: vec![0.0; n],
        p_ups_disch_kw: vec![0.0; n],
        p_chil_crac_kw: q_cc.iter().map(|q| q / cp.cop_chiller).collect(),
        p_chil_tes_kw: vec![0.0; n],
        q_chil_crac_kw: q_cc,
        q_chil_tes_kw: vec![0.0; n],
        q_tes_crac_kw: vec![0.0; n],
        e_ups_kwh: vec![e0; n + 1],
        e_tes_kwh: vec![0.0; n + 1],
        temps,
        it,
        total_cost_gbp: 0.0,
        main_day_cost_gbp: 0.0,
        status: SolveStatus::Optimal,
        objective_gbp: None,
        mip_gap: None,
        solve_seconds: 0.0,
        ca_max_c: t_ca,
    };
    fill_costs(&mut s);
    s.objective_gbp = Some(s.total_cost_gbp);
    Ok(s)
}

/// Cost-optimal integrated schedule over the extended horizon.
pub fn run_scenario2(
    cfg: &FacilityConfig,
    profile: &WorkloadProfile,
    backend: &dyn SolverBackend,
) -> Result<ScheduleSolution> {
    let base = base_it_power(profile, &cfg.it)?;
    let curve = linearize_power_curve(&cfg.it, cfg.model.pwl_segments);
    let start = steady_state_init(profile.u_total(0), &cfg.it, &cfg.thermal, &cfg.cooling, cfg.model.base_t_ca_c)?;
    let tes_cyclic_at = if cfg.cooling.cyclic_at_main_end {
        cfg.time.main_slots
    } else {
        cfg.time.total_slots()
    };
    let spec = WindowSpec {
        demand: ItDemand::from_profile(profile, &base),
        ups: UpsBoundary::cyclic(&cfg.ups, &cfg.time),
        thermal: ThermalBoundary {
            start_temps: Some(start.temps),
            start_tes_kwh: None,
            tes_cyclic_at: Some(tes_cyclic_at),
            end_tes_kwh: None,
        },
        ca_max_c: None,
        grid_limits: Vec::new(),
        elastic: false,
    };
    let wm = build_window(cfg, &curve, &spec)?;
    let sol = solve_window(&wm, backend, cfg.model.time_limit_s, cfg.model.mip_rel_gap);
    match &sol.status {
        SolveStatus::Infeasible => return Err(Error::Infeasible("integrated schedule".into())),
        SolveStatus::Failed(msg) => return Err(Error::Solver(msg.clone())),
        SolveStatus::TimeLimit if !sol.has_values() => {
            return Err(Error::Solver("time limit reached without an incumbent".into()))
        }
        _ => {}
    }
    extract_window(&sol, &wm, cfg, "optimised")
}

/// `0.07 ×` mean over the main day of IT grid draw plus chiller draw, kW.
pub fn compute_overhead_power(base: &ScheduleSolution) -> f64 {
    let n = base.main_slots.min(base.len());
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = (0..n).map(|i| base.p_grid_it_kw[i] + base.p_chil_crac_kw[i]).sum();
    OVERHEAD_SHARE * sum / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub base_cost_gbp: f64,
    pub optimised_total_cost_gbp: f64,
    pub optimised_main_day_cost_gbp: f64,
    /// Main-day saving of the optimised schedule against the base, percent.
    pub saving_pct: f64,
}

impl CostComparison {
    pub fn new(base: &ScheduleSolution, opt: &ScheduleSolution) -> Self {
        Self {
            base_cost_gbp: base.total_cost_gbp,
            optimised_total_cost_gbp: opt.total_cost_gbp,
            optimised_main_day_cost_gbp: opt.main_day_cost_gbp,
            saving_pct: 100.0 * (base.total_cost_gbp - opt.main_day_cost_gbp) / base.total_cost_gbp,
        }
    }
}
