#![allow(dead_code)]

use std::sync::OnceLock;

use dcflex::config::{FacilityConfig, ThermalNode};
use dcflex::milp::HighsBackend;
use dcflex::scenario::{run_scenario1, run_scenario2, ScheduleSolution};
use dcflex::workload::{build_workload_profile, WorkloadProfile, WorkloadTables};

pub const ENERGY_TOL_KWH: f64 = 1e-4;
pub const POWER_TOL_KW: f64 = 1e-6;
pub const TEMP_TOL_C: f64 = 1e-6;

pub fn cfg() -> FacilityConfig {
    FacilityConfig::reference()
}

pub fn profile() -> WorkloadProfile {
    let t = WorkloadTables::bundled();
    build_workload_profile(&t.ratios, &t.deferral, &cfg().time).unwrap()
}

pub fn base() -> &'static ScheduleSolution {
    static S: OnceLock<ScheduleSolution> = OnceLock::new();
    S.get_or_init(|| run_scenario1(&cfg(), &profile()).unwrap())
}

pub fn optimised() -> &'static ScheduleSolution {
    static S: OnceLock<ScheduleSolution> = OnceLock::new();
    S.get_or_init(|| run_scenario2(&cfg(), &profile(), &HighsBackend).unwrap())
}

/// Physical and bookkeeping invariants every solved schedule must satisfy.
/// Returns a description of each violation.
pub fn schedule_violations(s: &ScheduleSolution, cfg: &FacilityConfig) -> Vec<String> {
    let mut out = static_violations(s, cfg);
    let residual = s.replay_residual_c(cfg);
    if residual > TEMP_TOL_C {
        out.push(format!("replay residual {residual} °C"));
    }
    out
}

/// Everything in [`schedule_violations`] except the transition check.
pub fn static_violations(s: &ScheduleSolution, cfg: &FacilityConfig) -> Vec<String> {
    let mut out = Vec::new();
    let dt = s.slot_duration_hours;
    let n = s.len();
    let ups = &cfg.ups;
    let cp = &cfg.cooling;

    if s.e_ups_kwh.len() != n + 1 || s.e_tes_kwh.len() != n + 1 || s.temps.len() != n + 1 {
        out.push("state vectors are not boundary-indexed".into());
        return out;
    }
    let mut ups_flow = 0.0;
    let mut tes_flow = 0.0;
    for i in 0..n {
        let d_ups = ups.eta_ch * s.p_ups_ch_kw[i] * dt - s.p_ups_disch_kw[i] / ups.eta_disch * dt;
        ups_flow += d_ups;
        if (s.e_ups_kwh[i + 1] - s.e_ups_kwh[i] - d_ups).abs() > ENERGY_TOL_KWH {
            out.push(format!("ups balance broken at {i}"));
        }
        let d_tes = cp.eta_tes_ch * s.q_chil_tes_kw[i] * dt - s.q_tes_crac_kw[i] / cp.eta_tes_dis * dt;
        tes_flow += d_tes;
        if (s.e_tes_kwh[i + 1] - s.e_tes_kwh[i] - d_tes).abs() > ENERGY_TOL_KWH {
            out.push(format!("tes balance broken at {i}"));
        }
        if s.p_ups_ch_kw[i] > POWER_TOL_KW && s.p_ups_disch_kw[i] > POWER_TOL_KW {
            out.push(format!("ups charges and discharges at {i}"));
        }
        if s.q_chil_tes_kw[i] > POWER_TOL_KW && s.q_tes_crac_kw[i] > POWER_TOL_KW {
            out.push(format!("tes charges and discharges at {i}"));
        }
        let chiller = s.p_chil_crac_kw[i] + s.p_chil_tes_kw[i];
        if chiller > cp.p_chiller_max_kw + POWER_TOL_KW {
            out.push(format!("chiller {chiller} kW over cap at {i}"));
        }
        if s.p_grid_it_kw[i] < -POWER_TOL_KW {
            out.push(format!("negative grid draw for IT at {i}"));
        }
    }
    if (s.e_ups_kwh[n] - s.e_ups_kwh[0] - ups_flow).abs() > ENERGY_TOL_KWH {
        out.push("ups does not telescope".into());
    }
    if (s.e_tes_kwh[n] - s.e_tes_kwh[0] - tes_flow).abs() > ENERGY_TOL_KWH {
        out.push("tes does not telescope".into());
    }
    for (i, &e) in s.e_ups_kwh.iter().enumerate() {
        if e < ups.e_min_kwh() - ENERGY_TOL_KWH || e > ups.e_max_kwh() + ENERGY_TOL_KWH {
            out.push(format!("ups state {e} out of range at {i}"));
        }
    }
    for (i, &e) in s.e_tes_kwh.iter().enumerate() {
        if e < -ENERGY_TOL_KWH || e > cp.e_tes_max_kwh + ENERGY_TOL_KWH {
            out.push(format!("tes state {e} out of range at {i}"));
        }
    }
    for (i, t) in s.temps.iter().enumerate() {
        for node in ThermalNode::ALL {
            let mut r = cfg.thermal.bounds_c.get(node);
            if node == ThermalNode::ColdAisle {
                r.max_c = s.ca_max_c;
            }
            if !r.contains(t.get(node), TEMP_TOL_C) {
                out.push(format!("{} = {} out of bounds at {i}", node.label(), t.get(node)));
            }
        }
    }
    out
}

/// Work executed in the window, CPU-hours.
pub fn window_cpu_hours(s: &ScheduleSolution) -> f64 {
    s.it.u_total.iter().sum::<f64>() * s.slot_duration_hours
}
