//! Chiller, CRAC and TES block with the five-node explicit Euler air/rack model.
//!
//! Temperatures and TES energy live on slot boundaries: index `i` is the state
//! at the start of window slot `i`, index `i + 1` the state after it.

use serde::{Deserialize, Serialize};

use crate::config::{CoolingParams, ItParams, SlotWindow, TempRange, ThermalNode, ThermalParams, TimeGrid};
use crate::error::{Error, Result};
use crate::milp::{LinExpr, ModelInstance, Solution, Var};

/// Seconds per hour; turns kW·h into kJ against the kJ/K capacities.
const SECONDS_PER_HOUR: f64 = 3600.0;

/// The five node temperatures, °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Temps {
    pub ain: f64,
    pub it: f64,
    pub r: f64,
    pub ca: f64,
    pub ha: f64,
}

impl Temps {
    pub fn uniform(t: f64) -> Self {
        Self { ain: t, it: t, r: t, ca: t, ha: t }
    }

    pub fn get(&self, node: ThermalNode) -> f64 {
        match node {
            ThermalNode::Ain => self.ain,
            ThermalNode::It => self.it,
            ThermalNode::Rack => self.r,
            ThermalNode::ColdAisle => self.ca,
            ThermalNode::HotAisle => self.ha,
        }
    }

    pub fn max_abs_diff(&self, other: &Temps) -> f64 {
        ThermalNode::ALL
            .iter()
            .map(|&n| (self.get(n) - other.get(n)).abs())
            .fold(0.0, f64::max)
    }
}

/// Thermal powers applied during one slot, kW.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThermalInput {
    pub p_it_kw: f64,
    pub q_chil_crac_kw: f64,
    pub q_chil_tes_kw: f64,
    pub q_tes_crac_kw: f64,
}

impl ThermalInput {
    pub fn q_cool_kw(&self) -> f64 {
        self.q_chil_crac_kw + self.q_tes_crac_kw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub temps: Temps,
    pub e_tes_kwh: f64,
}

/// One explicit Euler step of the air/rack network and the TES tank.
pub fn euler_step(
    x: &ThermalState,
    u: &ThermalInput,
    tp: &ThermalParams,
    cp: &CoolingParams,
    dt_h: f64,
) -> ThermalState {
    let f = SECONDS_PER_HOUR * dt_h;
    let mc = tp.air_flow_kw_per_k();
    let mkc = tp.rack_flow_kw_per_k();
    let t = &x.temps;
    ThermalState {
        temps: Temps {
            ain: t.ha - u.q_cool_kw() / mc,
            it: t.it + f / tp.c_it_kj_per_k * (u.p_it_kw - tp.g_cv_kw_per_k * (t.it - t.r)),
            r: t.r + f / tp.c_r_kj_per_k * (mkc * (t.ca - t.r) + tp.g_cv_kw_per_k * (t.it - t.r)),
            ca: t.ca
                + f / tp.c_ca_kj_per_k * (mkc * (t.ain - t.ca) - tp.g_cd_kw_per_k * (t.ca - tp.t_out_c)),
            ha: t.ha + f / tp.c_ha_kj_per_k * mkc * (t.r - t.ha),
        },
        e_tes_kwh: x.e_tes_kwh + cp.eta_tes_ch * u.q_chil_tes_kw * dt_h
            - u.q_tes_crac_kw / cp.eta_tes_dis * dt_h,
    }
}

/// Boundary conditions of a cooling block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalBoundary {
    pub start_temps: Option<Temps>,
    pub start_tes_kwh: Option<f64>,
    /// Bind `E_TES` at this boundary index to its start value.
    pub tes_cyclic_at: Option<usize>,
    pub end_tes_kwh: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ThermalVars {
    pub window: SlotWindow,
    pub t_ain: Vec<Var>,
    pub t_it: Vec<Var>,
    pub t_r: Vec<Var>,
    pub t_ca: Vec<Var>,
    pub t_ha: Vec<Var>,
    pub q_chil_crac: Vec<Var>,
    pub q_chil_tes: Vec<Var>,
    pub q_tes_crac: Vec<Var>,
    pub e_tes: Vec<Var>,
    pub z_tes_ch: Vec<Var>,
    pub z_tes_dis: Vec<Var>,
    pub q_cool: Vec<LinExpr>,
    pub p_chil_crac: Vec<LinExpr>,
    pub p_chil_tes: Vec<LinExpr>,
}

impl ThermalVars {
    pub fn node(&self, node: ThermalNode) -> &[Var] {
        match node {
            ThermalNode::Ain => &self.t_ain,
            ThermalNode::It => &self.t_it,
            ThermalNode::Rack => &self.t_r,
            ThermalNode::ColdAisle => &self.t_ca,
            ThermalNode::HotAisle => &self.t_ha,
        }
    }
}

/// Full-horizon cooling block starting from `start` with the cyclic TES condition.
pub fn add_cooling(
    model: &mut ModelInstance,
    tp: &ThermalParams,
    cp: &CoolingParams,
    p_it: &[Var],
    grid: &TimeGrid,
    ca_max_override: Option<f64>,
    start: Temps,
) -> Result<ThermalVars> {
    let cyclic = if cp.cyclic_at_main_end {
        grid.main_slots
    } else {
        grid.total_slots()
    };
    add_cooling_window(
        model,
        tp,
        cp,
        p_it,
        grid.window(),
        grid.slot_duration_hours,
        ca_max_override,
        ThermalBoundary {
            start_temps: Some(start),
            start_tes_kwh: None,
            tes_cyclic_at: Some(cyclic),
            end_tes_kwh: None,
        },
    )
}

#[allow(clippy::too_many_arguments)]
pub fn add_cooling_window(
    model: &mut ModelInstance,
    tp: &ThermalParams,
    cp: &CoolingParams,
    p_it: &[Var],
    window: SlotWindow,
    dt_h: f64,
    ca_max_override: Option<f64>,
    boundary: ThermalBoundary,
) -> Result<ThermalVars> {
    let n = window.len;
    if p_it.len() != n {
        return Err(Error::Model(format!("{} IT power terms for {n} slots", p_it.len())));
    }
    let b = tp.bounds_c;
    let ca = TempRange::new(b.ca.min_c, ca_max_override.unwrap_or(b.ca.max_c));
    let mut temps = |label: &str, r: TempRange| -> Vec<Var> {
        (0..=n)
            .map(|i| model.add_var(format!("T_{label}_{}", window.first + i), r.min_c, r.max_c))
            .collect()
    };
    let t_ain = temps("ain", b.ain);
    let t_it = temps("it", b.it);
    let t_r = temps("r", b.r);
    let t_ca = temps("ca", ca);
    let t_ha = temps("ha", b.ha);
    let e_tes: Vec<Var> = (0..=n)
        .map(|i| model.add_var(format!("e_tes_{}", window.first + i), 0.0, cp.e_tes_max_kwh))
        .collect();

    if let Some(s) = boundary.start_temps {
        for (vars, v) in [(&t_ain, s.ain), (&t_it, s.it), (&t_r, s.r), (&t_ca, s.ca), (&t_ha, s.ha)] {
            model.fix(vars[0], v);
        }
    }
    if let Some(e) = boundary.start_tes_kwh {
        model.fix(e_tes[0], e);
    }
    if let Some(i) = boundary.tes_cyclic_at {
        model.add_eq("tes_cyclic", LinExpr::term(e_tes[i], 1.0).with(e_tes[0], -1.0), 0.0);
    }
    if let Some(e) = boundary.end_tes_kwh {
        model.fix(e_tes[n], e);
    }

    let f = SECONDS_PER_HOUR * dt_h;
    let mc = tp.air_flow_kw_per_k();
    let mkc = tp.rack_flow_kw_per_k();
    let (gcv, gcd) = (tp.g_cv_kw_per_k, tp.g_cd_kw_per_k);
    let cop = cp.cop_chiller;
    let mut v = ThermalVars {
        window,
        t_ain,
        t_it,
        t_r,
        t_ca,
        t_ha,
        q_chil_crac: Vec::with_capacity(n),
        q_chil_tes: Vec::with_capacity(n),
        q_tes_crac: Vec::with_capacity(n),
        e_tes,
        z_tes_ch: Vec::with_capacity(n),
        z_tes_dis: Vec::with_capacity(n),
        q_cool: Vec::with_capacity(n),
        p_chil_crac: Vec::with_capacity(n),
        p_chil_tes: Vec::with_capacity(n),
    };
    for i in 0..n {
        let s = window.first + i;
        let qcc = model.add_var(format!("q_cc_{s}"), 0.0, cop * cp.p_chiller_max_kw);
        let qct = model.add_var(format!("q_ct_{s}"), 0.0, cp.q_tes_ch_max_kw);
        let qtc = model.add_var(format!("q_tc_{s}"), 0.0, cp.q_tes_dis_max_kw);
        let zc = model.add_binary(format!("z_tes_ch_{s}"));
        let zd = model.add_binary(format!("z_tes_dis_{s}"));
        let q_cool = LinExpr::term(qcc, 1.0).with(qtc, 1.0);
        let p_cc = LinExpr::term(qcc, 1.0 / cop);
        let p_ct = LinExpr::term(qct, 1.0 / cop);

        model.add_le(format!("chiller_cap_{s}"), p_cc.clone().plus(&p_ct, 1.0), cp.p_chiller_max_kw);
        model.add_le(format!("tes_ch_{s}"), LinExpr::term(qct, 1.0).with(zc, -cp.q_tes_ch_max_kw), 0.0);
        model.add_le(format!("tes_dis_{s}"), LinExpr::term(qtc, 1.0).with(zd, -cp.q_tes_dis_max_kw), 0.0);
        model.add_le(format!("tes_excl_{s}"), LinExpr::term(zc, 1.0).with(zd, 1.0), 1.0);
        model.add_eq(
            format!("tes_soc_{s}"),
            LinExpr::term(v.e_tes[i + 1], 1.0)
                .with(v.e_tes[i], -1.0)
                .with(qct, -cp.eta_tes_ch * dt_h)
                .with(qtc, dt_h / cp.eta_tes_dis),
            0.0,
        );

        model.add_eq(
            format!("ain_{s}"),
            LinExpr::term(v.t_ain[i + 1], 1.0)
                .with(v.t_ha[i], -1.0)
                .plus(&q_cool, 1.0 / mc),
            0.0,
        );
        let c = f / tp.c_it_kj_per_k;
        model.add_eq(
            format!("it_{s}"),
            LinExpr::term(v.t_it[i + 1], 1.0)
                .with(v.t_it[i], -(1.0 - c * gcv))
                .with(v.t_r[i], -c * gcv)
                .with(p_it[i], -c),
            0.0,
        );
        let c = f / tp.c_r_kj_per_k;
        model.add_eq(
            format!("r_{s}"),
            LinExpr::term(v.t_r[i + 1], 1.0)
                .with(v.t_r[i], -(1.0 - c * (mkc + gcv)))
                .with(v.t_ca[i], -c * mkc)
                .with(v.t_it[i], -c * gcv),
            0.0,
        );
        let c = f / tp.c_ca_kj_per_k;
        model.add_eq(
            format!("ca_{s}"),
            LinExpr::term(v.t_ca[i + 1], 1.0)
                .with(v.t_ca[i], -(1.0 - c * (mkc + gcd)))
                .with(v.t_ain[i], -c * mkc),
            c * gcd * tp.t_out_c,
        );
        let c = f / tp.c_ha_kj_per_k;
        model.add_eq(
            format!("ha_{s}"),
            LinExpr::term(v.t_ha[i + 1], 1.0)
                .with(v.t_ha[i], -(1.0 - c * mkc))
                .with(v.t_r[i], -c * mkc),
            0.0,
        );
        // Never cool the return air below the cold-aisle floor.
        model.add_le(
            format!("overcool_{s}"),
            q_cool.clone().with(v.t_ha[i], -mc),
            -b.ca.min_c * mc,
        );

        v.q_chil_crac.push(qcc);
        v.q_chil_tes.push(qct);
        v.q_tes_crac.push(qtc);
        v.z_tes_ch.push(zc);
        v.z_tes_dis.push(zd);
        v.q_cool.push(q_cool);
        v.p_chil_crac.push(p_cc);
        v.p_chil_tes.push(p_ct);
    }
    Ok(v)
}

/// Extracted cooling trajectories, boundary-indexed states and per-slot flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingSolution {
    pub temps: Vec<Temps>,
    pub e_tes_kwh: Vec<f64>,
    pub q_chil_crac_kw: Vec<f64>,
    pub q_chil_tes_kw: Vec<f64>,
    pub q_tes_crac_kw: Vec<f64>,
    pub tes_charging: Vec<bool>,
    pub tes_discharging: Vec<bool>,
}

pub fn extract_cooling_solution(sol: &Solution, v: &ThermalVars) -> Result<CoolingSolution> {
    sol.require_values()?;
    let val = |xs: &[Var]| xs.iter().map(|&x| sol.value(x)).collect::<Vec<f64>>();
    let clean = |xs: &[Var]| {
        xs.iter()
            .map(|&x| sol.value(x))
            .map(|q| if q.abs() < 1e-6 { 0.0 } else { q })
            .collect::<Vec<f64>>()
    };
    let temps = (0..v.t_ain.len())
        .map(|i| Temps {
            ain: sol.value(v.t_ain[i]),
            it: sol.value(v.t_it[i]),
            r: sol.value(v.t_r[i]),
            ca: sol.value(v.t_ca[i]),
            ha: sol.value(v.t_ha[i]),
        })
        .collect();
    Ok(CoolingSolution {
        temps,
        e_tes_kwh: val(&v.e_tes),
        q_chil_crac_kw: clean(&v.q_chil_crac),
        q_chil_tes_kw: clean(&v.q_chil_tes),
        q_tes_crac_kw: clean(&v.q_tes_crac),
        tes_charging: v.z_tes_ch.iter().map(|&z| sol.value(z) > 0.5).collect(),
        tes_discharging: v.z_tes_dis.iter().map(|&z| sol.value(z) > 0.5).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    /// Boundary index of the offending state.
    pub slot: usize,
    pub node: ThermalNode,
    pub value_c: f64,
    /// Distance outside the band, °C.
    pub magnitude_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub trajectory: Vec<ThermalState>,
    pub violations: Vec<BoundViolation>,
    /// TES states outside `[0, e_tes_max]` as (boundary index, kWh).
    pub tes_violations: Vec<(usize, f64)>,
}

/// Free-running replay of the Euler recursions from `initial`.
pub fn replay_thermal(
    schedule: &[ThermalInput],
    initial: ThermalState,
    tp: &ThermalParams,
    cp: &CoolingParams,
    dt_h: f64,
    ca_max_override: Option<f64>,
    tol: f64,
) -> ReplayReport {
    let mut traj = Vec::with_capacity(schedule.len() + 1);
    traj.push(initial);
    for u in schedule {
        let next = euler_step(traj.last().expect("non-empty"), u, tp, cp, dt_h);
        traj.push(next);
    }
    let mut violations = Vec::new();
    let mut tes_violations = Vec::new();
    for (i, x) in traj.iter().enumerate() {
        for node in ThermalNode::ALL {
            let mut r = tp.bounds_c.get(node);
            if node == ThermalNode::ColdAisle {
                r.max_c = ca_max_override.unwrap_or(r.max_c);
            }
            let t = x.temps.get(node);
            if !r.contains(t, tol) {
                let magnitude_c = if t < r.min_c { r.min_c - t } else { t - r.max_c };
                violations.push(BoundViolation { slot: i, node, value_c: t, magnitude_c });
            }
        }
        if x.e_tes_kwh < -tol || x.e_tes_kwh > cp.e_tes_max_kwh + tol {
            tes_violations.push((i, x.e_tes_kwh));
        }
    }
    ReplayReport { trajectory: traj, violations, tes_violations }
}

/// Largest deviation of `states[i + 1]` from one Euler step out of `states[i]`.
///
/// The recursions amplify rounding by up to ~60x per slot, so a free run
/// drifts from the solver's trajectory; this teacher-forced form checks
/// that every solved transition obeys the same arithmetic.
pub fn one_step_residuals(
    schedule: &[ThermalInput],
    states: &[ThermalState],
    tp: &ThermalParams,
    cp: &CoolingParams,
    dt_h: f64,
) -> Vec<f64> {
    schedule
        .iter()
        .enumerate()
        .map(|(i, u)| euler_step(&states[i], u, tp, cp, dt_h).temps.max_abs_diff(&states[i + 1].temps))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub temps: Temps,
    pub p_it_kw: f64,
    pub q_out_kw: f64,
    /// Cooling that holds the network stationary, kW thermal.
    pub q_cool_kw: f64,
    pub p_chiller_kw: f64,
}

/// Fixed point of the Euler network with the cold aisle held at `t_ca_target`.
///
/// Stationarity of the cold-aisle and rack equations only closes when the
/// delivered cooling equals `(P_IT + Q_out) / kappa`; that is the figure
/// used for the chiller load.
pub fn steady_state_init(
    u_total: f64,
    it: &ItParams,
    tp: &ThermalParams,
    cp: &CoolingParams,
    t_ca_target: f64,
) -> Result<SteadyState> {
    if !(0.0..=1.0).contains(&u_total) {
        return Err(Error::OutOfRange(format!("utilisation {u_total} outside [0, 1]")));
    }
    steady_state_at_power(it.power_kw(u_total), tp, cp, t_ca_target)
}

pub fn steady_state_at_power(
    p_it_kw: f64,
    tp: &ThermalParams,
    cp: &CoolingParams,
    t_ca_target: f64,
) -> Result<SteadyState> {
    let mkc = tp.rack_flow_kw_per_k();
    let q_out = tp.ambient_gain_kw(t_ca_target);
    let r = t_ca_target + p_it_kw / mkc;
    let q_cool = (p_it_kw + q_out) / tp.kappa;
    let temps = Temps {
        ain: r - q_cool / tp.air_flow_kw_per_k(),
        it: r + p_it_kw / tp.g_cv_kw_per_k,
        r,
        ca: t_ca_target,
        ha: r,
    };
    for node in ThermalNode::ALL {
        let range = tp.bounds_c.get(node);
        let t = temps.get(node);
        if !range.contains(t, 1e-9) {
            return Err(Error::Infeasible(format!(
                "steady state at T_CA = {t_ca_target} puts {} at {t:.3} °C outside [{}, {}]",
                node.label(),
                range.min_c,
                range.max_c
            )));
        }
    }
    Ok(SteadyState {
        temps,
        p_it_kw,
        q_out_kw: q_out,
        q_cool_kw: q_cool,
        p_chiller_kw: q_cool / cp.cop_chiller,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FacilityConfig;
    use approx::assert_abs_diff_eq;

    fn params() -> (ThermalParams, CoolingParams, ItParams) {
        let c = FacilityConfig::reference();
        (c.thermal, c.cooling, c.it)
    }

    #[test]
    fn ambient_gain_at_design_point() {
        let (tp, _, _) = params();
        assert_abs_diff_eq!(tp.ambient_gain_kw(22.5), -2.242, epsilon = 1e-12);
    }

    #[test]
    fn tes_step_by_hand() {
        let (tp, cp, _) = params();
        let x = ThermalState { temps: Temps::uniform(22.0), e_tes_kwh: 500.0 };
        let u = ThermalInput { q_chil_tes_kw: 300.0, ..Default::default() };
        assert_abs_diff_eq!(euler_step(&x, &u, &tp, &cp, 0.25).e_tes_kwh, 567.5, epsilon = 1e-12);
    }

    #[test]
    fn supply_air_from_return_air_and_cooling() {
        let (tp, cp, _) = params();
        let x = ThermalState {
            temps: Temps { ha: 30.0, ..Temps::uniform(22.0) },
            e_tes_kwh: 0.0,
        };
        let u = ThermalInput { q_chil_crac_kw: 502.5, ..Default::default() };
        assert_abs_diff_eq!(euler_step(&x, &u, &tp, &cp, 0.25).temps.ain, 25.0, epsilon = 1e-12);
    }

    #[test]
    fn idle_network_at_ambient_is_stationary() {
        let (tp, cp, _) = params();
        let x = ThermalState { temps: Temps::uniform(tp.t_out_c), e_tes_kwh: 10.0 };
        // Hold the supply air at ambient too: q_cool = 0 with HA = T_out.
        let r = replay_thermal(&[ThermalInput::default(); 8], x, &tp, &cp, 0.25, None, 1e-9);
        for s in &r.trajectory {
            assert!(s.temps.max_abs_diff(&x.temps) < 1e-12);
        }
        assert!(r.violations.is_empty());
    }

    #[test]
    fn steady_state_is_a_fixed_point_of_the_recursions() {
        let (tp, cp, it) = params();
        for u in [0.0, 0.3, 0.68, 1.0] {
            let ss = steady_state_init(u, &it, &tp, &cp, 22.5).unwrap();
            assert_abs_diff_eq!(ss.temps.it - ss.temps.r, ss.p_it_kw / tp.g_cv_kw_per_k, epsilon = 1e-12);
            assert_eq!(ss.temps.ha, ss.temps.r);
            let x = ThermalState { temps: ss.temps, e_tes_kwh: 0.0 };
            let inp = ThermalInput { p_it_kw: ss.p_it_kw, q_chil_crac_kw: ss.q_cool_kw, ..Default::default() };
            let next = euler_step(&x, &inp, &tp, &cp, 0.25);
            assert!(next.temps.max_abs_diff(&ss.temps) < 1e-9, "u = {u}");
            assert_abs_diff_eq!(ss.q_cool_kw * tp.kappa, ss.p_it_kw + ss.q_out_kw, epsilon = 1e-9);
        }
    }

    #[test]
    fn uncooled_servers_overheat() {
        let (tp, cp, _) = params();
        let ss = steady_state_at_power(667.0, &tp, &cp, 22.5).unwrap();
        let x = ThermalState { temps: ss.temps, e_tes_kwh: 0.0 };
        let inp = ThermalInput { p_it_kw: 667.0, ..Default::default() };
        let r = replay_thermal(&vec![inp; 40], x, &tp, &cp, 0.25, None, 0.0);
        assert!(r.violations.iter().any(|v| v.node == ThermalNode::It && v.value_c > 60.0));
    }
}
