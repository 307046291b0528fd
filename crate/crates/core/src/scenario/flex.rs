use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{FacilityConfig, SlotWindow};
use crate::cooling::ThermalBoundary;
use crate::error::{Error, Result};
use crate::milp::{linearize_power_curve, SolveStatus, SolverBackend};
use crate::ups::UpsBoundary;
use crate::workload::{base_it_power, ItDemand, Job, WorkloadProfile};

use super::schedule::{
    build_window, extract_window, solve_window, GridLimit, ScheduleSolution, WindowSpec, SLACK_CUTOFF_KW,
};

/// Pending flexible work at a start slot, keyed by remaining deferral tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetranchedProfile {
    pub t0: usize,
    /// `tranche` is the remaining tolerance in slots; the job may run in `[release, deadline]`.
    pub pending: Vec<Job>,
    /// Work with no tolerance left, as (slot, utilisation).
    pub folded: Vec<(usize, f64)>,
    pub tranche_delays: Vec<usize>,
}

impl RetranchedProfile {
    pub fn pending_cpu_hours(&self, slot_duration_hours: f64) -> f64 {
        self.pending.iter().map(|j| j.cpu_hours).sum::<f64>()
            + self.folded.iter().map(|f| f.1).sum::<f64>() * slot_duration_hours
    }
}

/// Re-expresses every baseline allocation at or after `t0` as a job that can
/// still be delayed by what is left of its original tolerance.
pub fn retranche(baseline: &ScheduleSolution, t0: usize, max_tolerance: usize) -> Result<RetranchedProfile> {
    if t0 >= baseline.main_slots || !baseline.window.contains(t0) {
        return Err(Error::OutOfRange(format!("start slot {t0} is outside the main day of the baseline")));
    }
    let dt = baseline.slot_duration_hours;
    let mut pending = Vec::new();
    let mut folded = Vec::new();
    for a in baseline.it.allocations.iter().filter(|a| a.slot >= t0) {
        let rem = a.deadline.saturating_sub(a.slot).min(max_tolerance);
        if rem == 0 {
            folded.push((a.slot, a.u));
        } else {
            pending.push(Job {
                origin: a.origin,
                tranche: rem,
                release: a.slot,
                deadline: a.slot + rem,
                cpu_hours: a.u * dt,
            });
        }
    }
    Ok(RetranchedProfile {
        t0,
        pending,
        folded,
        tranche_delays: (1..=max_tolerance).collect(),
    })
}

/// Per-slot grid deviation from the baseline, split by asset, kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetBreakdown {
    pub slots: Vec<usize>,
    /// Change in IT power drawn (grid plus UPS-supplied).
    pub d_it_kw: Vec<f64>,
    /// Change in UPS charging minus discharging.
    pub d_ups_kw: Vec<f64>,
    pub d_crac_kw: Vec<f64>,
    pub d_tes_kw: Vec<f64>,
    pub d_total_kw: Vec<f64>,
}

impl AssetBreakdown {
    pub fn between(baseline: &ScheduleSolution, dev: &ScheduleSolution) -> Self {
        let mut b = AssetBreakdown {
            slots: Vec::new(),
            d_it_kw: Vec::new(),
            d_ups_kw: Vec::new(),
            d_crac_kw: Vec::new(),
            d_tes_kw: Vec::new(),
            d_total_kw: Vec::new(),
        };
        for (i, s) in dev.window.slots().enumerate() {
            let j = baseline.local(s);
            b.slots.push(s);
            b.d_it_kw.push(
                dev.p_grid_it_kw[i] + dev.p_ups_disch_kw[i] - baseline.p_grid_it_kw[j] - baseline.p_ups_disch_kw[j],
            );
            b.d_ups_kw.push(
                dev.p_ups_ch_kw[i] - dev.p_ups_disch_kw[i] - baseline.p_ups_ch_kw[j] + baseline.p_ups_disch_kw[j],
            );
            b.d_crac_kw.push(dev.p_chil_crac_kw[i] - baseline.p_chil_crac_kw[j]);
            b.d_tes_kw.push(dev.p_chil_tes_kw[i] - baseline.p_chil_tes_kw[j]);
            b.d_total_kw.push(dev.grid_kw(i) - baseline.grid_kw(j));
        }
        b
    }

    /// Largest |Σ assets − total| over the slots.
    pub fn closure_error_kw(&self) -> f64 {
        (0..self.slots.len())
            .map(|i| (self.d_it_kw[i] + self.d_ups_kw[i] + self.d_crac_kw[i] + self.d_tes_kw[i] - self.d_total_kw[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Whether some slot has asset contributions of both signs beyond `tol`.
    pub fn has_opposing_signs(&self, tol: f64) -> bool {
        (0..self.slots.len()).any(|i| {
            let parts = [self.d_it_kw[i], self.d_ups_kw[i], self.d_crac_kw[i], self.d_tes_kw[i]];
            parts.iter().any(|&x| x > tol) && parts.iter().any(|&x| x < -tol)
        })
    }
}

#[derive(Debug, Clone)]
pub struct FlexCheck {
    pub feasible: bool,
    pub status: SolveStatus,
    pub schedule: Option<ScheduleSolution>,
    pub breakdown: Option<AssetBreakdown>,
}

/// Whether the facility can hold a grid deviation of `delta_p_kw` for `tau`
/// slots from `t0` and then recover to the baseline state.
///
/// The window is `[t0, t0 + tau + recovery)`. Storage states are pinned to
/// the baseline at both ends; temperatures are pinned at `t0` when
/// `model.flex_pin_temperatures` is set.
#[allow(clippy::too_many_arguments)]
pub fn check_flex_feasible(
    baseline: &ScheduleSolution,
    t0: usize,
    delta_p_kw: f64,
    tau: usize,
    cfg: &FacilityConfig,
    profile: &WorkloadProfile,
    backend: &dyn SolverBackend,
) -> Result<FlexCheck> {
    let rec = cfg.model.recovery_slots;
    let end = t0 + tau + rec;
    if end > baseline.window.end() {
        return Err(Error::OutOfRange(format!(
            "window [{t0}, {end}) runs past the baseline horizon ending at {}",
            baseline.window.end()
        )));
    }
    let retr = retranche(baseline, t0, profile.max_delay())?;
    let window = SlotWindow::new(t0, end - t0);
    let flex_end = t0 + tau;

    let mut u_fixed: Vec<f64> = window.slots().map(|s| profile.u_inflex[s]).collect();
    for &(s, u) in &retr.folded {
        if window.contains(s) {
            u_fixed[window.local(s)] += u;
        }
    }
    let mut jobs = Vec::new();
    for job in &retr.pending {
        if job.release >= end {
            continue;
        }
        if job.release >= flex_end {
            // Recovery-window work runs where the baseline put it.
            u_fixed[window.local(job.release)] += job.cpu_hours / profile.slot_duration_hours;
        } else {
            jobs.push(*job);
        }
    }
    let base_power = base_it_power(profile, &cfg.it)?;
    let demand = ItDemand {
        window,
        slot_duration_hours: profile.slot_duration_hours,
        jobs,
        u_fixed,
        p_offset: window
            .slots()
            .map(|s| if s < profile.main_slots { 0.0 } else { base_power[s] })
            .collect(),
    };

    // Boundary-state indices; `end` may equal the horizon end.
    let b0 = t0 - baseline.window.first;
    let bn = end - baseline.window.first;
    let p_tol = cfg.economic.p_tol_kw;
    let grid_limits = (t0..flex_end)
        .map(|s| {
            let target = baseline.grid_kw(baseline.local(s)) + delta_p_kw;
            if delta_p_kw <= 0.0 {
                GridLimit { slot: s, lo_kw: None, hi_kw: Some(target + p_tol) }
            } else {
                GridLimit { slot: s, lo_kw: Some(target - p_tol), hi_kw: None }
            }
        })
        .collect();
    let spec = WindowSpec {
        demand,
        ups: UpsBoundary {
            start_kwh: Some(baseline.e_ups_kwh[b0]),
            end: Some((window.len, baseline.e_ups_kwh[bn])),
        },
        thermal: ThermalBoundary {
            start_temps: cfg.model.flex_pin_temperatures.then(|| baseline.temps[b0]),
            start_tes_kwh: Some(baseline.e_tes_kwh[b0]),
            tes_cyclic_at: None,
            end_tes_kwh: Some(baseline.e_tes_kwh[bn]),
        },
        ca_max_c: Some(cfg.model.flex_t_ca_max_c),
        grid_limits,
        elastic: true,
    };
    let curve = linearize_power_curve(&cfg.it, cfg.model.pwl_segments);
    let wm = build_window(cfg, &curve, &spec)?;
    let sol = solve_window(&wm, backend, cfg.model.flex_time_limit_s, cfg.model.flex_mip_rel_gap);
    match sol.status {
        SolveStatus::Failed(ref msg) => Err(Error::Solver(msg.clone())),
        SolveStatus::Infeasible => Ok(FlexCheck { feasible: false, status: sol.status.clone(), schedule: None, breakdown: None }),
        _ if !sol.has_values() || sol.objective.is_none_or(|o| o > SLACK_CUTOFF_KW) => {
            Ok(FlexCheck { feasible: false, status: sol.status.clone(), schedule: None, breakdown: None })
        }
        _ => {
            let schedule = extract_window(&sol, &wm, cfg, "flex")?;
            let breakdown = AssetBreakdown::between(baseline, &schedule);
            Ok(FlexCheck {
                feasible: true,
                status: sol.status.clone(),
                schedule: Some(schedule),
                breakdown: Some(breakdown),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Resolved,
    Zero,
    HorizonCapped,
    Failed,
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Resolved => "resolved",
            CellStatus::Zero => "zero",
            CellStatus::HorizonCapped => "horizon-capped",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchStrategy {
    Binary,
    /// Probe every duration upward from one until the first infeasible one.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexibilityCell {
    pub t0: usize,
    pub delta_p_kw: f64,
    pub tau_slots: usize,
    pub tau_hours: f64,
    pub status: CellStatus,
    pub probes: usize,
    pub anomalies: Vec<String>,
    /// Deviation schedule of the longest feasible duration, when it is positive.
    pub breakdown: Option<AssetBreakdown>,
    pub error: Option<String>,
}

struct Search<'a> {
    baseline: &'a ScheduleSolution,
    t0: usize,
    dp: f64,
    cfg: &'a FacilityConfig,
    profile: &'a WorkloadProfile,
    backend: &'a dyn SolverBackend,
    probes: usize,
    anomalies: Vec<String>,
    best: Option<(usize, AssetBreakdown)>,
}

impl Search<'_> {
    fn probe(&mut self, tau: usize) -> Result<bool> {
        if tau == 0 {
            return Ok(true);
        }
        self.probes += 1;
        let started = std::time::Instant::now();
        let c = check_flex_feasible(self.baseline, self.t0, self.dp, tau, self.cfg, self.profile, self.backend)?;
        log::debug!(
            "t0 {} dp {} tau {tau}: {} in {:.2?}",
            self.t0,
            self.dp,
            c.status.label(),
            started.elapsed()
        );
        if c.status == SolveStatus::TimeLimit {
            self.anomalies.push(format!(
                "duration {tau}: time limit, treated as {}",
                if c.feasible { "feasible" } else { "infeasible" }
            ));
        }
        if c.feasible && self.best.as_ref().is_none_or(|b| b.0 < tau) {
            self.best = Some((tau, c.breakdown.expect("feasible check has a breakdown")));
        }
        Ok(c.feasible)
    }

    fn binary(&mut self, cap: usize) -> Result<usize> {
        if self.probe(cap)? {
            return Ok(cap);
        }
        let (mut lo, mut hi) = (0, cap);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.probe(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // The search assumes nested feasible sets; look one step past the
        // infeasible neighbour and fall back to scanning if that fails.
        if lo + 2 < cap && self.probe(lo + 2)? {
            self.anomalies.push(format!(
                "non-monotone in duration: {} infeasible but {} feasible",
                lo + 1,
                lo + 2
            ));
            let mut tau = lo + 2;
            while tau < cap && self.probe(tau + 1)? {
                tau += 1;
            }
            return Ok(tau);
        }
        Ok(lo)
    }

    fn linear(&mut self, cap: usize) -> Result<usize> {
        let mut tau = 0;
        while tau < cap && self.probe(tau + 1)? {
            tau += 1;
        }
        Ok(tau)
    }
}

/// Longest feasible duration for one (start slot, deviation) cell.
#[allow(clippy::too_many_arguments)]
pub fn max_duration(
    baseline: &ScheduleSolution,
    t0: usize,
    delta_p_kw: f64,
    cfg: &FacilityConfig,
    profile: &WorkloadProfile,
    backend: &dyn SolverBackend,
    strategy: SearchStrategy,
) -> FlexibilityCell {
    let dt = cfg.time.slot_duration_hours;
    let cap = baseline
        .window
        .end()
        .saturating_sub(cfg.model.recovery_slots)
        .saturating_sub(t0);
    let mut s = Search {
        baseline,
        t0,
        dp: delta_p_kw,
        cfg,
        profile,
        backend,
        probes: 0,
        anomalies: Vec::new(),
        best: None,
    };
    let found = match strategy {
        SearchStrategy::Binary => s.binary(cap),
        SearchStrategy::Linear => s.linear(cap),
    };
    let (tau, status, error) = match found {
        Ok(tau) if tau == cap => (tau, CellStatus::HorizonCapped, None),
        Ok(0) => (0, CellStatus::Zero, None),
        Ok(tau) => (tau, CellStatus::Resolved, None),
        Err(e) => (0, CellStatus::Failed, Some(e.to_string())),
    };
    let breakdown = s.best.filter(|b| b.0 == tau).map(|b| b.1);
    FlexibilityCell {
        t0,
        delta_p_kw,
        tau_slots: tau,
        tau_hours: tau as f64 * dt,
        status,
        probes: s.probes,
        anomalies: s.anomalies,
        breakdown,
        error,
    }
}

/// Resolves every (t0, ΔP) pair, `parallelism` cells at a time, sorted by t0 then ΔP.
#[allow(clippy::too_many_arguments)]
pub fn flex_sweep(
    baseline: &ScheduleSolution,
    t0_grid: &[usize],
    delta_p_grid: &[f64],
    cfg: &FacilityConfig,
    profile: &WorkloadProfile,
    backend: &dyn SolverBackend,
    parallelism: usize,
    strategy: SearchStrategy,
) -> Result<Vec<FlexibilityCell>> {
    if t0_grid.is_empty() || delta_p_grid.is_empty() {
        return Err(Error::invalid("sweep grid", "start-slot and deviation grids must be non-empty"));
    }
    let pairs: Vec<(usize, f64)> = t0_grid
        .iter()
        .flat_map(|&t| delta_p_grid.iter().map(move |&d| (t, d)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Model(format!("thread pool: {e}")))?;
    let mut cells: Vec<FlexibilityCell> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(t0, dp)| max_duration(baseline, t0, dp, cfg, profile, backend, strategy))
            .collect()
    });
    cells.sort_by(|a, b| a.t0.cmp(&b.t0).then(a.delta_p_kw.total_cmp(&b.delta_p_kw)));
    Ok(cells)
}
