//! Workload tables, demand profiles and the IT scheduling block of the model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ItParams, SlotWindow, TimeGrid};
use crate::error::{Error, Result};
use crate::milp::{LinExpr, ModelInstance, PiecewiseCurve, Solution, Var};

pub const WORKLOAD_RATIOS_CSV: &str = include_str!("../data/workload_ratios.csv");
pub const DEFERRAL_DISTRIBUTION_CSV: &str = include_str!("../data/deferral_distribution.csv");
pub const WORKLOAD_RATIOS_FILE: &str = "workload_ratios.csv";
pub const DEFERRAL_DISTRIBUTION_FILE: &str = "deferral_distribution.csv";

/// Deferral tolerance of each tranche column, hours.
pub const TRANCHE_DELAY_HOURS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

const DEFERRAL_SUM_TOL_PCT: f64 = 0.5;

/// One hour of the flexible/inflexible utilisation table, percent of CPU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyRatioRow {
    pub hour: usize,
    pub flexible_pct: f64,
    pub inflexible_pct: f64,
}

/// One hour of the deferral distribution, percent of that hour's flexible work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeferralRow {
    pub hour: usize,
    pub defer_30min_pct: f64,
    pub defer_60min_pct: f64,
    pub defer_2h_pct: f64,
    pub defer_3h_pct: f64,
}

impl DeferralRow {
    pub fn pcts(&self) -> [f64; 4] {
        [
            self.defer_30min_pct,
            self.defer_60min_pct,
            self.defer_2h_pct,
            self.defer_3h_pct,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadTables {
    pub ratios: Vec<HourlyRatioRow>,
    pub deferral: Vec<DeferralRow>,
}

impl WorkloadTables {
    pub fn bundled() -> Self {
        Self {
            ratios: parse_rows(WORKLOAD_RATIOS_CSV, WORKLOAD_RATIOS_FILE).expect("bundled table"),
            deferral: parse_rows(DEFERRAL_DISTRIBUTION_CSV, DEFERRAL_DISTRIBUTION_FILE)
                .expect("bundled table"),
        }
    }

    /// Reads both tables from a directory using their standard file names.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            ratios: load_rows(&dir.join(WORKLOAD_RATIOS_FILE))?,
            deferral: load_rows(&dir.join(DEFERRAL_DISTRIBUTION_FILE))?,
        })
    }
}

fn parse_rows<T: for<'de> Deserialize<'de>>(text: &str, table: &str) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::table(table, e.to_string()))
}

fn load_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rows(&text, &path.display().to_string())
}

pub fn load_workload_ratios(path: impl AsRef<Path>) -> Result<Vec<HourlyRatioRow>> {
    load_rows(path.as_ref())
}

pub fn load_deferral_distribution(path: impl AsRef<Path>) -> Result<Vec<DeferralRow>> {
    load_rows(path.as_ref())
}

/// Per-slot utilisation demands and tranche split over the extended horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    pub slot_duration_hours: f64,
    pub main_slots: usize,
    /// Inflexible utilisation, every slot of the extended horizon.
    pub u_inflex: Vec<f64>,
    /// Newly arriving flexible utilisation; zero on extension slots.
    pub u_flex_base: Vec<f64>,
    /// `alpha[t][k]`, main slots only.
    pub tranche_fractions: Vec<Vec<f64>>,
    /// Deferral tolerance per tranche, slots.
    pub tranche_delays: Vec<usize>,
}

impl WorkloadProfile {
    pub fn total_slots(&self) -> usize {
        self.u_inflex.len()
    }

    pub fn u_total(&self, t: usize) -> f64 {
        self.u_inflex[t] + self.u_flex_base[t]
    }

    /// Flexible CPU-hours arriving in slot `t`.
    pub fn job_demand(&self, t: usize) -> f64 {
        self.u_flex_base[t] * self.slot_duration_hours
    }

    pub fn tranche_demand(&self, t: usize, k: usize) -> f64 {
        self.job_demand(t) * self.tranche_fractions[t][k]
    }

    pub fn max_delay(&self) -> usize {
        self.tranche_delays.iter().copied().max().unwrap_or(0)
    }

    pub fn total_flexible_cpu_hours(&self) -> f64 {
        (0..self.main_slots).map(|t| self.job_demand(t)).sum()
    }

    pub fn total_inflexible_cpu_hours(&self) -> f64 {
        self.u_inflex.iter().sum::<f64>() * self.slot_duration_hours
    }

    /// One job per (origin slot, tranche) with a positive demand.
    pub fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        for t in 0..self.main_slots {
            for (k, &d) in self.tranche_delays.iter().enumerate() {
                let r = self.tranche_demand(t, k);
                if r > 0.0 {
                    jobs.push(Job {
                        origin: t,
                        tranche: k,
                        release: t,
                        deadline: t + d,
                        cpu_hours: r,
                    });
                }
            }
        }
        jobs
    }
}

pub fn build_workload_profile(
    ratios: &[HourlyRatioRow],
    deferral: &[DeferralRow],
    grid: &TimeGrid,
) -> Result<WorkloadProfile> {
    let ratios = by_hour(ratios, |r| r.hour, "workload ratios")?;
    let deferral = by_hour(deferral, |r| r.hour, "deferral distribution")?;
    for r in &ratios {
        for (name, v) in [("flexible_pct", r.flexible_pct), ("inflexible_pct", r.inflexible_pct)] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::table(
                    "workload ratios",
                    format!("hour {}: {name} = {v} is outside [0, 100]", r.hour),
                ));
            }
        }
    }
    let mut alpha_by_hour = Vec::with_capacity(24);
    for r in &deferral {
        let pcts = r.pcts();
        if pcts.iter().any(|p| *p < 0.0) {
            return Err(Error::table(
                "deferral distribution",
                format!("hour {}: negative percentage", r.hour),
            ));
        }
        let sum: f64 = pcts.iter().sum();
        if (sum - 100.0).abs() > DEFERRAL_SUM_TOL_PCT {
            return Err(Error::table(
                "deferral distribution",
                format!("hour {}: percentages sum to {sum}, expected 100", r.hour),
            ));
        }
        alpha_by_hour.push(pcts.map(|p| p / sum).to_vec());
    }

    let per_hour = grid.slots_per_hour();
    let tranche_delays: Vec<usize> = TRANCHE_DELAY_HOURS
        .iter()
        .map(|h| (h * per_hour as f64).round() as usize)
        .collect();
    if tranche_delays.iter().any(|&d| d > grid.extension_slots) {
        return Err(Error::invalid(
            "time.extension_slots",
            "extension horizon is shorter than the longest deferral tolerance",
        ));
    }
    let n = grid.total_slots();
    let mut u_inflex = Vec::with_capacity(n);
    let mut u_flex_base = Vec::with_capacity(n);
    for s in 0..n {
        let r = ratios[grid.hour_of_day(s)];
        u_inflex.push(r.inflexible_pct / 100.0);
        u_flex_base.push(if grid.is_main(s) { r.flexible_pct / 100.0 } else { 0.0 });
    }
    let tranche_fractions = (0..grid.main_slots)
        .map(|s| alpha_by_hour[grid.hour_of_day(s)].clone())
        .collect();
    Ok(WorkloadProfile {
        slot_duration_hours: grid.slot_duration_hours,
        main_slots: grid.main_slots,
        u_inflex,
        u_flex_base,
        tranche_fractions,
        tranche_delays,
    })
}

fn by_hour<T: Copy>(rows: &[T], hour: impl Fn(&T) -> usize, table: &str) -> Result<Vec<T>> {
    if rows.len() != 24 {
        return Err(Error::table(table, format!("{} rows, expected 24", rows.len())));
    }
    let mut out: Vec<Option<T>> = vec![None; 24];
    for r in rows {
        let h = hour(r);
        if h >= 24 || out[h].is_some() {
            return Err(Error::table(table, format!("hour {h} is out of range or repeated")));
        }
        out[h] = Some(*r);
    }
    Ok(out.into_iter().map(|r| r.expect("24 distinct hours")).collect())
}

/// Exact server power of the unshifted profile, every slot of the extended horizon.
pub fn base_it_power(profile: &WorkloadProfile, params: &ItParams) -> Result<Vec<f64>> {
    (0..profile.total_slots())
        .map(|t| {
            let u = profile.u_total(t);
            if u > params.u_max + 1e-12 {
                Err(Error::OutOfRange(format!(
                    "slot {t}: combined utilisation {u} exceeds u_max {}",
                    params.u_max
                )))
            } else {
                Ok(params.power_kw(u))
            }
        })
        .collect()
}

/// A block of flexible work that may run anywhere in `[release, deadline]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Job {
    /// Slot the work originally arrived in.
    pub origin: usize,
    pub tranche: usize,
    pub release: usize,
    pub deadline: usize,
    pub cpu_hours: f64,
}

/// Everything the IT block needs for a contiguous slot window.
#[derive(Debug, Clone, PartialEq)]
pub struct ItDemand {
    pub window: SlotWindow,
    pub slot_duration_hours: f64,
    pub jobs: Vec<Job>,
    /// Utilisation that must run in each window slot.
    pub u_fixed: Vec<f64>,
    /// Power subtracted from the optimised IT power per window slot.
    pub p_offset: Vec<f64>,
}

impl ItDemand {
    /// Demand of the full extended horizon under the original tranches.
    pub fn from_profile(profile: &WorkloadProfile, base_power: &[f64]) -> Self {
        let n = profile.total_slots();
        Self {
            window: SlotWindow::new(0, n),
            slot_duration_hours: profile.slot_duration_hours,
            jobs: profile.jobs(),
            u_fixed: profile.u_inflex.clone(),
            p_offset: (0..n)
                .map(|t| if t < profile.main_slots { 0.0 } else { base_power[t] })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JobVars {
    pub job: Job,
    pub alloc: Vec<(usize, Var)>,
}

/// Handles to the IT block of a model.
#[derive(Debug, Clone)]
pub struct ITScheduleVars {
    pub window: SlotWindow,
    pub jobs: Vec<JobVars>,
    pub u_fixed: Vec<f64>,
    pub u_total: Vec<Var>,
    /// Linearised physical server power per slot.
    pub p_it: Vec<Var>,
    /// Optimised IT power `p_it − offset` entering the grid balance.
    pub p_it_opt: Vec<LinExpr>,
}

pub fn add_it_scheduling(
    model: &mut ModelInstance,
    profile: &WorkloadProfile,
    params: &ItParams,
    grid: &TimeGrid,
    curve: &PiecewiseCurve,
) -> Result<ITScheduleVars> {
    assert!(
        profile.max_delay() <= grid.extension_slots,
        "deferral windows must fit inside the extension horizon"
    );
    let base = base_it_power(profile, params)?;
    add_it_jobs(model, &ItDemand::from_profile(profile, &base), params, curve)
}

/// Emits allocation, completion, capacity and power rows for arbitrary jobs.
pub fn add_it_jobs(
    model: &mut ModelInstance,
    demand: &ItDemand,
    params: &ItParams,
    curve: &PiecewiseCurve,
) -> Result<ITScheduleVars> {
    let w = demand.window;
    let dt_h = demand.slot_duration_hours;
    let mut running: Vec<LinExpr> = vec![LinExpr::new(); w.len];
    let mut jobs = Vec::with_capacity(demand.jobs.len());
    for (j, job) in demand.jobs.iter().enumerate() {
        let first = job.release.max(w.first);
        let last = job.deadline.min(w.end() - 1);
        if first > last {
            return Err(Error::Model(format!(
                "job {j} (origin {}, tranche {}) has no slot inside the window",
                job.origin, job.tranche
            )));
        }
        let mut done = LinExpr::new();
        let mut alloc = Vec::with_capacity(last - first + 1);
        for s in first..=last {
            let v = model.add_var(format!("u_{}_{}_{s}", job.origin, job.tranche), 0.0, params.u_max);
            done.add(v, dt_h);
            running[w.local(s)].add(v, 1.0);
            alloc.push((s, v));
        }
        model.add_eq(format!("job_{}_{}_{j}", job.origin, job.tranche), done, job.cpu_hours);
        jobs.push(JobVars { job: *job, alloc });
    }
    let mut u_total = Vec::with_capacity(w.len);
    let mut p_it = Vec::with_capacity(w.len);
    let mut p_it_opt = Vec::with_capacity(w.len);
    for (i, s) in w.slots().enumerate() {
        let u = model.add_var(format!("U_{s}"), 0.0, params.u_max);
        model.add_eq(
            format!("cpu_{s}"),
            LinExpr::term(u, 1.0).plus(&running[i], -1.0),
            demand.u_fixed[i],
        );
        let p = model.add_piecewise(format!("pit_{s}"), u, curve)?;
        u_total.push(u);
        p_it.push(p);
        p_it_opt.push(LinExpr::term(p, 1.0).plus(&LinExpr::constant(-demand.p_offset[i]), 1.0));
    }
    Ok(ITScheduleVars {
        window: w,
        jobs,
        u_fixed: demand.u_fixed.clone(),
        u_total,
        p_it,
        p_it_opt,
    })
}

/// One executed share of a job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub origin: usize,
    pub tranche: usize,
    /// Slot the job became available in the model it was solved in.
    pub release: usize,
    pub deadline: usize,
    pub slot: usize,
    pub u: f64,
}

impl Allocation {
    /// Slots between original arrival and execution.
    pub fn shift(&self) -> usize {
        self.slot - self.origin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItSolution {
    pub window: SlotWindow,
    pub allocations: Vec<Allocation>,
    pub u_fixed: Vec<f64>,
    pub u_total: Vec<f64>,
    /// Linearised server power per slot, kW.
    pub p_it_linear_kw: Vec<f64>,
    /// Exact power law at the same utilisation, kW.
    pub p_it_exact_kw: Vec<f64>,
    /// `shift_histogram[i][d]`: utilisation executed in window slot `i` that was shifted `d` slots.
    pub shift_histogram: Vec<Vec<f64>>,
}

impl ItSolution {
    pub fn executed_flexible_cpu_hours(&self, slot_duration_hours: f64) -> f64 {
        self.allocations.iter().map(|a| a.u).sum::<f64>() * slot_duration_hours
    }

    /// Flexible CPU-hours per shift distance over the whole window.
    pub fn shift_totals(&self, slot_duration_hours: f64) -> Vec<f64> {
        let width = self.shift_histogram.first().map_or(0, Vec::len);
        (0..width)
            .map(|d| self.shift_histogram.iter().map(|row| row[d]).sum::<f64>() * slot_duration_hours)
            .collect()
    }
}

/// Values below this are reported as zero allocations.
const ALLOC_EPS: f64 = 1e-9;

pub fn extract_it_solution(
    sol: &Solution,
    vars: &ITScheduleVars,
    params: &ItParams,
) -> Result<ItSolution> {
    sol.require_values()?;
    let w = vars.window;
    let max_shift = vars
        .jobs
        .iter()
        .map(|j| j.job.deadline.saturating_sub(j.job.origin))
        .max()
        .unwrap_or(0);
    let mut hist = vec![vec![0.0; max_shift + 1]; w.len];
    let mut allocations = Vec::new();
    for jv in &vars.jobs {
        for &(s, v) in &jv.alloc {
            let u = sol.value(v);
            if u > ALLOC_EPS {
                let a = Allocation {
                    origin: jv.job.origin,
                    tranche: jv.job.tranche,
                    release: jv.job.release,
                    deadline: jv.job.deadline,
                    slot: s,
                    u,
                };
                hist[w.local(s)][a.shift()] += u;
                allocations.push(a);
            }
        }
    }
    let u_total: Vec<f64> = vars.u_total.iter().map(|&v| sol.value(v)).collect();
    Ok(ItSolution {
        window: w,
        allocations,
        u_fixed: vars.u_fixed.clone(),
        p_it_linear_kw: vars.p_it.iter().map(|&v| sol.value(v)).collect(),
        p_it_exact_kw: u_total.iter().map(|&u| params.power_kw(u)).collect(),
        u_total,
        shift_histogram: hist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FacilityConfig;
    use crate::milp::{linearize_power_curve, solve, HighsBackend, SolveOptions};
    use approx::assert_abs_diff_eq;

    fn profile() -> WorkloadProfile {
        let t = WorkloadTables::bundled();
        build_workload_profile(&t.ratios, &t.deferral, &FacilityConfig::reference().time).unwrap()
    }

    #[test]
    fn hourly_rows_expand_to_four_slots() {
        let p = profile();
        for s in 48..52 {
            assert_abs_diff_eq!(p.u_flex_base[s], 0.20);
            assert_abs_diff_eq!(p.u_inflex[s], 0.40);
            assert_eq!(p.tranche_fractions[s], vec![0.45, 0.25, 0.15, 0.15]);
        }
        assert_eq!(p.tranche_fractions[0], vec![0.25, 0.25, 0.20, 0.30]);
        assert_eq!(p.tranche_delays, vec![2, 4, 8, 12]);
    }

    #[test]
    fn extension_slots_have_no_new_arrivals() {
        let p = profile();
        assert_eq!(p.total_slots(), 108);
        assert!(p.u_flex_base[96..].iter().all(|&u| u == 0.0));
        assert_eq!(p.u_inflex[96], p.u_inflex[0]);
        assert_eq!(p.u_inflex[107], p.u_inflex[11]);
    }

    #[test]
    fn tranche_fractions_sum_to_one() {
        for row in profile().tranche_fractions {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bad_deferral_sum_is_rejected() {
        let mut t = WorkloadTables::bundled();
        t.deferral[5].defer_3h_pct += 2.0;
        let err = build_workload_profile(&t.ratios, &t.deferral, &FacilityConfig::reference().time)
            .unwrap_err();
        assert!(err.to_string().contains("hour 5"), "{err}");
    }

    #[test]
    fn ratio_above_hundred_is_rejected() {
        let mut t = WorkloadTables::bundled();
        t.ratios[3].flexible_pct = 120.0;
        assert!(build_workload_profile(&t.ratios, &t.deferral, &FacilityConfig::reference().time).is_err());
    }

    #[test]
    fn base_power_endpoints_and_midpoint() {
        let it = FacilityConfig::reference().it;
        let mut p = profile();
        p.u_inflex[0] = 0.0;
        p.u_flex_base[0] = 0.0;
        p.u_inflex[1] = 1.0;
        p.u_flex_base[1] = 0.0;
        p.u_inflex[2] = 0.25;
        p.u_flex_base[2] = 0.25;
        let b = base_it_power(&p, &it).unwrap();
        assert_abs_diff_eq!(b[0], 166.7, epsilon = 1e-12);
        assert_abs_diff_eq!(b[1], 1000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b[2], 166.7 + 833.3 * 0.5f64.powf(1.32), epsilon = 1e-9);
        assert_abs_diff_eq!(b[2], 500.5, epsilon = 0.2);
        p.u_inflex[3] = 0.9;
        p.u_flex_base[3] = 0.2;
        assert!(base_it_power(&p, &it).is_err());
    }

    #[test]
    fn single_job_fills_its_three_slot_window() {
        let cfg = FacilityConfig::reference();
        let curve = linearize_power_curve(&cfg.it, 16);
        let demand = ItDemand {
            window: SlotWindow::new(0, 6),
            slot_duration_hours: 0.25,
            jobs: vec![Job { origin: 1, tranche: 0, release: 1, deadline: 3, cpu_hours: 0.05 }],
            u_fixed: vec![0.0; 6],
            p_offset: vec![0.0; 6],
        };
        let mut m = ModelInstance::new();
        let v = add_it_jobs(&mut m, &demand, &cfg.it, &curve).unwrap();
        assert_eq!(v.jobs[0].alloc.iter().map(|a| a.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        // Steer the work to the last slot.
        m.add_objective(&LinExpr::term(v.p_it[1], 1.0).with(v.p_it[2], 1.0));
        let sol = solve(&m, &HighsBackend, &SolveOptions::default());
        let it = extract_it_solution(&sol, &v, &cfg.it).unwrap();
        let total: f64 = it.allocations.iter().map(|a| a.u * 0.25).sum();
        assert_abs_diff_eq!(total, 0.05, epsilon = 1e-9);
        assert_abs_diff_eq!(it.shift_histogram[3][2], 0.2, epsilon = 1e-7);
    }
}
