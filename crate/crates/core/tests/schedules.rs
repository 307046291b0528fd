mod common;

use common::{base, cfg, optimised, profile, schedule_violations, static_violations, window_cpu_hours};
use dcflex::cooling::euler_step;
use dcflex::milp::{HighsBackend, SolveStatus};
use dcflex::scenario::{check_flex_feasible, retranche, CostComparison};
use proptest::prelude::*;

#[test]
fn base_schedule_obeys_the_invariants() {
    let v = static_violations(base(), &cfg());
    assert!(v.is_empty(), "{v:#?}");
}

#[test]
fn base_states_are_stationary_under_their_slot() {
    let c = cfg();
    let s = base();
    let states = s.thermal_states();
    for (i, u) in s.thermal_inputs().iter().enumerate() {
        let next = euler_step(&states[i + 1], u, &c.thermal, &c.cooling, s.slot_duration_hours);
        assert!(next.temps.max_abs_diff(&states[i + 1].temps) < 1e-9, "slot {i}");
    }
}

#[test]
fn base_runs_all_work_at_arrival() {
    let s = base();
    assert!(s.it.allocations.iter().all(|a| a.shift() == 0));
    assert!(s.p_ups_ch_kw.iter().chain(&s.p_ups_disch_kw).all(|&p| p == 0.0));
    assert!(s.temps[1..].iter().all(|t| (t.ca - cfg().model.base_t_ca_c).abs() < 1e-12));
}

#[test]
fn optimised_schedule_obeys_the_invariants() {
    let s = optimised();
    assert!(matches!(s.status, SolveStatus::Optimal | SolveStatus::FeasibleWithinGap));
    let v = schedule_violations(s, &cfg());
    assert!(v.is_empty(), "{v:#?}");
}

#[test]
fn optimised_storage_is_cyclic() {
    let s = optimised();
    let n = s.len();
    let e0 = cfg().ups.e_start_end_kwh();
    assert!((s.e_ups_kwh[0] - e0).abs() < 1e-6);
    assert!((s.e_ups_kwh[n] - e0).abs() < 1e-6);
    assert!((s.e_tes_kwh[n] - s.e_tes_kwh[0]).abs() < 1e-6);
}

#[test]
fn optimised_schedule_executes_every_job() {
    let s = optimised();
    let p = profile();
    let dt = p.slot_duration_hours;
    assert!((s.it.executed_flexible_cpu_hours(dt) - p.total_flexible_cpu_hours()).abs() < 1e-6);
    for a in &s.it.allocations {
        assert!(a.slot >= a.release && a.slot <= a.deadline, "{a:?}");
    }
    for j in p.jobs() {
        let done: f64 = s
            .it
            .allocations
            .iter()
            .filter(|a| a.origin == j.origin && a.release == j.release && a.deadline == j.deadline)
            .map(|a| a.u * dt)
            .sum();
        assert!((done - j.cpu_hours).abs() < 1e-6, "{j:?}: {done}");
    }
}

#[test]
fn optimised_cost_does_not_exceed_base() {
    let c = CostComparison::new(base(), optimised());
    assert!(c.optimised_main_day_cost_gbp <= c.base_cost_gbp);
    let recomputed = optimised().cost_of(0..optimised().len());
    assert!((recomputed - optimised().total_cost_gbp).abs() < 1e-6);
}

#[test]
fn optimised_it_power_matches_its_curve() {
    let c = cfg();
    let curve = dcflex::milp::linearize_power_curve(&c.it, c.model.pwl_segments);
    let s = optimised();
    for i in 0..s.len() {
        let u = s.it.u_total[i];
        assert!(u <= c.it.u_max + 1e-9);
        assert!((s.it.p_it_linear_kw[i] - curve.eval(u)).abs() < 1e-4, "slot {i}");
        assert!((s.it.p_it_exact_kw[i] - c.it.power_kw(u)).abs() < 1e-9);
    }
}

#[test]
fn schedule_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.json");
    dcflex::io::write_schedule_json(&p, optimised()).unwrap();
    assert_eq!(&dcflex::io::read_schedule_json(&p).unwrap(), optimised());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn retranching_conserves_pending_work(t0 in 0usize..96) {
        let s = optimised();
        let r = retranche(s, t0, 12).unwrap();
        let dt = s.slot_duration_hours;
        let after: f64 = s.it.allocations.iter().filter(|a| a.slot >= t0).map(|a| a.u * dt).sum();
        prop_assert!((r.pending_cpu_hours(dt) - after).abs() < 1e-9);
        for j in &r.pending {
            prop_assert!(j.release >= t0);
            prop_assert!(j.deadline > j.release && j.deadline - j.release <= 12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn flexibility_schedules_obey_the_invariants(
        t0 in 0usize..84,
        dp in prop::sample::select(vec![-200.0, -100.0, -50.0, 50.0, 100.0, 200.0]),
        tau in 1usize..6,
    ) {
        let c = cfg();
        let baseline = optimised();
        let chk = check_flex_feasible(baseline, t0, dp, tau, &c, &profile(), &HighsBackend).unwrap();
        if let Some(s) = chk.schedule {
            let v = schedule_violations(&s, &c);
            prop_assert!(v.is_empty(), "{:#?}", v);
            // Work inside the window is neither lost nor invented.
            let j0 = t0 - baseline.window.first;
            let base_work: f64 = baseline.it.u_total[j0..j0 + s.len()].iter().sum::<f64>() * s.slot_duration_hours;
            prop_assert!((window_cpu_hours(&s) - base_work).abs() < 1e-6);
            let b = chk.breakdown.unwrap();
            prop_assert!(b.closure_error_kw() < 1e-6);
            for i in 0..tau {
                let d = b.d_total_kw[i];
                let tol = c.economic.p_tol_kw + 1e-6;
                if dp < 0.0 {
                    prop_assert!(d <= dp + tol, "slot {}: {}", i, d);
                } else {
                    prop_assert!(d >= dp - tol, "slot {}: {}", i, d);
                }
            }
            let bn = t0 + s.len() - baseline.window.first;
            prop_assert!((s.e_ups_kwh[s.len()] - baseline.e_ups_kwh[bn]).abs() < 1e-6);
            prop_assert!((s.e_tes_kwh[s.len()] - baseline.e_tes_kwh[bn]).abs() < 1e-6);
        }
    }
}

#[test]
fn known_feasible_cell_obeys_the_invariants() {
    let c = cfg();
    let chk = check_flex_feasible(optimised(), 24, -100.0, 4, &c, &profile(), &HighsBackend).unwrap();
    assert!(chk.feasible);
    let s = chk.schedule.unwrap();
    let v = schedule_violations(&s, &c);
    assert!(v.is_empty(), "{v:#?}");
    assert!(chk.breakdown.unwrap().closure_error_kw() < 1e-6);
}

#[test]
fn feasibility_is_not_nested_in_duration() {
    // Holding -100 kW from 02:00 works for 3 and 5 slots but not 4: the
    // recovery window moves with the duration and lands on a harder state.
    let c = cfg();
    let feasible = |tau| {
        check_flex_feasible(optimised(), 8, -100.0, tau, &c, &profile(), &HighsBackend)
            .unwrap()
            .feasible
    };
    assert!(feasible(3));
    assert!(!feasible(4));
    assert!(feasible(5));
}
