mod common;

use dcflex::config::FacilityConfig;
use dcflex::cooling::{euler_step, steady_state_init, ThermalInput, ThermalState};
use dcflex::milp::{linearize_power_curve, PiecewiseCurve};
use dcflex::ups::soc_step;
use dcflex::workload::{build_workload_profile, DeferralRow, HourlyRatioRow};
use proptest::prelude::*;

fn random_tables() -> impl Strategy<Value = (Vec<HourlyRatioRow>, Vec<DeferralRow>)> {
    let ratio = (0.0..=60.0f64, 0.0..=40.0f64);
    let split = (1u32..100, 1u32..100, 1u32..100, 1u32..100);
    (prop::collection::vec(ratio, 24), prop::collection::vec(split, 24)).prop_map(|(r, d)| {
        let ratios = r
            .into_iter()
            .enumerate()
            .map(|(h, (f, i))| HourlyRatioRow { hour: h, flexible_pct: f, inflexible_pct: i })
            .collect();
        let deferral = d
            .into_iter()
            .enumerate()
            .map(|(h, (a, b, c, e))| {
                let s = f64::from(a + b + c + e);
                DeferralRow {
                    hour: h,
                    defer_30min_pct: 100.0 * f64::from(a) / s,
                    defer_60min_pct: 100.0 * f64::from(b) / s,
                    defer_2h_pct: 100.0 * f64::from(c) / s,
                    defer_3h_pct: 100.0 * f64::from(e) / s,
                }
            })
            .collect();
        (ratios, deferral)
    })
}

proptest! {
    #[test]
    fn pwl_chords_are_convex_and_bound_the_curve(n in 1usize..40, exponent in 1.05f64..2.5) {
        let mut it = FacilityConfig::reference().it;
        it.exponent = exponent;
        let c = linearize_power_curve(&it, n);
        prop_assert_eq!(c.segments(), n);
        let slopes: Vec<f64> = c.breakpoints.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        for w in slopes.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
        // The certified error is a true bound, checked off the sampling grid.
        for k in 0..997 {
            let u = (k as f64 + 0.5) / 997.0;
            let gap = c.eval(u) - it.power_kw(u);
            prop_assert!(gap >= -1e-9);
            prop_assert!(gap <= c.max_abs_error * 1.001 + 1e-9);
        }
    }

    #[test]
    fn pwl_error_shrinks_with_segments(n in 1usize..30) {
        let it = FacilityConfig::reference().it;
        let a = linearize_power_curve(&it, n).max_abs_error;
        let b = linearize_power_curve(&it, 2 * n).max_abs_error;
        prop_assert!(b < a);
    }

    #[test]
    fn sampled_curve_passes_through_its_breakpoints(xs in prop::collection::btree_set(0u32..1000, 2..12)) {
        let xs: Vec<f64> = xs.into_iter().map(|x| f64::from(x) / 1000.0).collect();
        let c = PiecewiseCurve::sample(|x| x * x, &xs);
        for &(x, y) in &c.breakpoints {
            prop_assert!((c.eval(x) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn ups_energy_telescopes(steps in prop::collection::vec((0.0..270.0f64, 0.0..300.0f64, any::<bool>()), 1..120)) {
        let ups = FacilityConfig::reference().ups;
        let dt = 0.25;
        let mut e = ups.e_start_end_kwh();
        let mut flow = 0.0;
        for &(ch, dis, charging) in &steps {
            let (ch, dis) = if charging { (ch, 0.0) } else { (0.0, dis) };
            e = soc_step(&ups, e, ch, dis, dt);
            flow += ups.eta_ch * ch * dt - dis / ups.eta_disch * dt;
        }
        prop_assert!((e - ups.e_start_end_kwh() - flow).abs() < 1e-9);
    }

    #[test]
    fn flexible_work_is_conserved_by_the_job_split((ratios, deferral) in random_tables()) {
        let grid = FacilityConfig::reference().time;
        let p = build_workload_profile(&ratios, &deferral, &grid).unwrap();
        let jobs: f64 = p.jobs().iter().map(|j| j.cpu_hours).sum();
        prop_assert!((jobs - p.total_flexible_cpu_hours()).abs() < 1e-9);
        for t in 0..p.tranche_fractions.len() {
            let s: f64 = p.tranche_fractions[t].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        for j in p.jobs() {
            prop_assert!(j.deadline >= j.release);
            prop_assert!(j.deadline < p.total_slots());
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point(u in 0.0f64..0.9) {
        let c = FacilityConfig::reference();
        let s = steady_state_init(u, &c.it, &c.thermal, &c.cooling, c.model.base_t_ca_c).unwrap();
        let state = ThermalState { temps: s.temps, e_tes_kwh: 0.0 };
        let input = ThermalInput { p_it_kw: s.p_it_kw, q_chil_crac_kw: s.q_cool_kw, q_chil_tes_kw: 0.0, q_tes_crac_kw: 0.0 };
        let next = euler_step(&state, &input, &c.thermal, &c.cooling, 0.25);
        prop_assert!(next.temps.max_abs_diff(&s.temps) < 1e-9);
        prop_assert!((s.p_chiller_kw * c.cooling.cop_chiller - s.q_cool_kw).abs() < 1e-9);
    }

    #[test]
    fn config_round_trips_through_toml(
        od in 0.0f64..200.0,
        segs in 1usize..64,
        price in prop::collection::vec(1.0f64..500.0, 24),
    ) {
        let mut c = FacilityConfig::reference();
        c.economic.p_grid_od_kw = od;
        c.model.pwl_segments = segs;
        c.economic.prices_gbp_per_mwh = price;
        let back = FacilityConfig::from_toml_str(&c.to_toml_string()).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn reference_config_is_the_bundled_file() {
    assert_eq!(FacilityConfig::reference(), common::cfg());
    FacilityConfig::reference().validate().unwrap();
}
