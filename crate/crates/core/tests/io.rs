mod common;

use common::{base, cfg, optimised};
use dcflex::io::{self, plot, validate_csv, RunManifest};
use dcflex::milp::HighsBackend;
use dcflex::scenario::{flex_sweep, CellStatus, SearchStrategy};

#[test]
fn written_tables_match_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    io::write_schedule_csv(&d.join("s.csv"), optimised()).unwrap();
    assert_eq!(validate_csv(&d.join("s.csv"), "schedule").unwrap(), optimised().len());
    io::write_schedule_csv(&d.join("b.csv"), base()).unwrap();
    assert_eq!(validate_csv(&d.join("b.csv"), "schedule").unwrap(), base().len());
    io::write_shift_histogram_csv(&d.join("h.csv"), &optimised().it).unwrap();
    validate_csv(&d.join("h.csv"), "shift_histogram").unwrap();

    let cells = flex_sweep(
        optimised(),
        &[24],
        &[-100.0, 5000.0],
        &cfg(),
        &common::profile(),
        &HighsBackend,
        1,
        SearchStrategy::Binary,
    )
    .unwrap();
    assert_eq!(cells[1].status, CellStatus::Zero);
    io::write_heatmap_csv(&d.join("m.csv"), &cells).unwrap();
    assert_eq!(validate_csv(&d.join("m.csv"), "heatmap").unwrap(), 2);
    let b = cells[0].breakdown.as_ref().unwrap();
    io::write_breakdown_csv(&d.join("k.csv"), b).unwrap();
    validate_csv(&d.join("k.csv"), "breakdown").unwrap();

    let svg = plot::heatmap_svg(&std::fs::read_to_string(d.join("m.csv")).unwrap()).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn schema_rejects_a_wrong_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    std::fs::write(&p, "slot,oops\n0,1\n").unwrap();
    assert!(validate_csv(&p, "schedule").is_err());
    std::fs::write(&p, "t0_slot,delta_p_kw,tau_hours,status\n0,1,2,maybe\n").unwrap();
    assert!(validate_csv(&p, "heatmap").is_err());
}

#[test]
fn manifest_round_trips_and_hashes_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = RunManifest::new("optimise", &cfg(), "highs", 0.4);
    m.add_scenario("optimised", optimised());
    m.add_table("t.csv", b"abc");
    m.write(dir.path()).unwrap();
    let back = RunManifest::read(dir.path()).unwrap();
    assert_eq!(back, m);
    assert_eq!(
        m.table_sha256["t.csv"],
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
    let mut other = cfg();
    other.economic.p_grid_od_kw += 1.0;
    assert_ne!(RunManifest::new("x", &other, "highs", 0.4).config_sha256, m.config_sha256);
}
