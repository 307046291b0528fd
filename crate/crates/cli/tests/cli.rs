use std::process::Command;

fn dcflex() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dcflex"))
}

#[test]
fn base_writes_its_outputs() {
    let d = tempfile::tempdir().unwrap();
    let out = dcflex().args(["base", "--out"]).arg(d.path()).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("total_base_cost_gbp 16"), "{stdout}");
    for f in ["base_schedule.csv", "base_schedule.svg", "manifest.json"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
    assert_eq!(dcflex::io::validate_csv(&d.path().join("base_schedule.csv"), "schedule").unwrap(), 96);
    let m = dcflex::io::RunManifest::read(d.path()).unwrap();
    assert_eq!(m.command, "base");
    assert_eq!(m.table_sha256.len(), 2);
}

#[test]
fn bad_config_is_an_input_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    std::fs::write(&cfg, "[time]\nmain_slots = 'x'\n").unwrap();
    let out = dcflex().args(["base", "--out"]).arg(d.path()).arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let missing = dcflex().args(["base", "--out"]).arg(d.path()).args(["--tables", "/nonexistent"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = dcflex().args(["base", "--nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn optimise_then_flex() {
    let d = tempfile::tempdir().unwrap();
    let opt = d.path().join("opt");
    let out = dcflex().args(["optimise", "--out"]).arg(&opt).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("saving_pct "), "{stdout}");
    for f in ["optimised_schedule.csv", "shift_histogram.csv", "summary.json", "cost_comparison.svg", "optimised_schedule.json"] {
        assert!(opt.join(f).exists(), "{f}");
    }

    let bad = dcflex()
        .args(["flex", "--baseline"])
        .arg(&opt)
        .arg("--out")
        .arg(d.path().join("bad"))
        .args(["--t0-grid", "25:00"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));

    let flex = d.path().join("flex");
    let out = dcflex()
        .args(["flex", "--baseline"])
        .arg(&opt)
        .arg("--out")
        .arg(&flex)
        .args(["--t0-grid", "06:00", "--dp-grid", "-100,5000"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(dcflex::io::validate_csv(&flex.join("heatmap.csv"), "heatmap").unwrap(), 2);
    assert!(flex.join("heatmap.svg").exists());
    assert!(flex.join("breakdown/t0_024_dp_-100.csv").exists());
    assert!(!flex.join("breakdown/t0_024_dp_5000.csv").exists());
}
