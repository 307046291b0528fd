use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scenario::{AssetBreakdown, FlexibilityCell, ScheduleSolution};
use crate::workload::ItSolution;

pub const CSV_SCHEMA_JSON: &str = include_str!("../../data/csv_schema.json");

pub const SCHEDULE_COLUMNS: [&str; 15] = [
    "slot",
    "price_gbp_per_mwh",
    "p_grid_it_kw",
    "p_grid_od_kw",
    "p_ups_ch_kw",
    "p_ups_disch_kw",
    "p_chil_crac_kw",
    "p_chil_tes_kw",
    "e_ups_kwh",
    "e_tes_kwh",
    "t_it_c",
    "t_r_c",
    "t_ca_c",
    "t_ha_c",
    "t_ain_c",
];
pub const HEATMAP_COLUMNS: [&str; 4] = ["t0_slot", "delta_p_kw", "tau_hours", "status"];
pub const BREAKDOWN_COLUMNS: [&str; 6] = ["slot", "d_it_kw", "d_ups_kw", "d_crac_kw", "d_tes_kw", "d_total_kw"];

fn num(x: f64) -> String {
    // Avoid "-0.000000" so reruns compare byte for byte.
    let s = format!("{x:.6}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.000000".into()
    } else {
        s
    }
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_schedule_csv(path: &Path, s: &ScheduleSolution) -> Result<()> {
    let header: Vec<String> = SCHEDULE_COLUMNS.iter().map(|c| c.to_string()).collect();
    let rows = (0..s.len()).map(|i| {
        let t = s.temps[i + 1];
        vec![
            (s.window.first + i).to_string(),
            num(s.price_gbp_per_mwh[i]),
            num(s.p_grid_it_kw[i]),
            num(s.p_grid_od_kw[i]),
            num(s.p_ups_ch_kw[i]),
            num(s.p_ups_disch_kw[i]),
            num(s.p_chil_crac_kw[i]),
            num(s.p_chil_tes_kw[i]),
            num(s.e_ups_kwh[i + 1]),
            num(s.e_tes_kwh[i + 1]),
            num(t.it),
            num(t.r),
            num(t.ca),
            num(t.ha),
            num(t.ain),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_shift_histogram_csv(path: &Path, it: &ItSolution) -> Result<()> {
    let width = it.shift_histogram.first().map_or(1, Vec::len);
    let mut header = vec!["slot".to_string()];
    header.extend((0..width).map(|d| format!("shift_{d}")));
    let rows = it.shift_histogram.iter().enumerate().map(|(i, row)| {
        let mut r = vec![(it.window.first + i).to_string()];
        r.extend(row.iter().map(|&u| num(u)));
        r
    });
    write_rows(path, &header, rows)
}

pub fn write_heatmap_csv(path: &Path, cells: &[FlexibilityCell]) -> Result<()> {
    let header: Vec<String> = HEATMAP_COLUMNS.iter().map(|c| c.to_string()).collect();
    let rows = cells.iter().map(|c| {
        vec![
            c.t0.to_string(),
            num(c.delta_p_kw),
            num(c.tau_hours),
            c.status.label().to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_breakdown_csv(path: &Path, b: &AssetBreakdown) -> Result<()> {
    let header: Vec<String> = BREAKDOWN_COLUMNS.iter().map(|c| c.to_string()).collect();
    let rows = (0..b.slots.len()).map(|i| {
        vec![
            b.slots[i].to_string(),
            num(b.d_it_kw[i]),
            num(b.d_ups_kw[i]),
            num(b.d_crac_kw[i]),
            num(b.d_tes_kw[i]),
            num(b.d_total_kw[i]),
        ]
    });
    write_rows(path, &header, rows)
}

#[derive(Debug, Deserialize)]
struct ColumnSpec {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    values: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct TableSpec {
    columns: Vec<ColumnSpec>,
}

/// Checks a CSV file against one table of the bundled schema.
pub fn validate_csv(path: &Path, table: &str) -> Result<usize> {
    let schema: std::collections::BTreeMap<String, TableSpec> =
        serde_json::from_str(CSV_SCHEMA_JSON).map_err(|e| Error::Parse(e.to_string()))?;
    let spec = schema
        .get(table)
        .ok_or_else(|| Error::table(table, "not described by the schema"))?;
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    // A trailing `*` column stands for a numbered run of columns.
    let mut kinds = Vec::with_capacity(header.len());
    let mut cols = spec.columns.iter();
    let mut current = cols.next();
    for h in &header {
        let c = current.ok_or_else(|| Error::table(table, format!("unexpected column {h}")))?;
        if let Some(prefix) = c.name.strip_suffix('*') {
            if !h.starts_with(prefix) || h[prefix.len()..].parse::<usize>().is_err() {
                return Err(Error::table(table, format!("column {h} does not match {}", c.name)));
            }
        } else {
            if *h != c.name {
                return Err(Error::table(table, format!("expected column {}, found {h}", c.name)));
            }
            current = cols.next();
        }
        kinds.push(c);
    }
    if let Some(c) = current.filter(|c| !c.name.ends_with('*')) {
        return Err(Error::table(table, format!("missing column {}", c.name)));
    }
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec?;
        for (v, c) in rec.iter().zip(&kinds) {
            let ok = match c.kind.as_str() {
                "integer" => v.parse::<u64>().is_ok(),
                "number" => v.parse::<f64>().is_ok_and(f64::is_finite),
                "enum" => c.values.iter().any(|x| x == v),
                _ => true,
            };
            if !ok {
                return Err(Error::table(
                    table,
                    format!("row {}: {} = '{v}' is not a valid {}", n + 1, c.name, c.kind),
                ));
            }
        }
        n += 1;
    }
    Ok(n)
}
