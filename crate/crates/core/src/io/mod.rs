//! Result files: CSV tables, run manifests and SVG charts.

mod manifest;
pub mod plot;
mod tables;

pub use manifest::{read_schedule_json, sha256_hex, write_schedule_json, RunManifest, ScenarioRecord, Timing, MANIFEST_FILE};
pub use tables::{
    validate_csv, write_breakdown_csv, write_heatmap_csv, write_schedule_csv, write_shift_histogram_csv,
    BREAKDOWN_COLUMNS, CSV_SCHEMA_JSON, HEATMAP_COLUMNS, SCHEDULE_COLUMNS,
};
