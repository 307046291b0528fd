//! Day-ahead scheduling and flexibility envelopes for a data centre with
//! shiftable IT load, a UPS battery and chilled-water thermal storage.

pub mod config;
pub mod cooling;
pub mod error;
pub mod io;
pub mod milp;
pub mod scenario;
pub mod ups;
pub mod workload;

pub use config::{load_facility_config, FacilityConfig};
pub use error::{Error, Result};
