//! Facility parameters and the slot grid.
//!
//! Every physical and economic constant consumed by the model builders lives
//! here. Field names carry their unit so the on-disk config cannot drift
//! between kW, kWh and kJ.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bundled parameter set for the 1 MW reference facility.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../data/default_config.toml");

/// Uniform slot grid: a main day followed by an extension horizon for deferred work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub slot_duration_hours: f64,
    pub main_slots: usize,
    pub extension_slots: usize,
}

impl TimeGrid {
    pub fn total_slots(&self) -> usize {
        self.main_slots + self.extension_slots
    }

    pub fn slots_per_hour(&self) -> usize {
        (1.0 / self.slot_duration_hours).round() as usize
    }

    /// Hour of day (0..24) a slot falls in; extension slots wrap onto the next morning.
    pub fn hour_of_day(&self, slot: usize) -> usize {
        (slot / self.slots_per_hour()) % 24
    }

    pub fn is_main(&self, slot: usize) -> bool {
        slot < self.main_slots
    }

    pub fn slot_to_hours(&self, slot: usize) -> f64 {
        slot as f64 * self.slot_duration_hours
    }

    /// Formats a main-day slot as `HH:MM`.
    pub fn clock(&self, slot: usize) -> String {
        let minutes = (slot as f64 * self.slot_duration_hours * 60.0).round() as usize;
        format!("{:02}:{:02}", (minutes / 60) % 24, minutes % 60)
    }

    pub fn window(&self) -> SlotWindow {
        SlotWindow::new(0, self.total_slots())
    }

    fn validate(&self) -> Result<()> {
        if !(self.slot_duration_hours > 0.0) {
            return Err(Error::invalid("time.slot_duration_hours", "must be positive"));
        }
        let spans = self.slot_duration_hours * self.main_slots as f64;
        if (spans - 24.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "time.main_slots",
                format!("main horizon spans {spans} h, expected 24 h"),
            ));
        }
        let per_hour = 1.0 / self.slot_duration_hours;
        if (per_hour - per_hour.round()).abs() > 1e-9 {
            return Err(Error::invalid(
                "time.slot_duration_hours",
                "must divide one hour evenly",
            ));
        }
        Ok(())
    }
}

/// Contiguous run of absolute slots `[first, first + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SlotWindow {
    pub first: usize,
    pub len: usize,
}

impl SlotWindow {
    pub fn new(first: usize, len: usize) -> Self {
        Self { first, len }
    }

    pub fn end(&self) -> usize {
        self.first + self.len
    }

    pub fn contains(&self, slot: usize) -> bool {
        slot >= self.first && slot < self.end()
    }

    pub fn slots(&self) -> std::ops::Range<usize> {
        self.first..self.end()
    }

    /// Offset of an absolute slot inside the window.
    pub fn local(&self, slot: usize) -> usize {
        debug_assert!(self.contains(slot));
        slot - self.first
    }
}

/// Server power law `P = p_idle + (p_max - p_idle) * u^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItParams {
    pub p_idle_kw: f64,
    pub p_max_kw: f64,
    pub u_max: f64,
    pub exponent: f64,
}

impl ItParams {
    /// Exact IT power for a CPU utilisation.
    pub fn power_kw(&self, utilisation: f64) -> f64 {
        self.p_idle_kw + (self.p_max_kw - self.p_idle_kw) * utilisation.max(0.0).powf(self.exponent)
    }

    fn validate(&self) -> Result<()> {
        if !(self.p_idle_kw > 0.0 && self.p_idle_kw < self.p_max_kw) {
            return Err(Error::invalid("it.p_idle_kw", "require 0 < p_idle_kw < p_max_kw"));
        }
        if !(self.exponent > 1.0) {
            return Err(Error::invalid("it.exponent", "power curve must be convex (exponent > 1)"));
        }
        if !(self.u_max > 0.0 && self.u_max <= 1.0) {
            return Err(Error::invalid("it.u_max", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpsParams {
    pub e_base_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub p_ch_min_kw: f64,
    pub p_ch_max_kw: f64,
    pub p_disch_min_kw: f64,
    pub p_disch_max_kw: f64,
    pub eta_ch: f64,
    pub eta_disch: f64,
    pub soc_start_end: f64,
    /// Bind the cyclic endpoint at the end of the main day instead of the extended horizon.
    #[serde(default)]
    pub cyclic_at_main_end: bool,
}

impl UpsParams {
    pub fn e_min_kwh(&self) -> f64 {
        self.soc_min * self.e_base_kwh
    }

    pub fn e_max_kwh(&self) -> f64 {
        self.soc_max * self.e_base_kwh
    }

    pub fn e_start_end_kwh(&self) -> f64 {
        self.soc_start_end * self.e_base_kwh
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ups.soc_min", self.soc_min),
            ("ups.soc_max", self.soc_max),
            ("ups.soc_start_end", self.soc_start_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(name, format!("{v} is not a fraction in [0, 1]")));
            }
        }
        if !(self.soc_min <= self.soc_start_end && self.soc_start_end <= self.soc_max) {
            return Err(Error::invalid(
                "ups.soc_start_end",
                "require soc_min <= soc_start_end <= soc_max",
            ));
        }
        if !(self.e_base_kwh > 0.0) {
            return Err(Error::invalid("ups.e_base_kwh", "must be positive"));
        }
        if !(0.0 <= self.p_ch_min_kw && self.p_ch_min_kw <= self.p_ch_max_kw) {
            return Err(Error::invalid("ups.p_ch_min_kw", "require 0 <= p_ch_min_kw <= p_ch_max_kw"));
        }
        if !(0.0 <= self.p_disch_min_kw && self.p_disch_min_kw <= self.p_disch_max_kw) {
            return Err(Error::invalid(
                "ups.p_disch_min_kw",
                "require 0 <= p_disch_min_kw <= p_disch_max_kw",
            ));
        }
        for (name, v) in [("ups.eta_ch", self.eta_ch), ("ups.eta_disch", self.eta_disch)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, "efficiency must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Inclusive temperature band for one thermal node, °C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempRange {
    pub min_c: f64,
    pub max_c: f64,
}

impl TempRange {
    pub fn new(min_c: f64, max_c: f64) -> Self {
        Self { min_c, max_c }
    }

    pub fn contains(&self, t: f64, tol: f64) -> bool {
        t >= self.min_c - tol && t <= self.max_c + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempBounds {
    pub ain: TempRange,
    pub ca: TempRange,
    pub ha: TempRange,
    pub r: TempRange,
    pub it: TempRange,
}

impl TempBounds {
    pub fn get(&self, node: ThermalNode) -> TempRange {
        match node {
            ThermalNode::Ain => self.ain,
            ThermalNode::It => self.it,
            ThermalNode::Rack => self.r,
            ThermalNode::ColdAisle => self.ca,
            ThermalNode::HotAisle => self.ha,
        }
    }
}

/// The five lumped temperature states of the air/rack/IT network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThermalNode {
    Ain,
    It,
    Rack,
    ColdAisle,
    HotAisle,
}

impl ThermalNode {
    pub const ALL: [ThermalNode; 5] = [
        ThermalNode::Ain,
        ThermalNode::It,
        ThermalNode::Rack,
        ThermalNode::ColdAisle,
        ThermalNode::HotAisle,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ThermalNode::Ain => "ain",
            ThermalNode::It => "it",
            ThermalNode::Rack => "r",
            ThermalNode::ColdAisle => "ca",
            ThermalNode::HotAisle => "ha",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub m_dot_air_kg_per_s: f64,
    pub c_pa_kj_per_kg_k: f64,
    pub c_it_kj_per_k: f64,
    pub c_r_kj_per_k: f64,
    pub c_ca_kj_per_k: f64,
    pub c_ha_kj_per_k: f64,
    pub g_cv_kw_per_k: f64,
    pub g_cd_kw_per_k: f64,
    pub kappa: f64,
    pub t_out_c: f64,
    pub bounds_c: TempBounds,
}

impl ThermalParams {
    /// Heat capacity flow of the circulated air, kW/K.
    pub fn air_flow_kw_per_k(&self) -> f64 {
        self.m_dot_air_kg_per_s * self.c_pa_kj_per_kg_k
    }

    /// Rack-effective air flow `m_dot * kappa * c_pa`, kW/K.
    pub fn rack_flow_kw_per_k(&self) -> f64 {
        self.air_flow_kw_per_k() * self.kappa
    }

    /// Ambient heat gain `G_cd (T_out - T_CA)`, kW.
    pub fn ambient_gain_kw(&self, t_ca_c: f64) -> f64 {
        self.g_cd_kw_per_k * (self.t_out_c - t_ca_c)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("thermal.m_dot_air_kg_per_s", self.m_dot_air_kg_per_s),
            ("thermal.c_pa_kj_per_kg_k", self.c_pa_kj_per_kg_k),
            ("thermal.c_it_kj_per_k", self.c_it_kj_per_k),
            ("thermal.c_r_kj_per_k", self.c_r_kj_per_k),
            ("thermal.c_ca_kj_per_k", self.c_ca_kj_per_k),
            ("thermal.c_ha_kj_per_k", self.c_ha_kj_per_k),
            ("thermal.g_cv_kw_per_k", self.g_cv_kw_per_k),
            ("thermal.g_cd_kw_per_k", self.g_cd_kw_per_k),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(name, "must be strictly positive"));
            }
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::invalid("thermal.kappa", "must lie in (0, 1]"));
        }
        for node in ThermalNode::ALL {
            let r = self.bounds_c.get(node);
            if !(r.min_c < r.max_c) {
                return Err(Error::invalid(
                    format!("thermal.bounds_c.{}", node.label()),
                    "min must be below max",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingParams {
    pub cop_chiller: f64,
    pub p_chiller_max_kw: f64,
    pub e_tes_max_kwh: f64,
    pub q_tes_ch_max_kw: f64,
    pub q_tes_dis_max_kw: f64,
    pub eta_tes_ch: f64,
    pub eta_tes_dis: f64,
    /// Bind the TES cyclic condition at the end of the main day instead of the extended horizon.
    #[serde(default)]
    pub cyclic_at_main_end: bool,
}

impl CoolingParams {
    fn validate(&self) -> Result<()> {
        if !(self.cop_chiller > 0.0) {
            return Err(Error::invalid("cooling.cop_chiller", "must be positive"));
        }
        if self.p_chiller_max_kw * self.cop_chiller < self.q_tes_ch_max_kw {
            return Err(Error::invalid(
                "cooling.p_chiller_max_kw",
                "chiller cannot feed the TES at its full charging rate",
            ));
        }
        for (name, v) in [
            ("cooling.e_tes_max_kwh", self.e_tes_max_kwh),
            ("cooling.q_tes_ch_max_kw", self.q_tes_ch_max_kw),
            ("cooling.q_tes_dis_max_kw", self.q_tes_dis_max_kw),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(name, "must be non-negative"));
            }
        }
        for (name, v) in [
            ("cooling.eta_tes_ch", self.eta_tes_ch),
            ("cooling.eta_tes_dis", self.eta_tes_dis),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(name, "efficiency must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// How prices are found for slots past the last listed hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionPrices {
    /// Extension hours reuse the first hours of the listed day.
    #[default]
    RepeatDayStart,
    /// Every hour of the extended horizon must be listed explicitly.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    /// Hourly day-ahead prices in GBP/MWh, starting at 00:00.
    pub prices_gbp_per_mwh: Vec<f64>,
    #[serde(default)]
    pub extension_prices: ExtensionPrices,
    pub p_grid_od_kw: f64,
    pub p_tol_kw: f64,
}

impl EconomicParams {
    /// Price of a single slot, `None` when the listed hours do not cover it.
    pub fn slot_price(&self, grid: &TimeGrid, slot: usize) -> Option<f64> {
        let hour = slot / grid.slots_per_hour();
        match self.prices_gbp_per_mwh.get(hour) {
            Some(p) => Some(*p),
            None if self.extension_prices == ExtensionPrices::RepeatDayStart
                && self.prices_gbp_per_mwh.len() >= 24 =>
            {
                self.prices_gbp_per_mwh.get(hour % 24).copied()
            }
            None => None,
        }
    }

    /// Per-slot prices over the whole extended horizon.
    pub fn slot_prices(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..grid.total_slots())
            .map(|s| self.slot_price(grid, s).expect("validated price coverage"))
            .collect()
    }

    fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if self.prices_gbp_per_mwh.len() < 24 {
            return Err(Error::invalid(
                "economic.prices_gbp_per_mwh",
                format!("{} hourly prices listed, need 24", self.prices_gbp_per_mwh.len()),
            ));
        }
        if let Some(slot) = (0..grid.total_slots()).find(|&s| self.slot_price(grid, s).is_none()) {
            return Err(Error::invalid(
                "economic.prices_gbp_per_mwh",
                format!("no price for slot {} (extension horizon uncovered)", slot + 1),
            ));
        }
        if !(self.p_grid_od_kw >= 0.0) {
            return Err(Error::invalid("economic.p_grid_od_kw", "must be non-negative"));
        }
        if !(self.p_tol_kw > 0.0) {
            return Err(Error::invalid("economic.p_tol_kw", "must be positive"));
        }
        Ok(())
    }
}

/// Modelling choices that are not physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Segments used to linearise the server power curve.
    pub pwl_segments: usize,
    /// Cold-aisle temperature held in the no-flexibility base case.
    pub base_t_ca_c: f64,
    /// Cold-aisle upper bound applied while probing flexibility.
    pub flex_t_ca_max_c: f64,
    /// Slots after a flexibility window in which the facility must recover.
    pub recovery_slots: usize,
    /// Pin the five temperatures to the baseline at the start of a flexibility window.
    #[serde(default)]
    pub flex_pin_temperatures: bool,
    /// Solver time limit per optimisation, seconds.
    pub time_limit_s: f64,
    /// Relative MIP gap accepted as optimal.
    pub mip_rel_gap: f64,
    /// Gap for flexibility checks, where only feasibility decides the answer.
    #[serde(default = "default_flex_gap")]
    pub flex_mip_rel_gap: f64,
    /// Time limit per flexibility check, seconds. A check that runs out of
    /// time without a feasible point counts as infeasible.
    #[serde(default = "default_flex_time_limit")]
    pub flex_time_limit_s: f64,
}

fn default_flex_gap() -> f64 {
    1.0
}

fn default_flex_time_limit() -> f64 {
    30.0
}

impl ModelOptions {
    fn validate(&self) -> Result<()> {
        if self.pwl_segments == 0 {
            return Err(Error::invalid("model.pwl_segments", "need at least one segment"));
        }
        if !(self.time_limit_s > 0.0) {
            return Err(Error::invalid("model.time_limit_s", "must be positive"));
        }
        if !(self.mip_rel_gap >= 0.0) {
            return Err(Error::invalid("model.mip_rel_gap", "must be non-negative"));
        }
        if !(self.flex_time_limit_s > 0.0) {
            return Err(Error::invalid("model.flex_time_limit_s", "must be positive"));
        }
        if !(self.flex_mip_rel_gap >= 0.0) {
            return Err(Error::invalid("model.flex_mip_rel_gap", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityConfig {
    pub time: TimeGrid,
    pub it: ItParams,
    pub ups: UpsParams,
    pub thermal: ThermalParams,
    pub cooling: CoolingParams,
    pub economic: EconomicParams,
    pub model: ModelOptions,
}

impl FacilityConfig {
    /// Parameters of the bundled reference facility.
    pub fn reference() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG_TOML).expect("bundled config is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: FacilityConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.time.validate()?;
        self.it.validate()?;
        self.ups.validate()?;
        self.thermal.validate()?;
        self.cooling.validate()?;
        self.economic.validate(&self.time)?;
        self.model.validate()?;
        let ca = self.thermal.bounds_c.ca;
        if !ca.contains(self.model.base_t_ca_c, 0.0) {
            return Err(Error::invalid(
                "model.base_t_ca_c",
                "base cold-aisle temperature lies outside the cold-aisle bounds",
            ));
        }
        if self.model.flex_t_ca_max_c <= ca.min_c {
            return Err(Error::invalid(
                "model.flex_t_ca_max_c",
                "must exceed the cold-aisle lower bound",
            ));
        }
        Ok(())
    }

    pub fn slot_prices(&self) -> Vec<f64> {
        self.economic.slot_prices(&self.time)
    }

    /// Cold-aisle lower bound, also the overcooling reference temperature.
    pub fn t_ca_min_c(&self) -> f64 {
        self.thermal.bounds_c.ca.min_c
    }
}

pub fn load_facility_config(path: impl AsRef<Path>) -> Result<FacilityConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FacilityConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_matches_reference_values() {
        let cfg = FacilityConfig::reference();
        assert_eq!(cfg.it.p_idle_kw, 166.7);
        assert_eq!(cfg.cooling.cop_chiller, 5.0);
        assert_eq!(cfg.time.total_slots(), 108);
        assert_eq!(cfg.ups.e_start_end_kwh(), 300.0);
        assert_eq!(cfg.economic.p_grid_od_kw, 53.095);
    }

    #[test]
    fn soc_out_of_range_names_the_field() {
        let text = DEFAULT_CONFIG_TOML.replace("soc_min = 0.5", "soc_min = 1.2");
        let err = FacilityConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("soc_min"), "{err}");
    }

    #[test]
    fn uncovered_extension_prices_are_rejected() {
        let text = DEFAULT_CONFIG_TOML.replace(
            "extension_prices = \"repeat-day-start\"",
            "extension_prices = \"explicit\"",
        );
        let err = FacilityConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("slot 97"), "{err}");
    }

    #[test]
    fn malformed_file_is_a_parse_error() {
        let err = FacilityConfig::from_toml_str("[time\nslot = ").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }

    #[test]
    fn hourly_prices_repeat_within_the_hour_and_wrap_for_the_extension() {
        let cfg = FacilityConfig::reference();
        let prices = cfg.slot_prices();
        assert_eq!(prices.len(), 108);
        assert_eq!(&prices[64..68], &[130.0; 4]);
        assert_eq!(prices[96], prices[0]);
        assert_eq!(prices[107], 52.0);
    }

    #[test]
    fn clock_labels() {
        let g = FacilityConfig::reference().time;
        assert_eq!(g.clock(1), "00:15");
        assert_eq!(g.clock(70), "17:30");
        assert_eq!(g.hour_of_day(99), 0);
    }

    #[test]
    fn serialised_config_reloads_identically() {
        let cfg = FacilityConfig::reference();
        let again = FacilityConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }
}
