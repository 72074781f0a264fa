//! JSON building configuration. Temperatures in the file are °F, geometry in
//! m and m², power in W.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::Schedule;
use crate::error::{Error, Result};
use crate::plant::{self, ComfortBands, VavSpec};
use crate::thermal::{AirProperties, BuildingModel, Coupling, ZoneSpec};
use crate::units::{delta_f_to_k, fahrenheit_to_kelvin};

pub const REFERENCE_OPEN: &str = include_str!("../../../configs/reference_open.json");
pub const REFERENCE_CLOSED: &str = include_str!("../../../configs/reference_closed.json");

const DEFAULT_GAIN_OCCUPIED: f64 = 10.0;
const DEFAULT_GAIN_VACANT: f64 = 1.0;

fn default_mass() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub id: u32,
    pub floor_area: f64,
    pub height: f64,
    #[serde(default)]
    pub window_area: f64,
    #[serde(default)]
    pub window_absorptance: f64,
    #[serde(default = "default_mass")]
    pub thermal_mass_multiplier: f64,
    /// W; defaults to 10 W/m² of floor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_gain_occupied: Option<f64>,
    /// W; defaults to 1 W/m² of floor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_gain_vacant: Option<f64>,
}

impl ZoneConfig {
    fn to_spec(&self) -> ZoneSpec {
        ZoneSpec {
            id: self.id,
            floor_area: self.floor_area,
            height: self.height,
            window_area: self.window_area,
            window_absorptance: self.window_absorptance,
            thermal_mass_multiplier: self.thermal_mass_multiplier,
            internal_gain_occupied: self.internal_gain_occupied.unwrap_or(DEFAULT_GAIN_OCCUPIED * self.floor_area),
            internal_gain_vacant: self.internal_gain_vacant.unwrap_or(DEFAULT_GAIN_VACANT * self.floor_area),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VavConfig {
    pub zone_id: u32,
    pub mass_flow_on: f64,
    #[serde(rename = "supply_temp_heat_F")]
    pub supply_temp_heat_f: f64,
    #[serde(rename = "supply_temp_cool_F")]
    pub supply_temp_cool_f: f64,
    pub cop_heat: f64,
    pub cop_cool: f64,
    pub fan_power: f64,
}

impl Default for VavConfig {
    fn default() -> Self {
        VavConfig {
            zone_id: 0,
            mass_flow_on: 0.5,
            supply_temp_heat_f: 104.0,
            supply_temp_cool_f: 55.0,
            cop_heat: 3.0,
            cop_cool: 3.5,
            fan_power: 200.0,
        }
    }
}

impl VavConfig {
    fn to_spec(&self) -> VavSpec {
        VavSpec {
            zone_id: self.zone_id,
            mass_flow_on: self.mass_flow_on,
            supply_temp_heat: fahrenheit_to_kelvin(self.supply_temp_heat_f),
            supply_temp_cool: fahrenheit_to_kelvin(self.supply_temp_cool_f),
            cop_heat: self.cop_heat,
            cop_cool: self.cop_cool,
            fan_power: self.fan_power,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandsConfig {
    #[serde(rename = "comfort_low_F")]
    pub comfort_low_f: f64,
    #[serde(rename = "comfort_high_F")]
    pub comfort_high_f: f64,
    #[serde(rename = "safe_low_F")]
    pub safe_low_f: f64,
    #[serde(rename = "safe_high_F")]
    pub safe_high_f: f64,
    /// Temperature difference, °F.
    #[serde(rename = "hysteresis_F")]
    pub hysteresis_f: f64,
}

impl Default for BandsConfig {
    fn default() -> Self {
        BandsConfig { comfort_low_f: 71.0, comfort_high_f: 74.0, safe_low_f: 60.0, safe_high_f: 90.0, hysteresis_f: 0.54 }
    }
}

fn default_boost_f() -> f64 {
    36.0
}

fn default_initial_f() -> f64 {
    72.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub air: AirProperties,
    pub zones: Vec<ZoneConfig>,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
    /// One per zone; zones without an entry get default plant parameters.
    #[serde(default)]
    pub vav: Vec<VavConfig>,
    #[serde(default)]
    pub comfort_bands: BandsConfig,
    #[serde(default)]
    pub schedule: Schedule,
    /// Peak solar temperature rise over outdoor, °F difference.
    #[serde(rename = "solar_boost_F", default = "default_boost_f")]
    pub solar_boost_f: f64,
    /// Zone temperature at every episode start, °F.
    #[serde(rename = "initial_temp_F", default = "default_initial_f")]
    pub initial_temp_f: f64,
}

impl BuildingConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }

    pub fn reference_open() -> Self {
        Self::from_json(REFERENCE_OPEN).expect("bundled open-plan config is valid")
    }

    pub fn reference_closed() -> Self {
        Self::from_json(REFERENCE_CLOSED).expect("bundled closed-plan config is valid")
    }

    pub fn build(&self) -> Result<Building> {
        let zones: Vec<ZoneSpec> = self.zones.iter().map(ZoneConfig::to_spec).collect();
        let model = BuildingModel::new(zones, self.couplings.clone(), self.air)?;
        let mut vavs = Vec::with_capacity(model.zone_count());
        for zone in model.zones() {
            let mut matching = self.vav.iter().filter(|v| v.zone_id == zone.id);
            let spec = match (matching.next(), matching.next()) {
                (Some(v), None) => v.to_spec(),
                (None, _) => VavConfig { zone_id: zone.id, ..VavConfig::default() }.to_spec(),
                (Some(_), Some(_)) => return Err(Error::Config(format!("zone {}: more than one vav entry", zone.id))),
            };
            spec.validate()?;
            vavs.push(spec);
        }
        if let Some(v) = self.vav.iter().find(|v| model.zone_index(v.zone_id).is_none()) {
            return Err(Error::Config(format!("vav entry references unknown zone {}", v.zone_id)));
        }
        let b = &self.comfort_bands;
        let bands = ComfortBands::from_fahrenheit(b.comfort_low_f, b.comfort_high_f, b.safe_low_f, b.safe_high_f, b.hysteresis_f)?;
        self.schedule.validate()?;
        if !(self.solar_boost_f >= 0.0) {
            return Err(Error::Config("solar_boost_F must be >= 0".into()));
        }
        let initial_temp = fahrenheit_to_kelvin(self.initial_temp_f);
        if !(bands.safe_low..=bands.safe_high).contains(&initial_temp) {
            return Err(Error::Config("initial_temp_F must lie inside the safe band".into()));
        }
        Ok(Building {
            name: self.name.clone(),
            model,
            vavs,
            bands,
            schedule: self.schedule.clone(),
            solar_boost: delta_f_to_k(self.solar_boost_f),
            initial_temp,
        })
    }

    /// Same zones, plant and envelope; only coupling kinds may differ.
    pub fn same_geometry(&self, other: &BuildingConfig) -> bool {
        self.zones == other.zones
            && self.vav == other.vav
            && self.comfort_bands == other.comfort_bands
            && self.couplings.len() == other.couplings.len()
            && self
                .couplings
                .iter()
                .zip(&other.couplings)
                .all(|(a, b)| a.zone_a == b.zone_a && a.zone_b == b.zone_b && a.area == b.area)
    }
}

/// A validated building ready to simulate.
#[derive(Debug, Clone)]
pub struct Building {
    pub name: String,
    pub model: BuildingModel,
    /// In zone order.
    pub vavs: Vec<VavSpec>,
    pub bands: ComfortBands,
    pub schedule: Schedule,
    /// K difference.
    pub solar_boost: f64,
    /// K.
    pub initial_temp: f64,
}

impl Building {
    pub fn zone_count(&self) -> usize {
        self.model.zone_count()
    }

    /// Fleet worst-case electric energy for one control step of `dt` seconds.
    pub fn energy_scale(&self, dt: f64) -> f64 {
        let cp = self.model.air().specific_heat;
        self.vavs.iter().map(|v| plant::max_electric_power(v, cp, &self.bands)).sum::<f64>() * dt
    }

    pub fn sizing_warnings(&self, outdoor_min: f64, outdoor_max: f64, step_seconds: f64) -> Vec<String> {
        plant::sizing_check(&self.model, &self.vavs, &self.bands, outdoor_min, outdoor_max, self.solar_boost, step_seconds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::{CouplingKind, Endpoint};

    #[test]
    fn bundled_configs_build() {
        let open = BuildingConfig::reference_open();
        let closed = BuildingConfig::reference_closed();
        let bo = open.build().unwrap();
        let bc = closed.build().unwrap();
        assert_eq!(bo.zone_count(), 6);
        assert_eq!(bc.zone_count(), 6);
        assert!(open.same_geometry(&closed));
        let interior = |c: &BuildingConfig, want_convective: bool| {
            c.couplings.iter().filter(|k| matches!(k.zone_b, Endpoint::Zone(_))).all(|k| matches!(k.kind, CouplingKind::Convective { .. }) == want_convective)
        };
        assert!(interior(&open, true));
        assert!(interior(&closed, false));
        assert_eq!(bo.vavs[0].supply_temp_heat, 313.15);
        assert!((bo.bands.hysteresis - 0.3).abs() < 1e-12);
    }

    #[test]
    fn reference_plant_is_sized() {
        let b = BuildingConfig::reference_open().build().unwrap();
        let w = b.sizing_warnings(fahrenheit_to_kelvin(25.0), fahrenheit_to_kelvin(110.0), 720.0);
        assert!(w.is_empty(), "{w:?}");
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let json = r#"{"zones":[{"id":1,"floor_area":20,"height":3}],
            "couplings":[{"zone_a":1,"zone_b":"outdoor","area":10,"kind":"conductive","conductivity":0.5,"thickness":0.1}]}"#;
        let b = BuildingConfig::from_json(json).unwrap().build().unwrap();
        assert_eq!(b.model.zones()[0].internal_gain_occupied, 200.0);
        assert_eq!(b.model.zones()[0].thermal_mass_multiplier, 5.0);
        assert_eq!(b.vavs.len(), 1);
        assert_eq!(b.vavs[0].mass_flow_on, 0.5);
    }

    #[test]
    fn rejects_bad_configs() {
        let unknown = r#"{"zones":[{"id":1,"floor_area":20,"height":3}],
            "couplings":[{"zone_a":1,"zone_b":2,"area":10,"kind":"convective","convective_coefficient":3}]}"#;
        assert!(matches!(BuildingConfig::from_json(unknown).unwrap().build(), Err(Error::Config(_))));
        let mixed = r#"{"zones":[{"id":1,"floor_area":20,"height":3},{"id":2,"floor_area":20,"height":3}],
            "couplings":[{"zone_a":1,"zone_b":2,"area":10,"kind":"convective","conductivity":3,"thickness":0.1}]}"#;
        assert!(BuildingConfig::from_json(mixed).is_err());
        let bands = r#"{"zones":[{"id":1,"floor_area":20,"height":3}],"comfort_bands":{"comfort_low_F":75,"comfort_high_F":74}}"#;
        assert!(matches!(BuildingConfig::from_json(bands).unwrap().build(), Err(Error::Config(_))));
    }
}
