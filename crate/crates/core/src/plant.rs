//! Per-zone VAV terminal: logical comfort-policy action to physical command,
//! supply stream, and electric energy accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermal::{self, BuildingModel, HvacFlow, ThermalState, WeatherSample};
use crate::units::{delta_f_to_k, fahrenheit_to_kelvin};

/// The logical action the agent picks for a VAV unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ComfortPolicy {
    /// Safe band only.
    #[default]
    Off,
    /// Tight comfort band.
    On,
}

impl ComfortPolicy {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            ComfortPolicy::On
        } else {
            ComfortPolicy::Off
        }
    }

    pub fn is_on(self) -> bool {
        self == ComfortPolicy::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PhysicalCommand {
    HeatOn,
    CoolOn,
    #[default]
    Idle,
}

impl PhysicalCommand {
    pub fn label(self) -> &'static str {
        match self {
            PhysicalCommand::HeatOn => "heat",
            PhysicalCommand::CoolOn => "cool",
            PhysicalCommand::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VavStatus {
    pub logical: ComfortPolicy,
    pub physical: PhysicalCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VavSpec {
    pub zone_id: u32,
    /// kg/s while running.
    pub mass_flow_on: f64,
    /// K
    pub supply_temp_heat: f64,
    /// K
    pub supply_temp_cool: f64,
    pub cop_heat: f64,
    pub cop_cool: f64,
    /// W while running.
    pub fan_power: f64,
}

impl VavSpec {
    pub fn with_defaults(zone_id: u32) -> Self {
        VavSpec {
            zone_id,
            mass_flow_on: 0.5,
            supply_temp_heat: fahrenheit_to_kelvin(104.0),
            supply_temp_cool: fahrenheit_to_kelvin(55.0),
            cop_heat: 3.0,
            cop_cool: 3.5,
            fan_power: 200.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mass_flow_on > 0.0
            && self.supply_temp_heat > self.supply_temp_cool
            && self.cop_heat > 0.0
            && self.cop_cool > 0.0
            && self.fan_power >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("vav for zone {}: invalid plant parameters", self.zone_id)))
        }
    }
}

/// Temperature bands in Kelvin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortBands {
    pub comfort_low: f64,
    pub comfort_high: f64,
    pub safe_low: f64,
    pub safe_high: f64,
    pub hysteresis: f64,
}

impl Default for ComfortBands {
    fn default() -> Self {
        ComfortBands {
            comfort_low: fahrenheit_to_kelvin(71.0),
            comfort_high: fahrenheit_to_kelvin(74.0),
            safe_low: fahrenheit_to_kelvin(60.0),
            safe_high: fahrenheit_to_kelvin(90.0),
            hysteresis: 0.3,
        }
    }
}

impl ComfortBands {
    pub fn from_fahrenheit(comfort_low: f64, comfort_high: f64, safe_low: f64, safe_high: f64, hysteresis_delta_f: f64) -> Result<Self> {
        let bands = ComfortBands {
            comfort_low: fahrenheit_to_kelvin(comfort_low),
            comfort_high: fahrenheit_to_kelvin(comfort_high),
            safe_low: fahrenheit_to_kelvin(safe_low),
            safe_high: fahrenheit_to_kelvin(safe_high),
            hysteresis: delta_f_to_k(hysteresis_delta_f),
        };
        bands.validate()?;
        Ok(bands)
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.safe_low < self.comfort_low && self.comfort_low < self.comfort_high && self.comfort_high < self.safe_high;
        if ordered && self.hysteresis >= 0.0 {
            Ok(())
        } else {
            Err(Error::Config("bands must satisfy safe_low < comfort_low < comfort_high < safe_high, hysteresis >= 0".into()))
        }
    }

    /// (low, high) active for a logical action.
    pub fn active(&self, policy: ComfortPolicy) -> (f64, f64) {
        match policy {
            ComfortPolicy::On => (self.comfort_low, self.comfort_high),
            ComfortPolicy::Off => (self.safe_low, self.safe_high),
        }
    }

    /// Temperatures at which a running heater / cooler releases.
    fn release_points(&self, policy: ComfortPolicy) -> (f64, f64) {
        match policy {
            ComfortPolicy::On => {
                let mid = 0.5 * (self.comfort_low + self.comfort_high);
                (mid + self.hysteresis, mid - self.hysteresis)
            }
            // Safety recovery releases just inside the safe band.
            ComfortPolicy::Off => (self.safe_low + self.hysteresis, self.safe_high - self.hysteresis),
        }
    }
}

/// Logical action plus zone temperature to a physical command.
///
/// Below the active band the unit heats, above it the unit cools. Inside the
/// band a running unit keeps going until it passes its release point, which
/// stops it from toggling on every step at a band edge.
pub fn translate_action(policy: ComfortPolicy, t_zone: f64, bands: &ComfortBands, previous: PhysicalCommand) -> PhysicalCommand {
    let (low, high) = bands.active(policy);
    if t_zone < low {
        return PhysicalCommand::HeatOn;
    }
    if t_zone > high {
        return PhysicalCommand::CoolOn;
    }
    let (heat_release, cool_release) = bands.release_points(policy);
    match previous {
        PhysicalCommand::HeatOn if t_zone < heat_release => PhysicalCommand::HeatOn,
        PhysicalCommand::CoolOn if t_zone > cool_release => PhysicalCommand::CoolOn,
        _ => PhysicalCommand::Idle,
    }
}

/// Supply stream for a command. Idle returns zero flow at the zone temperature.
pub fn plant_output(cmd: PhysicalCommand, spec: &VavSpec, t_zone: f64) -> HvacFlow {
    match cmd {
        PhysicalCommand::HeatOn => HvacFlow { mass_flow: spec.mass_flow_on, supply_temp: spec.supply_temp_heat },
        PhysicalCommand::CoolOn => HvacFlow { mass_flow: spec.mass_flow_on, supply_temp: spec.supply_temp_cool },
        PhysicalCommand::Idle => HvacFlow { mass_flow: 0.0, supply_temp: t_zone },
    }
}

/// Electric power drawn for a command at the given zone temperature, W.
pub fn electric_power(cmd: PhysicalCommand, spec: &VavSpec, cp: f64, t_zone: f64) -> f64 {
    let cop = match cmd {
        PhysicalCommand::Idle => return 0.0,
        PhysicalCommand::HeatOn => spec.cop_heat,
        PhysicalCommand::CoolOn => spec.cop_cool,
    };
    let flow = plant_output(cmd, spec, t_zone);
    let thermal = thermal::hvac_gain(flow.mass_flow, cp, flow.supply_temp, t_zone).abs();
    thermal / cop + spec.fan_power
}

/// Electric energy over `dt` seconds, J.
pub fn electric_energy(cmd: PhysicalCommand, spec: &VavSpec, cp: f64, t_zone: f64, dt: f64) -> f64 {
    electric_power(cmd, spec, cp, t_zone) * dt
}

/// Worst-case electric power of one unit inside the safety envelope
/// (heating at `safe_low - hysteresis` or cooling at `safe_high + hysteresis`).
pub fn max_electric_power(spec: &VavSpec, cp: f64, bands: &ComfortBands) -> f64 {
    let heat = electric_power(PhysicalCommand::HeatOn, spec, cp, bands.safe_low - bands.hysteresis);
    let cool = electric_power(PhysicalCommand::CoolOn, spec, cp, bands.safe_high + bands.hysteresis);
    heat.max(cool)
}

/// Checks each zone's plant against weather extremes. Returns human-readable
/// warnings; an empty list means the safety envelope is enforceable.
///
/// Two conditions per zone, both with neighbours held at the zone's own
/// temperature: the heater must hold `safe_low` at `outdoor_min` with vacant
/// gains and no sun, and the cooler must hold `safe_high` at `outdoor_max`
/// with occupied gains and `solar_boost`. A zone drifting freely at the band
/// edge must also move less than `hysteresis` per control step.
pub fn sizing_check(
    model: &BuildingModel,
    vavs: &[VavSpec],
    bands: &ComfortBands,
    outdoor_min: f64,
    outdoor_max: f64,
    solar_boost: f64,
    step_seconds: f64,
) -> Vec<String> {
    let mut warnings = Vec::new();
    for (i, zone) in model.zones().iter().enumerate() {
        let Some(spec) = vavs.iter().find(|v| v.zone_id == zone.id) else {
            warnings.push(format!("zone {}: no VAV unit", zone.id));
            continue;
        };
        let probe = |temp: f64, outdoor: f64, t_sol: f64, occupied: bool, flow: HvacFlow| {
            let mut state = ThermalState::uniform(model.zone_count(), temp);
            state.zone_temps[i] = temp;
            let mut flows = vec![HvacFlow::IDLE; model.zone_count()];
            flows[i] = flow;
            let w = WeatherSample { minute: 0.0, outdoor, t_sol };
            thermal::heat_balance(model, &state, &w, &flows, occupied).map(|q| q[i]).unwrap_or(f64::NAN)
        };
        let cold = bands.safe_low;
        let heat = plant_output(PhysicalCommand::HeatOn, spec, cold);
        let q_heat = probe(cold, outdoor_min, outdoor_min, false, heat);
        if !(q_heat > 0.0) {
            warnings.push(format!("zone {}: heater cannot hold {:.1} K at outdoor {:.1} K", zone.id, cold, outdoor_min));
        }
        let hot = bands.safe_high;
        let cool = plant_output(PhysicalCommand::CoolOn, spec, hot);
        let q_cool = probe(hot, outdoor_max, outdoor_max + solar_boost, true, cool);
        if !(q_cool < 0.0) {
            warnings.push(format!("zone {}: cooler cannot hold {:.1} K at outdoor {:.1} K", zone.id, hot, outdoor_max));
        }
        let c = model.capacitance()[i];
        let drift_cold = probe(cold, outdoor_min, outdoor_min, false, HvacFlow::IDLE) * step_seconds / c;
        let drift_hot = probe(hot, outdoor_max, outdoor_max + solar_boost, true, HvacFlow::IDLE) * step_seconds / c;
        if drift_cold < -bands.hysteresis || drift_hot > bands.hysteresis {
            warnings.push(format!(
                "zone {}: free drift per step ({:.3} K cold, {:.3} K hot) exceeds hysteresis {:.3} K",
                zone.id, drift_cold, drift_hot, bands.hysteresis
            ));
        }
    }
    warnings
}
