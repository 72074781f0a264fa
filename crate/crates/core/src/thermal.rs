//! Lumped multi-zone heat balance.
//!
//! Each zone is a single air node with capacitance `C = rho * V * cp * mass_multiplier`.
//! Its heat gain per unit time is the sum of internal gains, window radiant
//! exchange with the solar temperature, exchange with neighbouring nodes through
//! conductive walls or convective air walls, and the HVAC supply air stream.
//! Temperatures are Kelvin, powers W, time s.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

/// Upper bound on `dt * (sum of conductances + m*cp) / C` for one explicit step.
pub const STABILITY_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub id: u32,
    /// m²
    pub floor_area: f64,
    /// m
    pub height: f64,
    /// m²
    pub window_area: f64,
    pub window_absorptance: f64,
    pub thermal_mass_multiplier: f64,
    /// W
    pub internal_gain_occupied: f64,
    /// W
    pub internal_gain_vacant: f64,
}

impl ZoneSpec {
    pub fn volume(&self) -> f64 {
        self.floor_area * self.height
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("zone {}: {what}", self.id)));
        if !(self.floor_area > 0.0) {
            return bad("floor_area must be > 0");
        }
        if !(self.height > 0.0) {
            return bad("height must be > 0");
        }
        if !(0.0..=1.0).contains(&self.window_absorptance) {
            return bad("window_absorptance must lie in [0, 1]");
        }
        if !(self.window_area >= 0.0) {
            return bad("window_area must be >= 0");
        }
        if !(self.thermal_mass_multiplier >= 1.0) {
            return bad("thermal_mass_multiplier must be >= 1");
        }
        if !self.internal_gain_occupied.is_finite() || !self.internal_gain_vacant.is_finite() {
            return bad("internal gains must be finite");
        }
        Ok(())
    }
}

/// The far side of a coupling: another zone or the outdoor air.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Zone(u32),
    Outdoor(OutdoorTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutdoorTag {
    Outdoor,
}

impl Endpoint {
    pub const OUTDOOR: Endpoint = Endpoint::Outdoor(OutdoorTag::Outdoor);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CouplingKind {
    /// Solid wall: conductivity W/(m·K), thickness m.
    Conductive { conductivity: f64, thickness: f64 },
    /// Air wall: convective coefficient W/(m²·K).
    Convective { convective_coefficient: f64 },
}

/// One symmetric heat path between `zone_a` and `zone_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub zone_a: u32,
    pub zone_b: Endpoint,
    /// m²
    pub area: f64,
    #[serde(flatten)]
    pub kind: CouplingKind,
}

impl Coupling {
    pub fn conductive(zone_a: u32, zone_b: Endpoint, area: f64, conductivity: f64, thickness: f64) -> Self {
        Coupling { zone_a, zone_b, area, kind: CouplingKind::Conductive { conductivity, thickness } }
    }

    pub fn convective(zone_a: u32, zone_b: Endpoint, area: f64, coefficient: f64) -> Self {
        Coupling { zone_a, zone_b, area, kind: CouplingKind::Convective { convective_coefficient: coefficient } }
    }

    /// W/K
    pub fn conductance(&self) -> f64 {
        match self.kind {
            CouplingKind::Conductive { conductivity, thickness } => conductivity / thickness * self.area,
            CouplingKind::Convective { convective_coefficient } => convective_coefficient * self.area,
        }
    }

    /// Heat flow into `zone_a` for whichever kind this coupling is.
    pub fn flux(&self, t_a: f64, t_b: f64) -> f64 {
        self.conductance() * (t_b - t_a)
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = positive(self.area)
            && match self.kind {
                CouplingKind::Conductive { conductivity, thickness } => positive(conductivity) && positive(thickness),
                CouplingKind::Convective { convective_coefficient } => positive(convective_coefficient),
            };
        if !ok {
            return Err(Error::Config(format!(
                "coupling {}-{:?}: physical parameters must be finite and > 0",
                self.zone_a, self.zone_b
            )));
        }
        if self.zone_b == Endpoint::Zone(self.zone_a) {
            return Err(Error::Config(format!("coupling {0}-{0} joins a zone to itself", self.zone_a)));
        }
        Ok(())
    }
}

/// Wall conduction into `zone_a`: `(k/d) * A * (t_b - t_a)`.
pub fn conduction_flux(coupling: &Coupling, t_a: f64, t_b: f64) -> Result<f64> {
    match coupling.kind {
        CouplingKind::Conductive { conductivity, thickness } => Ok(conductivity / thickness * coupling.area * (t_b - t_a)),
        CouplingKind::Convective { .. } => Err(Error::Usage("conduction_flux called on a convective coupling".into())),
    }
}

/// Air-wall convection into `zone_a`: `h * A * (t_b - t_a)`.
pub fn convection_flux(coupling: &Coupling, t_a: f64, t_b: f64) -> Result<f64> {
    match coupling.kind {
        CouplingKind::Convective { convective_coefficient } => Ok(convective_coefficient * coupling.area * (t_b - t_a)),
        CouplingKind::Conductive { .. } => Err(Error::Usage("convection_flux called on a conductive coupling".into())),
    }
}

/// Window radiant exchange `sigma * alpha * A_win * (t_sol^4 - t_zone^4)`.
pub fn solar_gain(zone: &ZoneSpec, t_zone: f64, t_sol: f64) -> f64 {
    STEFAN_BOLTZMANN * zone.window_absorptance * zone.window_area * (t_sol.powi(4) - t_zone.powi(4))
}

/// Supply air stream `m * cp * (t_supply - t_zone)`.
pub fn hvac_gain(mass_flow: f64, cp: f64, t_supply: f64, t_zone: f64) -> f64 {
    if mass_flow == 0.0 {
        return 0.0;
    }
    mass_flow * cp * (t_supply - t_zone)
}

/// Radiant driver temperature: outdoor air plus a daytime half-sine boost
/// peaking at noon (06:00 to 18:00).
pub fn solar_temperature(outdoor: f64, minute_of_day: f64, boost: f64) -> f64 {
    let hour = minute_of_day / 60.0;
    if (6.0..=18.0).contains(&hour) {
        outdoor + boost * (std::f64::consts::PI * (hour - 6.0) / 12.0).sin().max(0.0)
    } else {
        outdoor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirProperties {
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
}

impl Default for AirProperties {
    fn default() -> Self {
        AirProperties { density: 1.2, specific_heat: 1005.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherSample {
    /// Minutes since episode start.
    pub minute: f64,
    /// Outdoor dry-bulb, K.
    pub outdoor: f64,
    /// Solar (radiant) temperature, K.
    pub t_sol: f64,
}

impl WeatherSample {
    pub fn validate(&self) -> Result<()> {
        if !(233.0..=330.0).contains(&self.outdoor) {
            return Err(Error::Format(format!("outdoor temperature {} K at t = {} min out of range", self.outdoor, self.minute)));
        }
        if !(self.t_sol >= self.outdoor - 5.0) {
            return Err(Error::Format(format!("solar temperature {} K at t = {} min below outdoor - 5 K", self.t_sol, self.minute)));
        }
        Ok(())
    }
}

/// Supply stream delivered to one zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvacFlow {
    /// kg/s
    pub mass_flow: f64,
    /// K
    pub supply_temp: f64,
}

impl HvacFlow {
    pub const IDLE: HvacFlow = HvacFlow { mass_flow: 0.0, supply_temp: 0.0 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub zone_temps: Vec<f64>,
    /// Minutes since episode start.
    pub clock: f64,
}

impl ThermalState {
    pub fn uniform(zones: usize, temp: f64) -> Self {
        ThermalState { zone_temps: vec![temp; zones], clock: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Link {
    a: usize,
    b: Option<usize>,
    conductance: f64,
}

#[derive(Debug, Clone)]
pub struct BuildingModel {
    zones: Vec<ZoneSpec>,
    couplings: Vec<Coupling>,
    air: AirProperties,
    links: Vec<Link>,
    capacitance: Vec<f64>,
}

impl BuildingModel {
    pub fn new(zones: Vec<ZoneSpec>, couplings: Vec<Coupling>, air: AirProperties) -> Result<Self> {
        if zones.is_empty() {
            return Err(Error::Config("building has no zones".into()));
        }
        if !(air.density > 0.0 && air.specific_heat > 0.0) {
            return Err(Error::Config("air density and specific heat must be > 0".into()));
        }
        let mut index = HashMap::new();
        for (i, z) in zones.iter().enumerate() {
            z.validate()?;
            if index.insert(z.id, i).is_some() {
                return Err(Error::Config(format!("duplicate zone id {}", z.id)));
            }
        }
        let lookup = |id: u32| {
            index.get(&id).copied().ok_or_else(|| Error::Config(format!("coupling references unknown zone {id}")))
        };
        let mut links = Vec::with_capacity(couplings.len());
        for c in &couplings {
            c.validate()?;
            let a = lookup(c.zone_a)?;
            let b = match c.zone_b {
                Endpoint::Zone(id) => Some(lookup(id)?),
                Endpoint::Outdoor(_) => None,
            };
            links.push(Link { a, b, conductance: c.conductance() });
        }
        let capacitance = zones
            .iter()
            .map(|z| air.density * z.volume() * air.specific_heat * z.thermal_mass_multiplier)
            .collect();
        Ok(BuildingModel { zones, couplings, air, links, capacitance })
    }

    pub fn zones(&self) -> &[ZoneSpec] {
        &self.zones
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn air(&self) -> AirProperties {
        self.air
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    pub fn zone_index(&self, id: u32) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    /// J/K per zone.
    pub fn capacitance(&self) -> &[f64] {
        &self.capacitance
    }

    /// `sum_i C_i * T_i`
    pub fn heat_content(&self, state: &ThermalState) -> f64 {
        self.capacitance.iter().zip(&state.zone_temps).map(|(c, t)| c * t).sum()
    }

    /// Sum of coupling conductances touching each zone, W/K.
    pub fn coupling_conductance(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.zones.len()];
        for l in &self.links {
            g[l.a] += l.conductance;
            if let Some(b) = l.b {
                g[b] += l.conductance;
            }
        }
        g
    }

    /// Conductance from each zone straight to outdoor air, W/K.
    pub fn exterior_conductance(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.zones.len()];
        for l in self.links.iter().filter(|l| l.b.is_none()) {
            g[l.a] += l.conductance;
        }
        g
    }

    /// Same zones with every exterior path, window and internal gain removed.
    pub fn adiabatic(&self) -> BuildingModel {
        let zones = self
            .zones
            .iter()
            .map(|z| ZoneSpec { window_area: 0.0, internal_gain_occupied: 0.0, internal_gain_vacant: 0.0, ..z.clone() })
            .collect();
        let couplings = self.couplings.iter().filter(|c| matches!(c.zone_b, Endpoint::Zone(_))).copied().collect();
        BuildingModel::new(zones, couplings, self.air).expect("subset of a valid model is valid")
    }

    /// `dt * (coupling conductance + m*cp) / C` per zone.
    pub fn stability_ratios(&self, flows: &[HvacFlow], dt: f64) -> Vec<f64> {
        let g = self.coupling_conductance();
        (0..self.zones.len())
            .map(|i| {
                let m_cp = flows.get(i).map_or(0.0, |f| f.mass_flow * self.air.specific_heat);
                dt * (g[i] + m_cp) / self.capacitance[i]
            })
            .collect()
    }

    /// Fewest equal sub-steps of `dt` that each satisfy [`STABILITY_LIMIT`].
    pub fn stable_substeps(&self, flows: &[HvacFlow], dt: f64) -> usize {
        let worst = self.stability_ratios(flows, dt).into_iter().fold(0.0, f64::max);
        ((worst / STABILITY_LIMIT).ceil() as usize).max(1)
    }
}

/// Instantaneous net heat gain of every zone, W.
pub fn heat_balance(
    model: &BuildingModel,
    state: &ThermalState,
    weather: &WeatherSample,
    hvac_flows: &[HvacFlow],
    occupied: bool,
) -> Result<Vec<f64>> {
    let n = model.zone_count();
    if state.zone_temps.len() != n {
        return Err(Error::Usage(format!("state has {} zones, model has {n}", state.zone_temps.len())));
    }
    if hvac_flows.len() != n {
        return Err(Error::Usage(format!("{} hvac flows for {n} zones", hvac_flows.len())));
    }
    let temps = &state.zone_temps;
    let cp = model.air.specific_heat;
    let mut dq: Vec<f64> = model
        .zones
        .iter()
        .zip(temps)
        .zip(hvac_flows)
        .map(|((z, &t), f)| {
            let internal = if occupied { z.internal_gain_occupied } else { z.internal_gain_vacant };
            internal + solar_gain(z, t, weather.t_sol) + hvac_gain(f.mass_flow, cp, f.supply_temp, t)
        })
        .collect();
    for l in &model.links {
        match l.b {
            Some(b) => {
                // One evaluation, applied with opposite signs, so pairs cancel exactly.
                let q = l.conductance * (temps[b] - temps[l.a]);
                dq[l.a] += q;
                dq[b] -= q;
            }
            None => dq[l.a] += l.conductance * (weather.outdoor - temps[l.a]),
        }
    }
    Ok(dq)
}

/// One explicit forward-Euler step of length `dt` seconds.
pub fn step(
    model: &BuildingModel,
    state: &ThermalState,
    weather: &WeatherSample,
    hvac_flows: &[HvacFlow],
    occupied: bool,
    dt: f64,
) -> Result<ThermalState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Usage(format!("dt must be > 0, got {dt}")));
    }
    let dq = heat_balance(model, state, weather, hvac_flows, occupied)?;
    for (i, ratio) in model.stability_ratios(hvac_flows, dt).into_iter().enumerate() {
        if ratio > STABILITY_LIMIT {
            return Err(Error::Unstable { zone: model.zones[i].id, ratio, limit: STABILITY_LIMIT });
        }
    }
    let mut next = Vec::with_capacity(dq.len());
    for (i, (&t, q)) in state.zone_temps.iter().zip(dq).enumerate() {
        let t_new = t + q * dt / model.capacitance[i];
        if !t_new.is_finite() {
            return Err(Error::IntegrationBlowup {
                zone: model.zones[i].id,
                clock_min: state.clock,
                step: (state.clock * 60.0 / dt).round() as u64,
            });
        }
        next.push(t_new);
    }
    Ok(ThermalState { zone_temps: next, clock: state.clock + dt / 60.0 })
}

/// Per-zone `|Q_in - Q_out|`; zero at steady state.
pub fn steady_state_residual(
    model: &BuildingModel,
    state: &ThermalState,
    weather: &WeatherSample,
    hvac_flows: &[HvacFlow],
    occupied: bool,
) -> Result<Vec<f64>> {
    Ok(heat_balance(model, state, weather, hvac_flows, occupied)?.into_iter().map(f64::abs).collect())
}
