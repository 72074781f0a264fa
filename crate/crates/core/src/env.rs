//! One simulated building under discrete control: the agent's view of the
//! thermal model, plant and reward.

use crate::agent::state::{encode_state, StateVector};
use crate::config::Building;
use crate::error::{Error, Result};
use crate::metrics::StepRecord;
use crate::plant::{electric_energy, plant_output, translate_action, ComfortPolicy, PhysicalCommand, VavStatus};
use crate::reward::{comfort_term, energy_loss, smoothness_loss, total_reward, FahrenheitBands, RewardConfig};
use crate::thermal::{self, HvacFlow, ThermalState, WeatherSample};
use crate::units::kelvin_to_fahrenheit;

/// The VAV thermostat re-evaluates its command at least this often, s.
pub const LOCAL_LOOP_SECONDS: f64 = 60.0;

/// Minute intervals accepted as control steps: the divisors of an hour.
pub const STEP_MENU: [u32; 12] = [1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 30, 60];

pub fn check_step_minutes(step: u32) -> Result<()> {
    if STEP_MENU.contains(&step) {
        Ok(())
    } else {
        Err(Error::Config(format!("step_minutes must be one of {STEP_MENU:?}, got {step}")))
    }
}

pub struct Environment<'a> {
    building: &'a Building,
    weather: &'a [WeatherSample],
    weather_spacing: f64,
    step_minutes: u32,
    steps: usize,
    reward: RewardConfig,
    bands_f: FahrenheitBands,
    energy_scale: f64,
    state: ThermalState,
    status: Vec<VavStatus>,
    step_index: usize,
}

impl<'a> Environment<'a> {
    /// `steps` control intervals of `step_minutes`; the weather series must cover them.
    pub fn new(building: &'a Building, weather: &'a [WeatherSample], step_minutes: u32, steps: usize, reward: RewardConfig) -> Result<Self> {
        check_step_minutes(step_minutes)?;
        if weather.is_empty() {
            return Err(Error::Config("weather series is empty".into()));
        }
        crate::weather::check_uniform(weather)?;
        let weather_spacing = if weather.len() > 1 { weather[1].minute - weather[0].minute } else { step_minutes as f64 };
        let covered = weather[0].minute + weather.len() as f64 * weather_spacing;
        let needed = steps as f64 * step_minutes as f64;
        if weather[0].minute > 0.0 || covered < needed - 1e-9 {
            return Err(Error::Config(format!("weather covers [{}, {covered}) min, run needs [0, {needed})", weather[0].minute)));
        }
        let dt = step_minutes as f64 * 60.0;
        let mut env = Environment {
            building,
            weather,
            weather_spacing,
            step_minutes,
            steps,
            reward,
            bands_f: FahrenheitBands::from(&building.bands),
            energy_scale: building.energy_scale(dt),
            state: ThermalState::uniform(building.zone_count(), building.initial_temp),
            status: vec![VavStatus::default(); building.zone_count()],
            step_index: 0,
        };
        env.reset();
        Ok(env)
    }

    pub fn reset(&mut self) {
        self.state = ThermalState::uniform(self.building.zone_count(), self.building.initial_temp);
        self.status = vec![VavStatus::default(); self.building.zone_count()];
        self.step_index = 0;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn done(&self) -> bool {
        self.step_index >= self.steps
    }

    pub fn clock(&self) -> f64 {
        (self.step_index as u64 * self.step_minutes as u64) as f64
    }

    pub fn bands_f(&self) -> &FahrenheitBands {
        &self.bands_f
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    pub fn thermal_state(&self) -> &ThermalState {
        &self.state
    }

    pub fn status(&self) -> &[VavStatus] {
        &self.status
    }

    pub fn logical(&self) -> Vec<ComfortPolicy> {
        self.status.iter().map(|s| s.logical).collect()
    }

    pub fn is_work_time(&self) -> bool {
        self.building.schedule.is_work_time(self.clock())
    }

    fn weather_at(&self, minute: f64) -> &WeatherSample {
        let i = ((minute - self.weather[0].minute) / self.weather_spacing + 1e-9).floor() as usize;
        &self.weather[i.min(self.weather.len() - 1)]
    }

    pub fn zone_temps_f(&self) -> Vec<f64> {
        self.state.zone_temps.iter().map(|&t| kelvin_to_fahrenheit(t)).collect()
    }

    /// Observation at the current step: only values known now.
    pub fn observe(&self) -> StateVector {
        let w = self.weather_at(self.clock());
        encode_state(kelvin_to_fahrenheit(w.outdoor), self.is_work_time(), &self.zone_temps_f(), &self.logical())
    }

    /// Holds `actions` for one control interval while each unit's thermostat
    /// runs on its local loop.
    pub fn step(&mut self, actions: &[ComfortPolicy]) -> Result<StepRecord> {
        let n = self.building.zone_count();
        if actions.len() != n {
            return Err(Error::Usage(format!("{} actions for {n} zones", actions.len())));
        }
        if self.done() {
            return Err(Error::Usage("episode already finished".into()));
        }
        let clock = self.clock();
        let work = self.is_work_time();
        let weather = *self.weather_at(clock);
        let model = &self.building.model;
        let cp = model.air().specific_heat;
        let dt = self.step_minutes as f64 * 60.0;
        let running: Vec<HvacFlow> = self.building.vavs.iter().map(|v| HvacFlow { mass_flow: v.mass_flow_on, supply_temp: v.supply_temp_heat }).collect();
        let substeps = model.stable_substeps(&running, dt).max((dt / LOCAL_LOOP_SECONDS).ceil() as usize);
        let h = dt / substeps as f64;
        let mut commands: Vec<PhysicalCommand> = self.status.iter().map(|s| s.physical).collect();
        let mut energy = 0.0;
        let mut state = self.state.clone();
        for _ in 0..substeps {
            for i in 0..n {
                commands[i] = translate_action(actions[i], state.zone_temps[i], &self.building.bands, commands[i]);
            }
            let flows: Vec<HvacFlow> = (0..n).map(|i| plant_output(commands[i], &self.building.vavs[i], state.zone_temps[i])).collect();
            energy += (0..n).map(|i| electric_energy(commands[i], &self.building.vavs[i], cp, state.zone_temps[i], h)).sum::<f64>();
            state = thermal::step(model, &state, &weather, &flows, work, h).map_err(|e| e.context(format!("control step {}", self.step_index)))?;
        }
        state.clock = clock + self.step_minutes as f64;
        let temps_f: Vec<f64> = state.zone_temps.iter().map(|&t| kelvin_to_fahrenheit(t)).collect();
        let prev = self.logical();
        let w = &self.reward.weights;
        let l_t = comfort_term(self.reward.comfort, &temps_f, actions, work, w, &self.bands_f);
        let l_e = energy_loss(energy, w, self.energy_scale);
        let l_s = smoothness_loss(actions, &prev, w);
        let breakdown = total_reward(l_t, l_e, l_s);
        self.state = state;
        for (s, (&a, &c)) in self.status.iter_mut().zip(actions.iter().zip(&commands)) {
            *s = VavStatus { logical: a, physical: c };
        }
        self.step_index += 1;
        Ok(StepRecord {
            t_min: clock,
            outdoor_f: kelvin_to_fahrenheit(weather.outdoor),
            zone_f: temps_f,
            logical: actions.to_vec(),
            physical: commands,
            energy_j: energy,
            reward: breakdown,
            work,
        })
    }
}
