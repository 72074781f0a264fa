//! Synthetic outdoor weather and a small CSV weather format.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agent::state::OUTDOOR_RANGE_F;
use crate::error::{Error, Result};
use crate::thermal::{solar_temperature, WeatherSample};
use crate::units::{delta_f_to_k, fahrenheit_exact, fahrenheit_to_kelvin, kelvin_to_fahrenheit};

pub const DEFAULT_SOLAR_BOOST: f64 = 20.0;

/// Sinusoidal climate: annual cycle plus daily cycle plus white noise.
/// Temperatures in K, amplitudes in K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherProfile {
    pub name: String,
    pub annual_mean: f64,
    pub seasonal_amplitude: f64,
    pub diurnal_amplitude: f64,
    pub noise_std: f64,
    /// Logged only.
    pub humidity_mean: f64,
}

impl WeatherProfile {
    /// Profile whose mean matches `mean_f` and whose seasonal and daily swings
    /// span most of `[min_f, max_f]`.
    pub fn from_climate(name: &str, mean_f: f64, max_f: f64, min_f: f64, humidity: f64) -> Self {
        let half = 0.5 * (max_f - min_f);
        WeatherProfile {
            name: name.to_string(),
            annual_mean: fahrenheit_to_kelvin(mean_f),
            seasonal_amplitude: delta_f_to_k(0.55 * half),
            diurnal_amplitude: delta_f_to_k(0.3 * half),
            noise_std: delta_f_to_k(0.05 * half),
            humidity_mean: humidity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seasonal_amplitude < 0.0 || self.diurnal_amplitude < 0.0 || self.noise_std < 0.0 {
            return Err(Error::Config(format!("weather profile {}: amplitudes and noise must be >= 0", self.name)));
        }
        if !self.annual_mean.is_finite() {
            return Err(Error::Config(format!("weather profile {}: non-finite mean", self.name)));
        }
        Ok(())
    }

    pub fn builtin(name: &str) -> Option<WeatherProfile> {
        builtin_profiles().into_iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }
}

/// Seven climates from mean, max and min annual temperature (°F) and mean humidity.
pub fn builtin_profiles() -> Vec<WeatherProfile> {
    [
        ("greenville", 60.17, 96.08, 15.98, 0.6781),
        ("phoenix", 74.89, 111.92, 35.96, 0.3418),
        ("los_angeles", 62.01, 95.00, 39.92, 0.6992),
        ("miami", 76.13, 96.08, 41.00, 0.7257),
        ("boston", 51.11, 98.96, -4.00, 0.6571),
        ("international_falls", 38.09, 95.00, -32.08, 0.7071),
        ("houston", 69.97, 96.98, 32.90, 0.7427),
    ]
    .into_iter()
    .map(|(n, mean, max, min, h)| WeatherProfile::from_climate(n, mean, max, min, h))
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherOptions {
    pub duration_days: u32,
    pub step_minutes: u32,
    /// Day of year the series starts on (0 = 1 January).
    pub start_day: u32,
    pub solar_boost: f64,
}

impl Default for WeatherOptions {
    fn default() -> Self {
        WeatherOptions { duration_days: 30, step_minutes: 12, start_day: 0, solar_boost: DEFAULT_SOLAR_BOOST }
    }
}

/// Generates one sample per control step, starting at minute 0.
pub fn generate_weather(profile: &WeatherProfile, opts: &WeatherOptions, seed: u64) -> Result<Vec<WeatherSample>> {
    profile.validate()?;
    if opts.step_minutes == 0 || opts.duration_days == 0 {
        return Err(Error::Config("weather: duration_days and step_minutes must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, profile.noise_std).map_err(|e| Error::Config(format!("weather noise: {e}")))?;
    let lo = fahrenheit_to_kelvin(OUTDOOR_RANGE_F.0);
    let hi = fahrenheit_to_kelvin(OUTDOOR_RANGE_F.1);
    let steps = opts.duration_days as u64 * 1440 / opts.step_minutes as u64;
    let tau = std::f64::consts::TAU;
    Ok((0..steps)
        .map(|k| {
            let minute = (k * opts.step_minutes as u64) as f64;
            let day = opts.start_day as f64 + minute / 1440.0;
            let hour = (minute % 1440.0) / 60.0;
            let outdoor = profile.annual_mean
                + profile.seasonal_amplitude * (tau * day / 365.0 - std::f64::consts::FRAC_PI_2).sin()
                + profile.diurnal_amplitude * (tau * (hour - 9.0) / 24.0).sin()
                + noise.sample(&mut rng);
            let outdoor = outdoor.clamp(lo, hi);
            WeatherSample { minute, outdoor, t_sol: solar_temperature(outdoor, minute % 1440.0, opts.solar_boost) }
        })
        .collect())
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Reads `t_min,outdoor_F[,t_sol_F]`. A missing solar column is derived with
/// `solar_boost`.
pub fn load_weather_csv(path: &Path, solar_boost: f64) -> Result<Vec<WeatherSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_sol = match names.as_slice() {
        ["t_min", "outdoor_F"] => false,
        ["t_min", "outdoor_F", "t_sol_F"] => true,
        _ => return Err(parse_err(path, 1, format!("expected header t_min,outdoor_F[,t_sol_F], found {}", names.join(",")))),
    };
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = record.get(i).ok_or_else(|| parse_err(path, line, format!("missing {name}")))?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("{name}: not a number: {raw:?}")))
        };
        let minute = field(0, "t_min")?;
        let outdoor = fahrenheit_to_kelvin(field(1, "outdoor_F")?);
        let t_sol = if has_sol { fahrenheit_to_kelvin(field(2, "t_sol_F")?) } else { solar_temperature(outdoor, minute.rem_euclid(1440.0), solar_boost) };
        let sample = WeatherSample { minute, outdoor, t_sol };
        sample.validate().map_err(|e| parse_err(path, line, e.to_string()))?;
        out.push(sample);
    }
    check_uniform(&out)?;
    Ok(out)
}

/// Rows must be strictly increasing with one constant spacing.
pub fn check_uniform(samples: &[WeatherSample]) -> Result<()> {
    if samples.len() < 2 {
        return Ok(());
    }
    let dt = samples[1].minute - samples[0].minute;
    if !(dt > 0.0) {
        return Err(Error::Format(format!("weather rows not increasing at t = {} min", samples[1].minute)));
    }
    for w in samples.windows(2) {
        if ((w[1].minute - w[0].minute) - dt).abs() > 1e-9 {
            return Err(Error::Format(format!("non-uniform spacing at t = {} min (expected {dt} min)", w[1].minute)));
        }
    }
    Ok(())
}

/// Writes all three columns; values reload to the same Kelvin bits.
pub fn write_weather_csv(samples: &[WeatherSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    w.write_record(["t_min", "outdoor_F", "t_sol_F"]).map_err(|e| Error::Format(e.to_string()))?;
    for s in samples {
        w.write_record([s.minute.to_string(), fahrenheit_exact(s.outdoor).to_string(), fahrenheit_exact(s.t_sol).to_string()])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Mean outdoor temperature of a series, °F.
pub fn mean_outdoor_f(samples: &[WeatherSample]) -> f64 {
    samples.iter().map(|s| kelvin_to_fahrenheit(s.outdoor)).sum::<f64>() / samples.len() as f64
}
