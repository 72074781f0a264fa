//! Three-term step reward: comfort, energy and signal smoothness. Every term
//! is a loss (<= 0); temperatures are °F.

use serde::{Deserialize, Serialize};

use crate::plant::{ComfortBands, ComfortPolicy};
use crate::units::{delta_k_to_f, kelvin_to_fahrenheit};

/// Inclusive band edges tolerate this much conversion round-off, °F.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub eta_t: f64,
    pub eta_e: f64,
    pub eta_s: f64,
    /// Finite stand-in for an infinite penalty outside the safety envelope.
    pub safety_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { eta_t: 1.0, eta_e: 1.0, eta_s: 1.0, safety_penalty: 1e6 }
    }
}

impl RewardWeights {
    pub fn scaled(&self, factor: f64) -> Self {
        RewardWeights { eta_t: self.eta_t * factor, eta_e: self.eta_e * factor, eta_s: self.eta_s * factor, safety_penalty: self.safety_penalty * factor }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ComfortLossKind {
    /// Squared distance to the band centre when out of band.
    #[default]
    Heuristic,
    /// Flat -1 per out-of-band zone.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub comfort: ComfortLossKind,
}

/// Band edges in °F; `slack` widens the safe band into the safety envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FahrenheitBands {
    pub comfort_low: f64,
    pub comfort_high: f64,
    pub safe_low: f64,
    pub safe_high: f64,
    pub slack: f64,
}

impl From<&ComfortBands> for FahrenheitBands {
    fn from(b: &ComfortBands) -> Self {
        FahrenheitBands {
            comfort_low: kelvin_to_fahrenheit(b.comfort_low),
            comfort_high: kelvin_to_fahrenheit(b.comfort_high),
            safe_low: kelvin_to_fahrenheit(b.safe_low),
            safe_high: kelvin_to_fahrenheit(b.safe_high),
            slack: delta_k_to_f(b.hysteresis),
        }
    }
}

impl FahrenheitBands {
    pub fn target(&self) -> f64 {
        0.5 * (self.comfort_low + self.comfort_high)
    }

    pub fn in_comfort(&self, t: f64) -> bool {
        t >= self.comfort_low - EDGE_EPS && t <= self.comfort_high + EDGE_EPS
    }

    pub fn in_safety_envelope(&self, t: f64) -> bool {
        t >= self.safe_low - self.slack - EDGE_EPS && t <= self.safe_high + self.slack + EDGE_EPS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub l_t: f64,
    pub l_e: f64,
    pub l_s: f64,
    pub total: f64,
}

fn safety_loss(zone_temps_f: &[f64], weights: &RewardWeights, bands: &FahrenheitBands) -> f64 {
    -weights.safety_penalty * zone_temps_f.iter().filter(|&&t| !bands.in_safety_envelope(t)).count() as f64
}

fn counts(zone: usize, comfort_on: &[ComfortPolicy], during_work: bool) -> bool {
    during_work || comfort_on.get(zone).is_some_and(|p| p.is_on())
}

/// Heuristic comfort loss: `-eta_T * (T - T_target)^2` for each zone outside
/// the (inclusive) comfort band, counted during work hours or while that
/// zone's comfort policy is on, plus the safety penalty at any time.
pub fn comfort_loss(
    zone_temps_f: &[f64],
    comfort_on: &[ComfortPolicy],
    during_work: bool,
    weights: &RewardWeights,
    bands: &FahrenheitBands,
) -> f64 {
    let target = bands.target();
    let quadratic: f64 = zone_temps_f
        .iter()
        .enumerate()
        .filter(|&(i, &t)| counts(i, comfort_on, during_work) && !bands.in_comfort(t))
        .map(|(_, &t)| -weights.eta_t * (t - target).powi(2))
        .sum();
    quadratic + safety_loss(zone_temps_f, weights, bands)
}

/// `-1` per out-of-band zone, regardless of distance.
pub fn binary_comfort_loss(zone_temps_f: &[f64], bands: &FahrenheitBands) -> f64 {
    -(zone_temps_f.iter().filter(|&&t| !bands.in_comfort(t)).count() as f64)
}

/// Comfort term of the selected kind with the same gating and safety clamp.
pub fn comfort_term(
    kind: ComfortLossKind,
    zone_temps_f: &[f64],
    comfort_on: &[ComfortPolicy],
    during_work: bool,
    weights: &RewardWeights,
    bands: &FahrenheitBands,
) -> f64 {
    match kind {
        ComfortLossKind::Heuristic => comfort_loss(zone_temps_f, comfort_on, during_work, weights, bands),
        ComfortLossKind::Binary => {
            let gated: Vec<f64> = zone_temps_f
                .iter()
                .enumerate()
                .filter(|&(i, _)| counts(i, comfort_on, during_work))
                .map(|(_, &t)| t)
                .collect();
            weights.eta_t * binary_comfort_loss(&gated, bands) + safety_loss(zone_temps_f, weights, bands)
        }
    }
}

/// `-eta_E * e_t / e_scale`; `e_scale` is the fleet's worst-case step energy.
pub fn energy_loss(e_t: f64, weights: &RewardWeights, e_scale: f64) -> f64 {
    debug_assert!(e_scale > 0.0);
    -weights.eta_e * (e_t / e_scale)
}

/// `-eta_S` per unit whose logical action flipped since the previous step.
pub fn smoothness_loss(now: &[ComfortPolicy], prev: &[ComfortPolicy], weights: &RewardWeights) -> f64 {
    debug_assert_eq!(now.len(), prev.len());
    -weights.eta_s * toggles(now, prev) as f64
}

pub fn toggles(now: &[ComfortPolicy], prev: &[ComfortPolicy]) -> usize {
    now.iter().zip(prev).filter(|(a, b)| a.is_on() ^ b.is_on()).count()
}

pub fn total_reward(l_t: f64, l_e: f64, l_s: f64) -> RewardBreakdown {
    RewardBreakdown { l_t, l_e, l_s, total: l_t + l_e + l_s }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ComfortPolicy::{Off, On};

    fn bands() -> FahrenheitBands {
        FahrenheitBands::from(&ComfortBands::default())
    }

    fn w() -> RewardWeights {
        RewardWeights::default()
    }

    #[test]
    fn comfort_examples() {
        let b = bands();
        assert_eq!(comfort_loss(&[72.5; 6], &[Off; 6], true, &w(), &b), 0.0);
        let one_cold = [70.0, 72.5, 72.5, 72.5, 72.5, 72.5];
        assert!((comfort_loss(&one_cold, &[Off; 6], true, &w(), &b) + 6.25).abs() < 1e-9);
        assert_eq!(comfort_loss(&[74.0], &[On], true, &w(), &b), 0.0);
        assert_eq!(comfort_loss(&[71.0], &[On], true, &w(), &b), 0.0);
        assert_eq!(comfort_loss(&[58.0], &[Off], false, &w(), &b), -1e6);
    }

    #[test]
    fn comfort_gating() {
        let b = bands();
        // Off-hours with comfort off: out of band but inside the safe band costs nothing.
        assert_eq!(comfort_loss(&[65.0], &[Off], false, &w(), &b), 0.0);
        // Off-hours with comfort on: counted.
        assert!((comfort_loss(&[65.0], &[On], false, &w(), &b) + 56.25).abs() < 1e-9);
        // Safety envelope includes the hysteresis slack.
        assert_eq!(comfort_loss(&[59.7], &[Off], false, &w(), &b), 0.0);
        assert_eq!(comfort_loss(&[90.4], &[Off], false, &w(), &b), 0.0);
        assert_eq!(comfort_loss(&[91.0], &[Off], false, &w(), &b), -1e6);
    }

    #[test]
    fn boundary_jump_is_half_band_squared() {
        let b = bands();
        let eta = 2.0;
        let weights = RewardWeights { eta_t: eta, ..w() };
        let half = (b.comfort_high - b.comfort_low) / 2.0;
        for edge in [b.comfort_low, b.comfort_high] {
            assert_eq!(comfort_loss(&[edge], &[On], true, &weights, &b), 0.0);
            let outside = if edge == b.comfort_low { edge - 1e-7 } else { edge + 1e-7 };
            let jump = -comfort_loss(&[outside], &[On], true, &weights, &b);
            assert!((jump - eta * half * half).abs() < 1e-5, "jump {jump}");
        }
    }

    #[test]
    fn binary_examples() {
        let b = bands();
        assert_eq!(binary_comfort_loss(&[72.0; 6], &b), 0.0);
        assert_eq!(binary_comfort_loss(&[72.0, 70.0, 75.0, 73.0, 80.0, 72.0], &b), -3.0);
        assert_eq!(binary_comfort_loss(&[70.0], &b), binary_comfort_loss(&[40.0], &b));
        let gated = comfort_term(ComfortLossKind::Binary, &[70.0, 70.0], &[On, Off], false, &w(), &b);
        assert_eq!(gated, -1.0);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_loss(0.0, &w(), 100.0), 0.0);
        assert_eq!(energy_loss(100.0, &w(), 100.0), -1.0);
        assert_eq!(energy_loss(50.0, &RewardWeights { eta_e: 2.0, ..w() }, 100.0), -1.0);
    }

    #[test]
    fn smoothness_examples() {
        assert_eq!(smoothness_loss(&[On, Off, On], &[On, Off, On], &w()), 0.0);
        assert_eq!(smoothness_loss(&[On; 6], &[Off; 6], &w()), -6.0);
        let five = RewardWeights { eta_s: 5.0, ..w() };
        assert_eq!(smoothness_loss(&[On, Off], &[Off, Off], &five), -5.0);
    }

    #[test]
    fn total_examples() {
        assert_eq!(total_reward(0.0, 0.0, 0.0).total, 0.0);
        assert!((total_reward(-6.25, -0.4, -5.0).total + 11.65).abs() < 1e-12);
    }

    fn policy() -> impl Strategy<Value = ComfortPolicy> {
        any::<bool>().prop_map(ComfortPolicy::from_bit)
    }

    proptest! {
        #[test]
        fn all_terms_non_positive(
            temps in prop::collection::vec(40.0f64..100.0, 6),
            now in prop::collection::vec(policy(), 6),
            prev in prop::collection::vec(policy(), 6),
            work in any::<bool>(), e in 0.0f64..1e7,
        ) {
            let b = bands();
            prop_assert!(comfort_loss(&temps, &now, work, &w(), &b) <= 0.0);
            prop_assert!(binary_comfort_loss(&temps, &b) <= 0.0);
            prop_assert!(energy_loss(e, &w(), 1e7) <= 0.0);
            prop_assert!(smoothness_loss(&now, &prev, &w()) <= 0.0);
        }

        #[test]
        fn smoothness_is_scaled_hamming_distance(
            now in prop::collection::vec(any::<bool>(), 6),
            prev in prop::collection::vec(any::<bool>(), 6),
            eta in 0.0f64..10.0,
        ) {
            let n: Vec<_> = now.iter().map(|&b| ComfortPolicy::from_bit(b)).collect();
            let p: Vec<_> = prev.iter().map(|&b| ComfortPolicy::from_bit(b)).collect();
            let hamming = now.iter().zip(&prev).filter(|(a, b)| a != b).count() as f64;
            let weights = RewardWeights { eta_s: eta, ..w() };
            prop_assert!((smoothness_loss(&n, &p, &weights) + eta * hamming).abs() < 1e-12);
        }

        #[test]
        fn zero_reward_exactly_when_ideal(
            temps in prop::collection::vec(71.0f64..=74.0, 6),
            acts in prop::collection::vec(policy(), 6),
        ) {
            let b = bands();
            let r = total_reward(comfort_loss(&temps, &acts, true, &w(), &b), energy_loss(0.0, &w(), 1.0), smoothness_loss(&acts, &acts, &w()));
            prop_assert_eq!(r.total, 0.0);
        }

        #[test]
        fn permutation_invariant(mut temps in prop::collection::vec(60.0f64..90.0, 6), work in any::<bool>()) {
            let b = bands();
            let before = comfort_loss(&temps, &[On; 6], work, &w(), &b);
            temps.reverse();
            let after = comfort_loss(&temps, &[On; 6], work, &w(), &b);
            prop_assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));
        }

        #[test]
        fn common_scaling_scales_total(
            temps in prop::collection::vec(61.0f64..89.0, 6),
            now in prop::collection::vec(policy(), 6),
            prev in prop::collection::vec(policy(), 6),
            e in 0.0f64..1.0, k in 0.01f64..100.0,
        ) {
            let b = bands();
            let r = |weights: &RewardWeights| total_reward(
                comfort_loss(&temps, &now, true, weights, &b),
                energy_loss(e, weights, 1.0),
                smoothness_loss(&now, &prev, weights),
            ).total;
            let base = r(&w());
            let scaled = r(&w().scaled(k));
            prop_assert!((scaled - k * base).abs() <= 1e-9 * (k * base).abs().max(1.0));
        }
    }
}
