use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::ComfortPolicy;

/// Normalization range for outdoor dry-bulb, °F.
pub const OUTDOOR_RANGE_F: (f64, f64) = (25.0, 110.0);
/// Normalization range for zone air, °F.
pub const ZONE_RANGE_F: (f64, f64) = (60.0, 90.0);

/// Network input laid out as `[O, W, T_1..T_n, V_1..V_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn from_raw(values: Vec<f64>) -> Self {
        StateVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn state_dim(zones: usize) -> usize {
    2 + 2 * zones
}

fn normalize(value: f64, (lo, hi): (f64, f64)) -> f64 {
    ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Min-max normalize the raw readings into a [`StateVector`].
pub fn encode_state(outdoor_f: f64, work: bool, zone_temps_f: &[f64], vav: &[ComfortPolicy]) -> StateVector {
    debug_assert_eq!(zone_temps_f.len(), vav.len());
    let mut v = Vec::with_capacity(state_dim(zone_temps_f.len()));
    v.push(normalize(outdoor_f, OUTDOOR_RANGE_F));
    v.push(if work { 1.0 } else { 0.0 });
    v.extend(zone_temps_f.iter().map(|&t| normalize(t, ZONE_RANGE_F)));
    v.extend(vav.iter().map(|p| if p.is_on() { 1.0 } else { 0.0 }));
    StateVector(v)
}

/// Joint action over all VAV units; bit `b` is zone `b + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionIndex(pub usize);

pub fn action_count(zones: usize) -> usize {
    1 << zones
}

pub fn decode_action(action: ActionIndex, zones: usize) -> Result<Vec<ComfortPolicy>> {
    if action.0 >= action_count(zones) {
        return Err(Error::Usage(format!("action {} out of range for {zones} zones", action.0)));
    }
    Ok((0..zones).map(|b| ComfortPolicy::from_bit(action.0 >> b & 1 == 1)).collect())
}

pub fn encode_action(policies: &[ComfortPolicy]) -> ActionIndex {
    ActionIndex(policies.iter().enumerate().filter(|(_, p)| p.is_on()).fold(0, |acc, (b, _)| acc | 1 << b))
}
