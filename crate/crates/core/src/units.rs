//! Temperature conversions. Physics runs in Kelvin; configs, logs and the
//! reward work in degrees Fahrenheit.

pub const KELVIN_OFFSET: f64 = 273.15;

pub fn fahrenheit_to_kelvin(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0 + KELVIN_OFFSET
}

pub fn kelvin_to_fahrenheit(k: f64) -> f64 {
    (k - KELVIN_OFFSET) * 9.0 / 5.0 + 32.0
}

/// Temperature differences (no offset).
pub fn delta_f_to_k(df: f64) -> f64 {
    df * 5.0 / 9.0
}

pub fn delta_k_to_f(dk: f64) -> f64 {
    dk * 9.0 / 5.0
}

/// A Fahrenheit value that parses back to exactly `k` through
/// [`fahrenheit_to_kelvin`]. Used when writing Kelvin data to °F files.
pub fn fahrenheit_exact(k: f64) -> f64 {
    let guess = kelvin_to_fahrenheit(k);
    if !guess.is_finite() || fahrenheit_to_kelvin(guess) == k {
        return guess;
    }
    // The °F grid is finer than the Kelvin one over the physical range, so a
    // preimage sits within a few ulps of the direct conversion.
    for n in 1..=64u64 {
        for candidate in [ulp_step(guess, n as i64), ulp_step(guess, -(n as i64))] {
            if fahrenheit_to_kelvin(candidate) == k {
                return candidate;
            }
        }
    }
    guess
}

fn ulp_step(x: f64, n: i64) -> f64 {
    // Positive and negative floats order their bit patterns in opposite directions.
    let bits = x.to_bits() as i64;
    let moved = if x >= 0.0 { bits + n } else { bits - n };
    f64::from_bits(moved as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn anchor_points() {
        assert!((fahrenheit_to_kelvin(32.0) - 273.15).abs() < 1e-12);
        assert!((fahrenheit_to_kelvin(104.0) - 313.15).abs() < 1e-12);
        assert!((kelvin_to_fahrenheit(373.15) - 212.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exact_preimage_roundtrips(k in 230.0f64..335.0) {
            let f = fahrenheit_exact(k);
            prop_assert_eq!(fahrenheit_to_kelvin(f).to_bits(), k.to_bits());
        }
    }
}
