mod common;

use common::*;
use openplan_hvac::metrics::{ccr_full_time, cvr};
use openplan_hvac::plant::ComfortBands;
use openplan_hvac::reward::FahrenheitBands;

#[test]
fn ccr_matches_hand_count() {
    let v = criterion_metrics();
    assert!(v.pass, "{}", v.detail);
}

#[test]
fn cvr_and_full_time_on_hand_log() {
    let log = hand_log();
    let bands = FahrenheitBands::from(&ComfortBands::default());
    assert_eq!(cvr(&log, &bands).unwrap(), 1.0 - 31.0 / 48.0);
    // the two off-hours rows add 0 and 6 in-band readings
    assert_eq!(ccr_full_time(&log, &bands).unwrap(), 37.0 / 60.0);
}
