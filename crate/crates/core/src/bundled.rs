//! Cycles and vehicle configs compiled into the library.
//!
//! The cycles approximate the public WLTC class 3, UDDS, HWFET, NEDC and US06
//! tabulations (see `data/README.md`); the vehicles are approximate parameter
//! sets for a Prius Prime, a BMW i3 REx and a Chevrolet Volt.

use std::collections::BTreeMap;

use crate::cycle::{parse_cycle, DriveCycle};
use crate::error::{Error, Result};
use crate::vehicle::VehicleParams;

const CYCLES: &[(&str, &str)] = &[
    ("wltp_c3", include_str!("../data/cycles/wltp_c3.csv")),
    ("udds", include_str!("../data/cycles/udds.csv")),
    ("hwfet", include_str!("../data/cycles/hwfet.csv")),
    ("nedc", include_str!("../data/cycles/nedc.csv")),
    ("us06", include_str!("../data/cycles/us06.csv")),
];

const VEHICLES: &[(&str, &str)] = &[
    ("prius_prime", include_str!("../data/vehicles/prius_prime.toml")),
    ("bmw_i3_rex", include_str!("../data/vehicles/bmw_i3_rex.toml")),
    ("chevy_volt", include_str!("../data/vehicles/chevy_volt.toml")),
];

/// Prefix that makes config paths resolve to bundled data, e.g.
/// `bundled:wltp_c3`.
pub const PREFIX: &str = "bundled:";

pub fn cycle_names() -> impl Iterator<Item = &'static str> {
    CYCLES.iter().map(|(n, _)| *n)
}

pub fn vehicle_names() -> impl Iterator<Item = &'static str> {
    VEHICLES.iter().map(|(n, _)| *n)
}

pub fn cycle_csv(name: &str) -> Result<&'static str> {
    CYCLES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| Error::Lookup(format!("no bundled cycle `{name}`")))
}

pub fn cycle(name: &str) -> Result<DriveCycle> {
    parse_cycle(cycle_csv(name)?, name)
}

pub fn vehicle_toml(name: &str) -> Result<&'static str> {
    VEHICLES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| Error::Lookup(format!("no bundled vehicle `{name}`")))
}

pub fn vehicle(name: &str) -> Result<VehicleParams> {
    VehicleParams::from_toml_str(vehicle_toml(name)?)
}

/// All bundled cycles keyed by name.
pub fn cycle_library() -> Result<BTreeMap<String, DriveCycle>> {
    cycle_names().map(|n| Ok((n.to_string(), cycle(n)?))).collect()
}
