//! Vehicle parameter schema, validation and efficiency curves.
//!
//! Config files are TOML with four tables:
//!
//! ```toml
//! [vehicle]   # name, mass_kg, drag_coeff, frontal_area_m2, rolling_resist,
//!             # regen_efficiency, aux_load_kw, architecture
//! [engine]    # max_power_kw, time_to_full_power_s, idle_fuel_kw, eff_curve
//! [motor]     # max_power_kw, time_to_full_power_s, base_mass_kg,
//!             # specific_power_kg_per_kw, eff_curve
//! [battery]   # capacity_kwh, max_discharge_kw, max_charge_kw, eta_discharge,
//!             # eta_charge, soc_min, soc_max, soc_initial
//! ```
//!
//! Efficiency curves are written as paired arrays,
//! `eff_curve = { load = [0.0, ..., 1.0], eff = [...] }`.
//!
//! The motor mass estimate `base_mass_kg + specific_power_kg_per_kw *
//! max_power_kw` is added to `mass_kg` on load, and `motor_mass_included` is
//! set so a re-saved config is never augmented twice.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear efficiency as a function of output power fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRepr", into = "CurveRepr")]
pub struct EfficiencyCurve {
    knots: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct CurveRepr {
    load: Vec<f64>,
    eff: Vec<f64>,
}

impl TryFrom<CurveRepr> for EfficiencyCurve {
    type Error = Error;

    fn try_from(r: CurveRepr) -> Result<Self> {
        if r.load.len() != r.eff.len() {
            return Err(Error::Validation(format!(
                "efficiency curve has {} loads but {} efficiencies",
                r.load.len(),
                r.eff.len()
            )));
        }
        EfficiencyCurve::new(r.load.into_iter().zip(r.eff).collect())
    }
}

impl From<EfficiencyCurve> for CurveRepr {
    fn from(c: EfficiencyCurve) -> Self {
        CurveRepr {
            load: c.knots.iter().map(|k| k.0).collect(),
            eff: c.knots.iter().map(|k| k.1).collect(),
        }
    }
}

impl EfficiencyCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Validation("efficiency curve needs at least two knots".into()));
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(Error::Validation("efficiency curve must span load fractions 0 to 1".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Validation("efficiency curve loads must be strictly increasing".into()));
        }
        if let Some(k) = knots.iter().find(|k| !(k.1 > 0.0 && k.1 <= 1.0)) {
            return Err(Error::Validation(format!("efficiency {} outside (0, 1]", k.1)));
        }
        Ok(EfficiencyCurve { knots })
    }

    /// Single-value curve.
    pub fn constant(eff: f64) -> Result<Self> {
        Self::new(vec![(0.0, eff), (1.0, eff)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Interpolates at a load fraction already known to be in [0, 1]; values
    /// outside are clamped.
    pub fn eval_clamped(&self, load_fraction: f64) -> f64 {
        let x = load_fraction.clamp(0.0, 1.0);
        let seg = self.knots.partition_point(|k| k.0 <= x).clamp(1, self.knots.len() - 1);
        let (x0, y0) = self.knots[seg - 1];
        let (x1, y1) = self.knots[seg];
        if x == x0 {
            return y0;
        }
        if x == x1 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Efficiency at `load_fraction`, which must lie in [0, 1].
pub fn eff_lookup(curve: &EfficiencyCurve, load_fraction: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&load_fraction) {
        return Err(Error::Argument(format!("load fraction {load_fraction} outside [0, 1]")));
    }
    Ok(curve.eval_clamped(load_fraction))
}

/// Highest output power reachable this step when ramping up from
/// `prev_power_kw` at the rate implied by the time-to-full-power rating.
pub fn ramp_limit(prev_power_kw: f64, max_power_kw: f64, time_to_full_power_s: f64, dt: f64) -> f64 {
    if time_to_full_power_s <= 0.0 {
        return max_power_kw;
    }
    let ramped = prev_power_kw.max(0.0) + max_power_kw * dt / time_to_full_power_s;
    ramped.min(max_power_kw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub max_power_kw: f64,
    pub time_to_full_power_s: f64,
    pub eff_curve: EfficiencyCurve,
    #[serde(default)]
    pub idle_fuel_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    pub max_power_kw: f64,
    pub time_to_full_power_s: f64,
    pub base_mass_kg: f64,
    pub specific_power_kg_per_kw: f64,
    pub eff_curve: EfficiencyCurve,
}

impl MotorParams {
    pub fn mass_estimate_kg(&self) -> f64 {
        self.base_mass_kg + self.specific_power_kg_per_kw * self.max_power_kw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub capacity_kwh: f64,
    pub max_discharge_kw: f64,
    pub max_charge_kw: f64,
    pub eta_discharge: f64,
    pub eta_charge: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_initial: f64,
}

/// How engine power reaches the wheels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// The engine only drives a generator; its output reaches the motor bus
    /// after the charge efficiency.
    Series,
    /// The engine can drive the axle directly.
    SeriesParallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub name: String,
    /// Test mass including the motor mass estimate.
    pub mass_kg: f64,
    pub drag_coeff: f64,
    pub frontal_area_m2: f64,
    pub rolling_resist: f64,
    pub regen_efficiency: f64,
    pub aux_load_kw: f64,
    pub architecture: Architecture,
    pub engine: EngineParams,
    pub motor: MotorParams,
    pub battery: BatteryParams,
}

impl VehicleParams {
    /// Fraction of engine output that reaches the wheels.
    pub fn engine_path_gain(&self) -> f64 {
        match self.architecture {
            Architecture::SeriesParallel => 1.0,
            Architecture::Series => self.battery.eta_charge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Validation(format!("{field}: {msg}")))
            }
        };
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        let frac = |x: f64| (0.0..=1.0).contains(&x);
        check(self.mass_kg > 0.0, "vehicle.mass_kg", "must be > 0")?;
        check(self.drag_coeff > 0.0, "vehicle.drag_coeff", "must be > 0")?;
        check(self.frontal_area_m2 > 0.0, "vehicle.frontal_area_m2", "must be > 0")?;
        check(self.rolling_resist >= 0.0, "vehicle.rolling_resist", "must be >= 0")?;
        check(unit(self.regen_efficiency), "vehicle.regen_efficiency", "must be in (0, 1]")?;
        check(self.aux_load_kw >= 0.0, "vehicle.aux_load_kw", "must be >= 0")?;

        let e = &self.engine;
        check(e.max_power_kw > 0.0, "engine.max_power_kw", "must be > 0")?;
        check(e.time_to_full_power_s >= 0.0, "engine.time_to_full_power_s", "must be >= 0")?;
        check(e.idle_fuel_kw >= 0.0, "engine.idle_fuel_kw", "must be >= 0")?;

        let m = &self.motor;
        check(m.max_power_kw > 0.0, "motor.max_power_kw", "must be > 0")?;
        check(m.time_to_full_power_s >= 0.0, "motor.time_to_full_power_s", "must be >= 0")?;
        check(m.base_mass_kg >= 0.0, "motor.base_mass_kg", "must be >= 0")?;
        check(m.specific_power_kg_per_kw >= 0.0, "motor.specific_power_kg_per_kw", "must be >= 0")?;

        let b = &self.battery;
        check(b.capacity_kwh > 0.0, "battery.capacity_kwh", "must be > 0")?;
        check(b.max_discharge_kw >= 0.0, "battery.max_discharge_kw", "must be >= 0")?;
        check(b.max_charge_kw >= 0.0, "battery.max_charge_kw", "must be >= 0")?;
        check(unit(b.eta_discharge), "battery.eta_discharge", "must be in (0, 1]")?;
        check(unit(b.eta_charge), "battery.eta_charge", "must be in (0, 1]")?;
        check(frac(b.soc_min) && frac(b.soc_max), "battery.soc_min/soc_max", "must be in [0, 1]")?;
        check(b.soc_min < b.soc_max, "battery.soc_min", "must be below soc_max")?;
        check(
            b.soc_initial >= b.soc_min && b.soc_initial <= b.soc_max,
            "battery.soc_initial",
            "must be within [soc_min, soc_max]",
        )?;
        Ok(())
    }

    /// Parses a TOML config. `motor_mass_included = false` (the default)
    /// triggers the one-time motor mass augmentation.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: VehicleFile = toml::from_str(text).map_err(schema_error)?;
        let v = file.into_params();
        v.validate()?;
        Ok(v)
    }

    /// TOML with `motor_mass_included = true`, so loading it back yields the
    /// same parameters.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&VehicleFile::from_params(self)).expect("vehicle params serialise")
    }
}

fn schema_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    // serde reports missing fields as "missing field `name`".
    let field = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.contains("field"))
        .unwrap_or("<config>")
        .to_string();
    match e.span() {
        Some(span) => Error::Schema {
            field,
            msg: format!("{msg} (at byte {})", span.start),
        },
        None => Error::Schema { field, msg },
    }
}

pub fn load_vehicle(path: impl AsRef<Path>) -> Result<VehicleParams> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    VehicleParams::from_toml_str(&text)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleFile {
    vehicle: BodySection,
    engine: EngineParams,
    motor: MotorParams,
    battery: BatteryParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodySection {
    name: String,
    mass_kg: f64,
    drag_coeff: f64,
    frontal_area_m2: f64,
    rolling_resist: f64,
    regen_efficiency: f64,
    aux_load_kw: f64,
    architecture: Architecture,
    #[serde(default)]
    motor_mass_included: bool,
}

impl VehicleFile {
    fn into_params(self) -> VehicleParams {
        let b = self.vehicle;
        let mass_kg = if b.motor_mass_included {
            b.mass_kg
        } else {
            b.mass_kg + self.motor.mass_estimate_kg()
        };
        VehicleParams {
            name: b.name,
            mass_kg,
            drag_coeff: b.drag_coeff,
            frontal_area_m2: b.frontal_area_m2,
            rolling_resist: b.rolling_resist,
            regen_efficiency: b.regen_efficiency,
            aux_load_kw: b.aux_load_kw,
            architecture: b.architecture,
            engine: self.engine,
            motor: self.motor,
            battery: self.battery,
        }
    }

    fn from_params(v: &VehicleParams) -> Self {
        VehicleFile {
            vehicle: BodySection {
                name: v.name.clone(),
                mass_kg: v.mass_kg,
                drag_coeff: v.drag_coeff,
                frontal_area_m2: v.frontal_area_m2,
                rolling_resist: v.rolling_resist,
                regen_efficiency: v.regen_efficiency,
                aux_load_kw: v.aux_load_kw,
                architecture: v.architecture,
                motor_mass_included: true,
            },
            engine: v.engine.clone(),
            motor: v.motor.clone(),
            battery: v.battery.clone(),
        }
    }
}

impl Serialize for VehicleParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VehicleFile::from_params(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for VehicleParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = VehicleFile::deserialize(d)?.into_params();
        v.validate().map_err(serde::de::Error::custom)?;
        Ok(v)
    }
}
