//! Per-timestep powertrain physics, the rule-based baseline and whole-cycle
//! runs.
//!
//! Sign conventions: `p_batt_kw` is chemical power at the pack, positive when
//! discharging, so `Δsoc = -p_batt · dt / (3600 · capacity)` holds exactly.
//! On traction the motor output reaching the wheels is
//! `p_batt · eta_discharge · eff_motor`. On braking the pack stores
//! `regen · eta_charge`, with `regen` already including the regen efficiency.

use serde::{Deserialize, Serialize};

use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::vehicle::{ramp_limit, VehicleParams};

pub const AIR_DENSITY: f64 = 1.2;
pub const GRAVITY: f64 = 9.81;
/// Speed error above which a step counts as missing the trace.
pub const SPEED_TOL: f64 = 0.01;
/// Requested engine power below this is snapped to zero (engine off).
pub const ENGINE_OFF_KW: f64 = 0.5;
/// Resolution of the speed bisection in [`achievable_speed`].
pub const SPEED_BISECT_TOL: f64 = 1e-4;

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub step_index: usize,
    pub soc: f64,
    pub v_achieved: f64,
    pub prev_engine_kw: f64,
    /// Magnitude of the last motor output (traction or regen).
    pub prev_motor_kw: f64,
    pub cum_fuel_kwh: f64,
    /// Net pack discharge, signed.
    pub cum_batt_kwh: f64,
    pub speed_miss_count: usize,
}

impl SimState {
    pub fn initial(vehicle: &VehicleParams) -> Self {
        SimState {
            step_index: 0,
            soc: vehicle.battery.soc_initial,
            v_achieved: 0.0,
            prev_engine_kw: 0.0,
            prev_motor_kw: 0.0,
            cum_fuel_kwh: 0.0,
            cum_batt_kwh: 0.0,
            speed_miss_count: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub v_target: f64,
    pub v_achieved: f64,
    /// Power the cycle asks for (wheel plus auxiliary), signed.
    pub p_required_kw: f64,
    /// Power actually delivered for the achieved speed, signed.
    pub p_wheel_kw: f64,
    /// Source power drawn: fuel power plus positive pack power.
    pub p_achieved_kw: f64,
    pub p_ice_kw: f64,
    pub p_fuel_kw: f64,
    /// Motor output, positive for traction, negative for regen.
    pub p_motor_kw: f64,
    pub p_batt_kw: f64,
    /// Braking power not recovered.
    pub p_friction_kw: f64,
    pub regen_kwh: f64,
    pub split_u: f64,
    /// State of charge after the step.
    pub soc: f64,
    pub speed_miss: bool,
}

/// Wheel plus auxiliary power to move from `v_prev` to `v_target` over one
/// step, using the mean speed of the step for the road-load terms.
pub fn required_power(vehicle: &VehicleParams, v_prev: f64, v_target: f64, grade: f64, dt: f64) -> f64 {
    let accel = (v_target - v_prev) / dt;
    let v_mean = 0.5 * (v_prev + v_target);
    let m = vehicle.mass_kg;
    let force = m * accel
        + 0.5 * AIR_DENSITY * vehicle.drag_coeff * vehicle.frontal_area_m2 * v_mean * v_mean
        + m * GRAVITY * vehicle.rolling_resist
        + m * GRAVITY * grade;
    force * v_mean / 1000.0 + vehicle.aux_load_kw
}

/// Largest speed in `[0, v_target]` whose required power stays within
/// `p_max_kw`, to [`SPEED_BISECT_TOL`].
pub fn achievable_speed(vehicle: &VehicleParams, state: &SimState, v_target: f64, grade: f64, dt: f64, p_max_kw: f64) -> f64 {
    let v_prev = state.v_achieved;
    let p = |v: f64| required_power(vehicle, v_prev, v, grade, dt);
    if p(v_target) <= p_max_kw {
        return v_target;
    }
    if p(0.0) > p_max_kw {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, v_target);
    while hi - lo > SPEED_BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if p(mid) <= p_max_kw {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Pack power needed for a motor mechanical output of `motor_kw`.
fn pack_draw(vehicle: &VehicleParams, motor_kw: f64) -> f64 {
    if motor_kw <= 0.0 {
        return 0.0;
    }
    let eff = vehicle.motor.eff_curve.eval_clamped(motor_kw / vehicle.motor.max_power_kw);
    motor_kw / (eff * vehicle.battery.eta_discharge)
}

/// Pack power available this step under the discharge rating and SOC floor.
fn pack_discharge_cap(vehicle: &VehicleParams, soc: f64, dt: f64) -> f64 {
    let b = &vehicle.battery;
    let floor = ((soc - b.soc_min) * b.capacity_kwh * SECONDS_PER_HOUR / dt).max(0.0);
    b.max_discharge_kw.min(floor)
}

/// Highest motor output reachable this step.
fn motor_output_cap(vehicle: &VehicleParams, state: &SimState, dt: f64) -> f64 {
    let m = &vehicle.motor;
    let ramp = ramp_limit(state.prev_motor_kw, m.max_power_kw, m.time_to_full_power_s, dt);
    let pack_cap = pack_discharge_cap(vehicle, state.soc, dt);
    if pack_draw(vehicle, ramp) <= pack_cap {
        return ramp;
    }
    let (mut lo, mut hi) = (0.0, ramp);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if pack_draw(vehicle, mid) <= pack_cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn fuel_power(vehicle: &VehicleParams, p_ice: f64) -> f64 {
    if p_ice <= 0.0 {
        return 0.0;
    }
    let e = &vehicle.engine;
    p_ice / e.eff_curve.eval_clamped(p_ice / e.max_power_kw) + e.idle_fuel_kw
}

/// Advances the powertrain by one step with ICE share `split_u` of the
/// required power. Limits never fail the step; they show up as a lower
/// achieved speed and `speed_miss`.
pub fn step(state: &SimState, vehicle: &VehicleParams, v_target: f64, grade: f64, dt: f64, split_u: f64) -> (SimState, StepResult) {
    let u = if split_u.is_nan() { 0.0 } else { split_u.clamp(0.0, 1.0) };
    let b = &vehicle.battery;
    let p_req = required_power(vehicle, state.v_achieved, v_target, grade, dt);

    let mut v_achieved = v_target;
    let mut p_wheel = p_req;
    let mut p_ice = 0.0;
    let mut p_motor = 0.0;
    let p_batt;
    let mut p_friction = 0.0;
    let mut regen_kw = 0.0;

    if p_req > 0.0 {
        let e = &vehicle.engine;
        let engine_cap = ramp_limit(state.prev_engine_kw, e.max_power_kw, e.time_to_full_power_s, dt);
        p_ice = (u * p_req).clamp(0.0, engine_cap);
        if p_ice < ENGINE_OFF_KW {
            p_ice = 0.0;
        }
        let gain = vehicle.engine_path_gain();
        let mut ice_wheel = p_ice * gain;
        let motor_cap = motor_output_cap(vehicle, state, dt);
        let mut deliverable = ice_wheel + motor_cap;
        let mut saturated = false;
        if p_req > deliverable {
            v_achieved = achievable_speed(vehicle, state, v_target, grade, dt, deliverable);
            p_wheel = required_power(vehicle, state.v_achieved, v_achieved, grade, dt);
            if v_achieved > 0.0 {
                saturated = true;
            } else if p_wheel > deliverable {
                // Standing load (aux, grade) beyond what the split allows:
                // the engine picks up the shortfall, and any remainder is shed.
                p_ice = (p_ice + (p_wheel - deliverable) / gain).min(engine_cap);
                ice_wheel = p_ice * gain;
                deliverable = ice_wheel + motor_cap;
                p_wheel = p_wheel.min(deliverable);
            }
        }
        if saturated {
            // Both sources at their caps; the bisection slack between what
            // they deliver and what the achieved speed needs goes to the brakes.
            p_motor = motor_cap;
            p_friction = deliverable - p_wheel;
        } else if p_wheel <= 0.0 {
            p_ice = 0.0;
            p_friction = -p_wheel;
        } else {
            if ice_wheel > p_wheel {
                p_ice = p_wheel / gain;
                ice_wheel = p_wheel;
            }
            p_motor = (p_wheel - ice_wheel).clamp(0.0, motor_cap);
        }
        p_batt = pack_draw(vehicle, p_motor);
    } else {
        let headroom = ((b.soc_max - state.soc) * b.capacity_kwh * SECONDS_PER_HOUR / dt).max(0.0);
        regen_kw = (-p_req * vehicle.regen_efficiency)
            .min(vehicle.motor.max_power_kw)
            .min(b.max_charge_kw)
            .min(headroom / b.eta_charge);
        p_motor = -regen_kw;
        p_batt = -regen_kw * b.eta_charge;
        p_friction = -p_req - regen_kw;
    }

    let p_fuel = fuel_power(vehicle, p_ice);
    let soc = (state.soc - p_batt * dt / (SECONDS_PER_HOUR * b.capacity_kwh)).clamp(b.soc_min, b.soc_max);
    let speed_miss = (v_target - v_achieved).abs() > SPEED_TOL;

    let next = SimState {
        step_index: state.step_index + 1,
        soc,
        v_achieved,
        prev_engine_kw: p_ice,
        prev_motor_kw: p_motor.abs(),
        cum_fuel_kwh: state.cum_fuel_kwh + p_fuel * dt / SECONDS_PER_HOUR,
        cum_batt_kwh: state.cum_batt_kwh + p_batt * dt / SECONDS_PER_HOUR,
        speed_miss_count: state.speed_miss_count + speed_miss as usize,
    };
    let result = StepResult {
        v_target,
        v_achieved,
        p_required_kw: p_req,
        p_wheel_kw: p_wheel,
        p_achieved_kw: p_fuel + p_batt.max(0.0),
        p_ice_kw: p_ice,
        p_fuel_kw: p_fuel,
        p_motor_kw: p_motor,
        p_batt_kw: p_batt,
        p_friction_kw: p_friction,
        regen_kwh: regen_kw * dt / SECONDS_PER_HOUR,
        split_u: u,
        soc,
        speed_miss,
    };
    (next, result)
}

/// Everything a strategy may look at before choosing the split for a step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub state: &'a SimState,
    pub vehicle: &'a VehicleParams,
    pub v_target: f64,
    pub a_cycle: f64,
    pub grade: f64,
    pub dt: f64,
    pub p_req_kw: f64,
}

impl<'a> StepContext<'a> {
    /// Context for the step ending at sample `i` of `cycle` (`i >= 1`).
    pub fn for_cycle_step(state: &'a SimState, vehicle: &'a VehicleParams, cycle: &DriveCycle, i: usize) -> Self {
        let v_target = cycle.speed()[i];
        let grade = cycle.grade()[i];
        StepContext {
            state,
            vehicle,
            v_target,
            a_cycle: cycle.accel(i),
            grade,
            dt: cycle.dt(),
            p_req_kw: required_power(vehicle, state.v_achieved, v_target, grade, cycle.dt()),
        }
    }
}

/// A power-split policy.
pub trait Strategy {
    fn split(&mut self, ctx: &StepContext<'_>) -> f64;
}

impl<F: FnMut(&StepContext<'_>) -> f64> Strategy for F {
    fn split(&mut self, ctx: &StepContext<'_>) -> f64 {
        self(ctx)
    }
}

/// Always the same split.
#[derive(Debug, Clone, Copy)]
pub struct FixedSplit(pub f64);

impl Strategy for FixedSplit {
    fn split(&mut self, _: &StepContext<'_>) -> f64 {
        self.0
    }
}

/// Charge-blended baseline: electric while SOC is above `soc_ref` (topping up
/// with the engine only past the battery's power rating), engine-led once at
/// or below it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleBased {
    pub soc_ref: f64,
}

impl Default for RuleBased {
    fn default() -> Self {
        RuleBased { soc_ref: 0.65 }
    }
}

impl Strategy for RuleBased {
    fn split(&mut self, ctx: &StepContext<'_>) -> f64 {
        rule_based_split(ctx.state, ctx.vehicle, ctx.p_req_kw, self.soc_ref)
    }
}

/// Pure rule-based split for `(soc, p_req, limits)`.
pub fn rule_based_split(state: &SimState, vehicle: &VehicleParams, p_req_kw: f64, soc_ref: f64) -> f64 {
    if p_req_kw <= 0.0 {
        return 0.0;
    }
    if state.soc > soc_ref {
        let battery_max = vehicle.motor.max_power_kw.min(vehicle.battery.max_discharge_kw);
        if p_req_kw <= battery_max {
            0.0
        } else {
            (p_req_kw - battery_max) / p_req_kw
        }
    } else {
        let margin = vehicle.battery.max_charge_kw.min(0.1 * vehicle.engine.max_power_kw);
        ((p_req_kw + margin) / p_req_kw).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceTotals {
    pub cycle: String,
    pub vehicle: String,
    pub dt: f64,
    pub soc_initial: f64,
    pub capacity_kwh: f64,
    /// Fuel energy plus net pack energy.
    pub total_energy_kwh: f64,
    pub fuel_kwh: f64,
    pub battery_kwh: f64,
    pub final_soc: f64,
    pub distance_m: f64,
    pub speed_miss_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<StepResult>,
    pub totals: TraceTotals,
}

impl Trace {
    pub fn from_steps(vehicle: &VehicleParams, cycle: &DriveCycle, final_state: &SimState, steps: Vec<StepResult>) -> Self {
        let b = &vehicle.battery;
        let battery_kwh = (b.soc_initial - final_state.soc) * b.capacity_kwh;
        let totals = TraceTotals {
            cycle: cycle.name().to_string(),
            vehicle: vehicle.name.clone(),
            dt: cycle.dt(),
            soc_initial: b.soc_initial,
            capacity_kwh: b.capacity_kwh,
            total_energy_kwh: final_state.cum_fuel_kwh + battery_kwh,
            fuel_kwh: final_state.cum_fuel_kwh,
            battery_kwh,
            final_soc: final_state.soc,
            distance_m: steps.iter().map(|s| s.v_achieved).sum::<f64>() * cycle.dt(),
            speed_miss_steps: final_state.speed_miss_count,
        };
        Trace { steps, totals }
    }

    /// One row per step: `t,v_target,v_achieved,p_req,p_ice,p_batt,soc,fuel_kwh_cum`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,v_target,v_achieved,p_req,p_ice,p_batt,soc,fuel_kwh_cum\n");
        let mut fuel = 0.0;
        for (i, s) in self.steps.iter().enumerate() {
            fuel += s.p_fuel_kw * self.totals.dt / SECONDS_PER_HOUR;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                (i + 1) as f64 * self.totals.dt,
                s.v_target,
                s.v_achieved,
                s.p_required_kw,
                s.p_ice_kw,
                s.p_batt_kw,
                s.soc,
                fuel
            ));
        }
        out
    }

    pub fn totals_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.totals).expect("totals serialise");
        s.push('\n');
        s
    }

    /// Writes `<stem>.csv` and the `<stem>.json` totals sidecar into `dir`.
    pub fn export(&self, dir: &std::path::Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.totals_json()).map_err(|e| Error::io(&json, e))
    }
}

/// Simulates the whole cycle from the vehicle's initial SOC.
pub fn run_cycle(vehicle: &VehicleParams, cycle: &DriveCycle, strategy: &mut dyn Strategy) -> Trace {
    let mut state = SimState::initial(vehicle);
    let mut steps = Vec::with_capacity(cycle.len() - 1);
    for i in 1..cycle.len() {
        let ctx = StepContext::for_cycle_step(&state, vehicle, cycle, i);
        let u = strategy.split(&ctx);
        let (next, res) = step(&state, vehicle, ctx.v_target, ctx.grade, ctx.dt, u);
        state = next;
        steps.push(res);
    }
    Trace::from_steps(vehicle, cycle, &state, steps)
}
